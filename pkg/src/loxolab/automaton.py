"""Geodesic combing automata.

A :class:`CombingAutomaton` is a finite directed graph with labelled edges
and an initial vertex.  Paths from the initial vertex spell the combing
words; their endpoints are the terminal vertices used everywhere else
(cone types, growth classes, Markov states).
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .budget import current_budget
from .errors import (CountOverflow, DuplicateLabel, InvalidWord,
                     MalformedFile, UnreachableVertex)
from .words import inverse_letter

GROWTH_RTOL = 1e-9


@dataclass(frozen=True)
class CombingAutomaton:
    alphabet: tuple
    vertex_count: int
    edges: tuple
    initial: int = 0
    names: tuple = None
    _out: tuple = field(init=False, repr=False, compare=False)
    _delta: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        edges = tuple((int(s), int(t), str(l)) for s, t, l in self.edges)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "edges", edges)
        r = self.vertex_count
        if r < 1:
            raise MalformedFile("automaton needs at least one vertex")
        if not 0 <= self.initial < r:
            raise MalformedFile(f"initial vertex {self.initial} out of range")
        if len(set(alphabet)) != len(alphabet):
            raise MalformedFile("alphabet has repeated symbols")
        missing = [x for x in alphabet if inverse_letter(x) not in alphabet]
        if missing:
            raise MalformedFile(f"alphabet not closed under inversion: {missing}")
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != r:
                raise MalformedFile("names must list one entry per vertex")

        order = {x: k for k, x in enumerate(alphabet)}
        out = [[] for _ in range(r)]
        delta = {}
        for s, t, label in edges:
            if not (0 <= s < r and 0 <= t < r):
                raise MalformedFile(f"edge {(s, t, label)} has a vertex out of range")
            if label not in order:
                raise MalformedFile(f"label {label!r} not in alphabet")
            if (s, label) in delta:
                raise DuplicateLabel(
                    f"vertex {s} has two outgoing edges labelled {label!r}")
            delta[s, label] = t
            out[s].append((label, t))
        for row in out:
            row.sort(key=lambda e: order[e[0]])
        object.__setattr__(self, "_out", tuple(tuple(row) for row in out))
        object.__setattr__(self, "_delta", delta)

        seen = {self.initial}
        todo = [self.initial]
        while todo:
            v = todo.pop()
            for _, t in out[v]:
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        if len(seen) != r:
            lost = sorted(set(range(r)) - seen)
            raise UnreachableVertex(
                f"vertices {lost} are not reachable from the initial vertex")

    # -- structure -------------------------------------------------------
    def out_edges(self, v):
        """Outgoing ``(label, target)`` pairs of ``v`` in alphabet order."""
        return self._out[v]

    def step(self, v, label):
        return self._delta.get((v, label))

    def vertex_name(self, v):
        return self.names[v] if self.names else f"v{v}"

    def adjacency_matrix(self, dtype=np.int64):
        M = np.zeros((self.vertex_count, self.vertex_count), dtype=dtype)
        for s, t, _ in self.edges:
            M[s, t] += 1
        return M

    def trace(self, word, start=None):
        """Terminal vertex of ``word`` read from ``start``; InvalidWord if rejected."""
        v = self.initial if start is None else start
        for k, letter in enumerate(word):
            nxt = self._delta.get((v, letter))
            if nxt is None:
                raise InvalidWord(
                    f"word {' '.join(word)!r} rejected at position {k} "
                    f"(no edge {letter!r} from vertex {v})")
            v = nxt
        return v

    def vertex_path(self, word, start=None):
        v = self.initial if start is None else start
        path = [v]
        for letter in word:
            v = self._delta.get((v, letter))
            if v is None:
                raise InvalidWord(f"word {' '.join(word)!r} is not a combing word")
            path.append(v)
        return path

    def accepts(self, word):
        try:
            self.trace(word)
        except InvalidWord:
            return False
        return True

    # -- serialisation ---------------------------------------------------
    def to_dict(self):
        d = {"alphabet": list(self.alphabet), "vertices": self.vertex_count,
             "initial": self.initial,
             "edges": [[s, t, l] for s, t, l in self.edges]}
        if self.names:
            d["names"] = list(self.names)
        return d

    def content_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def automaton_from_dict(data):
    try:
        return CombingAutomaton(
            alphabet=tuple(data["alphabet"]),
            vertex_count=int(data["vertices"]),
            edges=tuple(tuple(e) for e in data["edges"]),
            initial=int(data.get("initial", 0)),
            names=data.get("names"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"bad automaton description: {exc}") from exc


def load_automaton(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedFile(f"{path}: expected a JSON object")
    for e in data.get("edges", []):
        if not (isinstance(e, list) and len(e) == 3):
            raise MalformedFile(f"{path}: edge {e!r} is not [from, to, label]")
    return automaton_from_dict(data)


def save_automaton(automaton, path):
    with open(path, "w") as fh:
        json.dump(automaton.to_dict(), fh, indent=1)


# -- built-in families ---------------------------------------------------

def generator_names(k):
    letters = "abcdefghijklmnopqrstuvwxyz"
    if k <= len(letters):
        return list(letters[:k])
    return [f"x{i}" for i in range(1, k + 1)]


def free_group_automaton(k, gens=None):
    """Reduced words in the free group of rank ``k``."""
    gens = list(gens) if gens else generator_names(k)
    letters = []
    for g in gens:
        letters += [g, inverse_letter(g)]
    vertex = {x: i + 1 for i, x in enumerate(letters)}
    edges = [(0, vertex[x], x) for x in letters]
    for x in letters:
        for y in letters:
            if y != inverse_letter(x):
                edges.append((vertex[x], vertex[y], y))
    names = ["v0"] + [f"s_{x}" for x in letters]
    return CombingAutomaton(tuple(letters), len(letters) + 1, tuple(edges),
                            names=tuple(names))


def _syllable_states(order):
    """Numbers of positive / negative syllable states for a cyclic factor.

    ``order`` is an int >= 2 or ``math.inf``.  A finite factor uses the
    geodesic representatives x^i (1 <= i <= order//2) and x^-i
    (1 <= i <= (order-1)//2); an infinite one gets a looping state per sign.
    """
    if order == math.inf:
        return None
    return order // 2, (order - 1) // 2


def free_product_cyclic_automaton(p, q, gens=("a", "b")):
    """Geodesic normal forms in Z/p * Z/q (``math.inf`` allowed)."""
    for order in (p, q):
        if order != math.inf and (int(order) != order or order < 2):
            raise ValueError(f"factor order must be >= 2 or inf, got {order}")
    factors = [(gens[0], p), (gens[1], q)]
    names = ["v0"]
    entry = []      # per factor: list of (label, first state)
    edges = []
    states = []     # per factor: list of state ids
    for gen, order in factors:
        inv = inverse_letter(gen)
        ids = []
        starts = []
        counts = _syllable_states(order)
        if counts is None:
            pos, neg = len(names), len(names) + 1
            names += [f"s_{gen}", f"s_{inv}"]
            edges += [(pos, pos, gen), (neg, neg, inv)]
            ids += [pos, neg]
            starts += [(gen, pos), (inv, neg)]
        else:
            npos, nneg = counts
            for sign, count, label in ((1, npos, gen), (-1, nneg, inv)):
                chain = []
                for i in range(1, count + 1):
                    chain.append(len(names))
                    names.append(f"s_{label}" if i == 1 else f"s_{label}#{i}")
                for a, b in zip(chain, chain[1:]):
                    edges.append((a, b, label))
                if chain:
                    starts.append((label, chain[0]))
                ids += chain
        entry.append(starts)
        states.append(ids)
    for label, target in entry[0] + entry[1]:
        edges.append((0, target, label))
    for f in (0, 1):
        for s in states[f]:
            for label, target in entry[1 - f]:
                edges.append((s, target, label))
    alphabet = (gens[0], inverse_letter(gens[0]), gens[1], inverse_letter(gens[1]))
    return CombingAutomaton(alphabet, len(names), tuple(edges), names=tuple(names))


def free_product_free_automaton(k=1, l=1):
    """F_k * F_l; as a combing this is the reduced-word automaton of F_{k+l}.

    The factor split only matters to the Bass-Serre tree action, which
    puts the first ``k`` generators in one factor and the rest in the other.
    """
    return free_group_automaton(k + l)


def _parse_order(tok):
    tok = tok.strip().lower()
    return math.inf if tok in ("inf", "oo", "infinity") else int(tok)


def builtin_automaton(family):
    """Build a named automaton.

    ``family`` is one of ``free:K``, ``cyclic:P,Q`` (orders may be ``inf``)
    or ``freeprod[:K,L]``.
    """
    name, _, args = family.partition(":")
    name = name.strip().lower()
    if name in ("free", "freegroup"):
        k = int(args or 2)
        if k < 1:
            raise ValueError("free group rank must be >= 1")
        return free_group_automaton(k)
    if name in ("cyclic", "freeproductcyclic"):
        p, q = (_parse_order(t) for t in args.split(","))
        return free_product_cyclic_automaton(p, q)
    if name in ("freeprod", "freeproductfree"):
        k, l = (int(t) for t in args.split(",")) if args else (1, 1)
        return free_product_free_automaton(k, l)
    raise ValueError(f"unknown builtin family {family!r}")


# -- counting -------------------------------------------------------------

def path_counts(automaton, n, budget=None):
    """Exact vector of path counts of length ``n`` from every vertex."""
    budget = budget or current_budget()
    out = automaton._out
    counts = [1] * automaton.vertex_count
    for _ in range(n):
        counts = [sum(counts[t] for _, t in row) for row in out]
        top = max(counts)
        if top.bit_length() > budget.count_bits:
            raise CountOverflow(
                f"path count exceeds {budget.count_bits} bits "
                "(raise it with LOXOLAB_BUDGET=bits=N)")
    return counts


def sphere_count(automaton, n, budget=None):
    """Number of length-``n`` paths from the initial vertex (= #S_n)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return path_counts(automaton, n, budget)[automaton.initial]


def cone_count(automaton, word, k, budget=None):
    """Number of length-``k`` continuations of a combing word."""
    v = automaton.trace(word)
    return path_counts(automaton, k, budget)[v]


def paths_from(automaton, start, n, prefix=()):
    """Yield ``(word, terminal)`` for each length-``n`` path from ``start``.

    Words are ``prefix`` followed by the path labels, in lexicographic order
    of the alphabet declaration.
    """
    prefix = tuple(prefix)
    if n == 0:
        yield prefix, start
        return
    out = automaton._out
    labels = [None] * n
    verts = [start] + [0] * n
    idx = [0] * n
    depth = 0
    while depth >= 0:
        row = out[verts[depth]]
        i = idx[depth]
        if i == len(row):
            depth -= 1
            continue
        idx[depth] = i + 1
        label, t = row[i]
        labels[depth] = label
        if depth + 1 == n:
            yield prefix + tuple(labels), t
        else:
            depth += 1
            verts[depth] = t
            idx[depth] = 0


def sphere_blocks(automaton, n, split=2):
    """Partition S_n by prefixes of length ``min(split, n)``.

    Returns ``(prefix, vertex, remaining)`` triples whose concatenated
    enumerations reproduce :func:`enumerate_sphere` in order.
    """
    k = min(split, n)
    return [(w, v, n - k) for w, v in paths_from(automaton, automaton.initial, k)]


def enumerate_sphere(automaton, n, budget=None):
    """Yield ``(word, terminal vertex)`` for every element of S_n."""
    budget = budget or current_budget()
    budget.check_sphere(sphere_count(automaton, n, budget), f"S_{n}")
    yield from paths_from(automaton, automaton.initial, n)


def prefix_length(n):
    """Length of the prefix g-hat for a word of length ``n``.

    ``n - ceil(ln n)``, clamped to at least 1 for n >= 1.
    """
    if n <= 0:
        return 0
    return min(n, max(1, n - math.ceil(math.log(n))))


def prefix_hat(automaton, word):
    word = tuple(word)
    automaton.trace(word)
    return word[:prefix_length(len(word))]


# -- components -----------------------------------------------------------

@dataclass
class SCCReport:
    component: list          # component id per vertex
    members: list            # vertices per component
    dag_edges: list          # condensation edges (i, j), i != j
    radius: list             # spectral radius per component
    growth: float            # global growth (max radius)
    maximal: list            # bool per component
    period: list             # gcd of cycle lengths (0 for trivial components)

    def maximal_components(self):
        return [c for c, flag in enumerate(self.maximal) if flag]

    def descendants(self, c):
        succ = {}
        for i, j in self.dag_edges:
            succ.setdefault(i, set()).add(j)
        seen = {c}
        todo = [c]
        while todo:
            x = todo.pop()
            for y in succ.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return seen


def _block_radius(block):
    if block.shape[0] == 1:
        return float(block[0, 0])
    # Perron root of an irreducible block is simple, so eigvals is accurate
    return float(np.max(np.abs(np.linalg.eigvals(block.astype(float)))))


def _period(block):
    """gcd of cycle lengths of an irreducible 0/1 pattern (BFS level method)."""
    n = block.shape[0]
    level = {0: 0}
    todo = [0]
    g = 0
    while todo:
        v = todo.pop()
        for w in np.nonzero(block[v])[0]:
            w = int(w)
            if w not in level:
                level[w] = level[v] + 1
                todo.append(w)
            else:
                g = math.gcd(g, level[v] + 1 - level[w])
    return abs(g) if n else 0


def scc_report(automaton):
    M = automaton.adjacency_matrix()
    r = automaton.vertex_count
    _, labels = connected_components(csr_matrix(M), directed=True, connection="strong")
    # stable ids: order components by their smallest vertex
    first = {}
    for v, lab in enumerate(labels):
        first.setdefault(int(lab), v)
    order = sorted(first, key=first.get)
    relabel = {lab: i for i, lab in enumerate(order)}
    comp = [relabel[int(lab)] for lab in labels]
    members = [[] for _ in order]
    for v, c in enumerate(comp):
        members[c].append(v)
    dag = sorted({(comp[s], comp[t]) for s, t, _ in automaton.edges if comp[s] != comp[t]})
    radius, period = [], []
    for vs in members:
        block = M[np.ix_(vs, vs)]
        if len(vs) == 1 and block[0, 0] == 0:
            radius.append(0.0)
            period.append(0)
        else:
            radius.append(_block_radius(block))
            period.append(_period(block))
    growth = max(radius)
    tol = GROWTH_RTOL * max(1.0, growth)
    maximal = [growth > 0 and abs(x - growth) <= tol for x in radius]
    return SCCReport(comp, members, dag, radius, growth, maximal, period)


@dataclass
class SemisimplicityResult:
    passed: bool
    witness: list = None     # chain of component ids with radius == growth
    reason: str = ""

    def __bool__(self):
        return self.passed


def almost_semisimple_check(automaton, report=None):
    """Structural test of the almost-semisimple conditions.

    Reachability from the initial vertex is enforced when the automaton is
    built.  The eigenvalue condition fails exactly when the condensation
    DAG has a directed chain through two distinct components of maximal
    spectral radius.
    """
    report = report or scc_report(automaton)
    ncomp = len(report.members)
    succ = [[] for _ in range(ncomp)]
    for i, j in report.dag_edges:
        succ[i].append(j)
    # longest chain of maximal components starting at each component
    best = [None] * ncomp

    def longest(c):
        if best[c] is None:
            tail = []
            for d in succ[c]:
                cand = longest(d)
                if len(cand) > len(tail):
                    tail = cand
            best[c] = ([c] + tail) if report.maximal[c] else tail
        return best[c]

    chain = max((longest(c) for c in range(ncomp)), key=len)
    if len(chain) >= 2:
        names = ["{" + ",".join(automaton.vertex_name(v) for v in report.members[c]) + "}"
                 for c in chain]
        return SemisimplicityResult(
            False, chain,
            "components " + " -> ".join(names) + " all have growth "
            f"{report.growth:.6g}: eigenvalue of maximal modulus is not semisimple")
    return SemisimplicityResult(True, None, "")
