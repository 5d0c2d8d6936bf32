"""The Markov chain on a combing automaton.

Edges out of a large-growth vertex v_i into v_j get probability
rho_j / (lam * rho_i); this makes the n-step law proportional to counting
on the sphere (up to the rho weights) and its limit is the
Patterson-Sullivan measure on cones.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np

from .automaton import scc_report
from .errors import (AbsorbedInSmallGrowth, DegenerateChain, ElementaryGrowth,
                     InsufficientVisits, NonConvergence, NotRecurrent,
                     RecurrenceMismatch)
from .parallel import block_rng, map_ordered, trial_blocks
from .spectral import LARGE, spectral_data

SYNTHETIC = -1   # label id of the synthetic self-loop at an absorbing vertex


@dataclass(eq=False)
class MarkovChain:
    """Transition probabilities on the edges of an automaton.

    ``probs[k]`` is the probability of ``automaton.edges[k]``.  Vertices in
    ``synthetic`` carry an extra self-loop of probability one that is not an
    automaton edge.
    """
    automaton: object
    probs: tuple
    synthetic: frozenset = frozenset()
    spectral: object = None
    exact: bool = False
    _tables: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.probs = tuple(self.probs)
        self.synthetic = frozenset(self.synthetic)
        A = self.automaton
        if len(self.probs) != len(A.edges):
            raise ValueError("one probability per automaton edge required")
        for v in range(A.vertex_count):
            total = self.row_sum(v)
            if abs(float(total) - 1.0) > 1e-9:
                raise ValueError(f"outgoing probabilities at vertex {v} sum to {total}")

    def row_sum(self, v):
        total = sum(p for (s, _, _), p in zip(self.automaton.edges, self.probs) if s == v)
        return total + (1 if v in self.synthetic else 0)

    def prob(self, v, label):
        for k, (s, _, l) in enumerate(self.automaton.edges):
            if s == v and l == label:
                return self.probs[k]
        return 0

    def path_prob(self, word, start=None):
        """Product of edge probabilities along ``word``."""
        A = self.automaton
        v = A.initial if start is None else start
        p = Fraction(1) if self.exact else 1.0
        index = self._edge_index()
        for letter in word:
            k = index.get((v, letter))
            if k is None:
                A.trace(word, start)   # raises InvalidWord
            p *= self.probs[k]
            v = A.edges[k][1]
        return p

    def _edge_index(self):
        return {(s, l): k for k, (s, _, l) in enumerate(self.automaton.edges)}

    def transition_matrix(self):
        r = self.automaton.vertex_count
        P = np.zeros((r, r))
        for (s, t, _), p in zip(self.automaton.edges, self.probs):
            P[s, t] += float(p)
        for v in self.synthetic:
            P[v, v] += 1.0
        return P

    def tables(self):
        """Padded per-vertex sampling tables (cumulative, target, label id)."""
        if self._tables is None:
            A = self.automaton
            label_id = {x: i for i, x in enumerate(A.alphabet)}
            rows = [[] for _ in range(A.vertex_count)]
            for (s, t, l), p in zip(A.edges, self.probs):
                rows[s].append((float(p), t, label_id[l]))
            for v in sorted(self.synthetic):
                rows[v].append((1.0, v, SYNTHETIC))
            width = max(len(r) for r in rows)
            cum = np.full((A.vertex_count, width), 2.0)
            target = np.zeros((A.vertex_count, width), dtype=np.int32)
            label = np.full((A.vertex_count, width), SYNTHETIC, dtype=np.int16)
            for v, row in enumerate(rows):
                c = 0.0
                last = max(k for k, (p, _, _) in enumerate(row) if p > 0)
                for k, (p, t, lid) in enumerate(row):
                    c += p
                    cum[v, k] = c
                    target[v, k] = t
                    label[v, k] = lid
                cum[v, last:len(row)] = 1.0
                cum[v, last + 1:len(row)] = 2.0   # zero-probability tail never drawn
            self._tables = (cum, target, label)
        return self._tables

    def words(self, label_ids):
        """Translate label-id rows into words (tuples of letters)."""
        alpha = self.automaton.alphabet
        return [tuple(alpha[i] for i in row if i != SYNTHETIC) for row in label_ids]


def build_chain(automaton, spectral=None):
    """Markov chain with the rho-weighted transition probabilities.

    Small-growth vertices are made absorbing: their self-loop edges share
    the mass, or a synthetic self-loop is added when they have none.
    """
    spectral = spectral or spectral_data(automaton)
    if spectral.lam <= 1.0 + 1e-12:
        raise ElementaryGrowth(
            f"growth rate {spectral.lam:g} <= 1: the group is elementary")
    A = automaton
    if not spectral.is_large(A.initial):
        raise DegenerateChain("the initial vertex has small growth")
    exact = spectral.exact_rho is not None
    rho = spectral.exact_rho if exact else [float(x) for x in spectral.rho]
    lam = spectral.exact_lam if exact else float(spectral.lam)
    zero = Fraction(0) if exact else 0.0
    probs = [zero] * len(A.edges)
    synthetic = set()
    for v in range(A.vertex_count):
        out = [k for k, e in enumerate(A.edges) if e[0] == v]
        if spectral.is_large(v):
            for k in out:
                t = A.edges[k][1]
                probs[k] = rho[t] / (lam * rho[v]) if spectral.is_large(t) else zero
            if not exact:
                total = sum(probs[k] for k in out)
                if abs(total - 1.0) > 1e-9:
                    raise NonConvergence(
                        f"row {v} sums to {total!r}; rho is not accurate enough")
                for k in out:
                    probs[k] /= total
        else:
            loops = [k for k in out if A.edges[k][1] == v]
            if loops:
                for k in loops:
                    probs[k] = (Fraction(1, len(loops)) if exact else 1.0 / len(loops))
            else:
                synthetic.add(v)
    return MarkovChain(A, probs, frozenset(synthetic), spectral, exact)


# -- exact measures -------------------------------------------------------

def _cone_formula(chain, word):
    A = chain.automaton
    v = A.trace(word)
    spectral = chain.spectral
    if not spectral.is_large(v):
        return Fraction(0) if chain.exact else 0.0
    n = len(word)
    if chain.exact:
        return spectral.normalized_rho(v) / spectral.exact_lam ** n
    return spectral.normalized_rho(v) * spectral.lam ** (-n)


def n_step_prob(chain, word):
    """P^n({g}) for a combing word g of length n."""
    return _cone_formula(chain, word)


def ps_cone_measure(chain, word):
    """Patterson-Sullivan mass of cone(g)."""
    return _cone_formula(chain, word)


# -- sampling -------------------------------------------------------------

@dataclass
class SamplePath:
    seed: int
    vertices: tuple
    labels: tuple
    absorbed: bool = False

    @property
    def n(self):
        return len(self.labels)

    @property
    def word(self):
        return tuple(x for x in self.labels if x is not None)


def _walk(chain, start, n, rng, count):
    """Vectorised walk: returns (vertices (count, n+1), label ids (count, n))."""
    cum, target, label = chain.tables()
    verts = np.empty((count, n + 1), dtype=np.int32)
    labs = np.empty((count, n), dtype=np.int16)
    cur = np.full(count, start, dtype=np.int32)
    verts[:, 0] = cur
    for step in range(n):
        u = rng.random(count)
        choice = (u[:, None] >= cum[cur]).sum(axis=1)
        labs[:, step] = label[cur, choice]
        cur = target[cur, choice]
        verts[:, step + 1] = cur
    return verts, labs


def sample_path(chain, n, seed, strict=False):
    """One chain path of length ``n`` from the initial vertex."""
    rng = block_rng(seed, 0, stream=1)
    verts, labs = _walk(chain, chain.automaton.initial, n, rng, 1)
    alpha = chain.automaton.alphabet
    labels = tuple(alpha[i] if i != SYNTHETIC else None for i in labs[0])
    absorbed = any(x is None for x in labels)
    if absorbed and strict:
        raise AbsorbedInSmallGrowth("walk entered an absorbing small-growth vertex")
    return SamplePath(seed, tuple(int(v) for v in verts[0]), labels, absorbed)


def _sample_block(chain, n, seed, start_vertex, blk):
    b, _, count = blk
    return _walk(chain, start_vertex, n, block_rng(seed, b), count)


def path_blocks(chain, n, trials, seed, start=None, workers=1):
    """Sample ``trials`` paths in seeded blocks; list of (vertices, labels)."""
    start = chain.automaton.initial if start is None else start
    func = partial(_sample_block, chain, n, seed, start)
    return map_ordered(func, trial_blocks(trials), workers)


def sample_words(chain, n, trials, seed, workers=1):
    """Words of ``trials`` sampled paths (deterministic in ``seed``)."""
    words = []
    for _, labs in path_blocks(chain, n, trials, seed, workers=workers):
        words.extend(chain.words(labs.tolist()))
    return words


# -- recurrence -----------------------------------------------------------

@dataclass
class RecurrenceReport:
    recurrent: list         # recurrent components as sorted vertex lists
    maximal: list           # maximal components as sorted vertex lists
    matches: bool


def recurrent_components(chain, check=True):
    """Recurrent classes of the positive-probability graph.

    With ``check`` set, a mismatch with the maximal components of the
    automaton raises RecurrenceMismatch.
    """
    A = chain.automaton
    r = A.vertex_count
    succ = [set() for _ in range(r)]
    for (s, t, _), p in zip(A.edges, chain.probs):
        if p > 0:
            succ[s].add(t)
    for v in chain.synthetic:
        succ[v].add(v)

    def reach(v):
        seen = {v}
        todo = [v]
        while todo:
            x = todo.pop()
            for y in succ[x]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return seen

    closure = [reach(v) for v in range(r)]
    from_root = closure[A.initial]
    recurrent = set()
    for v in from_root:
        if all(v in closure[w] for w in closure[v]):
            recurrent.add(v)
    comps = []
    for v in sorted(recurrent):
        if not any(v in c for c in comps):
            comps.append(sorted(w for w in recurrent if w in closure[v] and v in closure[w]))
    report = scc_report(A)
    maximal = sorted(sorted(report.members[c]) for c in report.maximal_components())
    matches = sorted(comps) == maximal
    if check and not matches:
        raise RecurrenceMismatch(
            f"recurrent components {comps} differ from maximal components {maximal}")
    return RecurrenceReport(comps, maximal, matches)


def recurrent_vertices(chain):
    return sorted(v for c in recurrent_components(chain, check=False).recurrent for v in c)


# -- first returns --------------------------------------------------------

@dataclass
class FirstReturnData:
    vertex: int
    trials: int
    loops: dict             # word -> empirical frequency
    histogram: dict         # return time -> count
    mean_return: float
    mean_return_se: float
    tail_rate: float        # c in P(tau = n) <= exp(-c n), from the survival fit
    tail_slope: float
    tail_residual: float
    truncated: int = 0      # excursions cut at the length cap

    def prob(self, n):
        return self.histogram.get(n, 0) / self.trials

    def prob_se(self, n):
        p = self.prob(n)
        return math.sqrt(p * (1 - p) / self.trials)


def _excursion_block(chain, v, seed, cap, stream, blk):
    b, _, count = blk
    rng = block_rng(seed, b, stream=stream)
    cum, target, label = chain.tables()
    cur = np.full(count, v, dtype=np.int32)
    length = np.zeros(count, dtype=np.int64)
    active = np.ones(count, dtype=bool)
    cols = []
    steps = 0
    while active.any() and steps < cap:
        u = rng.random(count)
        choice = (u[:, None] >= cum[cur]).sum(axis=1)
        col = np.where(active, label[cur, choice], SYNTHETIC)
        cols.append(col.astype(np.int16))
        cur = np.where(active, target[cur, choice], cur)
        steps += 1
        length[active] = steps
        active &= cur != v
    labs = np.stack(cols, axis=1) if cols else np.zeros((count, 0), dtype=np.int16)
    return length, labs, active


def sample_excursions(chain, v, trials, seed, cap=10_000, stream=2, workers=1):
    """Primitive loops at ``v``: list of (word, length), plus truncation count."""
    func = partial(_excursion_block, chain, v, seed, cap, stream)
    loops, truncated = [], 0
    alpha = chain.automaton.alphabet
    for length, labs, active in map_ordered(func, trial_blocks(trials), workers):
        truncated += int(active.sum())
        for L, row in zip(length.tolist(), labs.tolist()):
            loops.append(tuple(alpha[i] for i in row[:L] if i != SYNTHETIC))
    return loops, truncated


def survival_fit(lengths, min_count=30):
    """Least-squares fit of log P(tau > n) over n above the median.

    Only points with at least ``min_count`` surviving excursions are used.
    Returns (slope, rms residual).
    """
    lengths = np.asarray(lengths)
    N = len(lengths)
    med = int(np.median(lengths))
    top = int(lengths.max())
    ns, logs = [], []
    for n in range(med, top + 1):
        alive = int((lengths > n).sum())
        if alive < min_count:
            break
        ns.append(n)
        logs.append(math.log(alive / N))
    if len(ns) < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(ns, logs, 1)
    resid = np.asarray(logs) - (slope * np.asarray(ns) + icpt)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))


def first_return(chain, v, trials, seed, workers=1):
    """Monte Carlo law of the first return to a recurrent vertex ``v``."""
    if v not in recurrent_vertices(chain):
        raise NotRecurrent(f"vertex {v} is not recurrent")
    loops, truncated = sample_excursions(chain, v, trials, seed, workers=workers)
    lengths = np.array([len(w) for w in loops])
    freq = Counter(loops)
    slope, resid = survival_fit(lengths)
    return FirstReturnData(
        vertex=v, trials=trials,
        loops={w: c / trials for w, c in freq.most_common()},
        histogram=dict(sorted(Counter(lengths.tolist()).items())),
        mean_return=float(lengths.mean()),
        mean_return_se=float(lengths.std(ddof=1) / math.sqrt(trials)),
        tail_rate=-slope, tail_slope=slope, tail_residual=resid,
        truncated=truncated)


@dataclass
class PathDecomposition:
    prefix: tuple
    loops: list
    tail: tuple
    cuts: list              # times n(k, v) at which the path sits at v

    def concat(self):
        out = tuple(self.prefix)
        for loop in self.loops:
            out += tuple(loop)
        return out + tuple(self.tail)


def decompose_path(path, v):
    """Cut a sample path at its visits to ``v``."""
    cuts = [k for k, x in enumerate(path.vertices) if x == v]
    if len(cuts) < 2:
        raise InsufficientVisits(f"path visits vertex {v} {len(cuts)} time(s)")
    labels = tuple(path.labels)
    loops = [labels[a:b] for a, b in zip(cuts, cuts[1:])]
    return PathDecomposition(labels[:cuts[0]], loops, labels[cuts[-1]:], cuts)


@dataclass
class IndependenceCheck:
    used: int
    discarded: int
    rows: list              # (loop1, loop2, joint, product, z)
    max_abs_z: float


def loop_independence(chain, v, trials, seed, n=64, top=10, workers=1):
    """Compare the joint law of the first two loops at ``v`` with the product
    of their empirical marginals on the most frequent pairs."""
    pairs = []
    discarded = 0
    for verts, labs in path_blocks(chain, n, trials, seed, workers=workers):
        words = chain.words(labs.tolist())
        for vs, w in zip(verts.tolist(), words):
            cuts = [k for k, x in enumerate(vs) if x == v]
            if len(cuts) < 3:
                discarded += 1
                continue
            pairs.append((w[cuts[0]:cuts[1]], w[cuts[1]:cuts[2]]))
    N = len(pairs)
    first = Counter(p[0] for p in pairs)
    second = Counter(p[1] for p in pairs)
    joint = Counter(pairs)
    rows = []
    for (a, b), c in joint.most_common(top):
        pj = c / N
        pp = first[a] / N * second[b] / N
        se = math.sqrt(pp * (1 - pp) / N)
        rows.append((a, b, pj, pp, (pj - pp) / se if se else 0.0))
    return IndependenceCheck(N, discarded, rows, max((abs(r[4]) for r in rows), default=0.0))


# -- measure comparisons --------------------------------------------------

@dataclass
class ConeComparison:
    cone: tuple             # the words whose cones make up A
    n: int
    counting: object        # P^n(A and LG)
    markov: object          # P^n(A) under the chain
    ratio: object           # None when both vanish
    bound: float
    ok: bool


def comparison_constant(chain, n_max):
    """c with ratio in [1/c, c]: rho spread times the sphere constant."""
    from .automaton import sphere_count

    spectral = chain.spectral
    A = chain.automaton
    psi = [spectral.normalized_rho(v) for v in range(A.vertex_count) if spectral.is_large(v)]
    spread = max(max(psi), 1 / min(psi))
    lam = spectral.exact_lam if chain.exact else spectral.lam
    rho0 = spectral.exact_rho[A.initial] if chain.exact else spectral.rho[A.initial]
    sphere = 1
    for n in range(1, max(1, n_max) + 1):
        sigma = sphere_count(A, n) / (lam ** n) / rho0
        sphere = max(sphere, sigma, 1 / sigma)
    return float(spread) * float(sphere)


def counting_vs_markov(automaton, chain, n, cones):
    """Counting measure of A and LG against the chain's n-step law of A.

    Each entry of ``cones`` is a combing word (one cone) or a list of words
    (union of their cones).  An empty list stands for the empty set.
    """
    from .automaton import enumerate_sphere, sphere_count

    spectral = chain.spectral
    sets = [[tuple(c)] if isinstance(c, tuple) else [tuple(w) for w in c] for c in cones]
    total = sphere_count(automaton, n)
    count = [0] * len(sets)
    mass = [Fraction(0) if chain.exact else 0.0 for _ in sets]
    for word, v in enumerate_sphere(automaton, n):
        hits = [i for i, s in enumerate(sets)
                if any(word[:len(c)] == c for c in s)]
        if not hits:
            continue
        p = n_step_prob(chain, word)
        large = spectral.is_large(v)
        for i in hits:
            if large:
                count[i] += 1
            mass[i] += p
    c = comparison_constant(chain, n)
    rows = []
    for s, k, m in zip(sets, count, mass):
        counting = Fraction(k, total) if chain.exact else k / total
        if m == 0 and counting == 0:
            rows.append(ConeComparison(tuple(s), n, counting, m, None, c, True))
            continue
        ratio = counting / m if m else math.inf
        ok = 1 / c - 1e-12 <= float(ratio) <= c + 1e-12
        rows.append(ConeComparison(tuple(s), n, counting, m, ratio, c, ok))
    return rows


# -- Patterson-Sullivan as a combination of harmonic measures ---------------

@dataclass
class HarmonicTerm:
    prefix: tuple
    vertex: int
    weight: object          # mu(prefix)
    hit: float              # estimated gamma_* nu_v (cone g)
    se: float
    sampled: bool


@dataclass
class HarmonicCheck:
    word: tuple
    exact: float
    estimate: float
    se: float
    truncated_mass: float
    terms: list

    @property
    def discrepancy(self):
        return self.estimate - self.exact


def entry_prefixes(chain, max_len=16):
    """Paths from the initial vertex that first meet a recurrent vertex at
    their end (positive probability only); with the unexplored mass."""
    A = chain.automaton
    rec = set(recurrent_vertices(chain))
    index = {}
    for k, (s, _, l) in enumerate(A.edges):
        index.setdefault(s, []).append(k)
    found = []
    frontier = [((), A.initial, Fraction(1) if chain.exact else 1.0)]
    if A.initial in rec:
        return [((), A.initial, frontier[0][2])], 0.0
    for _ in range(max_len):
        nxt = []
        for word, v, w in frontier:
            for k in index.get(v, ()):
                p = chain.probs[k]
                if p <= 0:
                    continue
                _, t, l = A.edges[k]
                item = (word + (l,), t, w * p)
                (found if t in rec else nxt).append(item)
        frontier = nxt
        if not frontier:
            break
    lost = float(sum(w for _, _, w in frontier))
    return found, lost


def harmonic_decomposition_check(chain, word, walk_trials, seed, max_prefix_len=16):
    """Compare the PS mass of cone(word) with the sum over entry prefixes of
    mu(prefix) times the probability that the mu_v random walk, started at
    the prefix, lands in the cylinder of ``word``."""
    word = tuple(word)
    exact = float(ps_cone_measure(chain, word))
    prefixes, lost = entry_prefixes(chain, max_prefix_len)
    terms = []
    estimate = 0.0
    var = 0.0
    for k, (gamma, v, weight) in enumerate(prefixes):
        m = min(len(gamma), len(word))
        if gamma[:m] != word[:m]:
            terms.append(HarmonicTerm(gamma, v, weight, 0.0, 0.0, False))
            continue
        need = word[len(gamma):]
        if not need:
            terms.append(HarmonicTerm(gamma, v, weight, 1.0, 0.0, False))
            estimate += float(weight)
            continue
        hits = _walk_cylinder_hits(chain, v, need, walk_trials, seed, k)
        p = hits / walk_trials
        se = math.sqrt(p * (1 - p) / walk_trials)
        terms.append(HarmonicTerm(gamma, v, weight, p, se, True))
        estimate += float(weight) * p
        var += float(weight) ** 2 * se ** 2
    return HarmonicCheck(word, exact, estimate, math.sqrt(var), lost, terms)


def _walk_cylinder_hits(chain, v, target, trials, seed, stream):
    """Count i.i.d. first-return-loop walks at ``v`` whose concatenated
    letters start with ``target``."""
    need = len(target)
    # every loop has length >= 1, so ``need`` loops per trial always suffice
    pool, _ = sample_excursions(chain, v, trials * need, seed, stream=100 + stream)
    pos = 0
    hits = 0
    for _ in range(trials):
        acc = ()
        while len(acc) < need:
            acc += pool[pos]
            pos += 1
        hits += acc[:need] == target
    return hits
