"""Finite-n experiments: drift, genericity, shadows, Gromov products.

Every experiment returns an :class:`ExperimentReport` whose rows are a
deterministic function of the parameters and the seed.  Monte Carlo work
is cut into seeded blocks (see :mod:`loxolab.parallel`), so the worker
count never changes the output.
"""

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np

from .automaton import (path_counts, paths_from, prefix_length, sphere_blocks,
                        sphere_count)
from .budget import current_budget
from .errors import PreconditionFailed
from .markov import _walk
from .parallel import block_rng, map_ordered, trial_blocks
from .spectral import SMALL
from .words import inverse_word

# stream ids keep the experiments' random draws disjoint
_DRIFT, _SHADOW_CENTERS, _SHADOW_WALKS, _GROMOV, _CONVERGE, _TRANSLATION = range(10, 16)


@dataclass
class ExperimentReport:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    automaton_hash: str = None
    action_hash: str = None

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def row_dicts(self):
        return [dict(zip(self.columns, r)) for r in self.rows]


def _words_block(chain, n, seed, stream, blk):
    b, _, count = blk
    _, labs = _walk(chain, chain.automaton.initial, n, block_rng(seed, b, stream), count)
    return chain.words(labs.tolist())


def _mc_values(chain, n, trials, seed, stream, func, workers):
    """func(words) evaluated on each seeded block of sampled words."""
    return np.concatenate(map_ordered(partial(_mc_block, chain, n, seed, stream, func),
                                      trial_blocks(trials), workers))


def _mc_block(chain, n, seed, stream, func, blk):
    return np.asarray(func(_words_block(chain, n, seed, stream, blk)), dtype=float)


def _sphere_block(automaton, func, block):
    prefix, v, rem = block
    return [func(w) for w, _ in paths_from(automaton, v, rem, prefix)]


def sphere_values(automaton, n, func, workers=1, budget=None):
    """[func(g) for g in S_n] in enumeration order, split by prefix blocks."""
    budget = budget or current_budget()
    budget.check_sphere(sphere_count(automaton, n, budget), f"S_{n}")
    parts = map_ordered(partial(_sphere_block, automaton, func),
                        sphere_blocks(automaton, n), workers)
    return [x for part in parts for x in part]


# -- drift ------------------------------------------------------------------

def _scaled_displacements(action, n, words):
    return [action.displacement(w) / n for w in words]


def _se(values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def drift(automaton, chain, action, mode="montecarlo", n=12, trials=10_000,
          seed=0, workers=1):
    """Mean of d(x, g x)/n over S_n (enumerate) or over chain paths (montecarlo).

    Enumeration reports the uniform mean and the mean under the chain's
    n-step weights; its standard error is 0 since the sphere is exhausted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = dict(mode=mode, n=n, trials=trials, seed=seed)
    cols = ["mode", "n", "weights", "mean", "se", "std", "min", "max", "count"]
    rep = ExperimentReport("drift", cols, params=params,
                           automaton_hash=automaton.content_hash(),
                           action_hash=action.config_hash())
    if mode == "enumerate":
        vals = np.array(sphere_values(automaton, n, partial(_disp_over_n, action, n),
                                      workers))
        probs = np.array(sphere_values(automaton, n, partial(_path_prob, chain), workers))
        # compensated sums keep constant displacements exact
        total = math.fsum(probs)
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        mean = math.fsum(vals) / len(vals)
        wmean = math.fsum(probs * vals) / total
        wstd = math.sqrt(max(0.0, math.fsum(probs * (vals - wmean) ** 2) / total))
        rep.rows.append(("enumerate", n, "uniform", mean, 0.0, std,
                         float(vals.min()), float(vals.max()), len(vals)))
        rep.rows.append(("enumerate", n, "markov", wmean, 0.0, wstd,
                         float(vals.min()), float(vals.max()), len(vals)))
    elif mode == "montecarlo":
        if trials < 1000:
            raise ValueError("montecarlo drift needs at least 1000 trials")
        vals = _mc_values(chain, n, trials, seed, _DRIFT,
                          partial(_scaled_displacements, action, n), workers)
        mean = float(vals.mean())
        rep.rows.append(("montecarlo", n, "markov", mean, _se(vals),
                         float(vals.std(ddof=1)), float(vals.min()),
                         float(vals.max()), len(vals)))
    else:
        raise ValueError(f"unknown drift mode {mode!r}")
    first = rep.row_dicts()[0]
    rep.summary = {"mean": first["mean"], "se": first["se"], "std": first["std"]}
    return rep


def _disp_over_n(action, n, word):
    return action.displacement(word) / n


def _path_prob(chain, word):
    return float(chain.path_prob(word))


# -- genericity -------------------------------------------------------------

def _tau_value(action, word):
    """Translation length: exact when the action has a rule, else the estimate.

    Returns None when the estimate's precondition fails.
    """
    if action._tau_exact_supported():
        return action.tau_exact(word)
    try:
        return action.tau_estimate(word)
    except PreconditionFailed:
        return None


def _genericity_item(action, word):
    tau = _tau_value(action, word)
    lox = action.is_loxodromic(word)
    return action.displacement(word), tau, lox


def genericity_scan(automaton, action, n_max, epsilon, L_ref, n_min=1, workers=1):
    """Per n: fractions of S_n with large displacement, large tau, loxodromic."""
    cols = ["n", "count", "threshold", "frac_displacement", "frac_tau",
            "frac_loxodromic", "frac_elliptic"]
    rep = ExperimentReport("genericity", cols,
                           params=dict(n_min=n_min, n_max=n_max, epsilon=epsilon,
                                       L_ref=L_ref),
                           automaton_hash=automaton.content_hash(),
                           action_hash=action.config_hash())
    for n in range(n_min, n_max + 1):
        items = sphere_values(automaton, n, partial(_genericity_item, action), workers)
        thr = (L_ref - epsilon) * n
        m = len(items)
        disp = sum(1 for d, _, _ in items if d >= thr - 1e-12)
        tau = sum(1 for _, t, _ in items if t is not None and t >= thr - 1e-12)
        lox = sum(1 for _, _, x in items if x)
        rep.rows.append((n, m, thr, disp / m, tau / m, lox / m, 1 - lox / m))
    return rep


def small_growth_prefix_fraction(automaton, n, spectral=None):
    """Exact fraction of S_n whose prefix g-hat ends at a small-growth vertex."""
    from .spectral import classify
    if n < 2:
        raise ValueError("n must be >= 2")
    classes = spectral.growth_class if spectral else classify(automaton)
    k = prefix_length(n)
    # forward counts: paths of length k from the initial vertex ending at v
    fwd = [0] * automaton.vertex_count
    fwd[automaton.initial] = 1
    for _ in range(k):
        nxt = [0] * automaton.vertex_count
        for v, c in enumerate(fwd):
            if c:
                for _, t in automaton._out[v]:
                    nxt[t] += c
        fwd = nxt
    tails = path_counts(automaton, n - k)
    total = sphere_count(automaton, n)
    small = sum(fwd[v] * tails[v] for v in range(automaton.vertex_count)
                if classes[v] == SMALL)
    return Fraction(small, total) if total else Fraction(0)


# -- shadows ----------------------------------------------------------------

def _pick_center(chain, action, r, seed, index, max_len):
    """Shortest prefix of a seeded chain path with displacement >= r."""
    rng = block_rng(seed, index, _SHADOW_CENTERS + 1000 * int(r))
    _, labs = _walk(chain, chain.automaton.initial, max_len, rng, 1)
    word = chain.words(labs.tolist())[0]
    t = action.tracker()
    for k, x in enumerate(word):
        t.push(x)
        d = t.displacement()
        if d >= r:
            return word[:k + 1], d - r
    raise ValueError(f"no sampled center reached displacement {r} within {max_len} steps")


def _max_products_block(chain, action, center, horizon, seed, stream, blk):
    """max over k <= horizon of (g x, w_k x)_x for each walk in the block.

    A walk enters S_x(gx, R) iff this maximum is >= d(x, gx) - R, so one
    pass gives the hitting probability for every R at once.
    """
    b, _, count = blk
    _, labs = _walk(chain, chain.automaton.initial, horizon,
                    block_rng(seed, b, stream), count)
    D = action.displacement(center)
    ginv = inverse_word(center)
    out = []
    for word in chain.words(labs.tolist()):
        here = action.tracker()
        rel = action.tracker(ginv)       # tracks d(g x, w_k x)
        best = 0.0                       # w_0 x = x
        for x in word:
            if best >= D - 1e-12:        # (gx, z)_x never exceeds d(x, gx)
                break
            here.push(x)
            rel.push(x)
            best = max(best, 0.5 * (D + here.displacement() - rel.displacement()))
        out.append(best)
    return np.array(out)


def max_shadow_products(chain, action, center, horizon, trials, seed,
                        stream=_SHADOW_WALKS, workers=1):
    """Per-walk maxima of (g x, w_k x)_x; walks are shared across centers."""
    parts = map_ordered(partial(_max_products_block, chain, action, tuple(center),
                                horizon, seed, stream), trial_blocks(trials), workers)
    return np.concatenate(parts)


def _hit_stats(maxima, need):
    trials = len(maxima)
    hits = int(np.count_nonzero(maxima >= need - 1e-12))
    p = hits / trials
    return p, math.sqrt(max(p * (1 - p), 0.0) / trials), hits


def shadow_hitting_probability(chain, action, center, R, horizon, trials, seed,
                               stream=_SHADOW_WALKS, workers=1):
    """Empirical probability that a length-``horizon`` path enters S_x(gx, R)."""
    maxima = max_shadow_products(chain, action, center, horizon, trials, seed,
                                 stream, workers)
    return _hit_stats(maxima, action.displacement(tuple(center)) - R)


def _counting_mass(automaton, action, center, R, n, workers):
    from .actions import ShadowSpec
    spec = ShadowSpec(tuple(center), R)
    inside = sphere_values(automaton, n, partial(_in_shadow, action, spec), workers)
    return sum(inside) / len(inside)


def _in_shadow(action, spec, word):
    return action.shadow_contains(spec, word)


def shadow_decay_scan(chain, action, r_values, horizon, trials, seed, centers=4,
                      count_n=None, workers=1):
    """Max over seeded centers of the shadow hitting probability, per r.

    For each positive r, ``centers`` seeded chain paths contribute their
    shortest prefix g with d(x, gx) >= r.  The family used at r is every
    collected center with d(x, gx) >= r, with R = d(x, gx) - r, so it only
    grows as r decreases and, since all centers share the same walks, the
    curve is nonincreasing in r.  The max over the family is a lower bound
    for the supremum over all centers.  ``count_n`` adds the counting mass
    of the winning shadow on S_n (default: the largest n <= horizon with
    #S_n <= 20000).
    """
    A = chain.automaton
    if count_n is None:
        count_n = 0
        for m in range(1, horizon + 1):
            if sphere_count(A, m) > 20_000:
                break
            count_n = m
    cols = ["r", "center", "R", "hit_prob", "se", "hits", "trials", "horizon",
            "count_n", "counting_mass"]
    rep = ExperimentReport("shadows", cols,
                           params=dict(r_values=list(r_values), horizon=horizon,
                                       trials=trials, seed=seed, centers=centers,
                                       count_n=count_n),
                           automaton_hash=A.content_hash(),
                           action_hash=action.config_hash())
    family = {(): 0.0}
    for r in r_values:
        if r > 0:
            for i in range(centers):
                g, R = _pick_center(chain, action, r, seed, i, max(4 * math.ceil(r), 64))
                family.setdefault(g, R + r)
    maxima = {g: max_shadow_products(chain, action, g, horizon, trials, seed,
                                     workers=workers) for g in family}
    for r in r_values:
        best = None
        for g, d in family.items():
            if d < r - 1e-12:
                continue
            p, se, hits = _hit_stats(maxima[g], r)
            if best is None or p > best[3]:
                best = (g, d, p, se, hits)
        g, d, p, se, hits = best
        R = d - r + 0.0
        mass = _counting_mass(A, action, g, R, count_n, workers) if count_n else None
        rep.rows.append((r, " ".join(g) or "1", R, p, se, hits, trials, horizon,
                         count_n, mass))
    return rep


# -- Gromov products ----------------------------------------------------------

def _split_products(action, word):
    n = len(word)
    m = n // 2
    a, b = word[:m], word[m:]
    binv, ginv = inverse_word(b), inverse_word(word)
    gp = action.gromov_product
    return (gp(a, binv).value, gp(a, word).value, gp(binv, ginv).value,
            gp(word, ginv).value)


_ENUM_STATS = ("(ax,b^-1x)", "(ax,gx)", "(b^-1x,g^-1x)", "(gx,g^-1x)")
_MC_STATS = ("(w_m x,u^-1x)", "(w_m x,w_n x)", "(u^-1x,w_n^-1x)", "(w_n x,w_n^-1x)")


def _split_block(action, words):
    return [_split_products(action, w) for w in words]


def _cone_independence(automaton, n, depth=1, workers=1):
    """max over depth-``depth`` cone pairs of P^n(a in A, b in B) / (P^n1(A) P^n2(B))."""
    m = n // 2
    n1, n2 = m, n - m
    pre = partial(_prefix_pair, m, depth)
    pairs = sphere_values(automaton, n, pre, workers)
    joint, left, right = {}, {}, {}
    for p in pairs:
        joint[p] = joint.get(p, 0) + 1
    total = len(pairs)
    for w, _ in paths_from(automaton, automaton.initial, n1):
        left[w[:depth]] = left.get(w[:depth], 0) + 1
    s1 = sum(left.values())
    for w, _ in paths_from(automaton, automaton.initial, n2):
        right[w[:depth]] = right.get(w[:depth], 0) + 1
    s2 = sum(right.values())
    worst = 0.0
    for (x, y), c in joint.items():
        ratio = (c / total) / ((left[x] / s1) * (right[y] / s2))
        worst = max(worst, ratio)
    return worst


def _prefix_pair(m, depth, word):
    return word[:depth], word[m:m + depth]


def gromov_product_stats(automaton, chain, action, n, trials, seed, eta=0.25,
                         workers=1, enumerate_sphere=True):
    """Distributions of the split Gromov products on S_n and on chain paths.

    g = a b with |a| = floor(n/2).  Rows give mean, median and the fraction
    at or below the threshold eta * n for each statistic.
    """
    thr = eta * n
    cols = ["source", "statistic", "n", "mean", "median", "max", "threshold",
            "frac_below", "count"]
    rep = ExperimentReport("gromov", cols,
                           params=dict(n=n, trials=trials, seed=seed, eta=eta),
                           automaton_hash=automaton.content_hash(),
                           action_hash=action.config_hash())

    def add(source, names, table):
        arr = np.asarray(table, dtype=float)
        for k, name in enumerate(names):
            col = arr[:, k]
            rep.rows.append((source, name, n, float(col.mean()), float(np.median(col)),
                             float(col.max()), thr,
                             float(np.mean(col <= thr + 1e-12)), len(col)))

    if enumerate_sphere:
        add("counting", _ENUM_STATS,
            sphere_values(automaton, n, partial(_split_products, action), workers))
        if n >= 2:
            rep.summary["independence_c"] = _cone_independence(automaton, n, 1, workers)
    if trials:
        parts = map_ordered(partial(_mc_split_block, chain, action, n, seed),
                            trial_blocks(trials), workers)
        add("markov", _MC_STATS, [row for part in parts for row in part])
    return rep


def _mc_split_block(chain, action, n, seed, blk):
    return _split_block(action, _words_block(chain, n, seed, _GROMOV, blk))


# -- boundary convergence -----------------------------------------------------

def default_checkpoints(n):
    return sorted({max(1, n // 4), max(1, n // 2), max(1, 3 * n // 4), n})


def _converge_block(chain, action, n, checkpoints, seed, blk):
    out = []
    cps = list(checkpoints)
    for word in _words_block(chain, n, seed, _CONVERGE, blk):
        disp = {}
        t = action.tracker()
        k = 0
        for m in cps:
            while k < m:
                if k < len(word):     # absorbed paths are shorter
                    t.push(word[k])
                k += 1
            disp[m] = t.displacement()
        worst = math.inf
        per_m = []
        for i, m in enumerate(cps[:-1]):
            seg = action.tracker()
            low = math.inf
            k = m
            for m2 in cps[i + 1:]:
                while k < m2:
                    if k < len(word):
                        seg.push(word[k])
                    k += 1
                gp = 0.5 * (disp[m] + disp[m2] - seg.displacement())
                low = min(low, gp)
            per_m.append(low)
            worst = min(worst, low)
        out.append(per_m + [worst])
    return out


def boundary_convergence_diag(chain, action, n, checkpoints=None, trials=1000,
                              seed=0, workers=1):
    """Gromov products (w_m x, w_m' x)_x between checkpoints along paths.

    Row per checkpoint m: statistics of min over later m' of the product;
    the final row ("all") is the min over all checkpoint pairs.
    """
    checkpoints = [int(m) for m in (checkpoints or default_checkpoints(n))]
    increasing = all(x < y for x, y in zip(checkpoints, checkpoints[1:]))
    if not increasing or len(checkpoints) < 2 or checkpoints[0] < 1 or checkpoints[-1] > n:
        raise ValueError("need at least two increasing checkpoints in [1, n]")
    A = chain.automaton
    parts = map_ordered(partial(_converge_block, chain, action, n, checkpoints, seed),
                        trial_blocks(trials), workers)
    table = np.array([row for part in parts for row in part], dtype=float)
    cols = ["n", "checkpoint", "mean", "median", "q10", "se"]
    rep = ExperimentReport("converge", cols,
                           params=dict(n=n, checkpoints=checkpoints, trials=trials,
                                       seed=seed),
                           automaton_hash=A.content_hash(),
                           action_hash=action.config_hash())
    labels = [str(m) for m in checkpoints[:-1]] + ["all"]
    for k, lab in enumerate(labels):
        col = table[:, k]
        rep.rows.append((n, lab, float(col.mean()), float(np.median(col)),
                         float(np.quantile(col, 0.1)), _se(col)))
    rep.summary["median"] = rep.rows[-1][3]
    return rep


# -- translation length -------------------------------------------------------

def _translation_block(chain, action, n, seed, oracle_steps, blk):
    out = []
    for w in _words_block(chain, n, seed, _TRANSLATION, blk):
        if action._tau_exact_supported():
            out.append(action.tau_exact(w))
        else:
            out.append(action.tau_limit(w, oracle_steps))
    return out


def translation_growth_mc(chain, action, n, trials, seed, epsilon, L=None,
                          L_trials=10_000, oracle_steps=64, workers=1):
    """Fraction of sampled w_n with tau(w_n) >= (L - epsilon) n.

    tau is exact where the action has a rule, else d(x, w^N x)/N.  L
    defaults to the Monte Carlo drift at n = 200.
    """
    if trials < 1000:
        raise ValueError("translation_growth_mc needs at least 1000 trials")
    A = chain.automaton
    if L is None:
        L = drift(A, chain, action, "montecarlo", 200, L_trials, seed,
                  workers).summary["mean"]
    parts = map_ordered(partial(_translation_block, chain, action, n, seed, oracle_steps),
                        trial_blocks(trials), workers)
    taus = np.array([x for part in parts for x in part], dtype=float)
    thr = (L - epsilon) * n
    frac = float(np.mean(taus >= thr - 1e-12))
    cols = ["n", "L", "epsilon", "threshold", "fraction", "se", "mean_tau_over_n", "trials"]
    rep = ExperimentReport("translation", cols,
                           params=dict(n=n, trials=trials, seed=seed, epsilon=epsilon,
                                       L=L, oracle_steps=oracle_steps),
                           automaton_hash=A.content_hash(),
                           action_hash=action.config_hash())
    rep.rows.append((n, L, epsilon, thr, frac,
                     math.sqrt(frac * (1 - frac) / trials),
                     float(taus.mean() / n), trials))
    rep.summary["fraction"] = frac
    return rep


# -- fellow traveling -----------------------------------------------------------

@dataclass
class FellowTravelSummary:
    trials: int
    checked: int
    skipped: int
    violations: list        # (a, b, c, d, A, (a,c), (b,d))
    worst_gap: float        # max |(a,c) - (b,d)| - 2 delta over checked quadruples


def fellow_travel_check(action, trials, seed, max_len=8, A_max=4.0):
    """Run the fellow-traveling predicate on seeded quadruples.

    b shares a random prefix with a and d with c, so the hypotheses hold
    often; A is drawn uniformly from [0, A_max].
    """
    from .errors import HypothesesNotMet
    from .words import free_reduce, random_reduced_word
    rng = block_rng(seed, 0, stream=700)
    gens = action.generators

    def word():
        return random_reduced_word(rng, gens, int(rng.integers(0, max_len + 1)))

    def near(w):
        k = int(rng.integers(0, len(w) + 1))
        return free_reduce(w[:k] + word())

    checked = skipped = 0
    violations = []
    worst = -math.inf
    for _ in range(trials):
        a, c = word(), word()
        b, d = near(a), near(c)
        A = float(rng.uniform(0.0, A_max))
        try:
            cert = action.fellow_travel_predicate(a, b, c, d, A)
        except HypothesesNotMet:
            skipped += 1
            continue
        checked += 1
        worst = max(worst, abs(cert.ac - cert.bd) - cert.slack)
        if not cert.ok:
            violations.append((a, b, c, d, A, cert.ac, cert.bd))
    return FellowTravelSummary(trials, checked, skipped, violations, worst)
