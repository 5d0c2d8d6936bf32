"""One test per acceptance criterion.

Each test records a single PASS/FAIL line (printed in the terminal summary)
before asserting, so a failing criterion still reports its measured values.
"""

import math
import time
from fractions import Fraction

import numpy as np
from scipy.stats import chisquare

from conftest import ACCEPTANCE_LINES
from loxolab.actions import HyperbolicPlane, builtin_action
from loxolab.automaton import builtin_automaton, enumerate_sphere, paths_from
from loxolab.cli import main
from loxolab.errors import PreconditionFailed
from loxolab.experiments import (drift, fellow_travel_check, genericity_scan,
                                 gromov_product_stats, shadow_decay_scan,
                                 shadow_hitting_probability)
from loxolab.markov import (build_chain, comparison_constant, counting_vs_markov,
                            first_return, harmonic_decomposition_check, n_step_prob,
                            path_blocks, sample_path)
from loxolab.spectral import spectral_data


def record(k, ok, title, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:>2}: {title}: {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def test_criterion_01_spectral_exactness():
    t0 = time.perf_counter()
    f2 = spectral_data(builtin_automaton("free:2"))
    z23 = spectral_data(builtin_automaton("cyclic:2,3"))
    elapsed = time.perf_counter() - t0
    rho_err = float(np.max(np.abs(f2.rho - np.array([4 / 3, 1, 1, 1, 1]))))
    lam_err = abs(z23.lam - math.sqrt(2))
    ok = (abs(f2.lam - 3) <= 1e-9 and rho_err <= 1e-9 and lam_err <= 1e-9
          and elapsed < 1.0)
    record(1, ok, "spectral exactness",
           f"lambda(F2)={f2.lam}, |rho-(4/3,1,1,1,1)|={rho_err:.1e}, "
           f"|lambda(Z2*Z3)-sqrt2|={lam_err:.1e}, {elapsed:.3f}s")
    assert ok


def test_criterion_02_markov_equals_counting():
    t0 = time.perf_counter()
    A = builtin_automaton("free:2")
    chain = build_chain(A)
    exact = all(n_step_prob(chain, w) == Fraction(1, 4 * 3 ** (n - 1))
                for n in range(1, 9) for w, _ in enumerate_sphere(A, n))
    words = [w for w, _ in enumerate_sphere(A, 3)]
    index = {w: i for i, w in enumerate(words)}
    counts = np.zeros(len(words), dtype=np.int64)
    for _, labs in path_blocks(chain, 3, 1_000_000, seed=2):
        for w in chain.words(labs.tolist()):
            counts[index[w]] += 1
    expected = np.array([float(n_step_prob(chain, w)) for w in words]) * counts.sum()
    pval = chisquare(counts, expected).pvalue
    elapsed = time.perf_counter() - t0
    ok = exact and pval > 0.001 and elapsed < 30
    record(2, ok, "Markov = counting on F2",
           f"exact 1/(4*3^(n-1)) for n<=8: {exact}, chi2 p={pval:.3f} "
           f"({len(words)} cells, 1e6 samples), {elapsed:.1f}s")
    assert ok


def test_criterion_03_sandwich():
    worst, all_ok, free_exact = 0.0, True, True
    for name in ("free:2", "cyclic:2,3"):
        A = builtin_automaton(name)
        chain = build_chain(A)
        cones = [w for k in range(3) for w, _ in paths_from(A, A.initial, k)]
        c = comparison_constant(chain, 10)
        for n in range(1, 11):
            for row in counting_vs_markov(A, chain, n, cones):
                all_ok &= row.ok and row.bound <= c + 1e-12
                if row.ratio is not None:
                    r = float(row.ratio)
                    worst = max(worst, r, 1 / r)
                    if name == "free:2":
                        free_exact &= row.ratio == 1
    ok = all_ok and free_exact
    record(3, ok, "sandwich on depth<=2 cones, n<=10",
           f"max(ratio, 1/ratio)={worst:.4f} within [1/c, c]; F2 ratio exactly 1: {free_exact}")
    assert ok


def _taboo_first_return(chain, v, n_max):
    P = chain.transition_matrix()
    rest = [u for u in range(P.shape[0]) if u != v]
    T = P[np.ix_(rest, rest)]
    out, row = [P[v, v]], P[v, rest]
    for _ in range(2, n_max + 1):
        out.append(float(row @ P[rest, v]))
        row = row @ T
    return out


def test_criterion_04_first_return():
    chain = build_chain(builtin_automaton("free:2"))
    v = 1   # s_a
    fr = first_return(chain, v, 100_000, seed=4)
    oracle = _taboo_first_return(chain, v, 2)
    z1 = abs(fr.prob(1) - 1 / 3) / fr.prob_se(1)
    z2 = abs(fr.prob(2) - 2 / 9) / fr.prob_se(2)
    rel = abs(fr.mean_return - 4) / 4
    ok = (abs(oracle[0] - 1 / 3) < 1e-12 and abs(oracle[1] - 2 / 9) < 1e-12
          and z1 <= 3 and z2 <= 3 and rel <= 0.02 and fr.tail_slope < 0)
    record(4, ok, "first-return law at s_a",
           f"P(1)={fr.prob(1):.4f} (z={z1:.2f}), P(2)={fr.prob(2):.4f} (z={z2:.2f}), "
           f"T_v={fr.mean_return:.4f} ({100 * rel:.2f}%), tail slope={fr.tail_slope:.3f}")
    assert ok


def test_criterion_05_harmonic_decomposition():
    chain = build_chain(builtin_automaton("free:2"))
    parts, ok = [], True
    for word, target in ((("a",), 1 / 4), (("a", "b"), 1 / 12)):
        chk = harmonic_decomposition_check(chain, word, 100_000, seed=5)
        z = abs(chk.estimate - target) / max(chk.se, 1e-15)
        ok &= abs(chk.exact - target) < 1e-12 and z <= 3
        parts.append(f"{' '.join(word)}: {chk.estimate:.5f} vs {target:.5f} (z={z:.2f})")
    record(5, ok, "harmonic decomposition", "; ".join(parts))
    assert ok


def test_criterion_06_drift():
    t0 = time.perf_counter()
    A = builtin_automaton("free:2")
    chain = build_chain(A)
    tree = builtin_action("cayley-tree")
    bs = builtin_action("bass-serre")
    tree_rep = drift(A, chain, tree, "enumerate", n=10)
    tree_mc = drift(A, chain, tree, "montecarlo", n=100, trials=10_000, seed=6)
    tree_ok = (all(r["mean"] == 1.0 and r["std"] == 0.0 for r in tree_rep.row_dicts())
               and tree_mc.summary["mean"] == 1.0 and tree_mc.summary["std"] == 0.0)
    enum12 = drift(A, chain, bs, "enumerate", n=12)
    mc12 = drift(A, chain, bs, "montecarlo", n=12, trials=100_000, seed=6)
    mc200 = drift(A, chain, bs, "montecarlo", n=200, trials=100_000, seed=6)
    e, m, mse = enum12.summary["mean"], mc12.summary["mean"], mc12.summary["se"]
    agree = abs(e - m) <= 3 * mse     # enumeration has no sampling error
    elapsed = time.perf_counter() - t0
    ok = (tree_ok and abs(e - 2 / 3) <= 0.05 and abs(mc200.summary["mean"] - 2 / 3) <= 0.01
          and agree and elapsed < 300)
    record(6, ok, "drift",
           f"tree L=1 exactly: {tree_ok}; Bass-Serre S_12 mean={e:.6f}, "
           f"MC n=200 mean={mc200.summary['mean']:.5f}+-{mc200.summary['se']:.1e}, "
           f"MC n=12 {m:.5f}+-{mse:.1e} agrees: {agree}, {elapsed:.0f}s")
    assert ok


def _torsion_fraction(action, A, n):
    # image in Z/2*Z/3 has finite order iff its cyclic normal form lies in one factor
    total = torsion = 0
    for w, _ in enumerate_sphere(A, n):
        total += 1
        torsion += action.tau_exact(w) == 0
    return torsion / total


def test_criterion_07_genericity_of_loxodromics():
    A = builtin_automaton("free:2")
    bs = builtin_action("bass-serre")
    rep = genericity_scan(A, bs, 12, 0.1, 2 / 3, n_min=4)
    ell = {r["n"]: r["frac_elliptic"] for r in rep.row_dicts()}
    seq = [ell[n] for n in (4, 6, 8, 10, 12)]
    mono = all(x >= y for x, y in zip(seq, seq[1:]))
    quotient = builtin_action("quotient:2,3")
    tors = _torsion_fraction(quotient, A, 12)
    ok_bs = mono and seq[-1] <= 0.01
    ok_q = tors <= 0.05
    record(7, ok_bs and ok_q, "genericity of loxodromics",
           f"Bass-Serre elliptic n=4..12: {', '.join(f'{x:.5f}' for x in seq)} "
           f"({'ok' if ok_bs else 'fails'}); F2->Z2*Z3 torsion-image fraction at n=12 "
           f"= {tors:.6f} (bound 0.05, {'ok' if ok_q else 'fails'}; see notes)")
    assert ok_bs and ok_q


def test_criterion_08_translation_length():
    A = builtin_automaton("free:2")
    tree_ok, checked = True, 0
    for action in (builtin_action("cayley-tree"), builtin_action("bass-serre")):
        for n in range(1, 9):
            for w, _ in enumerate_sphere(A, n):
                try:
                    est = action.tau_estimate(w)
                except PreconditionFailed:
                    # only elliptic elements may miss the precondition
                    tree_ok &= action.tau_exact(w) == 0 and action.kind != "CayleyTree"
                    continue
                checked += 1
                tree_ok &= est == action.tau_exact(w)
    plane = HyperbolicPlane()
    rng = np.random.default_rng(8)
    letters = ("a", "a^-1", "b", "b^-1")
    worst, used = 0.0, 0
    while used < 100:
        w = tuple(rng.choice(letters, size=10))
        try:
            est = plane.tau_estimate(w)
        except PreconditionFailed:
            continue
        used += 1
        worst = max(worst, abs(est - plane.tau_exact(w)))
    lim_err = abs(plane.tau_limit(("a",), 50) - math.log(4))
    ok = tree_ok and worst <= 4 * plane.delta and lim_err <= 1e-9
    record(8, ok, "translation length",
           f"trees: estimate == exact on {checked} words of S_n, n<=8: {tree_ok}; "
           f"plane max |est-exact|={worst:.4f} <= 4 delta={4 * plane.delta:.2f}; "
           f"|tau_limit(a,50)-ln4|={lim_err:.1e}")
    assert ok


def test_criterion_09_shadow_decay():
    chain = build_chain(builtin_automaton("free:2"))
    tree = builtin_action("cayley-tree")
    # centers: prefixes of one seeded chain path, R = 0 so r = |g|
    base = sample_path(chain, 6, 9).word
    zs = []
    for r in range(1, 7):
        p, _, _ = shadow_hitting_probability(chain, tree, base[:r], 0, 12, 100_000, 9)
        exact = 0.25 * (1 / 3) ** (r - 1)
        zs.append(abs(p - exact) / math.sqrt(exact * (1 - exact) / 100_000))
    tree_ok = max(zs) <= 3
    curves_ok, kinds = True, []
    for name in ("cayley-tree", "bass-serre", "plane", "quotient"):
        action = builtin_action(name)
        cur = shadow_decay_scan(chain, action, [0, 1, 2, 3, 4, 5], 20, 10_000, 9, count_n=0)
        p = cur.column("hit_prob")
        mono = all(x >= y for x, y in zip(p, p[1:]))
        curves_ok &= mono
        kinds.append(f"{name} {'/'.join(f'{x:.3f}' for x in p)}")
    ok = tree_ok and curves_ok
    record(9, ok, "shadow decay",
           f"tree vs (1/4)(1/3)^(r-1), r=1..6: max z={max(zs):.2f}; "
           f"nonincreasing curves: {curves_ok} ({'; '.join(kinds)})")
    assert ok


def test_criterion_10_gromov_products():
    A = builtin_automaton("free:2")
    chain = build_chain(A)
    tree = builtin_action("cayley-tree")
    rep = gromov_product_stats(A, chain, tree, 10, 1000, 10)
    row = next(r for r in rep.row_dicts()
               if r["source"] == "counting" and r["statistic"] == "(gx,g^-1x)")
    frac_ok = row["count"] == 4 * 3 ** 9 and row["threshold"] == 2.5 and row["frac_below"] >= 0.9
    parts, ft_ok = [], True
    for name in ("cayley-tree", "bass-serre", "plane", "quotient"):
        s = fellow_travel_check(builtin_action(name), 10_000, 10)
        ft_ok &= not s.violations and s.checked > 0
        parts.append(f"{name} {len(s.violations)}/{s.checked}")
    ok = frac_ok and ft_ok
    record(10, ok, "Gromov-product genericity",
           f"fraction of S_10 with (gx,g^-1x) <= 2.5 = {row['frac_below']:.5f}; "
           f"fellow-travel violations/checked on 1e4 quadruples: {', '.join(parts)}")
    assert ok


def _csv_body(path):
    return path.read_text()


def test_criterion_11_determinism(tmp_path, capsys):
    runs = [
        ["drift", "--action", "bass-serre", "--n", "12", "--trials", "10000"],
        ["genericity", "--action", "bass-serre", "--n-max", "8", "--trials", "5000"],
        ["shadows", "--action", "plane", "--horizon", "15", "--trials", "9000",
         "--r-values", "0,1,2,3"],
        ["gromov", "--n", "8", "--trials", "9000"],
        ["converge", "--action", "plane", "--n", "60", "--trials", "9000"],
        ["translation", "--action", "bass-serre", "--n", "60", "--trials", "9000"],
        ["returns", "--vertex", "s_a", "--trials", "9000"],
        ["sample", "--n", "12", "--trials", "50"],
    ]
    same = []
    for args in runs:
        outs = []
        for workers in ("1", "2", "1"):
            out = tmp_path / f"{args[0]}-{len(outs)}"
            code = main(args + ["--seed", "11", "--workers", workers, "--out", str(out)])
            assert code == 0
            outs.append(_csv_body(out / f"{args[0]}.csv"))
        same.append(outs[0] == outs[1] == outs[2])
    capsys.readouterr()
    ok = all(same)
    record(11, ok, "determinism",
           f"CSV identical for workers 1/2 and on re-run: "
           f"{', '.join(f'{a[0]}={s}' for a, s in zip(runs, same))}")
    assert ok
