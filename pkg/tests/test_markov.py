import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from helpers import dead_end_automaton
from loxolab.automaton import enumerate_sphere, paths_from, sphere_count
from loxolab.errors import (AbsorbedInSmallGrowth, DegenerateChain, ElementaryGrowth,
                            InsufficientVisits, RecurrenceMismatch)
from loxolab.automaton import builtin_automaton, CombingAutomaton
from loxolab.markov import (MarkovChain, SamplePath, build_chain, comparison_constant,
                            counting_vs_markov, decompose_path, first_return,
                            harmonic_decomposition_check, loop_independence,
                            n_step_prob, ps_cone_measure, recurrent_components,
                            sample_path, sample_words, survival_fit)
from loxolab.words import is_freely_reduced


def _prob(chain, src, dst):
    A = chain.automaton
    names = [A.vertex_name(v) for v in range(A.vertex_count)]
    s, t = names.index(src), names.index(dst)
    return sum(p for (a, b, _), p in zip(A.edges, chain.probs) if a == s and b == t)


def test_free_group_probabilities(f2_chain):
    assert f2_chain.exact
    assert _prob(f2_chain, "v0", "s_a") == Fraction(1, 4)
    assert _prob(f2_chain, "s_a", "s_b") == Fraction(1, 3)
    assert _prob(f2_chain, "s_a", "s_a") == Fraction(1, 3)


def test_cyclic_probabilities(z23_chain):
    assert _prob(z23_chain, "s_a", "s_b") == pytest.approx(0.5, abs=1e-9)
    assert _prob(z23_chain, "s_a", "s_b^-1") == pytest.approx(0.5, abs=1e-9)
    assert _prob(z23_chain, "s_b", "s_a") == pytest.approx(1.0, abs=1e-9)


def test_rows_sum_to_one(f2_chain, z23_chain):
    dead = build_chain(dead_end_automaton())
    for ch in (f2_chain, z23_chain, dead):
        P = ch.transition_matrix()
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_small_growth_vertex_is_absorbing():
    A = dead_end_automaton()
    ch = build_chain(A)
    t = A.vertex_count - 1
    assert _prob(ch, "v0", "t_c") == 0
    assert _prob(ch, "t_c", "t_c") == 1
    assert n_step_prob(ch, ("c", "c")) == 0
    assert ps_cone_measure(ch, ("c",)) == 0
    assert t not in ch.synthetic      # it already has a self-loop


def test_elementary_growth_rejected():
    with pytest.raises(ElementaryGrowth):
        build_chain(builtin_automaton("free:1"))


def test_degenerate_chain_rejected():
    # v0 itself of small growth: a dead end before a large component is impossible,
    # so use a one-way chain v0 -> loop with growth 1 and a separate free part below it
    A = CombingAutomaton(("a", "a^-1", "b", "b^-1"), 3,
                         ((0, 1, "a"), (1, 1, "a"), (0, 2, "b"), (2, 2, "b")))
    with pytest.raises(ElementaryGrowth):
        build_chain(A)


def test_n_step_prob_free_group(f2_chain, f2):
    for n in range(1, 9):
        for w, _ in enumerate_sphere(f2, n):
            assert n_step_prob(f2_chain, w) == Fraction(1, 4 * 3 ** (n - 1))


def test_n_step_prob_sums_to_one(f2_chain, z23_chain, f2, z23):
    for ch, A in ((f2_chain, f2), (z23_chain, z23)):
        for n in range(1, 9):
            total = sum(n_step_prob(ch, w) for w, _ in enumerate_sphere(A, n))
            assert float(total) == pytest.approx(1.0, abs=1e-9)


def test_ps_measure_matches_formula_and_is_additive(f2_chain, z23_chain, f2, z23):
    assert ps_cone_measure(f2_chain, ()) == 1
    for n in range(1, 6):
        assert ps_cone_measure(f2_chain, ("a",) * n) == Fraction(1, 4) * Fraction(1, 3) ** (n - 1)
    for ch, A in ((f2_chain, f2), (z23_chain, z23)):
        for n in range(0, 6):
            for w, v in paths_from(A, A.initial, n):
                assert ps_cone_measure(ch, w) == n_step_prob(ch, w) if n else True
                kids = sum(ps_cone_measure(ch, w + (l,)) for l, _ in A.out_edges(v))
                assert float(kids) == pytest.approx(float(ps_cone_measure(ch, w)), abs=1e-12)


def test_sampling_is_deterministic_and_reduced(f2_chain):
    p1 = sample_path(f2_chain, 5, 17)
    p2 = sample_path(f2_chain, 5, 17)
    assert p1 == p2 and p1.n == 5
    for w in sample_words(f2_chain, 30, 500, 3):
        assert len(w) == 30 and is_freely_reduced(w)
        assert f2_chain.automaton.accepts(w)


def test_strict_sampling_reports_absorption():
    ch = build_chain(dead_end_automaton())
    # v0 never moves into t_c, so strict sampling from v0 cannot be absorbed
    assert not sample_path(ch, 20, 1, strict=True).absorbed
    from loxolab.markov import _walk
    from loxolab.parallel import block_rng
    t = ch.automaton.vertex_count - 1
    verts, labs = _walk(ch, t, 5, block_rng(0, 0), 3)
    assert (verts == t).all()


def test_recurrent_components(f2_chain, z23_chain):
    assert recurrent_components(f2_chain).recurrent == [[1, 2, 3, 4]]
    assert recurrent_components(z23_chain).recurrent == [[1, 2, 3]]


def test_recurrence_mismatch_detected(f2):
    # every letter vertex keeps its own self-loop with probability 1
    probs = []
    for s, t, l in f2.edges:
        probs.append(Fraction(1, 4) if s == 0 else Fraction(int(s == t)))
    ch = MarkovChain(f2, probs, exact=True)
    with pytest.raises(RecurrenceMismatch):
        recurrent_components(ch)


def _exact_first_return(chain, v, n_max):
    P = chain.transition_matrix()
    others = [u for u in range(P.shape[0]) if u != v]
    T = P[np.ix_(others, others)]
    out = [P[v, v]]
    row = P[v, others]
    for _ in range(2, n_max + 1):
        out.append(float(row @ P[others, v]))
        row = row @ T
    return out


def test_first_return_law(f2_chain):
    exact = _exact_first_return(f2_chain, 1, 3)
    assert exact[:2] == pytest.approx([1 / 3, 2 / 9])
    fr = first_return(f2_chain, 1, 100_000, seed=4)
    for n in (1, 2, 3):
        assert abs(fr.prob(n) - exact[n - 1]) <= 3 * fr.prob_se(n)
    assert abs(fr.mean_return - 4) <= 0.02 * 4
    assert fr.tail_slope < 0 and fr.tail_residual < 0.1
    assert fr.loops[("a",)] == pytest.approx(1 / 3, abs=0.01)


def test_decompose_path_example(f2_chain):
    A = f2_chain.automaton
    word = ("a", "a", "b", "a")
    path = SamplePath(0, tuple(A.vertex_path(word)), word)
    dec = decompose_path(path, 1)
    assert dec.prefix == ("a",)
    assert dec.loops == [("a",), ("b", "a")]
    assert dec.tail == ()
    assert dec.concat() == word


def test_decompose_path_needs_two_visits(f2_chain):
    A = f2_chain.automaton
    word = ("b", "b", "b")
    path = SamplePath(0, tuple(A.vertex_path(word)), word)
    with pytest.raises(InsufficientVisits):
        decompose_path(path, 1)


def test_decompose_concat_identity(f2_chain):
    from loxolab.markov import path_blocks
    for verts, labs in path_blocks(f2_chain, 40, 300, seed=9):
        for vs, w in zip(verts.tolist(), f2_chain.words(labs.tolist())):
            p = SamplePath(9, tuple(vs), w)
            if sum(1 for x in vs if x == 2) >= 2:
                assert decompose_path(p, 2).concat() == w


def test_loop_independence(f2_chain):
    chk = loop_independence(f2_chain, 1, 100_000, seed=2)
    assert chk.max_abs_z <= 4


def test_survival_fit_on_geometric_data():
    rng = np.random.default_rng(0)
    lengths = rng.geometric(0.3, size=50_000)
    slope, resid = survival_fit(lengths)
    assert slope == pytest.approx(math.log(0.7), rel=0.05)
    assert resid < 0.1


def test_counting_vs_markov_free_group(f2, f2_chain):
    cones = [w for k in (1, 2) for w, _ in paths_from(f2, 0, k)]
    for cmp in counting_vs_markov(f2, f2_chain, 6, cones):
        assert cmp.ratio == 1
    empty = counting_vs_markov(f2, f2_chain, 4, [[]])[0]
    assert empty.ok and empty.ratio is None


def test_counting_vs_markov_cyclic(z23, z23_chain):
    cones = [w for k in (1, 2) for w, _ in paths_from(z23, 0, k)]
    c = comparison_constant(z23_chain, 8)
    for cmp in counting_vs_markov(z23, z23_chain, 8, cones):
        assert cmp.ok and 1 / c <= cmp.ratio <= c


def test_harmonic_decomposition(f2_chain):
    for word, target in ((("a",), 0.25), (("a", "b"), 1 / 12)):
        chk = harmonic_decomposition_check(f2_chain, word, 20_000, seed=3)
        assert chk.exact == pytest.approx(target)
        assert abs(chk.discrepancy) <= 3 * chk.se + 1e-12
