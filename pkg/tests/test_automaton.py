import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loxolab.automaton import (CombingAutomaton, almost_semisimple_check,
                               builtin_automaton, cone_count, enumerate_sphere,
                               free_group_automaton, load_automaton, path_counts,
                               paths_from, prefix_hat, prefix_length, save_automaton,
                               scc_report, sphere_blocks, sphere_count)
from loxolab.budget import Budget
from loxolab.errors import (BudgetExceeded, CountOverflow, DuplicateLabel, InvalidWord,
                            MalformedFile, UnreachableVertex)
from loxolab.words import is_freely_reduced


def _write(tmp_path, data):
    p = tmp_path / "a.json"
    p.write_text(json.dumps(data))
    return p


def test_load_free_group_file(tmp_path, f2):
    p = tmp_path / "f2.json"
    save_automaton(f2, p)
    A = load_automaton(p)
    assert A.vertex_count == 5 and len(A.edges) == 16
    assert A.content_hash() == f2.content_hash()


def test_duplicate_label_rejected(tmp_path):
    data = {"alphabet": ["a", "a^-1"], "vertices": 2,
            "edges": [[0, 1, "a"], [1, 1, "a"], [1, 0, "a"]]}
    with pytest.raises(DuplicateLabel):
        load_automaton(_write(tmp_path, data))


def test_isolated_vertex_rejected(tmp_path):
    data = {"alphabet": ["a", "a^-1"], "vertices": 3, "edges": [[0, 1, "a"], [1, 1, "a"]]}
    with pytest.raises(UnreachableVertex):
        load_automaton(_write(tmp_path, data))


@pytest.mark.parametrize("data", [
    {"alphabet": ["a"], "vertices": 1, "edges": []},                     # not closed
    {"alphabet": ["a", "a^-1"], "vertices": 1, "edges": [[0, 3, "a"]]},  # range
    {"alphabet": ["a", "a^-1"], "vertices": 1, "edges": [[0, 0, "b"]]},  # label
    {"alphabet": ["a", "a^-1"], "edges": []},                            # missing key
])
def test_malformed_files(tmp_path, data):
    with pytest.raises(MalformedFile):
        load_automaton(_write(tmp_path, data))


def test_not_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    with pytest.raises(MalformedFile):
        load_automaton(p)


def test_builtin_shapes(f2, z23):
    assert (f2.vertex_count, len(f2.edges)) == (5, 16)
    assert (z23.vertex_count, len(z23.edges)) == (4, 7)
    names = [z23.vertex_name(v) for v in range(4)]
    assert names == ["v0", "s_a", "s_b", "s_b^-1"]
    out = {z23.vertex_name(v): sorted(l for l, _ in z23.out_edges(v)) for v in range(4)}
    assert out == {"v0": ["a", "b", "b^-1"], "s_a": ["b", "b^-1"],
                   "s_b": ["a"], "s_b^-1": ["a"]}
    assert builtin_automaton("free:1").vertex_count == 3
    assert builtin_automaton("freeprod:1,1").content_hash() == f2.content_hash()


def test_builtin_rejects_unknown():
    with pytest.raises(ValueError):
        builtin_automaton("surface:2")


def test_sphere_count_examples(f2, z23):
    # the transfer-matrix value for n = 3 is 4*3^2 = 36; 108 is #S_4
    assert sphere_count(f2, 3) == 36
    assert sphere_count(f2, 4) == 108
    assert sphere_count(z23, 4) == 8
    assert sphere_count(f2, 0) == sphere_count(z23, 0) == 1


def _brute_free_sphere(n):
    letters = ["a", "a^-1", "b", "b^-1"]
    return sum(1 for w in itertools.product(letters, repeat=n) if is_freely_reduced(w))


def _psl2z_spheres(n_max):
    """Sphere sizes of Z/2*Z/3 = PSL(2,Z) for generators S, ST by BFS on matrices."""
    S = np.array([[0, -1], [1, 0]])
    U = np.array([[0, -1], [1, 1]])
    Uinv = np.array([[1, 1], [-1, 0]])

    def key(M):
        # M and -M are the same element of PSL(2,Z)
        flat = M.ravel()
        sign = 1 if flat[np.nonzero(flat)[0][0]] > 0 else -1
        return tuple(int(x) for x in sign * flat)

    seen = {key(np.eye(2, dtype=int))}
    frontier = [np.eye(2, dtype=int)]
    sizes = [1]
    for _ in range(n_max):
        nxt = []
        for M in frontier:
            for g in (S, U, Uinv):
                N = M @ g
                k = key(N)
                if k not in seen:
                    seen.add(k)
                    nxt.append(N)
        sizes.append(len(nxt))
        frontier = nxt
    return sizes


def test_sphere_count_against_independent_oracles(f2, z23):
    for n in range(7):
        assert sphere_count(f2, n) == _brute_free_sphere(n) == (4 * 3 ** (n - 1) if n else 1)
    assert [sphere_count(z23, n) for n in range(11)] == _psl2z_spheres(10)


def test_enumerate_sphere_examples(f2, z23):
    assert {w for w, _ in enumerate_sphere(f2, 1)} == {("a",), ("a^-1",), ("b",), ("b^-1",)}
    assert [w for w, _ in enumerate_sphere(z23, 2)] == [
        ("a", "b"), ("a", "b^-1"), ("b", "a"), ("b^-1", "a")]


@pytest.mark.parametrize("family", ["free:2", "cyclic:2,3", "free:3", "cyclic:3,inf"])
def test_enumeration_matches_count_and_is_injective(family):
    A = builtin_automaton(family)
    for n in range(0, 9 if family != "free:3" else 6):
        words = [w for w, _ in enumerate_sphere(A, n)]
        assert len(words) == sphere_count(A, n)
        assert len(set(words)) == len(words)


def test_sphere_blocks_reassemble(f2):
    whole = [w for w, _ in enumerate_sphere(f2, 5)]
    parts = [w for p, v, rem in sphere_blocks(f2, 5) for w, _ in paths_from(f2, v, rem, p)]
    assert parts == whole


def test_cone_count_examples(f2, z23):
    assert cone_count(f2, ("a", "b"), 2) == 9
    assert cone_count(z23, ("a",), 3) == 4
    assert cone_count(f2, ("a",), 0) == 1


def test_cone_additivity(f2, z23):
    for A in (f2, z23):
        for m in range(0, 4):
            for g, v in paths_from(A, A.initial, m):
                for k in range(1, 5):
                    total = sum(cone_count(A, g + (l,), k - 1) for l, _ in A.out_edges(v))
                    assert total == cone_count(A, g, k)


def test_trace_rejects_non_combing_word(f2):
    with pytest.raises(InvalidWord):
        f2.trace(("a", "a^-1"))
    assert not f2.accepts(("a", "a^-1"))
    assert f2.accepts(("a", "b"))


def test_prefix_convention(f2):
    assert prefix_length(8) == 5
    assert prefix_length(2) == 1
    g = ("a", "b", "a", "b", "b", "a^-1", "b", "b")
    h = prefix_hat(f2, g)
    assert len(h) == 5 and f2.accepts(h)


def test_budget_guards(f2):
    with pytest.raises(BudgetExceeded):
        list(enumerate_sphere(f2, 10, Budget(sphere=100)))
    with pytest.raises(CountOverflow):
        path_counts(f2, 200, Budget(count_bits=64))


def test_scc_report_free_group(f2):
    rep = scc_report(f2)
    assert rep.members == [[0], [1, 2, 3, 4]]
    assert rep.maximal == [False, True]
    assert rep.radius[1] == pytest.approx(3.0, abs=1e-12)
    assert bool(almost_semisimple_check(f2))


def test_scc_report_cyclic(z23):
    rep = scc_report(z23)
    assert rep.members[rep.maximal_components()[0]] == [1, 2, 3]
    assert rep.period[1] == 2
    assert bool(almost_semisimple_check(z23))


def two_growth_components():
    # {1,2} with growth 2 feeding {3,4} with growth 2
    edges = [(0, 1, "a"), (1, 1, "a"), (1, 2, "b"), (2, 1, "a^-1"), (2, 2, "b"),
             (1, 3, "b^-1"), (3, 3, "a"), (3, 4, "b"), (4, 3, "a^-1"), (4, 4, "b")]
    return CombingAutomaton(("a", "a^-1", "b", "b^-1"), 5, tuple(edges))


def test_two_maximal_chain_fails_with_witness():
    A = two_growth_components()
    rep = scc_report(A)
    assert rep.growth == pytest.approx(2.0)
    res = almost_semisimple_check(A, rep)
    assert not res
    assert len(res.witness) == 2
    assert "not semisimple" in res.reason


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=12))
def test_condensation_is_acyclic_and_counts_consistent(k, n):
    A = free_group_automaton(k)
    rep = scc_report(A)
    assert all(i != j for i, j in rep.dag_edges)
    assert all(i < j or rep.members[i][0] < rep.members[j][0] for i, j in rep.dag_edges)
    counts = path_counts(A, n)
    assert counts[0] == sphere_count(A, n)
    assert counts[0] == (1 if n == 0 else 2 * k * (2 * k - 1) ** (n - 1))


def test_sphere_growth_sandwich_constant(f2, z23):
    from loxolab.spectral import sphere_constant
    assert sphere_constant(f2, 12) == pytest.approx(4 / 3)
    c = sphere_constant(z23, 16)
    lam = math.sqrt(2)
    for n in range(17):
        assert sphere_count(z23, n) <= c * lam ** n + 1e-9
        assert sphere_count(z23, n) >= lam ** n / c - 1e-9
