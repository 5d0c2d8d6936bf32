"""Small hand-built automata shared by the tests."""

from loxolab.automaton import CombingAutomaton, free_group_automaton


def dead_end_automaton():
    """F2 combing plus a c-branch v0 -c-> t -c-> t of growth 1."""
    base = free_group_automaton(2)
    t = base.vertex_count
    edges = list(base.edges) + [(0, t, "c"), (t, t, "c")]
    alphabet = base.alphabet + ("c", "c^-1")
    names = base.names + ("t_c",)
    return CombingAutomaton(alphabet, t + 1, tuple(edges), names=names)


def self_loop_automaton():
    return CombingAutomaton(("a", "a^-1"), 1, ((0, 0, "a"),))
