"""Growth rate, Cesaro projection and large/small growth classes."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .automaton import almost_semisimple_check, path_counts, scc_report
from .budget import current_budget
from .errors import NonConvergence, NotAlmostSemisimple

LARGE, SMALL = "large", "small"


def _exact_det(rows):
    """Determinant of a small integer matrix by fraction-free elimination."""
    a = [[Fraction(x) for x in row] for row in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def rationalize(x, max_den=1000, tol=1e-10):
    """Fraction close to ``x`` with a small denominator, or None."""
    f = Fraction(float(x)).limit_denominator(max_den)
    return f if abs(float(f) - x) <= tol * max(1.0, abs(x)) else None


def growth_rate(automaton, report=None):
    """Perron root of the adjacency matrix (max over components).

    Integer growth rates are snapped to the exact integer after an exact
    singularity check on the corresponding block.
    """
    report = report or scc_report(automaton)
    lam = report.growth
    k = round(lam)
    if k >= 1 and abs(lam - k) < 1e-9:
        M = automaton.adjacency_matrix()
        for c in report.maximal_components():
            vs = report.members[c]
            block = (M[np.ix_(vs, vs)] - k * np.eye(len(vs), dtype=np.int64)).tolist()
            if _exact_det(block) == 0:
                return float(k)
    return lam


@dataclass
class SpectralData:
    lam: float
    rho: np.ndarray
    growth_class: list
    tolerance: float
    period: int
    report: object
    exact_lam: Fraction = None
    exact_rho: tuple = None
    steps: int = 0

    @property
    def large(self):
        return [c == LARGE for c in self.growth_class]

    def is_large(self, v):
        return self.growth_class[v] == LARGE

    def normalized_rho(self, v):
        """rho(1)_v / rho(1)_0, exact when available."""
        if self.exact_rho is not None:
            return self.exact_rho[v] / self.exact_rho[0]
        return float(self.rho[v] / self.rho[0])


def classify(automaton, report=None):
    """Large growth iff some maximal component is reachable from the vertex."""
    report = report or scc_report(automaton)
    maximal = set(report.maximal_components())
    classes = []
    for v in range(automaton.vertex_count):
        below = report.descendants(report.component[v])
        classes.append(LARGE if below & maximal else SMALL)
    return classes


def rho_vector(automaton, lam=None, tol=1e-9, report=None, max_steps=None,
               classes=None, return_steps=False):
    """Cesaro limit of M^n 1 / lam^n.

    Averages are taken over windows whose length is a multiple of the
    period of every maximal component, so the peripheral oscillation cancels
    exactly and only the geometrically decaying part remains.  Windows are
    compared at doubling offsets until the relative change drops below
    ``tol``.
    """
    report = report or scc_report(automaton)
    check = almost_semisimple_check(automaton, report)
    if not check:
        raise NotAlmostSemisimple(check.reason)
    lam = growth_rate(automaton, report) if lam is None else lam
    classes = classes or classify(automaton, report)
    max_steps = max_steps or current_budget().cesaro_steps
    period = 1
    for c in report.maximal_components():
        period = math.lcm(period, max(1, report.period[c]))

    M = automaton.adjacency_matrix().astype(float) / lam
    v = np.ones(automaton.vertex_count)
    n = 0

    def window():
        nonlocal v, n
        acc = np.zeros_like(v)
        for _ in range(period):
            acc += v
            v = M @ v
            n += 1
        return acc / period

    prev = window()
    offset = period
    while True:
        while n < 2 * offset:
            v = M @ v
            n += 1
        cur = window()
        scale = max(1.0, float(np.max(np.abs(cur))))
        if float(np.max(np.abs(cur - prev))) < tol * scale * 1e-1:
            break
        if n > max_steps:
            raise NonConvergence(
                f"Cesaro averages did not settle within {max_steps} steps")
        prev = cur
        offset *= 2
    rho = np.where(np.array(classes) == LARGE, cur, 0.0)
    return (rho, n) if return_steps else rho


def spectral_data(automaton, tol=1e-9):
    report = scc_report(automaton)
    lam = growth_rate(automaton, report)
    classes = classify(automaton, report)
    rho, steps = rho_vector(automaton, lam, tol, report, classes=classes,
                            return_steps=True)
    period = 1
    for c in report.maximal_components():
        period = math.lcm(period, max(1, report.period[c]))
    exact_lam = rationalize(lam, 1) if lam == round(lam) else None
    exact_rho = None
    if exact_lam is not None:
        cand = [rationalize(x) for x in rho]
        if all(c is not None for c in cand):
            # exact check of the eigen-relation M rho = lam rho
            M = automaton.adjacency_matrix().tolist()
            ok = all(sum(M[i][j] * cand[j] for j in range(len(cand))) == exact_lam * cand[i]
                     for i in range(len(cand)))
            if ok:
                exact_rho = tuple(cand)
                rho = np.array([float(c) for c in cand])
    return SpectralData(lam, rho, classes, tol, period, report,
                        exact_lam, exact_rho, steps)


@dataclass
class GrowthConstants:
    vertex: int
    growth_class: str
    ratio_min: float = None     # min over n of count / lam^n (large growth)
    ratio_max: float = None
    ratios: list = None
    fitted_rate: float = None   # small growth: fitted lambda_1
    structural_rate: float = None


def growth_bound_constants(automaton, n_max, spectral=None):
    """Empirical constants for the path-count bounds from every vertex."""
    spectral = spectral or spectral_data(automaton)
    lam = spectral.lam
    report = spectral.report
    history = [path_counts(automaton, 0)]
    counts = history[0]
    out = automaton._out
    for _ in range(n_max):
        counts = [sum(counts[t] for _, t in row) for row in out]
        history.append(counts)
    result = []
    for v in range(automaton.vertex_count):
        seq = [h[v] for h in history]
        if spectral.is_large(v):
            ratios = [c / lam ** n for n, c in enumerate(seq)]
            result.append(GrowthConstants(v, LARGE, min(ratios), max(ratios), ratios))
        else:
            below = report.descendants(report.component[v])
            structural = max(report.radius[c] for c in below)
            half = n_max // 2
            if seq[-1] == 0:
                fitted = 0.0
            elif seq[half] == 0 or n_max == half:
                fitted = seq[-1] ** (1.0 / n_max)
            else:
                fitted = (seq[-1] / seq[half]) ** (1.0 / (n_max - half))
            result.append(GrowthConstants(v, SMALL, fitted_rate=fitted,
                                          structural_rate=structural))
    return result


def sphere_constant(automaton, n_max, spectral=None):
    """Smallest c with c^-1 lam^n <= #S_n <= c lam^n for n <= n_max."""
    spectral = spectral or spectral_data(automaton)
    consts = growth_bound_constants(automaton, n_max, spectral)[automaton.initial]
    return max(consts.ratio_max, 1.0 / consts.ratio_min)
