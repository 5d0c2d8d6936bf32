"""Isometric actions of combed groups on hyperbolic spaces.

Every action is an orbit map g -> g.x for a fixed basepoint x.  All the
geometry needed downstream (distances, Gromov products, shadows,
translation lengths) goes through :meth:`HyperbolicAction.displacement`
and the incremental :meth:`HyperbolicAction.tracker`, which follows
d(x, w_k x) along a path one letter at a time.

Four kinds are provided:

* ``CayleyTree``      free group on its Cayley tree
* ``BassSerreTree``   free product A*B on its Bass-Serre tree
* ``HyperbolicPlane`` words mapped to SL(2,R) acting on the upper half plane
* ``QuotientCayley``  word length of the image in a target group
"""

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .budget import current_budget
from .errors import (BudgetExceeded, HypothesesNotMet, MalformedFile,
                     NonUnitDeterminant, PreconditionFailed, Unsupported)
from .parallel import block_rng
from .words import (base_letter, cyclic_reduce, free_reduce, inverse_letter,
                    inverse_word, parse_word, power,
                    random_reduced_word)

CAYLEY_TREE = "CayleyTree"
BASS_SERRE = "BassSerreTree"
PLANE = "HyperbolicPlane"
QUOTIENT = "QuotientCayley"

_KIND_ALIASES = {
    "cayleytree": CAYLEY_TREE, "cayley-tree": CAYLEY_TREE, "tree": CAYLEY_TREE,
    "bassserretree": BASS_SERRE, "bass-serre": BASS_SERRE,
    "bass-serre-tree": BASS_SERRE, "bassserre": BASS_SERRE,
    "hyperbolicplane": PLANE, "plane": PLANE, "hyperbolic-plane": PLANE,
    "h2": PLANE,
    "quotientcayley": QUOTIENT, "quotient": QUOTIENT,
    "quotient-cayley": QUOTIENT,
}


@dataclass(frozen=True)
class GromovProductValue:
    value: float
    g: tuple
    h: tuple

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class ShadowSpec:
    """Shadow around g.x based at x with radius parameter R."""
    center: tuple
    R: float

    def distance_parameter(self, action):
        return action.displacement(self.center) - self.R


@dataclass(frozen=True)
class FellowTravelCertificate:
    ok: bool
    ac: float
    bd: float
    slack: float       # 2 delta


class HyperbolicAction:
    kind = None
    delta = 0.0

    def __init__(self, generators, delta=None, c_delta=None,
                 lox_steps=256, lox_threshold=0.1):
        self.generators = tuple(generators)
        if delta is not None:
            if delta < 0:
                raise ValueError("delta must be nonnegative")
            self.delta = float(delta)
        self.c_delta = 8 * self.delta + 1 if c_delta is None else float(c_delta)
        self.lox_steps = lox_steps
        self.lox_threshold = lox_threshold

    # subclasses implement tracker(), config() and optionally tau_exact
    def tracker(self, prefix=()):
        raise NotImplementedError

    def displacement(self, word):
        t = self.tracker()
        for x in word:
            t.push(x)
        return t.displacement()

    def distance(self, g, h):
        """d(g.x, h.x)."""
        # reduce first so floating actions do not multiply out cancelling pairs
        return self.displacement(free_reduce(inverse_word(tuple(g)) + tuple(h)))

    def gromov_product(self, g, h):
        g, h = tuple(g), tuple(h)
        val = 0.5 * (self.displacement(g) + self.displacement(h) - self.distance(g, h))
        return GromovProductValue(max(0.0, val), g, h)

    def shadow_contains(self, shadow, h):
        """z = h.x lies in S_x(g.x, R) iff (g.x, z)_x >= d(x, g.x) - R."""
        gp = self.gromov_product(shadow.center, h).value
        return gp >= self.displacement(shadow.center) - shadow.R - 1e-12

    def lipschitz_constant(self):
        letters = [x for g in self.generators for x in (g, inverse_letter(g))]
        return max(self.displacement((x,)) for x in letters)

    def tau_exact(self, g):
        raise Unsupported(f"{self.kind} has no exact translation-length rule")

    def _tau_exact_supported(self):
        return False

    def tau_estimate(self, g):
        """d(x, gx) - 2 (gx, g^-1 x)_x, guarded by the c_delta precondition."""
        g = tuple(g)
        d = self.displacement(g)
        gp = self.gromov_product(g, inverse_word(g)).value
        if d < 2 * gp + self.c_delta:
            raise PreconditionFailed(
                f"d(x,gx) = {d:.6g} < 2(gx,g^-1x)_x + c = {2 * gp + self.c_delta:.6g}")
        return d - 2 * gp

    def tau_limit(self, g, N):
        if N < 1:
            raise ValueError("N must be >= 1")
        return self.displacement(power(tuple(g), N)) / N

    def is_loxodromic(self, g, steps=None, threshold=None):
        if self._tau_exact_supported():
            return self.tau_exact(g) > 0
        steps = steps or self.lox_steps
        threshold = self.lox_threshold if threshold is None else threshold
        return self.tau_limit(g, steps) > threshold

    def fellow_travel_predicate(self, a, b, c, d, A):
        """Check the fellow-traveling inequality on one quadruple.

        Raises HypothesesNotMet unless (a,b) >= A, (c,d) >= A and
        (a,c) <= A - 3 delta; otherwise returns a certificate whose ``ok``
        says whether |(a,c) - (b,d)| <= 2 delta held.
        """
        ab = self.gromov_product(a, b).value
        cd = self.gromov_product(c, d).value
        ac = self.gromov_product(a, c).value
        if not (ab >= A and cd >= A and ac <= A - 3 * self.delta):
            raise HypothesesNotMet("fellow-traveling hypotheses not met")
        bd = self.gromov_product(b, d).value
        slack = 2 * self.delta
        return FellowTravelCertificate(abs(ac - bd) <= slack + 1e-9, ac, bd, slack)

    # -- config ---------------------------------------------------------
    def config(self):
        raise NotImplementedError

    def config_hash(self):
        blob = json.dumps(self.config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __repr__(self):
        return f"{self.kind}(delta={self.delta:g}, hash={self.config_hash()})"


# -- Cayley tree ------------------------------------------------------------

class _ReducedTracker:
    __slots__ = ("stack",)

    def __init__(self, prefix=()):
        self.stack = list(free_reduce(prefix))

    def push(self, x):
        s = self.stack
        if s and s[-1] == inverse_letter(x):
            s.pop()
        else:
            s.append(x)

    def displacement(self):
        return len(self.stack)

    def copy(self):
        t = _ReducedTracker()
        t.stack = list(self.stack)
        return t


class CayleyTree(HyperbolicAction):
    kind = CAYLEY_TREE

    def __init__(self, generators=("a", "b"), **kw):
        kw.setdefault("delta", 0.0)
        super().__init__(generators, **kw)

    def tracker(self, prefix=()):
        return _ReducedTracker(prefix)

    def displacement(self, word):
        return len(free_reduce(word))

    def _tau_exact_supported(self):
        return True

    def tau_exact(self, g):
        return len(cyclic_reduce(g))

    def config(self):
        return {"kind": self.kind, "generators": {g: g for g in self.generators},
                "delta": self.delta}


# -- free products ------------------------------------------------------------

class CyclicFactor:
    """<x | x^order> with word length min(e, order - e); order may be inf."""

    def __init__(self, gen, order=math.inf):
        self.gen = gen
        self.order = order
        self.finite = order != math.inf

    def letter(self, letter):
        _, sign = base_letter(letter)
        return sign % self.order if self.finite else sign

    def mul(self, x, y):
        return (x + y) % self.order if self.finite else x + y

    def is_identity(self, x):
        return x == 0

    def length(self, x):
        return min(x, self.order - x) if self.finite else abs(x)

    def stable_length(self, x):
        return 0 if self.finite else abs(x)

    def describe(self):
        return {"gens": [self.gen], "order": "inf" if not self.finite else int(self.order)}


class FreeFactor:
    """Free group on ``gens``; elements are reduced words."""

    def __init__(self, gens):
        self.gens = tuple(gens)

    def letter(self, letter):
        return (letter,)

    def mul(self, x, y):
        return free_reduce(x + y)

    def is_identity(self, x):
        return not x

    def length(self, x):
        return len(x)

    def stable_length(self, x):
        return len(cyclic_reduce(x))

    def describe(self):
        return {"gens": list(self.gens), "order": "free"}


class FreeProduct:
    """Normal forms in a free product of the given factors.

    ``factors`` maps a factor name to a CyclicFactor or FreeFactor; every
    generator belongs to exactly one factor.
    """

    def __init__(self, factors):
        self.factors = dict(factors)
        self.owner = {}
        for name, f in self.factors.items():
            gens = [f.gen] if isinstance(f, CyclicFactor) else f.gens
            for g in gens:
                if g in self.owner:
                    raise MalformedFile(f"generator {g!r} assigned to two factors")
                self.owner[g] = name

        self._letters = {}

    def factor_of(self, letter):
        g, _ = base_letter(letter)
        try:
            return self.owner[g]
        except KeyError:
            raise MalformedFile(f"letter {letter!r} is not in any factor") from None

    def _letter(self, letter):
        hit = self._letters.get(letter)
        if hit is None:
            name = self.factor_of(letter)
            f = self.factors[name]
            hit = self._letters[letter] = (name, f, f.letter(letter))
        return hit

    def push(self, syllables, letter):
        """Right-multiply the normal form (list of (name, elem)) in place.

        Returns the change in the summed syllable length.
        """
        name, f, x = self._letter(letter)
        if syllables and syllables[-1][0] == name:
            old = syllables[-1][1]
            new = f.mul(old, x)
            if f.is_identity(new):
                syllables.pop()
                return -f.length(old)
            syllables[-1] = (name, new)
            return f.length(new) - f.length(old)
        syllables.append((name, x))
        return f.length(x)

    def normal_form(self, word):
        syl = []
        for x in word:
            self.push(syl, x)
        return syl

    def cyclic_normal_form(self, word):
        syl = list(self.normal_form(word))
        while len(syl) >= 2 and syl[0][0] == syl[-1][0]:
            name = syl[0][0]
            f = self.factors[name]
            merged = f.mul(syl[-1][1], syl[0][1])
            syl = syl[1:-1]
            if not f.is_identity(merged):
                syl.append((name, merged))
        return syl

    def word_length(self, syllables):
        return sum(self.factors[n].length(x) for n, x in syllables)

    def describe(self):
        return {name: f.describe() for name, f in sorted(self.factors.items())}


def free_product_from_spec(spec):
    """Build a FreeProduct from ``{name: {"gens": [...], "order": k|"inf"|"free"}}``."""
    factors = {}
    for name, item in spec.items():
        gens = item.get("gens") or [name]
        order = item.get("order", "inf")
        if order == "free":
            factors[name] = FreeFactor(gens)
        else:
            if len(gens) != 1:
                raise MalformedFile(f"cyclic factor {name!r} needs exactly one generator")
            order = math.inf if str(order).lower() in ("inf", "oo") else int(order)
            if order != math.inf and order < 2:
                raise MalformedFile(f"factor order must be >= 2, got {order}")
            factors[name] = CyclicFactor(gens[0], order)
    return FreeProduct(factors)




class _SyllableTracker:
    """Normal form in a free product, updated letter by letter.

    ``value`` is either the summed syllable length (``mode="length"``) or
    twice the number of syllables outside ``base`` (``mode="crossings"``).
    """
    __slots__ = ("fp", "syl", "value", "mode", "base")

    def __init__(self, fp, mode, base=None):
        self.fp = fp
        self.syl = []
        self.value = 0
        self.mode = mode
        self.base = base

    def push(self, x):
        before = len(self.syl)
        change = self.fp.push(self.syl, x)
        if self.mode == "length":
            self.value += change
        elif len(self.syl) != before and self.fp._letter(x)[0] != self.base:
            self.value += 2 if len(self.syl) > before else -2

    def displacement(self):
        return self.value

    def copy(self):
        t = _SyllableTracker(self.fp, self.mode, self.base)
        t.syl = list(self.syl)
        t.value = self.value
        return t


class BassSerreTree(HyperbolicAction):
    """A*B acting on its Bass-Serre tree, basepoint the vertex fixed by A.

    d(x, gx) is twice the number of syllables of g outside the base factor.
    """
    kind = BASS_SERRE

    def __init__(self, product, base=None, **kw):
        kw.setdefault("delta", 0.0)
        if len(product.factors) != 2:
            raise MalformedFile("Bass-Serre tree needs exactly two factors")
        super().__init__(sorted(product.owner), **kw)
        self.product = product
        self.base = base or sorted(product.factors)[0]
        if self.base not in product.factors:
            raise MalformedFile(f"unknown base factor {self.base!r}")

    def tracker(self, prefix=()):
        t = _SyllableTracker(self.product, "crossings", self.base)
        for x in prefix:
            t.push(x)
        return t

    def displacement(self, word):
        syl = self.product.normal_form(word)
        return 2 * sum(1 for name, _ in syl if name != self.base)

    def _tau_exact_supported(self):
        return True

    def tau_exact(self, g):
        syl = self.product.cyclic_normal_form(g)
        return 0 if len(syl) <= 1 else len(syl)

    def config(self):
        return {"kind": self.kind, "factors": self.product.describe(),
                "base": self.base, "delta": self.delta}


# -- hyperbolic plane -------------------------------------------------------

def _as_float(x):
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def _arccosh1p(y):
    """arccosh(1 + y), accurate for small y >= 0."""
    y = max(0.0, y)
    return math.log1p(y + math.sqrt(y * (y + 2)))


def _normalize(M, s):
    m = float(np.max(np.abs(M)))
    return M / m, s + math.log(m)


def _unscale(M, s):
    """Fold a moderate log-scale back into the matrix."""
    if s != 0.0 and s < 40:
        return M * math.exp(s), 0.0
    return M, s


def _matrix_displacement(M, scale=0.0):
    """d(i, g i) for g = e^scale M in SL2(R)."""
    M, scale = _unscale(M, scale)
    a, b = M[0]
    c, d = M[1]
    if scale == 0.0:
        q = c * c + d * d
        re = (a * c + b * d) / q
        im = 1.0 / q
        y = (re * re + (im - 1) ** 2) / (2 * im)
        if y < 1e12:
            return _arccosh1p(y)
    # cosh(dist) = e^{2 scale} (a^2+b^2+c^2+d^2) / 2 is huge here
    return 2 * scale + math.log(a * a + b * b + c * c + d * d)


def _trace_translation(M, scale=0.0):
    M, scale = _unscale(M, scale)
    tr = abs(M[0][0] + M[1][1])
    if scale == 0.0:
        t = tr / 2
        if t <= 1:
            return 0.0
        if t < 1e12:
            return 2 * math.acosh(t)
    return 2 * (scale + math.log(tr))


_RESCALE = 1e100


class _MatrixTracker:
    """Running product kept as plain floats (faster than numpy for 2x2)."""
    __slots__ = ("mats", "m", "scale")

    def __init__(self, mats):
        self.mats = mats
        self.m = (1.0, 0.0, 0.0, 1.0)
        self.scale = 0.0

    def push(self, x):
        a, b, c, d = self.m
        p, q, r, s = self.mats[x]
        m = (a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s)
        big = max(abs(v) for v in m)
        if big > _RESCALE:
            m = tuple(v / big for v in m)
            self.scale += math.log(big)
        self.m = m

    @property
    def M(self):
        a, b, c, d = self.m
        return np.array([[a, b], [c, d]])

    def displacement(self):
        if self.scale == 0.0:
            a, b, c, d = self.m
            return _matrix_displacement(((a, b), (c, d)))
        return _matrix_displacement(self.M, self.scale)

    def copy(self):
        t = _MatrixTracker(self.mats)
        t.m = self.m
        t.scale = self.scale
        return t


def default_plane_generators(t=2.0):
    """diag(2, 1/2) and its conjugate by P = [[cosh t, sinh t], [sinh t, cosh t]].

    For t = 2 the ping-pong half discs |z| < 1/2, |z| > 2 of the first
    generator and their P-images around 0.94 and 1.06 are disjoint, so the
    pair is Schottky.
    """
    a = np.array([[2.0, 0.0], [0.0, 0.5]])
    ch, sh = math.cosh(t), math.sinh(t)
    P = np.array([[ch, sh], [sh, ch]])
    Pinv = np.array([[ch, -sh], [-sh, ch]])
    return {"a": a, "b": P @ a @ Pinv}


class HyperbolicPlane(HyperbolicAction):
    """Words acting on the upper half plane through SL(2,R), basepoint i."""
    kind = PLANE

    def __init__(self, matrices=None, **kw):
        kw.setdefault("delta", 0.89)
        matrices = default_plane_generators() if matrices is None else matrices
        mats = {}
        for g, m in matrices.items():
            arr = np.array([[_as_float(x) for x in row] for row in m], dtype=float)
            if arr.shape != (2, 2):
                raise MalformedFile(f"generator {g!r} is not a 2x2 matrix")
            det = arr[0, 0] * arr[1, 1] - arr[0, 1] * arr[1, 0]
            if abs(det - 1) > 1e-9:
                raise NonUnitDeterminant(f"generator {g!r} has determinant {float(det):.12g}")
            mats[g] = arr
            mats[inverse_letter(g)] = np.array([[arr[1, 1], -arr[0, 1]],
                                                [-arr[1, 0], arr[0, 0]]])
        super().__init__(sorted(matrices), **kw)
        self.mats = mats
        self._flat = {g: tuple(float(v) for v in m.ravel()) for g, m in mats.items()}

    def tracker(self, prefix=()):
        t = _MatrixTracker(self._flat)
        for x in prefix:
            t.push(x)
        return t

    def matrix(self, word):
        t = self.tracker(word)
        return t.M * math.exp(t.scale)

    def _tau_exact_supported(self):
        return True

    def tau_exact(self, g):
        t = self.tracker(g)
        return _trace_translation(t.M, t.scale)

    def tau_limit(self, g, N):
        """d(i, g^N i) / N with g^N by repeated squaring."""
        if N < 1:
            raise ValueError("N must be >= 1")
        t = self.tracker(g)
        M, s = t.M, t.scale
        R, rs = np.eye(2), 0.0
        k = N
        while k:
            if k & 1:
                R, rs = _normalize(R @ M, rs + s)
            k >>= 1
            if k:
                M, s = _normalize(M @ M, 2 * s)
        return _matrix_displacement(R, rs) / N

    def config(self):
        return {"kind": self.kind,
                "generators": {g: self.mats[g].tolist() for g in self.generators},
                "delta": self.delta}


# -- quotient Cayley graphs ---------------------------------------------------

class PermutationTarget:
    """Finite permutation group with word metric from a BFS ball.

    The ball is computed once (radius capped by the BFS budget) and only
    read afterwards.
    """

    def __init__(self, perms, radius=None):
        self.perms = {}
        for g, p in perms.items():
            p = tuple(int(i) for i in p)
            if sorted(p) != list(range(len(p))):
                raise MalformedFile(f"image of {g!r} is not a permutation")
            inv = [0] * len(p)
            for i, j in enumerate(p):
                inv[j] = i
            self.perms[g] = p
            self.perms[inverse_letter(g)] = tuple(inv)
        sizes = {len(p) for p in self.perms.values()}
        if len(sizes) != 1:
            raise MalformedFile("permutations of different degrees")
        self.degree = sizes.pop()
        self.identity = tuple(range(self.degree))
        self.radius = current_budget().bfs_radius if radius is None else radius
        self.dist, self.complete = self._ball()

    def _ball(self):
        dist = {self.identity: 0}
        frontier = deque([self.identity])
        while frontier:
            x = frontier.popleft()
            if dist[x] == self.radius:
                continue
            for p in self.perms.values():
                y = self.mul(x, p)
                if y not in dist:
                    dist[y] = dist[x] + 1
                    frontier.append(y)
        complete = all(self.mul(x, p) in dist for x in dist for p in self.perms.values())
        return dist, complete

    @staticmethod
    def mul(x, p):
        # right action: apply x then p
        return tuple(p[i] for i in x)

    def letter(self, x):
        try:
            return self.perms[x]
        except KeyError:
            raise MalformedFile(f"no permutation for letter {x!r}") from None

    def length(self, elem):
        try:
            return self.dist[elem]
        except KeyError:
            raise BudgetExceeded(
                f"element outside the BFS ball of radius {self.radius} "
                "(raise it with LOXOLAB_BUDGET=bfs=N)") from None

    def describe(self):
        return {"permutations": {g: list(p) for g, p in sorted(self.perms.items())
                                 if not g.endswith("^-1")}}


class _PermTracker:
    __slots__ = ("target", "elem")

    def __init__(self, target):
        self.target = target
        self.elem = target.identity

    def push(self, x):
        self.elem = self.target.mul(self.elem, self.target.letter(x))

    def displacement(self):
        return self.target.length(self.elem)

    def copy(self):
        t = _PermTracker(self.target)
        t.elem = self.elem
        return t


class _ImageTracker:
    """Push source letters through their images into a target tracker."""
    __slots__ = ("images", "inner")

    def __init__(self, images, inner):
        self.images = images
        self.inner = inner

    def push(self, x):
        for y in self.images[x]:
            self.inner.push(y)

    def displacement(self):
        return self.inner.displacement()

    def copy(self):
        return _ImageTracker(self.images, self.inner.copy())


class QuotientCayley(HyperbolicAction):
    """Word length of the image under a homomorphism to a target group.

    ``target`` is a FreeProduct (exact normal forms) or a PermutationTarget
    (BFS ball).  ``images`` maps each source generator to a target word.
    If ``delta`` is not given it is estimated by four-point sampling.
    """
    kind = QUOTIENT

    def __init__(self, target, images, delta=None, **kw):
        images = {g: tuple(w) for g, w in images.items()}
        for g, w in list(images.items()):
            images[inverse_letter(g)] = inverse_word(w)
        self.target = target
        self.images = images
        super().__init__(sorted(g for g in images if not g.endswith("^-1")),
                         delta=0.0 if delta is None else delta, **kw)
        self.delta_estimated = delta is None
        if delta is None:
            self.delta = estimate_delta(self)
            if "c_delta" not in kw or kw["c_delta"] is None:
                self.c_delta = 8 * self.delta + 1

    def tracker(self, prefix=()):
        if isinstance(self.target, FreeProduct):
            inner = _SyllableTracker(self.target, "length")
        else:
            inner = _PermTracker(self.target)
        t = _ImageTracker(self.images, inner)
        for x in prefix:
            t.push(x)
        return t

    def image(self, word):
        return tuple(y for x in word for y in self.images[x])

    def _tau_exact_supported(self):
        return isinstance(self.target, FreeProduct)

    def tau_exact(self, g):
        if not isinstance(self.target, FreeProduct):
            raise Unsupported("no exact translation-length rule for this target")
        fp = self.target
        syl = fp.cyclic_normal_form(self.image(g))
        if not syl:
            return 0
        if len(syl) == 1:
            name, x = syl[0]
            return fp.factors[name].stable_length(x)
        return fp.word_length(syl)

    def config(self):
        return {"kind": self.kind,
                "generators": {g: " ".join(self.images[g]) for g in self.generators},
                "target": self.target.describe(), "delta": self.delta}


def estimate_delta(action, max_len=6, samples=3000, seed=0):
    """Four-point estimate of the hyperbolicity constant at the basepoint.

    Returns the largest observed min((y,z)_x, (z,w)_x) - (y,w)_x over
    seeded triples of reduced words of length <= ``max_len``.
    """
    rng = block_rng(seed, 0, stream=900)

    def word():
        return random_reduced_word(rng, action.generators, int(rng.integers(0, max_len + 1)))

    worst = 0.0
    for _ in range(samples):
        y, z, w = word(), word(), word()
        yz = action.gromov_product(y, z).value
        zw = action.gromov_product(z, w).value
        yw = action.gromov_product(y, w).value
        worst = max(worst, min(yz, zw) - yw)
    return float(worst)


# -- construction from names and config files ---------------------------------

def cyclic_product(orders, gens=("a", "b")):
    """Z/p * Z/q (orders may be inf) with one generator per factor A, B."""
    return FreeProduct({name: CyclicFactor(g, o)
                        for name, g, o in zip("AB", gens, orders)})


def _orders(args):
    out = []
    for tok in args.split(","):
        tok = tok.strip().lower()
        out.append(math.inf if tok in ("inf", "oo", "") else int(tok))
    return out


def builtin_action(name, generators=("a", "b")):
    """Named actions for the command line.

    ``cayley-tree``; ``bass-serre[:P,Q]`` (first half of the generators in
    factor A, the rest in B; P, Q orders of cyclic factors, default inf);
    ``plane``; ``quotient[:P,Q]`` (F2 onto Z/P * Z/Q, default 2,3).
    """
    kind, _, args = name.partition(":")
    kind = _KIND_ALIASES.get(kind.strip().lower().replace("_", "-"))
    gens = tuple(generators)
    if kind == CAYLEY_TREE:
        return CayleyTree(gens)
    if kind == BASS_SERRE:
        if len(gens) == 2:
            orders = _orders(args) if args else [math.inf, math.inf]
            return BassSerreTree(cyclic_product(orders, gens), base="A")
        if args:
            raise ValueError("factor orders only apply to two generators")
        k = len(gens) // 2
        return BassSerreTree(FreeProduct({"A": FreeFactor(gens[:k]),
                                          "B": FreeFactor(gens[k:])}), base="A")
    if kind == PLANE:
        if tuple(sorted(gens)) != ("a", "b"):
            raise ValueError("builtin plane action is defined for generators a, b")
        return HyperbolicPlane()
    if kind == QUOTIENT:
        if len(gens) != 2:
            raise ValueError("builtin quotient action needs two generators")
        orders = _orders(args) if args else [2, 3]
        return QuotientCayley(cyclic_product(orders, gens), {g: (g,) for g in gens})
    raise ValueError(f"unknown action {name!r}")


def action_from_config(cfg):
    """Build an action from a config dictionary.

    ``{"kind": ..., "generators": {...}, "delta": ...}`` where generator
    values are matrices (plane), factor names or ``{"factor", "order"}``
    dicts (Bass-Serre), or image words (quotient, with a ``target``).
    """
    try:
        kind = _KIND_ALIASES[str(cfg["kind"]).lower().replace("_", "-")]
    except KeyError:
        raise MalformedFile(f"unknown or missing action kind in {cfg!r}") from None
    gens = cfg.get("generators", {})
    delta = cfg.get("delta")
    extra = {k: cfg[k] for k in ("c_delta",) if k in cfg}
    if kind == CAYLEY_TREE:
        return CayleyTree(tuple(gens) or ("a", "b"), delta=delta or 0.0, **extra)
    if kind == PLANE:
        return HyperbolicPlane(gens or None, delta=0.89 if delta is None else delta, **extra)
    if kind == BASS_SERRE:
        if "factors" in cfg:
            fp = free_product_from_spec(cfg["factors"])
        else:
            groups, orders = {}, {}
            for g, v in gens.items():
                if isinstance(v, dict):
                    name = v["factor"]
                    if "order" in v:
                        orders[name] = v["order"]
                else:
                    name = v
                groups.setdefault(name, []).append(g)
            spec = {}
            for name, gl in groups.items():
                default = "inf" if len(gl) == 1 else "free"
                spec[name] = {"gens": gl, "order": orders.get(name, default)}
            fp = free_product_from_spec(spec)
        return BassSerreTree(fp, base=cfg.get("base"), delta=delta or 0.0, **extra)
    if kind == QUOTIENT:
        target = cfg.get("target", "cyclic:2,3")
        images = {g: parse_word(v) if isinstance(v, str) else tuple(v)
                  for g, v in gens.items()}
        if isinstance(target, str):
            fam, _, args = target.partition(":")
            if fam.strip().lower() != "cyclic":
                raise MalformedFile(f"unknown quotient target {target!r}")
            fp = cyclic_product(_orders(args), tuple(sorted(
                {base_letter(y)[0] for w in images.values() for y in w})) or ("a", "b"))
        elif "permutations" in target:
            fp = PermutationTarget(target["permutations"], target.get("radius"))
        else:
            fp = free_product_from_spec(target.get("factors", target))
        if not images:
            raise MalformedFile("quotient action needs generator images")
        return QuotientCayley(fp, images, delta=delta, **extra)
    raise MalformedFile(f"unsupported action kind {kind}")


def load_action(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    return action_from_config(cfg)
