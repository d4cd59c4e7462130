"""Quasi-periodic dual lattice: indices m = (s1, s2) in Z^4, their dual images
p_m = 2*pi*(s1 + alpha*s2) in R^2, box enumeration in the triple norm
|||m||| = |s1|_inf + |s2|_inf, best rational approximation of alpha, and the
cluster geometry of the lattice image at a given approximation scale.

alpha is represented exactly, either as a quadratic irrational (a + b*sqrt(d))/c
or as a continued-fraction prefix, so that colinearity questions reduce to
integer arithmetic and best approximants are exact convergents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * math.pi

# Bits of precision carried by the rational surrogate of alpha.  Every place
# that consumes it needs far less: |q*alpha - p| down to ~1e-16 with q <= 1e6.
_ALPHA_BITS = 320


class NoApproximant(Exception):
    """No continued-fraction convergent satisfies the approximation window."""


class RationalAlpha(ValueError):
    """The descriptor denotes a rational number."""


@dataclass(frozen=True, order=True)
class LatticeIndex:
    """A point m in Z^4, stored as the integer pair (s1, s2).

    Ordering is lexicographic on (s1, s2), which fixes the deterministic
    enumeration order used throughout.
    """

    s1: tuple[int, int]
    s2: tuple[int, int]

    def __add__(self, other: "LatticeIndex") -> "LatticeIndex":
        return LatticeIndex(
            (self.s1[0] + other.s1[0], self.s1[1] + other.s1[1]),
            (self.s2[0] + other.s2[0], self.s2[1] + other.s2[1]),
        )

    def __sub__(self, other: "LatticeIndex") -> "LatticeIndex":
        return LatticeIndex(
            (self.s1[0] - other.s1[0], self.s1[1] - other.s1[1]),
            (self.s2[0] - other.s2[0], self.s2[1] - other.s2[1]),
        )

    def __neg__(self) -> "LatticeIndex":
        return LatticeIndex((-self.s1[0], -self.s1[1]), (-self.s2[0], -self.s2[1]))

    def scale(self, n: int) -> "LatticeIndex":
        return LatticeIndex(
            (n * self.s1[0], n * self.s1[1]), (n * self.s2[0], n * self.s2[1])
        )

    def is_zero(self) -> bool:
        return self.s1 == (0, 0) and self.s2 == (0, 0)

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.s1[0], self.s1[1], self.s2[0], self.s2[1])

    @staticmethod
    def from_row(row) -> "LatticeIndex":
        a, b, c, d = (int(v) for v in row)
        return LatticeIndex((a, b), (c, d))


ZERO_INDEX = LatticeIndex((0, 0), (0, 0))


def _isqrt_fraction(d: int, bits: int) -> Fraction:
    """sqrt(d) as a Fraction accurate to ~2**-bits absolute."""
    num = math.isqrt(d << (2 * bits))
    return Fraction(num, 1 << bits)


@dataclass(frozen=True)
class QPParams:
    """The frequency alpha in (0,1) plus its Diophantine bookkeeping.

    Exactly one of `quadratic` / `cf_prefix` is set.  `quadratic` is the tuple
    (a, b, d, c) for alpha = (a + b*sqrt(d))/c with d > 0 not a perfect square
    and b != 0.  `cf_prefix` is a list of continued-fraction terms
    [a0, a1, ...] whose value stands in for alpha; the Diophantine-type
    condition on cubic combinations is then not certified (flagged).
    """

    quadratic: tuple[int, int, int, int] | None = None
    cf_prefix: tuple[int, ...] | None = None
    mu: float = 2.0
    n0: float | None = None
    n1: float | None = None
    _alpha_frac: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if (self.quadratic is None) == (self.cf_prefix is None):
            raise ValueError("exactly one of quadratic / cf_prefix must be given")
        if self.mu < 2:
            raise ValueError("irrationality measure must be >= 2")
        if self.quadratic is not None:
            a, b, d, c = self.quadratic
            if c == 0:
                raise ValueError("zero denominator in quadratic descriptor")
            if b == 0 or d <= 0 or math.isqrt(d) ** 2 == d:
                raise RationalAlpha(
                    "quadratic descriptor (a=%d, b=%d, d=%d, c=%d) is rational"
                    % (a, b, d, c)
                )
            frac = Fraction(a, c) + Fraction(b, c) * _isqrt_fraction(d, _ALPHA_BITS)
        else:
            terms = tuple(int(t) for t in self.cf_prefix)
            if len(terms) < 2 or any(t <= 0 for t in terms[1:]):
                raise ValueError("cf prefix needs a0 and positive partial quotients")
            val = Fraction(terms[-1])
            for t in reversed(terms[:-1]):
                val = Fraction(t) + 1 / val
            frac = val
            object.__setattr__(self, "cf_prefix", terms)
        if not (0 < frac < 1):
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "_alpha_frac", frac)

    @property
    def alpha(self) -> float:
        return float(self._alpha_frac)

    @property
    def alpha_fraction(self) -> Fraction:
        return self._alpha_frac

    @property
    def condition4_certified(self) -> bool:
        return self.quadratic is not None

    def minimal_triple(self) -> tuple[int, int, int] | None:
        """(n1, n2, n3) with n1 + n2*alpha + n3*alpha^2 = 0, if quadratic."""
        if self.quadratic is None:
            return None
        a, b, d, c = self.quadratic
        return (a * a - b * b * d, -2 * a * c, c * c)

    def combination_is_zero(self, n1: int, n2: int, n3: int) -> bool:
        """Exact test of n1 + n2*alpha + n3*alpha^2 == 0."""
        if self.quadratic is not None:
            a, b, d, c = self.quadratic
            rational = c * c * n1 + a * c * n2 + (a * a + b * b * d) * n3
            surd = b * (c * n2 + 2 * a * n3)
            return rational == 0 and surd == 0
        f = self._alpha_frac
        return n1 + n2 * f + n3 * f * f == 0

    def continued_fraction(self, max_terms: int = 64) -> list[int]:
        """Leading continued-fraction terms of alpha."""
        if self.cf_prefix is not None:
            return list(self.cf_prefix[:max_terms])
        terms = []
        x = self._alpha_frac
        # Stop while enough precision remains for the next partial quotient.
        guard = Fraction(1, 1 << (_ALPHA_BITS - 16))
        for _ in range(max_terms):
            a = math.floor(x)
            terms.append(a)
            frac = x - a
            if frac <= guard:
                break
            x = 1 / frac
        return terms

    def convergents(self, max_terms: int = 64) -> list[tuple[int, int]]:
        """(numerator, denominator) convergents of alpha, in order."""
        out = []
        h0, h1 = 1, 0
        k0, k1 = 0, 1
        for a in self.continued_fraction(max_terms):
            h0, h1 = a * h0 + h1, h0
            k0, k1 = a * k0 + k1, k0
            out.append((h0, k0))
        return out


def triple_norm(m: LatticeIndex) -> int:
    """|||m||| = |s1|_inf + |s2|_inf."""
    return max(abs(m.s1[0]), abs(m.s1[1])) + max(abs(m.s2[0]), abs(m.s2[1]))


@dataclass(frozen=True)
class DualVector:
    p: np.ndarray  # 2-vector 2*pi*(s1 + alpha*s2)
    norm3: int

    @property
    def length(self) -> float:
        return float(np.hypot(self.p[0], self.p[1]))

    @property
    def angle(self) -> float:
        return float(math.atan2(self.p[1], self.p[0]) % TWO_PI)


def dual_vector(m: LatticeIndex, params: QPParams) -> DualVector:
    a = params.alpha
    p = np.array(
        [
            TWO_PI * (m.s1[0] + a * m.s2[0]),
            TWO_PI * (m.s1[1] + a * m.s2[1]),
        ]
    )
    return DualVector(p=p, norm3=triple_norm(m))


# ---------------------------------------------------------------------------
# Array views.  The heavy geometry below works on (N, 4) integer arrays with
# columns (s1x, s1y, s2x, s2y); LatticeIndex is the scalar API surface.
# ---------------------------------------------------------------------------


def indices_to_array(indices) -> np.ndarray:
    return np.array([m.as_row() for m in indices], dtype=np.int64).reshape(-1, 4)


def array_to_indices(rows: np.ndarray) -> list[LatticeIndex]:
    return [LatticeIndex.from_row(r) for r in rows]


def triple_norm_array(rows: np.ndarray) -> np.ndarray:
    return np.max(np.abs(rows[:, :2]), axis=1) + np.max(np.abs(rows[:, 2:]), axis=1)


def dual_array(rows: np.ndarray, params: QPParams) -> np.ndarray:
    """(N, 2) array of dual vectors 2*pi*(s1 + alpha*s2)."""
    a = params.alpha
    return TWO_PI * (rows[:, :2] + a * rows[:, 2:])


@lru_cache(maxsize=32)
def _box_rows_cached(radius: int) -> np.ndarray:
    rng = np.arange(-radius, radius + 1, dtype=np.int64)
    g = np.stack(np.meshgrid(rng, rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 4)
    keep = triple_norm_array(g) <= radius
    g = g[keep]
    order = np.lexsort((g[:, 3], g[:, 2], g[:, 1], g[:, 0]))
    out = g[order]
    out.setflags(write=False)
    return out


def enumerate_box_array(radius: int) -> np.ndarray:
    """All m with |||m||| <= radius as a lexicographically sorted (N,4) array."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return _box_rows_cached(int(radius))


def enumerate_box(radius: int) -> list[LatticeIndex]:
    return array_to_indices(enumerate_box_array(radius))


def box_size(radius: int) -> int:
    return enumerate_box_array(radius).shape[0]


# ---------------------------------------------------------------------------
# Best rational approximation and the induced cluster structure.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproxPair:
    """Best approximation |alpha*q + p| <= k^{-r}/4 with q <= 4k^r.

    p carries the sign convention eps_q = alpha + p/q, i.e. p is minus the
    convergent numerator.
    """

    q: int
    p: int
    eps_q: float

    @property
    def step(self) -> float:
        return abs(self.eps_q) * self.q


def best_rational(params: QPParams, k: float, r: float) -> ApproxPair:
    if k <= 1 or r <= 0:
        raise ValueError("need k > 1 and r > 0")
    q_max = 4.0 * k**r
    bound = Fraction(1, 4) / Fraction(k**r).limit_denominator(10**12)
    alpha = params.alpha_fraction
    best = None
    for num, den in params.convergents():
        if den > q_max:
            break
        err = abs(den * alpha - num)
        if err <= bound:
            if best is None or err < best[0]:
                best = (err, den, num)
    if best is None:
        raise NoApproximant(
            "no convergent with q <= %.6g reaches |alpha*q+p| <= %.3g"
            % (q_max, float(bound))
        )
    err, q, num = best
    return ApproxPair(q=q, p=-num, eps_q=float((q * alpha - num) / q))


@dataclass(frozen=True)
class ClusterGrid:
    """Partition of dual images by the residue construction at scale (q, p).

    Geometry is carried in units of s1 + alpha*s2 (the dual vector divided by
    2*pi): cluster diameters < 1/(8q) and separations > 1/(2q) refer to this
    scale.  `clusters` maps (s, s2'') -> sorted list of members, where
    s = s1 - p*s2' and s2 = q*s2' + s2'' with 0 <= s2''_j < q.
    """

    clusters: dict[tuple[tuple[int, int], tuple[int, int]], list[LatticeIndex]]
    step: float
    cluster_diameter: float
    min_separation: float

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def cluster_decompose(
    box, approx: ApproxPair, params: QPParams, brute_force_cap: int = 20000
) -> ClusterGrid:
    rows = box if isinstance(box, np.ndarray) else indices_to_array(box)
    if rows.shape[0] == 0:
        return ClusterGrid({}, abs(approx.eps_q) * approx.q, 0.0, math.inf)
    q, p = approx.q, approx.p
    s2 = rows[:, 2:]
    s2p = np.floor_divide(s2, q)
    s2pp = s2 - q * s2p
    s_key = rows[:, :2] - p * s2p
    points = (rows[:, :2] + params.alpha * s2).astype(float)

    keys = np.concatenate([s_key, s2pp], axis=1)
    order = np.lexsort((rows[:, 3], rows[:, 2], rows[:, 1], rows[:, 0]))
    clusters: dict = {}
    labels = np.empty(rows.shape[0], dtype=np.int64)
    key_ids: dict = {}
    for i in range(rows.shape[0]):
        kk = tuple(int(v) for v in keys[i])
        if kk not in key_ids:
            key_ids[kk] = len(key_ids)
        labels[i] = key_ids[kk]
    for i in order:
        kk = tuple(int(v) for v in keys[i])
        key = ((kk[0], kk[1]), (kk[2], kk[3]))
        clusters.setdefault(key, []).append(LatticeIndex.from_row(rows[i]))

    diam = 0.0
    for lab in range(len(key_ids)):
        pts = points[labels == lab]
        if pts.shape[0] > 1:
            lo = pts.min(axis=0)
            hi = pts.max(axis=0)
            # members sit on an axis-aligned square lattice, so the bounding
            # box diagonal is attained
            diam = max(diam, float(np.hypot(*(hi - lo))))

    min_sep = math.inf
    n = rows.shape[0]
    if len(key_ids) > 1:
        if n <= brute_force_cap:
            blk = 2048
            for i0 in range(0, n, blk):
                pi = points[i0 : i0 + blk]
                li = labels[i0 : i0 + blk]
                d = np.linalg.norm(pi[:, None, :] - points[None, :, :], axis=-1)
                cross = li[:, None] != labels[None, :]
                if cross.any():
                    min_sep = min(min_sep, float(d[cross].min()))
        else:
            # nearest clusters by centroid, exact point distances among those
            cents = np.zeros((len(key_ids), 2))
            for lab in range(len(key_ids)):
                cents[lab] = points[labels == lab].mean(axis=0)
            tree = cKDTree(cents)
            _, nbr = tree.query(cents, k=min(9, len(key_ids)))
            for lab in range(len(key_ids)):
                for other in np.atleast_1d(nbr[lab])[1:]:
                    a = points[labels == lab]
                    b = points[labels == int(other)]
                    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
                    min_sep = min(min_sep, float(d.min()))
    return ClusterGrid(
        clusters=clusters,
        step=abs(approx.eps_q) * q,
        cluster_diameter=diam,
        min_separation=min_sep,
    )


def count_short_vectors(box_radius: int, threshold: float, params: QPParams) -> int:
    """Exact count of m != 0 with |||m||| <= box_radius and |p_m| < threshold.

    Exhaustive over s2; for thresholds below pi the matching s1 component is
    the unique nearest integer, so the scan is O(box_radius^2) instead of a
    four-fold loop.
    """
    if box_radius < 0:
        raise ValueError("box_radius must be >= 0")
    if threshold <= 0:
        return 0
    a = params.alpha
    t = threshold / TWO_PI  # component bound on s1 + alpha*s2
    rng = np.arange(-box_radius, box_radius + 1, dtype=np.int64)
    g2 = np.stack(np.meshgrid(rng, rng, indexing="ij"), axis=-1).reshape(-1, 2)
    count = 0
    shifts = range(-int(math.ceil(t - 0.5)) - 1, int(math.ceil(t - 0.5)) + 2) if t >= 0.5 else (0,)
    base = -a * g2
    nearest = np.rint(base).astype(np.int64)
    for dx in shifts:
        for dy in shifts:
            s1 = nearest + np.array([dx, dy], dtype=np.int64)
            vec = s1 + a * g2
            ok = np.max(np.abs(vec), axis=1) <= t  # quick reject
            if not ok.any():
                continue
            s1o, g2o, veco = s1[ok], g2[ok], vec[ok]
            norm = np.max(np.abs(s1o), axis=1) + np.max(np.abs(g2o), axis=1)
            r2 = np.einsum("ij,ij->i", veco, veco)
            good = (norm <= box_radius) & (r2 < t * t) & (norm > 0)
            count += int(good.sum())
    return count


def min_dual_norm_constant(params: QPParams, radius: int) -> float:
    """Empirical C with |p_m| >= 2*pi*C*|||m|||^{-mu} over the given box.

    Measures the constant in the two-sided norm comparison once per alpha; the
    lower bound itself is a Diophantine fact, the constant is not universal.
    """
    rows = enumerate_box_array(radius)
    norms = triple_norm_array(rows)
    keep = norms > 0
    p = np.linalg.norm(dual_array(rows[keep], params), axis=1)
    return float(np.min(p / TWO_PI * norms[keep] ** params.mu))


def cross_combination(m: LatticeIndex, mp: LatticeIndex) -> tuple[int, int, int]:
    """Integer triple (n1, n2, n3) with cross(p_m, p_mp)/(2*pi)^2 =
    n1 + n2*alpha + n3*alpha^2."""
    c = lambda u, v: u[0] * v[1] - u[1] * v[0]
    return (
        c(m.s1, mp.s1),
        c(m.s1, mp.s2) + c(m.s2, mp.s1),
        c(m.s2, mp.s2),
    )


def duals_colinear(m: LatticeIndex, mp: LatticeIndex, params: QPParams) -> bool:
    """Exact test: p_m and p_mp lie on one line through the origin."""
    return params.combination_is_zero(*cross_combination(m, mp))


def rational_ratio(m: LatticeIndex, mp: LatticeIndex) -> Fraction | None:
    """If mp = c*m in Z^4 with c rational, return c; otherwise None."""
    a = np.array(m.as_row(), dtype=object)
    b = np.array(mp.as_row(), dtype=object)
    if all(v == 0 for v in a):
        return None
    # all 2x2 minors of [[a],[b]] must vanish for Z^4 parallelism
    for i in range(4):
        for j in range(i + 1, 4):
            if a[i] * b[j] - a[j] * b[i] != 0:
                return None
    for i in range(4):
        if a[i] != 0:
            return Fraction(int(b[i]), int(a[i]))
    return None


def primitive_direction(m: LatticeIndex) -> LatticeIndex:
    """m divided by the gcd of its four components."""
    g = math.gcd(math.gcd(abs(m.s1[0]), abs(m.s1[1])),
                 math.gcd(abs(m.s2[0]), abs(m.s2[1])))
    if g == 0:
        raise ValueError("zero index has no direction")
    return LatticeIndex(
        (m.s1[0] // g, m.s1[1] // g), (m.s2[0] // g, m.s2[1] // g)
    )
