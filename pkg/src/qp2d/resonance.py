"""Resonance geometry on the angle circle and in the lattice.

Step I excises the angles where some small-norm dual vector makes
|k(phi) + p_m|^2 - k^2 small.  Step II classifies the surviving resonances in
the larger box into isolated points, colinear chains (split into residue
windows along a direction from the potential's support), labels each window
weakly or strongly resonant via real pole detection of its block resolvent,
and assembles the mutually orthogonal block projector of the model operator.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .fiber import coupling_pairs, diagonal_energies
from .lattice import (
    LatticeIndex,
    QPParams,
    array_to_indices,
    dual_array,
    dual_vector,
    duals_colinear,
    enumerate_box_array,
    indices_to_array,
    primitive_direction,
    rational_ratio,
    triple_norm,
    triple_norm_array,
)
from .potential import PotentialSpec
from .profile import ParameterProfile

TWO_PI = 2.0 * math.pi


class ResonantBase(ValueError):
    """The base angle lies inside the step-I resonant set."""


class OverlapDetected(ValueError):
    """Constructed blocks intersect or are connected by the potential."""


# ---------------------------------------------------------------------------
# Angle sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AngleSet:
    """Disjoint sorted sub-intervals of [0, 2*pi)."""

    intervals: tuple[tuple[float, float], ...]

    @staticmethod
    def from_raw(raw) -> "AngleSet":
        """Normalize arbitrary (possibly wrapping/overlapping) arcs."""
        pieces = []
        for a, b in raw:
            if b <= a:
                continue
            if b - a >= TWO_PI:
                pieces.append((0.0, TWO_PI))
                continue
            a_m = a % TWO_PI
            b_m = a_m + (b - a)
            if b_m <= TWO_PI:
                pieces.append((a_m, b_m))
            else:
                pieces.append((a_m, TWO_PI))
                pieces.append((0.0, b_m - TWO_PI))
        pieces.sort()
        merged: list[list[float]] = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return AngleSet(tuple((a, b) for a, b in merged))

    @staticmethod
    def full() -> "AngleSet":
        return AngleSet(((0.0, TWO_PI),))

    @staticmethod
    def empty() -> "AngleSet":
        return AngleSet(())

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def contains(self, phi: float) -> bool:
        x = phi % TWO_PI
        starts = [a for a, _ in self.intervals]
        i = bisect_right(starts, x) - 1
        return i >= 0 and x <= self.intervals[i][1]

    def union(self, other: "AngleSet") -> "AngleSet":
        return AngleSet.from_raw(list(self.intervals) + list(other.intervals))

    def complement(self) -> "AngleSet":
        out = []
        prev = 0.0
        for a, b in self.intervals:
            if a > prev:
                out.append((prev, a))
            prev = max(prev, b)
        if prev < TWO_PI:
            out.append((prev, TWO_PI))
        return AngleSet(tuple(out))

    def minus(self, other: "AngleSet") -> "AngleSet":
        return other.union(self.complement()).complement()

    def shifted(self, delta: float) -> "AngleSet":
        return AngleSet.from_raw([(a + delta, b + delta) for a, b in self.intervals])

    def expanded(self, eps: float) -> "AngleSet":
        return AngleSet.from_raw([(a - eps, b + eps) for a, b in self.intervals])


# ---------------------------------------------------------------------------
# Step-I resonance arcs
# ---------------------------------------------------------------------------


def detuning(phi, k: float, p: float, phi_m: float):
    """|k(phi) + p_m|^2 - k^2 = p^2 + 2*k*p*cos(phi - phi_m)."""
    return p * p + 2.0 * k * p * np.cos(np.asarray(phi) - phi_m)


def resonance_arcs(k: float, p: float, phi_m: float, threshold: float):
    """Arcs of phi where |detuning| <= threshold, exact in closed form."""
    if p <= 0:
        return []
    lo = (-p * p - threshold) / (2.0 * k * p)
    hi = (-p * p + threshold) / (2.0 * k * p)
    lo, hi = max(lo, -1.0), min(hi, 1.0)
    if lo > hi:
        return []
    th_lo = math.acos(hi)  # arccos is decreasing
    th_hi = math.acos(lo)
    return [
        (phi_m + th_lo, phi_m + th_hi),
        (phi_m - th_hi, phi_m - th_lo),
    ]


def tangent_angles(k: float, p: float, phi_m: float) -> tuple[float, float] | None:
    """The two roots phi_m^+- of detuning = 0, or None when p > 2k."""
    c = -p / (2.0 * k)
    if abs(c) > 1.0:
        return None
    th = math.acos(c)
    return ((phi_m + th) % TWO_PI, (phi_m - th) % TWO_PI)


def disc_radius(k: float, p: float, threshold: float, tau_factor: float = 1.0) -> float:
    """Radius of the discs around phi_m^+- guaranteed to contain the arcs.

    Away from tangency the arc is a linearized band of width threshold over
    the derivative 2*k*p*sin; near tangency (|4k^2 - p^2| <= 4*threshold) the
    square-root scale takes over.
    """
    if p > 4.0 * k:
        return 0.0
    if abs(4.0 * k * k - p * p) > 4.0 * threshold:
        s = math.sqrt(max(1.0 - (p / (2.0 * k)) ** 2, 1e-300))
        return threshold / (k * p * s)
    return 32.0 * math.sqrt(tau_factor * threshold) / k


def step1_resonant(
    phi: float,
    k: float,
    m: LatticeIndex,
    tau: float,
    profile: ParameterProfile,
    params: QPParams,
) -> bool:
    """Small-denominator test at the step-I threshold tau*k^(1-40*mu*delta)."""
    if m.is_zero():
        raise ValueError("the zero index is excluded from the resonance test")
    dv = dual_vector(m, params)
    thr = tau * (profile.t1 / profile.tau)
    return bool(abs(detuning(phi, k, dv.length, dv.angle)) <= thr)


def step1_arcs(
    k: float,
    profile: ParameterProfile,
    params: QPParams,
    tau_factor: float = 1.0,
):
    """Per-index resonance arcs over the step-I exclusion zone.

    Returns a list of (m, p, phi_m, arcs) for m in the zone, nonzero.
    """
    rows = enumerate_box_array(profile.tilde_radius)
    norms = triple_norm_array(rows)
    rows = rows[norms > 0]
    duals = dual_array(rows, params)
    ps = np.linalg.norm(duals, axis=1)
    angs = np.arctan2(duals[:, 1], duals[:, 0])
    thr = tau_factor * profile.t1
    out = []
    for row, p, ang in zip(rows, ps, angs):
        arcs = resonance_arcs(k, float(p), float(ang), thr)
        if arcs:
            out.append((LatticeIndex.from_row(row), float(p), float(ang), arcs))
    return out


def build_omega1(
    k: float,
    profile: ParameterProfile,
    params: QPParams,
    tau_factor: float = 1.0,
) -> AngleSet:
    """Angles surviving the step-I excision: [0, 2*pi) minus all arcs."""
    raw = []
    for _, _, _, arcs in step1_arcs(k, profile, params, tau_factor):
        raw.extend(arcs)
    return AngleSet.from_raw(raw).complement()


def resonant_set_step1(
    k: float,
    profile: ParameterProfile,
    params: QPParams,
    tau_factor: float = 1.0,
) -> AngleSet:
    return build_omega1(k, profile, params, tau_factor).complement()


# ---------------------------------------------------------------------------
# Step-II classification
# ---------------------------------------------------------------------------


@dataclass
class ClusterSubset:
    """One residue window m_c + n*q, n in [n_minus, n_plus], along a class
    direction; for a trivial class, a single lattice point."""

    members: tuple[LatticeIndex, ...]
    central: LatticeIndex
    n_minus: int
    n_plus: int
    t_q: float
    strength: str | None = None  # 'weak' | 'strong'
    poles: tuple[float, ...] = ()


@dataclass
class ClusterClass:
    """A maximal chain-connected component of the resonant set (colinear in
    the dual plane), with its direction data and residue windows."""

    members: tuple[LatticeIndex, ...]
    direction: LatticeIndex | None  # generating vector in the support, if any
    in_support: bool
    trivial: bool
    colinear_ok: bool
    t_perp: float
    p_q: float
    subsets: list[ClusterSubset] = field(default_factory=list)


@dataclass
class ClusterDecomposition:
    phi0: float
    k: float
    m_set: tuple[LatticeIndex, ...]
    m_prime: tuple[LatticeIndex, ...]
    m1: tuple[LatticeIndex, ...]
    classes: list[ClusterClass]
    strong_clusters: list[list[tuple[int, int]]] = field(default_factory=list)

    @property
    def m2(self) -> tuple[LatticeIndex, ...]:
        m1set = set(self.m1)
        return tuple(m for m in self.m_set if m not in m1set)

    def trivial_weak_points(self) -> list[LatticeIndex]:
        out = []
        for cls in self.classes:
            if cls.trivial:
                for sub in cls.subsets:
                    if sub.strength == "weak":
                        out.extend(sub.members)
        return sorted(out)

    def labeled(self) -> bool:
        return all(
            sub.strength is not None for cls in self.classes for sub in cls.subsets
        )


def _resonant_rows(
    phi0: float, k: float, radius: int, profile: ParameterProfile, params: QPParams
) -> np.ndarray:
    rows = enumerate_box_array(radius)
    norms = triple_norm_array(rows)
    rows = rows[norms > 0]
    norms = norms[norms > 0]
    kvec = k * np.array([math.cos(phi0), math.sin(phi0)])
    det = diagonal_energies(kvec, rows, params) - k * k
    thr = np.where(norms <= profile.tilde_radius, profile.t1, profile.t_star)
    return rows[np.abs(det) <= thr]


def _chain_components(rows: np.ndarray, radius: int) -> np.ndarray:
    """Union-find labels over rows, connecting triple-norm distance <= radius."""
    n = rows.shape[0]
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n > 1:
        tree = cKDTree(rows.astype(float))
        for i, j in tree.query_pairs(r=radius, p=np.inf):
            d = rows[i] - rows[j]
            if max(abs(d[0]), abs(d[1])) + max(abs(d[2]), abs(d[3])) <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    return np.array([find(i) for i in range(n)])


def _direction_in_support(
    spec: PotentialSpec, step: LatticeIndex
) -> LatticeIndex | None:
    """Generating vector of the support sharing the dual direction of step."""
    for q in sorted(spec.coeffs):
        if q.is_zero():
            continue
        if duals_colinear(q, step, spec.params):
            return primitive_direction(q)
    return None


def _integer_offset(step: LatticeIndex, q: LatticeIndex) -> int | None:
    """n with step = n*q exactly, else None."""
    ratio = rational_ratio(q, step)
    if ratio is None or ratio.denominator != 1:
        return None
    return int(ratio)


def classify(
    phi0: float,
    k: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
    box_radius: int | None = None,
) -> ClusterDecomposition:
    """Resonant-set decomposition at a non-resonant base angle.

    Splits the resonant set of the r1-box into isolated points and chain
    classes, verifies colinearity of each class by exact integer arithmetic,
    computes the direction data, and cuts non-trivial classes into residue
    windows along their support direction.
    """
    params = spec.params
    r1 = profile.box_r1 if box_radius is None else box_radius
    base_rows = enumerate_box_array(profile.tilde_radius)
    base_norms = triple_norm_array(base_rows)
    kvec = k * np.array([math.cos(phi0), math.sin(phi0)])
    det0 = diagonal_energies(kvec, base_rows[base_norms > 0], params) - k * k
    if np.any(np.abs(det0) <= 8.0 * profile.t1):
        raise ResonantBase(
            f"phi0={phi0:.6f} lies in the step-I resonant set at tau=8"
        )

    m_rows = _resonant_rows(phi0, k, r1, profile, params)
    mp_rows = _resonant_rows(phi0, k, 2 * r1, profile, params)
    m_set = tuple(array_to_indices(m_rows))
    m_prime = tuple(array_to_indices(mp_rows))

    if len(m_set) == 0:
        return ClusterDecomposition(phi0, k, (), m_prime, (), [])

    # the separation scales must dominate the potential's reach, otherwise
    # isolated points could still be coupled
    eff_iso = max(profile.m1_isolation, spec.max_support_norm)
    eff_chain = max(profile.chain_radius, spec.max_support_norm)

    # M1: members of M isolated from every other M' point
    mp_keys = {m: i for i, m in enumerate(m_prime)}
    m1 = []
    m2 = []
    if len(m_prime) > 1:
        tree = cKDTree(mp_rows.astype(float))
    for m in m_set:
        row = np.array(m.as_row(), dtype=float)
        isolated = True
        if len(m_prime) > 1:
            for j in tree.query_ball_point(row, r=eff_iso, p=np.inf):
                other = m_prime[j]
                if other == m:
                    continue
                if triple_norm(m - other) <= eff_iso:
                    isolated = False
                    break
        (m1 if isolated else m2).append(m)

    # chain classes over M'
    labels = _chain_components(mp_rows, eff_chain)
    m2_set = set(m2)
    class_labels = sorted(
        {labels[mp_keys[m]] for m in m2}
    )
    classes: list[ClusterClass] = []
    for lab in class_labels:
        members = tuple(
            m for i, m in enumerate(m_prime) if labels[i] == lab
        )
        base = members[0]
        colinear_ok = True
        step = None
        for m in members[1:]:
            d = m - base
            if step is None:
                step = d
            elif not duals_colinear(step, d, params):
                colinear_ok = False
        if step is None:
            colinear_ok = False
        gen = _direction_in_support(spec, step) if (colinear_ok and step) else None
        in_support = gen is not None
        if in_support:
            direction = gen
        elif colinear_ok and step is not None:
            direction = primitive_direction(step)
        else:
            direction = None

        t_perp = math.nan
        p_q = math.nan
        trivial = True
        if direction is not None:
            dvq = dual_vector(direction, params)
            p_q = dvq.length
            nu = dvq.p / p_q
            nu_perp = np.array([-nu[1], nu[0]])
            shift = kvec + dual_vector(base, params).p
            t_perp = float(shift @ nu_perp)
            if in_support:
                trivial = abs(k * k - t_perp * t_perp) > profile.t_star / 8.0
        cls = ClusterClass(
            members=members,
            direction=direction,
            in_support=in_support,
            trivial=trivial,
            colinear_ok=colinear_ok,
            t_perp=t_perp,
            p_q=p_q,
        )
        if cls.trivial or not colinear_ok:
            for m in members:
                dv = dual_vector(m, params)
                t_here = float((kvec + dv.p) @ (dvq.p / p_q)) if direction else math.nan
                cls.subsets.append(
                    ClusterSubset(
                        members=(m,), central=m, n_minus=0, n_plus=0, t_q=t_here
                    )
                )
        else:
            residues: dict = {}
            order = []
            for m in members:
                placed = False
                for key in order:
                    if _integer_offset(m - key, direction) is not None:
                        residues[key].append(m)
                        placed = True
                        break
                if not placed:
                    residues[m] = [m]
                    order.append(m)
            nu = dual_vector(direction, params).p / p_q
            for key in order:
                group = residues[key]
                t0 = float((kvec + dual_vector(key, params).p) @ nu)
                shift_n = math.floor(t0 / p_q)
                central = key - direction.scale(shift_n)
                tq = t0 - shift_n * p_q
                offs = sorted(
                    _integer_offset(m - central, direction) for m in group
                )
                cls.subsets.append(
                    ClusterSubset(
                        members=tuple(
                            central + direction.scale(n) for n in offs
                        ),
                        central=central,
                        n_minus=offs[0],
                        n_plus=offs[-1],
                        t_q=tq,
                    )
                )
            cls.subsets.sort(key=lambda s: s.central)
        classes.append(cls)

    # keep only classes that actually contain M2 points
    classes = [
        c for c in classes if any(m in m2_set for m in c.members)
    ]
    return ClusterDecomposition(
        phi0=phi0,
        k=k,
        m_set=m_set,
        m_prime=m_prime,
        m1=tuple(sorted(m1)),
        classes=classes,
    )


def tangency_base(
    m0: LatticeIndex,
    q: LatticeIndex,
    params: QPParams,
    t_frac: float = 1.0 / 3.0,
    eps: float = 0.0,
) -> tuple[float, float]:
    """(k, phi0) making the lattice line through m0 in direction q resonant.

    Solves for the circle |k(phi0) + x| = k passing through p_m0 with
    prescribed along-line component t_frac * p_q and transverse defect
    k^2 - t_perp^2 = eps; the whole line then sits inside the resonant band,
    which is the non-trivial chain geometry.
    """
    dq = dual_vector(q, params)
    nu = dq.p / dq.length
    nu_perp = np.array([-nu[1], nu[0]])
    p0 = dual_vector(m0, params).p
    p_nu = float(p0 @ nu)
    p_perp = float(p0 @ nu_perp)
    if p_perp < 0:
        nu_perp = -nu_perp
        p_perp = -p_perp
    if p_perp <= 0:
        raise ValueError("m0 has no transverse component along q")
    t0 = t_frac * dq.length
    k = ((t0 - p_nu) ** 2 + p_perp**2 - eps) / (2.0 * p_perp)
    t_perp = math.sqrt(k * k - eps)
    kvec = t0 * nu + t_perp * nu_perp - p0
    phi0 = math.atan2(kvec[1], kvec[0]) % TWO_PI
    return k, phi0


# ---------------------------------------------------------------------------
# Pole detection and weak/strong labels
# ---------------------------------------------------------------------------


def block_poles(
    block,
    k: float,
    phi_interval: tuple[float, float],
    spec: PotentialSpec,
    profile: ParameterProfile,
    kappa_fn=None,
    energy: float | None = None,
    scan_points: int | None = None,
) -> list[tuple[float, int]]:
    """All phi in the interval where the block matrix has an eigenvalue equal
    to the target energy (default k^2).

    Eigenvalue branches are sampled on a scan grid and each sign change is
    refined by bisection; branches are monotone over windows of the stated
    width, so each carries at most one crossing per sign change.
    """
    lo, hi = phi_interval
    target = k * k if energy is None else energy
    if kappa_fn is None:
        kappa_fn = lambda phi: k * np.array([math.cos(phi), math.sin(phi)])
    idx = list(block)
    rows = indices_to_array(idx)
    pairs = coupling_pairs(rows, spec)
    n = len(idx)

    def eigs(phi: float) -> np.ndarray:
        h = np.zeros((n, n), dtype=complex)
        np.fill_diagonal(h, diagonal_energies(kappa_fn(phi), rows, spec.params))
        for i_idx, j_idx, v in pairs:
            up = i_idx < j_idx
            h[i_idx[up], j_idx[up]] = v
            h[j_idx[up], i_idx[up]] = v.conjugate()
        return np.linalg.eigvalsh(h)

    n_scan = profile.pole_scan_points if scan_points is None else scan_points
    grid = np.linspace(lo, hi, n_scan + 1)
    table = np.array([eigs(p) for p in grid]) - target
    roots: list[float] = []
    for b in range(n):
        col = table[:, b]
        for i in range(len(grid) - 1):
            f0, f1 = col[i], col[i + 1]
            if f0 == 0.0:
                roots.append(float(grid[i]))
                continue
            if f0 * f1 < 0.0:
                a, c = float(grid[i]), float(grid[i + 1])
                fa = f0
                while c - a > profile.pole_bisect_tol:
                    mid = 0.5 * (a + c)
                    fm = eigs(mid)[b] - target
                    if fm == 0.0:
                        a = c = mid
                        break
                    if fa * fm < 0:
                        c = mid
                    else:
                        a, fa = mid, fm
                roots.append(0.5 * (a + c))
        if abs(col[-1]) == 0.0:
            roots.append(float(grid[-1]))
    roots.sort()
    out: list[tuple[float, int]] = []
    for r in roots:
        if out and abs(r - out[-1][0]) <= 10 * profile.pole_bisect_tol:
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((r, 1))
    return out


def strength(
    decomp: ClusterDecomposition,
    k: float,
    phi0: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
) -> ClusterDecomposition:
    """Attach weak/strong labels to every residue window and group the strong
    ones into adjacency clusters."""
    window = 2.0 * profile.pole_window
    for cls in decomp.classes:
        for sub in cls.subsets:
            # branches are monotone across the narrow window, so a coarse
            # scan catches every sign change
            poles = block_poles(
                sub.members,
                k,
                (phi0 - window, phi0 + window),
                spec,
                profile,
                scan_points=16,
            )
            sub.poles = tuple(p for p, _ in poles)
            sub.strength = "strong" if poles else "weak"

    # adjacency clusters among strong subsets (within one class by
    # construction: chain connectivity bounds the adjacency radius)
    strong_ids = [
        (ci, si)
        for ci, cls in enumerate(decomp.classes)
        for si, sub in enumerate(cls.subsets)
        if sub.strength == "strong"
    ]
    parent = {sid: sid for sid in strong_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def dist(a, b) -> int:
        return min(
            triple_norm(ma - mb)
            for ma in decomp.classes[a[0]].subsets[a[1]].members
            for mb in decomp.classes[b[0]].subsets[b[1]].members
        )

    eff_chain = max(profile.chain_radius, spec.max_support_norm)
    for i in range(len(strong_ids)):
        for j in range(i + 1, len(strong_ids)):
            if dist(strong_ids[i], strong_ids[j]) <= eff_chain:
                ri, rj = find(strong_ids[i]), find(strong_ids[j])
                if ri != rj:
                    parent[ri] = rj
    groups: dict = {}
    for sid in strong_ids:
        groups.setdefault(find(sid), []).append(sid)
    decomp.strong_clusters = [sorted(g) for g in sorted(groups.values())]
    return decomp


# ---------------------------------------------------------------------------
# Block projector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    kind: str  # core | m1-box | trivial-strong | nontrivial-strong | nontrivial-weak
    indices: tuple[LatticeIndex, ...]


@dataclass(frozen=True)
class BlockProjector:
    blocks: tuple[Block, ...]
    complement: tuple[LatticeIndex, ...]

    def all_indices(self) -> list[LatticeIndex]:
        out = []
        for b in self.blocks:
            out.extend(b.indices)
        out.extend(self.complement)
        return sorted(out)

    def block_of(self) -> dict[LatticeIndex, int]:
        return {
            m: i for i, b in enumerate(self.blocks) for m in b.indices
        }


def _norm_ball(center: LatticeIndex, radius: int, ambient: set) -> list[LatticeIndex]:
    if radius == 0:
        return [center] if center in ambient else []
    out = []
    for row in enumerate_box_array(radius):
        cand = center + LatticeIndex.from_row(row)
        if cand in ambient:
            out.append(cand)
    return out


def orthogonality_violation(
    blocks,
    spec: PotentialSpec,
    core: tuple[LatticeIndex, ...] | None = None,
) -> float:
    """Max |V_{m-m'}| over pairs in distinct blocks (0.0 when orthogonal)."""
    owner: dict[LatticeIndex, int] = {}
    for i, blk in enumerate(blocks):
        for m in blk:
            owner[m] = i
    worst = 0.0
    support = [(q, abs(v)) for q, v in spec.coeffs.items() if v != 0]
    for i, blk in enumerate(blocks):
        for m in blk:
            for q, mag in support:
                other = owner.get(m - q)
                if other is not None and other != i:
                    worst = max(worst, mag)
    if core is not None:
        core_set = set(core)
        for m in owner:
            for q, mag in support:
                if (m - q) in core_set:
                    worst = max(worst, mag)
    return worst


def assemble_projector(
    decomp: ClusterDecomposition,
    k: float,
    profile: ParameterProfile,
    spec: PotentialSpec,
) -> BlockProjector:
    """Build the model-operator blocks and verify their separations exactly.

    Construction order: strong-cluster neighborhoods (body first, then weak
    windows attached until nothing in the class is potential-connected to the
    block), then isolated-resonance boxes, then standalone weak windows of
    non-trivial classes.  The small central box is always a block of its own.
    """
    if not decomp.labeled():
        raise ValueError("strength labels must be attached first")
    ambient_rows = enumerate_box_array(profile.box_r1)
    ambient = set(array_to_indices(ambient_rows))
    core = tuple(
        sorted(m for m in array_to_indices(enumerate_box_array(profile.core_radius)))
    )

    blocks: list[Block] = [Block("core", core)]
    taken: set[LatticeIndex] = set(core)

    def commit(kind: str, members: set) -> None:
        members &= ambient
        if members & taken:
            raise OverlapDetected(f"{kind} block intersects an earlier block")
        blocks.append(Block(kind, tuple(sorted(members))))
        taken.update(members)

    # strong clusters with attached weak windows
    attached: set[tuple[int, int]] = set()
    for group in decomp.strong_clusters:
        ci = group[0][0]
        cls = decomp.classes[ci]
        body: set[LatticeIndex] = set()
        for (gci, si) in group:
            for m in decomp.classes[gci].subsets[si].members:
                body.update(_norm_ball(m, profile.body_radius, ambient))
                body.add(m)
        if not cls.trivial:
            support = [q for q, v in spec.coeffs.items() if v != 0]
            changed = True
            while changed:
                changed = False
                for si, sub in enumerate(cls.subsets):
                    if sub.strength != "weak" or (ci, si) in attached:
                        continue
                    touches = any(
                        (m - q) in body or (m + q) in body or m in body
                        for m in sub.members
                        for q in support
                    )
                    if touches:
                        body.update(sub.members)
                        attached.add((ci, si))
                        changed = True
        kind = "trivial-strong" if cls.trivial else "nontrivial-strong"
        commit(kind, body)

    # isolated resonances not swallowed by a strong neighborhood
    for m in decomp.m1:
        if m in taken:
            continue
        box = set(_norm_ball(m, profile.m1_box_radius, ambient))
        box.add(m)
        if box & taken:
            raise OverlapDetected(f"m1 box at {m} intersects an earlier block")
        commit("m1-box", box)

    # standalone weak windows of non-trivial classes
    for ci, cls in enumerate(decomp.classes):
        if cls.trivial:
            continue
        for si, sub in enumerate(cls.subsets):
            if sub.strength == "weak" and (ci, si) not in attached:
                members = set(sub.members)
                if members & taken:
                    raise OverlapDetected(
                        f"weak window at {sub.central} intersects an earlier block"
                    )
                commit("nontrivial-weak", members)

    complement = tuple(sorted(ambient - taken))
    viol = orthogonality_violation(
        [b.indices for b in blocks], spec
    )
    if viol != 0.0:
        raise OverlapDetected(
            f"blocks are connected by the potential (max |V| = {viol:.3g})"
        )
    return BlockProjector(blocks=tuple(blocks), complement=complement)


# ---------------------------------------------------------------------------
# Solution counting for the shifted eigenvalue equation
# ---------------------------------------------------------------------------


def appendix4_count(
    m: LatticeIndex,
    k: float,
    eps0: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
    scan_points: int = 2000,
) -> tuple[int, list[float]]:
    """Count angles phi solving lambda1(kappa1(phi) + p_m) = k^2 + eps0.

    Scans the admissible set densely, bisects each bracketed root of the
    shifted dressed eigenvalue, and returns (count, roots).
    """
    from .perturb import LevelEvaluator

    params = spec.params
    omega = build_omega1(k, profile, params)
    dv = dual_vector(m, params)
    # one evaluator serves every momentum: the coupling block is fixed, only
    # the diagonal depends on the point; a short series suffices for root
    # bracketing, and adjacent scan points share the radius
    ev = LevelEvaluator(1, 0.0, spec, profile)
    lam_target = k * k
    warm = {"kap": k}

    def f(phi: float) -> float:
        nu = np.array([math.cos(phi), math.sin(phi)])
        kap = warm["kap"]
        for _ in range(6):
            r = ev.eigenvalue(kap * nu, r_max=14) - lam_target
            if abs(r) <= 1e-10 * lam_target:
                break
            kap -= r / (2.0 * kap)
        warm["kap"] = kap
        lam = ev.eigenvalue(kap * nu + dv.p, r_max=14)
        return lam - lam_target - eps0

    roots: list[float] = []
    for a, b in omega.intervals:
        if b - a < 1e-9:
            continue
        grid = np.linspace(a, b, max(8, int(scan_points * (b - a) / TWO_PI)) + 1)
        vals = []
        for phi in grid:
            try:
                vals.append(f(float(phi)))
            except Exception:
                vals.append(math.nan)
        for i in range(len(grid) - 1):
            f0, f1 = vals[i], vals[i + 1]
            if math.isnan(f0) or math.isnan(f1) or f0 * f1 > 0:
                continue
            lo_, hi_ = float(grid[i]), float(grid[i + 1])
            flo = f0
            for _ in range(80):
                mid = 0.5 * (lo_ + hi_)
                fm = f(mid)
                if flo * fm <= 0:
                    hi_ = mid
                else:
                    lo_, flo = mid, fm
                if hi_ - lo_ < 1e-12:
                    break
            roots.append(0.5 * (lo_ + hi_))
    roots.sort()
    dedup: list[float] = []
    for r in roots:
        if not dedup or abs(r - dedup[-1]) > 1e-8:
            dedup.append(r)
    return len(dedup), dedup
