"""Second resonant set on the angle circle, the deep-resonance set M^(2) in
the larger momentum box, and the simple/black/grey/white/non-resonant region
map with its merging rules and exact boundary identities.

Boxes for the coloring are cells of the 2D dual-plane tiling (counts of deep
resonances per cell and its 8 neighbors); regions themselves are index sets
in Z^4, grown by triple-norm neighborhoods and merged lighter-into-darker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    LatticeIndex,
    array_to_indices,
    dual_array,
    enumerate_box_array,
    indices_to_array,
    triple_norm,
    triple_norm_array,
)
from .potential import PotentialSpec
from .profile import ParameterProfile
from .resonance import (
    AngleSet,
    ClusterDecomposition,
    ResonantBase,
    assemble_projector,
    block_poles,
    build_omega1,
    classify,
    strength,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Second resonant set
# ---------------------------------------------------------------------------


def pole_discs_from_blocks(
    blocks,
    phi0: float,
    k: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
    kappa_fn=None,
    scan_points: int = 64,
) -> list[tuple[float, float]]:
    """(pole, disc radius) pairs of the given resonance blocks inside the
    local window around phi0."""
    half = profile.interval_width / 2.0
    discs = []
    for block in blocks:
        for pole, _ in block_poles(
            block,
            k,
            (phi0 - half, phi0 + half),
            spec,
            profile,
            kappa_fn=kappa_fn,
            scan_points=scan_points,
        ):
            discs.append((pole, profile.o2_disc_radius))
    return discs


def local_pole_discs(
    phi0: float,
    k: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
    kappa_fn=None,
    scan_points: int = 64,
    geometry=None,
) -> list[tuple[float, float]]:
    """Pole discs of every resonance-block resolvent near one base angle.

    Returns (pole, disc radius) pairs inside the local window.  Raises
    ResonantBase when phi0 itself fails the step-I test.
    """
    if geometry is not None:
        blocks = [
            blk.indices for blk in geometry.projector.blocks if blk.kind != "core"
        ]
    else:
        decomp = classify(phi0, k, spec, profile)
        decomp = strength(decomp, k, phi0, spec, profile)
        projector = assemble_projector(decomp, k, profile, spec)
        blocks = [blk.indices for blk in projector.blocks if blk.kind != "core"]
    return pole_discs_from_blocks(
        blocks, phi0, k, spec, profile, kappa_fn=kappa_fn, scan_points=scan_points
    )


def second_resonant_set(
    k: float,
    phi0_grid,
    spec: PotentialSpec,
    profile: ParameterProfile,
    kappa_fn=None,
) -> tuple[AngleSet, AngleSet]:
    """(O2, omega2): pole discs collected over the base-angle grid, and the
    expanded step-I good set minus those discs."""
    omega1 = build_omega1(k, profile, spec.params)
    raw = []
    for phi0 in np.asarray(phi0_grid, dtype=float):
        if not omega1.contains(float(phi0)):
            continue
        try:
            discs = local_pole_discs(float(phi0), k, spec, profile, kappa_fn)
        except ResonantBase:
            continue
        for pole, rad in discs:
            raw.append((pole - rad, pole + rad))
    o2 = AngleSet.from_raw(raw)
    omega2 = omega1.expanded(profile.interval_width / 2.0).minus(o2)
    return o2, omega2


# ---------------------------------------------------------------------------
# The deep-resonance set M^(2)
# ---------------------------------------------------------------------------


def build_m2set(
    phi0: float,
    k: float,
    r2_radius: int | None,
    spec: PotentialSpec,
    profile: ParameterProfile,
    kappa_fn=None,
) -> tuple[list[LatticeIndex], ClusterDecomposition]:
    """Members of the r2-box resonant set (minus weak windows) whose local
    block resolvent has a pole within the membership disc of phi0.

    Membership is decided per block, so all indices of one block share it.
    """
    r2 = profile.box_r2 if r2_radius is None else r2_radius
    decomp = classify(phi0, k, spec, profile, box_radius=r2)
    decomp = strength(decomp, k, phi0, spec, profile)

    half = max(profile.m2_disc_radius * 4.0, 2.0 * profile.pole_window)
    out: set[LatticeIndex] = set()

    def block_has_near_pole(block) -> bool:
        poles = block_poles(
            block,
            k,
            (phi0 - half, phi0 + half),
            spec,
            profile,
            kappa_fn=kappa_fn,
            scan_points=32,
        )
        return any(abs(p - phi0) <= profile.m2_disc_radius for p, _ in poles)

    for m in decomp.m1:
        if block_has_near_pole((m,)):
            out.add(m)
    for cls in decomp.classes:
        for sub in cls.subsets:
            if sub.strength == "weak":
                continue
            if block_has_near_pole(sub.members):
                out.update(sub.members)
    inner = {m for m in out if triple_norm(m) <= profile.box_r1}
    out -= inner
    return sorted(out), decomp


# ---------------------------------------------------------------------------
# Region map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionComponent:
    color: str  # simple | black | grey | white | nonresonant
    indices: tuple[LatticeIndex, ...]
    boundary: tuple[LatticeIndex, ...]
    n_resonant_points: int


@dataclass(frozen=True)
class RegionMap:
    components: tuple[RegionComponent, ...]
    r2_radius: int

    def by_color(self, color: str) -> list[RegionComponent]:
        return [c for c in self.components if c.color == color]

    def all_indices(self) -> set[LatticeIndex]:
        out: set[LatticeIndex] = set()
        for c in self.components:
            out.update(c.indices)
        return out


def _norm_ball_set(
    centers, radius: int, ambient: set
) -> set[LatticeIndex]:
    out: set[LatticeIndex] = set()
    if radius == 0:
        return {m for m in centers if m in ambient}
    offsets = [LatticeIndex.from_row(r) for r in enumerate_box_array(radius)]
    for c in centers:
        for off in offsets:
            cand = c + off
            if cand in ambient:
                out.add(cand)
    return out


def _components_by_distance(points: list[LatticeIndex], sep: int):
    """Group points into components connected at triple-norm distance < sep."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if triple_norm(points[i] - points[j]) < sep:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(points[i])
    return [sorted(g) for g in sorted(groups.values())]


def region_map(
    m2_points,
    k: float,
    spec: PotentialSpec,
    profile: ParameterProfile,
    decomp: ClusterDecomposition | None = None,
) -> RegionMap:
    """Color the r2-box by local density of deep resonances.

    Cell counts (cell plus its 8 neighbors in the dual-plane tiling) decide
    black cells; non-black cells are subdivided, and the subcell counts decide
    grey; remaining deep resonances get point neighborhoods (white).  Merging
    runs lighter-into-darker: white clusters near grey/black are absorbed,
    then grey clusters near black.  Components of one color are separated by
    at least their own scale.
    """
    r2 = profile.box_r2
    ambient_rows = enumerate_box_array(r2)
    ambient = set(array_to_indices(ambient_rows))
    m2_list = sorted(set(m2_points))
    m2_rows = indices_to_array(m2_list) if m2_list else np.zeros((0, 4), np.int64)
    duals = dual_array(m2_rows, spec.params) if m2_list else np.zeros((0, 2))

    all_duals = dual_array(ambient_rows, spec.params)
    all_norms = triple_norm_array(ambient_rows)
    p_len = np.linalg.norm(all_duals, axis=1)

    # simple region: small dual length, fat neighborhoods
    simple_centers = [
        LatticeIndex.from_row(r)
        for r, nrm, pl in zip(ambient_rows, all_norms, p_len)
        if nrm > 0 and 0.0 < pl <= profile.simple_threshold
    ]
    simple = _norm_ball_set(simple_centers, profile.simple_nbhd, ambient)

    inner = {m for m in ambient if triple_norm(m) <= profile.box_r1}
    live = [
        (m, d)
        for m, d in zip(m2_list, duals)
        if m not in simple and m not in inner
    ]

    def cell_of(d, side):
        return (int(math.floor(d[0] / side)), int(math.floor(d[1] / side)))

    counts_black: dict = {}
    for _, d in live:
        counts_black[cell_of(d, profile.cell_black)] = (
            counts_black.get(cell_of(d, profile.cell_black), 0) + 1
        )

    def nbhd_count(counts, cell):
        return sum(
            counts.get((cell[0] + dx, cell[1] + dy), 0)
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
        )

    black_cells = {
        c for c in counts_black if nbhd_count(counts_black, c) > profile.n_black
    }
    black_pts = [
        m for m, d in live if cell_of(d, profile.cell_black) in black_cells
    ]
    black = _norm_ball_set(black_pts, profile.black_nbhd, ambient)

    white_candidates = [
        (m, d) for m, d in live if cell_of(d, profile.cell_black) not in black_cells
    ]
    counts_grey: dict = {}
    for _, d in white_candidates:
        cg = cell_of(d, profile.cell_grey)
        counts_grey[cg] = counts_grey.get(cg, 0) + 1
    grey_cells = {
        c for c in counts_grey if nbhd_count(counts_grey, c) > profile.n_grey
    }
    grey_pts = [
        m for m, d in white_candidates if cell_of(d, profile.cell_grey) in grey_cells
    ]
    grey = _norm_ball_set(grey_pts, profile.grey_nbhd, ambient) - black

    white_pts = [
        m
        for m, d in white_candidates
        if cell_of(d, profile.cell_grey) not in grey_cells
    ]
    white = _norm_ball_set(white_pts, profile.white_nbhd, ambient) - black - grey

    # non-resonant leftovers: resonance components of the r2 classification
    # that carry no deep resonance
    nonres: set[LatticeIndex] = set()
    if decomp is not None:
        m2set = set(m2_list)
        tw = set(decomp.trivial_weak_points())
        leftovers = [
            m
            for m in decomp.m_set
            if m not in m2set
            and m not in tw
            and m not in inner
            and m not in simple
            and triple_norm(m) <= r2
        ]
        nonres = _norm_ball_set(leftovers, profile.m1_box_radius, ambient)
        nonres -= black | grey | white | simple

    # merge lighter clusters into close darker regions
    def absorb(lighter: set, darker: set, sep: int) -> tuple[set, set]:
        moved = set()
        for comp in _components_by_distance(sorted(lighter), sep):
            near = any(
                triple_norm(a - b) < sep for a in comp for b in darker
            ) if darker else False
            if near:
                moved.update(comp)
        return lighter - moved, darker | moved

    white, grey = absorb(white, grey, max(profile.white_nbhd, 1) + 1)
    white, black = absorb(white, black, max(profile.white_nbhd, 1) + 1)
    grey, black = absorb(grey, black, max(profile.grey_nbhd, 1) + 1)

    m2set = set(m2_list)
    comps: list[RegionComponent] = []

    def push(color: str, region: set, sep: int) -> None:
        for comp in _components_by_distance(sorted(region), sep):
            indices = tuple(comp)
            comp_set = set(comp)
            boundary = tuple(
                m
                for m in comp
                if any(
                    (m + q) not in comp_set
                    for q, v in spec.coeffs.items()
                    if v != 0
                )
            )
            comps.append(
                RegionComponent(
                    color=color,
                    indices=indices,
                    boundary=boundary,
                    n_resonant_points=sum(1 for m in comp if m in m2set),
                )
            )

    push("simple", simple, max(profile.simple_nbhd, 1))
    push("black", black, max(profile.black_nbhd, 1) + 1)
    push("grey", grey, max(profile.grey_nbhd, 1) + 1)
    push("white", white, max(profile.white_nbhd, 1) + 1)
    push("nonresonant", nonres, max(profile.m1_box_radius, 1) + 1)
    return RegionMap(components=tuple(comps), r2_radius=r2)


def region_stats(
    rmap: RegionMap,
    m2_points,
    spec: PotentialSpec,
    profile: ParameterProfile,
    sample_centers=None,
    rng: np.random.Generator | None = None,
) -> dict:
    """Per-color component statistics plus sampled neighborhood counting
    ratios count / k^(2*gamma'*r1/3 + 1)."""
    per_color: dict = {}
    for c in rmap.components:
        d = per_color.setdefault(
            c.color, {"components": 0, "max_size": 0, "max_points": 0}
        )
        d["components"] += 1
        d["max_size"] = max(d["max_size"], len(c.indices))
        d["max_points"] = max(d["max_points"], c.n_resonant_points)

    m2_list = sorted(set(m2_points))
    ratios = []
    if sample_centers is None and rng is not None and m2_list:
        rows = enumerate_box_array(rmap.r2_radius)
        sel = rng.choice(len(rows), size=min(20, len(rows)), replace=False)
        sample_centers = array_to_indices(rows[sel])
    if sample_centers:
        gamma_prime = 1.0
        k = profile.k
        r1_exp = profile.r1_exp
        nbhd = max(2, profile.box_r1)
        bound = k ** (2.0 * gamma_prime * r1_exp / 3.0 + 1.0)
        for c0 in sample_centers:
            cnt = sum(1 for m in m2_list if triple_norm(m - c0) <= nbhd)
            ratios.append(cnt / bound)
    return {
        "per_color": per_color,
        "counting_ratios": ratios,
        "max_counting_ratio": max(ratios) if ratios else 0.0,
    }


def boundary_check(
    rmap: RegionMap, spec: PotentialSpec
) -> float:
    """Exact block-structure identities of the region projectors.

    Verifies that distinct components are not connected by the potential and
    that every outward connection leaves from a boundary index; returns the
    largest violating |V| entry (0.0 when all identities hold).
    """
    owner: dict[LatticeIndex, int] = {}
    for i, c in enumerate(rmap.components):
        for m in c.indices:
            owner[m] = i
    support = [(q, abs(v)) for q, v in spec.coeffs.items() if v != 0]
    worst = 0.0
    for i, c in enumerate(rmap.components):
        bset = set(c.boundary)
        cset = set(c.indices)
        for m in c.indices:
            for q, mag in support:
                nb = m + q
                o = owner.get(nb)
                if o is not None and o != i:
                    worst = max(worst, mag)  # cross-component connection
                if o is None and nb not in cset and m not in bset:
                    worst = max(worst, mag)  # outward edge from non-boundary
    return worst
