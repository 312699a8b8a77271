"""Enumeration of incomparable cone planks, richness counting, and bucketing.

A plank collection at scale (A, sqrt(A*S), S) is built on a deterministic
lattice: frame angles sampled at spacing 1/sqrt(S), and for each angle a
grid of centers along the frame axes at spacing K times the side lengths.
Lattice planks at the same angle are never K-comparable, but pairs at
adjacent angles can be when their centers nearly coincide, so a greedy
sweep over angles rejects every candidate comparable to an earlier kept
plank. The result is pairwise K-incomparable by construction and maximal
with respect to the candidate lattice.

Collections can be huge (about R^2 planks at S = R), so a collection stores
per-angle grid bounds plus the sparse rejection set instead of materialized
boxes; slices are regenerated on demand by the same deterministic code
path. Richness of every plank against a family is computed per angle by
snapping each point to the center grid, which is exact because membership
windows never span more than a bounded number of grid cells.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyFamilyError, InvalidParamsError
from .families import Box, CircleFamily, cube_box
from .geometry import (
    Circle3,
    Lightplank,
    PlankFrame,
    containment_slack,
    plank_axes,
    tangency_point,
    tangency_rect,
    wrap_angle,
)
from .incidence import lift_rect

# Grid indices are packed three-per-int64 after this offset; enumeration
# scales keep them far below the field width of 2^20.
_IDX_OFFSET = 1 << 20


def _pack_idx(idx: np.ndarray) -> np.ndarray:
    shifted = idx.astype(np.int64) + _IDX_OFFSET
    if shifted.size and (shifted.min() < 0 or shifted.max() >= (1 << 21)):
        raise InvalidParamsError("box: grid index range exceeds the packing width")
    return (shifted[:, 0] << 42) + (shifted[:, 1] << 21) + shifted[:, 2]


def _box_arrays(box: Box) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    return (lo + hi) / 2.0, (hi - lo) / 2.0


@dataclass
class _SliceSpec:
    """Deterministic description of one angle slice of a collection."""

    theta: float
    frame: PlankFrame
    n_sat: int
    rejected: np.ndarray  # sorted packed keys of greedy-rejected cells


@dataclass
class PlankCollection:
    """A pairwise K-incomparable family of A x sqrt(A*B) x B planks.

    B equals the long-scale parameter S for enumerated collections. All
    planks intersect the ambient box.
    """

    K: float
    S: float
    A: float
    B: float
    box: Box
    slices: list[_SliceSpec] = field(default_factory=list)

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.A, math.sqrt(self.A * self.B), self.B])

    @property
    def spacing(self) -> np.ndarray:
        return self.K * self.dims

    @property
    def half_widths(self) -> np.ndarray:
        return self.dims / 2.0

    def __len__(self) -> int:
        return sum(s.n_sat - s.rejected.size for s in self.slices)

    def slice_cells(self, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Kept cells of slice j: (packed keys, grid indices, world centers)."""
        spec = self.slices[j]
        keys, idx, centers = _grid_sat_cells(spec.frame, self.spacing, self.half_widths, self.box)
        if spec.rejected.size:
            keep = ~np.isin(keys, spec.rejected, assume_unique=True)
            keys, idx, centers = keys[keep], idx[keep], centers[keep]
        return keys, idx, centers

    def iter_slices(self):
        for j in range(len(self.slices)):
            keys, idx, centers = self.slice_cells(j)
            yield j, self.slices[j], keys, centers

    def plank_at(self, j: int, center) -> Lightplank:
        return Lightplank(
            frame=self.slices[j].frame, v=np.asarray(center, dtype=float), A=self.A, B=self.B
        )

    def planks(self) -> list[Lightplank]:
        """Materialize every plank; intended for small collections."""
        out = []
        for j, spec, keys, centers in self.iter_slices():
            for c in centers:
                out.append(Lightplank(frame=spec.frame, v=c, A=self.A, B=self.B))
        return out

    def serialize(self) -> str:
        lines = [
            f"# K={self.K!r} S={self.S!r} A={self.A!r} B={self.B!r} n={len(self)}",
            "# box=" + ",".join(f"{lo!r}:{hi!r}" for lo, hi in self.box),
        ]
        for j, spec, keys, centers in self.iter_slices():
            for c in centers:
                lines.append(
                    f"{spec.theta!r} {float(c[0])!r} {float(c[1])!r} {float(c[2])!r} "
                    f"{self.A!r} {self.B!r}"
                )
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.serialize())


# ---------------------------------------------------------------------------
# slice construction
# ---------------------------------------------------------------------------


def _grid_bounds(frame: PlankFrame, spacing, hw, box) -> tuple[np.ndarray, np.ndarray]:
    """Index bounds of grid cells whose plank could touch the box.

    A plank meeting the box has center frame-coordinates inside the box's
    projection interval fattened by the plank half-width on each axis.
    """
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    corners = np.array(
        [[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]
    )
    proj = corners @ frame.matrix().T
    lo_idx = np.ceil((proj.min(axis=0) - hw) / spacing - 1e-9).astype(np.int64)
    hi_idx = np.floor((proj.max(axis=0) + hw) / spacing + 1e-9).astype(np.int64)
    return lo_idx, np.maximum(hi_idx - lo_idx + 1, 0)


def _sat_axes(U: np.ndarray) -> np.ndarray:
    """The 15 candidate separating axes for an oriented box against an AABB."""
    eyes = np.eye(3)
    crosses = [np.cross(eyes[i], U[j]) for i in range(3) for j in range(3)]
    return np.vstack([eyes, U, np.array(crosses)])


def _sat_intersects(centers: np.ndarray, U: np.ndarray, hw: np.ndarray, box: Box) -> np.ndarray:
    """Exact box/plank intersection via the separating axis test, vectorized."""
    bc, bh = _box_arrays(box)
    axes = _sat_axes(U)
    r_plank = np.abs(axes @ U.T) @ hw
    r_box = np.abs(axes) @ bh
    proj = np.abs((centers - bc) @ axes.T)
    return np.all(proj <= (r_box + r_plank) + 1e-9, axis=1)


def _grid_sat_cells(
    frame: PlankFrame, spacing: np.ndarray, hw: np.ndarray, box: Box
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All box-intersecting cells of a slice, sorted by packed key."""
    lo_idx, shape = _grid_bounds(frame, spacing, hw, box)
    if np.any(shape <= 0):
        empty = np.empty(0, dtype=np.int64)
        return empty, np.empty((0, 3), dtype=np.int64), np.empty((0, 3))
    ranges = [lo_idx[ax] + np.arange(shape[ax]) for ax in range(3)]
    g = np.meshgrid(*ranges, indexing="ij")
    idx = np.column_stack([a.ravel() for a in g]).astype(np.int64)
    centers = (idx * spacing) @ frame.matrix()
    mask = _sat_intersects(centers, frame.matrix(), hw, box)
    idx, centers = idx[mask], centers[mask]
    keys = _pack_idx(idx)  # lexicographic grid order is already key-sorted
    return keys, idx, centers


# ---------------------------------------------------------------------------
# greedy enumeration
# ---------------------------------------------------------------------------


def enumerate_incomparable(
    R: float, S: float | None = None, K: float = 2.0, box: Box | None = None, A: float = 1.0
) -> PlankCollection:
    """Greedy maximal lattice of pairwise K-incomparable planks at scale S.

    Angles are sampled at spacing S^(-1/2); centers tile the frame axes at
    spacing K times the side lengths. Candidates comparable to an earlier
    kept plank are rejected, so the collection is pairwise K-incomparable,
    and every lattice candidate is comparable to some member. At S = R the
    cardinality lands within a small constant factor of R^2.
    """
    if S is None:
        S = float(R)
    if S > R * (1 + 1e-12) or S < 1:
        raise InvalidParamsError("S: need 1 <= S <= R")
    if K < 1:
        raise InvalidParamsError("K: need K >= 1")
    if box is None:
        box = cube_box(R)

    coll = PlankCollection(K=K, S=float(S), A=A, B=float(S), box=box)
    spacing, hw = coll.spacing, coll.half_widths
    T = int(math.ceil(2.0 * math.pi * math.sqrt(S)))
    step = 2.0 * math.pi / T
    thetas = [wrap_angle(-math.pi + step * j) for j in range(T)]
    frames = [plank_axes(t) for t in thetas]
    window = _comparability_window(step, T, hw, K)

    cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    specs: list[_SliceSpec] = []
    for j in range(T):
        keys, idx, centers = _grid_sat_cells(frames[j], spacing, hw, box)
        kept = np.ones(keys.size, dtype=bool)
        for j2 in _earlier_neighbors(j, T, window):
            u_keys, u_centers, u_kept = cache[j2]
            if keys.size and u_keys.size:
                hits = _comparable_hits(
                    idx, centers, frames[j], u_keys, u_centers, u_kept, frames[j2], spacing, hw, K
                )
                kept &= ~hits
        specs.append(
            _SliceSpec(theta=thetas[j], frame=frames[j], n_sat=int(keys.size), rejected=keys[~kept])
        )
        cache[j] = (keys, centers, kept)
        _evict(cache, j, T, window)
    coll.slices = specs
    return coll


def _evict(cache: dict, j: int, T: int, window: int):
    # keep the first `window` slices for the wraparound comparisons
    for jj in list(cache):
        if jj < j - window and jj >= window:
            del cache[jj]


def _earlier_neighbors(j: int, T: int, window: int) -> list[int]:
    out = list(range(max(0, j - window), j))
    for j2 in range(0, window - (T - 1 - j)):  # wraparound partners
        if j2 < j and j2 not in out:
            out.append(j2)
    return out


def _comparability_window(step: float, T: int, hw: np.ndarray, K: float) -> int:
    """Largest angle-index gap at which two lattice planks can be comparable.

    Containment of Q in the K-dilation of P needs the mixed half-width sum
    |U Q-axes| . hw to stay within K hw on every P-axis; the sum depends
    only on the angle gap, so the first infeasible gap bounds the window.
    """
    U = plank_axes(0.0).matrix()
    m = 1
    while m < T:
        V = plank_axes(wrap_angle(m * step)).matrix()
        fwd = np.all(np.abs(U @ V.T) @ hw <= K * hw)
        rev = np.all(np.abs(V @ U.T) @ hw <= K * hw)
        if not (fwd or rev):
            break
        m += 1
    return m


def _containment_hits(
    inner_centers: np.ndarray,
    inner_frame: PlankFrame,
    outer_frame: PlankFrame,
    spacing: np.ndarray,
    hw: np.ndarray,
    K: float,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Inner planks contained in the K-dilation of some outer lattice plank.

    Returns (mask over inner_centers, outer grid indices (h, 3)) or None if
    the frame pair rules containment out entirely. Exactness: the extreme
    corner coordinate of the inner box on an outer axis is the center offset
    plus the mixed half-width sum, so containment is a per-axis residual
    window around the outer grid; the window is below half the spacing,
    making the nearest grid point the only candidate.
    """
    U = outer_frame.matrix()
    V = inner_frame.matrix()
    s = np.abs(U @ V.T) @ hw
    t = K * hw - s + containment_slack(K * hw)
    if np.any(t < 0):
        return None
    coords = inner_centers @ U.T
    k_cand = np.rint(coords / spacing)
    ok = np.all(np.abs(coords - k_cand * spacing) <= t, axis=1)
    return ok, k_cand[ok].astype(np.int64)


def _comparable_hits(
    v_idx: np.ndarray,
    v_centers: np.ndarray,
    v_frame: PlankFrame,
    u_keys: np.ndarray,
    u_centers: np.ndarray,
    u_kept: np.ndarray,
    u_frame: PlankFrame,
    spacing: np.ndarray,
    hw: np.ndarray,
    K: float,
) -> np.ndarray:
    """Candidates of the v-slice comparable to a kept plank of the u-slice."""
    hits = np.zeros(v_centers.shape[0], dtype=bool)

    # v contained in the K-dilation of a kept u-plank
    res = _containment_hits(v_centers, v_frame, u_frame, spacing, hw, K)
    if res is not None:
        ok, cells = res
        if ok.any():
            target = _pack_idx(cells)
            pos = np.searchsorted(u_keys, target)
            pos_ok = pos < u_keys.size
            safe = np.where(pos_ok, pos, 0)
            found = pos_ok & (u_keys[safe] == target) & u_kept[safe]
            hits[np.nonzero(ok)[0][found]] = True

    # a kept u-plank contained in the K-dilation of v
    kept_centers = u_centers[u_kept]
    if kept_centers.shape[0]:
        res = _containment_hits(kept_centers, u_frame, v_frame, spacing, hw, K)
        if res is not None:
            ok, cells = res
            if ok.any():
                hits |= np.isin(_pack_idx(v_idx), _pack_idx(cells))
    return hits


def verify_pairwise_incomparable(coll: PlankCollection) -> int:
    """Count comparable unordered pairs in the collection (0 when valid).

    Exhaustive over all plank pairs, organized by slice pair so the mixed
    half-width sums are computed once per frame pair. Used by the exhaustive
    acceptance check at small R.
    """
    mats, cents = [], []
    for j, spec, keys, centers in coll.iter_slices():
        mats.append(spec.frame.matrix())
        cents.append(centers)
    hw, K = coll.half_widths, coll.K
    tol_bound = K * hw + containment_slack(K * hw)
    bad = 0
    for a in range(len(cents)):
        for b in range(a, len(cents)):
            ca, cb = cents[a], cents[b]
            if ca.shape[0] == 0 or cb.shape[0] == 0:
                continue
            s_ab = np.abs(mats[a] @ mats[b].T) @ hw  # b-plank corners on a-axes
            s_ba = np.abs(mats[b] @ mats[a].T) @ hw
            t_ab = tol_bound - s_ab
            t_ba = tol_bound - s_ba
            if np.all(t_ab < 0) and np.all(t_ba < 0):
                continue
            proj_b_in_a = cb @ mats[a].T
            proj_a_in_a = ca @ mats[a].T
            proj_b_in_b = cb @ mats[b].T
            proj_a_in_b = ca @ mats[b].T
            for start in range(0, cb.shape[0], 512):
                sl = slice(start, start + 512)
                diff_a = np.abs(proj_a_in_a[:, None, :] - proj_b_in_a[None, sl, :])
                in_a = np.all(diff_a <= t_ab, axis=2) if np.all(t_ab >= 0) else np.zeros(diff_a.shape[:2], bool)
                diff_b = np.abs(proj_a_in_b[:, None, :] - proj_b_in_b[None, sl, :])
                in_b = np.all(diff_b <= t_ba, axis=2) if np.all(t_ba >= 0) else np.zeros(diff_b.shape[:2], bool)
                comparable = in_a | in_b
                if a == b:
                    rows = np.arange(ca.shape[0])[:, None]
                    cols = start + np.arange(comparable.shape[1])[None, :]
                    comparable &= rows < cols  # unordered pairs once
                bad += int(comparable.sum())
    return bad


# ---------------------------------------------------------------------------
# richness
# ---------------------------------------------------------------------------


def richness(plank: Lightplank, family: CircleFamily, K: float = 1.0) -> int:
    """Number of family points in the K-dilation of the plank (direct scan)."""
    if len(family) == 0:
        return 0
    pts = family.points.astype(float)
    rel = pts - plank.v
    coords = np.abs(rel @ plank.frame.matrix().T)
    hw = plank.half_widths() * K
    return int(np.all(coords <= hw, axis=1).sum())


def _assign_points(
    coll: PlankCollection, j: int, pts: np.ndarray, K_rich: float
) -> tuple[np.ndarray, np.ndarray]:
    """(point index, packed plank key) incidences for slice j.

    Points snap to the center grid; the membership window K_rich * hw spans
    at most floor(K_rich / K) + 1 grid cells per axis, so scanning that many
    offsets is exact. Cells outside the enumeration (box-missing or greedy
    rejected) are dropped.
    """
    spec = coll.slices[j]
    U = spec.frame.matrix()
    spacing, hw = coll.spacing, coll.half_widths
    window = K_rich * hw
    coords = pts @ U.T
    base = np.ceil((coords - window) / spacing - 1e-12).astype(np.int64)
    reach = int(math.floor(K_rich / coll.K + 1e-9)) + 1
    pt_idx_out, key_out = [], []
    rejected = spec.rejected
    for oa in range(reach):
        for ob in range(reach):
            for oc in range(reach):
                cand = base + np.array([oa, ob, oc])
                resid = np.abs(coords - cand * spacing)
                ok = np.all(resid <= window + 1e-12, axis=1)
                if not ok.any():
                    continue
                cells = cand[ok]
                centers = (cells * spacing) @ U
                ok2 = _sat_intersects(centers, U, hw, coll.box)
                if not ok2.any():
                    continue
                keys = _pack_idx(cells[ok2])
                pt_ids = np.nonzero(ok)[0][ok2]
                if rejected.size:
                    good = ~np.isin(keys, rejected)
                    keys, pt_ids = keys[good], pt_ids[good]
                pt_idx_out.append(pt_ids)
                key_out.append(keys)
    if not pt_idx_out:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    pt_ids = np.concatenate(pt_idx_out)
    keys = np.concatenate(key_out)
    # a point can reach the same cell through different offset combos only
    # when windows tie exactly on a boundary; dedupe to keep counts honest
    uniq = np.unique(np.column_stack([pt_ids, keys]), axis=0)
    return uniq[:, 0], uniq[:, 1]


@dataclass
class RichnessTable:
    """Dyadic richness histogram of a plank collection against a family.

    mu_buckets maps dyadic mu to the number of planks whose richness lies in
    [mu, 2 mu); only planks with richness >= 1 are bucketed. members, when
    kept, holds (slice index, packed key, richness) triples for bucket
    membership queries on small collections.
    """

    mu_buckets: dict[int, int]
    n_rich: int
    max_richness: int
    members: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def bucket_of(self, richness_value: int) -> int:
        if richness_value < 1:
            raise ValueError("only planks with richness >= 1 are bucketed")
        return 1 << (int(richness_value).bit_length() - 1)

    def serialize(self) -> str:
        lines = ["# mu count_planks"]
        for mu in sorted(self.mu_buckets):
            lines.append(f"{mu} {self.mu_buckets[mu]}")
        return "\n".join(lines) + "\n"


def mu_buckets(
    coll: PlankCollection, family: CircleFamily, K: float = 1.0, keep_members: bool | None = None
) -> RichnessTable:
    """Bucket every plank of the collection by dyadic richness against X."""
    pts = family.points.astype(float)
    buckets: dict[int, int] = {}
    n_rich = 0
    max_rich = 0
    mem_slices, mem_keys, mem_counts = [], [], []
    if keep_members is None:
        keep_members = len(coll) <= 2_000_000
    for j in range(len(coll.slices)):
        if pts.shape[0] == 0:
            break
        pt_ids, keys = _assign_points(coll, j, pts, K)
        if keys.size == 0:
            continue
        uniq_keys, counts = np.unique(keys, return_counts=True)
        n_rich += uniq_keys.size
        max_rich = max(max_rich, int(counts.max()))
        exps = np.floor(np.log2(counts)).astype(np.int64)
        for e, c in zip(*np.unique(exps, return_counts=True)):
            mu = 1 << int(e)
            buckets[mu] = buckets.get(mu, 0) + int(c)
        if keep_members:
            mem_slices.append(np.full(uniq_keys.size, j, dtype=np.int64))
            mem_keys.append(uniq_keys)
            mem_counts.append(counts.astype(np.int64))
    members = None
    if keep_members and mem_keys:
        members = (
            np.concatenate(mem_slices), np.concatenate(mem_keys), np.concatenate(mem_counts)
        )
    elif keep_members:
        members = (
            np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        )
    return RichnessTable(
        mu_buckets=buckets, n_rich=n_rich, max_richness=max_rich, members=members
    )


# ---------------------------------------------------------------------------
# lifted planks of tangency witnesses
# ---------------------------------------------------------------------------


def pair_plank(x: Circle3, y: Circle3, delta: float, length: float) -> Lightplank:
    """The thin plank carrying a near-tangent pair.

    A tangent pair separates along a light ray, which is the long axis of
    the cone frame at the angle opposite the planar direction from the
    smaller toward the larger circle. The plank is delta thick, `length`
    long, centered at the pair midpoint, so for pair distances below
    `length` both endpoints lie inside it.
    """
    p, q = x.as_point(), y.as_point()
    if x.radius > y.radius or (x.radius == y.radius and tuple(x.center) <= tuple(y.center)):
        big, small = p, q
    else:
        big, small = q, p
    w = big[:2] - small[:2]
    norm = float(np.hypot(w[0], w[1]))
    if norm == 0.0:
        raise ValueError("concentric pair has no carrying plank")
    theta = wrap_angle(math.atan2(w[1], w[0]) + math.pi)
    return Lightplank(frame=plank_axes(theta), v=(p + q) / 2.0, A=delta, B=length)


def rect_plank(
    z_star: np.ndarray, u: np.ndarray, delta: float, radius_lo: float, radius_hi: float
) -> Lightplank:
    """The lifted plank of circles whose annulus can contain a rectangle.

    Circles tangent at z_star with radial direction u have centers on the
    ray z_star - r u, so their encodings fill a segment along the cone
    direction at the angle of -u. The plank spans the family's radius range
    along that direction and is delta long transversally.
    """
    theta = wrap_angle(math.atan2(-u[1], -u[0]))
    r_mid = (radius_lo + radius_hi) / 2.0
    span = max(radius_hi - radius_lo, delta)
    v = np.array([z_star[0] - r_mid * u[0], z_star[1] - r_mid * u[1], r_mid])
    # A > B here: long along the light ray, delta across
    return Lightplank(frame=plank_axes(theta), v=v, A=math.sqrt(2.0) * span, B=delta)


@dataclass
class BilinearRichResult:
    """Outcome of the two-family rich-rectangle count."""

    count: int
    rhs: float
    ratio: float
    n_cross_pairs: int
    rects: list


def bilinear_rich(
    B_fam: CircleFamily,
    W_fam: CircleFamily,
    delta: float,
    mu: int,
    nu: int,
    K: float = 2.0,
) -> BilinearRichResult:
    """Count rectangles rich for both families, against the bilinear bound.

    Rectangles come from cross near-tangent pairs, are kept when their lift
    reaches mu circles of the first family and nu of the second, and are
    deduplicated by K-incomparability of their lifted planks. The reported
    ratio divides the count by (|B||W|/(mu nu))^(3/4) + |B|/mu + |W|/nu.
    """
    if len(B_fam) == 0 or len(W_fam) == 0:
        raise EmptyFamilyError("bilinear count needs two nonempty families")
    if mu < 1 or nu < 1:
        raise ValueError("richness thresholds must be >= 1")
    scale = max(B_fam.scale_R, W_fam.scale_R)
    d_bw = _set_distance(B_fam.points.astype(float), W_fam.points.astype(float))
    if not (scale / 20.0 <= d_bw <= 20.0 * scale):
        warnings.warn(
            f"family distance {d_bw:.3g} is not comparable to the scale {scale:.3g}",
            stacklevel=2,
        )
    lo3 = min(B_fam.points[:, 2].min(), W_fam.points[:, 2].min())
    hi3 = max(B_fam.points[:, 2].max(), W_fam.points[:, 2].max())

    rects, planks = [], []
    n_cross = 0
    bp = B_fam.points.astype(float)
    wp = W_fam.points.astype(float)
    for i in range(bp.shape[0]):
        gaps = np.abs(
            np.hypot(bp[i, 0] - wp[:, 0], bp[i, 1] - wp[:, 1]) - np.abs(bp[i, 2] - wp[:, 2])
        )
        for jj in np.nonzero(gaps < delta)[0]:
            n_cross += 1
            ci = B_fam.circle(i)
            cj = W_fam.circle(int(jj))
            if ci.center == cj.center:
                continue
            rect = tangency_rect(ci, cj, delta)
            if len(lift_rect(rect, B_fam, delta)) < mu:
                continue
            if len(lift_rect(rect, W_fam, delta)) < nu:
                continue
            z_star, u = tangency_point(ci, cj)
            cand = rect_plank(z_star, u, delta, float(lo3), float(hi3))
            if any(_planks_comparable_fast(cand, kept, K) for kept in planks):
                continue
            planks.append(cand)
            rects.append(rect)
    rhs = (len(B_fam) * len(W_fam) / (mu * nu)) ** 0.75 + len(B_fam) / mu + len(W_fam) / nu
    return BilinearRichResult(
        count=len(rects), rhs=rhs, ratio=len(rects) / rhs, n_cross_pairs=n_cross, rects=rects
    )


def _planks_comparable_fast(P: Lightplank, Q: Lightplank, K: float) -> bool:
    """Comparability via the exact mixed half-width bound (no corner loop)."""
    for inner, outer in ((P, Q), (Q, P)):
        U = outer.frame.matrix()
        s = np.abs(U @ inner.frame.matrix().T) @ inner.half_widths()
        t = K * outer.half_widths() - s + containment_slack(K * outer.half_widths())
        if np.any(t < 0):
            continue
        if np.all(np.abs((inner.v - outer.v) @ U.T) <= t):
            return True
    return False


def _set_distance(a: np.ndarray, b: np.ndarray) -> float:
    tree = cKDTree(b)
    d, _ = tree.query(a, k=1)
    return float(np.min(d))
