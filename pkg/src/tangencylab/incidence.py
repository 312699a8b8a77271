"""Tangency-pair counting: brute force, hash-accelerated, and integer-exact.

All counters return unordered index pairs (i < j). The brute-force scan is
the canonical oracle; the hashed path must reproduce it exactly and only
buys speed. The integer path decides tangency with no floating error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .families import CircleFamily
from .geometry import ANNULUS_THICKNESS_FACTOR, Rect2, rect_axes, rect_corners

# The vectorized exact-tangency path stays in int64; coordinates above this
# bound switch to Python integers, which cannot overflow.
_INT64_SAFE_COORD = 2**24


@dataclass
class TangencyPairSet:
    """Unordered near-tangent (or exactly tangent) index pairs of a family.

    pairs has shape (m, 2) with i < j sorted lexicographically. delta is the
    gap threshold used (0 for the exact path). by_distance, when filled,
    partitions the pairs by the dyadic scale of their R^3 distance.
    """

    pairs: np.ndarray
    delta: float
    family_hash: str = ""
    by_distance: dict[float, np.ndarray] | None = None

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def ordered_count(self) -> int:
        """Pairs counted with order, matching the squared-family convention."""
        return 2 * len(self)

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.pairs}

    def serialize(self, family: CircleFamily) -> str:
        pts = family.points.astype(float)
        lines = [
            f"# family_hash={self.family_hash or family.provenance_hash()} "
            f"delta={self.delta!r} n_pairs={len(self)}"
        ]
        for i, j in self.pairs:
            d = float(np.linalg.norm(pts[i] - pts[j]))
            gap = _gap_of(pts[i], pts[j])
            lines.append(f"{int(i)} {int(j)} {d!r} {gap!r}")
        return "\n".join(lines) + "\n"


def _gap_of(p: np.ndarray, q: np.ndarray) -> float:
    return float(abs(math.hypot(p[0] - q[0], p[1] - q[1]) - abs(p[2] - q[2])))


def _canonical(pairs_i, pairs_j) -> np.ndarray:
    if len(pairs_i) == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = np.column_stack([pairs_i, pairs_j]).astype(np.int64)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    return arr[order]


# ---------------------------------------------------------------------------
# delta-approximate counting
# ---------------------------------------------------------------------------


def count_ct_delta_bruteforce(family: CircleFamily, delta: float) -> TangencyPairSet:
    """All unordered pairs with tangency gap below delta, by full O(n^2) scan.

    This is the reference implementation every accelerated path is checked
    against.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = family.points.astype(float)
    n = pts.shape[0]
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []
    if n >= 2:
        block = max(1, int(4e6) // max(n, 1))
        for start in range(0, n - 1, block):
            stop = min(start + block, n - 1)
            rows = np.arange(start, stop)
            dx = pts[rows, None, 0] - pts[None, :, 0]
            dy = pts[rows, None, 1] - pts[None, :, 1]
            dz = pts[rows, None, 2] - pts[None, :, 2]
            gaps = np.abs(np.hypot(dx, dy) - np.abs(dz))
            ii, jj = np.nonzero(gaps < delta)
            keep = rows[ii] < jj
            out_i.append(rows[ii][keep])
            out_j.append(jj[keep])
    pairs = _canonical(np.concatenate(out_i) if out_i else [], np.concatenate(out_j) if out_j else [])
    return TangencyPairSet(pairs=pairs, delta=delta, family_hash=family.provenance_hash())


def count_ct_delta_hashed(family: CircleFamily, delta: float, cell: float | None = None) -> TangencyPairSet:
    """Grid-accelerated near-tangency counting; identical pair set to brute force.

    Points are bucketed into a uniform grid. A near-tangent pair constrains
    planar distance and height difference to agree within delta, so for any
    two occupied cells an interval test on (planar distance range, height
    range) either rules all their pairs out or passes them to exact
    verification with the gap formula. The cell size trades pruning against
    bookkeeping and cannot affect the result.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = family.points.astype(float)
    n = pts.shape[0]
    if n < 2:
        return TangencyPairSet(
            pairs=np.empty((0, 2), dtype=np.int64), delta=delta,
            family_hash=family.provenance_hash(),
        )
    lo = pts.min(axis=0)
    extent = float(max(pts.max(axis=0) - lo)) or 1.0
    if cell is None:
        # delta-sized cells are ideal for pruning but keep the occupied-cell
        # table bounded on fine thresholds.
        cell = max(delta, extent / 48.0)
    idx = np.floor((pts - lo) / cell).astype(np.int64)
    keys = (idx[:, 0] << 42) + (idx[:, 1] << 21) + idx[:, 2]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq_keys, starts = np.unique(sorted_keys, return_index=True)
    ends = np.append(starts[1:], n)
    cell_idx = np.column_stack(
        [(uniq_keys >> 42) & 0x1FFFFF, (uniq_keys >> 21) & 0x1FFFFF, uniq_keys & 0x1FFFFF]
    ).astype(float)
    ncells = uniq_keys.shape[0]

    sizes = ends - starts
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []

    def verify(cands_a: np.ndarray, cands_b: np.ndarray):
        if cands_a.size == 0:
            return
        pa, pb = pts[cands_a], pts[cands_b]
        gaps = np.abs(np.hypot(pa[:, 0] - pb[:, 0], pa[:, 1] - pb[:, 1]) - np.abs(pa[:, 2] - pb[:, 2]))
        keep = gaps < delta
        out_i.append(np.minimum(cands_a[keep], cands_b[keep]))
        out_j.append(np.maximum(cands_a[keep], cands_b[keep]))

    def expand_cross(aa: np.ndarray, bb: np.ndarray):
        """All point pairs across the distinct cell pairs (aa[k], bb[k])."""
        na, nb = sizes[aa], sizes[bb]
        per_pair = na * nb
        offsets = np.concatenate([[0], np.cumsum(per_pair)])
        total = int(offsets[-1])
        chunk = int(4e6)
        for lo_t in range(0, total, chunk):
            hi_t = min(lo_t + chunk, total)
            flat = np.arange(lo_t, hi_t)
            pid = np.searchsorted(offsets, flat, side="right") - 1
            local = flat - offsets[pid]
            ia = order[starts[aa[pid]] + local // nb[pid]]
            ib = order[starts[bb[pid]] + local % nb[pid]]
            verify(ia, ib)

    block = max(1, int(2e6) // max(ncells, 1))
    for cstart in range(0, ncells, block):
        cstop = min(cstart + block, ncells)
        rows = np.arange(cstart, cstop)
        di = np.abs(cell_idx[rows, None, 0] - cell_idx[None, :, 0])
        dj = np.abs(cell_idx[rows, None, 1] - cell_idx[None, :, 1])
        dk = np.abs(cell_idx[rows, None, 2] - cell_idx[None, :, 2])
        pd_min = cell * np.hypot(np.maximum(di - 1.0, 0.0), np.maximum(dj - 1.0, 0.0))
        pd_max = cell * np.hypot(di + 1.0, dj + 1.0)
        hz_min = cell * np.maximum(dk - 1.0, 0.0)
        hz_max = cell * (dk + 1.0)
        feasible = (pd_min - hz_max < delta) & (pd_max - hz_min > -delta)
        # scan each unordered cell pair once
        aa, bb = np.nonzero(feasible)
        aa = rows[aa]
        keep = aa < bb
        expand_cross(aa[keep], bb[keep])

    # within-cell pairs (always feasible: both intervals start at 0)
    for a in np.nonzero(sizes >= 2)[0]:
        members = order[starts[a]:ends[a]]
        ii, jj = np.triu_indices(members.shape[0], k=1)
        verify(members[ii], members[jj])

    pairs = _canonical(
        np.concatenate(out_i) if out_i else [], np.concatenate(out_j) if out_j else []
    )
    return TangencyPairSet(pairs=pairs, delta=delta, family_hash=family.provenance_hash())


# ---------------------------------------------------------------------------
# exact counting for integer families
# ---------------------------------------------------------------------------


def count_ct0_exact(family: CircleFamily, with_bins: bool = True) -> TangencyPairSet:
    """All exactly tangent unordered pairs of an integer family.

    Tangency is decided by the integer identity dx^2 + dy^2 == dz^2. Small
    coordinates run vectorized in int64 (the bound _INT64_SAFE_COORD keeps
    every intermediate below 2^53 so the arithmetic is exact); larger ones
    fall back to Python integers, which are arbitrary precision. by_distance
    gets dyadic buckets of the pair distance when requested.
    """
    if not family.is_integer:
        raise TypeError("count_ct0_exact requires an integer-exact family")
    pts = family.points.astype(np.int64)
    n = pts.shape[0]
    if n < 2:
        return TangencyPairSet(
            pairs=np.empty((0, 2), dtype=np.int64), delta=0.0,
            family_hash=family.provenance_hash(), by_distance={} if with_bins else None,
        )
    if np.abs(pts).max() <= _INT64_SAFE_COORD:
        pairs_arr, d2 = _ct0_vectorized(pts)
    else:
        pairs_arr, d2 = _ct0_python(pts)
    by_distance = None
    if with_bins:
        by_distance = {}
        if pairs_arr.shape[0]:
            # floor(log2(sqrt(d2))) == floor(floor(log2(d2)) / 2), and
            # bit_length gives floor(log2) exactly for integers
            exps = np.array([(int(v).bit_length() - 1) // 2 for v in d2], dtype=np.int64)
            for e in np.unique(exps):
                by_distance[float(2.0 ** int(e))] = pairs_arr[exps == e]
    return TangencyPairSet(
        pairs=pairs_arr, delta=0.0, family_hash=family.provenance_hash(), by_distance=by_distance
    )


def _ct0_vectorized(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = pts.shape[0]
    out_pairs: list[np.ndarray] = []
    out_d2: list[np.ndarray] = []
    block = max(1, int(4e6) // max(n, 1))
    for start in range(0, n - 1, block):
        stop = min(start + block, n - 1)
        rows = np.arange(start, stop)
        dx = pts[rows, None, 0] - pts[None, :, 0]
        dy = pts[rows, None, 1] - pts[None, :, 1]
        dz = pts[rows, None, 2] - pts[None, :, 2]
        planar = dx * dx + dy * dy
        hit = planar == dz * dz
        ii, jj = np.nonzero(hit)
        d2 = (planar + dz * dz)[ii, jj]
        keep = rows[ii] < jj
        out_pairs.append(np.column_stack([rows[ii][keep], jj[keep]]))
        out_d2.append(d2[keep])
    if out_pairs:
        pairs = np.vstack(out_pairs)
        d2 = np.concatenate(out_d2)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order], d2[order]
    return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)


def _ct0_python(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # exact fallback for coordinates beyond the int64-safe range
    rows = [(int(a), int(b), int(c)) for a, b, c in pts]
    pairs = []
    d2s = []
    n = len(rows)
    for i in range(n - 1):
        xi, yi, zi = rows[i]
        for j in range(i + 1, n):
            dx = rows[j][0] - xi
            dy = rows[j][1] - yi
            dz = rows[j][2] - zi
            planar = dx * dx + dy * dy
            if planar == dz * dz:
                pairs.append((i, j))
                d2s.append(planar + dz * dz)
    if pairs:
        return np.array(pairs, dtype=np.int64), np.array(d2s, dtype=object)
    return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)


# ---------------------------------------------------------------------------
# dyadic binning and rectangle lifting
# ---------------------------------------------------------------------------


def bin_dyadic(pairs: TangencyPairSet, family: CircleFamily) -> TangencyPairSet:
    """Fill by_distance with dyadic buckets D = 2^floor(log2 |x_i - x_j|).

    The buckets partition the pair list; a pair lands in bucket D exactly
    when its distance lies in [D, 2D). Coincident points are rejected: they
    can only arise from duplicate circles, which family validation forbids.
    """
    pts = family.points.astype(float)
    if len(pairs) == 0:
        return TangencyPairSet(
            pairs=pairs.pairs, delta=pairs.delta, family_hash=pairs.family_hash, by_distance={}
        )
    diff = pts[pairs.pairs[:, 0]] - pts[pairs.pairs[:, 1]]
    dists = np.linalg.norm(diff, axis=1)
    if np.any(dists == 0.0):
        raise ValueError("coincident points cannot form a tangent pair")
    exps = np.floor(np.log2(dists)).astype(np.int64)
    by_distance = {float(2.0 ** int(e)): pairs.pairs[exps == e] for e in np.unique(exps)}
    return TangencyPairSet(
        pairs=pairs.pairs, delta=pairs.delta, family_hash=pairs.family_hash, by_distance=by_distance
    )


def lift_rect(rect: Rect2, family: CircleFamily, delta: float) -> np.ndarray:
    """Indices of circles whose 10*delta annulus contains the rectangle.

    The cardinality of the result is the richness of the rectangle. This is
    the vectorized twin of geometry.annulus_contains_rect and is tested
    against it member by member.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if len(family) == 0:
        return np.empty(0, dtype=np.int64)
    thick = ANNULUS_THICKNESS_FACTOR * delta
    pts = family.points.astype(float)
    centers = pts[:, :2]
    radii = pts[:, 2]
    corners = rect_corners(rect)  # (4, 2)
    d_far = np.linalg.norm(centers[:, None, :] - corners[None, :, :], axis=2).max(axis=1)
    u_long, u_short = rect_axes(rect)
    rel = centers - np.array(rect.center)
    du = np.maximum(np.abs(rel @ u_long) - rect.length / 2.0, 0.0)
    dv = np.maximum(np.abs(rel @ u_short) - rect.width / 2.0, 0.0)
    d_near = np.hypot(du, dv)
    inside = (d_far < radii + thick) & (d_near > radii - thick)
    return np.nonzero(inside)[0].astype(np.int64)
