"""Overlap detection and minimum-displacement resolution for convex polytopes.

A pair of vertex sets overlaps iff no plane through d of the vertices (at
least one from each set) separates them.  The interpenetration measure is
the smallest sum of squared misclassification distances over those planes.
Resolution searches all vertex subsets S (|S| > d, one vertex from each
polytope) whose least-squares plane separates the remaining vertices, picks
the one with the smallest summed squared distance, and drops its vertices
onto that plane.

Cost is exponential in the total vertex count by design; the guard below
keeps it to small polytopes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

SEPARATION_TOL = 1e-12  # signed-distance slack: on-plane counts as separated
DELTA_ZERO = 1e-18  # Delta^2 at or below this means "no overlap"
DEGENERATE_EIG_TOL = 1e-12  # tied smallest scatter eigenvalues are skipped
MAX_TOTAL_VERTICES = 16


@dataclass
class SeparatingPlane:
    normal: np.ndarray  # unit vector
    offset: float  # plane is {r : normal . r = offset}


@lru_cache(maxsize=None)
def _mixed_subsets(v1: int, v2: int, size: int) -> np.ndarray:
    """Index rows into the stacked (v1 + v2) vertex array: subsets of the
    given size containing at least one vertex from each polytope."""
    total = v1 + v2
    keep = [
        c
        for c in combinations(range(total), size)
        if c[0] < v1 and c[-1] >= v1  # sorted tuples: first from X1, last from X2
    ]
    if not keep:
        return np.zeros((0, size), dtype=np.intp)
    return np.asarray(keep, dtype=np.intp)


def _guard(v1: int, v2: int, d: int):
    if v1 < d + 1 or v2 < d + 1:
        raise ValueError("each polytope needs at least d+1 vertices")
    if v1 + v2 > MAX_TOTAL_VERTICES:
        raise ValueError(
            f"{v1 + v2} vertices exceeds the supported total of {MAX_TOTAL_VERTICES}"
        )


def _exact_planes(points: np.ndarray, subsets: np.ndarray):
    """Planes through d points each: unit normals and offsets.

    points: (n, V, d); subsets: (m, d) index rows.  Returns normals
    (n, m, d), offsets (n, m) and a validity mask (affinely independent).
    """
    n, _, d = points.shape
    sel = points[:, subsets, :]  # (n, m, d, d)
    diffs = sel[:, :, 1:, :] - sel[:, :, :1, :]  # (n, m, d-1, d)
    _, sv, vt = np.linalg.svd(diffs)
    normals = vt[:, :, -1, :]  # (n, m, d)
    ok = sv[:, :, -1] > 1e-12 * np.maximum(sv[:, :, 0], 1e-300) if d > 1 else None
    if d == 1:
        ok = np.ones(sel.shape[:2], dtype=bool)
    offsets = np.einsum("nmd,nmd->nm", normals, sel.mean(axis=2))
    return normals, offsets, ok


def _delta2_batch(points: np.ndarray, v1: int):
    """Interpenetration measure for every stacked pair.

    points: (n, v1+v2, d).  Returns (delta2 (n,), normals (n, d),
    offsets (n,)) for the minimizing plane of each pair.
    """
    n, total, d = points.shape
    subsets = _mixed_subsets(v1, total - v1, d)
    normals, offsets, ok = _exact_planes(points, subsets)
    g = np.einsum("nvd,nmd->nmv", points, normals) - offsets[:, :, None]
    g1, g2 = g[:, :, :v1], g[:, :, v1:]
    plus = (np.maximum(g1, 0.0) ** 2).sum(axis=2) + (np.minimum(g2, 0.0) ** 2).sum(axis=2)
    minus = (np.minimum(g1, 0.0) ** 2).sum(axis=2) + (np.maximum(g2, 0.0) ** 2).sum(axis=2)
    per_plane = np.minimum(plus, minus)
    per_plane[~ok] = np.inf
    best = np.argmin(per_plane, axis=1)
    idx = np.arange(n)
    return per_plane[idx, best], normals[idx, best], offsets[idx, best]


def overlap_measure(x1: np.ndarray, x2: np.ndarray):
    """(Delta^2, plane) for one pair of vertex matrices.

    Delta^2 == 0 (below DELTA_ZERO) iff the hull interiors are disjoint; the
    returned plane realizes the minimum.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    d = x1.shape[1]
    _guard(x1.shape[0], x2.shape[0], d)
    points = np.concatenate([x1, x2])[None, :, :]
    delta2, normal, offset = _delta2_batch(points, x1.shape[0])
    return float(delta2[0]), SeparatingPlane(normal[0], float(offset[0]))


def _resolve_batch(points: np.ndarray, v1: int) -> np.ndarray:
    """Move each overlapping stacked pair onto its best least-squares plane.

    points: (n, v1+v2, d) of pairs already known to overlap.  Searches
    subset sizes in increasing order with the monotone lower bound
    (scatter eigenvalues only grow with the subset) as an early exit.
    """
    n, total, d = points.shape
    out = points.copy()
    best_cost = np.full(n, np.inf)
    best_normal = np.zeros((n, d))
    best_offset = np.zeros(n)
    best_members = np.zeros((n, total), dtype=bool)
    active = np.ones(n, dtype=bool)
    for size in range(d + 1, total + 1):
        if not np.any(active):
            break
        subsets = _mixed_subsets(v1, total - v1, size)
        if len(subsets) == 0:
            continue
        rows = np.flatnonzero(active)
        sel = points[rows][:, subsets, :]  # (a, m, size, d)
        centred = sel - sel.mean(axis=2, keepdims=True)
        scatter = np.einsum("amkd,amke->amde", centred, centred)
        evals, evecs = np.linalg.eigh(scatter)
        lam = evals[:, :, 0]
        # monotone bound: supersets of any size-`size` subset cost at least
        # min(lam); once that exceeds the incumbent nothing better remains
        tied = (evals[:, :, 1] - evals[:, :, 0]) <= DEGENERATE_EIG_TOL * np.maximum(
            evals[:, :, -1], 1e-300
        )
        normals = evecs[:, :, :, 0]
        offsets = np.einsum("amd,amd->am", normals, sel.mean(axis=2))
        g = np.einsum("avd,amd->amv", points[rows], normals) - offsets[:, :, None]
        member = np.zeros((len(subsets), total), dtype=bool)
        member[np.repeat(np.arange(len(subsets)), size), subsets.ravel()] = True
        out1 = ~member[:, :v1][None, :, :]  # (1, m, v1) leftovers of X1
        out2 = ~member[:, v1:][None, :, :]
        g1, g2 = g[:, :, :v1], g[:, :, v1:]
        hi1 = np.where(out1, g1, -np.inf).max(axis=2)
        lo1 = np.where(out1, g1, np.inf).min(axis=2)
        hi2 = np.where(out2, g2, -np.inf).max(axis=2)
        lo2 = np.where(out2, g2, np.inf).min(axis=2)
        sep = ((hi1 <= SEPARATION_TOL) & (lo2 >= -SEPARATION_TOL)) | (
            (hi2 <= SEPARATION_TOL) & (lo1 >= -SEPARATION_TOL)
        )
        valid = sep & ~tied
        cost = np.where(valid, lam, np.inf)
        arg = np.argmin(cost, axis=1)
        aidx = np.arange(len(rows))
        better = cost[aidx, arg] < best_cost[rows]
        upd = rows[better]
        sel_arg = arg[better]
        best_cost[upd] = cost[aidx, arg][better]
        best_normal[upd] = normals[aidx[better], sel_arg]
        best_offset[upd] = offsets[aidx[better], sel_arg]
        best_members[upd] = member[sel_arg]
        # early exit per pair: cheapest possible superset already too costly
        bound = lam.min(axis=1)
        active[rows[bound >= best_cost[rows]]] = False
    if np.any(np.isinf(best_cost)):
        raise RuntimeError("no separating least-squares plane found (unexpected)")
    g_best = (
        np.einsum("nvd,nd->nv", points, best_normal) - best_offset[:, None]
    )
    shift = np.where(best_members, -g_best, 0.0)
    out += shift[:, :, None] * best_normal[:, None, :]
    return out


def resolve_overlap(x1: np.ndarray, x2: np.ndarray):
    """Minimum-displacement overlap resolution for one polytope pair."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    v1, d = x1.shape
    _guard(v1, x2.shape[0], d)
    delta2, _ = overlap_measure(x1, x2)
    if delta2 <= DELTA_ZERO:
        return x1.copy(), x2.copy()
    moved = _resolve_batch(np.concatenate([x1, x2])[None, :, :], v1)[0]
    return moved[:v1], moved[v1:]


def project_divide_polytope(x: np.ndarray) -> np.ndarray:
    """Resolve every replica pair of a polytope replica matrix independently.

    x: (2n, v, d) with rows 2i, 2i+1 forming pair i.
    """
    n2, v, d = x.shape
    n = n2 // 2
    _guard(v, v, d)
    points = np.concatenate([x[0::2], x[1::2]], axis=1)  # (n, 2v, d)
    delta2, _, _ = _delta2_batch(points, v)
    overlapping = delta2 > DELTA_ZERO
    out = x.copy()
    if np.any(overlapping):
        moved = _resolve_batch(points[overlapping], v)
        out[np.repeat(overlapping, 2)] = np.concatenate(
            [moved[:, :v, :], moved[:, v:, :]], axis=1
        ).reshape(-1, v, d)
    return out


def pair_overlap_measures(x: np.ndarray) -> np.ndarray:
    """Delta^2 for every replica pair (drives weights and run traces)."""
    n2, v, d = x.shape
    points = np.concatenate([x[0::2], x[1::2]], axis=1)
    return _delta2_batch(points, v)[0]
