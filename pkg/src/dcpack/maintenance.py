"""Formal-configuration upkeep between difference-map iterations.

The active pair set tracks the concur estimate: every particle pair (and
periodic image) whose centroids lie within a cutoff becomes a replica pair.
Pair weights relax toward kind-specific target weights that emphasize pairs
at risk of overlap.  Periodically the cell basis is re-represented through
an LLL reduction with exact integer bookkeeping on the pair table.
"""

from __future__ import annotations

import numpy as np

from .configuration import (
    GeneratingMatrix,
    PackingProblem,
    PairTable,
    canonical_pair_key,
    lift,
    normalize_weights,
)
from .lattice import close_lattice_points, int_det, lll_reduce

PAIR_CAP = 4_000_000
WEIGHT_CLAMP = 1e12
CUTOFF_MARGIN = 1.3
NEW_PAIR_WEIGHT = 1.0


def default_cutoff(problem: PackingProblem) -> float:
    if problem.kind == "polytope":
        return 2.0 * problem.shape.circumradius * CUTOFF_MARGIN
    return problem.contact_distance() * CUTOFF_MARGIN


def enumerate_pairs(gm: GeneratingMatrix, cutoff: float, cap: int = PAIR_CAP) -> PairTable:
    """All particle pairs (periodic images included) with centroid distance
    <= cutoff, one canonical entry per translation-equivalence class."""
    p, d = gm.num_particles, gm.dim
    centers = gm.centroids()
    lat2, part1, part2 = [], [], []
    count = 0
    for j in range(p):
        for k in range(j, p):
            offs = close_lattice_points(
                gm.cell, centers[j] - centers[k], cutoff, cap=cap, pre_reduce=False
            )
            if j == k:
                nz = offs[np.any(offs != 0, axis=1)]
                first = nz[
                    np.arange(len(nz)),
                    np.argmax(nz != 0, axis=1),
                ]
                offs = nz[first > 0]  # one representative of each +-v class
            count += len(offs)
            if count > cap:
                raise RuntimeError(
                    f"pair count exceeded cap {cap}; lower the cutoff"
                )
            lat2.append(offs)
            part1.extend([j] * len(offs))
            part2.extend([k] * len(offs))
    lat2 = np.concatenate(lat2) if lat2 else np.zeros((0, d), dtype=np.int64)
    table = PairTable(
        lat1=np.zeros_like(lat2),
        lat2=lat2,
        part1=np.asarray(part1, dtype=np.int64),
        part2=np.asarray(part2, dtype=np.int64),
        num_particles=p,
    )
    # canonical order keeps reruns and tie-breaks deterministic
    keys = canonical_key_array(table)
    order = np.lexsort(keys.T[::-1])
    return PairTable(
        table.lat1[order], table.lat2[order], table.part1[order], table.part2[order], p
    )


def canonical_key_array(pairs: PairTable) -> np.ndarray:
    """Vectorized canonical keys: rows [p_min, p_max, diff...] (int64).

    Matches canonical_pair_key: particle indices ordered, diff negated on
    swap, and sign-normalized for self-pairs.
    """
    diff = pairs.separations().copy()
    p1 = pairs.part1.copy()
    p2 = pairs.part2.copy()
    swap = p1 > p2
    p1[swap], p2[swap] = pairs.part2[swap], pairs.part1[swap]
    diff[swap] = -diff[swap]
    selfpair = p1 == p2
    if np.any(selfpair):
        sub = diff[selfpair]
        nonzero = sub != 0
        has = nonzero.any(axis=1)
        first = np.where(has, np.argmax(nonzero, axis=1), 0)
        lead = sub[np.arange(len(sub)), first]
        sub[lead < 0] = -sub[lead < 0]
        diff[selfpair] = sub
    return np.column_stack([p1, p2, diff])


def refresh_replicas(
    pairs: PairTable,
    x: np.ndarray,
    weights: np.ndarray,
    gm: GeneratingMatrix,
    problem: PackingProblem,
    cutoff: float | None = None,
    min_pairs: int = 0,
    cap: int = PAIR_CAP,
):
    """Rebuild the pair set around the concur estimate gm.

    Surviving pairs keep their iterate rows and weights; new pairs enter at
    the concur estimate with weight 1.  If fewer than min_pairs result, the
    cutoff is widened geometrically (an under-constrained lift is useless).
    Returns (pairs, x, weights, cutoff_used).
    """
    if cutoff is None:
        cutoff = default_cutoff(problem)
    grown = cutoff
    for _ in range(32):
        new_pairs = enumerate_pairs(gm, grown, cap=cap)
        if len(new_pairs) >= max(min_pairs, 1):
            break
        grown *= 1.25
    else:
        raise RuntimeError("could not find enough replica pairs at any cutoff")
    x_new = lift(new_pairs, gm)
    w_new = np.full(len(new_pairs), NEW_PAIR_WEIGHT)
    if len(pairs):
        new_idx, old_idx = _match_keys(
            canonical_key_array(new_pairs), canonical_key_array(pairs)
        )
        rows = np.empty(2 * len(new_idx), dtype=np.intp)
        rows[0::2], rows[1::2] = 2 * new_idx, 2 * new_idx + 1
        old_rows = np.empty_like(rows)
        old_rows[0::2], old_rows[1::2] = 2 * old_idx, 2 * old_idx + 1
        x_new[rows] = x[old_rows]
        w_new[new_idx] = weights[old_idx]
    return new_pairs, x_new, normalize_weights(w_new), grown


def _match_keys(a: np.ndarray, b: np.ndarray):
    """Indices (ia, ib) with a[ia] == b[ib] row-wise (rows of b are unique)."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    order = np.lexsort(b.T[::-1])
    b_sorted = b[order]
    av = np.ascontiguousarray(a).view([("", a.dtype)] * a.shape[1]).ravel()
    bv = np.ascontiguousarray(b_sorted).view([("", b.dtype)] * b.shape[1]).ravel()
    pos = np.searchsorted(bv, av)
    pos = np.minimum(pos, len(bv) - 1)
    hit = bv[pos] == av
    return np.flatnonzero(hit), order[pos[hit]]


def concur_pair_distances(pairs: PairTable, gm: GeneratingMatrix) -> np.ndarray:
    """Centroid separation of every pair in the concur estimate."""
    centers = gm.centroids()
    sep = (
        centers[pairs.part2]
        - centers[pairs.part1]
        + pairs.separations() @ gm.cell
    )
    return np.sqrt(np.einsum("ij,ij->i", sep, sep))


def sphere_target_weights(distances: np.ndarray, radius: float, d: int, alpha: float):
    """Target weight for sphere pairs at the given centre distances.

    In units of the radius: contact pairs sit at separation 2 and get
    weight 1; overlapping pairs are boosted exponentially, distant pairs
    decay by a dimension-compensated power law.
    """
    s2 = (np.asarray(distances, dtype=float) / radius) ** 2
    out = np.where(
        s2 <= 4.0,
        np.exp(np.minimum(alpha * (4.0 - s2), np.log(WEIGHT_CLAMP))),
        np.maximum(s2 - 3.0, 1e-12) ** (-2.0 - d / 2.0),
    )
    return np.minimum(out, WEIGHT_CLAMP)


def polytope_target_weights(
    delta2: np.ndarray, distances: np.ndarray, inradius: float, alpha: float
):
    """Target weight for polytope pairs from interpenetration and distance."""
    boosted = np.exp(np.minimum(alpha * delta2, np.log(WEIGHT_CLAMP)))
    far = np.maximum(1.0 + distances**2 - 4.0 * inradius**2, 1e-12) ** -2.0
    out = np.where(delta2 > 0.0, boosted, far)
    return np.minimum(out, WEIGHT_CLAMP)


def update_weights(
    weights: np.ndarray,
    target: np.ndarray,
    relaxation: float,
) -> np.ndarray:
    """One relaxation step toward the target weights, then mean-1 rescale."""
    w = (relaxation * weights + target) / (relaxation + 1.0)
    return normalize_weights(w)


def _integer_inverse(g: np.ndarray) -> np.ndarray:
    inv = np.rint(np.linalg.inv(g)).astype(np.int64)
    if not np.array_equal(g @ inv, np.eye(len(g), dtype=np.int64)):
        raise RuntimeError("unimodular inverse failed")
    return inv


def reduce_and_recenter(pairs: PairTable, gm: GeneratingMatrix):
    """Re-represent the same packing over an LLL-reduced cell.

    The cell rows are recombined by a unimodular matrix, particle centroids
    are translated into the centred cell, and the pair table absorbs the
    inverse bookkeeping, so the lift of every replica is preserved.
    Returns (pairs, gm, changed).
    """
    cell_red, g0 = lll_reduce(gm.cell)
    lam = gm.centroids() @ np.linalg.inv(cell_red)
    shifts = -np.floor(lam + 0.5).astype(np.int64)  # lattice coords, new basis
    changed = bool(np.any(g0 != np.eye(len(g0), dtype=np.int64)) or np.any(shifts != 0))
    if not changed:
        return pairs, gm, False
    particles = gm.particles + (shifts @ cell_red)[:, None, :]
    g0_inv = _integer_inverse(g0)
    assert abs(int_det(g0)) == 1
    lat1 = pairs.lat1 @ g0_inv - shifts[pairs.part1]
    lat2 = pairs.lat2 @ g0_inv - shifts[pairs.part2]
    new_pairs = PairTable(lat1, lat2, pairs.part1.copy(), pairs.part2.copy(), pairs.num_particles)
    return new_pairs, GeneratingMatrix(cell_red, particles), True
