"""Projection to the sphere exclusion ("divide") constraint.

Each replica pair is resolved independently: a violating pair is pushed
apart symmetrically along the line of centres to distance exactly 2r, which
is the minimum-norm correction.  Metric weights play no role because both
replicas of a pair carry the same weight.
"""

from __future__ import annotations

import numpy as np

COINCIDENT_TOL = 1e-12


def project_pair(x1: np.ndarray, x2: np.ndarray, r: float):
    """Resolve one pair of sphere centres to separation >= 2r."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    diff = x1 - x2
    dist = float(np.linalg.norm(diff))
    if dist >= 2.0 * r:
        return x1, x2
    if dist < COINCIDENT_TOL:
        # measure-zero tie-break: separate along the first coordinate axis
        axis = np.zeros_like(x1)
        axis[0] = 1.0
        return x1 + r * axis, x2 - r * axis
    shift = (2.0 * r - dist) / (2.0 * dist) * diff
    return x1 + shift, x2 - shift


def _pair_geometry(x: np.ndarray):
    a = x[0::2].reshape(x.shape[0] // 2, -1)
    b = x[1::2].reshape(x.shape[0] // 2, -1)
    diff = a - b
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return a, b, diff, dist


def pair_distances(x: np.ndarray) -> np.ndarray:
    """Centre separation of every replica pair in a replica matrix."""
    return _pair_geometry(x)[3]


def _apply_shift(x, move, diff, dist, amount):
    """Shift selected pairs symmetrically along their difference vector."""
    out = x.reshape(x.shape[0], -1).copy()
    idx = np.flatnonzero(move)
    if idx.size == 0:
        return out.reshape(x.shape)
    unit = np.zeros((idx.size, out.shape[1]))
    safe = dist[idx] >= COINCIDENT_TOL
    unit[safe] = diff[idx][safe] / dist[idx][safe, None]
    unit[~safe, 0] = 1.0
    shift = 0.5 * amount[idx, None] * unit
    out[2 * idx] += shift
    out[2 * idx + 1] -= shift
    return out.reshape(x.shape)


def project_divide(x: np.ndarray, r: float) -> np.ndarray:
    """Resolve every violating replica pair to separation exactly 2r."""
    _, _, diff, dist = _pair_geometry(x)
    move = dist < 2.0 * r
    return _apply_shift(x, move, diff, dist, 2.0 * r - dist)


def project_divide_kissing(x: np.ndarray, r: float, contacts: int) -> np.ndarray:
    """Kissing variant: pin the `contacts` closest pairs to exactly 2r.

    The contact set is chosen once from the input distances (stable order
    breaks boundary ties by pair index); remaining pairs are only pushed
    outward as in plain packing.
    """
    n = x.shape[0] // 2
    if contacts > n:
        raise ValueError(f"need {contacts} contact pairs but only {n} replicas")
    _, _, diff, dist = _pair_geometry(x)
    move = dist < 2.0 * r
    if contacts > 0:
        pinned = np.argsort(dist, kind="stable")[:contacts]
        move = move.copy()
        move[pinned] = True
    return _apply_shift(x, move, diff, dist, 2.0 * r - dist)
