"""Projection to the "concur" constraint.

Two-step strategy: a weighted least-squares lift of the replica matrix back
to generating-matrix space, then a projection of the lifted matrix onto the
constraints that live there (cell volume for packing, particle rigidity for
polytopes).  The kissing problem keeps only the lift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .configuration import GeneratingMatrix, PackingProblem, PairTable, lift
from .lattice import weighted_lsq_solve

DENSITY_TOL = 1e-12


@dataclass
class ConcurResult:
    gm: GeneratingMatrix
    replicas: np.ndarray  # lift of gm through the pair table


def build_design(pairs: PairTable, vertices_per_particle: int) -> np.ndarray:
    """Constraint-row design matrix for the weighted lift.

    Spheres: one row per replica, unknowns are d cell rows + p centres.
    Polytopes: one row per replica vertex; the cell translation applies to
    every vertex of a replica, each vertex is otherwise a free unknown.
    """
    n, d, p = len(pairs), pairs.dim, pairs.num_particles
    v = vertices_per_particle
    rows = pairs.rows().astype(float)  # (2n, d + p)
    if v == 1:
        return rows
    design = np.zeros((2 * n * v, d + p * v))
    lat = np.repeat(rows[:, :d], v, axis=0)
    design[:, :d] = lat
    part = np.repeat(np.argmax(rows[:, d:], axis=1), v)
    vert = np.tile(np.arange(v), 2 * n)
    design[np.arange(2 * n * v), d + part * v + vert] = 1.0
    return design


def design_weights(weights: np.ndarray, vertices_per_particle: int) -> np.ndarray:
    """Per-design-row weights: both replicas and all vertices share w_i."""
    return np.repeat(np.asarray(weights, dtype=float), 2 * vertices_per_particle)


def _solution_to_gm(solution: np.ndarray, d: int, p: int, v: int) -> GeneratingMatrix:
    return GeneratingMatrix(solution[:d], solution[d:].reshape(p, v, d))


def unconstrained_lift(
    pairs: PairTable,
    weights: np.ndarray,
    x: np.ndarray,
    design: np.ndarray | None = None,
):
    """Weighted least-squares generating matrix for a replica matrix.

    Returns (gm_bar, normal) where normal is the weighted Gram matrix of the
    design (needed by the density projection).
    """
    v = x.shape[1]
    d, p = pairs.dim, pairs.num_particles
    if design is None:
        design = build_design(pairs, v)
    row_w = design_weights(weights, v)
    targets = x.reshape(-1, d)
    solution = weighted_lsq_solve(design, row_w, targets)
    normal = design.T @ (design * row_w[:, None])
    return _solution_to_gm(solution, d, p, v), normal


def shrink_singular_values(sbar: np.ndarray, vprime: float) -> np.ndarray:
    """Minimize sum (s_i - sbar_i)^2 subject to prod s_i = vprime < prod sbar.

    Stationarity decouples into s_i^2 - sbar_i s_i + mu = 0 with a common
    multiplier mu; the product is monotone along the all-plus-root branch,
    so mu is found by bisection.  If that branch cannot reach vprime the
    smallest coordinate switches to the minus root (scanned robustly).
    """
    sbar = np.asarray(sbar, dtype=float)
    if sbar[0] <= 0.0:
        raise ValueError("cannot project a fully degenerate cell")
    if np.prod(sbar) <= vprime:
        return sbar.copy()

    def plus_branch(mu):
        return 0.5 * (sbar + np.sqrt(np.maximum(sbar**2 - 4.0 * mu, 0.0)))

    mu_max = float(np.min(sbar) ** 2) / 4.0
    if np.prod(plus_branch(mu_max)) <= vprime:
        lo, hi = 0.0, mu_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.prod(plus_branch(mid)) > vprime:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-17 * mu_max:
                break
        s = plus_branch(0.5 * (lo + hi))
    else:
        # deep projection: smallest sbar takes the minus root
        m = len(sbar) - 1

        def mixed_branch(mu):
            s = plus_branch(mu)
            s[m] = 0.5 * (sbar[m] - np.sqrt(max(sbar[m] ** 2 - 4.0 * mu, 0.0)))
            return s

        grid = mu_max * np.linspace(1e-12, 1.0, 4097)
        prods = np.array([np.prod(mixed_branch(mu)) for mu in grid])
        crossings = np.flatnonzero(np.diff(np.sign(prods - vprime)) != 0)
        best, best_cost = None, np.inf
        for c in crossings:
            lo, hi = grid[c], grid[c + 1]
            flo = np.prod(mixed_branch(lo)) - vprime
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fmid = np.prod(mixed_branch(mid)) - vprime
                if (fmid > 0) == (flo > 0):
                    lo, flo = mid, fmid
                else:
                    hi = mid
            s_cand = mixed_branch(0.5 * (lo + hi))
            cost = float(np.sum((s_cand - sbar) ** 2))
            if cost < best_cost:
                best, best_cost = s_cand, cost
        if best is None:
            raise RuntimeError("singular value projection failed to bracket target")
        s = best
    # exact-product polish
    s = s * (vprime / np.prod(s)) ** (1.0 / len(s))
    return s


def project_density(
    gm_bar: GeneratingMatrix, normal: np.ndarray, v_target: float
) -> GeneratingMatrix:
    """Nearest (in the lifted metric) generating matrix with |det cell| <= V.

    normal is the weighted Gram matrix of the design; its Schur complement
    on the cell block is the metric under which the cell is projected.
    """
    det_bar = np.linalg.det(gm_bar.cell)
    if abs(det_bar) <= v_target * (1.0 + DENSITY_TOL):
        return gm_bar
    d = gm_bar.dim
    w00 = normal[:d, :d]
    w01 = normal[:d, d:]
    w11 = normal[d:, d:]
    if w11.size:
        w11_inv_w10 = np.linalg.solve(w11, w01.T)
        wpp = w00 - w01 @ w11_inv_w10
    else:
        w11_inv_w10 = None
        wpp = w00
    evals, evecs = np.linalg.eigh(wpp)
    if evals[0] <= 0.0:
        raise ValueError("cell-block metric is not positive definite")
    root = (evecs * np.sqrt(evals)) @ evecs.T
    inv_root = (evecs / np.sqrt(evals)) @ evecs.T
    lbar = root @ gm_bar.cell
    u, sbar, vt = np.linalg.svd(lbar)
    vprime = v_target * float(np.sqrt(np.prod(evals)))
    s = shrink_singular_values(sbar, vprime)
    cell = inv_root @ (u * s) @ vt
    particles = gm_bar.particles.copy()
    if w11_inv_w10 is not None:
        shift = w11_inv_w10 @ (cell - gm_bar.cell)
        particles -= shift.reshape(particles.shape)
    return GeneratingMatrix(cell, particles)


def fit_rigid_motion(reference: np.ndarray, target: np.ndarray, allow_reflections=False):
    """Rigid motion (rotation, translation) taking reference closest to target.

    Minimizes the summed squared vertex distances (absolute orientation /
    orthogonal Procrustes); rotations are proper unless reflections are
    explicitly allowed.
    """
    ref_mean = reference.mean(axis=0)
    tgt_mean = target.mean(axis=0)
    refc = reference - ref_mean
    tgtc = target - tgt_mean
    scale = np.linalg.norm(tgtc)
    if scale < 1e-14 * max(1.0, np.linalg.norm(refc)):
        rot = np.eye(reference.shape[1])
    else:
        u, _, vt = np.linalg.svd(refc.T @ tgtc)
        rot = u @ vt
        if not allow_reflections and np.linalg.det(rot) < 0:
            u[:, -1] *= -1.0
            rot = u @ vt
    trans = tgt_mean - ref_mean @ rot
    return rot, trans


def project_rigidity(
    gm: GeneratingMatrix, shape, allow_reflections: bool = False
) -> GeneratingMatrix:
    """Replace each particle by the best-fitting congruent copy of shape."""
    particles = np.empty_like(gm.particles)
    ref = shape.vertices
    for k in range(gm.num_particles):
        rot, trans = fit_rigid_motion(ref, gm.particles[k], allow_reflections)
        particles[k] = ref @ rot + trans
    return GeneratingMatrix(gm.cell.copy(), particles)


def project_concur(
    x: np.ndarray,
    pairs: PairTable,
    weights: np.ndarray,
    problem: PackingProblem,
    v_target: float | None = None,
    design: np.ndarray | None = None,
    allow_reflections: bool = False,
) -> ConcurResult:
    """Kind-dispatched concur projection: lift, then cell/rigidity repair."""
    gm_bar, normal = unconstrained_lift(pairs, weights, x, design=design)
    if problem.kind == "kissing":
        gm = gm_bar
    else:
        if v_target is None:
            v_target = problem.volume_target()
        gm = project_density(gm_bar, normal, v_target)
        if problem.kind == "polytope":
            gm = project_rigidity(gm, problem.shape, allow_reflections)
    return ConcurResult(gm, lift(pairs, gm))
