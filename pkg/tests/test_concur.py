import itertools

import numpy as np
import pytest

from dcpack.concur import (
    fit_rigid_motion,
    project_concur,
    project_density,
    project_rigidity,
    shrink_singular_values,
    unconstrained_lift,
)
from dcpack.configuration import (
    GeneratingMatrix,
    PackingProblem,
    PairTable,
    lift,
)
from dcpack.lattice import UnderConstrainedError
from .shapes_for_tests import regular_simplex_shape


def density_scan_oracle(cell_bar, v_target, refine=6):
    """Generic constrained optimizer: scan singular values directly.

    Shares only the standard fact that the optimum has the same singular
    vectors; the sigma optimization is an independent nested grid scan.
    """
    u, sbar, vt = np.linalg.svd(cell_bar)
    d = len(sbar)
    lo = np.full(d - 1, 1e-6)
    hi = sbar[:-1] * 1.5 + 1.0
    best = None
    for _ in range(refine):
        axes = [np.linspace(lo[i], hi[i], 25) for i in range(d - 1)]
        best_cost, best_sig = np.inf, None
        for sig_head in itertools.product(*axes):
            sig_last = v_target / np.prod(sig_head)
            sig = np.array(list(sig_head) + [sig_last])
            if sig_last <= 0:
                continue
            cost = np.sum((sig - sbar) ** 2)
            if cost < best_cost:
                best_cost, best_sig = cost, sig
        span = (hi - lo) / 8
        lo = np.maximum(best_sig[:-1] - span, 1e-9)
        hi = best_sig[:-1] + span
        best = best_sig
    return u @ np.diag(best) @ vt, np.sum((best - sbar) ** 2)


def single_pair_table(dim):
    lat2 = np.zeros((1, dim), dtype=np.int64)
    lat2[0, 0] = 1
    return PairTable(
        lat1=np.zeros((1, dim), dtype=np.int64),
        lat2=lat2,
        part1=[0],
        part2=[0],
        num_particles=1,
    )


def grid_pair_table(dim, offsets, p=1, parts=None):
    n = len(offsets)
    parts = parts or [(0, 0)] * n
    return PairTable(
        lat1=np.zeros((n, dim), dtype=np.int64),
        lat2=np.array(offsets, dtype=np.int64),
        part1=[a for a, _ in parts],
        part2=[b for _, b in parts],
        num_particles=p,
    )


# ---------------- unconstrained lift ----------------


def test_lift_exact_fit_recovers_m():
    pairs = grid_pair_table(2, [(1, 0), (0, 1), (1, 1)])
    gm = GeneratingMatrix(np.array([[1.0, 0.2], [0.1, 1.3]]), np.array([[0.3, 0.4]]))
    x = lift(pairs, gm)
    gm_bar, _ = unconstrained_lift(pairs, np.ones(3), x)
    assert np.allclose(gm_bar.cell, gm.cell, atol=1e-12)
    assert np.allclose(gm_bar.particles, gm.particles, atol=1e-12)


def test_lift_one_pair_1d_by_hand():
    # b1 = (0, 1), b2 = (1, 1), X = (0, 1): cell step 1, particle at 0
    pairs = single_pair_table(1)
    x = np.array([[[0.0]], [[1.0]]])
    gm_bar, _ = unconstrained_lift(pairs, np.ones(1), x)
    assert gm_bar.cell[0, 0] == pytest.approx(1.0)
    assert gm_bar.particles[0, 0, 0] == pytest.approx(0.0, abs=1e-14)


def test_lift_weight_behaves_like_weighted_mean():
    # two copies of the same constraint with very unequal weights: the lift
    # lands close to the heavy replica's value
    pairs = grid_pair_table(1, [(1,), (1,)])
    with pytest.raises(ValueError):
        pairs.validate()  # duplicate key: this table is intentionally redundant
    x = np.array([[[0.0]], [[1.0]], [[0.2]], [[1.4]]])
    heavy, light = 1e6, 1e-6
    gm_bar, _ = unconstrained_lift(pairs, np.array([light, heavy]), x)
    assert gm_bar.particles[0, 0, 0] == pytest.approx(0.2, abs=1e-4)


def test_lift_residual_w_orthogonal_to_range():
    rng = np.random.default_rng(3)
    pairs = grid_pair_table(2, [(1, 0), (0, 1), (1, 1), (2, 1)])
    w = rng.uniform(0.2, 3.0, size=4)
    x = rng.normal(size=(8, 1, 2))
    gm_bar, _ = unconstrained_lift(pairs, w, x)
    resid = (x - lift(pairs, gm_bar)).reshape(8, 2)
    design = pairs.rows().astype(float)
    gram = design.T @ (np.repeat(w, 2)[:, None] * resid)
    scale = np.linalg.norm(x)
    assert np.linalg.norm(gram) <= 1e-9 * scale


def test_lift_under_constrained_raises():
    pairs = single_pair_table(2)  # one pair cannot pin a 2d cell
    x = np.zeros((2, 1, 2))
    with pytest.raises(UnderConstrainedError):
        unconstrained_lift(pairs, np.ones(1), x)


# ---------------- density projection ----------------


def identity_normal(d, p=1):
    return np.eye(d + p)


def test_density_inside_constraint_unchanged():
    gm = GeneratingMatrix(np.diag([0.5, 0.5]), np.zeros((1, 1, 2)))
    out = project_density(gm, identity_normal(2), 1.0)
    assert np.array_equal(out.cell, gm.cell)


def test_density_symmetric_case():
    gm = GeneratingMatrix(np.diag([2.0, 2.0]), np.zeros((1, 1, 2)))
    out = project_density(gm, identity_normal(2), 1.0)
    assert np.allclose(out.cell, np.eye(2), atol=1e-9)


def test_density_diag_3_1_vs_scan_oracle():
    gm = GeneratingMatrix(np.diag([3.0, 1.0]), np.zeros((1, 1, 2)))
    out = project_density(gm, identity_normal(2), 1.0)
    oracle_cell, oracle_cost = density_scan_oracle(gm.cell, 1.0)
    cost = np.sum((out.cell - gm.cell) ** 2)
    assert abs(np.linalg.det(out.cell)) <= 1.0 + 1e-9
    assert cost <= oracle_cost + 1e-7
    assert np.allclose(out.cell, oracle_cell, atol=1e-4)


@pytest.mark.parametrize("d", [2, 3])
def test_density_matches_scan_oracle_random(d):
    rng = np.random.default_rng(42 + d)
    for _ in range(50):
        cell = rng.normal(size=(d, d)) * rng.uniform(0.5, 2.0)
        v_target = abs(np.linalg.det(cell)) * rng.uniform(0.2, 0.95)
        gm = GeneratingMatrix(cell, np.zeros((1, 1, d)))
        out = project_density(gm, identity_normal(d), v_target)
        assert abs(abs(np.linalg.det(out.cell)) - v_target) <= 1e-9 * v_target
        _, oracle_cost = density_scan_oracle(cell, v_target)
        cost = np.sum((out.cell - cell) ** 2)
        assert cost <= oracle_cost + 1e-7 * max(1.0, oracle_cost)


def test_shrink_singular_values_deep_target():
    sbar = np.array([10.0, 0.1])
    s = shrink_singular_values(sbar, 0.05)
    assert np.prod(s) == pytest.approx(0.05, rel=1e-9)
    # cost must not exceed the trivial candidate (sbar_1, V'/sbar_1)
    trivial = np.sum((np.array([10.0, 0.005]) - sbar) ** 2)
    assert np.sum((s - sbar) ** 2) <= trivial + 1e-12


def test_density_fully_degenerate_errors():
    gm = GeneratingMatrix(np.zeros((2, 2)), np.zeros((1, 1, 2)))
    with pytest.raises(ValueError):
        # det == 0 <= V never projects; force the degenerate path directly
        shrink_singular_values(np.zeros(2), 1.0)


# ---------------- rigidity projection ----------------


def rotation_grid_oracle_2d(ref, target, steps=360):
    best = np.inf
    for theta in np.linspace(0, 2 * np.pi, steps, endpoint=False):
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, s], [-s, c]])
        moved = ref @ rot
        trans = target.mean(axis=0) - moved.mean(axis=0)
        best = min(best, np.sum((moved + trans - target) ** 2))
    return best


def test_rigidity_congruent_unchanged():
    shape = regular_simplex_shape(2)
    theta = 0.7
    rot = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    target = shape.vertices @ rot + np.array([1.0, -2.0])
    gm = GeneratingMatrix(np.eye(2), target[None, :, :])
    out = project_rigidity(gm, shape)
    assert np.allclose(out.particles[0], target, atol=1e-10)


def test_rigidity_recovers_quarter_turn():
    shape = regular_simplex_shape(3)
    rot = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    target = shape.vertices @ rot + np.array([0.5, 0.25, -1.0])
    gm = GeneratingMatrix(np.eye(3), target[None, :, :])
    out = project_rigidity(gm, shape)
    assert np.allclose(out.particles[0], target, atol=1e-10)


def test_rigidity_perturbed_vertex_vs_grid_oracle():
    shape = regular_simplex_shape(2)
    target = shape.vertices.copy()
    target[0] += np.array([0.1, 0.0])
    gm = GeneratingMatrix(np.eye(2), target[None, :, :])
    out = project_rigidity(gm, shape)
    resid = np.sum((out.particles[0] - target) ** 2)
    assert resid < 0.1**2
    assert resid <= rotation_grid_oracle_2d(shape.vertices, target) + 1e-6


def test_rigidity_no_reflection_by_default():
    shape = regular_simplex_shape(2)
    reflected = shape.vertices @ np.diag([1.0, -1.0])
    rot, _ = fit_rigid_motion(shape.vertices, reflected)
    assert np.linalg.det(rot) == pytest.approx(1.0)
    rot_refl, _ = fit_rigid_motion(shape.vertices, reflected, allow_reflections=True)
    assert np.linalg.det(rot_refl) == pytest.approx(-1.0)


def test_rigidity_coincident_target_translation_only():
    shape = regular_simplex_shape(2)
    target = np.tile(np.array([[2.0, 3.0]]), (3, 1))
    rot, trans = fit_rigid_motion(shape.vertices, target)
    assert np.array_equal(rot, np.eye(2))


# ---------------- full concur dispatch ----------------


def hex_problem(phi=0.9):
    return PackingProblem("sphere", dim=2, radius=1.0, phi_target=phi)


def hex_pairs():
    return grid_pair_table(2, [(1, 0), (0, 1), (1, 1)])


def test_concur_fixed_point_of_feasible_m():
    prob = hex_problem(phi=0.19)
    gm = GeneratingMatrix(4.0 * np.eye(2), np.array([[0.1, 0.3]]))
    assert gm.cell_volume() <= prob.volume_target()
    x = lift(hex_pairs(), gm)
    res = project_concur(x, hex_pairs(), np.ones(3), prob)
    assert np.allclose(res.replicas, x, atol=1e-9)


def test_concur_kissing_is_pure_lift():
    prob = PackingProblem("kissing", dim=2, radius=1.0, tau_target=6)
    pairs = hex_pairs()
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 1, 2)) * 3.0
    res = project_concur(x, pairs, np.ones(3), prob)
    design = pairs.rows().astype(float)
    expect = design @ np.linalg.lstsq(design, x.reshape(6, 2), rcond=None)[0]
    assert np.allclose(res.replicas.reshape(6, 2), expect, atol=1e-9)


def test_concur_density_hits_boundary():
    prob = hex_problem(phi=0.9)
    gm = GeneratingMatrix(3.0 * np.eye(2), np.array([[0.0, 0.0]]))
    x = lift(hex_pairs(), gm)
    res = project_concur(x, hex_pairs(), np.ones(3), prob)
    vt = prob.volume_target()
    assert res.gm.cell_volume() <= vt * (1 + 1e-9)
    assert res.gm.cell_volume() >= vt * (1 - 1e-6)


def test_concur_idempotent():
    prob = hex_problem(phi=0.9)
    rng = np.random.default_rng(9)
    pairs = hex_pairs()
    x = rng.normal(size=(6, 1, 2)) * 2.0
    res1 = project_concur(x, pairs, np.ones(3), prob)
    res2 = project_concur(res1.replicas, pairs, np.ones(3), prob)
    assert np.allclose(res2.replicas, res1.replicas, atol=1e-9)


def test_concur_polytope_membership_and_idempotence():
    shape = regular_simplex_shape(2)
    prob = PackingProblem(
        "polytope", dim=2, num_particles=1, shape=shape, phi_target=0.5
    )
    pairs = hex_pairs()
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 3, 2)) * 1.5
    res = project_concur(x, pairs, np.ones(3), prob)
    assert res.gm.cell_volume() <= prob.volume_target() * (1 + 1e-9)
    ref = shape.distance_matrix()
    for k in range(res.gm.num_particles):
        got = GeneratingMatrix(res.gm.cell, res.gm.particles[k : k + 1])
        diff = got.particles[0][:, None, :] - got.particles[0][None, :, :]
        dm = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        assert np.allclose(dm, ref, atol=1e-9)
    res2 = project_concur(res.replicas, pairs, np.ones(3), prob)
    assert np.allclose(res2.replicas, res.replicas, atol=1e-9)
