import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcpack.lattice import (
    DegenerateBasisError,
    EnumerationCapError,
    close_lattice_points,
    int_det,
    lll_reduce,
    svd,
    sym_eig_min,
    weighted_lsq_solve,
)


def brute_close_points(basis, center, radius):
    """Oracle: enumerate an integer box safely covering the search ball.

    The box bound comes from Cramer's rule: |u_i| <= ||adj(B)_i|| * (||c|| + r)
    / |det B|, padded by one.
    """
    b = np.asarray(basis, dtype=float)
    center = np.asarray(center, dtype=float)
    d = b.shape[0]
    binv = np.linalg.inv(b)
    # coefficient of any point x with ||x - c|| <= r is u = x @ binv
    reach = (np.linalg.norm(center) + radius) * np.linalg.norm(binv, axis=0)
    bound = np.ceil(reach + 1).astype(int)
    out = []
    for u in itertools.product(*[range(-bb, bb + 1) for bb in bound]):
        u = np.asarray(u)
        dist2 = np.sum((u @ b - center) ** 2)
        if dist2 <= radius**2 * (1.0 + 1e-12) + 1e-300:
            out.append(u)
    return sorted(map(tuple, out))


def lattice_fingerprint(basis, radius):
    pts = close_lattice_points(basis, np.zeros(len(basis)), radius)
    norms = np.sort(np.einsum("ij,ij->i", pts @ basis, pts @ basis))
    return np.round(norms, 9).tolist()


# ---------------- LLL ----------------


def test_lll_skewed_2d():
    # expected rows derived by exhaustive search over unimodular G with
    # entries in [-8, 8] minimizing the max row norm: identity up to sign/order
    basis = np.array([[1.0, 0.0], [4.0, 1.0]])
    red, g = lll_reduce(basis)
    assert abs(int_det(g)) == 1
    norms = np.sort(np.linalg.norm(red, axis=1))
    assert np.allclose(norms, [1.0, 1.0])
    assert np.allclose(np.abs(np.linalg.det(red)), 1.0)


def test_lll_identity_fixed_point():
    red, g = lll_reduce(np.eye(2))
    assert np.array_equal(g, np.eye(2, dtype=np.int64))
    assert np.array_equal(red, np.eye(2))


def test_lll_det_preserved():
    basis = np.array([[2.0, 0.0], [1.0, 2.0]])
    red, g = lll_reduce(basis)
    assert abs(np.linalg.det(red)) == pytest.approx(4.0, rel=1e-12)


def test_lll_rejects_degenerate():
    with pytest.raises(DegenerateBasisError):
        lll_reduce(np.array([[1.0, 1.0], [1.0 + 1e-12, 1.0]]))


def test_lll_rejects_bad_delta():
    with pytest.raises(ValueError):
        lll_reduce(np.eye(2), delta=0.2)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000_000))
def test_lll_same_lattice_gram_invariants(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    while True:
        basis = rng.normal(size=(d, d)) + np.eye(d)
        sv = np.linalg.svd(basis, compute_uv=False)
        if sv[-1] > 1e-2 * sv[0]:
            break
    red, g = lll_reduce(basis)
    assert abs(int_det(g)) == 1
    assert np.allclose(red, g @ basis, atol=1e-12)
    # same lattice: identical sorted norms of all points within a radius
    r = 2.0 * np.max(np.linalg.norm(red, axis=1))
    assert lattice_fingerprint(basis, r) == pytest.approx(
        lattice_fingerprint(red, r), abs=1e-8
    )


def test_lll_size_and_lovasz_conditions():
    rng = np.random.default_rng(7)
    for _ in range(20):
        basis = rng.normal(size=(3, 3)) + np.eye(3)
        if np.linalg.svd(basis, compute_uv=False)[-1] < 1e-2:
            continue
        red, _ = lll_reduce(basis, delta=0.75)
        bstar = np.zeros_like(red)
        mu = np.zeros((3, 3))
        for i in range(3):
            v = red[i].copy()
            for j in range(i):
                mu[i, j] = red[i] @ bstar[j] / (bstar[j] @ bstar[j])
                v -= mu[i, j] * bstar[j]
            bstar[i] = v
        assert np.all(np.abs(mu[np.tril_indices(3, -1)]) <= 0.5 + 1e-9)
        for k in range(1, 3):
            lhs = bstar[k] @ bstar[k]
            rhs = (0.75 - mu[k, k - 1] ** 2) * (bstar[k - 1] @ bstar[k - 1])
            assert lhs >= rhs - 1e-9


# ---------------- close lattice points ----------------


def test_close_points_z2():
    # oracle-derived: radius 1.5 also covers the four diagonal neighbours
    # at distance sqrt(2)
    pts = close_lattice_points(np.eye(2), np.zeros(2), 1.5)
    got = sorted(map(tuple, pts))
    assert got == brute_close_points(np.eye(2), np.zeros(2), 1.5)
    assert got == [
        (-1, -1), (-1, 0), (-1, 1),
        (0, -1), (0, 0), (0, 1),
        (1, -1), (1, 0), (1, 1),
    ]


def test_close_points_empty():
    pts = close_lattice_points(np.eye(2), np.array([0.5, 0.5]), 0.4)
    assert len(pts) == 0


def test_close_points_hexagonal():
    basis = np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    pts = close_lattice_points(basis, np.zeros(2), 1.01)
    assert len(pts) == 7
    assert sorted(map(tuple, pts)) == brute_close_points(basis, np.zeros(2), 1.01)


def test_close_points_cap():
    with pytest.raises(EnumerationCapError):
        close_lattice_points(np.eye(2), np.zeros(2), 100.0, cap=10)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10_000_000))
def test_close_points_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    while True:
        basis = rng.normal(size=(d, d))
        sv = np.linalg.svd(basis, compute_uv=False)
        if sv[-1] > 1e-2 * sv[0]:
            break
    center = rng.normal(size=d)
    radius = float(rng.uniform(0.3, 2.0)) * np.max(np.linalg.norm(basis, axis=1))
    got = sorted(map(tuple, close_lattice_points(basis, center, radius)))
    assert got == brute_close_points(basis, center, radius)


# ---------------- dense kernels ----------------


def test_svd_diag():
    u, s, vt = svd(np.diag([3.0, 1.0]))
    assert np.allclose(s, [3.0, 1.0])


def test_svd_reconstruction():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 5))
    u, s, vt = svd(a)
    assert np.linalg.norm(u @ np.diag(s) @ vt - a) <= 1e-10 * np.linalg.norm(a)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


def test_sym_eig_min_identity():
    val, vec = sym_eig_min(np.eye(3))
    assert val == pytest.approx(1.0)
    assert np.linalg.norm(vec) == pytest.approx(1.0)


def test_weighted_lsq_identity():
    x = np.arange(6.0).reshape(3, 2)
    m = weighted_lsq_solve(np.eye(3), np.ones(3), x)
    assert np.allclose(m, x)


def test_weighted_lsq_residual_orthogonality():
    rng = np.random.default_rng(11)
    design = rng.normal(size=(12, 4))
    w = rng.uniform(0.1, 3.0, size=12)
    x = rng.normal(size=(12, 3))
    m = weighted_lsq_solve(design, w, x)
    resid = x - design @ m
    gram = design.T @ (w[:, None] * resid)
    scale = np.linalg.norm(design) * np.linalg.norm(x)
    assert np.linalg.norm(gram) <= 1e-9 * scale


def test_int_det_exact():
    assert int_det([[1, 0], [4, 1]]) == 1
    assert int_det([[2, 0], [0, 3]]) == 6
    assert int_det([[0, 1], [1, 0]]) == -1
