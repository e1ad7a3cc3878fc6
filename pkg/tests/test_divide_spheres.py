import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcpack.divide_spheres import (
    pair_distances,
    project_divide,
    project_divide_kissing,
    project_pair,
)


def as_replicas(points):
    pts = np.asarray(points, dtype=float)
    return pts.reshape(pts.shape[0], 1, -1)


def test_project_pair_overlapping():
    x1, x2 = project_pair(np.array([0.0, 0.0]), np.array([1.0, 0.0]), 1.0)
    assert np.allclose(x1, [-0.5, 0.0])
    assert np.allclose(x2, [1.5, 0.0])


def test_project_pair_feasible_unchanged():
    a = np.array([0.0, 0.0])
    b = np.array([3.0, 0.0])
    x1, x2 = project_pair(a, b, 1.0)
    assert np.array_equal(x1, a) and np.array_equal(x2, b)


def test_project_pair_vertical():
    x1, x2 = project_pair(np.array([0.0, 0.0]), np.array([0.0, 1.0]), 1.0)
    assert np.allclose(x1, [0.0, -0.5])
    assert np.allclose(x2, [0.0, 1.5])


def test_project_pair_coincident_deterministic():
    x1, x2 = project_pair(np.zeros(3), np.zeros(3), 1.0)
    assert np.allclose(x1, [1.0, 0.0, 0.0])
    assert np.allclose(x2, [-1.0, 0.0, 0.0])


def test_project_divide_only_violators_move():
    x = as_replicas([[0, 0], [1, 0], [5, 0], [8, 0]])
    out = project_divide(x, 1.0)
    assert np.allclose(pair_distances(out), [2.0, 3.0])
    assert np.array_equal(out[2:], x[2:])


def test_project_divide_all_feasible_fixed_point():
    x = as_replicas([[0, 0], [2.5, 0], [0, 5], [0, 9]])
    assert np.array_equal(project_divide(x, 1.0), x)


def test_kissing_pins_closest_pairs():
    # distances {1.8, 2.5, 3.0}, contacts=2 -> {2.0, 2.0, 3.0}
    x = as_replicas([[0, 0], [1.8, 0], [0, 0], [0, 2.5], [4, 0], [7, 0]])
    out = project_divide_kissing(x, 1.0, contacts=2)
    assert np.allclose(np.sort(pair_distances(out)), [2.0, 2.0, 3.0])


def test_kissing_zero_contacts_matches_divide():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(8, 1, 3))
    assert np.array_equal(
        project_divide_kissing(x, 1.0, 0), project_divide(x, 1.0)
    )


def test_kissing_all_at_contact_fixed_point():
    x = as_replicas([[0, 0], [2, 0], [0, 1], [0, 3]])
    out = project_divide_kissing(x, 1.0, contacts=2)
    assert np.allclose(out, x, atol=1e-12)


def test_kissing_too_few_pairs():
    x = as_replicas([[0, 0], [2, 0]])
    with pytest.raises(ValueError):
        project_divide_kissing(x, 1.0, contacts=2)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_divide_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    d = int(rng.integers(2, 5))
    r = float(rng.uniform(0.3, 2.0))
    x = rng.normal(scale=2.0, size=(2 * n, 1, d))
    out = project_divide(x, r)
    # feasibility and idempotence
    assert np.all(pair_distances(out) >= 2 * r - 1e-12)
    again = project_divide(out, r)
    assert np.allclose(again, out, atol=1e-12)
    # midpoints preserved
    mid_in = x[0::2] + x[1::2]
    mid_out = out[0::2] + out[1::2]
    assert np.allclose(mid_in, mid_out, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_pair_projection_minimality_vs_sampling(seed):
    """No random feasible correction is closer than the projection."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    r = 1.0
    x1 = rng.normal(size=d)
    x2 = x1 + rng.normal(size=d) * 0.5
    p1, p2 = project_pair(x1, x2, r)
    proj_cost = np.sum((p1 - x1) ** 2) + np.sum((p2 - x2) ** 2)
    if proj_cost == 0.0:
        return
    samples = rng.normal(size=(10_000, 2, d))
    scales = rng.uniform(0, 2, size=(10_000, 1, 1))
    cand = np.stack([x1, x2]) + samples * scales * np.sqrt(proj_cost)
    dist = np.linalg.norm(cand[:, 0] - cand[:, 1], axis=1)
    feasible = dist >= 2 * r
    cost = np.sum((cand - np.stack([x1, x2])) ** 2, axis=(1, 2))
    assert np.all(cost[feasible] >= proj_cost - 1e-9)
