"""Small dense-matrix kernels and integer-lattice utilities.

Everything here is a pure function of its arguments.  Bases are stored
row-wise: row i of a (d, d) array is the i-th lattice generator.
"""

from __future__ import annotations

import numpy as np

DEGENERACY_RATIO = 1e-8

# Default hard cap on the number of enumerated lattice points.
ENUMERATION_CAP = 2_000_000


class DegenerateBasisError(ValueError):
    """Basis rows are (numerically) linearly dependent."""


class EnumerationCapError(RuntimeError):
    """Close-point enumeration exceeded its configured cap."""


class UnderConstrainedError(RuntimeError):
    """Weighted normal matrix is singular; the replica set is too small."""


def check_basis(basis: np.ndarray) -> np.ndarray:
    """Validate a square row-basis, returning it as a float array."""
    b = np.asarray(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"basis must be square, got shape {b.shape}")
    sv = np.linalg.svd(b, compute_uv=False)
    if sv[-1] <= DEGENERACY_RATIO * sv[0]:
        raise DegenerateBasisError(
            f"basis is degenerate: singular value ratio {sv[-1] / sv[0]:.2e}"
        )
    return b


def int_det(mat) -> int:
    """Exact determinant of an integer matrix (fraction-free Bareiss)."""
    a = [[int(x) for x in row] for row in np.asarray(mat)]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _gram_schmidt(b: np.ndarray):
    """Returns (bstar, mu, norms2) for the rows of b."""
    n = b.shape[0]
    bstar = np.zeros_like(b)
    mu = np.zeros((n, n))
    norms2 = np.zeros(n)
    for i in range(n):
        v = b[i].copy()
        for j in range(i):
            mu[i, j] = np.dot(b[i], bstar[j]) / norms2[j]
            v -= mu[i, j] * bstar[j]
        bstar[i] = v
        norms2[i] = np.dot(v, v)
    return bstar, mu, norms2


def lll_reduce(basis: np.ndarray, delta: float = 0.75):
    """LLL-reduce a row basis.

    Returns (reduced, transform) with transform an exact-integer unimodular
    matrix such that reduced == transform @ basis and both generate the same
    lattice.  delta is the Lovasz parameter.
    """
    if not 0.25 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0.25, 1], got {delta}")
    b = check_basis(basis).copy()
    n = b.shape[0]
    u = np.eye(n, dtype=np.int64)
    _, mu, norms2 = _gram_schmidt(b)
    k = 1
    swaps = 0
    max_swaps = 200 * n * n + 1000
    while k < n:
        for j in range(k - 1, -1, -1):
            q = int(np.floor(mu[k, j] + 0.5))
            if q != 0:
                b[k] -= q * b[j]
                u[k] -= q * u[j]
                mu[k, : j + 1] -= q * mu[j, : j + 1]
                mu[k, j] -= q  # mu[j, j] is implicitly 1
        # mu row k was updated in place; refresh the Lovasz data for row k
        _, mu, norms2 = _gram_schmidt(b)
        if norms2[k] >= (delta - mu[k, k - 1] ** 2) * norms2[k - 1]:
            k += 1
        else:
            b[[k - 1, k]] = b[[k, k - 1]]
            u[[k - 1, k]] = u[[k, k - 1]]
            _, mu, norms2 = _gram_schmidt(b)
            k = max(k - 1, 1)
            swaps += 1
            if swaps > max_swaps:
                raise RuntimeError("LLL failed to terminate (ill-conditioned basis)")
    if np.max(np.abs(u)) > 2**40:
        raise RuntimeError("LLL transform coefficients overflowed sane bounds")
    if abs(int_det(u)) != 1:
        raise RuntimeError("LLL transform lost unimodularity")
    return b, u


def close_lattice_points(
    basis: np.ndarray,
    center: np.ndarray,
    radius: float,
    cap: int = ENUMERATION_CAP,
    pre_reduce: bool = True,
) -> np.ndarray:
    """Integer coefficient rows u with ||u @ basis - center|| <= radius.

    Layered (Fincke-Pohst style) enumeration over a triangularized basis,
    vectorized one level at a time.  Raises EnumerationCapError if the
    candidate count exceeds cap.
    """
    b = check_basis(basis)
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    d = b.shape[0]
    if pre_reduce:
        red, g = lll_reduce(b)
    else:
        red, g = b, np.eye(d, dtype=np.int64)
    # red.T = Q R with positive diagonal; ||w @ red - c|| = ||R w - Q^T c||
    q, r = np.linalg.qr(red.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    r = signs[:, None] * r
    q = q * signs[None, :]
    z = q.T @ center
    budget0 = (radius * (1.0 + 1e-9)) ** 2 + 1e-12
    # partial solutions over coordinates d-1 .. level
    coeffs = np.zeros((1, 0), dtype=np.int64)
    residual = np.array([budget0])
    acc = np.zeros((1, d))  # accumulated R[:, j] * w_j contributions
    for i in range(d - 1, -1, -1):
        s = z[i] - acc[:, i]
        half = np.sqrt(np.maximum(residual, 0.0))
        rii = r[i, i]
        lo = np.ceil((s - half) / rii - 1e-12).astype(np.int64)
        hi = np.floor((s + half) / rii + 1e-12).astype(np.int64)
        counts = np.maximum(hi - lo + 1, 0)
        total = int(counts.sum())
        if total == 0:
            return np.zeros((0, d), dtype=np.int64)
        if total > cap:
            raise EnumerationCapError(
                f"enumeration exceeded cap of {cap} candidates at level {i}"
            )
        rows = np.repeat(np.arange(len(counts)), counts)
        offsets = np.arange(total) - np.repeat(
            np.concatenate(([0], np.cumsum(counts)[:-1])), counts
        )
        w_i = lo[rows] + offsets
        step = rii * w_i - s[rows]
        new_residual = residual[rows] - step**2
        keep = new_residual >= 0.0
        rows = rows[keep]
        w_i = w_i[keep]
        coeffs = np.column_stack([w_i, coeffs[rows]])
        residual = new_residual[keep]
        acc = acc[rows] + np.outer(w_i, r[:, i])
    if coeffs.shape[0] == 0:
        return np.zeros((0, d), dtype=np.int64)
    out = coeffs @ g
    # exact final filter in the original coordinates
    dist2 = np.einsum("ij,ij->i", out @ b - center, out @ b - center)
    out = out[dist2 <= radius**2 * (1.0 + 1e-12) + 1e-300]
    return out


def svd(a: np.ndarray):
    """SVD with descending singular values; a == u @ diag(s) @ vt."""
    return np.linalg.svd(np.asarray(a, dtype=float))


def sym_eig_min(a: np.ndarray):
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix."""
    w, v = np.linalg.eigh(np.asarray(a, dtype=float))
    return w[0], v[:, 0]


def weighted_lsq_solve(design: np.ndarray, weights: np.ndarray, targets: np.ndarray):
    """Solve min_M || sqrt(W) (design @ M - targets) ||_F row-weighted.

    design: (m, k) rows of integer/real coefficients, weights: (m,) positive,
    targets: (m, ...) stacked right-hand sides.  Raises UnderConstrainedError
    when the weighted normal matrix is numerically singular.
    """
    design = np.asarray(design, dtype=float)
    weights = np.asarray(weights, dtype=float)
    t = np.asarray(targets, dtype=float)
    wd = design * weights[:, None]
    normal = design.T @ wd
    eigvals = np.linalg.eigvalsh(normal)
    if eigvals[0] <= 1e-10 * max(eigvals[-1], 0.0) or eigvals[-1] <= 0.0:
        raise UnderConstrainedError(
            "normal matrix is singular; add replica pairs before lifting"
        )
    rhs = wd.T @ t.reshape(t.shape[0], -1)
    sol = np.linalg.solve(normal, rhs)
    return sol.reshape((design.shape[1],) + t.shape[1:])
