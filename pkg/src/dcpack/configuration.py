"""Physical and formal configuration spaces for periodic packing searches.

A periodic packing is held as a generating matrix: d lattice generators
(the unit cell) stacked over p primitive particles.  A particle is a
(v, d) vertex block; spheres use v = 1.  The formal configuration is the
replica matrix X, two rows per active exclusion constraint, obtained from
the generating matrix by the integer pair table (the linear map A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

KINDS = ("sphere", "kissing", "polytope")


def ball_volume(d: int, r: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


@dataclass(frozen=True)
class PolytopeShape:
    """Reference particle: vertex matrix plus cached size data."""

    name: str
    vertices: np.ndarray  # (v, d)
    volume: float
    inradius: float
    circumradius: float

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    def distance_matrix(self) -> np.ndarray:
        diff = self.vertices[:, None, :] - self.vertices[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class PackingProblem:
    kind: str
    dim: int
    num_particles: int = 1
    radius: float = 1.0
    shape: PolytopeShape | None = None
    phi_target: float | None = None
    tau_target: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.dim < 2 or self.num_particles < 1:
            raise ValueError("need dim >= 2 and at least one particle")
        if self.kind == "polytope":
            if self.shape is None:
                raise ValueError("polytope problems need a reference shape")
            if self.shape.vertices.shape[1] != self.dim:
                raise ValueError("shape dimension does not match problem")
        if self.kind == "kissing":
            if self.tau_target is None or self.tau_target <= 0:
                raise ValueError("kissing problems need a positive tau_target")
        elif self.phi_target is not None and not 0.0 < self.phi_target <= 1.0:
            raise ValueError("phi_target must lie in (0, 1]")

    @property
    def vertices_per_particle(self) -> int:
        return 1 if self.shape is None else self.shape.num_vertices

    @property
    def particle_volume(self) -> float:
        if self.kind == "polytope":
            return self.shape.volume
        return ball_volume(self.dim, self.radius)

    def volume_target(self, phi_target: float | None = None) -> float:
        phi = self.phi_target if phi_target is None else phi_target
        if phi is None:
            raise ValueError("no density target set")
        return self.num_particles * self.particle_volume / phi

    def contact_distance(self) -> float:
        """Centre separation of touching spheres (sphere kinds only)."""
        return 2.0 * self.radius


@dataclass
class GeneratingMatrix:
    """Unit cell generators plus primitive particle data."""

    cell: np.ndarray  # (d, d), row i a lattice generator
    particles: np.ndarray  # (p, v, d)

    def __post_init__(self):
        self.cell = np.asarray(self.cell, dtype=float)
        self.particles = np.asarray(self.particles, dtype=float)
        if self.particles.ndim == 2:  # sphere shorthand: (p, d)
            self.particles = self.particles[:, None, :]
        d = self.cell.shape[0]
        if self.cell.shape != (d, d) or self.particles.shape[2] != d:
            raise ValueError("inconsistent generating matrix shapes")

    @property
    def dim(self) -> int:
        return self.cell.shape[0]

    @property
    def num_particles(self) -> int:
        return self.particles.shape[0]

    @property
    def vertices_per_particle(self) -> int:
        return self.particles.shape[1]

    def centroids(self) -> np.ndarray:
        return self.particles.mean(axis=1)

    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.cell)))

    def copy(self) -> "GeneratingMatrix":
        return GeneratingMatrix(self.cell.copy(), self.particles.copy())


@dataclass
class PairTable:
    """Integer index matrix A: one (b1, b2) row pair per exclusion constraint.

    Row 2i has lattice coordinates lat1[i] and particle index part1[i];
    row 2i+1 likewise.  Pairs related by a common lattice translation are
    the same constraint, so canonical keys use only lat2 - lat1.
    """

    lat1: np.ndarray  # (n, d) int64
    lat2: np.ndarray
    part1: np.ndarray  # (n,) int64
    part2: np.ndarray
    num_particles: int

    def __post_init__(self):
        self.lat1 = np.asarray(self.lat1, dtype=np.int64).reshape(len(self.part1), -1)
        self.lat2 = np.asarray(self.lat2, dtype=np.int64).reshape(len(self.part2), -1)
        self.part1 = np.asarray(self.part1, dtype=np.int64)
        self.part2 = np.asarray(self.part2, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.part1)

    @property
    def dim(self) -> int:
        return self.lat1.shape[1]

    def rows(self) -> np.ndarray:
        """Dense (2n, d + p) integer matrix with interleaved pair rows."""
        n, d, p = len(self), self.dim, self.num_particles
        out = np.zeros((2 * n, d + p), dtype=np.int64)
        out[0::2, :d] = self.lat1
        out[1::2, :d] = self.lat2
        out[np.arange(0, 2 * n, 2), d + self.part1] = 1
        out[np.arange(1, 2 * n, 2), d + self.part2] = 1
        return out

    def separations(self) -> np.ndarray:
        """Per-pair lattice offset b2 - b1 in lattice coordinates."""
        return self.lat2 - self.lat1

    def keys(self) -> list[tuple]:
        """Canonical translation-invariant pair keys."""
        return [
            canonical_pair_key(self.part1[i], self.part2[i], self.lat2[i] - self.lat1[i])
            for i in range(len(self))
        ]

    def validate(self):
        if np.any((self.part1 == self.part2) & np.all(self.lat1 == self.lat2, axis=1)):
            raise ValueError("pair with b1 == b2")
        keys = self.keys()
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate pair up to translation symmetry")


def canonical_pair_key(p1: int, p2: int, diff) -> tuple:
    """Dedup key for the constraint between particle p1 and p2 + diff @ cell.

    (b1, b2) and (b2, b1) describe the same constraint; so do common
    translations.  Order particle indices, and for self-pairs fix the sign
    of diff lexicographically.
    """
    p1, p2 = int(p1), int(p2)
    diff = tuple(int(x) for x in diff)
    if p1 > p2:
        p1, p2 = p2, p1
        diff = tuple(-x for x in diff)
    elif p1 == p2:
        for x in diff:
            if x > 0:
                break
            if x < 0:
                diff = tuple(-y for y in diff)
                break
    return (p1, p2, diff)


def lift(pairs: PairTable, gm: GeneratingMatrix) -> np.ndarray:
    """The linear map from generating matrix to replica matrix.

    Returns X with shape (2n, v, d); row 2i is particle part1[i] translated
    by lat1[i] @ cell, row 2i+1 likewise.
    """
    n = len(pairs)
    v, d = gm.vertices_per_particle, gm.dim
    x = np.empty((2 * n, v, d))
    x[0::2] = gm.particles[pairs.part1] + (pairs.lat1 @ gm.cell)[:, None, :]
    x[1::2] = gm.particles[pairs.part2] + (pairs.lat2 @ gm.cell)[:, None, :]
    return x


def expand_weights(weights: np.ndarray) -> np.ndarray:
    """Per-pair weights -> per-replica-row weights (both rows share w_i)."""
    return np.repeat(np.asarray(weights, dtype=float), 2)


def normalize_weights(weights: np.ndarray) -> np.ndarray:
    """Rescale positive pair weights to mean 1."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must stay positive")
    return w / w.mean()


def frobenius_w_distance(x1: np.ndarray, x2: np.ndarray, weights: np.ndarray) -> float:
    """Weighted Frobenius distance between replica matrices.

    weights are per pair; every coordinate of both replicas of pair i
    carries weight w_i.
    """
    if x1.shape != x2.shape:
        raise ValueError("replica matrices must have equal shapes")
    diff2 = ((x1 - x2) ** 2).reshape(x1.shape[0], -1).sum(axis=1)
    return float(np.sqrt(np.sum(expand_weights(weights) * diff2)))


# ---------------------------------------------------------------------------
# text serialization


def dump_generating_matrix(gm: GeneratingMatrix, kind: str, metadata: dict | None = None) -> str:
    """Header `d p v kind`, then one row per line with 17 significant digits."""
    out = StringIO()
    d, p, v = gm.dim, gm.num_particles, gm.vertices_per_particle
    out.write(f"{d} {p} {v} {kind}\n")
    for row in gm.cell:
        out.write(" ".join(f"{x:.17g}" for x in row) + "\n")
    for part in gm.particles:
        out.write(" ".join(f"{x:.17g}" for x in part.ravel()) + "\n")
    for key, value in (metadata or {}).items():
        out.write(f"{key} {value}\n")
    return out.getvalue()


def parse_generating_matrix(text: str):
    """Inverse of dump_generating_matrix.

    Returns (gm, kind, metadata); metadata holds any trailing `key value`
    lines as strings.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError(f"bad header line {lines[0]!r}")
    d, p, v, kind = int(head[0]), int(head[1]), int(head[2]), head[3]
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r} in header")
    rows = lines[1 : 1 + d + p]
    if len(rows) != d + p:
        raise ValueError("truncated matrix block")
    cell = np.array([[float(x) for x in rows[i].split()] for i in range(d)])
    particles = np.array(
        [[float(x) for x in rows[d + i].split()] for i in range(p)]
    ).reshape(p, v, d)
    metadata = {}
    for ln in lines[1 + d + p :]:
        key, _, value = ln.partition(" ")
        metadata[key] = value.strip()
    return GeneratingMatrix(cell, particles), kind, metadata


def save_packing(path, gm: GeneratingMatrix, kind: str, metadata: dict | None = None):
    with open(path, "w") as fh:
        fh.write(dump_generating_matrix(gm, kind, metadata))


def load_packing(path):
    with open(path) as fh:
        return parse_generating_matrix(fh.read())
