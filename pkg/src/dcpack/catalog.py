"""Reference lattices, particle shapes, and the verification oracle.

The oracle shares no projection code with the solver: packings are checked
by direct neighbour enumeration (close_lattice_points) plus the polytope
overlap detector.  Known lattices ship as exact rational Gram matrices in
a text data file and self-check their density and kissing number at load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from itertools import combinations

import numpy as np

from .configuration import (
    GeneratingMatrix,
    PackingProblem,
    PolytopeShape,
    ball_volume,
)
from .divide_polytopes import overlap_measure
from .lattice import DegenerateBasisError, close_lattice_points

# Published reference values the stored catalog must reproduce
# (densest known lattice packing density for d = 2..14, and highest known
# lattice kissing number for d = 2..11).
REFERENCE_DENSITY = {
    2: 0.90690, 3: 0.74047, 4: 0.61685, 5: 0.46526, 6: 0.37295,
    7: 0.29530, 8: 0.25367, 9: 0.14577, 10: 0.092021, 11: 0.060432,
    12: 0.049454, 13: 0.029208, 14: 0.021624,
}
REFERENCE_KISSING = {
    2: 6, 3: 12, 4: 24, 5: 40, 6: 72,
    7: 126, 8: 240, 9: 272, 10: 336, 11: 438,
}
DENSEST_NAME = {
    2: "A2", 3: "D3", 4: "D4", 5: "D5", 6: "E6", 7: "E7", 8: "E8",
    9: "Lambda9", 10: "Lambda10", 11: "Lambda11", 12: "K12",
    13: "Lambda13", 14: "Lambda14",
}
KISSING_NAME = {
    2: "A2", 3: "D3", 4: "D4", 5: "D5", 6: "E6", 7: "E7", 8: "E8",
    9: "Lambda9", 10: "Lambda10", 11: "Lambda11max",
}


@dataclass(frozen=True)
class KnownLattice:
    name: str
    dim: int
    gram: np.ndarray  # exact rational Gram as float
    min_norm2: float
    phi: float
    kissing: int

    def basis(self) -> np.ndarray:
        return np.linalg.cholesky(self.gram)

    def recompute_phi(self) -> float:
        r = math.sqrt(self.min_norm2) / 2.0
        det = float(np.linalg.det(self.gram))
        return ball_volume(self.dim, r) / math.sqrt(det)

    def recompute_kissing(self) -> int:
        basis = self.basis()
        radius = math.sqrt(self.min_norm2) * (1.0 + 1e-9)
        pts = close_lattice_points(basis, np.zeros(self.dim), radius)
        return len(pts) - 1  # drop the origin


def _parse_fraction(tok: str) -> float:
    return float(Fraction(tok))


@lru_cache(maxsize=1)
def load_lattices() -> dict[str, KnownLattice]:
    text = resources.files("dcpack").joinpath("data/lattices.txt").read_text()
    out: dict[str, KnownLattice] = {}
    lines = iter(text.splitlines())
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head = dict(tok.split("=") for tok in line.split()[1:])
        name = line.split()[0]
        d = int(head["d"])
        rows = [next(lines).split() for _ in range(d)]
        gram = np.array([[_parse_fraction(t) for t in row] for row in rows])
        out[name] = KnownLattice(
            name=name,
            dim=d,
            gram=gram,
            min_norm2=_parse_fraction(head["min2"]),
            phi=float(head["phi"]),
            kissing=int(head["tau"]),
        )
    return out


def known_lattice(name: str) -> KnownLattice:
    lattices = load_lattices()
    if name not in lattices:
        raise KeyError(f"no catalog lattice named {name!r}")
    return lattices[name]


def densest_lattice(d: int) -> KnownLattice:
    return known_lattice(DENSEST_NAME[d])


def best_kissing_lattice(d: int) -> KnownLattice:
    return known_lattice(KISSING_NAME[d])


# ---------------------------------------------------------------------------
# particle shapes


def _regular_simplex_vertices(d: int, edge: float = 1.0) -> np.ndarray:
    gram = (np.eye(d) + np.ones((d, d))) / 2.0
    verts = np.vstack([np.linalg.cholesky(gram), np.zeros(d)])
    verts -= verts.mean(axis=0)
    return verts * edge

def _simplex_volume(verts: np.ndarray) -> float:
    d = verts.shape[1]
    return abs(float(np.linalg.det(verts[:d] - verts[d]))) / math.factorial(d)


def _facet_planes(vertices: np.ndarray, facets) -> list[tuple[np.ndarray, float]]:
    planes = []
    centroid = vertices.mean(axis=0)
    for facet in facets:
        pts = vertices[list(facet)]
        diffs = pts[1:] - pts[0]
        _, sv, vt = np.linalg.svd(diffs)
        if sv[-1] <= 1e-10 * sv[0]:
            continue
        n = vt[-1]
        h = n @ pts.mean(axis=0)
        if n @ centroid > h:  # orient outward
            n, h = -n, -h
        planes.append((n, h))
    return planes


def _hull_inradius(vertices: np.ndarray) -> float:
    """Distance from the centroid to the nearest facet plane.

    Valid for the simplexes and bipyramids in this catalog, whose facets
    are all (d)-subsets of vertices lying on the hull boundary.
    """
    d = vertices.shape[1]
    centroid = vertices.mean(axis=0)
    best = np.inf
    for facet in combinations(range(len(vertices)), d):
        pts = vertices[list(facet)]
        rest = [i for i in range(len(vertices)) if i not in facet]
        diffs = pts[1:] - pts[0]
        _, sv, vt = np.linalg.svd(diffs)
        if sv[-1] <= 1e-10 * sv[0]:
            continue
        n = vt[-1]
        h = n @ pts[0]
        g = vertices[rest] @ n - h
        if np.all(g <= 1e-12) or np.all(g >= -1e-12):  # supporting plane
            best = min(best, abs(n @ centroid - h))
    return best


def regular_simplex_shape(d: int, edge: float = 1.0, name: str | None = None) -> PolytopeShape:
    verts = _regular_simplex_vertices(d, edge)
    return PolytopeShape(
        name=name or f"regular_simplex_{d}d",
        vertices=verts,
        volume=_simplex_volume(verts),
        inradius=edge / math.sqrt(2.0 * d * (d + 1)),
        circumradius=edge * math.sqrt(d / (2.0 * (d + 1))),
    )


def simplex_dimer_shape(d: int, edge: float = 1.0, name: str | None = None) -> PolytopeShape:
    """Bipyramid: two regular d-simplices sharing a facet."""
    simplex = _regular_simplex_vertices(d, edge)
    apex, facet = simplex[0], simplex[1:]
    mirror = 2.0 * facet.mean(axis=0) - apex
    verts = np.vstack([apex, facet, mirror])
    verts -= verts.mean(axis=0)
    return PolytopeShape(
        name=name or f"simplex_dimer_{d}d",
        vertices=verts,
        volume=2.0 * _simplex_volume(simplex),
        inradius=_hull_inradius(verts),
        circumradius=float(np.max(np.linalg.norm(verts, axis=1))),
    )


@lru_cache(maxsize=None)
def shape_catalog() -> dict[str, PolytopeShape]:
    shapes = [
        regular_simplex_shape(3, name="regular_tetrahedron"),
        regular_simplex_shape(4, name="regular_pentatope"),
        simplex_dimer_shape(3, name="tetrahedron_dimer"),
        simplex_dimer_shape(4, name="pentatope_dimer"),
    ]
    return {s.name: s for s in shapes}


def shape(name: str) -> PolytopeShape:
    shapes = shape_catalog()
    if name not in shapes:
        raise KeyError(f"no catalog shape named {name!r}; have {sorted(shapes)}")
    return shapes[name]


# ---------------------------------------------------------------------------
# the densest known pentatope packing (double lattice of dimers)


def pentatope_packing() -> tuple[GeneratingMatrix, PackingProblem]:
    """Four primitive pentatopes on an explicit lattice, density 128/219.

    Entered symbolically as (integer + sqrt(5) * integer) / 4 parts.
    """
    s5 = math.sqrt(5.0)
    r = np.array(
        [
            [s5, s5, s5, s5],
            [3.0, -1.0, -1.0, -1.0],
            [-1.0, 3.0, -1.0, -1.0],
            [-1.0, -1.0, 3.0, -1.0],
            [-1.0, -1.0, -1.0, 3.0],
            [-s5, -s5, -s5, -s5],
        ]
    )
    t = np.array([-7.0, 1.0, 3.0, 3.0]) / 4.0 - (s5 / 4.0) * np.ones(4)
    k1 = r[0:5]
    k2 = r[1:6]
    particles = np.stack([k1, k2, t - k1, t - k2])
    cell_rat = np.array(
        [
            [-6, 10, -6, 2],
            [-8, -4, 4, 8],
            [-7, 5, 9, -7],
            [1, -7, 9, -3],
        ],
        dtype=float,
    )
    cell_irr = np.array(
        [
            [2, 2, 2, 2],
            [2, 2, 2, 2],
            [1, 1, 1, 1],
            [3, 3, 3, 3],
        ],
        dtype=float,
    )
    cell = cell_rat / 4.0 + (s5 / 4.0) * cell_irr
    gm = GeneratingMatrix(cell, particles)
    edge = 4.0 * math.sqrt(2.0)
    ref = regular_simplex_shape(4, edge=edge, name="regular_pentatope_4sqrt2")
    problem = PackingProblem(
        "polytope",
        dim=4,
        num_particles=4,
        shape=ref,
        phi_target=128.0 / 219.0,
    )
    return gm, problem


# ---------------------------------------------------------------------------
# verification oracle


@dataclass
class Certificate:
    ok: bool
    phi: float
    min_distance: float | None = None
    kissing: float | None = None
    max_delta2: float | None = None
    rigidity_residual: float | None = None
    messages: list[str] = field(default_factory=list)

    def summary(self) -> str:
        parts = [f"phi={self.phi:.9g}"]
        if self.min_distance is not None:
            parts.append(f"min_distance={self.min_distance:.9g}")
        if self.kissing is not None:
            parts.append(f"kissing={self.kissing:g}")
        if self.max_delta2 is not None:
            parts.append(f"max_delta2={self.max_delta2:.3g}")
        if self.rigidity_residual is not None:
            parts.append(f"rigidity_residual={self.rigidity_residual:.3g}")
        parts.append("PASS" if self.ok else "FAIL")
        out = " ".join(parts)
        for msg in self.messages:
            out += f"\n  ! {msg}"
        return out


DISTANCE_TOL = 1e-9
CONTACT_TOL = 1e-6
DELTA2_TOL = 1e-18
RIGIDITY_TOL = 1e-9
PHI_TOL = 1e-6


def _neighbour_pairs(gm: GeneratingMatrix, radius: float):
    """(j, k, offsets) with ||centroid_k + off @ cell - centroid_j|| <= radius."""
    centers = gm.centroids()
    for j in range(gm.num_particles):
        for k in range(j, gm.num_particles):
            offs = close_lattice_points(gm.cell, centers[j] - centers[k], radius)
            if j == k:
                nz = offs[np.any(offs != 0, axis=1)]
                lead = nz[np.arange(len(nz)), np.argmax(nz != 0, axis=1)]
                offs = nz[lead > 0]
            yield j, k, offs


def verify_packing(gm: GeneratingMatrix, problem: PackingProblem) -> Certificate:
    """Independent certificate: density, separations, contacts, rigidity."""
    sv = np.linalg.svd(gm.cell, compute_uv=False)
    if sv[-1] <= 1e-8 * sv[0]:
        raise DegenerateBasisError("cell generators are degenerate")
    det = gm.cell_volume()
    phi = problem.num_particles * problem.particle_volume / det
    cert = Certificate(ok=True, phi=phi)
    if problem.kind == "polytope":
        _verify_polytope(gm, problem, cert)
    else:
        _verify_spheres(gm, problem, cert)
    if problem.kind != "kissing" and problem.phi_target is not None:
        if phi < problem.phi_target - PHI_TOL:
            cert.ok = False
            cert.messages.append(
                f"phi {phi:.9g} below target {problem.phi_target:.9g}"
            )
    return cert


def _verify_spheres(gm: GeneratingMatrix, problem: PackingProblem, cert: Certificate):
    contact = problem.contact_distance()
    radius = 1.5 * contact
    centers = gm.centroids()
    min_dist = np.inf
    contacts = 0
    for j, k, offs in _neighbour_pairs(gm, radius):
        if len(offs) == 0:
            continue
        sep = centers[k] + offs @ gm.cell - centers[j]
        dist = np.sqrt(np.einsum("ij,ij->i", sep, sep))
        min_dist = min(min_dist, float(dist.min()))
        contacts += 2 * int(np.sum(np.abs(dist - contact) <= CONTACT_TOL * contact))
    cert.min_distance = None if np.isinf(min_dist) else min_dist
    cert.kissing = contacts / problem.num_particles
    if cert.min_distance is not None and cert.min_distance < contact - DISTANCE_TOL:
        cert.ok = False
        cert.messages.append(
            f"overlap: min distance {cert.min_distance:.12g} < {contact:.12g}"
        )
    if problem.kind == "kissing":
        if cert.kissing < problem.tau_target:
            cert.ok = False
            cert.messages.append(
                f"kissing {cert.kissing:g} below target {problem.tau_target}"
            )


def _verify_polytope(gm: GeneratingMatrix, problem: PackingProblem, cert: Certificate):
    shape_ref = problem.shape
    radius = 2.0 * shape_ref.circumradius * (1.0 + 1e-6)
    max_delta2 = 0.0
    for j, k, offs in _neighbour_pairs(gm, radius):
        for off in offs:
            shiftk = gm.particles[k] + off @ gm.cell
            d2, _ = overlap_measure(gm.particles[j], shiftk)
            max_delta2 = max(max_delta2, d2)
    cert.max_delta2 = max_delta2
    if max_delta2 > DELTA2_TOL:
        cert.ok = False
        cert.messages.append(f"interpenetration Delta^2 = {max_delta2:.3g}")
    ref_dm = shape_ref.distance_matrix()
    resid = 0.0
    for part in gm.particles:
        diff = part[:, None, :] - part[None, :, :]
        dm = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        resid = max(resid, float(np.max(np.abs(dm - ref_dm))))
    cert.rigidity_residual = resid
    if resid > RIGIDITY_TOL:
        cert.ok = False
        cert.messages.append(f"rigidity residual {resid:.3g}")


# ---------------------------------------------------------------------------
# lattice identification


@dataclass
class MatchReport:
    matches: bool
    phi: float
    phi_known: float
    fingerprint: list[float]
    fingerprint_known: list[float]

    def summary(self) -> str:
        verdict = "MATCH" if self.matches else "MISMATCH"
        return (
            f"phi={self.phi:.9g} vs known {self.phi_known:.9g}; "
            f"shells {len(self.fingerprint)} vs {len(self.fingerprint_known)}: {verdict}"
        )


def lattice_fingerprint(basis: np.ndarray, window: float = 2.5) -> list[float]:
    """Sorted squared norms (relative to the minimum) of lattice vectors
    within window * minimal distance: a scale/isometry-insensitive prefix
    of the theta series."""
    d = len(basis)
    guess = abs(np.linalg.det(basis)) ** (1.0 / d)
    radius = guess
    for _ in range(60):
        pts = close_lattice_points(basis, np.zeros(d), radius)
        if len(pts) > 1:
            break
        radius *= 1.5
    else:
        raise RuntimeError("failed to find a nonzero lattice vector")
    vecs = pts @ basis
    norms2 = np.einsum("ij,ij->i", vecs, vecs)
    min2 = np.min(norms2[norms2 > 1e-12 * norms2.max()])
    pts = close_lattice_points(basis, np.zeros(d), window * math.sqrt(min2))
    vecs = pts @ basis
    norms2 = np.einsum("ij,ij->i", vecs, vecs)
    norms2 = norms2[norms2 > 1e-9 * min2]
    return sorted((norms2 / min2).tolist())


def compare_to_known(gm: GeneratingMatrix, known: KnownLattice, window: float = 2.5):
    """Match a packing's lattice against a catalog lattice by density and
    theta-series prefix."""
    if gm.dim != known.dim:
        raise ValueError("dimension mismatch")
    det = gm.cell_volume()
    # packing radius of the solution lattice: half its minimal distance
    fp = lattice_fingerprint(gm.cell, window)
    fp_known = lattice_fingerprint(known.basis(), window)
    pts = close_lattice_points(gm.cell, np.zeros(gm.dim), det ** (1.0 / gm.dim) * 4.0)
    vecs = pts @ gm.cell
    norms2 = np.einsum("ij,ij->i", vecs, vecs)
    min2 = np.min(norms2[norms2 > 1e-12 * max(norms2.max(), 1.0)])
    phi = ball_volume(gm.dim, math.sqrt(min2) / 2.0) / det
    phi_ok = abs(phi - known.phi) <= 1e-6 * known.phi
    fp_ok = len(fp) == len(fp_known) and np.allclose(fp, fp_known, rtol=1e-6, atol=1e-6)
    return MatchReport(
        matches=bool(phi_ok and fp_ok),
        phi=phi,
        phi_known=known.phi,
        fingerprint=fp,
        fingerprint_known=fp_known,
    )
