"""Difference-map search driver.

One iteration at beta = 1: with the concur estimate X_C = pi_C(X), the
divide estimate is X_D = pi_D(2 X_C - X); the iterate advances by their
difference and the error is the weighted distance between the two
estimates.  A fixed point (error -> 0) encodes a configuration satisfying
both constraints, read off from the concur estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .concur import ConcurResult, build_design, project_concur
from .configuration import (
    GeneratingMatrix,
    PackingProblem,
    PairTable,
    frobenius_w_distance,
    lift,
)
from .divide_polytopes import pair_overlap_measures, project_divide_polytope
from .divide_spheres import pair_distances, project_divide, project_divide_kissing
from .maintenance import (
    concur_pair_distances,
    default_cutoff,
    polytope_target_weights,
    reduce_and_recenter,
    refresh_replicas,
    sphere_target_weights,
    update_weights,
)


@dataclass
class Schedule:
    """Density targets and loop-control knobs for one search."""

    targets: list[float] = field(default_factory=list)  # phi stages, ascending
    max_iter: int = 5000
    eps_stop: float = 1e-10  # scale factor; see SearchState.eps_threshold
    stagnation_window: int = 500
    stagnation_tol: float = 0.01
    reduce_every: int = 100
    weight_relaxation: float = 50.0
    weight_alpha: float | None = None  # default 20 (spheres) / 10 (polytopes)
    cutoff: float | None = None
    allow_reflections: bool = False

    def validate(self, problem: PackingProblem):
        if problem.kind == "kissing":
            return
        if not self.targets:
            raise ValueError("packing schedules need at least one density target")
        if any(b <= a for a, b in zip(self.targets, self.targets[1:])):
            raise ValueError("density targets must be strictly increasing")
        if max(self.targets) > 1.0:
            raise ValueError("densities above 1 are not reachable")


def default_schedule(problem: PackingProblem, max_iter: int = 5000) -> Schedule:
    """Single stage below d = 10; one intermediate stage at 0.8 phi above."""
    if problem.kind == "kissing":
        return Schedule(targets=[], max_iter=max_iter)
    phi = problem.phi_target
    if phi is None:
        raise ValueError("problem has no phi_target")
    targets = [phi] if problem.dim < 10 else [0.8 * phi, phi]
    return Schedule(targets=targets, max_iter=max_iter)


@dataclass
class SearchState:
    problem: PackingProblem
    schedule: Schedule
    pairs: PairTable
    x: np.ndarray
    weights: np.ndarray
    rng_seed: int
    stage: int = 0
    iteration: int = 0
    epsilon: float = np.inf
    concur: ConcurResult | None = None
    best: ConcurResult | None = None
    best_epsilon: float = np.inf
    design: np.ndarray | None = None
    eps_history: list[float] = field(default_factory=list)
    cutoff_used: float = 0.0

    def v_target(self) -> float | None:
        if self.problem.kind == "kissing":
            return None
        return self.problem.volume_target(self.schedule.targets[self.stage])

    def contact_pairs(self) -> int:
        prob = self.problem
        total = prob.num_particles * prob.tau_target
        return (total + 1) // 2  # pairs count both directions: tau*p/2 pairs

    def eps_threshold(self) -> float:
        prob = self.problem
        scale = (
            2.0 * prob.shape.circumradius
            if prob.kind == "polytope"
            else prob.contact_distance()
        )
        return self.schedule.eps_stop * scale * max(1.0, np.sqrt(len(self.pairs)))


@dataclass
class StageRecord:
    target: float | None
    iterations: int
    epsilon: float


@dataclass
class SearchReport:
    converged: bool
    certified: bool
    status: str  # converged | iteration-cap | stagnated | aborted
    iterations: int
    seed: int
    epsilon: float
    gm: GeneratingMatrix | None
    certificate: object | None
    stages: list[StageRecord] = field(default_factory=list)
    mean_pairs: float = 0.0
    seconds_per_iteration: float = 0.0


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def initial_configuration(
    problem: PackingProblem, rng: np.random.Generator, v_target: float | None = None
):
    """Random start: a mildly skewed cell at twice the target volume with
    particles placed uniformly (random orientations for polytopes)."""
    d, p = problem.dim, problem.num_particles
    if problem.kind == "kissing":
        # no volume constraint exists; a cell of one contact-ball per
        # particle is a nondegenerate, neutral scale
        det_goal = p * problem.contact_distance() ** d
    else:
        det_goal = 2.0 * (v_target if v_target is not None else problem.volume_target())
    while True:
        skew = np.eye(d) + rng.uniform(-0.3, 0.3, size=(d, d))
        det = abs(np.linalg.det(skew))
        if det > 0.2:
            break
    cell = skew * (det_goal / det) ** (1.0 / d)
    frac = rng.uniform(0.0, 1.0, size=(p, d))
    centers = frac @ cell
    if problem.kind == "polytope":
        particles = np.empty((p,) + problem.shape.vertices.shape)
        for k in range(p):
            particles[k] = problem.shape.vertices @ random_rotation(rng, d) + centers[k]
    else:
        particles = centers[:, None, :]
    return GeneratingMatrix(cell, particles)


def _divide(state: SearchState, x: np.ndarray) -> np.ndarray:
    prob = state.problem
    if prob.kind == "sphere":
        return project_divide(x, prob.radius)
    if prob.kind == "kissing":
        return project_divide_kissing(x, prob.radius, state.contact_pairs())
    return project_divide_polytope(x)


def dm_step(state: SearchState) -> None:
    """One difference-map iteration (beta = 1) in place."""
    if state.design is None:
        state.design = build_design(state.pairs, state.problem.vertices_per_particle)
    res = project_concur(
        state.x,
        state.pairs,
        state.weights,
        state.problem,
        v_target=state.v_target(),
        design=state.design,
        allow_reflections=state.schedule.allow_reflections,
    )
    x_d = _divide(state, 2.0 * res.replicas - state.x)
    state.x = state.x + (x_d - res.replicas)
    state.epsilon = frobenius_w_distance(x_d, res.replicas, state.weights)
    state.concur = res
    state.iteration += 1
    if state.epsilon < state.best_epsilon:
        state.best_epsilon = state.epsilon
        state.best = res


def extract_solution(state: SearchState) -> ConcurResult:
    """The concur estimate at a fixed point; only valid once converged."""
    if state.concur is None or state.epsilon > state.eps_threshold():
        raise RuntimeError("search has not converged; no solution to extract")
    return state.concur


def _maintain(state: SearchState) -> None:
    prob = state.problem
    gm = state.concur.gm
    min_pairs = prob.dim * (prob.dim + 1) // 2 + prob.num_particles
    if prob.kind == "kissing":
        min_pairs = max(min_pairs, state.contact_pairs() + prob.dim)
    state.pairs, state.x, state.weights, state.cutoff_used = refresh_replicas(
        state.pairs,
        state.x,
        state.weights,
        gm,
        prob,
        cutoff=state.schedule.cutoff,
        min_pairs=min_pairs,
    )
    state.design = None
    distances = concur_pair_distances(state.pairs, gm)
    alpha = state.schedule.weight_alpha
    if prob.kind == "polytope":
        delta2 = pair_overlap_measures(lift(state.pairs, gm))
        target = polytope_target_weights(
            delta2, distances, prob.shape.inradius, 10.0 if alpha is None else alpha
        )
    else:
        target = sphere_target_weights(
            distances, prob.radius, prob.dim, 20.0 if alpha is None else alpha
        )
    state.weights = update_weights(state.weights, target, state.schedule.weight_relaxation)


def _needs_reduction(state: SearchState) -> bool:
    if state.schedule.reduce_every and state.iteration % state.schedule.reduce_every == 0:
        return True
    sv = np.linalg.svd(state.concur.gm.cell, compute_uv=False)
    return sv[-1] > 0 and sv[0] / sv[-1] > 1e3


def _reduce(state: SearchState) -> None:
    pairs, gm, changed = reduce_and_recenter(state.pairs, state.concur.gm)
    if changed:
        state.pairs = pairs
        state.design = None
        state.concur = ConcurResult(gm, lift(pairs, gm))


def _interpenetration(state: SearchState) -> float:
    """Fig-3 style observable: total squared overlap in the concur estimate."""
    prob = state.problem
    if prob.kind == "polytope":
        return float(np.sum(pair_overlap_measures(state.concur.replicas)))
    dist = pair_distances(state.concur.replicas)
    return float(np.sum(np.maximum(prob.contact_distance() - dist, 0.0) ** 2))


def _stagnated(state: SearchState) -> bool:
    window = state.schedule.stagnation_window
    hist = state.eps_history
    if window <= 0 or len(hist) < 2 * window:
        return False
    recent = min(hist[-window:])
    before = min(hist[:-window])
    return recent > (1.0 - state.schedule.stagnation_tol) * before


def run_search(
    problem: PackingProblem,
    schedule: Schedule | None = None,
    seed: int = 0,
    trace=None,
    verify=True,
) -> SearchReport:
    """Full search: random start, DM loop with maintenance, oracle check.

    trace, when given, is called once per iteration with a dict of the
    observables (iter, epsilon2, sum_delta2, det, phi_C).
    """
    from . import catalog  # local import: catalog pulls no driver code

    if schedule is None:
        schedule = default_schedule(problem)
    schedule.validate(problem)
    rng = np.random.default_rng(seed)
    v0 = (
        None
        if problem.kind == "kissing"
        else problem.volume_target(schedule.targets[0])
    )
    gm0 = initial_configuration(problem, rng, v_target=v0)
    pairs = PairTable(
        np.zeros((0, problem.dim)), np.zeros((0, problem.dim)), [], [],
        problem.num_particles,
    )
    state = SearchState(
        problem=problem,
        schedule=schedule,
        pairs=pairs,
        x=np.zeros((0, problem.vertices_per_particle, problem.dim)),
        weights=np.zeros(0),
        rng_seed=seed,
    )
    state.concur = ConcurResult(gm0, state.x)
    _maintain_initial(state, gm0)
    stages: list[StageRecord] = []
    stage_start = 0
    pair_counts = 0
    status = "iteration-cap"
    t0 = time.perf_counter()
    while state.iteration < schedule.max_iter:
        dm_step(state)
        pair_counts += len(state.pairs)
        state.eps_history.append(state.epsilon)
        if trace is not None:
            gm = state.concur.gm
            det = float(np.linalg.det(gm.cell))
            phi = (
                problem.num_particles * problem.particle_volume / abs(det)
                if det != 0.0
                else np.inf
            )
            trace(
                {
                    "iter": state.iteration,
                    "epsilon2": state.epsilon**2,
                    "sum_delta2": _interpenetration(state),
                    "det": det,
                    "phi_C": phi,
                }
            )
        if state.epsilon <= state.eps_threshold():
            target = (
                schedule.targets[state.stage] if problem.kind != "kissing" else None
            )
            stages.append(
                StageRecord(target, state.iteration - stage_start, state.epsilon)
            )
            last_stage = problem.kind == "kissing" or state.stage == len(schedule.targets) - 1
            if last_stage:
                status = "converged"
                break
            state.stage += 1
            stage_start = state.iteration
            state.eps_history.clear()
            continue
        if _stagnated(state):
            status = "stagnated"
            break
        _maintain(state)
        if _needs_reduction(state):
            _reduce(state)
    elapsed = time.perf_counter() - t0
    iters = max(state.iteration, 1)
    report = SearchReport(
        converged=status == "converged",
        certified=False,
        status=status,
        iterations=state.iteration,
        seed=seed,
        epsilon=state.epsilon,
        gm=None,
        certificate=None,
        stages=stages,
        mean_pairs=pair_counts / iters,
        seconds_per_iteration=elapsed / iters,
    )
    if status == "converged":
        solution = extract_solution(state)
        report.gm = solution.gm
        if verify:
            cert = catalog.verify_packing(solution.gm, problem)
            report.certificate = cert
            report.certified = bool(cert.ok)
        else:
            report.certified = True
    elif state.best is not None:
        report.gm = state.best.gm
    return report


def _maintain_initial(state: SearchState, gm0: GeneratingMatrix) -> None:
    """Build the initial pair set and iterate from the random start."""
    prob = state.problem
    min_pairs = prob.dim * (prob.dim + 1) // 2 + prob.num_particles
    if prob.kind == "kissing":
        min_pairs = max(min_pairs, state.contact_pairs() + prob.dim)
    state.pairs, state.x, state.weights, state.cutoff_used = refresh_replicas(
        state.pairs, state.x, state.weights, gm0, prob,
        cutoff=state.schedule.cutoff, min_pairs=min_pairs,
    )
    state.design = None
    state.concur = ConcurResult(gm0, state.x.copy())
