"""Ground-truth propagation, fixed-step integration, and oracle checks.

A run advances the true poses by the exact exponential of their constant
body twists (so truth never leaves SE(3)) and integrates the estimator
matrices with classical RK4 on the raw 4x4 ODE, evaluating the relative
transforms at the exact stage times. Alongside the trace, a run computes
an oracle report from the initial data alone: the consensus weights, the
predicted consensus state and transform bias, and (for the finite-time
law) the Lyapunov-based settling bound.

The inner loop works on stacked (n, 4, 4) arrays for speed; it performs
the same per-agent update as the public RHS operations in
``framelocal.estimators`` (the test suite pins the two against each other).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .estimators import (
    Asymptotic,
    EstimatorState,
    FiniteTime,
    Law,
    Measurement,
    ReconstructionMode,
    init_aux,
    reconstruct,
)
from .graphs import Topology, analyze, build_laplacian, has_spanning_tree, is_connected_undirected
from .se3 import AuxMatrix, Pose, Rotation, Twist, compose, exp_se3, gsop, hat6, relative_transform

SETTLED_V = 1e-10          # a sample counts as settled when V drops below this
WELL_POSED_DET = 1e-9
LYAP_FLOOR = 1e-12         # samples with V below this are excluded from the chain check


class ConfigurationError(ValueError):
    """A scenario violates a precondition of the requested law."""


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to reproduce one run."""

    topo: Topology
    initial_poses: tuple
    twists: tuple
    law: Law
    dt: float
    t_end: float
    seed: int
    stride: int = 10
    reconstruction: ReconstructionMode = ReconstructionMode.TWO_COLUMN_CROSS

    def __post_init__(self):
        object.__setattr__(self, "initial_poses", tuple(self.initial_poses))
        object.__setattr__(self, "twists", tuple(self.twists))
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end must be at least dt, got {self.t_end}")
        if len(self.initial_poses) != self.topo.n or len(self.twists) != self.topo.n:
            raise ValueError(
                f"need {self.topo.n} poses and twists, got "
                f"{len(self.initial_poses)} / {len(self.twists)}"
            )
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"stride must be a positive integer, got {self.stride}")
        if int(self.seed) != self.seed:
            raise ValueError(f"seed must be an integer, got {self.seed}")

    @property
    def n_steps(self) -> int:
        # the small slack keeps 10 / 1e-3 from rounding down to 9999
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass(frozen=True, eq=False)
class Trace:
    """Sampled run history: truth, estimator state, estimates, and errors.

    ``aligned`` holds the world-frame products T_i P_i whose consensus the
    laws drive; ``orientation_errors`` and ``position_errors`` are the
    per-agent / per-link deviations from the predicted transform bias, NaN
    where reconstruction was invalid or the bias is undefined.
    """

    times: np.ndarray            # (k,)
    truth: np.ndarray            # (k, n, 4, 4)
    aux: np.ndarray              # (k, n, 4, 4)
    aligned: np.ndarray          # (k, n, 4, 4)
    estimates: np.ndarray        # (k, n, 4, 4) pose matrices
    estimate_valid: np.ndarray   # (k, n) bool
    body_positions: np.ndarray   # (k, n, 3)
    orientation_errors: np.ndarray  # (k, n)
    position_errors: np.ndarray     # (k, e)
    error_edges: tuple           # e pairs (i, j), i < j, 1-based
    lyapunov: np.ndarray         # (k,)
    law: Law
    dt: float
    stride: int


@dataclass(frozen=True, eq=False)
class OracleReport:
    """Predictions computable from the initial data alone."""

    w1: np.ndarray                    # consensus weights, sum 1
    consensus_state: np.ndarray       # (4, 4) weighted mix of initial aligned states
    transform_bias: Pose | None       # common bias the estimates converge to (None if ill-posed)
    lambda2: float | None             # spectral gap, undirected runs only
    settling_bound: float | None      # finite-time bound 2 V0^(a/2) / (kappa a)
    settling_bound_optimistic: float | None   # half of the above
    v0: float

    @property
    def consensus_block(self) -> np.ndarray:
        return self.consensus_state[:3, :3]

    @property
    def consensus_translation(self) -> np.ndarray:
        return self.consensus_state[:3, 3]


@dataclass(frozen=True, eq=False)
class MetricRecord:
    """Per-agent orientation errors and per-link position errors.

    Agents whose reconstruction is invalid are absent from the dicts (never
    reported as zero); the maxima are NaN when nothing was measurable.
    """

    orientation: dict
    position: dict
    max_orientation: float
    max_position: float


@dataclass(frozen=True, eq=False)
class LyapunovCheck:
    """Sample-wise verdicts for the decay inequality dV/dt <= -kappa V^((2-a)/2)."""

    times: np.ndarray
    checked: np.ndarray
    passed: np.ndarray
    fraction_passed: float
    kappa: float

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed[self.checked])) if self.checked.any() else True


def propagate_truth(pose: Pose, twist: Twist, dt: float) -> Pose:
    """Exact pose advance under a constant body twist."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return compose(pose, exp_se3(twist, dt))


def synthesize_measurements(truth, twists, topo: Topology) -> list:
    """Noiseless measurements: own twist plus relative transforms to neighbors."""
    if len(truth) != topo.n or len(twists) != topo.n:
        raise ValueError(f"need {topo.n} poses and twists")
    out = []
    for i in range(1, topo.n + 1):
        rel = {
            j: relative_transform(truth[i - 1], truth[j - 1])
            for j in topo.neighbors(i)
        }
        out.append(Measurement(twists[i - 1], rel))
    return out


def error_metrics(truth, estimates, r_c: Rotation, topo: Topology) -> MetricRecord:
    """Deviation of the estimates from truth up to the common bias.

    Orientation: ||R_i Rhat_i^T - R_c||_F per agent. Position: for each
    measured link, the true displacement minus the bias-rotated estimated
    displacement. Links are deduplicated to unordered pairs.
    """
    if len(truth) != len(estimates) or len(truth) != topo.n:
        raise ValueError("length mismatch between truth, estimates, and topology")
    orient = {}
    for i, (pose, est) in enumerate(zip(truth, estimates), start=1):
        if not est.valid:
            continue
        orient[i] = float(
            np.linalg.norm(pose.rotation.r @ est.pose.rotation.r.T - r_c.r)
        )
    pos = {}
    for i, j in error_link_pairs(topo):
        ei, ej = estimates[i - 1], estimates[j - 1]
        if not (ei.valid and ej.valid):
            continue
        true_disp = truth[j - 1].translation - truth[i - 1].translation
        est_disp = ej.pose.translation - ei.pose.translation
        pos[(i, j)] = float(np.linalg.norm(true_disp - r_c.r @ est_disp))
    return MetricRecord(
        orientation=orient,
        position=pos,
        max_orientation=max(orient.values(), default=float("nan")),
        max_position=max(pos.values(), default=float("nan")),
    )


def error_link_pairs(topo: Topology) -> tuple:
    """Measured links as unordered pairs (i, j) with i < j, ascending."""
    return tuple(sorted({(min(i, j), max(i, j)) for i, j in topo.edges}))


def _initial_stacks(s: Scenario, initial_state: EstimatorState | None = None):
    """Initial truth and estimator stacks shared by run() and the oracles."""
    t0 = np.stack([p.matrix for p in s.initial_poses])
    if initial_state is None:
        initial_state = init_aux(s.topo.n, s.seed, s.law)
    elif len(initial_state.aux) != s.topo.n:
        raise ValueError(f"initial state has {len(initial_state.aux)} agents, expected {s.topo.n}")
    p0 = np.stack([a.matrix for a in initial_state.aux])
    return t0, p0


def _check_preconditions(s: Scenario):
    if isinstance(s.law, Asymptotic):
        if not has_spanning_tree(s.topo):
            raise ConfigurationError(
                "asymptotic law requires an interaction graph with a spanning tree"
            )
    elif isinstance(s.law, FiniteTime):
        if not is_connected_undirected(s.topo):
            raise ConfigurationError(
                "finite-time law requires a connected undirected interaction graph"
            )
    else:
        raise ConfigurationError(f"unknown law {s.law!r}")


def oracle_report(s: Scenario, initial_state: EstimatorState | None = None) -> OracleReport:
    """Predictions from the initial data: weights, consensus state, bias, bounds."""
    _check_preconditions(s)
    spectral = analyze(s.topo)
    w1 = spectral.w1
    t0, p0 = _initial_stacks(s, initial_state)
    aligned0 = t0 @ p0
    s_c = np.einsum("n,nij->ij", w1, aligned0)
    det = abs(float(np.linalg.det(s_c[:3, :3])))
    bias = None
    if det > WELL_POSED_DET:
        bias = Pose(gsop(s_c[:3, :3]), s_c[:3, 3])
    v0 = 0.5 * float(np.sum((aligned0 - s_c) ** 2))
    bound = optimistic = None
    if isinstance(s.law, FiniteTime) and spectral.lambda2 is not None:
        kappa = (2.0 * spectral.lambda2) ** ((2.0 - s.law.alpha) / 2.0)
        bound = 2.0 * v0 ** (s.law.alpha / 2.0) / (kappa * s.law.alpha)
        optimistic = bound / 2.0
    return OracleReport(
        w1=w1,
        consensus_state=s_c,
        transform_bias=bias,
        lambda2=spectral.lambda2,
        settling_bound=bound,
        settling_bound_optimistic=optimistic,
        v0=v0,
    )


def _make_rhs(s: Scenario):
    """Stacked-array RHS over (n, 4, 4) truth and estimator states."""
    if s.topo.edges:
        src = np.array([i - 1 for i, _ in s.topo.edges])
        dst = np.array([j - 1 for _, j in s.topo.edges])
    else:
        src = dst = np.zeros(0, dtype=int)
    xi = np.stack([hat6(tw) for tw in s.twists])
    finite = isinstance(s.law, FiniteTime)
    alpha = s.law.alpha if finite else 0.0
    eps = s.law.epsilon if finite else 0.0

    def rhs(tt, pp):
        rt = tt[:, :3, :3].transpose(0, 2, 1)
        tinv = np.zeros_like(tt)
        tinv[:, 3, 3] = 1.0
        tinv[:, :3, :3] = rt
        tinv[:, :3, 3] = -np.einsum("nij,nj->ni", rt, tt[:, :3, 3])
        dp = -(xi @ pp)
        if len(src):
            diff = tinv[src] @ (tt[dst] @ pp[dst]) - pp[src]
            if finite:
                norms = np.sqrt(np.einsum("eij,eij->e", diff, diff))
                w = np.zeros(len(norms))
                live = norms >= eps
                w[live] = norms[live] ** -alpha
                diff = diff * w[:, None, None]
            np.add.at(dp, src, diff)
        return dp

    return rhs


def run(s: Scenario, initial_state: EstimatorState | None = None) -> tuple:
    """Integrate truth and estimators together; return (Trace, OracleReport).

    ``initial_state`` replaces the seeded random estimator initialization
    when given (a harness-level knob; the laws themselves stay local).
    """
    report = oracle_report(s, initial_state)
    n = s.topo.n
    links = error_link_pairs(s.topo)
    t_stack, p_stack = _initial_stacks(s, initial_state)
    rhs = _make_rhs(s)
    e_half = np.stack([exp_se3(tw, s.dt / 2.0).matrix for tw in s.twists])
    e_full = np.stack([exp_se3(tw, s.dt).matrix for tw in s.twists])

    n_steps = s.n_steps
    k_samples = n_steps // s.stride + 1
    times = np.zeros(k_samples)
    truth = np.zeros((k_samples, n, 4, 4))
    aux = np.zeros((k_samples, n, 4, 4))
    aligned = np.zeros((k_samples, n, 4, 4))
    estimates = np.zeros((k_samples, n, 4, 4))
    est_valid = np.zeros((k_samples, n), dtype=bool)
    body_pos = np.zeros((k_samples, n, 3))
    orient_err = np.full((k_samples, n), np.nan)
    pos_err = np.full((k_samples, len(links)), np.nan)
    lyap = np.zeros(k_samples)

    def record(k: int, step: int, tt: np.ndarray, pp: np.ndarray):
        times[k] = step * s.dt
        truth[k] = tt
        aux[k] = pp
        ali = tt @ pp
        aligned[k] = ali
        lyap[k] = 0.5 * float(np.sum((ali - report.consensus_state) ** 2))
        state = EstimatorState(
            tuple(AuxMatrix(pp[i, :3, :3], pp[i, :3, 3]) for i in range(n)), s.law
        )
        ests = reconstruct(state, s.reconstruction)
        for i, est in enumerate(ests):
            estimates[k, i] = est.pose.matrix
            est_valid[k, i] = est.valid
            body_pos[k, i] = est.body_position
        if report.transform_bias is not None:
            poses = [Pose.from_matrix(tt[i]) for i in range(n)]
            rec = error_metrics(poses, ests, report.transform_bias.rotation, s.topo)
            for i in range(1, n + 1):
                if i in rec.orientation:
                    orient_err[k, i - 1] = rec.orientation[i]
            for e, pair in enumerate(links):
                if pair in rec.position:
                    pos_err[k, e] = rec.position[pair]

    record(0, 0, t_stack, p_stack)
    half = s.dt / 2.0
    sixth = s.dt / 6.0
    for step in range(1, n_steps + 1):
        t_mid = t_stack @ e_half
        t_next = t_stack @ e_full
        k1 = rhs(t_stack, p_stack)
        k2 = rhs(t_mid, p_stack + half * k1)
        k3 = rhs(t_mid, p_stack + half * k2)
        k4 = rhs(t_next, p_stack + s.dt * k3)
        p_stack = p_stack + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_stack = t_next
        if step % s.stride == 0:
            record(step // s.stride, step, t_stack, p_stack)

    trace = Trace(
        times=times,
        truth=truth,
        aux=aux,
        aligned=aligned,
        estimates=estimates,
        estimate_valid=est_valid,
        body_positions=body_pos,
        orientation_errors=orient_err,
        position_errors=pos_err,
        error_edges=links,
        lyapunov=lyap,
        law=s.law,
        dt=s.dt,
        stride=s.stride,
    )
    return trace, report


def closed_form_aligned(s: Scenario, t: float, initial_state: EstimatorState | None = None) -> list:
    """Exact aligned states at time t for the asymptotic law.

    The aligned states obey a constant-coefficient linear consensus flow,
    so the solution is the matrix exponential of the scaled Laplacian
    applied to the stacked initial aligned states. Serves as the
    independent oracle for simulated trajectories.
    """
    if not isinstance(s.law, Asymptotic):
        raise ValueError("closed form applies to the asymptotic law only")
    lap = build_laplacian(s.topo)
    t0, p0 = _initial_stacks(s, initial_state)
    stacked = (t0 @ p0).reshape(4 * s.topo.n, 4)
    flow = scipy.linalg.expm(-np.kron(lap, np.eye(4)) * t)
    out = flow @ stacked
    return [out[4 * i : 4 * i + 4] for i in range(s.topo.n)]


def lyapunov_chain_check(trace: Trace, lambda2: float, alpha: float) -> LyapunovCheck:
    """Verify the sampled decay inequality dV/dt <= -kappa V^((2-a)/2).

    dV/dt is estimated by central differences at interior samples; samples
    with V below 1e-12 are excluded (already settled). The tolerance is
    1e-3 * max(1, |dV/dt|) per sample.
    """
    if not isinstance(trace.law, FiniteTime):
        raise ValueError("chain check applies to finite-time traces only")
    v = trace.lyapunov
    if len(v) < 3:
        raise ValueError("need at least three samples for central differences")
    h = trace.dt * trace.stride
    kappa = (2.0 * lambda2) ** ((2.0 - alpha) / 2.0)
    vdot = (v[2:] - v[:-2]) / (2.0 * h)
    v_in = v[1:-1]
    checked = v_in > LYAP_FLOOR
    bound = -kappa * v_in ** ((2.0 - alpha) / 2.0)
    tol = 1e-3 * np.maximum(1.0, np.abs(vdot))
    passed = vdot <= bound + tol
    fraction = float(passed[checked].mean()) if checked.any() else 1.0
    return LyapunovCheck(
        times=trace.times[1:-1],
        checked=checked,
        passed=passed,
        fraction_passed=fraction,
        kappa=kappa,
    )


def settling_time(trace: Trace) -> float | None:
    """First sampled time with V below the settled threshold, if any."""
    idx = np.nonzero(trace.lyapunov < SETTLED_V)[0]
    return float(trace.times[idx[0]]) if len(idx) else None
