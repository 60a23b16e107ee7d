"""The two distributed frame-localization laws and pose reconstruction.

Each agent carries a 4x4 auxiliary matrix that evolves by a consensus-type
law driven by its own body velocity, its relative-transform measurements,
and the auxiliary matrices communicated by neighbors:

  asymptotic law   dP_i = -hat6(twist_i) P_i + sum_j (T_ij P_j - P_i)
  finite-time law  dP_i = -hat6(twist_i) P_i
                          + sum_j (T_ij P_j - P_i) / ||T_ij P_j - P_i||_F^alpha

The pose estimate is reconstructed from P_i by orthonormalizing the 3x3
block (the result is the transposed rotation estimate) and mapping the
translation column through it. Both laws leave the bottom row of every
derivative exactly zero, so integration preserves the (0,0,0,1) row
bit-exactly under any linear one-step method.

RHS evaluation is a pure function per agent given a snapshot of neighbor
states; agents can be evaluated concurrently and results do not depend on
evaluation order (no accumulation is shared across agents).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import Topology
from .se3 import (
    AuxMatrix,
    DegenerateInputError,
    Pose,
    Rotation,
    Twist,
    gsop,
    gsop_two_column,
    hat6,
)

INIT_DET_FLOOR = 1e-6      # redraw threshold on |det Q_i(0)|
WELL_POSED_DET = 1e-9      # |det Q_c| above this => reconstruction well posed
DEFAULT_EPSILON = 1e-9     # guard radius replacing the exact consensus case


class MeasurementError(ValueError):
    """Measurements passed to an RHS do not cover the agent's neighbor set."""


@dataclass(frozen=True)
class Asymptotic:
    """Marker for the exponentially convergent law (directed graphs)."""


@dataclass(frozen=True)
class FiniteTime:
    """Finite-time law parameters.

    ``alpha`` is the norm exponent, required in (0, 1) for the law to stay
    continuous. ``epsilon`` is the guard radius below which a neighbor term
    is treated as already at consensus and zeroed; exact equality never
    occurs in floating point, and the discontinuity this introduces is
    bounded by epsilon^(1-alpha).
    """

    alpha: float = 0.5
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


Law = Asymptotic | FiniteTime


class ReconstructionMode(Enum):
    FULL_GSOP = "full"
    TWO_COLUMN_CROSS = "twocol"


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Auxiliary matrices of all agents plus the law they evolve under."""

    aux: tuple
    law: Law

    def __post_init__(self):
        object.__setattr__(self, "aux", tuple(self.aux))
        if not self.aux:
            raise ValueError("need at least one agent state")


@dataclass(frozen=True, eq=False)
class Measurement:
    """One agent's local data: its body twist and the relative transform
    to each neighbor, keyed by neighbor index."""

    twist: Twist
    rel: dict


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    """Reconstructed pose for one agent.

    ``body_position`` is the agent's own position expressed in its body
    frame (the negated translation column). When orthonormalization
    degenerates, ``valid`` is False and ``pose`` is an identity placeholder.
    """

    pose: Pose
    body_position: np.ndarray
    valid: bool = True


@dataclass(frozen=True, eq=False)
class WellPosednessReport:
    """Invertibility diagnostic for the weighted initial mix of rotation blocks."""

    mixed_block: np.ndarray
    det_magnitude: float
    well_posed: bool


def init_aux(n: int, rng_seed: int, law: Law = Asymptotic()) -> EstimatorState:
    """Random initial auxiliary matrices, deterministic under the seed.

    Each 3x3 block has independent uniform(-1, 1) entries, redrawn until its
    determinant magnitude clears 1e-6; translation columns are uniform(-1, 1).
    """
    if n < 1:
        raise ValueError("need at least one agent")
    rng = np.random.default_rng(rng_seed)
    aux = []
    for _ in range(n):
        q = rng.uniform(-1.0, 1.0, (3, 3))
        while abs(np.linalg.det(q)) < INIT_DET_FLOOR:
            q = rng.uniform(-1.0, 1.0, (3, 3))
        aux.append(AuxMatrix(q, rng.uniform(-1.0, 1.0, 3)))
    return EstimatorState(tuple(aux), law)


def _check_coverage(meas, topo: Topology):
    if len(meas) != topo.n:
        raise MeasurementError(f"got {len(meas)} measurements for {topo.n} agents")
    for i in range(1, topo.n + 1):
        want = set(topo.neighbors(i))
        got = set(meas[i - 1].rel)
        if got != want:
            raise MeasurementError(
                f"agent {i}: measured neighbors {sorted(got)} != topology {sorted(want)}"
            )


def asymptotic_rhs(state: EstimatorState, meas, topo: Topology) -> list:
    """Time derivative of every auxiliary matrix under the exponential law."""
    if not isinstance(state.law, Asymptotic):
        raise ValueError("state is not configured for the asymptotic law")
    _check_coverage(meas, topo)
    out = []
    for i in range(1, topo.n + 1):
        p_i = state.aux[i - 1].matrix
        d = -(hat6(meas[i - 1].twist) @ p_i)
        for j in topo.neighbors(i):
            d += meas[i - 1].rel[j].matrix @ state.aux[j - 1].matrix - p_i
        out.append(d)
    return out


def finite_time_rhs(state: EstimatorState, meas, topo: Topology) -> list:
    """Time derivative under the normalized law with the epsilon guard.

    Neighbor terms whose difference norm falls below epsilon contribute
    zero, matching the consensus case of the state-dependent weighting.
    """
    law = state.law
    if not isinstance(law, FiniteTime):
        raise ValueError("state is not configured for the finite-time law")
    if not 0.0 < law.alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {law.alpha}")
    if topo.directed:
        raise ValueError("finite-time law requires an undirected topology")
    _check_coverage(meas, topo)
    out = []
    for i in range(1, topo.n + 1):
        p_i = state.aux[i - 1].matrix
        d = -(hat6(meas[i - 1].twist) @ p_i)
        for j in topo.neighbors(i):
            diff = meas[i - 1].rel[j].matrix @ state.aux[j - 1].matrix - p_i
            norm = float(np.linalg.norm(diff))
            if norm >= law.epsilon:
                d += diff / norm**law.alpha
        out.append(d)
    return out


def reconstruct(
    state: EstimatorState,
    mode: ReconstructionMode = ReconstructionMode.TWO_COLUMN_CROSS,
) -> list:
    """Pose estimates from the auxiliary matrices.

    Orthonormalization yields the transposed rotation estimate; the position
    estimate is minus the rotated translation column. Degenerate blocks
    produce an identity-pose placeholder with ``valid`` False rather than an
    exception, since transient degeneracy is expected mid-run.
    """
    orth = gsop if mode is ReconstructionMode.FULL_GSOP else gsop_two_column
    out = []
    for a in state.aux:
        try:
            r_hat_t = orth(a.q_block)
        except DegenerateInputError:
            out.append(PoseEstimate(Pose.identity(), -a.q_vec, valid=False))
            continue
        r_hat = Rotation(r_hat_t.r.T)
        out.append(PoseEstimate(Pose(r_hat, -(r_hat.r @ a.q_vec)), -a.q_vec, valid=True))
    return out


def check_well_posedness(initial_truth, state: EstimatorState, w1) -> WellPosednessReport:
    """Diagnose whether reconstruction has a valid limit for this start.

    Forms the weighted combination of initial rotated blocks,
    sum_i w1_i * R_i(0) Q_i(0), and reports its determinant magnitude; the
    limit rotation exists exactly when this mix is nonsingular, which fails
    only on a measure-zero set of initializations.
    """
    w1 = np.asarray(w1, dtype=np.float64)
    if not (len(initial_truth) == len(state.aux) == w1.shape[0]):
        raise ValueError("length mismatch between poses, states, and weights")
    mixed = np.zeros((3, 3))
    for wi, pose, a in zip(w1, initial_truth, state.aux):
        mixed += wi * (pose.rotation.r @ a.q_block)
    det = abs(float(np.linalg.det(mixed)))
    return WellPosednessReport(mixed, det, det > WELL_POSED_DET)
