"""Bundled demonstration scenarios.

Four agents on screw trajectories: three spin about different body axes
while translating, the fourth translates without rotating. The directed
variant runs the asymptotic law on a ring-with-chord digraph; the
undirected variant runs the finite-time law on a square. Initial
orientations are reproducible: each is the orthonormalization of a seeded
random matrix.
"""

from __future__ import annotations

import numpy as np

from .estimators import Asymptotic, FiniteTime, Law, ReconstructionMode
from .graphs import Topology
from .se3 import DegenerateInputError, Pose, Twist, gsop
from .simulation import Scenario

DEMO_POSITIONS = (
    (0.0, 0.0, 0.0),
    (4.0, 0.0, 0.0),
    (0.0, 0.0, 4.0),
    (0.0, 4.0, 0.0),
)
DEMO_ANGULAR = (
    (0.3, 0.0, 0.0),
    (0.0, 0.3, 0.0),
    (0.0, 0.0, 0.3),
    (0.0, 0.0, 0.0),
)
DEMO_LINEAR = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0),
)

DEMO_ROTATION_SEED = 2357


def directed_demo_topology() -> Topology:
    """Ring 2<-3<-4<-2 feeding agent 1; an edge (i, j) means i receives from j."""
    return Topology(4, ((1, 2), (2, 3), (3, 4), (4, 2)), directed=True)


def square_demo_topology() -> Topology:
    """Undirected 4-cycle 1-2-3-4-1."""
    return Topology.undirected(4, ((1, 2), (2, 3), (3, 4), (4, 1)))


def seeded_rotations(n: int, seed: int) -> tuple:
    """Reproducible random rotations: orthonormalized uniform(-1, 1) matrices."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        try:
            out.append(gsop(rng.uniform(-1.0, 1.0, (3, 3))))
        except DegenerateInputError:
            continue
    return tuple(out)


def demo_agents(rotation_seed: int = DEMO_ROTATION_SEED) -> tuple:
    """(poses, twists) of the four demo agents."""
    rotations = seeded_rotations(4, rotation_seed)
    poses = tuple(
        Pose(r, np.array(p)) for r, p in zip(rotations, DEMO_POSITIONS)
    )
    twists = tuple(
        Twist(np.array(v), np.array(w)) for v, w in zip(DEMO_LINEAR, DEMO_ANGULAR)
    )
    return poses, twists


def demo_scenario(
    law: Law | None = None,
    seed: int = 7,
    dt: float = 1e-3,
    t_end: float | None = None,
    stride: int = 10,
    reconstruction: ReconstructionMode = ReconstructionMode.TWO_COLUMN_CROSS,
    rotation_seed: int = DEMO_ROTATION_SEED,
) -> Scenario:
    """The bundled four-agent scenario under either law.

    Defaults to the asymptotic law on the directed topology with a 10 s
    horizon; a FiniteTime law switches to the undirected square with a 6 s
    horizon (comfortably past the settling bound for typical seeds).
    """
    if law is None:
        law = Asymptotic()
    if isinstance(law, FiniteTime):
        topo = square_demo_topology()
        horizon = 6.0 if t_end is None else t_end
    else:
        topo = directed_demo_topology()
        horizon = 10.0 if t_end is None else t_end
    poses, twists = demo_agents(rotation_seed)
    return Scenario(
        topo=topo,
        initial_poses=poses,
        twists=twists,
        law=law,
        dt=dt,
        t_end=horizon,
        seed=seed,
        stride=stride,
        reconstruction=reconstruction,
    )
