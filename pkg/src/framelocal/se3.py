"""Rigid-body arithmetic on SO(3)/SE(3).

Rotations, poses (4x4 homogeneous transforms), body-frame twists, the
hat/vee maps, the closed-form SE(3) exponential, and Gram-Schmidt
orthonormalization with a determinant-sign fix so the result is always a
proper rotation.

All values are immutable after construction and every operation is a pure
function of its inputs, so everything here is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROTATION_TOL = 1e-9       # Frobenius tolerance on R^T R - I and det(R) - 1
SKEW_TOL = 1e-9           # tolerance for accepting a matrix as skew / zero-row
GS_RANK_TOL = 1e-10       # Gram-Schmidt pivot threshold on ||v_k||


class DegenerateInputError(ValueError):
    """Gram-Schmidt hit a (numerically) dependent column.

    ``index`` is the 1-based column whose orthogonalized residual vanished.
    """

    def __init__(self, index: int, norm: float):
        self.index = index
        self.norm = norm
        super().__init__(
            f"column {index} is linearly dependent (residual norm {norm:.3e})"
        )


def _freeze(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Rotation:
    """A proper rotation matrix (orthogonal, determinant +1)."""

    r: np.ndarray

    def __post_init__(self):
        r = _freeze(self.r)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        ortho = np.linalg.norm(r.T @ r - np.eye(3))
        if ortho > ROTATION_TOL:
            raise ValueError(f"not orthonormal: ||R^T R - I||_F = {ortho:.3e}")
        det = np.linalg.det(r)
        if abs(det - 1.0) > ROTATION_TOL:
            raise ValueError(f"not a proper rotation: det = {det:.12f}")
        object.__setattr__(self, "r", r)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))


@dataclass(frozen=True, eq=False)
class Pose:
    """A rigid-body transform: rotation plus translation."""

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        t = _freeze(self.translation)
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {t.shape}")
        object.__setattr__(self, "translation", t)

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix [R p; 0 1]."""
        m = np.eye(4)
        m[:3, :3] = self.rotation.r
        m[:3, 3] = self.translation
        return m

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > SKEW_TOL:
            raise ValueError(f"bottom row must be (0,0,0,1), got {m[3]}")
        return cls(Rotation(m[:3, :3]), m[:3, 3])


@dataclass(frozen=True, eq=False)
class Twist:
    """Body-frame velocity: linear part and angular part."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        v = _freeze(self.linear)
        w = _freeze(self.angular)
        if v.shape != (3,) or w.shape != (3,):
            raise ValueError("twist parts must be 3-vectors")
        object.__setattr__(self, "linear", v)
        object.__setattr__(self, "angular", w)

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class AuxMatrix:
    """Per-agent 4x4 estimator state [Q q; 0 1].

    The 3x3 block must be nonsingular when an estimator is initialized
    (``init_aux`` guarantees it); during evolution the determinant may cross
    zero transiently, so nonsingularity is deliberately not enforced here.
    """

    q_block: np.ndarray
    q_vec: np.ndarray

    def __post_init__(self):
        q = _freeze(self.q_block)
        v = _freeze(self.q_vec)
        if q.shape != (3, 3):
            raise ValueError(f"q_block must be 3x3, got {q.shape}")
        if v.shape != (3,):
            raise ValueError(f"q_vec must be a 3-vector, got {v.shape}")
        object.__setattr__(self, "q_block", q)
        object.__setattr__(self, "q_vec", v)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.q_block
        m[:3, 3] = self.q_vec
        return m

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "AuxMatrix":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > SKEW_TOL:
            raise ValueError(f"bottom row must be (0,0,0,1), got {m[3]}")
        return cls(m[:3, :3], m[:3, 3])


def hat3(w) -> np.ndarray:
    """3-vector -> skew-symmetric matrix, so that hat3(w) @ x == cross(w, x)."""
    w = np.asarray(w, dtype=np.float64)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def vee3(m: np.ndarray) -> np.ndarray:
    """Inverse of hat3. Rejects inputs that are not skew within tolerance."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got {m.shape}")
    if np.max(np.abs(m + m.T)) > SKEW_TOL:
        raise ValueError("matrix is not skew-symmetric")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def hat6(t: Twist) -> np.ndarray:
    """Twist -> 4x4 generator [hat3(angular) linear; 0 0]."""
    m = np.zeros((4, 4))
    m[:3, :3] = hat3(t.angular)
    m[:3, 3] = t.linear
    return m


def vee6(m: np.ndarray) -> Twist:
    """Inverse of hat6. Rejects matrices whose bottom row is not zero."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (4, 4):
        raise ValueError(f"expected 4x4 matrix, got {m.shape}")
    if np.max(np.abs(m[3])) > SKEW_TOL:
        raise ValueError(f"bottom row must be zero, got {m[3]}")
    return Twist(m[:3, 3].copy(), vee3(m[:3, :3]))


# Below this angle the Rodrigues coefficients switch to their Taylor series;
# sin(x)/x style ratios lose accuracy near zero.
_SMALL_ANGLE = 1e-6


def exp_se3(t: Twist, dt: float) -> Pose:
    """Closed-form exponential of dt * hat6(t).

    Rodrigues formula for the rotation block and the analytic integral
    matrix for the translation; a series expansion takes over when the
    rotation angle ||angular|| * dt is below 1e-6.
    """
    phi = np.asarray(t.angular, dtype=np.float64) * dt
    rho = np.asarray(t.linear, dtype=np.float64) * dt
    theta = float(np.linalg.norm(phi))
    k = hat3(phi)
    k2 = k @ k
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
        c = (theta - np.sin(theta)) / (theta * theta * theta)
    rot = np.eye(3) + a * k + b * k2
    v = np.eye(3) + b * k + c * k2
    return Pose(Rotation(rot), v @ rho)


def compose(a: Pose, b: Pose) -> Pose:
    """Pose product a * b."""
    return Pose(
        Rotation(a.rotation.r @ b.rotation.r),
        a.rotation.r @ b.translation + a.translation,
    )


def inverse(a: Pose) -> Pose:
    """Pose inverse (R^T, -R^T p)."""
    rt = a.rotation.r.T
    return Pose(Rotation(rt), -(rt @ a.translation))


def relative_transform(t_i: Pose, t_j: Pose) -> Pose:
    """Transform of frame j expressed in frame i: (R_i^T R_j, R_i^T (p_j - p_i))."""
    rt = t_i.rotation.r.T
    return Pose(
        Rotation(rt @ t_j.rotation.r),
        rt @ (t_j.translation - t_i.translation),
    )


def gsop(m: np.ndarray) -> Rotation:
    """Gram-Schmidt orthonormalization of the columns with a sign fix.

    The first two columns are orthonormalized in order; the last unit vector
    is scaled by the sign that makes the determinant +1, so the output is a
    proper rotation whenever all three columns are independent.

    Raises DegenerateInputError (with the 1-based column index) when an
    orthogonalized residual falls below the rank threshold.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got {m.shape}")
    q = np.zeros((3, 3))
    for k in range(3):
        v = m[:, k].copy()
        for prev in range(k):
            v -= (m[:, k] @ q[:, prev]) * q[:, prev]
        norm = float(np.linalg.norm(v))
        if norm <= GS_RANK_TOL:
            raise DegenerateInputError(k + 1, norm)
        q[:, k] = v / norm
    if np.linalg.det(q) < 0.0:
        q[:, 2] = -q[:, 2]
    return Rotation(q)


def gsop_two_column(m: np.ndarray) -> Rotation:
    """Orthonormalize the first two columns; the third is their cross product.

    Well-defined whenever the first two columns are independent, regardless
    of the third column, and always yields determinant +1 by construction.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got {m.shape}")
    v1 = m[:, 0].copy()
    n1 = float(np.linalg.norm(v1))
    if n1 <= GS_RANK_TOL:
        raise DegenerateInputError(1, n1)
    q1 = v1 / n1
    v2 = m[:, 1] - (m[:, 1] @ q1) * q1
    n2 = float(np.linalg.norm(v2))
    if n2 <= GS_RANK_TOL:
        raise DegenerateInputError(2, n2)
    q2 = v2 / n2
    return Rotation(np.column_stack([q1, q2, np.cross(q1, q2)]))


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(tr((a-b)^T (a-b))) for same-shaped matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))
