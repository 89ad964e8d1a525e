"""Rotation helpers: 6D codes, heading factoring, axis rotations.

Conventions: gravity is +z, the canonical forward direction is +y, and
matrices act on column vectors.
"""

import warnings

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import Degenerate6DError, GimbalWarning, InvalidRotationError

ROT_TOL = 1e-4
_DEGENERATE_EPS = 1e-8


def rot_x(theta):
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    one, zero = np.ones_like(c), np.zeros_like(c)
    return np.stack(
        [np.stack([one, zero, zero], -1),
         np.stack([zero, c, -s], -1),
         np.stack([zero, s, c], -1)], -2)


def rot_y(theta):
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    one, zero = np.ones_like(c), np.zeros_like(c)
    return np.stack(
        [np.stack([c, zero, s], -1),
         np.stack([zero, one, zero], -1),
         np.stack([-s, zero, c], -1)], -2)


def rot_z(theta):
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    one, zero = np.ones_like(c), np.zeros_like(c)
    return np.stack(
        [np.stack([c, -s, zero], -1),
         np.stack([s, c, zero], -1),
         np.stack([zero, zero, one], -1)], -2)


def check_rotations(R, tol=ROT_TOL, what="rotation"):
    """Raise InvalidRotationError unless every matrix in ``R`` is in SO(3)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (3, 3):
        raise InvalidRotationError(f"{what}: expected (..., 3, 3), got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise InvalidRotationError(f"{what}: non-finite entries")
    det = np.linalg.det(R)
    if np.any(np.abs(det - 1.0) > tol):
        worst = float(np.max(np.abs(det - 1.0)))
        raise InvalidRotationError(f"{what}: determinant deviates from 1 by {worst:.3g}")
    gram = np.swapaxes(R, -1, -2) @ R
    if np.any(np.abs(gram - np.eye(3)) > tol):
        raise InvalidRotationError(f"{what}: matrix is not orthonormal")
    return R


def rotmat_to_6d(R):
    """First two columns of ``R``, concatenated column-major: (..., 6)."""
    R = np.asarray(R, dtype=np.float64)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def sixd_to_rotmat(v):
    """Gram-Schmidt reconstruction of a rotation matrix from 6D codes."""
    v = np.asarray(v, dtype=np.float64)
    a1, a2 = v[..., :3], v[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < _DEGENERATE_EPS):
        raise Degenerate6DError("first 6D column has zero norm", *_first_bad(n1[..., 0] < _DEGENERATE_EPS))
    b1 = a1 / n1
    r2 = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(r2, axis=-1, keepdims=True)
    if np.any(n2 < _DEGENERATE_EPS):
        raise Degenerate6DError("6D columns are parallel", *_first_bad(n2[..., 0] < _DEGENERATE_EPS))
    b2 = r2 / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def _first_bad(mask):
    idx = np.argwhere(np.atleast_1d(mask))
    if idx.size == 0 or np.ndim(mask) == 0:
        return None, None
    first = tuple(int(i) for i in idx[0])
    frame = first[0]
    joint = first[1] if len(first) > 1 else None
    return frame, joint


def heading_angle(R, warn=True):
    """Rotation about +z that takes +y to the horizontal projection of R's forward axis.

    Returns angles in (-pi, pi]. Degenerate matrices (forward axis parallel to
    gravity) get heading 0 and trigger a GimbalWarning.
    """
    R = np.asarray(R, dtype=np.float64)
    fwd = R[..., :, 1]
    fx, fy = fwd[..., 0], fwd[..., 1]
    degenerate = np.hypot(fx, fy) < _DEGENERATE_EPS
    theta = np.arctan2(-fx, fy)
    theta = np.where(theta <= -np.pi, np.pi, theta)
    if np.any(degenerate):
        theta = np.where(degenerate, 0.0, theta)
        if warn:
            warnings.warn("heading undefined for gravity-aligned forward axis; using 0", GimbalWarning, stacklevel=2)
    return theta


def factor_z_rotation(R):
    """Split ``R`` into ``rot_z(theta) @ R_xy`` where R_xy has zero heading."""
    R = np.asarray(R, dtype=np.float64)
    theta = heading_angle(R)
    R_xy = rot_z(-theta) @ R
    return theta, R_xy


def z_angle(Rz):
    """Angle of a rotation about +z (read from its first column)."""
    Rz = np.asarray(Rz, dtype=np.float64)
    return np.arctan2(Rz[..., 1, 0], Rz[..., 0, 0])


def geodesic_distance(R1, R2):
    rel = np.swapaxes(np.asarray(R1), -1, -2) @ np.asarray(R2)
    cos = (np.trace(rel, axis1=-2, axis2=-1) - 1.0) / 2.0
    return np.arccos(np.clip(cos, -1.0, 1.0))


def random_rotations(n, rng):
    """Uniformly distributed rotation matrices, shape (n, 3, 3)."""
    return Rotation.random(n, random_state=rng).as_matrix()


def slerp_matrices(R0, R1, w):
    """Spherical interpolation between matching stacks of rotation matrices."""
    R0 = np.asarray(R0, dtype=np.float64)
    R1 = np.asarray(R1, dtype=np.float64)
    shape = R0.shape[:-2]
    q0 = Rotation.from_matrix(R0.reshape(-1, 3, 3)).as_quat()
    q1 = Rotation.from_matrix(R1.reshape(-1, 3, 3)).as_quat()
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), shape).reshape(-1)
    dot = np.sum(q0 * q1, axis=-1)
    q1 = np.where(dot[:, None] < 0, -q1, q1)
    dot = np.abs(dot)
    omega = np.arccos(np.clip(dot, -1.0, 1.0))
    so = np.sin(omega)
    small = so < 1e-9
    safe = np.where(small, 1.0, so)
    c0 = np.where(small, 1.0 - w, np.sin((1.0 - w) * omega) / safe)
    c1 = np.where(small, w, np.sin(w * omega) / safe)
    q = c0[:, None] * q0 + c1[:, None] * q1
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    out = Rotation.from_quat(q).as_matrix()
    # exact endpoints keep integer-time resampling bitwise
    out = np.where((w == 0.0)[:, None, None], R0.reshape(-1, 3, 3), out)
    out = np.where((w == 1.0)[:, None, None], R1.reshape(-1, 3, 3), out)
    return out.reshape(shape + (3, 3))
