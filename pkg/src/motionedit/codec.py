"""Motion container and the 207-dim per-frame feature encoding.

Feature layout per frame:

    [0, 3)     root translation delta to the previous frame
    [3, 9)     6D code of the heading-free root orientation
    [9, 15)    6D code of the heading change since the previous frame
    [15, 141)  21 x 6D body joint rotations
    [141, 207) 22 x 3 joint positions, heading removed, pelvis x/y at origin

Row 0 of both delta blocks holds zeros / the identity code.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import Degenerate6DError, InvalidConfigError, MustCanonicalizeError, ShapeError, StatsMismatchError
from .rotations import check_rotations, heading_angle, rot_z, rotmat_to_6d, sixd_to_rotmat, slerp_matrices, z_angle
from .skeleton import NUM_BODY_JOINTS, NUM_JOINTS, default_skeleton, forward_kinematics

FEATURE_DIM = 207
TRANS = slice(0, 3)
ORIENT_XY = slice(3, 9)
ORIENT_Z = slice(9, 15)
POSE = slice(15, 141)
JOINTS = slice(141, 207)
DEFAULT_FPS = 20.0
STD_FLOOR = 1e-6
CANONICAL_TOL = 1e-6
IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rotation_dims(joint):
    """Feature columns holding the 6D rotation of body joint ``joint`` (1..21)."""
    start = POSE.start + 6 * (joint - 1)
    return range(start, start + 6)


def position_dims(joint):
    start = JOINTS.start + 3 * joint
    return range(start, start + 3)


@dataclass
class Motion:
    root_trans: np.ndarray   # (F, 3)
    root_orient: np.ndarray  # (F, 3, 3)
    body_pose: np.ndarray    # (F, 21, 3, 3)
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.root_trans = np.asarray(self.root_trans, dtype=np.float64)
        self.root_orient = np.asarray(self.root_orient, dtype=np.float64)
        self.body_pose = np.asarray(self.body_pose, dtype=np.float64)
        n = self.root_trans.shape[0]
        if self.root_trans.shape != (n, 3):
            raise ShapeError(f"root_trans must be (F, 3), got {self.root_trans.shape}")
        if self.root_orient.shape != (n, 3, 3):
            raise ShapeError(f"root_orient must be (F, 3, 3), got {self.root_orient.shape}")
        if self.body_pose.shape != (n, NUM_BODY_JOINTS, 3, 3):
            raise ShapeError(f"body_pose must be (F, 21, 3, 3), got {self.body_pose.shape}")
        if n < 2:
            raise ShapeError("a motion needs at least 2 frames")
        if not self.fps > 0:
            raise ShapeError("fps must be positive")
        check_rotations(self.root_orient, what="root orientation")
        check_rotations(self.body_pose, what="body pose")

    @property
    def num_frames(self):
        return self.root_trans.shape[0]

    @property
    def duration(self):
        return self.num_frames / self.fps

    def joints(self, skeleton=None):
        return forward_kinematics(self.body_pose, self.root_orient, self.root_trans, skeleton, validate=False)

    def slice(self, start, stop):
        return Motion(self.root_trans[start:stop], self.root_orient[start:stop],
                      self.body_pose[start:stop], self.fps)

    def copy(self):
        return Motion(self.root_trans.copy(), self.root_orient.copy(), self.body_pose.copy(), self.fps)

    def to_array(self):
        """Flat (F, 201) packing: translation, root matrix, 21 joint matrices."""
        n = self.num_frames
        return np.concatenate(
            [self.root_trans, self.root_orient.reshape(n, 9), self.body_pose.reshape(n, 189)], axis=1)

    @classmethod
    def from_array(cls, arr, fps=DEFAULT_FPS):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 201:
            raise ShapeError(f"packed motion must be (F, 201), got {arr.shape}")
        n = arr.shape[0]
        return cls(arr[:, :3], arr[:, 3:12].reshape(n, 3, 3), arr[:, 12:].reshape(n, 21, 3, 3), fps)


@dataclass
class FeatureSequence:
    data: np.ndarray
    normalized: bool = False
    stats_id: str = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[1] != FEATURE_DIM:
            raise ShapeError(f"features must be (F, {FEATURE_DIM}), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ShapeError("features contain non-finite values")

    @property
    def num_frames(self):
        return self.data.shape[0]


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray
    count: int
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (FEATURE_DIM,) or self.std.shape != (FEATURE_DIM,):
            raise ShapeError("stats vectors must have 207 entries")
        if self.constant is None:
            self.constant = self.std <= STD_FLOOR
        self.std = np.maximum(self.std, STD_FLOOR)

    @property
    def stats_id(self):
        h = hashlib.sha1()
        h.update(self.mean.astype("<f8").tobytes())
        h.update(self.std.astype("<f8").tobytes())
        return h.hexdigest()[:16]

    def to_dict(self):
        return {"format": "motionedit-stats", "version": 1, "count": int(self.count),
                "mean": self.mean.tolist(), "std": self.std.tolist(),
                "constant": [bool(c) for c in self.constant]}

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "motionedit-stats" or d.get("version") != 1:
            raise StatsMismatchError("unrecognised stats file")
        return cls(np.array(d["mean"]), np.array(d["std"]), d["count"], np.array(d["constant"], dtype=bool))


def heading(R):
    return heading_angle(R, warn=False)


def is_canonical(m, tol=CANONICAL_TOL):
    return bool(np.all(np.abs(m.root_trans[0]) <= tol) and abs(heading(m.root_orient[0])) <= tol)


def canonicalize(m):
    """Rigidly move ``m`` so frame 0 sits at the origin with zero heading."""
    theta0 = float(heading_angle(m.root_orient[0]))
    trans = m.root_trans - m.root_trans[0]
    if abs(theta0) < 1e-12:
        return Motion(trans, m.root_orient.copy(), m.body_pose.copy(), m.fps)
    G = rot_z(-theta0)
    return Motion(trans @ G.T, G @ m.root_orient, m.body_pose.copy(), m.fps)


def local_joint_positions(m, skeleton=None):
    """FK with the heading factored out and the pelvis moved to x = y = 0."""
    theta = heading(m.root_orient)
    R_xy = rot_z(-theta) @ m.root_orient
    trans = np.zeros_like(m.root_trans)
    trans[:, 2] = m.root_trans[:, 2]
    return forward_kinematics(m.body_pose, R_xy, trans, skeleton, validate=False)


def encode(m, skeleton=None):
    """Encode a canonical motion into unnormalized features."""
    if not is_canonical(m):
        raise MustCanonicalizeError("encode expects a canonical motion; call canonicalize() first")
    skeleton = skeleton or default_skeleton()
    n = m.num_frames
    out = np.zeros((n, FEATURE_DIM))
    out[1:, TRANS] = np.diff(m.root_trans, axis=0)
    theta = heading(m.root_orient)
    R_xy = rot_z(-theta) @ m.root_orient
    out[:, ORIENT_XY] = rotmat_to_6d(R_xy)
    dz = np.zeros(n)
    dz[1:] = np.diff(theta)
    out[:, ORIENT_Z] = rotmat_to_6d(rot_z(dz))
    out[0, ORIENT_Z] = IDENTITY_6D
    out[:, POSE] = rotmat_to_6d(m.body_pose).reshape(n, -1)
    out[:, JOINTS] = local_joint_positions(m, skeleton).reshape(n, -1)
    return FeatureSequence(out)


def decode(f, skeleton=None, fps=DEFAULT_FPS):
    """Rebuild a motion from unnormalized features (joint dims are ignored)."""
    if f.normalized:
        raise StatsMismatchError("decode expects unnormalized features; call denormalize() first")
    data = np.asarray(f.data, dtype=np.float64)
    n = data.shape[0]
    R_xy = _decode_6d(data[:, ORIENT_XY], "root xy-orientation")
    Rdz = _decode_6d(data[:, ORIENT_Z], "root z-orientation delta")
    dz = z_angle(Rdz)
    dz[0] = 0.0
    theta = np.cumsum(dz)
    trans = np.zeros((n, 3))
    trans[1:] = np.cumsum(data[1:, TRANS], axis=0)
    root = rot_z(theta) @ R_xy
    pose = _decode_6d(data[:, POSE].reshape(n, NUM_BODY_JOINTS, 6), "body pose", joint_offset=1)
    return Motion(trans, root, pose, fps)


def _decode_6d(v, what, joint_offset=0):
    try:
        return sixd_to_rotmat(v)
    except Degenerate6DError as exc:
        joint = None if exc.joint is None else exc.joint + joint_offset
        raise Degenerate6DError(f"degenerate 6D code in {what}", exc.frame, joint) from None


def compute_stats(dataset):
    """Per-dimension mean/std over every frame of ``dataset``."""
    seqs = [f.data if isinstance(f, FeatureSequence) else np.asarray(f) for f in dataset]
    if not seqs:
        raise InvalidConfigError("cannot fit stats on an empty dataset")
    frames = np.concatenate(seqs, axis=0).astype(np.float64)
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    return FeatureStats(mean, std, frames.shape[0], std <= STD_FLOOR)


def normalize(f, stats):
    if f.normalized:
        raise StatsMismatchError("features are already normalized")
    return FeatureSequence((f.data - stats.mean) / stats.std, True, stats.stats_id)


def denormalize(f, stats):
    if not f.normalized:
        raise StatsMismatchError("features are not normalized")
    if f.stats_id is not None and f.stats_id != stats.stats_id:
        raise StatsMismatchError(f"features were normalized with stats {f.stats_id}, got {stats.stats_id}")
    return FeatureSequence(f.data * stats.std + stats.mean, False, None)


def features_of(m, stats=None, skeleton=None):
    """canonicalize -> encode (-> normalize) convenience used by evaluators."""
    f = encode(canonicalize(m), skeleton)
    return normalize(f, stats) if stats is not None else f


def resample(m, factor):
    """Play ``m`` ``factor`` times faster by interpolating at times i * factor."""
    n = m.num_frames
    count = int(np.floor((n - 1) / factor + 1e-9)) + 1
    times = np.arange(count) * factor
    times = np.minimum(times, n - 1)
    i0 = np.floor(times).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    w = times - i0
    trans = m.root_trans[i0] * (1 - w[:, None]) + m.root_trans[i1] * w[:, None]
    trans = np.where((w == 0)[:, None], m.root_trans[i0], trans)
    root = slerp_matrices(m.root_orient[i0], m.root_orient[i1], w)
    wp = np.repeat(w[:, None], NUM_BODY_JOINTS, axis=1)
    pose = slerp_matrices(m.body_pose[i0], m.body_pose[i1], wp)
    return Motion(trans, root, pose, m.fps)

