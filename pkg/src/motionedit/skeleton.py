"""22-joint body skeleton and forward kinematics."""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError
from .rotations import check_rotations

JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
)
NUM_JOINTS = 22
NUM_BODY_JOINTS = 21

# index of each joint's mirror image under a left/right reflection
MIRROR_INDEX = tuple(
    JOINT_NAMES.index(n.replace("left_", "@").replace("right_", "left_").replace("@", "right_"))
    for n in JOINT_NAMES
)


@dataclass(frozen=True)
class Skeleton:
    joint_names: tuple
    parent_index: tuple
    bone_offsets: np.ndarray  # (22, 3) meters

    def __post_init__(self):
        if len(self.joint_names) != NUM_JOINTS or len(self.parent_index) != NUM_JOINTS:
            raise InvalidConfigError(f"skeleton must have exactly {NUM_JOINTS} joints")
        if tuple(self.joint_names) != JOINT_NAMES:
            raise InvalidConfigError("joint order must match the frozen 22-joint layout")
        offsets = np.asarray(self.bone_offsets, dtype=np.float64)
        if offsets.shape != (NUM_JOINTS, 3):
            raise InvalidConfigError(f"bone_offsets must be (22, 3), got {offsets.shape}")
        object.__setattr__(self, "bone_offsets", offsets)
        if self.parent_index[0] != -1:
            raise InvalidConfigError("pelvis must be the root")
        for j in range(1, NUM_JOINTS):
            # parents precede children, which also rules out cycles
            if not 0 <= self.parent_index[j] < j:
                raise InvalidConfigError(f"joint {self.joint_names[j]} has invalid parent")
            norm = np.linalg.norm(offsets[j])
            if not np.isfinite(norm) or norm <= 0:
                raise InvalidConfigError(f"joint {self.joint_names[j]} has a zero-length bone")

    def rest_positions(self):
        """Zero-pose joint positions with the pelvis at the origin."""
        pos = np.zeros((NUM_JOINTS, 3))
        for j in range(1, NUM_JOINTS):
            pos[j] = pos[self.parent_index[j]] + self.bone_offsets[j]
        return pos

    def with_offsets(self, offsets):
        return Skeleton(self.joint_names, self.parent_index, np.asarray(offsets, dtype=np.float64))


def parse_skeleton(text):
    """Parse the plain-text skeleton format (see data/skeleton_default.txt)."""
    names, parents, offsets = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "version":
            if fields[1:] != ["1"]:
                raise InvalidConfigError(f"line {lineno}: unsupported skeleton version {fields[1:]}")
            continue
        if len(fields) != 5:
            raise InvalidConfigError(f"line {lineno}: expected 'joint parent x y z'")
        name, parent = fields[0], fields[1]
        try:
            xyz = [float(x) for x in fields[2:]]
        except ValueError as exc:
            raise InvalidConfigError(f"line {lineno}: {exc}") from None
        if parent == "-":
            pidx = -1
        elif parent in names:
            pidx = names.index(parent)
        else:
            raise InvalidConfigError(f"line {lineno}: parent {parent!r} not defined before {name!r}")
        names.append(name)
        parents.append(pidx)
        offsets.append(xyz)
    return Skeleton(tuple(names), tuple(parents), np.array(offsets))


def format_skeleton(skel):
    lines = ["# motionedit skeleton v1", "version 1"]
    for j, name in enumerate(skel.joint_names):
        parent = "-" if skel.parent_index[j] < 0 else skel.joint_names[skel.parent_index[j]]
        x, y, z = skel.bone_offsets[j]
        lines.append(f"{name} {parent} {float(x)!r} {float(y)!r} {float(z)!r}")
    return "\n".join(lines) + "\n"


def load_skeleton(path=None):
    if path is None:
        text = resources.files("motionedit.data").joinpath("skeleton_default.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_skeleton(text)


_DEFAULT = None


def default_skeleton():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_skeleton()
    return _DEFAULT


def forward_kinematics(pose, root_orient, root_trans, skeleton=None, validate=True):
    """Joint positions from local joint rotations.

    pose: (..., 21, 3, 3) rotations of the non-root joints relative to their
    parents; root_orient: (..., 3, 3); root_trans: (..., 3). Returns
    (..., 22, 3) positions in meters.
    """
    skeleton = skeleton or default_skeleton()
    pose = np.asarray(pose, dtype=np.float64)
    root_orient = np.asarray(root_orient, dtype=np.float64)
    root_trans = np.asarray(root_trans, dtype=np.float64)
    if validate:
        check_rotations(pose, what="body pose")
        check_rotations(root_orient, what="root orientation")
    batch = root_trans.shape[:-1]
    glob = np.empty(batch + (NUM_JOINTS, 3, 3))
    pos = np.empty(batch + (NUM_JOINTS, 3))
    glob[..., 0, :, :] = root_orient
    pos[..., 0, :] = root_trans
    offsets = skeleton.bone_offsets
    for j in range(1, NUM_JOINTS):
        p = skeleton.parent_index[j]
        pos[..., j, :] = pos[..., p, :] + glob[..., p, :, :] @ offsets[j]
        glob[..., j, :, :] = glob[..., p, :, :] @ pose[..., j - 1, :, :]
    return pos
