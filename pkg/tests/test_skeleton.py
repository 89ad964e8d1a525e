import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionedit.errors import InvalidConfigError, InvalidRotationError
from motionedit.rotations import random_rotations, rot_x, rot_z
from motionedit.skeleton import (
    JOINT_NAMES, MIRROR_INDEX, format_skeleton, forward_kinematics, load_skeleton, parse_skeleton,
)

I21 = np.tile(np.eye(3), (21, 1, 1))


def test_default_skeleton_shape(skeleton):
    assert len(skeleton.joint_names) == 22
    assert skeleton.parent_index[0] == -1
    rest = skeleton.rest_positions()
    height = rest[:, 2].max() - rest[:, 2].min()
    # head joint sits below the crown, so the joint span is a bit under 1.7 m
    assert 1.4 < height < 1.8
    assert JOINT_NAMES[MIRROR_INDEX[JOINT_NAMES.index("left_wrist")]] == "right_wrist"


def test_skeleton_is_left_right_symmetric(skeleton):
    flip = np.array([-1.0, 1.0, 1.0])
    for j, k in enumerate(MIRROR_INDEX):
        np.testing.assert_allclose(skeleton.bone_offsets[j] * flip, skeleton.bone_offsets[k])


def test_zero_pose_is_cumulative_offsets(skeleton):
    pos = forward_kinematics(I21, np.eye(3), np.zeros(3), skeleton)
    for j in range(1, 22):
        chain = np.zeros(3)
        k = j
        while k > 0:
            chain += skeleton.bone_offsets[k]
            k = skeleton.parent_index[k]
        np.testing.assert_allclose(pos[j], chain, atol=1e-12)
    assert np.all(pos[0] == 0)


def test_two_bone_chain(skeleton):
    offsets = skeleton.bone_offsets.copy()
    spine1, spine2 = JOINT_NAMES.index("spine1"), JOINT_NAMES.index("spine2")
    offsets[spine1] = offsets[spine2] = (0.0, 0.0, 0.5)
    skel = skeleton.with_offsets(offsets)
    pose = I21.copy()
    pose[spine1 - 1] = rot_x(np.pi / 2)
    pos = forward_kinematics(pose, np.eye(3), np.zeros(3), skel)
    np.testing.assert_allclose(pos[spine1], (0, 0, 0.5), atol=1e-12)
    np.testing.assert_allclose(pos[spine2] - pos[spine1], (0, -0.5, 0), atol=1e-12)


def test_translation_equivariance(skeleton):
    base = forward_kinematics(I21, np.eye(3), np.zeros(3), skeleton)
    moved = forward_kinematics(I21, np.eye(3), np.array([1.0, 2.0, 3.0]), skeleton)
    np.testing.assert_allclose(moved, base + (1, 2, 3), atol=1e-12)
    assert np.array_equal(moved[0], [1.0, 2.0, 3.0])


def test_invalid_rotation_rejected():
    bad = I21.copy()
    bad[3] *= 1.01
    with pytest.raises(InvalidRotationError):
        forward_kinematics(bad, np.eye(3), np.zeros(3))
    with pytest.raises(InvalidRotationError):
        forward_kinematics(I21, np.diag([1.0, 1.0, -1.0]), np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rigid_invariance_and_bone_lengths(seed):
    skeleton = load_skeleton()
    rng = np.random.default_rng(seed)
    pose = random_rotations(21, rng)
    root = random_rotations(1, rng)[0]
    trans = rng.normal(size=3)
    R = random_rotations(1, rng)[0]
    t = rng.normal(size=3)
    p = forward_kinematics(pose, root, trans, skeleton)
    q = forward_kinematics(pose, R @ root, R @ trans + t, skeleton)
    np.testing.assert_allclose(q, p @ R.T + t, atol=1e-6)
    for j in range(1, 22):
        length = np.linalg.norm(p[j] - p[skeleton.parent_index[j]])
        assert abs(length - np.linalg.norm(skeleton.bone_offsets[j])) < 1e-6


def test_config_round_trip(skeleton):
    again = parse_skeleton(format_skeleton(skeleton))
    assert np.array_equal(again.bone_offsets, skeleton.bone_offsets)
    assert again.parent_index == skeleton.parent_index


@pytest.mark.parametrize("text", [
    "pelvis - 0 0 0\nleft_hip nowhere 0 0 1\n",
    "version 2\n",
    "pelvis - 0 0\n",
])
def test_bad_config(text):
    with pytest.raises(InvalidConfigError):
        parse_skeleton(text)


def test_zero_bone_rejected(skeleton):
    offsets = skeleton.bone_offsets.copy()
    offsets[5] = 0
    with pytest.raises(InvalidConfigError):
        skeleton.with_offsets(offsets)
