import warnings

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from motionedit.errors import Degenerate6DError, GimbalWarning
from motionedit.rotations import (
    factor_z_rotation, heading_angle, random_rotations, rot_x, rot_y, rot_z, rotmat_to_6d,
    sixd_to_rotmat, slerp_matrices,
)


def axis_angle(axis, deg):
    return Rotation.from_rotvec(np.radians(deg) * np.asarray(axis, float)).as_matrix()


@pytest.mark.parametrize("fn, axis", [(rot_x, (1, 0, 0)), (rot_y, (0, 1, 0)), (rot_z, (0, 0, 1))])
def test_axis_rotations_match_scipy(fn, axis):
    for deg in (-170, -30, 0, 45, 90, 180):
        np.testing.assert_allclose(fn(np.radians(deg)), axis_angle(axis, deg), atol=1e-12)


def test_6d_examples():
    np.testing.assert_array_equal(rotmat_to_6d(np.eye(3)), [1, 0, 0, 0, 1, 0])
    np.testing.assert_allclose(rotmat_to_6d(axis_angle((0, 0, 1), 90)), [0, 1, 0, -1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(rotmat_to_6d(axis_angle((1, 0, 0), 180)), [1, 0, 0, 0, -1, 0], atol=1e-12)


def test_gram_schmidt_examples():
    np.testing.assert_array_equal(sixd_to_rotmat([1, 0, 0, 0, 1, 0]), np.eye(3))
    np.testing.assert_array_equal(sixd_to_rotmat([2, 0, 0, 0, 3, 0]), np.eye(3))
    R = sixd_to_rotmat([0, 0, 2, 0, 1, 0])
    np.testing.assert_allclose(R[:, 0], (0, 0, 1))
    np.testing.assert_allclose(R[:, 1], (0, 1, 0))
    np.testing.assert_allclose(R[:, 2], (-1, 0, 0))


@pytest.mark.parametrize("v", [[0, 0, 0, 0, 1, 0], [1, 0, 0, 2, 0, 0], [1, 1, 0, -3, -3, 0]])
def test_degenerate_6d(v):
    with pytest.raises(Degenerate6DError):
        sixd_to_rotmat(v)


def test_degenerate_6d_reports_index():
    codes = np.tile([1.0, 0, 0, 0, 1, 0], (4, 21, 1))
    codes[2, 5] = 0
    with pytest.raises(Degenerate6DError) as info:
        sixd_to_rotmat(codes)
    assert (info.value.frame, info.value.joint) == (2, 5)


def test_gram_schmidt_output_is_rotation(rng):
    R = sixd_to_rotmat(rng.normal(size=(1000, 6)))
    np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.swapaxes(R, -1, -2) @ R, np.broadcast_to(np.eye(3), R.shape), atol=1e-12)
    np.testing.assert_allclose(R[..., 2], np.cross(R[..., 0], R[..., 1]), atol=1e-12)


def test_factor_z_examples():
    theta, R_xy = factor_z_rotation(rot_z(np.pi / 2))
    assert theta == pytest.approx(np.pi / 2)
    np.testing.assert_allclose(R_xy, np.eye(3), atol=1e-12)
    theta, R_xy = factor_z_rotation(np.eye(3))
    assert theta == 0
    np.testing.assert_array_equal(R_xy, np.eye(3))
    R = axis_angle((0, 0, 1), 30) @ axis_angle((1, 0, 0), 45)
    theta, R_xy = factor_z_rotation(R)
    assert theta == pytest.approx(np.pi / 6, abs=1e-12)
    np.testing.assert_allclose(R_xy, axis_angle((1, 0, 0), 45), atol=1e-12)
    np.testing.assert_allclose(rot_z(theta) @ R_xy, R, atol=1e-12)


def test_heading_range():
    assert heading_angle(rot_z(np.pi)) == pytest.approx(np.pi)
    assert heading_angle(rot_z(-np.pi)) == pytest.approx(np.pi)
    assert -np.pi < heading_angle(rot_z(-np.pi + 1e-6)) < 0


def test_zero_heading_residual(rng):
    _, R_xy = factor_z_rotation(random_rotations(500, rng))
    fwd = R_xy[:, :, 1]
    np.testing.assert_allclose(fwd[:, 0], 0, atol=1e-12)
    assert np.all(fwd[:, 1] >= 0)


def test_gimbal_flagged():
    R = rot_x(np.pi / 2)  # forward axis points straight up
    with pytest.warns(GimbalWarning):
        theta, R_xy = factor_z_rotation(R)
    assert theta == 0
    np.testing.assert_allclose(rot_z(theta) @ R_xy, R)


def test_slerp_endpoints_exact(rng):
    A, B = random_rotations(5, rng), random_rotations(5, rng)
    assert np.array_equal(slerp_matrices(A, B, 0.0), A)
    assert np.array_equal(slerp_matrices(A, B, 1.0), B)
    mid = slerp_matrices(np.eye(3)[None], rot_z(np.array([1.0])), 0.5)
    np.testing.assert_allclose(mid[0], rot_z(0.5), atol=1e-12)
