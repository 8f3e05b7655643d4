import numpy as np
import pytest
from hypothesis import given, strategies as st

from signed_rigidity.framework import Framework, make_graph
from signed_rigidity.oracle import (
    OracleError,
    brute_force_nullspace,
    check_jacobian,
    compare,
    finite_difference_jacobian,
    jacobian_sweep,
    random_framework,
)
from signed_rigidity.rigidity import RigidityKind, signed_angle_rows, signed_volume_rows


def test_quadratic_gradient():
    g = finite_difference_jacobian(lambda x: 0.5 * np.sum((x[:2] - x[2:]) ** 2), [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(g, [1, 0, -1, 0], atol=1e-9)


def test_unit_axes_signed_rows_match_oracle():
    fw = Framework(make_graph(3, signed_angles=[(0, 1, 2)]), 2, [[0, 0], [1, 0], [0, 1]])
    assert check_jacobian(fw, RigidityKind.DISTANCE_SIGN_2D).max_rel_error <= 1e-6
    fw3 = Framework(make_graph(4, signed_volumes=[(0, 1, 2, 3)]), 3, np.vstack([np.zeros(3), np.eye(3)]))
    assert check_jacobian(fw3, RigidityKind.DISTANCE_VOLUME_3D).max_rel_error <= 1e-6
    assert signed_angle_rows(fw).shape == (1, 6) and signed_volume_rows(fw3).shape == (1, 12)


def test_non_finite_field_reports_coordinate():
    with pytest.raises(OracleError, match="coordinate 1"):
        with np.errstate(divide="ignore"):
            finite_difference_jacobian(lambda x: np.log(x[1]), [1.0, 1e-6], h=1e-6)


def test_bad_step_rejected():
    with pytest.raises(ValueError):
        finite_difference_jacobian(lambda x: 0.0, [0.0], h=0.0)


def test_compare_switches_to_absolute_near_zero():
    res = compare(np.array([[1e-10, 2.0]]), np.array([[0.0, 2.0]]), 1e-6)
    assert res.max_rel_error == pytest.approx(1e-10)
    assert res.worst_entry == (0, 0)


@pytest.mark.parametrize("kind", list(RigidityKind))
@given(seed=st.integers(0, 2**32 - 1))
def test_rows_match_finite_differences(kind, seed):
    fw = random_framework(kind, np.random.default_rng(seed))
    assert check_jacobian(fw, kind).max_rel_error <= 1e-6


@given(seed=st.integers(0, 2**32 - 1), k=st.floats(0.5, 20))
def test_gain_scaled_rows_match_finite_differences(seed, k):
    fw = random_framework(RigidityKind.DISTANCE_VOLUME_3D, np.random.default_rng(seed))
    assert check_jacobian(fw, RigidityKind.DISTANCE_VOLUME_3D, gain_k=k).max_rel_error <= 1e-6


@given(st.integers(1, 6), st.integers(1, 8))
def test_zero_matrix_nullspace_is_everything(m, q):
    assert brute_force_nullspace(np.zeros((m, q))).shape == (q, q)


@given(seed=st.integers(0, 2**32 - 1))
def test_nullspace_is_annihilated(seed):
    A = np.random.default_rng(seed).normal(size=(4, 7))
    N = brute_force_nullspace(A)
    assert N.shape == (7, 3)
    assert abs(A @ N).max() < 1e-10


def test_sweep_is_seeded():
    a = jacobian_sweep([RigidityKind.ANGLE_SIGN_2D], cases=5, seed=3)
    b = jacobian_sweep([RigidityKind.ANGLE_SIGN_2D], cases=5, seed=3)
    assert a == b
