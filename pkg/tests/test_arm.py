import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tendonarm.arm import (
    ArmModel,
    BASE,
    Muscle,
    UPPER,
    default_arm,
    elastic_stretch_inverse,
    elastic_tension,
    gravity_potential,
    gravity_torque,
    load_arm,
    muscle_jacobian,
    path_lengths,
    save_arm,
    scenario_arm,
    validate_arm,
)
from tendonarm.errors import DomainError

from conftest import random_pose


def fd_jacobian(model, q, h=1e-5):
    out = np.zeros((model.n_muscles, 5))
    for j in range(5):
        dq = np.zeros(5)
        dq[j] = h
        out[:, j] = (
            path_lengths(model, q + dq, check_limits=False)
            - path_lengths(model, q - dq, check_limits=False)
        ) / (2 * h)
    return out


def test_neutral_lengths_are_stored(arm):
    assert np.allclose(path_lengths(arm, np.zeros(5)), arm.neutral_lengths)


def test_out_of_limit_pose_rejected(arm):
    q = np.zeros(5)
    q[0] = 2.0
    with pytest.raises(DomainError):
        path_lengths(arm, q)


def test_translation_invariance(arm):
    q = np.array([0.3, -0.2, 0.4, 1.1, -0.5])
    moved = default_arm()
    moved.base_position = np.array([1.0, -2.0, 0.5])
    moved.__post_init__()
    assert np.allclose(path_lengths(arm, q), path_lengths(moved, q), atol=1e-9)


def test_constant_moment_arm_model():
    # Single straight segment crossing only the shoulder-yaw axis, placed so
    # the segment is perpendicular to the via radius: the analytic moment arm
    # at q = 0 is exactly the via radius r.
    r, length = 0.05, 0.3
    pts = [(BASE, np.array([r, -length, 0.0])), (UPPER, np.array([r, 0.0, 0.0]))]
    model = ArmModel(muscles=[Muscle("yaw-test", pts)])
    g = muscle_jacobian(model, np.zeros(5))
    assert g[0, 2] == pytest.approx(r * 1000.0, rel=1e-6)
    # Small rotations change the length by r*dq to second order.
    dq = 1e-3
    q = np.zeros(5)
    q[2] = dq
    delta = path_lengths(model, q)[0] - path_lengths(model, np.zeros(5))[0]
    assert delta == pytest.approx(r * 1000.0 * dq, abs=r * 1000.0 * dq * dq)


@pytest.mark.parametrize("factory", [default_arm, scenario_arm])
def test_jacobian_matches_finite_differences(factory, rng):
    model = factory()
    worst = 0.0
    for _ in range(12):
        q = random_pose(model, rng)
        g = muscle_jacobian(model, q)
        scale = max(1.0, np.abs(g).max())
        worst = max(worst, np.abs(g - fd_jacobian(model, q)).max() / scale)
    assert worst < 1e-4


def test_jacobian_fd_sweep_100_poses(sarm, rng):
    # The spec-level property: 100 random in-limit poses within 1e-4 relative.
    for _ in range(100):
        q = random_pose(sarm, rng)
        g = muscle_jacobian(sarm, q)
        scale = max(1.0, np.abs(g).max())
        assert np.abs(g - fd_jacobian(sarm, q)).max() / scale < 1e-4


def test_elbow_muscles_ignore_shoulder(arm):
    q = np.array([0.5, -0.3, 0.6, 1.0, 0.4])
    g = muscle_jacobian(arm, q)
    assert np.abs(g[6:, :3]).max() < 1e-9


def test_moment_arms_rank_and_pairing(arm):
    validate_arm(arm)
    g = muscle_jacobian(arm, np.zeros(5))
    assert np.linalg.matrix_rank(g, tol=1e-6) == 5
    # Mirror pairs cancel exactly at the neutral pose.
    assert np.abs(g.sum(axis=0)).max() < 1e-9


def test_scenario_arm_valid():
    validate_arm(scenario_arm())


def test_elastic_worked_example():
    model = default_arm(k1=5.0, k2=0.5)
    f = elastic_tension(model, np.full(10, 10.0))
    assert np.allclose(f, 100.0)
    s = elastic_stretch_inverse(model, np.full(10, 100.0))
    assert np.allclose(s, 10.0)


def test_elastic_slack_and_zero(arm):
    assert np.all(elastic_tension(arm, np.zeros(10)) == 0.0)
    assert np.all(elastic_tension(arm, np.full(10, -3.0)) == 0.0)
    assert np.all(elastic_stretch_inverse(arm, np.zeros(10)) == 0.0)


@settings(max_examples=60, deadline=None)
@given(
    s=st.floats(min_value=0.0, max_value=60.0),
    ds=st.floats(min_value=0.0, max_value=10.0),
)
def test_elastic_monotone_and_invertible(s, ds):
    model = default_arm()
    f0 = elastic_tension(model, np.full(10, s))
    f1 = elastic_tension(model, np.full(10, s + ds))
    assert np.all(f1 >= f0)
    back = elastic_stretch_inverse(model, f0)
    assert np.allclose(back, s, atol=1e-9)


def test_gravity_zero_vector(arm):
    model = default_arm()
    model.gravity = np.zeros(3)
    model.__post_init__()
    assert np.allclose(gravity_torque(model, np.array([0.4, 0.2, -0.3, 1.0, 0.5])), 0.0)


def test_gravity_single_pendulum():
    # One point mass at distance d below the shoulder; raising the arm to the
    # horizontal loads the pitch axis with m*g*d.
    d, m = 0.3, 2.0
    model = default_arm()
    model.upper_mass, model.fore_mass = m, 0.0
    model.upper_com = np.array([0.0, 0.0, -d])
    model.joint_limits = np.array([[-3.2, 3.2]] * 5)
    model.__post_init__()
    q = np.array([np.pi / 2, 0.0, 0.0, 0.0, 0.0])
    tau = gravity_torque(model, q)
    assert abs(tau[0]) == pytest.approx(m * 9.81 * d, rel=1e-9)
    assert np.abs(tau[1:]).max() < 1e-9


@pytest.mark.parametrize("factory", [default_arm, scenario_arm])
def test_gravity_matches_potential_gradient(factory, rng):
    model = factory()
    h = 1e-6
    for _ in range(10):
        q = random_pose(model, rng)
        tau = gravity_torque(model, q)
        for j in range(5):
            dq = np.zeros(5)
            dq[j] = h
            fd = -(gravity_potential(model, q + dq) - gravity_potential(model, q - dq)) / (2 * h)
            assert tau[j] == pytest.approx(fd, abs=1e-6)


def test_arm_json_roundtrip(tmp_path, arm):
    path = str(tmp_path / "arm.json")
    save_arm(arm, path)
    loaded = load_arm(path)
    q = np.array([0.2, 0.1, -0.4, 0.9, 0.3])
    assert np.allclose(path_lengths(arm, q), path_lengths(loaded, q))
    assert np.allclose(arm.joint_limits, loaded.joint_limits)
    assert loaded.muscles[3].name == arm.muscles[3].name


def test_arm_json_rejects_bad_schema(tmp_path, arm):
    path = str(tmp_path / "arm.json")
    save_arm(arm, path)
    import json

    with open(path) as fh:
        doc = json.load(fh)
    doc["schema_version"] = 99
    with open(path, "w") as fh:
        json.dump(doc, fh)
    with pytest.raises(DomainError):
        load_arm(path)
