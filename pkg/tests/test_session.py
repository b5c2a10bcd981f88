import numpy as np
import pytest

from tendonarm.compensation import StiffnessParams, Variant
from tendonarm.errors import DataError, DomainError
from tendonarm.plant import NoiseConfig
from tendonarm.scenarios import HOLD_POSE, SCENARIO_F_MIN, SCENARIO_STIFFNESS
from tendonarm.session import (
    FRAME_DT,
    JointPath,
    LimiterConfig,
    Trajectory,
    WrenchProfile,
    metric_E,
    run_original,
    run_reproduction,
    run_teaching,
)


@pytest.fixture(scope="module")
def hold_path():
    return JointPath.hold(HOLD_POSE, 2.0)


@pytest.fixture(scope="module")
def null_teach(sarm, oracle, hold_path):
    profile = WrenchProfile(knots=[(0.0, np.zeros(3))])
    return run_teaching(
        sarm, oracle, hold_path, profile, SCENARIO_STIFFNESS,
        LimiterConfig(), f_min=SCENARIO_F_MIN, seed=0,
    )


def test_joint_path_validation():
    with pytest.raises(DomainError):
        JointPath([])
    with pytest.raises(DomainError):
        JointPath([(1.0, np.zeros(5))])  # must start at zero
    with pytest.raises(DomainError):
        JointPath([(0.0, np.zeros(5)), (0.0, np.ones(5))])
    path = JointPath([(0.0, np.zeros(5)), (2.0, np.ones(5))])
    assert np.allclose(path.at(-1.0), 0.0)
    assert np.allclose(path.at(99.0), 1.0)
    assert np.allclose(path.at(1.0), 0.5)  # smoothstep midpoint


def test_wrench_profile_interpolation():
    prof = WrenchProfile(knots=[(1.0, np.zeros(3)), (2.0, np.array([10.0, 0.0, 0.0]))])
    assert np.allclose(prof.force_at(0.5), 0.0)
    assert np.allclose(prof.force_at(1.5), [5.0, 0.0, 0.0])
    assert np.allclose(prof.force_at(3.0), [10.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        WrenchProfile(knots=[(1.0, np.zeros(3)), (1.0, np.zeros(3))])
    with pytest.raises(DomainError):
        WrenchProfile(knots=[(0.0, np.array([500.0, 0.0, 0.0]))])


def test_too_short_path_rejected(sarm, oracle):
    with pytest.raises(DataError):
        run_original(sarm, oracle, JointPath.hold(HOLD_POSE, 0.1),
                     SCENARIO_STIFFNESS, f_min=SCENARIO_F_MIN)


def test_frame_timing_and_counts(null_teach):
    assert len(null_teach) == 11  # 2.0 s / 0.2 s + 1
    assert np.allclose(np.diff(null_teach.times), FRAME_DT)


def test_constant_reference_tracks(sarm, oracle, hold_path):
    traj = run_original(sarm, oracle, hold_path, SCENARIO_STIFFNESS,
                        LimiterConfig(), f_min=SCENARIO_F_MIN, seed=0)
    assert np.abs(traj.theta_true - traj.theta_ref).max() <= 0.02


def test_null_teaching_equals_original(sarm, oracle, hold_path, null_teach):
    original = run_original(sarm, oracle, hold_path, SCENARIO_STIFFNESS,
                            LimiterConfig(), f_min=SCENARIO_F_MIN, seed=0)
    assert np.array_equal(original.theta_true, null_teach.theta_true)
    assert np.array_equal(original.l_ref, null_teach.l_ref)
    assert np.array_equal(original.f_ref, null_teach.f_ref)


def test_commands_unchanged_by_wrench(sarm, oracle, hold_path, null_teach):
    # The structural invariant: teaching records the original commands even
    # while the wrench deflects the plant.
    pushed = WrenchProfile(
        knots=[(0.3, np.zeros(3)), (0.6, np.array([-15.0, 12.0, -8.0])),
               (1.6, np.array([-15.0, 12.0, -8.0]))]
    )
    taught = run_teaching(sarm, oracle, hold_path, pushed, SCENARIO_STIFFNESS,
                          LimiterConfig(), f_min=SCENARIO_F_MIN, seed=0)
    assert np.array_equal(taught.l_ref, null_teach.l_ref)
    assert np.array_equal(taught.f_ref, null_teach.f_ref)
    assert np.array_equal(taught.theta_ref, null_teach.theta_ref)
    # but the plant state deviates and the sensors see it
    assert np.abs(taught.theta_true - null_teach.theta_true).max() > 0.01
    assert np.abs(taught.f_data - null_teach.f_data).max() > 1.0


def test_teaching_deviation_with_default_plant():
    # 15 N lateral for ~3 s on the default (stiffer) plant still moves the
    # arm visibly.
    from tendonarm.arm import default_arm
    from tendonarm.intersensory import OracleIntersensory

    arm = default_arm()
    arm.joint_limits = np.array([[-1.3, 1.3], [-1.3, 1.3], [-1.3, 1.3], [0.0, 2.0], [-1.3, 1.3]])
    arm.__post_init__()
    oracle = OracleIntersensory(arm)
    pose = np.array([0.5, 0.1, 0.0, 0.9, 0.0])
    path = JointPath.hold(pose, 5.0)
    force = np.array([0.0, 15.0, 0.0])
    profile = WrenchProfile(knots=[(1.0, np.zeros(3)), (1.5, force), (4.5, force), (5.0, np.zeros(3))])
    taught = run_teaching(arm, oracle, path, profile, StiffnessParams(30.0, 10.0),
                          LimiterConfig(), f_min=10.0, seed=0)
    assert np.abs(taught.theta_true - taught.theta_ref).max() >= 0.1


def test_null_reproduction_fixed_point(sarm, oracle, null_teach):
    for variant in (Variant.ALL, Variant.W_HS, Variant.W_E, Variant.NONE):
        rep = run_reproduction(sarm, oracle, null_teach, variant,
                               SCENARIO_STIFFNESS, LimiterConfig(), seed=0)
        res = metric_E(null_teach, rep)
        assert res.e_rad <= 1e-6, variant


def test_theta_null_reproduction_small(sarm, oracle, null_teach):
    rep = run_reproduction(sarm, oracle, null_teach, Variant.THETA,
                           SCENARIO_STIFFNESS, LimiterConfig(), seed=0)
    assert metric_E(null_teach, rep).e_rad <= 1e-5


def test_run_determinism(sarm, oracle, hold_path):
    runs = [
        run_original(sarm, oracle, hold_path, SCENARIO_STIFFNESS, LimiterConfig(),
                     f_min=SCENARIO_F_MIN, noise=NoiseConfig(tension_sigma=1.0), seed=42)
        for _ in range(2)
    ]
    assert np.array_equal(runs[0].theta_true, runs[1].theta_true)
    assert np.array_equal(runs[0].f_data, runs[1].f_data)


def test_metric_examples():
    n, m = 6, 10
    mk = lambda theta: Trajectory(
        theta_ref=np.zeros((n, 5)),
        l_ref=np.zeros((n, m)),
        f_ref=np.zeros((n, m)),
        l_data=np.zeros((n, m)),
        f_data=np.zeros((n, m)),
        delta_le=np.zeros((n, m)),
        theta_true=theta,
        metadata={},
    )
    a = mk(np.zeros((n, 5)))
    assert metric_E(a, mk(np.zeros((n, 5)))).e_rad == 0.0
    shifted = np.zeros((n, 5))
    shifted[:, 2] = 0.1
    res = metric_E(a, mk(shifted))
    assert res.e_rad == pytest.approx(0.02, abs=1e-12)
    assert res.per_joint_rad[2] == pytest.approx(0.1, abs=1e-12)
    # symmetry
    assert metric_E(mk(shifted), a).e_rad == res.e_rad


def test_metric_rejects_mismatch():
    mk = lambda n: Trajectory(
        theta_ref=np.zeros((n, 5)),
        l_ref=np.zeros((n, 10)),
        f_ref=np.zeros((n, 10)),
        l_data=np.zeros((n, 10)),
        f_data=np.zeros((n, 10)),
        delta_le=np.zeros((n, 10)),
        theta_true=np.zeros((n, 5)),
        metadata={},
    )
    with pytest.raises(DataError):
        metric_E(mk(5), mk(6))


def test_metric_triangle_inequality(rng):
    n = 8
    mk = lambda theta: Trajectory(
        theta_ref=np.zeros((n, 5)),
        l_ref=np.zeros((n, 10)),
        f_ref=np.zeros((n, 10)),
        l_data=np.zeros((n, 10)),
        f_data=np.zeros((n, 10)),
        delta_le=np.zeros((n, 10)),
        theta_true=theta,
        metadata={},
    )
    a, b, c = (mk(rng.normal(0, 0.3, (n, 5))) for _ in range(3))
    ab = metric_E(a, b).per_frame_rad
    bc = metric_E(b, c).per_frame_rad
    ac = metric_E(a, c).per_frame_rad
    assert np.all(ac <= ab + bc + 1e-12)


def test_trajectory_persistence_roundtrip(tmp_path, null_teach):
    path = str(tmp_path / "traj.csv")
    null_teach.metadata["scenario"] = "unit"
    null_teach.save(path)
    loaded = Trajectory.load(path)
    for name in ("theta_ref", "l_ref", "f_ref", "l_data", "f_data", "delta_le", "theta_true"):
        assert np.array_equal(getattr(loaded, name), getattr(null_teach, name)), name
    assert loaded.metadata["scenario"] == "unit"
    assert loaded.metadata["frames"] == len(null_teach)


def test_trajectory_validation():
    with pytest.raises(DataError):
        Trajectory(
            theta_ref=np.zeros((1, 5)),
            l_ref=np.zeros((1, 10)),
            f_ref=np.zeros((1, 10)),
            l_data=np.zeros((1, 10)),
            f_data=np.zeros((1, 10)),
            delta_le=np.zeros((1, 10)),
            theta_true=np.zeros((1, 5)),
            metadata={},
        )
