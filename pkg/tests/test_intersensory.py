import numpy as np
import pytest

from tendonarm.arm import (
    default_arm,
    elastic_stretch_inverse,
    path_lengths,
)
from tendonarm.errors import DataError, DomainError
from tendonarm.intersensory import (
    LearnedIntersensory,
    OracleIntersensory,
    TrainingSet,
    sample_training_set,
    solve_f_ref,
    train_surrogate,
)

from conftest import random_pose


def test_oracle_hl_zero_tension_is_path_length(oracle, sarm):
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    out = oracle.eval_hl(theta, np.zeros(sarm.n_muscles))
    assert np.allclose(out, path_lengths(sarm, theta), atol=1e-12)


def test_oracle_hl_worked_example():
    arm = default_arm(k1=5.0, k2=0.5)
    oracle = OracleIntersensory(arm)
    theta = np.array([0.3, 0.0, 0.2, 1.0, -0.3])
    out = oracle.eval_hl(theta, np.full(10, 100.0))
    assert np.allclose(out, path_lengths(arm, theta) - 10.0, atol=1e-9)


def test_oracle_consistency_identity(oracle, sarm, rng):
    for _ in range(20):
        theta = random_pose(sarm, rng)
        f = rng.uniform(0.0, 120.0, sarm.n_muscles)
        lhs = oracle.eval_hl(theta, f) + elastic_stretch_inverse(sarm, f)
        assert np.allclose(lhs, path_lengths(sarm, theta), atol=1e-9)


def test_oracle_h2_nonpositive_and_theta_free(oracle, sarm, rng):
    for _ in range(20):
        theta = random_pose(sarm, rng)
        f = rng.uniform(0.0, 150.0, sarm.n_muscles)
        h2 = oracle.eval_h2(theta, f)
        assert np.all(h2 <= 1e-12)
        other = random_pose(sarm, rng)
        assert np.allclose(h2, oracle.eval_h2(other, f), atol=1e-9)
    assert np.allclose(oracle.eval_h2(theta, np.zeros(sarm.n_muscles)), 0.0)


def test_oracle_h2_monotone(oracle, sarm):
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    f = np.full(sarm.n_muscles, 40.0)
    assert np.all(oracle.eval_h2(theta, f + 20.0) <= oracle.eval_h2(theta, f) + 1e-12)


def test_oracle_roundtrip_100_poses(oracle, sarm, rng):
    worst = 0.0
    for _ in range(100):
        theta = random_pose(sarm, rng)
        f = solve_f_ref(oracle, sarm, theta, f_min=15.0).f + rng.uniform(0, 30, sarm.n_muscles)
        l = oracle.eval_hl(theta, f)
        back = oracle.eval_htheta(l, f, seed=theta + rng.normal(0, 0.05, 5))
        worst = max(worst, np.abs(back - theta).max())
    assert worst <= 1e-6


def test_oracle_est_zero_tension_case(oracle, sarm):
    theta = np.array([0.45, 0.1, 0.05, 0.8, 0.1])
    l = path_lengths(sarm, theta)
    back = oracle.eval_htheta(l, np.zeros(sarm.n_muscles), seed=theta + 0.03)
    assert np.abs(back - theta).max() < 1e-6


def test_oracle_est_handles_slack_muscles(oracle, sarm):
    # A slack muscle reports zero tension; its sensed length is an upper
    # bound only and must not bias the estimate.
    theta = np.array([0.5, 0.15, 0.1, 0.9, 0.2])
    f = solve_f_ref(oracle, sarm, theta, f_min=20.0).f
    l = oracle.eval_hl(theta, f)
    f_slack = f.copy()
    f_slack[4] = 0.0
    l_slack = l.copy()
    l_slack[4] = path_lengths(sarm, theta)[4] + 8.0  # longer than the path: slack
    back = oracle.eval_htheta(l_slack, f_slack, seed=theta + 0.02)
    assert np.abs(back - theta).max() < 1e-6


def test_oracle_input_validation(oracle, sarm):
    with pytest.raises(DomainError):
        oracle.eval_hl(np.zeros(5) + 99.0, np.zeros(sarm.n_muscles))
    with pytest.raises(DomainError):
        oracle.eval_hl(np.full(5, 0.5), np.full(sarm.n_muscles, -1.0))


def test_training_set_consistency_and_determinism(sarm):
    a = sample_training_set(sarm, 40, seed=5, f_min=20.0)
    b = sample_training_set(sarm, 40, seed=5, f_min=20.0)
    assert np.array_equal(a.theta, b.theta)
    assert np.array_equal(a.f, b.f)
    assert np.array_equal(a.l, b.l)
    for i in range(len(a)):
        expect = path_lengths(sarm, a.theta[i]) - elastic_stretch_inverse(sarm, a.f[i])
        assert np.allclose(a.l[i], expect, atol=1e-6)


def test_training_set_csv_roundtrip(tmp_path, sarm):
    data = sample_training_set(sarm, 12, seed=3, f_min=20.0)
    path = str(tmp_path / "train.csv")
    data.save_csv(path)
    loaded = TrainingSet.load_csv(path)
    assert np.array_equal(loaded.theta, data.theta)
    assert np.array_equal(loaded.f, data.f)
    assert np.array_equal(loaded.l, data.l)


def test_sample_training_set_validates_n(sarm):
    with pytest.raises(DomainError):
        sample_training_set(sarm, 0, seed=1)


def test_zero_epochs_predicts_mean(sarm):
    data = sample_training_set(sarm, 400, seed=2, f_min=20.0)
    model = train_surrogate(data, epochs=0, seed=0)
    pred = model.eval_hl(data.theta, data.f)
    assert pred.std(axis=0).max() < 1e-9  # constant per output dimension
    rms = np.sqrt(np.mean((pred - data.l) ** 2))
    std = np.sqrt(np.mean((data.l - data.l.mean(axis=0)) ** 2))
    assert abs(rms - std) / std < 0.1


def test_training_determinism(sarm):
    data = sample_training_set(sarm, 300, seed=2, f_min=20.0)
    m1 = train_surrogate(data, epochs=5, seed=9)
    m2 = train_surrogate(data, epochs=5, seed=9)
    for w1, w2 in zip(m1.net_l.w, m2.net_l.w):
        assert np.array_equal(w1, w2)
    for w1, w2 in zip(m1.net_theta.w, m2.net_theta.w):
        assert np.array_equal(w1, w2)


def test_learned_model_json_roundtrip(tmp_path, sarm):
    data = sample_training_set(sarm, 200, seed=2, f_min=20.0)
    model = train_surrogate(data, epochs=3, seed=1)
    path = str(tmp_path / "weights.json")
    model.save(path)
    loaded = LearnedIntersensory.load(path)
    theta = data.theta[:5]
    f = data.f[:5]
    assert np.array_equal(model.eval_hl(theta, f), loaded.eval_hl(theta, f))
    assert loaded.metadata["epochs"] == 3


def test_train_empty_rejected():
    with pytest.raises(DataError):
        train_surrogate(TrainingSet(np.zeros((0, 5)), np.zeros((0, 10)), np.zeros((0, 10)), seed=0))


def test_solve_f_ref_model_mismatch(sarm):
    class Fake:
        n_muscles = 7

    with pytest.raises(DomainError):
        solve_f_ref(Fake(), sarm, np.array([0.5, 0.15, 0.1, 0.9, 0.2]))
