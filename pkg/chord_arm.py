# Dev script: joint-local chord routing ("capstan collar" style) evaluation.
import numpy as np
from tendonarm.arm import (
    ArmModel, Muscle, BASE, UPPER, FORE, muscle_jacobian, gravity_torque,
    path_lengths, elastic_stretch_inverse, elastic_tension,
)
from tendonarm.plant import ExternalWrench, solve_equilibrium, ZERO_WRENCH, _evaluate
from tendonarm.tension import distribute_tensions

BOX = np.array([[-0.2, 1.1], [-0.6, 0.8], [-0.7, 0.7], [0.4, 1.7], [-0.7, 0.7]])


def ring_point(axis, rho, az, zoff):
    if axis == "y":  # pitch circle in x-z plane (azimuth from +x toward +z)
        return np.array([rho * np.cos(az), zoff, rho * np.sin(az)])
    if axis == "x":  # roll circle in y-z plane
        return np.array([zoff, rho * np.cos(az), rho * np.sin(az)])
    return np.array([rho * np.cos(az), rho * np.sin(az), zoff])  # yaw, x-y plane


def build_chord_arm(k1=1.2, k2=0.08, rho=0.065, delta=0.006):
    Lu = 0.25
    elbow_u = np.array([0.0, 0.0, -Lu])
    muscles = []

    def member(name, fp, fc, cp, cc, axis, az_parent, az_child, anchor, k1=k1, k2=k2):
        v = (fp, cp + ring_point(axis, rho, az_parent, delta))
        b = (fc, cc + ring_point(axis, rho, az_child, -delta))
        muscles.append(Muscle(name, [(fp, anchor), v, b], k1, k2))

    # For a joint angle q (child azimuth moves with +q about the axis), the
    # chord angle is theta = az_parent - (az_child + q); keep theta in
    # [~0.35, ~2.7] over the joint's travel for both members.
    # S-p: q in [-0.2, 1.1]
    member("S-p/a", BASE, UPPER, np.zeros(3), np.zeros(3), "y",
           np.deg2rad(-150), np.deg2rad(-245), np.array([0.06, 0.02, 0.08]))
    member("S-p/b", BASE, UPPER, np.zeros(3), np.zeros(3), "y",
           np.deg2rad(-35), np.deg2rad(25), np.array([0.06, -0.02, 0.08]))
    # S-r: q in [-0.6, 0.8]
    member("S-r/a", BASE, UPPER, np.zeros(3), np.zeros(3), "x",
           np.deg2rad(-150), np.deg2rad(-250), np.array([0.02, 0.06, 0.08]))
    member("S-r/b", BASE, UPPER, np.zeros(3), np.zeros(3), "x",
           np.deg2rad(-30), np.deg2rad(30), np.array([-0.02, 0.06, 0.08]))
    # S-y: q in [-0.7, 0.7]
    member("S-y/a", BASE, UPPER, np.zeros(3), np.zeros(3), "z",
           np.deg2rad(60), np.deg2rad(-35), np.array([0.07, 0.07, 0.07]))
    member("S-y/b", BASE, UPPER, np.zeros(3), np.zeros(3), "z",
           np.deg2rad(150), np.deg2rad(245), np.array([-0.07, 0.07, 0.07]))
    # E-p: q in [0.4, 1.7] (always flexed)
    member("E-p/a", UPPER, FORE, elbow_u, np.zeros(3), "y",
           np.deg2rad(-160), np.deg2rad(-215), np.array([0.05, 0.02, -0.10]))
    member("E-p/b", UPPER, FORE, elbow_u, np.zeros(3), "y",
           np.deg2rad(-15), np.deg2rad(5), np.array([0.05, -0.02, -0.10]))
    # E-y: q in [-0.7, 0.7]
    member("E-y/a", UPPER, FORE, elbow_u, np.zeros(3), "z",
           np.deg2rad(60), np.deg2rad(-35), np.array([0.07, 0.07, -0.10]))
    member("E-y/b", UPPER, FORE, elbow_u, np.zeros(3), "z",
           np.deg2rad(150), np.deg2rad(245), np.array([-0.07, 0.07, -0.10]))
    return ArmModel(muscles=muscles, joint_limits=BOX.copy())


if __name__ == "__main__":
    arm = build_chord_arm()
    rng = np.random.default_rng(0)
    G0 = muscle_jacobian(arm, np.zeros(5), check_limits=False)
    np.set_printoptions(precision=1, suppress=True, linewidth=150)
    print("G at neutral:\n", G0)
    print("rank:", np.linalg.matrix_rank(G0, tol=1e-6), " colsum:", G0.sum(axis=0).round(2))

    own = [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 3), (8, 4), (9, 4)]
    min_arm = np.full(10, 1e9)
    max_grad = 0.0
    h = 1e-4
    for _ in range(80):
        q = rng.uniform(BOX[:, 0], BOX[:, 1])
        G = muscle_jacobian(arm, q, check_limits=False)
        for m, c in own:
            min_arm[m] = min(min_arm[m], abs(G[m, c]))
        for j in range(5):
            dq = np.zeros(5); dq[j] = h
            gp = muscle_jacobian(arm, q + dq, check_limits=False)
            gm = muscle_jacobian(arm, q - dq, check_limits=False)
            max_grad = max(max_grad, np.abs((gp - gm) / (2 * h)).max())
    print("min own arms over box:", min_arm.round(1))
    print("max |dG/dq| over box:", round(max_grad, 1), "mm/rad^2")

    bad, fmax, worst_eig = 0, 0.0, 99.0
    for i in range(60):
        q = rng.uniform(BOX[:, 0], BOX[:, 1])
        sol = distribute_tensions(muscle_jacobian(arm, q, check_limits=False),
                                  gravity_torque(arm, q, check_limits=False), f_min=26.0)
        fmax = max(fmax, sol.f.max())
        bad += sol.torque_residual > 1e-9
        if i < 25:
            l_cmd = path_lengths(arm, q, check_limits=False) - elastic_stretch_inverse(arm, sol.f)
            H = np.empty((5, 5))
            for j in range(5):
                dq = np.zeros(5); dq[j] = 1e-5
                H[:, j] = (_evaluate(arm, q + dq, l_cmd, ZERO_WRENCH)[1]
                           - _evaluate(arm, q - dq, l_cmd, ZERO_WRENCH)[1]) / 2e-5
            worst_eig = min(worst_eig, np.linalg.eigvalsh(0.5 * (H + H.T)).min())
    print(f"exact-balance failures: {bad}/60, fmax={fmax:.0f}, worst_eig={worst_eig:.2f}")
