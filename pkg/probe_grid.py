# Dev script: static reproduction proxy over (f_min, K) for a fixed push.
import numpy as np
from tendonarm.arm import scenario_arm, path_lengths, elastic_stretch_inverse, elastic_tension
from tendonarm.plant import ExternalWrench, solve_equilibrium, ZERO_WRENCH
from tendonarm.intersensory import solve_f_ref
from tendonarm.session import JointPath
from tendonarm.scenarios import SWEEP_KEYS

arm = scenario_arm()
path = JointPath([(t, q.copy()) for t, q in SWEEP_KEYS])
FB = 30.0
d = np.array([-0.83461112, -0.54456457, 0.08290785])


def servo_solve(sent, q_seed, f0, K, wrench=ZERO_WRENCH):
    f = f0.copy()
    q = q_seed.copy()
    for _ in range(80):
        motor = sent + (f - FB) / K
        q = solve_equilibrium(arm, motor, wrench, q_seed=q)
        fn = elastic_tension(arm, path_lengths(arm, q, check_limits=False) - motor)
        if np.max(np.abs(fn - f)) < 1e-10:
            return q, fn
        f = 0.5 * f + 0.5 * fn
    return q, f


for fmin in (26.0, 30.0, 34.0):
    # path exactness check
    bad = sum(
        solve_f_ref(None, arm, arm.clamp(path.at(t)), f_min=fmin).torque_residual > 1e-9
        for t in np.arange(0, 14.001, 0.2)
    )
    probes = []
    for t in [2.5, 5.0, 7.5, 10.0, 12.0]:
        q = arm.clamp(path.at(t))
        fr = solve_f_ref(None, arm, q, f_min=fmin).f
        probes.append((q, fr))
    for K in (25.0, 40.0):
        for mag in (30.0, 34.0):
            minf, meandev, eall = 1e9, 0.0, 0.0
            for q0, fr in probes:
                l_ref = path_lengths(arm, q0) - elastic_stretch_inverse(arm, fr) - (fr - FB) / K
                q_d, f_data = servo_solve(l_ref, q0, fr, K, ExternalWrench(d * mag))
                minf = min(minf, f_data.min())
                meandev += np.abs(q_d - q0).mean() / len(probes)
                dls = elastic_stretch_inverse(arm, f_data) - elastic_stretch_inverse(arm, fr)
                qA, _ = servo_solve(l_ref + dls + (f_data - fr) / K, q_d, fr, K)
                eall += np.abs(qA - q_d).mean() / len(probes)
            print(
                f"fmin={fmin} K={K} mag={mag}: bad={bad} minf={minf:5.1f} "
                f"dev={meandev:.3f} E_ALL~{eall:.4f} alpha={eall/meandev:.3f}",
                flush=True,
            )
