# Dev script: push at the elbow attachment point; shoulder-only deflections.
import numpy as np
from tendonarm.arm import scenario_arm, path_lengths, elastic_stretch_inverse, elastic_tension
from tendonarm.plant import ExternalWrench, solve_equilibrium, ZERO_WRENCH
from tendonarm.intersensory import solve_f_ref
from tendonarm.session import JointPath
from tendonarm.scenarios import SWEEP_KEYS

arm = scenario_arm()
path = JointPath([(t, q.copy()) for t, q in SWEEP_KEYS])
FB, K, FMIN = 30.0, 40.0, 26.0

probes = []
for t in [2.5, 5.0, 7.5, 10.0, 12.0]:
    q = arm.clamp(path.at(t))
    fr = solve_f_ref(None, arm, q, f_min=FMIN).f
    l_ref = path_lengths(arm, q) - elastic_stretch_inverse(arm, fr) - (fr - FB) / K
    probes.append((q, fr, l_ref))


def servo_solve(sent, q_seed, f0, wrench=ZERO_WRENCH):
    f = f0.copy(); q = q_seed.copy()
    for _ in range(80):
        motor = sent + (f - FB) / K
        q = solve_equilibrium(arm, motor, wrench, q_seed=q)
        fn = elastic_tension(arm, path_lengths(arm, q, check_limits=False) - motor)
        if np.max(np.abs(fn - f)) < 1e-10:
            return q, fn
        f = 0.5 * f + 0.5 * fn
    return q, f


rng = np.random.default_rng(5)
rows = []
for trial in range(200):
    d = rng.normal(size=3); d /= np.linalg.norm(d)
    mag = rng.uniform(25, 80)
    minf, meandev, eall = 1e9, 0.0, 0.0
    ok = True
    try:
        for q0, fr, l_ref in probes:
            q_d, f_data = servo_solve(l_ref, q0, fr, ExternalWrench(d * mag, "elbow"))
            minf = min(minf, f_data.min())
            meandev += np.abs(q_d - q0).mean() / len(probes)
            dls = elastic_stretch_inverse(arm, f_data) - elastic_stretch_inverse(arm, fr)
            qA, _ = servo_solve(l_ref + dls + (f_data - fr) / K, q_d, fr)
            eall += np.abs(qA - q_d).mean() / len(probes)
    except Exception:
        ok = False
    if not ok or minf < 4.0 or meandev < 0.10:
        continue
    rows.append((eall / meandev, eall, meandev, minf, mag, d.copy()))
rows.sort(key=lambda r: r[0])
print(f"{len(rows)} candidates")
for alpha, eall, meandev, minf, mag, d in rows[:12]:
    print(f"  alpha={alpha:.3f} E_ALL~{eall:.4f} dev={meandev:.3f} minf={minf:5.1f} mag={mag:4.0f} d={d.round(3)}")
