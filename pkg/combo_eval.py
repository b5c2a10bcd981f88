# Dev script: evaluate combined-lever scenario candidates.
import numpy as np
from tendonarm.arm import scenario_arm
from tendonarm.intersensory import OracleIntersensory, solve_f_ref
from tendonarm.session import (
    JointPath, WrenchProfile, LimiterConfig, run_teaching, run_reproduction, metric_E,
)
from tendonarm.compensation import StiffnessParams, Variant
from tendonarm.scenarios import SWEEP_KEYS

arm = scenario_arm()
path = JointPath([(t, q.copy()) for t, q in SWEEP_KEYS])
FMIN, K = 26.0, 40.0
bad = 0
for t in np.arange(0, 14.001, 0.2):
    sol = solve_f_ref(None, arm, arm.clamp(path.at(t)), f_min=FMIN)
    bad += sol.torque_residual > 1e-9
print("path nodes not exact at fmin=26:", bad, flush=True)

d = np.array([-0.83461112, -0.54456457, 0.08290785])
stiff = StiffnessParams(30.0, K)
oracle = OracleIntersensory(arm)
for mag in [34.0, 38.0]:
    F = d * mag
    push = WrenchProfile(knots=[(1.0, np.zeros(3)), (4.0, F), (10.0, F), (13.0, np.zeros(3))])
    taught = run_teaching(arm, oracle, path, push, stiff, LimiterConfig(), f_min=FMIN, seed=0)
    dev = np.abs(taught.theta_true - taught.theta_ref)
    slack = int((taught.f_data < 0.5).any(axis=1).sum())
    print(f"mag={mag}: peak={dev.max():.3f} mean={dev.mean():.3f} slack={slack} "
          f"f=({taught.f_data.min():.1f},{taught.f_data.max():.0f})", flush=True)
    res = {}
    for v in Variant:
        rep = run_reproduction(arm, oracle, taught, v, stiff, LimiterConfig(), seed=0)
        res[v.value] = metric_E(taught, rep).e_rad
    print("   " + " ".join(f"{k}={v:.4f}" for k, v in res.items()), flush=True)
    print(f"   ALLmin={res['ALL'] <= min(res.values())+1e-9} ALL<=0.02={res['ALL']<=0.02} "
          f"NONE>=0.10={res['NONE']>=0.10}", flush=True)
