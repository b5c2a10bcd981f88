"""Command-line entry point: train surrogates, run experiments, serve live.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.  Angles are
printed in degrees for humans; files stay in radians, mm, and N.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .arm import default_arm, load_arm, save_arm, scenario_arm
from .compensation import StiffnessParams, Variant
from .errors import TendonArmError
from .intersensory import (
    LearnedIntersensory,
    OracleIntersensory,
    sample_training_set,
    train_surrogate,
)
from .plant import NoiseConfig
from .scenarios import BUILTIN_SCENARIOS, get_scenario
from .session import (
    JointPath,
    LimiterConfig,
    Trajectory,
    WrenchProfile,
    comparison_experiment,
    metric_E,
    run_original,
    run_reproduction,
    run_teaching,
)

CONFIG_DIR_ENV = "TENDONARM_CONFIG_DIR"


def _resolve(path: str) -> str:
    if os.path.isabs(path) or os.path.exists(path):
        return path
    base = os.environ.get(CONFIG_DIR_ENV)
    if base:
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    return path


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload))
    else:
        print(text)


def _load_model(kind: str, weights: str | None, arm):
    if kind == "oracle":
        return OracleIntersensory(arm)
    if weights is None:
        raise TendonArmError("--weights is required for a learned model")
    return LearnedIntersensory.load(_resolve(weights))


def _load_scenario_arm(args):
    if getattr(args, "arm", None):
        return load_arm(_resolve(args.arm))
    return scenario_arm()


def cmd_train(args) -> int:
    arm = _load_scenario_arm(args)
    data = sample_training_set(arm, args.samples, seed=args.seed, f_min=args.f_min)
    model = train_surrogate(data, epochs=args.epochs, seed=args.seed)
    model.save(args.out)
    meta = model.metadata
    _emit(
        args,
        {"out": args.out, **meta},
        "trained on {samples} samples ({epochs} epochs, seed {seed})\n"
        "held-out: |l| max {holdout_l_max_mm:.3f} mm rms {holdout_l_rms_mm:.3f} mm; "
        "|theta| max {holdout_theta_max_rad:.4f} rad rms {holdout_theta_rms_rad:.4f} rad\n"
        "weights -> {out}".format(out=args.out, **meta),
    )
    return 0


def _scenario_from_args(args):
    scenario = get_scenario(args.scenario)
    if args.config:
        with open(_resolve(args.config)) as fh:
            doc = json.load(fh)
        if "path_keys" in doc:
            scenario.path = JointPath(
                [(k["t"], np.array(k["q"])) for k in doc["path_keys"]]
            )
        if "wrench" in doc:
            scenario.wrench = WrenchProfile.from_dict(doc["wrench"])
        if "limiter" in doc:
            scenario.limiter = LimiterConfig(**doc["limiter"])
        if "f_min" in doc:
            scenario.f_min = doc["f_min"]
        if "stiffness" in doc:
            scenario.stiffness = StiffnessParams(**doc["stiffness"])
        if "seed" in doc:
            scenario.seed = doc["seed"]
        if "noise" in doc:
            scenario.noise = NoiseConfig(**doc["noise"])
    if args.limiter is not None:
        scenario.limiter = (
            LimiterConfig(enabled=True, f_max=args.limiter)
            if args.limiter > 0
            else LimiterConfig(enabled=False)
        )
    if args.seed is not None:
        scenario.seed = args.seed
    return scenario


def cmd_compare(args) -> int:
    scenario = _scenario_from_args(args)
    arm = _load_scenario_arm(args)
    model = _load_model(args.model, args.weights, arm)
    out = comparison_experiment(
        arm,
        model,
        scenario.path,
        scenario.wrench,
        scenario.stiffness,
        scenario.limiter,
        scenario.f_min,
        scenario.noise,
        scenario.seed,
    )
    report = out["report"]
    report["scenario"] = scenario.name
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
        csv_path = os.path.splitext(args.out)[0] + ".csv"
        with open(csv_path, "w") as fh:
            fh.write("variant,E_rad,E_deg\n")
            for name, res in report["variants"].items():
                fh.write(f"{name},{res['E_rad']!r},{res['E_deg']!r}\n")
    if args.json:
        print(json.dumps({k: v for k, v in report.items() if k != "curves"}))
    else:
        print(f"scenario {scenario.name} (limiter "
              f"{'on, f_max=%.0f N' % report['f_max'] if report['limiter_enabled'] else 'off'})")
        print(f"{'variant':8s} {'E [rad]':>10s} {'E [deg]':>10s}")
        for v in Variant:
            res = report["variants"].get(v.value)
            if res is None:
                print(f"{v.value:8s} {'failed':>10s} {report['errors'].get(v.value, '')}")
            else:
                print(f"{v.value:8s} {res['E_rad']:10.5f} {res['E_deg']:10.3f}")
    return 0


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    arm = _load_scenario_arm(args)
    model = _load_model(args.model, args.weights, arm)
    traj = run_original(
        arm, model, scenario.path, scenario.stiffness, scenario.limiter,
        scenario.f_min, scenario.noise, scenario.seed,
    )
    traj.metadata["scenario"] = scenario.name
    traj.save(args.out)
    _emit(args, {"out": args.out, "frames": len(traj)},
          f"original run: {len(traj)} frames -> {args.out}")
    return 0


def cmd_teach(args) -> int:
    scenario = _scenario_from_args(args)
    arm = _load_scenario_arm(args)
    model = _load_model(args.model, args.weights, arm)
    if args.wrench:
        with open(_resolve(args.wrench)) as fh:
            scenario.wrench = WrenchProfile.from_dict(json.load(fh))
    traj = run_teaching(
        arm, model, scenario.path, scenario.wrench, scenario.stiffness,
        scenario.limiter, scenario.f_min, scenario.noise, scenario.seed,
    )
    traj.metadata["scenario"] = scenario.name
    traj.save(args.out)
    dev = float(np.abs(traj.theta_true - traj.theta_ref).max())
    _emit(args, {"out": args.out, "frames": len(traj), "peak_deviation_rad": dev},
          f"teaching run: {len(traj)} frames, peak deviation "
          f"{np.degrees(dev):.2f} deg -> {args.out}")
    return 0


def cmd_reproduce(args) -> int:
    scenario = _scenario_from_args(args)
    arm = _load_scenario_arm(args)
    model = _load_model(args.model, args.weights, arm)
    taught = Trajectory.load(_resolve(args.taught))
    variant = Variant.from_name(args.variant)
    rep = run_reproduction(
        arm, model, taught, variant, scenario.stiffness, scenario.limiter,
        scenario.noise, scenario.seed,
    )
    rep.save(args.out)
    res = metric_E(taught, rep)
    _emit(
        args,
        {"out": args.out, "variant": variant.value, **res.to_dict()},
        f"reproduction ({variant.value}): E = {res.e_rad:.5f} rad "
        f"({res.e_deg:.3f} deg) -> {args.out}",
    )
    return 0


def cmd_export_arm(args) -> int:
    arm = scenario_arm() if args.which == "scenario" else default_arm()
    save_arm(arm, args.out)
    _emit(args, {"out": args.out}, f"{args.which} arm model -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .bridge import serve_session  # deferred: pulls in fastapi/uvicorn

    scenario = _scenario_from_args(args)
    arm = _load_scenario_arm(args)
    model = _load_model(args.model, args.weights, arm)
    print(f"ready: scenario {scenario.name} on port {args.port} "
          f"(protocol v1, step rate {args.step_rate})")
    serve_session(
        arm, model, scenario, host=args.host, port=args.port, step_rate=args.step_rate
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tendonarm",
        description="Tendon-driven arm teaching simulator (protocol v1).",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    def positive_int(v):
        n = int(v)
        if n <= 0:
            raise argparse.ArgumentTypeError("must be a positive integer")
        return n

    p = sub.add_parser("train", help="train the learned intersensory model")
    p.add_argument("--samples", type=positive_int, required=True)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f-min", type=float, default=20.0)
    p.add_argument("--arm", help="arm model JSON (default: built-in scenario arm)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="sweep-push",
                        choices=sorted(BUILTIN_SCENARIOS))
    common.add_argument("--config", help="scenario config JSON; flags win")
    common.add_argument("--model", choices=["oracle", "learned"], default="oracle")
    common.add_argument("--weights", help="learned-model weights JSON")
    common.add_argument("--arm", help="arm model JSON (default: built-in scenario arm)")
    common.add_argument("--limiter", type=float, default=None,
                        help="limiter threshold f_max in N; 0 disables")
    common.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("compare", parents=[common],
                       help="run the nine-variant comparison experiment")
    p.add_argument("--out", help="report JSON path (CSV written alongside)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[common], help="run the original motion")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("teach", parents=[common], help="run a teaching session")
    p.add_argument("--wrench", help="wrench profile JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_teach)

    p = sub.add_parser("reproduce", parents=[common], help="reproduce a taught run")
    p.add_argument("--taught", required=True, help="taught trajectory CSV")
    p.add_argument("--variant", required=True,
                   choices=[v.value for v in Variant])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("export-arm", help="write an arm model JSON")
    p.add_argument("--which", choices=["default", "scenario"], default="scenario")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_arm)

    p = sub.add_parser("serve", parents=[common],
                       help="serve a live session over WebSocket (protocol v1)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8930)
    p.add_argument("--step-rate", type=float, default=1.0,
                   help="real-time factor for the 8 ms tick pacing")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TendonArmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2 if "unknown" in str(err) or "required" in str(err) else 1
    except FileNotFoundError as err:
        print(f"error: missing file: {err.filename}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
