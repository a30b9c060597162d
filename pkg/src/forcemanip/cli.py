"""Command-line surface: train, probe, evaluate, corpus, plot-data.

Exit codes: 0 success, 2 training did not converge, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dynamics, harness
from .dynamics import JointKind
from .estimator import ProbeConfig, classify, default_probe_directions, probe, save_trajectory_csv
from .harness import ConfigurationError, SimulatedPlant, TrainRunConfig
from .td3 import TD3Config

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG_ERROR = 3


def _load_config_overrides(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None


def _resolve_manifest(args):
    if getattr(args, "corpus", None):
        return corpus_mod.load_corpus(args.corpus)
    return corpus_mod.build_default_corpus()


def cmd_corpus(args):
    manifest = corpus_mod.build_default_corpus()
    out = Path(args.out or "corpus")
    path = corpus_mod.write_corpus(manifest, out)
    print(f"wrote {len(manifest.train)} train + {len(manifest.eval)} eval specs; manifest: {path}")
    return EXIT_OK


def cmd_train(args):
    overrides = _load_config_overrides(args.config)
    td3_kwargs = overrides.get("td3", {})
    run_kwargs = overrides.get("train", {})
    manifest = _resolve_manifest(args)
    kind = JointKind(args.kind)
    kwargs = {"seed": args.seed, "workers": args.workers, "step_budget": args.budget}
    kwargs.update(run_kwargs)  # config-file overrides win over flags
    try:
        config = TrainRunConfig(kind=kind, manifest=manifest,
                                td3=TD3Config(**td3_kwargs), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid train config: {exc}") from None
    out = Path(args.out or "runs") / f"{kind.value}_seed{args.seed}"
    result = harness.train(config, out_dir=out)
    status = "converged" if result.converged else "NOT converged"
    print(f"{status} after {result.env_steps} env steps, {result.episodes} episodes "
          f"(stage {result.final_stage}); checkpoint: {result.checkpoint_path}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_probe(args):
    spec = corpus_mod.load_spec(args.object)
    rng = np.random.default_rng(args.seed)
    anchor = dynamics.sample_contact_point(spec, rng)
    plant = SimulatedPlant(spec, anchor)
    cfg = ProbeConfig(directions=default_probe_directions(spec.base_yaw))
    xi = probe(plant, cfg)
    estimate = classify(xi, cfg)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_trajectory_csv(xi, out / f"{spec.id}_trajectory.csv")
    est_path = out / f"{spec.id}_estimate.txt"
    lines = [
        f"kind = {estimate.kind}",
        f"loglik_prismatic = {estimate.loglik_prismatic!r}",
        f"loglik_revolute = {estimate.loglik_revolute!r}",
        f"axis = {' '.join(repr(float(x)) for x in estimate.parameters.axis)}",
    ]
    if estimate.kind == "revolute":
        lines.append(f"point = {' '.join(repr(float(x)) for x in estimate.parameters.point)}")
        lines.append(f"radius = {estimate.parameters.radius!r}")
    else:
        lines.append(f"origin = {' '.join(repr(float(x)) for x in estimate.parameters.origin)}")
    est_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"classified {spec.id} as {estimate.kind}; wrote {est_path}")
    return EXIT_OK


def cmd_evaluate(args):
    manifest = _resolve_manifest(args)
    checkpoints = {
        JointKind.PRISMATIC: args.prismatic_ckpt,
        JointKind.REVOLUTE: args.revolute_ckpt,
    }
    for kind, path in checkpoints.items():
        if path is None or not Path(path).exists():
            raise ConfigurationError(f"missing {kind.value} checkpoint: {path}")
    report = harness.evaluate(checkpoints, manifest, trials=args.trials, seed=args.seed,
                              oracle_params=args.oracle_params)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    harness.write_eval_report(report, out / "eval_report.csv")
    harness.save_eval_report_json(report, out / "eval_report.json")
    for cls, (mean, sd) in sorted(report.class_rates().items()):
        print(f"{cls}: success {mean:.3f} +/- {sd:.3f}")
    return EXIT_OK


def cmd_plot_data(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.train_log:
        harness.emit_learning_curve_csv(args.train_log, out / "learning_curve.csv")
        print(f"wrote {out / 'learning_curve.csv'}")
    if args.eval_report:
        reports = [harness.load_eval_report_json(p) for p in args.eval_report]
        harness.emit_success_rate_csv(reports, out / "success_rates.csv")
        print(f"wrote {out / 'success_rates.csv'}")
    if not args.train_log and not args.eval_report:
        raise ConfigurationError("plot-data needs --train-log and/or --eval-report")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forcemanip",
                                     description="Force-space manipulation skills for articulated objects")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--config", help="JSON file with td3/train overrides")
    parser.add_argument("--out", help="output directory")

    # global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="write the default object corpus", parents=[common])
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="train a policy for one joint kind", parents=[common])
    p.add_argument("--kind", choices=["prismatic", "revolute"], required=True)
    p.add_argument("--corpus", help="corpus manifest path (default: built-in corpus)")
    p.add_argument("--budget", type=int, default=500_000, help="environment step budget")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="probe one object and classify its joint", parents=[common])
    p.add_argument("--object", required=True, help="object spec file")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("evaluate", help="run the held-out evaluation protocol", parents=[common])
    p.add_argument("--corpus", help="corpus manifest path (default: built-in corpus)")
    p.add_argument("--prismatic-ckpt", required=True)
    p.add_argument("--revolute-ckpt", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--oracle-params", action="store_true",
                   help="bypass the estimator with ground-truth joint parameters")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot-data", help="emit CSV plot data from logs/reports", parents=[common])
    p.add_argument("--train-log", help="training JSONL log")
    p.add_argument("--eval-report", nargs="*", default=[], help="eval report JSON file(s)")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, corpus_mod.SpecParseError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
