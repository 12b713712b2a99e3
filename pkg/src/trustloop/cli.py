"""Command line front end.

Every command takes --seed and --config, writes only via the text formats
in datasets/sim, and prints one machine-parseable summary line of
``key=value`` pairs on success.  No timestamps anywhere, so a rerun with
the same arguments produces byte-identical files and output.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from ._util import fmt_float, rng_for
from .ablation import SETTINGS, run_ablation, summary_table, write_csv, write_report_records
from .config import ExperimentConfig, load_config
from .datasets import (
    load_level_dataset,
    load_preference_dataset,
    save_query_batch,
)
from .model import InputScale, TrustModel
from .nn import init_params
from .queries import TrainingPool, synthesize_queries
from .rater import Oracle
from .sim import (
    CONTROL_LOWER,
    CONTROL_UPPER,
    ControlParams,
    extract_features,
    save_trajectory,
    simulate,
)
from .training import evaluate, train_level, train_preference


def _load_experiment(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config


def _fresh_model(config: ExperimentConfig, seed: int) -> TrustModel:
    box = config.feature_box
    return TrustModel(
        config.network,
        init_params(config.network, seed=seed),
        config.demarcations,
        InputScale.from_bounds(box.lower, box.upper),
    )


def _kv_line(command: str, pairs: list[tuple[str, object]]) -> str:
    rendered = []
    for key, value in pairs:
        if isinstance(value, float):
            rendered.append(f"{key}={fmt_float(value)}")
        else:
            rendered.append(f"{key}={value}")
    return " ".join([command] + rendered)


def cmd_simulate(args) -> int:
    config = _load_experiment(args)
    seed = args.seed if args.seed is not None else config.session.seed
    out = Path(args.out)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    rng = rng_for(seed, "cli-simulate")
    rows = []
    for i in range(args.count):
        params = ControlParams(
            commanded_speed=rng.uniform(CONTROL_LOWER[0], CONTROL_UPPER[0]),
            formation_spacing=rng.uniform(CONTROL_LOWER[1], CONTROL_UPPER[1]),
            heading_noise_std=rng.uniform(CONTROL_LOWER[2], CONTROL_UPPER[2]),
        )
        trajectory_id = f"traj-{i:05d}"
        traj = simulate(
            params,
            config.scenario,
            seed=int(rng.integers(2**31)),
            trajectory_id=trajectory_id,
        )
        rel = f"trajectories/{trajectory_id}.txt"
        save_trajectory(out / rel, traj)
        psi = extract_features(traj)
        fields = [trajectory_id, rel]
        fields += [fmt_float(v) for v in (params.commanded_speed, params.formation_spacing, params.heading_noise_std)]
        fields += [fmt_float(v) for v in psi]
        rows.append(" ".join(fields))
    manifest = out / "manifest.txt"
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(f"# trustloop-manifest v1 count={args.count} dim=3\n")
        for row in rows:
            fh.write(row + "\n")
    print(_kv_line("simulate", [("count", args.count), ("manifest", manifest)]))
    return 0


def cmd_train(args) -> int:
    config = _load_experiment(args)
    train_cfg = config.stl.train
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    if args.task == "a":
        if not args.levels:
            print("error: --task a requires --levels", file=sys.stderr)
            return 2
        dataset = load_level_dataset(args.levels)
        if args.checkpoint_in:
            model = TrustModel.load(args.checkpoint_in)
        else:
            model = _fresh_model(config, train_cfg.seed)
        result = train_level(model, dataset, train_cfg)
        pairs = [("task", "a"), ("records", len(dataset))]
    else:
        if not args.checkpoint_in:
            print(
                "error: --task b requires --checkpoint-in with the level-trained model",
                file=sys.stderr,
            )
            return 2
        if not args.prefs:
            print("error: --task b requires --prefs", file=sys.stderr)
            return 2
        model = TrustModel.load(args.checkpoint_in)
        dataset = load_preference_dataset(args.prefs)
        result = train_preference(
            model, dataset, train_cfg, lwf_weight=config.stl.lwf_weight
        )
        pairs = [("task", "b"), ("records", len(dataset)), ("lwf_weight", config.stl.lwf_weight)]
    result.model.save(args.checkpoint_out)
    pairs += [
        ("epochs", train_cfg.epochs),
        ("initial_loss", result.initial_loss),
        ("final_loss", result.final_loss),
        ("checkpoint", args.checkpoint_out),
    ]
    print(_kv_line("train", pairs))
    return 0


def cmd_active_query(args) -> int:
    config = _load_experiment(args)
    query_cfg = config.query
    if args.seed is not None:
        query_cfg = dataclasses.replace(query_cfg, seed=args.seed)
    model = TrustModel.load(args.checkpoint)
    dataset = load_level_dataset(args.levels)
    pool = TrainingPool.from_dataset(dataset)
    queries = synthesize_queries(model, pool, config.feature_box, query_cfg, args.count)
    ids = [f"q-{i:04d}" for i in range(len(queries))]
    save_query_batch(args.out, queries, ["active"] * len(queries), ids)
    print(_kv_line("active-query", [("count", len(queries)), ("out", args.out)]))
    return 0


def cmd_evaluate(args) -> int:
    model = TrustModel.load(args.checkpoint)
    levels = load_level_dataset(args.levels)
    prefs = load_preference_dataset(args.prefs)
    report = evaluate(model, levels, prefs)
    print(
        _kv_line(
            "evaluate",
            [
                ("levels", report.n_levels),
                ("pairs", report.n_pairs),
                ("level_accuracy", report.level_accuracy),
                ("preference_accuracy", report.preference_accuracy),
            ],
        )
    )
    return 0


def cmd_ablation(args) -> int:
    config = _load_experiment(args)
    settings = args.settings.split(",") if args.settings else list(SETTINGS)
    seeds = [int(s) for s in args.seeds.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for setting in settings:
        report = run_ablation(config, setting, seeds)
        reports.append(report)
        write_report_records(out / f"{setting}.txt", report)
    write_csv(out / "summary.csv", reports)
    table = summary_table(reports)
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(table)
    print(_kv_line("ablation", [("settings", len(reports)), ("seeds", len(seeds)), ("out", out)]))
    return 0


def cmd_rate(args) -> int:
    config = _load_experiment(args)
    oracle_spec = config.oracle
    if args.seed is not None:
        oracle_spec = dataclasses.replace(oracle_spec, seed=args.seed)
    oracle = Oracle(oracle_spec)
    psi = np.array([float(v) for v in args.features.split(",")])
    print(
        _kv_line(
            "rate",
            [
                ("true_trust", oracle.true_trust(psi)),
                ("level", oracle.rate_level(psi, config.demarcations)),
            ],
        )
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_experiment(args)
    app = create_app(config, out_dir=args.out, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustloop",
        description="Trust model training, query synthesis, and simulation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--config", default=None, help="YAML experiment config")

    p = sub.add_parser("simulate", help="generate trajectories and a feature manifest")
    common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit the trust model on levels (task a) or preferences (task b)")
    common(p)
    p.add_argument("--task", choices=("a", "b"), required=True)
    p.add_argument("--levels", default=None, help="level dataset file (task a)")
    p.add_argument("--prefs", default=None, help="preference dataset file (task b)")
    p.add_argument("--checkpoint-in", default=None, help="starting parameters; required for task b")
    p.add_argument("--checkpoint-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("active-query", help="synthesize informative feature queries")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--levels", required=True, help="labeled pool the queries diversify against")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True, help="queries file")
    p.set_defaults(func=cmd_active_query)

    p = sub.add_parser("evaluate", help="held-out accuracy of a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--levels", required=True)
    p.add_argument("--prefs", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablation", help="run data-regime comparisons across seeds")
    common(p)
    p.add_argument("--settings", default=None, help=f"comma list from {','.join(SETTINGS)}")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("rate", help="query the synthetic rater at a feature point")
    common(p)
    p.add_argument("--features", required=True, help="comma-separated feature values")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("serve", help="run the labeling service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--out", default=None, help="session data directory")
    p.add_argument("--static", default=None, help="directory of frontend assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001, surface as exit code for scripts
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
