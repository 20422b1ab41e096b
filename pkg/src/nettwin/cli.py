"""Command line interface.

Exit codes: 0 on success, 1 on a runtime failure (bad file, infeasible
threshold, port taken), 2 on usage errors (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import NettwinError
from .learn import GbdtParams, RfParams
from .metrics import THRESHOLD_STRATEGIES
from .pipeline import (
    LEARNERS,
    stage_attribute,
    stage_evaluate,
    stage_label,
    stage_preprocess,
    stage_replay,
    stage_select_model,
    stage_simulate,
    stage_train,
)

PROFILES = ("iiot_apt", "enterprise_flow", "simulator")


def _print(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _gbdt_params(args) -> GbdtParams | None:
    overrides = {
        "rounds": args.rounds,
        "learning_rate": args.learning_rate,
        "max_depth": args.max_depth,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return GbdtParams(**overrides) if overrides else None


def _rf_params(args) -> RfParams | None:
    overrides = {"n_estimators": args.trees, "max_depth": args.rf_depth}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return RfParams(**overrides) if overrides else None


def _add_train_options(sub) -> None:
    sub.add_argument("--strategy", choices=THRESHOLD_STRATEGIES, default="f2max")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--val-fraction", type=float, default=0.2)
    sub.add_argument("--scaler", choices=("standard", "minmax"), default="standard")
    sub.add_argument("--rounds", type=int, default=None, help="boosting rounds")
    sub.add_argument("--learning-rate", type=float, default=None)
    sub.add_argument("--max-depth", type=int, default=None, help="boosted tree depth")
    sub.add_argument("--trees", type=int, default=None, help="forest size")
    sub.add_argument("--rf-depth", type=int, default=None, help="forest tree depth")


def cmd_simulate(args) -> dict:
    return stage_simulate(args.spec, args.out_dir, seed=args.seed, duration=args.duration)


def cmd_label(args) -> dict:
    return stage_label(
        args.input, args.output,
        profile=args.profile, horizon=args.horizon, dt_period=args.dt_period,
    )


def cmd_preprocess(args) -> dict:
    return stage_preprocess(args.input, args.matrix, args.artifact, profile=args.profile)


def cmd_train(args) -> dict:
    return stage_train(
        args.matrix, args.artifact, args.model,
        learner=args.learner, strategy=args.strategy,
        val_fraction=args.val_fraction, seed=args.seed, scaler_kind=args.scaler,
        gbdt_params=_gbdt_params(args), rf_params=_rf_params(args),
    )


def cmd_select_model(args) -> dict:
    report = stage_select_model(
        args.matrix, args.artifact, args.model, args.report,
        strategy=args.strategy, val_fraction=args.val_fraction,
        seed=args.seed, scaler_kind=args.scaler,
        gbdt_params=_gbdt_params(args), rf_params=_rf_params(args),
    )
    return {
        "winner": report["winner"],
        "validation_f2": [
            {"learner": c["learner"], "validation_f2": c["validation_f2"]}
            for c in report["candidates"]
        ],
        "model": report["model"],
    }


def cmd_evaluate(args) -> dict:
    report = stage_evaluate(args.model, args.matrix, args.out_dir)
    keep = ("n", "positives", "threshold", "precision", "recall", "f2", "auc")
    return {k: report[k] for k in keep}


def cmd_attribute(args) -> dict:
    return stage_attribute(args.model, args.matrix, args.output)


def cmd_replay(args) -> dict:
    config = None
    if args.config is not None:
        from .service import load_twin_config

        config = load_twin_config(args.config)
        if config.mode != "replay":
            raise NettwinError(f"replay needs a replay-mode config, got {config.mode!r}")
    return stage_replay(
        args.model, args.input, args.predictions,
        config=config, callback_url=args.callback_url,
    )


def cmd_serve(args) -> dict:
    import uvicorn

    from .api import check_bind, create_app
    from .learn import load_model
    from .netsim import SimState, load_scenario_spec
    from .service import TwinService, load_twin_config

    config = load_twin_config(args.config)
    model_path = args.model or config.paths.get("model")
    if model_path is None:
        raise NettwinError("no model: pass --model or set paths.model in the config")
    model = load_model(model_path)

    sim = None
    if config.mode == "live-sim":
        scenario = args.scenario or config.paths.get("scenario")
        if scenario is None:
            raise NettwinError(
                "live-sim mode needs a scenario: pass --scenario or set paths.scenario"
            )
        sim = SimState(load_scenario_spec(scenario), seed=config.seed)

    check_bind(args.host, args.port)
    service = TwinService(
        config, model, sim=sim,
        callback_url=config.paths.get("controller"),
        predictions_path=config.paths.get("predictions"),
        mitigations_path=config.paths.get("mitigations"),
    )
    tick = config.tick_wall_seconds
    if tick is None and sim is not None:
        tick = config.dt_period
    app = create_app(service, tick_wall_seconds=tick)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        service.close()
    return {"host": args.host, "port": args.port, "model_version": service.model_version}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nettwin",
        description="Digital-twin pipeline for short-horizon network anomaly forecasts.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("simulate", help="run a scenario and write telemetry")
    sub.add_argument("spec", help="scenario JSON")
    sub.add_argument("out_dir")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--duration", type=float, default=None,
                     help="seconds; defaults to the scenario's duration field")
    sub.set_defaults(func=cmd_simulate)

    sub = subs.add_parser("label", help="add the t+15 anomaly column")
    sub.add_argument("input", help="flow CSV, snapshots.ndjson, or a simulate out dir")
    sub.add_argument("output", help="labeled CSV")
    sub.add_argument("--horizon", type=float, default=15.0)
    sub.add_argument("--dt-period", type=float, default=5.0)
    sub.add_argument("--profile", choices=PROFILES, default="simulator")
    sub.set_defaults(func=cmd_label)

    sub = subs.add_parser("preprocess", help="labeled CSV to feature matrix + recipe")
    sub.add_argument("input", help="labeled CSV")
    sub.add_argument("matrix", help="output matrix CSV")
    sub.add_argument("artifact", help="output preprocessing JSON")
    sub.add_argument("--profile", choices=PROFILES, default="simulator")
    sub.set_defaults(func=cmd_preprocess)

    sub = subs.add_parser("train", help="fit one learner and pick its threshold")
    sub.add_argument("matrix")
    sub.add_argument("artifact")
    sub.add_argument("model", help="output model JSON")
    sub.add_argument("--learner", choices=LEARNERS, default="gbdt")
    _add_train_options(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("select-model", help="train all learners, keep the best F2")
    sub.add_argument("matrix")
    sub.add_argument("artifact")
    sub.add_argument("model", help="output model JSON")
    sub.add_argument("report", help="output selection report JSON")
    _add_train_options(sub)
    sub.set_defaults(func=cmd_select_model)

    sub = subs.add_parser("evaluate", help="score a labeled matrix, write curves")
    sub.add_argument("model")
    sub.add_argument("matrix")
    sub.add_argument("out_dir")
    sub.set_defaults(func=cmd_evaluate)

    sub = subs.add_parser("attribute", help="per-row feature contributions CSV")
    sub.add_argument("model")
    sub.add_argument("matrix")
    sub.add_argument("output")
    sub.set_defaults(func=cmd_attribute)

    sub = subs.add_parser("replay", help="drive the twin from a labeled CSV")
    sub.add_argument("model")
    sub.add_argument("input", help="labeled simulator CSV")
    sub.add_argument("predictions", help="output predictions NDJSON")
    sub.add_argument("--config", default=None, help="twin config JSON (replay mode)")
    sub.add_argument("--callback-url", default=None,
                     help="controller endpoint for forwarded mitigations")
    sub.set_defaults(func=cmd_replay)

    sub = subs.add_parser("serve", help="run the twin HTTP service")
    sub.add_argument("--config", required=True, help="twin config JSON")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8787)
    sub.add_argument("--model", default=None, help="overrides paths.model")
    sub.add_argument("--scenario", default=None, help="overrides paths.scenario")
    sub.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = args.func(args)
    except (NettwinError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
