"""Operator CLI: serve the engine, generate/train on group data, evaluate
calibration fidelity, and replay recorded traces."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import stats
from .config import EngineConfig, load_config
from .datagen import (
    CALIBRATION_SCENARIOS,
    FEATURE_COLUMNS,
    TARGET_COLUMNS,
    TARGET_RANK_CORRELATIONS,
    CouplingConfig,
    generate_group_dataset,
    read_fixture,
    spearman_table,
    write_fixture,
)
from .labels import PersonalFlags
from .modeling import GROUP_SCENARIO, FontParams, fit_ridge
from .sensing import load_trace
from .storage import StoreLayout, write_model_snapshot

REPO_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_COUPLING = REPO_ROOT / "fixtures" / "coupling.json"
DEFAULT_FIXTURE = REPO_ROOT / "fixtures" / "group_data.jsonl"


def _engine_from_store(store: Path, config: EngineConfig):
    from .engine import Engine

    layout = StoreLayout(store)
    rows = layout.read_group_rows()
    group_model = layout.read_group_model()
    return Engine(
        rows, config=config, store_root=store, group_model=group_model
    )


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    config = load_config(args.config) if args.config else EngineConfig()
    store = Path(args.store)
    layout = StoreLayout(store)
    if not layout.group_rows_path.exists():
        fixtures = Path(args.fixtures) if args.fixtures else DEFAULT_FIXTURE
        print(f"store has no group corpus; training from {fixtures}")
        _train(fixtures, store, config)
    engine = _engine_from_store(store, config)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_gen_data(args) -> int:
    coupling = CouplingConfig.load(args.coupling)
    if args.seed is not None:
        coupling.seed = args.seed
    rows = generate_group_dataset(CALIBRATION_SCENARIOS, coupling)
    digest = write_fixture(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out} (sha256 {digest})")
    return 0


def _train(fixtures: Path, store: Path, config: EngineConfig) -> None:
    rows = read_fixture(fixtures)
    layout = StoreLayout(store)
    layout.write_group_rows(rows)
    model = fit_ridge(
        [(r.vector(), r.params()) for r in rows],
        lam=config.ridge_lambda,
        scenario=GROUP_SCENARIO,
        version=1,
    )
    write_model_snapshot(layout.group_model_path, model)
    print(f"trained group model on {len(rows)} rows -> {layout.group_model_path}")


def cmd_train(args) -> int:
    config = load_config(args.config) if args.config else EngineConfig()
    _train(Path(args.fixtures), Path(args.store), config)
    return 0


def cmd_eval(args) -> int:
    coupling = CouplingConfig.load(args.coupling)
    rows = generate_group_dataset(CALIBRATION_SCENARIOS, coupling)
    report: dict = {"seed": coupling.seed, "scenarios": [], "rank_correlations": [],
                    "anova": {}}

    print(f"== per-scenario marginals (generated vs study, seed {coupling.seed}) ==")
    for spec in CALIBRATION_SCENARIOS:
        sub = [r for r in rows if r.scenario_id == spec.scenario_id]
        entry = {"scenario_id": spec.scenario_id, "name": spec.name, "columns": {}}
        print(f"-- scenario {spec.scenario_id} ({spec.name}, n={len(sub)})")
        for name in FEATURE_COLUMNS + TARGET_COLUMNS:
            table = spec.features if name in FEATURE_COLUMNS else spec.targets
            mean, sd = table[name]
            got_mean, got_sd = stats.mean_sd([r.column(name) for r in sub])
            dev_mean = abs(got_mean - mean) / mean if mean else 0.0
            dev_sd = abs(got_sd - sd) / sd if sd else 0.0
            entry["columns"][name] = {
                "mean": got_mean, "target_mean": mean, "mean_dev": dev_mean,
                "sd": got_sd, "target_sd": sd, "sd_dev": dev_sd,
            }
            print(f"   {name:<18} mean {got_mean:>10.3f} vs {mean:>10.3f} "
                  f"({100 * dev_mean:4.1f}%)  sd {got_sd:>9.3f} vs {sd:>9.3f} "
                  f"({100 * dev_sd:4.1f}%)")
        report["scenarios"].append(entry)

    print("== pooled rank correlations (generated vs study) ==")
    table = spearman_table(rows)
    for key, target in sorted(TARGET_RANK_CORRELATIONS.items()):
        got = table[key]
        dev = abs(got - target)
        report["rank_correlations"].append(
            {"target_col": key[0], "feature_col": key[1], "r": got,
             "target_r": target, "deviation": dev}
        )
        marker = "*" if abs(target) >= 0.2 else " "
        print(f"  {marker} {key[0]:>18} x {key[1]:<12} {got:+.3f} "
              f"(study {target:+.3f}, dev {dev:.3f})")

    print("== scenario ANOVA ==")
    for name in FEATURE_COLUMNS + TARGET_COLUMNS:
        groups = [
            [r.column(name) for r in rows if r.scenario_id == sid]
            for sid in range(1, 7)
        ]
        res = stats.one_way_anova(groups)
        report["anova"][name] = {"f": res.f_value, "p": res.p_value}
        print(f"   {name:<18} F={res.f_value:8.3f} p={res.p_value:.4f}")

    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n",
                                     encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def cmd_replay(args) -> int:
    config = load_config(args.config) if args.config else EngineConfig()
    store = Path(args.store)
    layout = StoreLayout(store)
    if not layout.group_rows_path.exists():
        fixtures = Path(args.fixtures) if args.fixtures else DEFAULT_FIXTURE
        _train(fixtures, store, config)
    engine = _engine_from_store(store, config)
    session = engine.open_session(args.user, environment_hint=args.hint)

    samples = load_trace(args.trace)
    feedback_entries = []
    with open(args.feedback, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                feedback_entries.append(json.loads(line))
    feedback_entries.sort(key=lambda e: e["after_ts_ms"])

    i = 0
    for entry in feedback_entries:
        cutoff = entry["after_ts_ms"]
        j = i
        while j < len(samples) and samples[j].timestamp_ms <= cutoff:
            j += 1
        engine.ingest(session.session_id, samples[i:j])
        i = j
        flags_d = entry.get("flags", {})
        version = engine.feedback(
            session.session_id,
            FontParams.from_dict(entry["params"]),
            PersonalFlags(
                fatigued=bool(flags_d.get("fatigued", False)),
                distracted=bool(flags_d.get("distracted", False)),
                vision_reduced=bool(flags_d.get("vision_reduced", False)),
            ),
        )
        print(f"feedback at ts<={cutoff}: model version {version}")
    if i < len(samples):
        engine.ingest(session.session_id, samples[i:])

    print("final model files:")
    for path in sorted(store.rglob("models/*.json")):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        print(f"  {path.relative_to(store)} sha256={digest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fontadapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--store", default="./store", help="store root directory")
    p.add_argument("--fixtures", help="group fixture to bootstrap an empty store")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gen-data", help="generate a synthetic group dataset")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--coupling", default=str(DEFAULT_COUPLING))
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="fit the group model into a store")
    p.add_argument("--fixtures", default=str(DEFAULT_FIXTURE))
    p.add_argument("--store", default="./store")
    p.add_argument("--config", help="TOML config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="print calibration-fidelity summaries")
    p.add_argument("--coupling", default=str(DEFAULT_COUPLING))
    p.add_argument("--report", help="optional JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="replay a sensor trace plus feedback log")
    p.add_argument("--trace", required=True)
    p.add_argument("--feedback", required=True)
    p.add_argument("--store", default="./replay-store")
    p.add_argument("--fixtures", help="group fixture if the store is empty")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--user", default="replay")
    p.add_argument("--hint", default=None, help="environment hint for the session")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
