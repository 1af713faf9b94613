#!/usr/bin/env python3
"""Calibrate the group-data coupling and (re)build the committed fixture.

Runs the coordinate search from an informed start, then writes
fixtures/coupling.json and fixtures/group_data.jsonl plus the fixture hash.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

from fontadapt.datagen import (
    CALIBRATION_SCENARIOS,
    DEFAULT_SEED,
    TARGET_RANK_CORRELATIONS,
    CouplingConfig,
    calibrate_coupling,
    generate_group_dataset,
    spearman_table,
    write_fixture,
)


def informed_start(seed: int) -> CouplingConfig:
    cfg = CouplingConfig(seed=seed)
    baseline = spearman_table(generate_group_dataset(CALIBRATION_SCENARIOS, cfg))
    for key, target in TARGET_RANK_CORRELATIONS.items():
        if abs(target) >= 0.1:
            t, f = key
            cfg.coef[t][f] = round(1.2 * (target - baseline[key]), 3)
    return cfg


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out-dir", type=Path, default=ROOT / "fixtures")
    parser.add_argument("--goal", type=float, default=0.12)
    args = parser.parse_args()

    t0 = time.perf_counter()
    start = informed_start(args.seed)
    calibrated = calibrate_coupling(
        CALIBRATION_SCENARIOS, start, goal=args.goal
    )
    took = time.perf_counter() - t0

    rows = generate_group_dataset(CALIBRATION_SCENARIOS, calibrated)
    table = spearman_table(rows)
    print(f"calibration finished in {took:.1f}s")
    worst = 0.0
    for key, target in sorted(TARGET_RANK_CORRELATIONS.items()):
        if abs(target) < 0.1:
            continue
        dev = abs(table[key] - target)
        worst = max(worst, dev)
        print(f"  {key[0]:>18} x {key[1]:<12} {table[key]:+.3f} (target {target:+.3f}, dev {dev:.3f})")
    print(f"worst deviation: {worst:.4f}")

    args.out_dir.mkdir(parents=True, exist_ok=True)
    coupling_path = args.out_dir / "coupling.json"
    fixture_path = args.out_dir / "group_data.jsonl"
    calibrated.save(coupling_path)
    digest = write_fixture(rows, fixture_path)
    print(f"wrote {coupling_path}")
    print(f"wrote {fixture_path} sha256={digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
