"""Command line entry point: ``run``, ``sweep`` and ``verify``."""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ConfigError
from .engine import Simulation
from .errors import InvalidConfig
from .simulator import World

log = logging.getLogger("protorefine")

SWEEPABLE = ("n", "alpha", "d", "tau", "H", "lambda_dual", "target_temp_mult")
INT_PARAMS = ("d", "H")
OUTPUT_DIR_ENV = "PROTOREFINE_OUTPUT_DIR"

SUMMARY_FIELDS = ("epoch", "pl_acc_classifier", "pl_acc_cluster", "pl_acc_refined",
                  "disagreement_rate", "retention_rate", "retention_rate_unrefined",
                  "min_cluster_size", "loss_x", "loss_u", "loss_p", "loss_c")


def summary_row(r):
    row = {k: getattr(r, k) for k in SUMMARY_FIELDS[:8]}
    row.update(zip(SUMMARY_FIELDS[8:], r.loss_components))
    return row


def execute(cfg, out_dir):
    """Run all epochs of ``cfg`` and write every output file into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = {"config": cfg.to_dict(), "derived": cfg.derived()}
    log.info("K=%d n=%g gamma=%g", cfg.K, cfg.n, cfg.gamma)
    (out / "header.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    world = World(cfg.world)
    sim = Simulation(world, cfg.engine_config(), cfg.engine.B, cfg.engine.mu)
    reports = []
    with open(out / "report.jsonl", "w") as jf, open(out / "summary.csv", "w", newline="") as cf:
        writer = csv.DictWriter(cf, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for _ in range(cfg.engine.epochs):
            r = sim.step()
            jf.write(r.to_json() + "\n")
            writer.writerow(summary_row(r))
            log.info("epoch %d: classifier %.4f refined %.4f retention %.4f",
                     r.epoch, r.pl_acc_classifier, r.pl_acc_refined, r.retention_rate)
            reports.append(r)

    eng = sim.engine
    (out / "clusters.json").write_text(json.dumps(eng.clusters.to_dict()) + "\n")
    eng.banks.dump_csv(out / "banks.csv")
    for h, t in enumerate(eng.tables.previous):
        t.dump_csv(out / ("cluster_labels_head%d.csv" % h))
    eng.protos.dump_csv(out / "prototypes.csv")
    np.savetxt(out / "ground_truth.csv", np.column_stack([np.arange(world.cfg.N), world.y]),
               delimiter=",", fmt="%d", header="sample_id,label", comments="")
    return reports


def _output_dir(cfg, override=None):
    return override or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir


def cmd_run(config_path, output_dir=None):
    try:
        cfg = config_mod.load(config_path)
    except (ConfigError, InvalidConfig) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    try:
        execute(cfg, _output_dir(cfg, output_dir))
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        print("runtime error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 2
    return 0


def parse_values(param, text):
    items = [v.strip() for v in (text or "").split(",") if v.strip()]
    cast = int if param in INT_PARAMS else float
    return [cast(v) for v in items]


def cmd_sweep(config_path, param, values, output_dir=None):
    if param not in SWEEPABLE:
        print("unknown sweep parameter %r (choose from %s)" % (param, ", ".join(SWEEPABLE)),
              file=sys.stderr)
        return 1
    try:
        cfg = config_mod.load(config_path)
        if isinstance(values, str):
            values = parse_values(param, values)
        if not values:
            raise ConfigError("empty value list")
        runs = [(v, cfg.replace(param, v)) for v in values]
    except (ConfigError, InvalidConfig, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    root = Path(_output_dir(cfg, output_dir))
    rows = []
    try:
        for v, c in runs:
            reports = execute(c, root / ("%s=%s" % (param, v)))
            last = reports[-1]
            rows.append({
                param: v, "K": c.K, "gamma": c.gamma,
                "final_pl_acc_classifier": last.pl_acc_classifier,
                "final_pl_acc_refined": last.pl_acc_refined,
                "final_retention_rate": last.retention_rate,
                "mean_pl_acc_classifier": float(np.mean([r.pl_acc_classifier for r in reports])),
                "mean_pl_acc_refined": float(np.mean([r.pl_acc_refined for r in reports])),
                "mean_disagreement_rate": float(np.mean([r.disagreement_rate for r in reports])),
            })
    except Exception as exc:  # noqa: BLE001
        print("runtime error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 2
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "comparison.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return 0


def cmd_verify(quick=False):
    from .verify import run_all
    results = run_all(quick=quick)
    width = max(len(r.name) for r in results)
    for r in results:
        print("%s  %-*s  %s" % ("PASS" if r.passed else "FAIL", width, r.name, r.summary()))
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="protorefine")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p = sub.add_parser("sweep", help="run one experiment per parameter value")
    p.add_argument("config")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--output-dir")
    p = sub.add_parser("verify", help="run the oracle and invariant checks")
    p.add_argument("--quick", action="store_true", help="skip the long simulator checks")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.cmd == "run":
        return cmd_run(args.config, args.output_dir)
    if args.cmd == "sweep":
        return cmd_sweep(args.config, args.param, args.values, args.output_dir)
    return cmd_verify(args.quick)


if __name__ == "__main__":
    sys.exit(main())
