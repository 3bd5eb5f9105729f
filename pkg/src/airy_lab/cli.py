"""Command line entry point: ``airy-lab <experiment> --config <path>``.

Writes ``<out>/<experiment>.json`` with the schema::

    {experiment, params, seed,
     results: [{name, estimate, stderr, count, predicted?, z?, pass?, seed}],
     runtime_s}

``seed`` inside a result is ``[experiment_seed, first_task, n_tasks]``; task
``i`` of the record used the stream ``(experiment_seed, first_task + i)``.
With ``--emit-samples`` raw samples go to ``<out>/<experiment>_<table>.csv``
(header row, comma separated, LF line ends, 17 significant digits).
The exit status is 0 when every result with a ``pass`` field passed, 1 when
some check failed and 2 on configuration or runtime errors.
"""

import argparse
import csv
import json
import logging
import os
import sys

from .config import EXPERIMENTS, load_config
from .exceptions import AiryLabError
from .experiments import run_experiment
from .streams import check_positive_int

log = logging.getLogger("airy_lab")


def build_parser():
    p = argparse.ArgumentParser(prog="airy-lab", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="experiment configuration document")
    p.add_argument("--seed", type=int, help="override the experiment seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="worker threads (overrides AIRY_LAB_THREADS and config)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--emit-samples", action="store_true", help="also write raw samples as CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["%.17g" % v for v in row])


def write_outputs(outcome, out_dir, emit_samples):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{outcome.experiment}.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(outcome.summary(), fh, indent=2, allow_nan=False)
        fh.write("\n")
    written = [path]
    if emit_samples:
        for table, (header, rows) in outcome.tables.items():
            cpath = os.path.join(out_dir, f"{outcome.experiment}_{table}.csv")
            write_csv(cpath, header, rows)
            written.append(cpath)
    return written


def _fmt(x):
    return "-" if x is None else (f"{x:.6g}" if isinstance(x, float) else str(x))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment)
        cfg = cfg.with_overrides(seed=args.seed)
        threads = None if args.threads is None else check_positive_int("threads", args.threads)
        log.info("running %s with seed %d", cfg.experiment, cfg.seed)
        outcome = run_experiment(cfg, threads)
        written = write_outputs(outcome, args.out, args.emit_samples)
    except (AiryLabError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("field", "line", "index"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err), file=sys.stderr)
        return 2
    for r in outcome.results:
        status = "" if "pass" not in r else ("PASS" if r["pass"] else "FAIL")
        print(f"{r['name']:<36} {_fmt(r['estimate']):>12} +- {_fmt(r['stderr']):<10} "
              f"pred {_fmt(r.get('predicted')):<10} {status}")
    print(f"wrote {', '.join(written)} ({outcome.runtime_s:.1f} s)")
    return 0 if outcome.passed else 1


if __name__ == "__main__":
    sys.exit(main())
