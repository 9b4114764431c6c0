"""Run every study on the shipped configurations and print one line per verdict.

    python scripts/run_all_studies.py --out results --cache .btq_cache --jobs 4
"""
import argparse
import dataclasses
import json
import logging
from pathlib import Path

from btq.cache import EigenCache
from btq.cli_runner import parse_config, run

CONFIGS = {
    "torus_constant": ["all"],
    "torus_variable": ["gap", "density", "decay", "weighted"],
    "plane": ["all"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--cache", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--configs", nargs="*", default=list(CONFIGS))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    root = Path(__file__).resolve().parent.parent / "configs"
    cache = EigenCache(args.cache) if args.cache else None
    codes = {}
    for name in args.configs:
        cfg = parse_config(root / f"{name}.ini")
        out = Path(args.out) / name
        cfg = dataclasses.replace(cfg, paths=dataclasses.replace(cfg.paths, out=str(out)))
        codes[name] = run(cfg, CONFIGS[name], jobs=args.jobs, cache=cache)
        for path in sorted(out.glob("*.json")):
            doc = json.loads(path.read_text())
            slope = "" if doc["slope"] is None else f" slope={doc['slope']:+.3f} r2={doc['r2']:.3f}"
            print(f"{name:15s} {doc['study']:12s} {doc['verdict']:16s}{slope}")
    print("exit codes:", codes)


if __name__ == "__main__":
    main()
