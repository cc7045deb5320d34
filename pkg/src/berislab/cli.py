"""Command-line entry point: ``berislab run`` and ``berislab sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from berislab import __version__, config, experiments, spectral2d
from berislab.errors import ConfigError, DivergenceError, ValidationError
from berislab.trotter_split import fitted_slope

log = logging.getLogger("berislab")

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_DIVERGENCE = 0, 2, 3, 4


def _load_raw(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def execute(raw: dict, out: Path | None = None, threads: int = 1) -> tuple[int, dict]:
    """Run one experiment from a raw config dict; returns (exit code, manifest).

    The manifest is written to ``<out>/manifest.json`` whenever the config
    validated, including after a divergence.
    """
    cfg = config.from_dict(raw)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spectral2d.set_workers(threads)
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "threads": threads,
    }
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        summary = experiments.REGISTRY[cfg.experiment](cfg, out)
        manifest["status"] = "ok"
        manifest["summary"] = experiments.jsonable(summary)
    except DivergenceError as exc:
        code = EXIT_DIVERGENCE
        manifest["status"] = "diverged"
        manifest["error"] = {"message": str(exc), "time": exc.time, "step": exc.step}
    manifest["wall_time"] = time.perf_counter() - t0
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code, manifest


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        raise ConfigError(f"sweep value {text!r} is not a number") from None


def _sweep_job(args):
    raw, out, threads = args
    try:
        code, manifest = execute(raw, out, threads)
    except (ConfigError, ValidationError) as exc:
        return {"status": type(exc).__name__, "error": str(exc)}
    except Exception as exc:  # a failing sub-run must not stop the sweep
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    return {"status": manifest["status"], "summary": manifest.get("summary", {}), "error": manifest.get("error")}


def sweep(raw: dict, param: str, values: list, out: Path, threads: int = 1, jobs: int = 1) -> dict:
    """Run the config once per value of ``param`` and aggregate summaries into sweep.csv."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"sweep value {v!r} is not a number")
    base = config.from_dict(raw)  # fail fast on a bad base config
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(config.override(raw, param, v), out / f"run_{i:03d}", threads) for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, tasks))
    else:
        results = [_sweep_job(t) for t in tasks]

    metric = experiments.PRIMARY_METRIC.get(base.experiment)
    keys = sorted({k for r in results for k, v in r.get("summary", {}).items() if _scalar(v)})
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([param, "status", *keys, "error"])
        for v, r in zip(values, results):
            s = r.get("summary", {})
            w.writerow([experiments.fmt(v), r["status"], *(experiments.fmt(s.get(k)) for k in keys), r.get("error") or ""])

    agg = {"param": param, "values": values, "metric": metric, "statuses": [r["status"] for r in results]}
    pts = [
        (v, r["summary"][metric])
        for v, r in zip(values, results)
        if metric and r["status"] == "ok" and _scalar(r["summary"].get(metric)) and r["summary"].get(metric) is not None
    ]
    agg["metric_values"] = [y for _, y in pts]
    if len(pts) >= 2:
        pts.sort()
        ys = [y for _, y in pts]
        agg["trend"] = (
            "increasing" if all(a < b for a, b in zip(ys, ys[1:]))
            else "decreasing" if all(a > b for a, b in zip(ys, ys[1:]))
            else "non-monotone"
        )
        if all(x > 0 for x, _ in pts) and all(y > 0 for _, y in pts):
            agg["slope"] = fitted_slope([x for x, _ in pts], ys)
    (out / "sweep_summary.json").write_text(json.dumps(experiments.jsonable(agg), indent=2) + "\n")
    return agg


def _scalar(v) -> bool:
    return v is None or isinstance(v, (int, float, bool))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="berislab", description="Q-tensor flow experiments on the periodic square.")
    ap.add_argument("--verbose", "-v", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (default: config 'out')")
        p.add_argument("--threads", type=int, default=1, help="FFT worker threads per job")
        p.add_argument("--seed", type=int, help="override the config seed")

    common(sub.add_parser("run", help="run one experiment"))
    sp = sub.add_parser("sweep", help="run one experiment per parameter value")
    common(sp)
    sp.add_argument("--param", required=True, help="config key; bare names resolve to params, then top level, then options")
    sp.add_argument("--values", required=True, help="comma-separated numbers")
    sp.add_argument("--jobs", type=int, default=1, help="parallel runs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        raw = _load_raw(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.command == "run":
            code, manifest = execute(raw, args.out, args.threads)
            print(json.dumps({"status": manifest["status"], **manifest.get("summary", {})}, default=str))
            return code
        values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
        out = Path(args.out if args.out else raw.get("out", "runs/sweep"))
        agg = sweep(raw, args.param, values, out, args.threads, max(1, args.jobs))
        print(json.dumps(experiments.jsonable(agg)))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
