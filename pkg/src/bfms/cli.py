"""Command line front end: ``bfms {synth,ingest,cluster,diagnose,bench}``.

Configuration is a TOML file with sections ``kernel``, ``run``,
``stochastic``, ``cluster``, ``ingest``, ``synth``, ``bench`` and
``diagnose`` plus top-level ``seed`` and ``threads``; command line flags
override it.  The fully resolved configuration is written to
``config.resolved`` (JSON) in the output directory.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 no
convergence when ``--strict`` is given.  Errors are printed to stderr as a
JSON object ``{"error": <name>, "message": <text>}``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .clustering import assign_clusters, check_separation, write_labels
from .exceptions import BFMSError, ConfigError, GridMismatch, NoInput, SchemaMismatch
from .fspace import FunctionSet, GridSpec, read_set, write_csv, write_set
from .full import RunConfig, bfms_step, run_full
from .ingest import IngestSummary, read_measurements, run_pipeline, write_provenance
from .kernel import BandwidthSchedule, KernelConfig, estimate_tau
from .stochastic import StochasticConfig, run_stochastic
from .synth import make_bump_clusters

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger("bfms")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NOCONV = 0, 2, 3, 4

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "kernel": {
        "tau": "auto",
        "schedule": "paper_linear",
        "h0": None,
        "tau_percentile": 20.0,
        "tau_sample_size": 5000,
    },
    "run": {"epsilon": 1e-6, "max_iters": 500},
    "stochastic": {"enabled": False, "subset_size": 1024},
    "cluster": {"merge_radius": None},
    "ingest": {
        "min_points": 20,
        "variable": "temperature",
        "window_lo": 20.0,
        "window_hi": 300.0,
        "window_points": 141,
    },
    "synth": {"n": 300, "k": 3, "p": 50, "noise": 0.05, "amplitude": 1.0, "width": 0.08},
    "bench": {"sizes": [1000, 2000, 4000, 8000], "p": 50, "subset_size": 512, "iters": 2},
    "diagnose": {"directions": 20, "triples": 25, "lemma_samples": 10000, "max_n": 2000},
}


class CliError(Exception):
    def __init__(self, name: str, message: str, code: int):
        super().__init__(message)
        self.name, self.code = name, code


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                cfg = _merge(cfg, tomllib.load(fh))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        cfg = _merge(cfg, overrides)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    k = cfg["kernel"]
    if k["schedule"] not in ("paper_linear", "constant"):
        raise ConfigError(f"kernel.schedule must be paper_linear or constant, got {k['schedule']!r}")
    if k["schedule"] == "constant" and not (k["h0"] and float(k["h0"]) > 0):
        raise ConfigError("kernel.h0 must be positive for the constant schedule")
    if k["tau"] != "auto" and not float(k["tau"]) > 0:
        raise ConfigError("kernel.tau must be positive or 'auto'")
    if not float(cfg["run"]["epsilon"]) > 0 or int(cfg["run"]["max_iters"]) < 1:
        raise ConfigError("run.epsilon must be > 0 and run.max_iters >= 1")
    if int(cfg["stochastic"]["subset_size"]) < 1:
        raise ConfigError("stochastic.subset_size must be >= 1")
    if int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")


def _overrides(args) -> dict:
    o: dict = {}

    def put(path, value):
        if value is None:
            return
        d = o
        *head, last = path.split(".")
        for key in head:
            d = d.setdefault(key, {})
        d[last] = value

    put("seed", getattr(args, "seed", None))
    put("threads", getattr(args, "threads", None))
    put("run.epsilon", getattr(args, "epsilon", None))
    put("run.max_iters", getattr(args, "max_iters", None))
    put("stochastic.subset_size", getattr(args, "subset_size", None))
    mode = getattr(args, "mode", None)
    if mode is not None:
        put("stochastic.enabled", mode == "stochastic")
    tau = getattr(args, "tau", None)
    if tau is not None:
        put("kernel.tau", tau if tau == "auto" else float(tau))
    put("kernel.schedule", getattr(args, "schedule", None))
    put("kernel.h0", getattr(args, "h0", None))
    return o


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _prepare_out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def resolve_tau(data: FunctionSet, cfg: dict) -> float:
    k = cfg["kernel"]
    if k["tau"] == "auto":
        tau = estimate_tau(data, int(k["tau_sample_size"]), float(k["tau_percentile"]),
                           int(cfg["seed"]))
        if not tau > 0:
            raise CliError("DegenerateData", "estimated tau is zero (duplicate curves?)", EXIT_DATA)
        k["tau"] = tau
    return float(k["tau"])


def _schedule(cfg: dict, tau: float) -> BandwidthSchedule:
    k = cfg["kernel"]
    if k["schedule"] == "constant":
        return BandwidthSchedule.constant(float(k["h0"]), tau)
    return BandwidthSchedule(tau=tau)


def _load_data(path) -> FunctionSet:
    try:
        return read_set(path)
    except FileNotFoundError as exc:
        raise CliError("NoInput", str(exc), EXIT_DATA) from exc
    except (GridMismatch, ValueError, KeyError) as exc:
        raise CliError("SchemaMismatch", str(exc), EXIT_DATA) from exc


# --------------------------------------------------------------------------
# commands


def cmd_synth(cfg: dict, out) -> dict:
    s = cfg["synth"]
    out = _prepare_out(out)
    grid = GridSpec(0.0, 1.0, int(s["p"]))
    data, labels, centers = make_bump_clusters(int(s["n"]), int(s["k"]), grid,
                                               float(s["amplitude"]), float(s["width"]),
                                               float(s["noise"]), int(cfg["seed"]))
    write_csv(data, out / "data.csv")
    write_csv(centers, out / "true_centers.csv")
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "cluster"])
        for i, lab in zip(data.ids, labels):
            w.writerow([i, int(lab)])
    _write_json(cfg, out / "config.resolved")
    summary = {"command": "synth", "n": data.n, "k": int(s["k"]), "created": _stamp()}
    _write_json(summary, out / "summary.json")
    return summary


def cmd_ingest(input_path, cfg: dict, out) -> dict:
    ic = cfg["ingest"]
    out = _prepare_out(out)
    summary = IngestSummary()
    try:
        rows = read_measurements(input_path, summary)
    except NoInput as exc:
        raise CliError("NoInput", str(exc), EXIT_DATA) from exc
    except SchemaMismatch as exc:
        raise CliError("SchemaMismatch", str(exc), EXIT_DATA) from exc
    if not rows:
        raise CliError("NoInput", f"{input_path}: no valid measurement rows", EXIT_DATA)
    window = GridSpec(float(ic["window_lo"]), float(ic["window_hi"]), int(ic["window_points"]))
    fset, prov, summary = run_pipeline(rows, window, int(ic["min_points"]), ic["variable"],
                                       summary)
    if fset is not None:
        write_set(fset, out / "functions.csv")
    write_provenance(prov, out / "provenance.csv")
    _write_json(cfg, out / "config.resolved")
    result = {"command": "ingest", "stages": summary.to_dict(), "created": _stamp()}
    _write_json(result, out / "summary.json")
    return result


def _read_provenance(path) -> dict:
    cols: dict = {"lat": {}, "lon": {}}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cols["lat"][row["cycle_id"]] = row["lat"]
            cols["lon"][row["cycle_id"]] = row["lon"]
    return cols


def cmd_cluster(data_path, cfg: dict, out, strict: bool = False, provenance=None) -> dict:
    """Run full or stochastic blurring mean shift and write labels, centers and trace."""
    out = _prepare_out(out)
    data = _load_data(data_path)
    tau = resolve_tau(data, cfg)
    sched = _schedule(cfg, tau)
    eps = float(cfg["run"]["epsilon"])
    iters = int(cfg["run"]["max_iters"])
    threads = int(cfg["threads"])
    stochastic = bool(cfg["stochastic"]["enabled"])
    t0 = time.perf_counter()
    if stochastic:
        scfg = StochasticConfig(sched, eps, iters, int(cfg["stochastic"]["subset_size"]),
                                int(cfg["seed"]))
        trace = run_stochastic(data, scfg, threads=threads)
    else:
        trace = run_full(data, RunConfig(sched, eps, iters), threads=threads)
    elapsed = time.perf_counter() - t0
    radius = cfg["cluster"]["merge_radius"]
    radius = 10.0 * eps if radius is None else float(radius)
    cfg["cluster"]["merge_radius"] = radius
    res = assign_clusters(trace.final, radius)
    prov = _read_provenance(provenance) if provenance else None
    trace.to_csv(out / "trace.csv", include_m=stochastic)
    write_labels(res, data.ids, out / "labels.csv", prov)
    write_csv(res.centers, out / "centers.csv")
    _write_json(cfg, out / "config.resolved")
    summary = {
        "command": "cluster",
        "mode": "stochastic" if stochastic else "full",
        "n": data.n,
        "tau": tau,
        "converged": trace.converged,
        "iters_used": trace.iters_used,
        "k": res.k,
        "sizes": res.sizes.tolist(),
        "separation": check_separation(res, tau),
        "seconds": elapsed,
        "created": _stamp(),
    }
    _write_json(summary, out / "summary.json")
    if strict and not trace.converged:
        raise CliError("NoConvergence",
                       f"not converged after {trace.iters_used} iterations", EXIT_NOCONV)
    return summary


def cmd_diagnose(data_path, cfg: dict, out) -> dict:
    """Theory checks on a dataset: monotone density, minorizer chain, derivatives,
    stationarity of the converged state, separation and the exponential lemma."""
    out = _prepare_out(out)
    data = _load_data(data_path)
    dc = cfg["diagnose"]
    if data.n > int(dc["max_n"]):
        raise CliError("TooLarge", f"diagnose handles at most {dc['max_n']} curves", EXIT_DATA)
    tau = resolve_tau(data, cfg)
    k = cfg["kernel"]
    h = float(k["h0"]) if k["h0"] else tau / 4.0
    k["h0"] = h
    kcfg = KernelConfig(h, tau)
    eps = float(cfg["run"]["epsilon"])
    run_cfg = RunConfig(BandwidthSchedule.constant(h, tau), eps, int(cfg["run"]["max_iters"]))
    rng = np.random.default_rng(int(cfg["seed"]))
    reports = []

    # density monotonicity and the minorizer chain along a constant-h trajectory
    trace = run_full(data, run_cfg, threads=int(cfg["threads"]))
    state = data
    chain_gap = []
    for _ in range(trace.iters_used):
        nxt = bfms_step(state, kcfg)
        rho0 = diag.pairwise_density(state, kcfg)
        r1 = diag.minorizer_value(nxt, state, kcfg)
        rho1 = diag.pairwise_density(nxt, kcfg)
        chain_gap.append(min(r1 - rho0, rho1 - r1))
        state = nxt
    d = trace.avg_density
    worst = float(np.min(np.diff(d) + 1e-10 * np.maximum(1.0, d[:-1]))) if len(d) > 1 else 0.0
    reports.append({"check": "monotone_density", "tolerance": 1e-10, "worst_margin": worst,
                    "passed": worst >= 0})
    reports.append({"check": "minorizer_chain", "tolerance": 1e-10,
                    "worst_gap": float(min(chain_gap)), "passed": min(chain_gap) >= -1e-10})

    res = assign_clusters(trace.final, 10 * eps)
    sep = check_separation(res, tau)
    sep["check"] = "separation"
    reports.append(sep)
    st = diag.check_stationarity(trace.final, kcfg, int(dc["directions"]), int(cfg["seed"]),
                                 epsilon=eps)
    reports.append({k_: v for k_, v in st.items() if k_ != "members"}
                   | {"failed_members": [m["index"] for m in st["members"] if not m["passed"]]})

    firsts, seconds = [], []
    for _ in range(int(dc["triples"])):
        i = int(rng.integers(data.n))
        f = data.values[i] + 0.1 * h * diag._unit_directions(data.grid, 1, rng)[0]
        g = diag._unit_directions(data.grid, 1, rng)[0]
        firsts.append(diag.check_first_derivative(f, data, g, kcfg).rel_error)
        seconds.append(diag.check_second_derivative(f, data, g, g, kcfg).rel_error)
    reports.append({"check": "gateaux_first", "tolerance": 1e-4,
                    "max_rel_error": float(max(firsts)), "passed": max(firsts) <= 1e-4})
    reports.append({"check": "gateaux_second", "tolerance": 1e-3,
                    "max_rel_error": float(max(seconds)), "passed": max(seconds) <= 1e-3})

    ns = int(dc["lemma_samples"])
    x, y, hh = rng.uniform(1e-3, 10, ns), rng.uniform(1e-3, 10, ns), rng.uniform(0.1, 5, ns)
    ok = diag.kernel_lemma_check(x, y, hh)
    reports.append({"check": "kernel_lemma", "samples": ns, "slack": 1e-14,
                    "passed": bool(np.all(ok))})

    _write_json(cfg, out / "config.resolved")
    result = {"command": "diagnose", "h": h, "tau": tau, "reports": reports,
              "passed": all(r["passed"] for r in reports)}
    _write_json(result, out / "diagnose.json")
    _write_json({"command": "diagnose", "passed": result["passed"], "created": _stamp()},
                out / "summary.json")
    return result


def bench_rows(sizes, p: int, subset_size: int, iters: int, seed: int, threads: int = 1):
    """Per-iteration wall time of full and stochastic sweeps at each ``n``."""
    rows = []
    for n in sizes:
        data, _, _ = make_bump_clusters(int(n), 5, GridSpec(0.0, 1.0, p), noise=0.3, seed=seed)
        sched = BandwidthSchedule.constant(0.1, 0.4)
        t0 = time.perf_counter()
        run_full(data, RunConfig(sched, 1e-300, iters), threads=threads)
        t_full = (time.perf_counter() - t0) / iters
        scfg = StochasticConfig(sched, 1e-300, iters, subset_size, seed)
        t0 = time.perf_counter()
        run_stochastic(data, scfg, threads=threads)
        t_sto = (time.perf_counter() - t0) / iters
        rows.append({"n": int(n), "mode": "full", "subset_size": int(n), "m": 1,
                     "seconds_per_iter": t_full})
        rows.append({"n": int(n), "mode": "stochastic", "subset_size": subset_size,
                     "m": scfg.num_subsets(int(n)), "seconds_per_iter": t_sto})
    return rows


def cmd_bench(cfg: dict, out) -> list:
    b = cfg["bench"]
    out = _prepare_out(out)
    logging.getLogger("bfms").setLevel(logging.ERROR)
    rows = bench_rows(b["sizes"], int(b["p"]), int(b["subset_size"]), int(b["iters"]),
                      int(cfg["seed"]), int(cfg["threads"]))
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _write_json(cfg, out / "config.resolved")
    _write_json({"command": "bench", "created": _stamp()}, out / "summary.json")
    return rows


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--mode", choices=["full", "stochastic"])
    run.add_argument("--subset-size", type=int)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--max-iters", type=int)
    run.add_argument("--tau", help="influence range, or 'auto' to estimate it")
    run.add_argument("--schedule", choices=["paper_linear", "constant"])
    run.add_argument("--h0", type=float, help="bandwidth for the constant schedule")
    run.add_argument("--strict", action="store_true", help="exit 4 if the run does not converge")

    p = argparse.ArgumentParser(prog="bfms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic clustered dataset")
    pi = sub.add_parser("ingest", parents=[common], help="profile CSV -> curves on a grid")
    pi.add_argument("input", type=Path)
    pc = sub.add_parser("cluster", parents=[common, run], help="run blurring mean shift")
    pc.add_argument("data", type=Path)
    pc.add_argument("--provenance", type=Path, help="provenance CSV from ingest")
    pd = sub.add_parser("diagnose", parents=[common, run], help="numerical theory checks")
    pd.add_argument("data", type=Path)
    pb = sub.add_parser("bench", parents=[common], help="full vs stochastic timings")
    pb.add_argument("--subset-size", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            over = _overrides(args)
            if args.command == "bench" and args.subset_size is not None:
                over.setdefault("bench", {})["subset_size"] = args.subset_size
            cfg = load_config(args.config, over)
        except (ConfigError, ValueError) as exc:
            raise CliError("ConfigError", str(exc), EXIT_CONFIG) from exc
        if args.command == "synth":
            result = cmd_synth(cfg, args.out)
        elif args.command == "ingest":
            result = cmd_ingest(args.input, cfg, args.out)
        elif args.command == "cluster":
            result = cmd_cluster(args.data, cfg, args.out, args.strict, args.provenance)
        elif args.command == "diagnose":
            result = cmd_diagnose(args.data, cfg, args.out)
        else:
            result = cmd_bench(cfg, args.out)
    except CliError as exc:
        print(json.dumps({"error": exc.name, "message": str(exc)}), file=sys.stderr)
        return exc.code
    except BFMSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    if args.verbose:
        print(json.dumps(result, indent=2, default=_json_default))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
