"""Batch front-end: JSON configs in, CSV/JSON artifacts out.

Subcommands: convolve, rate, rate-min, deformed-rate, simulate, tilt,
verify.  Every output file embeds the resolved configuration and the seed
actually used.  Exit codes: 0 success, 1 numerical failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acceptance
from .convolution import GridSpec, free_add
from .deformed import SpikeSpec, l_rate
from .errors import ConfigError, ConvergenceError, DomainError, NumericalError
from .measures import measure_from_json
from .rates import ModelSpec, rate_max, rate_min
from .simulate import EnsembleSpec, TiltConfig, replica_rng, sample_eigenvalues, tilted_sampler

__all__ = ["main"]


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path!r} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path!r} must hold a JSON object")
    return cfg


def _check_keys(obj, where: str, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    allowed = set(required) | set(optional)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {unknown} in {where}; allowed: {sorted(allowed)}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ConfigError(f"missing required key(s) {missing} in {where}")


def _parse_model(obj) -> ModelSpec:
    _check_keys(obj, "model", required=("mu_a", "mu_b"),
                optional=("rho_a", "rho_b", "ell_a", "ell_b", "beta"))
    mu_a = measure_from_json(obj["mu_a"])
    mu_b = measure_from_json(obj["mu_b"])
    sup_a, sup_b = mu_a.support, mu_b.support
    return ModelSpec(
        mu_a=mu_a,
        mu_b=mu_b,
        rho_a=float(obj.get("rho_a", sup_a.right_edge)),
        rho_b=float(obj.get("rho_b", sup_b.right_edge)),
        ell_a=float(obj.get("ell_a", sup_a.left_edge)),
        ell_b=float(obj.get("ell_b", sup_b.left_edge)),
        beta=int(obj.get("beta", 1)),
    )


def _parse_xgrid(obj, where: str) -> list[float]:
    if isinstance(obj, list):
        if not obj:
            raise ConfigError(f"{where} must be a nonempty list or a range object")
        return [float(v) for v in obj]
    _check_keys(obj, where, required=("start", "stop", "num"))
    num = int(obj["num"])
    if num < 1:
        raise ConfigError(f"{where}.num must be >= 1")
    return np.linspace(float(obj["start"]), float(obj["stop"]), num).tolist()


def _resolved(command: str, cfg: dict, seed: int | None) -> dict:
    out = {"command": command, "config": cfg}
    if seed is not None:
        out["seed"] = seed
    return out


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    return v


# ---------------------------------------------------------------------------
# writers


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header, rows, provenance: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# commands


def cmd_convolve(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    _check_keys(cfg, "config", required=("model",), optional=("grid", "seed"))
    model = _parse_model(cfg["model"])
    grid = None
    if "grid" in cfg:
        _check_keys(cfg["grid"], "grid", required=("lo", "hi", "n"))
        grid = GridSpec.from_json(cfg["grid"])
    out = free_add(model.mu_a, model.mu_b, grid)
    sup = out.surface.support if out.surface is not None else out.measure.support
    payload = _resolved("convolve", cfg, seed)
    payload["measure"] = out.measure.to_json()
    payload["edges"] = {
        "left": out.left_edge,
        "right": out.right_edge,
        "g_at_right": _fmt(sup.g_at_right),
        "g_at_left": _fmt(sup.g_at_left),
    }
    _write_json(os.path.join(out_dir, "convolve.json"), payload)
    return 0


def _cmd_rate_family(cfg: dict, out_dir: str, seed: int, minimizer: bool) -> int:
    _check_keys(cfg, "config", required=("model", "x"), optional=("seed",))
    model = _parse_model(cfg["model"])
    xs = _parse_xgrid(cfg["x"], "x")
    evaluate = rate_min if minimizer else rate_max
    rows = []
    for x in xs:
        d = evaluate(model, float(x)).to_json()
        rows.append([d["x"], d["theta_star"], d["rate"], d["branch"], d["case"]])
    name = "rate_min" if minimizer else "rate"
    _write_csv(os.path.join(out_dir, name + ".csv"),
               ["x", "theta_star", "rate", "branch", "case"],
               rows, _resolved("rate-min" if minimizer else "rate", cfg, seed))
    return 0


def cmd_rate(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    return _cmd_rate_family(cfg, out_dir, seed, minimizer=False)


def cmd_rate_min(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    return _cmd_rate_family(cfg, out_dir, seed, minimizer=True)


def cmd_deformed_rate(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    _check_keys(cfg, "config", required=("model", "spikes", "x"), optional=("seed",))
    model = _parse_model(cfg["model"])
    if not isinstance(cfg["spikes"], list) or not cfg["spikes"]:
        raise ConfigError("spikes must be a nonempty list of spike strengths")
    spikes = SpikeSpec(gammas=tuple(float(g) for g in cfg["spikes"]))
    xs = _parse_xgrid(cfg["x"], "x")
    rows = []
    for x in xs:
        val = l_rate(model, spikes, float(x))
        rows.append([float(x), "nan", _fmt(val), "deformed", f"p{len(spikes.gammas)}"])
    _write_csv(os.path.join(out_dir, "deformed_rate.csv"),
               ["x", "theta_star", "rate", "branch", "case"],
               rows, _resolved("deformed-rate", cfg, seed))
    return 0


def _sample_rows(spec: EnsembleSpec, n_reps: int, seed: int, threads: int) -> np.ndarray:
    if threads <= 1 or n_reps < 2 * threads:
        return sample_eigenvalues(spec, n_reps, seed)
    # per-replica streams make the partition exact: any split yields the
    # same rows as a single sequential pass
    bounds = np.linspace(0, n_reps, threads + 1).astype(int)
    ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    out = np.empty((n_reps, spec.n))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = {
            pool.submit(sample_eigenvalues, spec, b - a, seed, first_replica=a): (a, b)
            for a, b in ranges
        }
        for fut, (a, b) in futs.items():
            out[a:b] = fut.result()
    return out


def cmd_simulate(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    _check_keys(cfg, "config", required=("model", "n", "n_replicas"),
                optional=("x", "delta", "seed"))
    model = _parse_model(cfg["model"])
    n = int(cfg["n"])
    n_reps = int(cfg["n_replicas"])
    if n_reps < 1:
        raise ConfigError("n_replicas must be >= 1")
    spec = EnsembleSpec.from_measures(model.mu_a, model.mu_b, n, beta=model.beta)
    rows = _sample_rows(spec, n_reps, seed, threads)
    lam_max, lam_min = rows[:, 0], rows[:, -1]
    provenance = _resolved("simulate", cfg, seed)
    _write_csv(os.path.join(out_dir, "simulate.csv"),
               ["replica_id", "lambda_max", "lambda_min"],
               [[k, lam_max[k], lam_min[k]] for k in range(n_reps)],
               provenance)
    summary = dict(provenance)
    summary["n_replicas"] = n_reps
    summary["lambda_max_mean"] = float(lam_max.mean())
    summary["lambda_max_se"] = float(lam_max.std(ddof=1) / math.sqrt(n_reps)) if n_reps > 1 else None
    if "x" in cfg and "delta" in cfg:
        x, delta = float(cfg["x"]), float(cfg["delta"])
        hits = int(np.sum(np.abs(lam_max - x) <= delta))
        p_hat = hits / n_reps
        se = math.sqrt(p_hat * (1.0 - p_hat) / n_reps)
        summary["tail"] = {
            "x": x, "delta": delta, "p_hat": p_hat, "std_err": se,
            "neg_log_rate": _fmt(
                -math.log(p_hat) / n if p_hat > 0 else math.log(n_reps + 1.0) / n),
        }
    _write_json(os.path.join(out_dir, "simulate.json"), summary)
    return 0


def cmd_tilt(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    _check_keys(cfg, "config", required=("model", "n", "tilt"),
                optional=("x", "delta", "seed"))
    model = _parse_model(cfg["model"])
    n = int(cfg["n"])
    _check_keys(cfg["tilt"], "tilt", required=("theta",),
                optional=("n_burn", "n_keep", "proposal_angle", "weight_mc_samples"))
    tilt = TiltConfig(
        theta=float(cfg["tilt"]["theta"]),
        n_burn=int(cfg["tilt"].get("n_burn", 2000)),
        n_keep=int(cfg["tilt"].get("n_keep", 8000)),
        proposal_angle=float(cfg["tilt"].get("proposal_angle", 1.2)),
        weight_mc_samples=int(cfg["tilt"].get("weight_mc_samples", 256)),
    )
    spec = EnsembleSpec.from_measures(model.mu_a, model.mu_b, n, beta=model.beta)
    result = tilted_sampler(spec, tilt, replica_rng(seed))
    provenance = _resolved("tilt", cfg, seed)
    _write_csv(os.path.join(out_dir, "tilt.csv"),
               ["sample_id", "lambda_max", "log_inv_weight"],
               [[k, result.lambda_max[k], result.log_inv_weight[k]]
                for k in range(result.lambda_max.size)],
               provenance)
    summary = dict(provenance)
    summary["theta"] = result.theta
    summary["n_kept"] = int(result.lambda_max.size)
    summary["acceptance_rate"] = result.acceptance_rate
    summary["lambda_max_mean"] = float(result.lambda_max.mean())
    if "x" in cfg and "delta" in cfg:
        est = result.tail_estimate(float(cfg["x"]), float(cfg["delta"]))
        summary["tail"] = {
            "x": est.x, "delta": est.delta, "p_hat": est.p_hat,
            "std_err": est.std_err, "neg_log_rate": _fmt(est.neg_log_rate),
        }
    _write_json(os.path.join(out_dir, "tilt.json"), summary)
    return 0


def cmd_verify(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    indices = None
    if cfg:
        _check_keys(cfg, "config", optional=("criteria",))
        if "criteria" in cfg:
            indices = [int(k) for k in cfg["criteria"]]
            bad = sorted(set(indices) - set(range(1, 10)))
            if bad:
                raise ConfigError(f"unknown criteria {bad}; valid: 1..9")
    results = acceptance.run_all(indices)
    payload = _resolved("verify", cfg, seed)
    payload["results"] = [
        {"index": r.index, "name": r.name, "passed": r.passed,
         "runtime_s": round(r.runtime, 3), "budget_s": r.budget, "detail": r.detail}
        for r in results
    ]
    _write_json(os.path.join(out_dir, "verify.json"), payload)
    return 0 if all(r.passed for r in results) else 1


_COMMANDS = {
    "convolve": (cmd_convolve, True),
    "rate": (cmd_rate, True),
    "rate-min": (cmd_rate_min, True),
    "deformed-rate": (cmd_deformed_rate, True),
    "simulate": (cmd_simulate, True),
    "tilt": (cmd_tilt, True),
    "verify": (cmd_verify, False),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freeldp",
        description="Spectral free-convolution and large-deviation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_config) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed (default 0)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap on parallel replica workers (default: cores)")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler, _ = _COMMANDS[args.command]
    try:
        cfg = _load_config(args.config) if args.config else {}
        if "seed" in cfg and not isinstance(cfg["seed"], int):
            raise ConfigError("seed must be an integer")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return handler(cfg, args.out, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError) as exc:
        # model values that violate a constructor contract are config errors;
        # they surface while building objects from the config
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
