"""Command-line front end: sample, verify, ess, bench.

Exit codes are a stable contract: 0 on success, 1 when a verification suite
reports a failure, 2 for configuration errors.  Output files are written
atomically (temp file then rename).  ``IMCMC_SEED`` provides a seed when no
flag or config key does.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from .core import make_rng, run_chain
from .diagnostics import acceptance_rate, ess_batch_means
from .errors import ConfigError, DegenerateSeriesError, ImcmcError
from .maps import CouplingMap, LeapfrogConfig, affine_x_flow, identity_flow
from .samplers import (
    SamplerSpec,
    default_init,
    gaussian_family,
    make_cdf_deterministic,
    make_directional_map,
    make_embedded_flow,
    make_hamiltonian,
    make_irr_mala,
    make_irr_nice_mc,
    make_lifted_rw1d,
    make_look_ahead,
    make_mh,
    make_multiple_try,
    make_persistent,
    mala_proposal,
    random_walk_proposal,
)
from .targets import (
    LogisticPosterior,
    exponential_cdf1d,
    load_dataset,
    mixture_1d,
    mog2,
    normal_cdf1d,
    standard_normal,
    uniform_cdf1d,
)

BENCH_KINDS = ("mala", "irr_mala", "nice_mc", "irr_nice_mc")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def parse_config_file(path: str) -> dict:
    """Flat key-value file (a TOML-compatible subset): `key = value` lines."""
    out: dict = {}
    for ln_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if value.startswith(("'", '"')) and value.endswith(value[0]) and len(value) >= 2:
            out[key] = value[1:-1]
            continue
        for cast in (int, float):
            try:
                out[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            out[key] = value
    return out


@dataclasses.dataclass
class RunConfig:
    """Validated run description shared by `sample` and `bench`."""

    kind: str
    target: str
    steps: int = 20000
    burn_in: int = 1000
    chains: int = 1
    seed: int = 0
    out: Optional[str] = None
    fmt: str = "csv"
    jobs: int = 1
    params: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigError("need at least one chain")
        if not self.steps > self.burn_in >= 0:
            raise ConfigError("need steps > burn_in >= 0")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("IMCMC_SEED")
    return int(env) if env else 0


# ---------------------------------------------------------------------------
# target and sampler construction
# ---------------------------------------------------------------------------

def build_target(name: str, dataset: Optional[str] = None):
    """Named target: density, starting point, and optional extras."""
    if name == "mog2":
        return {"density": mog2(), "x0": np.array([2.0, 0.0]), "batch": "mog2"}
    if name == "normal":
        return {"density": standard_normal(2), "x0": np.zeros(2)}
    if name == "normal1d":
        return {"density": standard_normal(1), "x0": np.zeros(1),
                "cdf": normal_cdf1d()}
    if name == "bimodal1d":
        return {"density": mixture_1d([-1.5, 1.5], 0.6), "x0": np.array([1.5])}
    if name == "exponential":
        c = exponential_cdf1d()
        return {"density": c.density, "x0": np.ones(1), "cdf": c}
    if name == "uniform":
        c = uniform_cdf1d()
        return {"density": c.density, "x0": np.full(1, 0.5), "cdf": c}
    if name == "logreg":
        if not dataset:
            raise ConfigError("the logreg target needs --dataset")
        ds = load_dataset(dataset)
        post = LogisticPosterior(ds.X, ds.y)
        return {"density": post.density(), "x0": np.zeros(post.dim),
                "posterior": post, "batch": "logreg"}
    raise ConfigError(f"unknown target {name!r}")


def default_coupling(target_name: str, dim: int) -> CouplingMap:
    """Hand-parameterized volume-preserving proposal map.

    Swap plus a moment-matched componentwise rescale plus a small smooth
    shift; for the two-mode target the scales match its marginal spread so
    proposals reach both modes.
    """
    if target_name == "mog2":
        scales = np.array([math.sqrt(4.5), math.sqrt(0.5)])
    else:
        scales = np.ones(dim)

    def small_shift(y):
        return 0.1 * np.tanh(y / 3.0)

    return CouplingMap([("swap",), ("linear", scales, 1.0 / scales),
                        ("add_v", small_shift)],
                       name=f"{target_name}_coupling", slot="v")


def build_kernel(cfg: RunConfig, tgt: dict):
    density = tgt["density"]
    d = density.dim
    spec = SamplerSpec(cfg.kind, cfg.params)
    p = spec.params
    if cfg.kind == "rwm":
        return make_mh(density, random_walk_proposal(d, p["scale"]))
    if cfg.kind == "mala":
        return make_mh(density, mala_proposal(density, p["eps"]))
    if cfg.kind == "irr_mala":
        return make_irr_mala(density, p["eps"])
    if cfg.kind == "hmc":
        return make_hamiltonian(density, LeapfrogConfig(p["eps"], int(p["k"])))
    if cfg.kind == "persistent_hmc":
        from .maps import leapfrog_flow

        L = leapfrog_flow(LeapfrogConfig(p["eps"], int(p["k"])), density.grad,
                          slot="v")
        return make_persistent(density, L, p["alpha"])
    if cfg.kind == "look_ahead":
        from .maps import leapfrog_flow

        L = leapfrog_flow(LeapfrogConfig(p["eps"], 1), density.grad, slot="v")
        return make_look_ahead(density, L, int(p["K"]), p["alpha"])
    if cfg.kind == "neutra":
        shift = cfg.params.get("flow_shift", 0.0)
        scale = cfg.params.get("flow_scale", 1.0)
        flow = (identity_flow() if shift == 0.0 and scale == 1.0
                else affine_x_flow(np.full(d, shift), np.full(d, scale)))
        return make_embedded_flow(density, flow,
                                  LeapfrogConfig(p["eps"], int(p["k"])))
    if cfg.kind == "nice_mc":
        return make_directional_map(density, default_coupling(cfg.target, d))
    if cfg.kind == "irr_nice_mc":
        return make_irr_nice_mc(density, default_coupling(cfg.target, d),
                                p["alpha"])
    if cfg.kind == "mtm":
        return make_multiple_try(density, gaussian_family(d, p["scale"] ** 2),
                                 int(p["k"]))
    if cfg.kind == "lifted_rw":
        return make_lifted_rw1d(density, p["scale"])
    if cfg.kind == "cdf":
        if "cdf" not in tgt:
            raise ConfigError(f"target {cfg.target!r} has no tractable CDF")
        return make_cdf_deterministic(tgt["cdf"], cfg.params.get("shift"))
    raise ConfigError(f"unknown sampler kind {cfg.kind!r}")


# ---------------------------------------------------------------------------
# atomic output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_trace_csv(path: Path, xs: np.ndarray, accepted: np.ndarray):
    d = xs.shape[1]
    header = "step,accepted," + ",".join(f"x_{i}" for i in range(d))
    lines = [header]
    for i in range(xs.shape[0]):
        coords = ",".join(repr(float(v)) for v in xs[i])
        lines.append(f"{i},{int(accepted[i])},{coords}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_trace_csv(path: Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        cols = [i for i, name in enumerate(header) if name.startswith("x_")]
        if not cols:
            raise ConfigError(f"{path}: no x_* columns found")
        data = np.loadtxt(fh, delimiter=",", usecols=cols, ndmin=2)
    return data


def _aggregate(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()),
            "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _chain_worker(cfg: RunConfig, index: int) -> tuple[np.ndarray, np.ndarray, float]:
    tgt = build_target(cfg.target, cfg.params.get("dataset"))
    kernel = build_kernel(cfg, tgt)
    rngs = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    t0 = time.perf_counter()
    res = run_chain(kernel, default_init(kernel, tgt["x0"]), cfg.steps,
                    rng=make_rng(rngs[index]))
    return res.xs, res.accepted_all(), time.perf_counter() - t0


def cmd_sample(cfg: RunConfig) -> dict:
    out_dir = Path(cfg.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_chain_worker, [cfg] * cfg.chains,
                                    range(cfg.chains)))
    else:
        results = [_chain_worker(cfg, i) for i in range(cfg.chains)]

    reports = []
    for i, (xs, accepted, seconds) in enumerate(results):
        write_trace_csv(out_dir / f"chain_{i:03d}.csv", xs, accepted)
        kept = xs[cfg.burn_in:]
        rep = ess_batch_means(kept, seconds=seconds * kept.shape[0] / xs.shape[0],
                              accept_rate=acceptance_rate(accepted))
        reports.append(rep)

    summary = {
        "kind": cfg.kind,
        "target": cfg.target,
        "chains": cfg.chains,
        "n": cfg.steps - cfg.burn_in,
        "dims": int(results[0][0].shape[1]),
        "ess": _aggregate([r.ess for r in reports]),
        "iact": _aggregate([r.iact for r in reports]),
        "ess_per_sec": _aggregate([r.ess_per_sec for r in reports]),
        "accept_rate": _aggregate([r.accept_rate for r in reports]),
    }
    _atomic_write(out_dir / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_verify(suite: str, mutant: bool = False) -> int:
    from . import suite as vs

    runners = {"involutions": vs.run_involutions,
               "stationarity": vs.run_stationarity,
               "balance": vs.run_balance,
               "reductions": vs.run_reductions,
               "all": vs.run_all}
    if suite not in runners:
        raise ConfigError(f"unknown suite {suite!r}; choose from "
                          f"{', '.join(sorted(runners))}")
    results = runners[suite]()
    if mutant:
        # inject the broken-acceptance fixture as a live check: it must make
        # the suite fail, demonstrating the oracle's discriminative power
        case = vs.mutant_case()
        from .diagnostics import check_stationary

        resid = check_stationary(case.check_matrix(), case.check_pmf,
                                 vs.STATIONARY_TOL)
        results.append(vs.CheckResult("injected_mutant", "stationarity",
                                      resid.residual, vs.STATIONARY_TOL,
                                      resid.passed))
    failures = 0
    for r in results:
        print(r.line())
        failures += 0 if r.passed else 1
    print(f"{len(results)} checks, {failures} failures")
    return 1 if failures else 0


def cmd_ess(trace: Optional[str] = None, cfg: Optional[RunConfig] = None) -> dict:
    """ESS report from a trace file, or from running a configured chain."""
    if trace is not None:
        return ess_batch_means(read_trace_csv(Path(trace))).to_json()
    if cfg is None:
        raise ConfigError("ess needs --trace or a run configuration")
    if cfg.chains != 1:
        raise ConfigError("ess from a config runs a single chain; "
                          "use `sample` for multi-chain summaries")
    xs, accepted, seconds = _chain_worker(cfg, 0)
    kept = xs[cfg.burn_in:]
    rep = ess_batch_means(kept, seconds=seconds * kept.shape[0] / xs.shape[0],
                          accept_rate=acceptance_rate(accepted))
    return rep.to_json()


def cmd_bench(cfg: RunConfig, samplers: list[str]) -> list[dict]:
    """Benchmark table: per-sampler ESS and ESS/sec, mean and std over chains.

    ESS is reported per kept sample (the batch-means estimate divided by the
    kept chain length); ESS/sec is absolute effective samples per second of
    sampling time.
    """
    from .batch import (batch_irr_mala, batch_irr_nice_mc, batch_mala,
                        batch_nice_mc, logreg_batch, mog2_batch)

    tgt = build_target(cfg.target, cfg.params.get("dataset"))
    kind_of_batch = tgt.get("batch")
    if kind_of_batch == "mog2":
        bt = mog2_batch()
    elif kind_of_batch == "logreg":
        bt = logreg_batch(tgt["posterior"])
    else:
        raise ConfigError(f"bench supports mog2 and logreg targets, not {cfg.target!r}")

    rows = []
    for kind in samplers:
        if kind not in BENCH_KINDS:
            raise ConfigError(f"bench supports {', '.join(BENCH_KINDS)}; got {kind!r}")
        params = dict(cfg.params)
        spec = SamplerSpec(kind, params) if kind != "nice_mc" else SamplerSpec(kind, {})
        rng = make_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        t0 = time.perf_counter()
        if kind == "mala":
            res = batch_mala(bt, params["eps"], cfg.chains, cfg.steps, rng, tgt["x0"])
        elif kind == "irr_mala":
            res = batch_irr_mala(bt, params["eps"], cfg.chains, cfg.steps, rng, tgt["x0"])
        elif kind == "nice_mc":
            res = batch_nice_mc(bt, default_coupling(cfg.target, bt.dim),
                                cfg.chains, cfg.steps, rng, tgt["x0"])
        else:
            res = batch_irr_nice_mc(bt, default_coupling(cfg.target, bt.dim),
                                    params["alpha"], cfg.chains, cfg.steps, rng,
                                    tgt["x0"])
        seconds = time.perf_counter() - t0
        per_chain_sec = seconds / cfg.chains
        kept = res.xs[cfg.burn_in:]
        n_kept = kept.shape[0]
        ess_vals, speed_vals = [], []
        for c in range(cfg.chains):
            rep = ess_batch_means(kept[:, c, :])
            ess_vals.append(rep.ess / n_kept)
            speed_vals.append(rep.ess / per_chain_sec)
        rows.append({
            "sampler": kind,
            "target": cfg.target,
            "chains": cfg.chains,
            "n": n_kept,
            "accept_rate": float(res.accepted.mean()),
            "seconds": seconds,
            "ess": _aggregate(ess_vals),
            "ess_per_sec": _aggregate(speed_vals),
        })
    return rows


def _bench_table(rows: list[dict]) -> str:
    lines = ["sampler,target,chains,n,ess_mean,ess_std,ess_per_sec_mean,"
             "ess_per_sec_std,accept_rate,seconds"]
    for r in rows:
        lines.append(
            f"{r['sampler']},{r['target']},{r['chains']},{r['n']},"
            f"{r['ess']['mean']:.6g},{r['ess']['std']:.6g},"
            f"{r['ess_per_sec']['mean']:.6g},{r['ess_per_sec']['std']:.6g},"
            f"{r['accept_rate']:.4f},{r['seconds']:.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_PARAM_FLAGS = ("eps", "k", "K", "alpha", "scale", "shift", "flow_shift",
                "flow_scale")


def _add_run_flags(sp):
    sp.add_argument("--config", help="flat key=value config file")
    sp.add_argument("--kind")
    sp.add_argument("--target")
    sp.add_argument("--dataset", help="CSV path for the logreg target")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.add_argument("--chains", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", dest="fmt", choices=("csv", "json"))
    sp.add_argument("--jobs", type=int)
    for flag in _PARAM_FLAGS:
        sp.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=float)


_DEFAULTS = {"steps": 20000, "burn_in": 1000, "chains": 1, "fmt": "csv",
             "jobs": 1, "alpha": 0.8}


def _make_config(args, need_kind: bool = True) -> RunConfig:
    merged: dict = {}
    if args.config:
        merged.update(parse_config_file(args.config))
    for key in ("kind", "target", "dataset", "steps", "burn_in", "chains",
                "seed", "out", "fmt", "jobs", *_PARAM_FLAGS):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    kind = merged.get("kind")
    target = merged.get("target")
    if need_kind and not kind:
        raise ConfigError("a sampler kind is required (--kind)")
    if not target:
        raise ConfigError("a target is required (--target)")
    params = {k: merged[k] for k in _PARAM_FLAGS if k in merged}
    if "k" in params:
        params["k"] = int(params["k"])
    if "K" in params:
        params["K"] = int(params["K"])
    if merged.get("dataset"):
        params["dataset"] = merged["dataset"]
    if kind in ("irr_nice_mc",) and "alpha" not in params:
        params["alpha"] = _DEFAULTS["alpha"]
    seed = merged.get("seed")
    if seed is None:
        seed = int(os.environ.get("IMCMC_SEED", "0"))
    return RunConfig(kind=kind or "", target=target,
                     steps=int(merged.get("steps", _DEFAULTS["steps"])),
                     burn_in=int(merged.get("burn_in", _DEFAULTS["burn_in"])),
                     chains=int(merged.get("chains", _DEFAULTS["chains"])),
                     seed=int(seed), out=merged.get("out"),
                     fmt=merged.get("fmt", "csv"),
                     jobs=int(merged.get("jobs", _DEFAULTS["jobs"])),
                     params=params)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="imcmc",
        description="involutive kernel samplers, verification oracles, benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="run chains and write traces")
    _add_run_flags(sp)

    vp = sub.add_parser("verify", help="run the exact verification suites")
    vp.add_argument("suite", choices=("involutions", "stationarity", "balance",
                                      "reductions", "all"))
    vp.add_argument("--mutant", action="store_true",
                    help="inject a broken kernel; the suite must then fail")

    ep = sub.add_parser("ess", help="batch-means ESS of a trace or a fresh run")
    ep.add_argument("--trace")
    _add_run_flags(ep)

    bp = sub.add_parser("bench", help="benchmark table over samplers")
    _add_run_flags(bp)
    bp.add_argument("--samplers", default=",".join(BENCH_KINDS),
                    help="comma-separated subset of " + ",".join(BENCH_KINDS))

    args = parser.parse_args(argv)
    try:
        if args.command == "sample":
            summary = cmd_sample(_make_config(args))
            print(json.dumps(summary, indent=2))
            return 0
        if args.command == "verify":
            return cmd_verify(args.suite, mutant=args.mutant)
        if args.command == "ess":
            cfg = None if args.trace else _make_config(args)
            report = cmd_ess(args.trace, cfg)
            text = json.dumps(report, indent=2)
            if args.out:
                _atomic_write(Path(args.out), text + "\n")
            print(text)
            return 0
        if args.command == "bench":
            cfg = _make_config(args, need_kind=False)
            if "eps" not in cfg.params:
                cfg.params["eps"] = 0.1
            if "alpha" not in cfg.params:
                cfg.params["alpha"] = _DEFAULTS["alpha"]
            rows = cmd_bench(cfg, [s.strip() for s in args.samplers.split(",") if s.strip()])
            if cfg.fmt == "json":
                text = json.dumps(rows, indent=2)
            else:
                text = _bench_table(rows)
            if cfg.out:
                out = Path(cfg.out)
                out.parent.mkdir(parents=True, exist_ok=True)
                _atomic_write(out, text if text.endswith("\n") else text + "\n")
            print(text)
            return 0
    except (ConfigError, DegenerateSeriesError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ImcmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
