"""Command-line entry point: ``vqa-noise <subcommand>``.

Exit status: 0 success, 1 a check or suite failed, 2 usage or config error.
Each run takes one JSON config document; every default is written back into
the emitted record so outputs describe themselves.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from vqa_noise.bounds import bound_report, fidelity_bounds, scaling_helpers
from vqa_noise.channels import NoiseSpec, variance_of_stochastic, verify_channel_suite
from vqa_noise.harness import (
    OptimizerConfig,
    SweepConfig,
    ToyModel,
    ToyModelSpec,
    optimize,
    plot_record,
    run_sweep,
)
from vqa_noise.mitigation import mitigate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def _check_keys(doc: dict, allowed, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


@dataclass(frozen=True)
class ModelConfig:
    n: int = 4
    depth: int = 2
    E0: float = 1.0
    E1: float = 51.0
    Emax: float = 100.0
    seed: int = 0

    def spec(self) -> ToyModelSpec:
        return ToyModelSpec.from_seed(self.seed, n=self.n, depth=self.depth, E0=self.E0,
                                      E1=self.E1, Emax=self.Emax)


@dataclass(frozen=True)
class PointConfig:
    """Config for ``predict`` and ``mitigate-demo``: one toy instance, one noise setting."""

    model: ModelConfig = field(default_factory=ModelConfig)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(q1=1e-4, q2=1e-3, q_readout=1e-3))
    theta: str | tuple = "planted"
    precision: float | None = None
    mode: str = "exact"
    samples: int = 100_000
    seed: int = 0
    shift_gate_noise: bool = False
    threads: int = 1
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @classmethod
    def from_dict(cls, doc: dict) -> "PointConfig":
        _check_keys(doc, [f.name for f in fields(cls)], "config")
        doc = dict(doc)
        model = doc.pop("model", {})
        _check_keys(model, [f.name for f in fields(ModelConfig)], "model")
        opt = doc.pop("optimizer", {})
        _check_keys(opt, [f.name for f in fields(OptimizerConfig)], "optimizer")
        noise = NoiseSpec.from_dict(doc.pop("noise")) if "noise" in doc else cls().noise
        theta = doc.pop("theta", "planted")
        if isinstance(theta, list):
            theta = tuple(float(t) for t in theta)
        elif theta not in ("planted", "optimized"):
            raise ConfigError("theta must be 'planted', 'optimized' or a list of angles")
        cfg = cls(model=ModelConfig(**model), noise=noise, theta=theta,
                  optimizer=OptimizerConfig(**opt), **doc)
        if cfg.mode not in ("exact", "trajectory"):
            raise ConfigError(f"unknown mode {cfg.mode!r}")
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = self.noise.to_dict()
        if isinstance(self.theta, tuple):
            d["theta"] = list(self.theta)
        return d


def sweep_config_from_dict(doc: dict) -> SweepConfig:
    _check_keys(doc, [f.name for f in fields(SweepConfig)], "config")
    doc = dict(doc)
    if "optimizer" in doc:
        _check_keys(doc["optimizer"], [f.name for f in fields(OptimizerConfig)], "optimizer")
        doc["optimizer"] = OptimizerConfig(**doc["optimizer"])
    for key in ("values", "seeds"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return SweepConfig(**doc)


def _overrides(args) -> dict:
    out = {}
    for key in ("threads", "mode", "samples"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def _emit(obj, out_dir: Path | None, name: str):
    text = json.dumps(obj, indent=2, default=_default)
    print(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


# --- subcommands ----------------------------------------------------------------


def cmd_verify_channels(args) -> int:
    variance_fn = variance_of_stochastic
    if args.inject_variance_error:
        factor = 1.0 + args.inject_variance_error

        def variance_fn(p):
            return factor * variance_of_stochastic(p)

    results = verify_channel_suite(seed=args.seed or 0, variance_fn=variance_fn)
    ok = all(r["passed"] for r in results)
    _emit({"suites": results, "passed": ok}, args.out, "verify_channels.json")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = sweep_config_from_dict(load_json(args.config))
    over = _overrides(args)
    if args.seed is not None:
        over["seeds"] = (args.seed,)
    cfg = replace(cfg, **over)
    record = run_sweep(cfg)
    out = args.out or Path("results")
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{cfg.variable}"
    (out / f"{stem}.csv").write_text(record.to_csv())
    (out / f"{stem}.json").write_text(record.to_json() + "\n")
    plot_record(record, out / f"{stem}.svg", cfg.variable)
    print(json.dumps({"variable": cfg.variable, "summary": record.summary,
                      "csv": str(out / f"{stem}.csv")}, indent=2))
    failed = any("error" in r for r in record.rows)
    return EXIT_FAIL if failed else EXIT_OK


def _point_setup(args):
    cfg = PointConfig.from_dict(load_json(args.config))
    over = _overrides(args)
    if args.seed is not None:
        over["model"] = replace(cfg.model, seed=args.seed)
        over["seed"] = args.seed
    cfg = replace(cfg, **over)
    if cfg.mode not in ("exact", "trajectory"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    model = ToyModel(cfg.model.spec())
    ev = model.evaluator(cfg.noise, mode=cfg.mode, samples=cfg.samples, seed=cfg.seed,
                         shift_gate_noise=cfg.shift_gate_noise, threads=cfg.threads)
    if cfg.theta == "planted":
        theta = model.theta_opt
    elif cfg.theta == "optimized":
        theta = optimize(ev, cfg.optimizer).theta
    else:
        theta = np.asarray(cfg.theta, dtype=float)
        if theta.shape != (ev.n_params,):
            raise ConfigError(f"theta needs {ev.n_params} angles")
    return cfg, model, ev, theta


def cmd_predict(args) -> int:
    if args.scaling is not None:
        try:
            kv = dict(tok.split("=", 1) for tok in args.scaling)
            nums = {k: float(v) for k, v in kv.items()}
            _check_keys(nums, ["r", "n", "M", "eps", "q"], "--scaling")
            report = scaling_helpers(nums["n"], nums["M"], nums["r"], eps=nums.get("eps"),
                                     q=nums.get("q"))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad --scaling arguments: {exc}") from exc
        _emit(report, args.out, "predict_scaling.json")
        return EXIT_OK
    cfg, model, ev, theta = _point_setup(args)
    noisy, se = ev.value(theta)
    real_var, virt_var = ev.registry.variances(ev.n_params)
    spectrum = model.spectrum
    rep = bound_report(ev.cost, theta, spectrum, real_var, virt_var, noisy)
    lo, hi = fidelity_bounds(min(max(noisy, spectrum.E0), spectrum.Emax), spectrum)
    _emit({"config": cfg.to_dict(), "registry": ev.registry.summary(),
           "spectrum": {"E0": spectrum.E0, "E1": spectrum.E1, "Emax": spectrum.Emax},
           "theta": theta, "report": rep.to_dict(), "noisy_standard_error": se,
           "infidelity_bounds": [lo, hi]}, args.out, "predict.json")
    return EXIT_OK


def cmd_mitigate_demo(args) -> int:
    cfg, model, ev, theta = _point_setup(args)
    report = mitigate(ev, theta, precision=cfg.precision)
    clean = ev.cost.value(theta)
    residual = report.mitigated - clean
    # the residual bound holds for exact channels; sampled values add statistical error,
    # and the density-matrix and state-vector paths differ by rounding
    slack = 4 * report.raw_standard_error + 1e-12 * max(1.0, abs(clean))
    ok = abs(residual) <= report.remainder_bound + slack
    _emit({"config": cfg.to_dict(), "noiseless": clean, "raw_error": report.raw_noisy - clean,
           "residual": residual, "residual_within_remainder": ok, "report": report.to_dict()},
          args.out, "mitigate_demo.json")
    return EXIT_OK if ok else EXIT_FAIL


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--mode", choices=("exact", "trajectory"), default=None)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vqa-noise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-channels", parents=[common], help="PTM equivalence checks")
    p.add_argument("--inject-variance-error", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_channels)

    p = sub.add_parser("sweep", parents=[common], help="rate or gap sweep on the toy model")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", parents=[common], help="bounds at one point, or scaling numbers")
    p.add_argument("--config", default=None)
    p.add_argument("--scaling", nargs="+", metavar="KEY=VALUE",
                   help="r=.. n=.. M=.. and eps=.. or q=..")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("mitigate-demo", parents=[common], help="leading-term mitigation report")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_mitigate_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "samples", None) is not None and args.samples < 2:
        print("error: --samples must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
