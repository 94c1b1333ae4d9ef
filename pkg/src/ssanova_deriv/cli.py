"""Command-line front end.

Every command except ``exponent`` reads a strict TOML config and writes its
artifacts plus ``manifest.txt`` into ``--out``.  Artifacts are staged in a
temporary sibling directory and moved into place only on success.

Exit codes: 0 success, 1 input error, 2 singular system.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from dataclasses import MISSING, fields
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .data import DerivativeDataset
from .errors import DegenerateSystemError, InputError
from .kernel import DEFAULT_SERIES_CUTOFF, fit_regularized
from .lattice import fit_lattice, make_lattice, tune_lambda
from .rates import RateConfig, config_dict, run_experiment, theoretical_exponent
from .sim import IIDUniform, TruthSpec, gen_data, sample_truth

# section -> key -> (type check, default); a default of REQUIRED must be given
REQUIRED = object()
_num = (int, float)

SCHEMAS: dict[str, dict[str, dict[str, tuple]]] = {
    "simulate": {
        "": {"seed": (int, 0)},
        "truth": {"d": (int, REQUIRED), "r": (int, REQUIRED), "m": (_num, 2.0),
                  "max_frequency": (int, 16)},
        "design": {"kind": (str, "lattice"), "resolutions": (list, None), "n": (int, None)},
        "data": {"p": (int, 0), "sigmas": (list, None)},
    },
    "fit-lattice": {
        "": {"seed": (int, 0)},
        "data": {"path": (str, REQUIRED)},
        "fit": {"m": (_num, 2.0), "r": (int, REQUIRED), "lambda": (_num, None),
                "lambda_c": (_num, 1.0), "lambda_mode": (str, "function"), "sigmas": (list, None)},
    },
    "fit-kernel": {
        "": {"seed": (int, 0)},
        "data": {"path": (str, REQUIRED)},
        "fit": {"m": (_num, 2.0), "r": (int, REQUIRED), "lambda": (_num, REQUIRED),
                "series_cutoff": (int, DEFAULT_SERIES_CUTOFF), "sigmas": (list, None)},
    },
    "rates": {
        "": {"seed": (int, 0)},
        "rates": {f.name: (object, f.default if f.default is not MISSING else f.default_factory())
                  for f in fields(RateConfig) if f.name != "seed"},
    },
}


def _type_name(kind) -> str:
    if kind is _num:
        return "number"
    return getattr(kind, "__name__", str(kind))


def parse_config(path: str | os.PathLike, command: str) -> dict[str, dict[str, Any]]:
    """Load ``path`` and validate it against the schema for ``command``."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: malformed TOML ({exc})") from None
    schema = SCHEMAS[command]
    out: dict[str, dict[str, Any]] = {s: {} for s in schema}
    for key, val in raw.items():
        if isinstance(val, dict):
            if key not in schema or key == "":
                raise InputError(f"unknown config section [{key}] for {command}")
            for sub, subval in val.items():
                _put(out, schema, key, sub, subval)
        else:
            _put(out, schema, "", key, val)
    for section, keys in schema.items():
        for key, (_, default) in keys.items():
            if key not in out[section]:
                if default is REQUIRED:
                    raise InputError(f"missing required config key {_dotted(section, key)}")
                out[section][key] = default
    return out


def _dotted(section: str, key: str) -> str:
    return f"{section}.{key}" if section else key


def _put(out, schema, section, key, val):
    keys = schema[section]
    if key not in keys:
        raise InputError(f"unknown config key {_dotted(section, key)}")
    kind = keys[key][0]
    bad = isinstance(val, bool) and kind is not object
    if kind is not object and (bad or not isinstance(val, kind)):
        raise InputError(f"config key {_dotted(section, key)} must be {_type_name(kind)}, "
                         f"got {type(val).__name__}")
    out[section][key] = val


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def _manifest(command: str, cfg: Mapping, extra: Mapping | None = None) -> str:
    lines = [f"command = {command}"]
    for section in sorted(cfg):
        for key in sorted(cfg[section]):
            lines.append(f"{_dotted(section, key)} = {json.dumps(cfg[section][key], sort_keys=True)}")
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {json.dumps(val, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _sigmas(val, count: int, key: str) -> list[float]:
    if val is None:
        return [1.0] * count
    if len(val) != count or not all(isinstance(v, _num) and not isinstance(v, bool) for v in val):
        raise InputError(f"config key {key} must list {count} numbers, got {val!r}")
    return [float(v) for v in val]


def run_simulate(cfg, stage: Path, threads: int) -> dict:
    t, dz, da = cfg["truth"], cfg["design"], cfg["data"]
    seed = cfg[""]["seed"]
    spec = TruthSpec(t["d"], t["r"], float(t["m"]), t["max_frequency"])
    if not 1 <= spec.r <= spec.d:
        raise InputError(f"config key truth.r must satisfy 1 <= r <= d, got r={spec.r}")
    if spec.max_frequency < 0:
        raise InputError("config key truth.max_frequency must be >= 0")
    if dz["kind"] == "lattice":
        res = dz["resolutions"]
        if res is None:
            raise InputError("missing required config key design.resolutions for kind 'lattice'")
        if len(res) != spec.d or not all(isinstance(v, int) and v >= 1 for v in res):
            raise InputError(f"config key design.resolutions must list {spec.d} positive integers")
        design = make_lattice(res)
    elif dz["kind"] == "iid_uniform":
        if dz["n"] is None or dz["n"] < 1:
            raise InputError("config key design.n must be a positive integer for kind 'iid_uniform'")
        design = IIDUniform(dz["n"])
    else:
        raise InputError(f"config key design.kind must be 'lattice' or 'iid_uniform', got {dz['kind']!r}")
    p = da["p"]
    if not 0 <= p <= spec.d:
        raise InputError(f"config key data.p must satisfy 0 <= p <= d, got {p}")
    sig = _sigmas(da["sigmas"], p + 1, "data.sigmas")
    truth = sample_truth(spec, seed)
    data = gen_data(truth, design, p, sig, seed=seed + 1)
    truth.save(stage / "truth.txt")
    data.save(stage / "dataset.txt")
    return {"truth_hash": truth.digest()}


def _load_data(cfg, base: Path) -> DerivativeDataset:
    return DerivativeDataset.load(_resolve(base, cfg["data"]["path"]))


def run_fit_lattice(cfg, stage: Path, threads: int, base: Path) -> dict:
    f = cfg["fit"]
    data = _load_data(cfg, base)
    sig = _sigmas(f["sigmas"], data.p + 1, "fit.sigmas")
    lam = f["lambda"]
    if lam is None:
        n = data.channels[0].n
        lam = tune_lambda(n, float(f["m"]), data.d, f["r"], data.p, f["lambda_mode"], float(f["lambda_c"]))
    fit = fit_lattice(data, float(lam), float(f["m"]), f["r"], sig)
    fit.save(stage / "fit.txt")
    return {"lambda_used": float(lam)}


def run_fit_kernel(cfg, stage: Path, threads: int, base: Path) -> dict:
    f = cfg["fit"]
    data = _load_data(cfg, base)
    sig = _sigmas(f["sigmas"], data.p + 1, "fit.sigmas")
    cutoff = f["series_cutoff"] if f["series_cutoff"] > 0 else None
    fit = fit_regularized(data, float(f["lambda"]), float(f["m"]), f["r"], cutoff, sig)
    fit.save(stage / "kernel_fit.txt")
    return {"stationarity_residual": fit.residual}


def run_rates(cfg, stage: Path, threads: int) -> dict:
    kwargs = dict(cfg["rates"])
    kwargs["seed"] = cfg[""]["seed"]
    try:
        config = RateConfig(**kwargs)
    except TypeError as exc:
        raise InputError(f"bad [rates] section: {exc}") from None
    # echo the resolved values (filled-in sigmas etc.) in the manifest
    cfg["rates"].update({k: v for k, v in config_dict(config).items() if k != "seed"})
    report = run_experiment(config, threads=threads)
    report.save(stage / "rates.csv")
    return {"truth_max_frequency": config.resolved_truth_frequency()}


def _fmt_number(x: float) -> str:
    x = 0.0 if x == 0 else float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssanova-deriv",
                                 description="SS-ANOVA regression with partial-derivative data.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in [("simulate", "draw a truth and a noisy dataset"),
                       ("fit-lattice", "closed-form spectral fit on a regular lattice"),
                       ("fit-kernel", "representer-theorem fit on arbitrary designs"),
                       ("rates", "run a convergence-rate experiment")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="path to the TOML config file")
        p.add_argument("--out", required=True, help="output directory (created or replaced)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads, a count (default: 1)")
    p = sub.add_parser("exponent", help="print the dominant theoretical rate term")
    p.add_argument("--m", type=float, required=True,
                   help="smoothness order, dimensionless, must exceed 1.5 (default: none, required)")
    p.add_argument("--d", type=int, required=True, help="input dimension, a count (default: none, required)")
    p.add_argument("--r", type=int, required=True,
                   help="interaction order, a count (default: none, required)")
    p.add_argument("--p", type=int, required=True,
                   help="number of derivative channels, a count (default: none, required)")
    p.add_argument("--target", default="function",
                   choices=["function", "first_partial", "mixed_partial"],
                   help="estimation target (default: function)")
    return ap


RUNNERS = {"simulate": run_simulate, "fit-lattice": run_fit_lattice,
           "fit-kernel": run_fit_kernel, "rates": run_rates}


def dispatch(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "exponent":
            rate = theoretical_exponent(args.m, args.d, args.r, args.p, args.target)
            print(f"{_fmt_number(rate.exponent)} {_fmt_number(rate.log_power)}")
            return 0
        if args.threads < 1:
            raise InputError(f"--threads must be >= 1, got {args.threads}")
        cfg_path = Path(args.config)
        cfg = parse_config(cfg_path, args.command)
        _execute(args, cfg, cfg_path.resolve().parent)
        return 0
    except InputError as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        return 1
    except DegenerateSystemError as exc:
        print(f"error: numerical degeneracy: {_one_line(exc)}", file=sys.stderr)
        return 2


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


def _execute(args, cfg, base: Path) -> None:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        runner = RUNNERS[args.command]
        if args.command in ("fit-lattice", "fit-kernel"):
            extra = runner(cfg, stage, args.threads, base)
        else:
            extra = runner(cfg, stage, args.threads)
        (stage / "manifest.txt").write_text(_manifest(args.command, cfg, extra))
        if out.exists():
            shutil.rmtree(out)
        os.replace(stage, out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise


def main(argv: list[str] | None = None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
