"""Command-line interface: ``nanomoments sample|moments|scan|decompose|verify``.

Exit status is 0 on success, 1 when a verification check fails and 2 for
usage or validity errors.  Numbers are written with 17 significant digits so
that every binary64 value survives a round trip through the text files.
"""

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .ensembles import BACKENDS, EnsembleSpec, Family, check_backend, sample as draw_sample
from .experiments import (DEFAULT_SAMPLES, ExperimentConfig, ExperimentError, run_decomposition_study, run_moment,
                          run_scan)
from .numkernel import RngStream
from .numkernel.rng import MASK64

CSV_COLUMNS = ("ensemble", "N", "a", "K", "samples", "estimate", "stderr", "prediction", "ratio", "max_share",
               "seed", "backend")
DECOMPOSE_COLUMNS = ("mean_M_K", "mean_E_K", "ratio_M_over_full", "ratio_E_over_M", "c_used", "window_histogram")
CONFIG_KEYS = ("ensemble", "n", "a", "k", "samples", "seed", "workers", "backend", "cutoff")
SEED_ENV = "RMT_SEED"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class ConfigError(UsageError):
    pass


def fmt(x):
    """17-significant-digit text for floats; integers and strings as they are."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text, source="<config>"):
    """Parse ``key=value`` lines into a raw dict; ``a`` may hold a comma-separated list."""
    raw = {}
    unknown = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {stripped!r}")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key not in CONFIG_KEYS:
            unknown.append(key)
            continue
        try:
            raw[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    if unknown:
        raise ConfigError(f"{source}: unknown config keys: {', '.join(unknown)}")
    return raw


def _coerce(key, value):
    if key == "ensemble":
        return Family.parse(value).value
    if key == "backend":
        if value not in BACKENDS:
            raise ValueError(f"expected one of {', '.join(BACKENDS)}")
        return value
    if key == "a":
        return [float(v) for v in value.split(",") if v.strip()]
    if key in ("n", "samples", "seed", "workers"):
        return int(value)
    return float(value)


def build_config(raw):
    """An :class:`ExperimentConfig` from a raw key dict (validity errors propagate)."""
    missing = [k for k in ("ensemble", "n", "a", "k") if raw.get(k) is None]
    if missing:
        raise ConfigError(f"missing required settings: {', '.join(missing)}")
    family = Family.parse(raw["ensemble"])
    samples = raw.get("samples")
    if samples is None:
        samples = DEFAULT_SAMPLES[family]
    seed = raw.get("seed")
    if seed is None:
        seed = default_seed()
    return ExperimentConfig(
        ensemble=EnsembleSpec(family, int(raw["n"])),
        a_list=tuple(raw["a"]),
        k=raw["k"],
        samples=samples,
        seed=seed,
        workers=raw.get("workers") or 1,
        backend=raw.get("backend"),
        cutoff_override=raw.get("cutoff"),
    )


def load_config(path, overrides=None):
    """Read a ``key=value`` file; entries of ``overrides`` that are not None take precedence."""
    with open(path, encoding="utf-8") as fh:
        raw = parse_config_text(fh.read(), source=str(path))
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return build_config(raw)


def default_seed():
    value = os.environ.get(SEED_ENV)
    if value is None or not value.strip():
        return 0
    try:
        seed = int(value)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {value!r}") from None
    if not 0 <= seed <= MASK64:
        raise UsageError(f"{SEED_ENV} must be a 64-bit unsigned integer")
    return seed


def config_echo(cfg):
    return {
        "ensemble": cfg.family.value,
        "n": cfg.n,
        "a": list(cfg.a_list),
        "k": cfg.k,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "backend": cfg.backend,
        "cutoff": cfg.cutoff_override,
    }


# ---------------------------------------------------------------------------
# output


def estimate_row(cfg, est):
    return {
        "ensemble": cfg.family.value,
        "N": cfg.n,
        "a": est.a,
        "K": cfg.k,
        "samples": cfg.samples,
        "estimate": est.mean,
        "stderr": est.stderr,
        "prediction": est.prediction.value,
        "ratio": est.ratio,
        "max_share": est.max_share,
        "seed": cfg.seed,
        "backend": cfg.backend,
    }


def write_csv(rows, columns, trailer=()):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    for line in trailer:
        buf.write(line + "\n")
    return buf.getvalue()


def run_record(command, cfg, rows, extra=None):
    rec = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "config": config_echo(cfg) if cfg is not None else None,
        "results": rows,
        "version": __version__,
        "seed": cfg.seed if cfg is not None else None,
    }
    if extra:
        rec.update(extra)
    return rec


def emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _jsonable(obj):
    """Replace non-finite floats (not representable in strict JSON) by null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# commands


def _config_from_args(args):
    over = {
        "ensemble": args.ensemble,
        "n": args.n,
        "a": args.a,
        "k": args.k,
        "samples": args.samples,
        "seed": args.seed,
        "workers": args.workers,
        "backend": args.backend,
        "cutoff": getattr(args, "cutoff", None),
    }
    if args.config:
        return load_config(args.config, over)
    return build_config(over)


def cmd_sample(args):
    family = Family.parse(args.ensemble)
    if args.n is None or args.n < 1:
        raise UsageError("--n must be a positive integer")
    if args.count < 1:
        raise UsageError("--count must be positive")
    seed = default_seed() if args.seed is None else args.seed
    spec = EnsembleSpec(family, args.n)
    backend = check_backend(family, args.backend)
    stream = RngStream.for_sample(seed, 0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i in range(args.count):
        s = draw_sample(spec, stream.reset_for_sample(seed, i), backend)
        w.writerow([i] + [fmt(float(t)) for t in s.angles])
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def _emit_estimates(args, cfg, ests, trailer=(), extra_json=None):
    rows = [estimate_row(cfg, e) for e in ests]
    if args.format == "json":
        emit(_json_text(run_record(args.command, cfg, rows, extra_json)), args.out)
    else:
        emit(write_csv(rows, CSV_COLUMNS, trailer), args.out)


def cmd_moments(args):
    cfg = _config_from_args(args)
    ests = run_moment(cfg)
    _emit_estimates(args, cfg, ests)
    return EXIT_OK


def cmd_scan(args):
    cfg = _config_from_args(args)
    res = run_scan(cfg)
    trend = "non-increasing" if res.non_increasing else "not-monotone"
    widened = ",".join(fmt(d) for d in res.widened_deviation)
    trailer = (f"# trend {trend} widened_deviation={widened}",)
    scan_cfg = ExperimentConfig(cfg.ensemble, tuple(e.a for e in res.estimates), cfg.k, cfg.samples, cfg.seed,
                                cfg.workers, cfg.backend, cfg.cutoff_override)
    _emit_estimates(args, scan_cfg, res.estimates, trailer,
                    {"trend": {"non_increasing": res.non_increasing, "widened_deviation": res.widened_deviation}})
    return EXIT_OK


def cmd_decompose(args):
    from .theory import MomentQuery, predict

    cfg = _config_from_args(args)
    reports = run_decomposition_study(cfg)
    rows = []
    for rep in reports:
        pred = predict(MomentQuery(cfg.family, cfg.n, rep.a, cfg.k)).value
        rows.append({
            "ensemble": cfg.family.value, "N": cfg.n, "a": rep.a, "K": cfg.k, "samples": cfg.samples,
            "estimate": rep.mean_full_K, "stderr": rep.stderr_full_K, "prediction": pred,
            "ratio": rep.mean_full_K / pred, "max_share": float("nan"), "seed": cfg.seed, "backend": cfg.backend,
            "mean_M_K": rep.mean_M_K, "mean_E_K": rep.mean_E_K, "ratio_M_over_full": rep.ratio_M_over_full,
            "ratio_E_over_M": rep.ratio_E_over_M, "c_used": rep.c_used,
            "window_histogram": ";".join(f"{m}:{fmt(f)}" for m, f in sorted(rep.window_histogram.items())),
        })
    if args.format == "json":
        emit(_json_text(run_record(args.command, cfg, rows)), args.out)
    else:
        emit(write_csv(rows, CSV_COLUMNS + DECOMPOSE_COLUMNS), args.out)
    return EXIT_OK


def cmd_verify(args):
    from .verification import DEFAULT_SEED, run_checks

    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, DEFAULT_SEED))
    stream = sys.stderr if args.format == "json" and args.out in (None, "-") else sys.stdout

    def report(res):
        print(res.line(), file=stream, flush=True)

    results = run_checks(quick=args.quick, seed=seed, report=report)
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=stream)
    if args.format == "json":
        rec = {
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "command": "verify",
            "config": {"quick": args.quick},
            "results": [r.to_dict() for r in results],
            "version": __version__,
            "seed": seed,
        }
        emit(_json_text(rec), args.out)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_experiment_flags(p, cutoff=False):
    p.add_argument("--config", help="key=value file; flags given here override it")
    p.add_argument("--ensemble", choices=[f.value for f in Family])
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=float, action="append", help="offset a (repeatable)")
    p.add_argument("--k", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, help=f"64-bit seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=int)
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default: stdout)")
    if cutoff:
        p.add_argument("--cutoff", type=float, help="window half-width c, overriding a^((K-1)/(2K))")


def build_parser():
    parser = _Parser(prog="nanomoments", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("sample", help="dump sampled eigenangles")
    p.add_argument("--ensemble", required=True, choices=[f.value for f in Family])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    for name, func, helptext in (("moments", cmd_moments, "estimate E|P'/P|^K"),
                                 ("scan", cmd_scan, "estimate over several a and test the trend"),
                                 ("decompose", cmd_decompose, "moments of the main term and error term")):
        p = sub.add_parser(name, help=helptext)
        _add_experiment_flags(p, cutoff=name == "decompose")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the self-checks")
    p.add_argument("--quick", action="store_true", help="fast subset (under a minute)")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"nanomoments: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"nanomoments: run aborted: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
