"""Command line front end: one subcommand per experiment.

Curves are written as CSV, scalar reports as JSON.  Every artifact starts with
its metadata (version, subcommand, effective parameters, seed); nothing in it
depends on the clock, the host or the thread count, so reruns are
byte-identical.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from .core import BudgetExceeded, DomainError, LatticePmf, format_float
from .criticality import (
    ProgenySpec,
    bdrift_log_residual,
    bdrift_residual,
    check_aidekon,
    cumulants,
    r_infinity,
    reduce_to_critical,
    solve_bdrift,
    solve_critical_gamma,
    tilt_identities,
)
from .exact import evolve, evolve_levels, expected_max, fixed_point_supercritical, joint_evolve, median
from .gumbel import bernoulli_kappa_beta, classify, solve_gamma_star, verify_bound
from .helix import cyclic_distance_curve, find_limit_point
from .mc import dkw_band, simulate_brw, simulate_gw_restart

EXIT_VALIDATION = 2
EXIT_OUTPUT = 3
EXIT_BUDGET = 4

CONFIG_SECTION = "experiment"
# parameters that may change how fast a run is but never what it produces
NOT_ECHOED = {"workers"}


class OutputError(OSError):
    """An artifact path cannot be written."""


# -- parameter parsing --------------------------------------------------------


def _int(key, raw, lo=None, hi=None):
    try:
        v = int(str(raw).strip())
    except ValueError:
        raise DomainError(f"invalid value for {key}: {raw!r} is not an integer") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        bounds = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        raise DomainError(f"invalid value for {key}: {v} must lie in {bounds}")
    return v


def _float(key, raw):
    try:
        v = float(str(raw).strip())
    except ValueError:
        raise DomainError(f"invalid value for {key}: {raw!r} is not a number") from None
    if not math.isfinite(v):
        raise DomainError(f"invalid value for {key}: {raw!r} is not finite")
    return v


def _list(key, raw, conv):
    parts = [s for s in str(raw).replace(" ", "").split(",") if s]
    if not parts:
        raise DomainError(f"invalid value for {key}: empty list")
    return [conv(key, s) for s in parts]


def _probability(key, raw):
    v = _float(key, raw)
    if not 0.0 < v < 1.0:
        raise DomainError(f"invalid value for {key}: {v} must lie in (0, 1)")
    return v


def _levels(key, raw):
    levels = _list(key, raw, lambda k, s: _int(k, s, lo=1))
    if levels != sorted(set(levels)):
        raise DomainError(f"invalid value for {key}: levels must be strictly ascending")
    return levels


def _interval(key, raw):
    bounds = _list(key, raw, _float)
    if len(bounds) != 2 or bounds[0] >= bounds[1]:
        raise DomainError(f"invalid value for {key}: expected 'lo,hi' with lo < hi")
    return bounds


def _format(key, raw):
    v = str(raw).strip().lower()
    if v not in ("csv", "json"):
        raise DomainError(f"invalid value for {key}: {raw!r} (choose csv or json)")
    return v


PARSERS: dict[str, Callable] = {
    "n": lambda k, r: _int(k, r, lo=0),
    "p": _probability,
    "a": _probability,
    "levels": _levels,
    "k_max": lambda k, r: _int(k, r, lo=2),
    "replicas": lambda k, r: _int(k, r, lo=1),
    "seed": lambda k, r: _int(k, r, lo=0, hi=2**64 - 1),
    "interval": _interval,
    "count": lambda k, r: _int(k, r, lo=1),
    "workers": lambda k, r: _int(k, r, lo=1),
    "support": lambda k, r: _list(k, r, _float),
    "probs": lambda k, r: _list(k, r, _float),
    "out": lambda k, r: str(r),
    "format": _format,
}
CONFIG_KEYS = set(PARSERS) | {"subcommand"}


def load_config(path) -> dict[str, str]:
    """Read ``key = value`` lines (``#`` comments allowed) into raw strings.

    The file has no section header; keys are checked here, values are parsed
    together with the command-line flags so both give the same diagnostics.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{CONFIG_SECTION}]\n{text}", source=str(path))
    except configparser.Error as exc:
        first = str(exc).splitlines()[0]
        raise DomainError(f"cannot parse config {path}: {first}") from None
    out = {}
    for key, val in parser[CONFIG_SECTION].items():
        norm = key.strip().replace("-", "_")
        if norm not in CONFIG_KEYS:
            raise DomainError(f"unknown config key {key!r} in {path}")
        out[norm] = val.strip()
    return out


# -- artifacts ------------------------------------------------------------------


@dataclass
class Table:
    columns: list
    rows: list
    extra: dict = field(default_factory=dict)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format_float(v)


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats spelled out."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


def render(name: str, params: dict, result, fmt: str) -> str:
    meta = {
        "version": __version__,
        "subcommand": name,
        "params": {k: v for k, v in params.items() if k not in NOT_ECHOED},
        "seed": params.get("seed"),
    }
    if fmt == "json":
        body = result if isinstance(result, dict) else {
            "columns": result.columns,
            "rows": result.rows,
            **result.extra,
        }
        return json.dumps(_clean({"metadata": meta, "result": body}), sort_keys=True, indent=2) + "\n"
    lines = [
        f"# version={__version__}",
        f"# subcommand={name}",
        f"# params={_dumps(meta['params'])}",
        f"# seed={'none' if meta['seed'] is None else meta['seed']}",
    ]
    lines += [f"# {k}={v if isinstance(v, str) else _dumps(v)}" for k, v in result.extra.items()]
    lines.append(",".join(result.columns))
    lines += [",".join(_cell(v) for v in row) for row in result.rows]
    return "\n".join(lines) + "\n"


def _check_writable(out: str | None) -> None:
    if out is None or out == "-":
        return
    path = Path(out)
    parent = path.parent if str(path.parent) else Path(".")
    if path.is_dir():
        raise OutputError(f"cannot write {out}: is a directory")
    if not parent.is_dir():
        raise OutputError(f"cannot write {out}: directory {parent} does not exist")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise OutputError(f"cannot write {out}: permission denied")


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc.strerror}") from None


# -- experiments ------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    name: str
    keys: tuple  # parameters the experiment takes
    defaults: dict  # raw defaults; None marks an optional parameter
    formats: tuple
    fn: Callable
    summary: str


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(name, keys, defaults=None, formats=("csv", "json")):
    def deco(fn):
        EXPERIMENTS[name] = Experiment(name, tuple(keys), defaults or {}, formats, fn, (fn.__doc__ or "").strip())
        return fn

    return deco


def _progeny(p, support, probs) -> ProgenySpec:
    if support is None and probs is None:
        if p is None:
            raise DomainError("missing required parameter p (or support and probs)")
        return ProgenySpec.bernoulli_pm1(p)
    if support is None or probs is None:
        raise DomainError("support and probs must be given together")
    return ProgenySpec(2, tuple(support), tuple(probs))


def _lattice_step(p, support, probs) -> LatticePmf:
    if support is None and probs is None:
        if p is None:
            raise DomainError("missing required parameter p (or support and probs)")
        return LatticePmf.bernoulli01(p)
    if support is None or probs is None:
        raise DomainError("support and probs must be given together")
    if any(s != int(s) for s in support):
        raise DomainError("invalid value for support: lattice steps must be integers")
    return LatticePmf(tuple(int(s) for s in support), tuple(probs))


@experiment("evolve", ["n", "p"], {"p": "0.5"})
def run_evolve(n, p):
    """Exact tail F_n(x) = P(M'_n >= x) of the +-1 walk."""
    F = evolve(n, p)
    rows = [(x, v) for x, v in enumerate(F.values, start=1)]
    return Table(["x", "F"], rows, {"n": str(n), "p": format_float(p), "median": str(median(F)), "expected_max": format_float(expected_max(F))})


@experiment("cyclic", ["levels", "p"], {"p": "0.5"})
def run_cyclic(levels, p):
    """Distance of F_n to its median-pinned helix element at each level."""
    pts = cyclic_distance_curve(levels, p)
    return Table(["n", "k_n", "d_n", "delta_n"], [(c.n, c.k_n, c.d_n, c.delta_n) for c in pts])


@experiment("limit-point", ["a", "count"], {"count": "3"}, formats=("json",))
def run_limit_point(a, count):
    """Levels n_k along which the shifted tails approach the helix element F^a."""
    return find_limit_point(a, count=count).as_json()


@experiment("fixed-point", ["p", "n"], {"n": "50"})
def run_fixed_point(p, n):
    """Invariant tail of the supercritical walk (p > 1/2) on x = 1..n."""
    F = fixed_point_supercritical(p, max(n, 1))
    q = 1.0 - p
    rows = []
    prev = 1.0
    for x, v in enumerate(F.values, start=1):
        rows.append((x, v, abs(v - (p * v + q * prev) ** 2)))
        prev = v
    return Table(["x", "F", "residual"], rows, {"p": format_float(p), "f1_closed_form": format_float((q / p) ** 2)})


@experiment("drift", ["p", "n"], {"n": "4000"}, formats=("json",))
def run_drift(p, n):
    """Speed of the maximum for p < 1/2, cross-checked against the exact DP slope."""
    d = solve_bdrift(p)
    if n < 2 or n % 2:
        raise DomainError(f"invalid value for n: {n} must be an even level >= 2")
    half, full = evolve_levels([n // 2, n], p)
    slope = (expected_max(full) - expected_max(half)) / (n - n // 2)
    return {
        "p": p,
        "rho01": d.rho01,
        "speed_pm1": d.speed_pm1,
        "log_residual": bdrift_log_residual(d.rho01, p),
        "residual": bdrift_residual(d.rho01, p),
        "dp_levels": [n // 2, n],
        "dp_slope": slope,
        "dp_relative_gap": abs(slope / d.speed_pm1 - 1.0),
        "interpretation": "rho01 is the speed of the {0,1} walk; the +-1 maximum moves at 2*rho01-1",
    }


@experiment("critical", ["p", "support", "probs"], {"p": None, "support": None, "probs": None}, formats=("json",))
def run_critical(p, support, probs):
    """Tilt gamma with R(gamma) = 0 and the reduced (critical) displacement law."""
    spec = _progeny(p, support, probs)
    gamma = solve_critical_gamma(spec)
    c = cumulants(spec, gamma)
    red = reduce_to_critical(spec)
    total, drift = tilt_identities(red)
    return {
        "input": spec.as_json(),
        "gamma": gamma,
        "psi": c.psi,
        "dpsi": c.dpsi,
        "r_at_gamma": c.r,
        "r_infinity": r_infinity(spec),
        "reduced": red.as_json(),
        "e_sum_exp_v": total,
        "e_sum_v_exp_v": drift,
    }


@experiment("aidekon", ["p", "support", "probs"], {"p": None, "support": None, "probs": None}, formats=("json",))
def run_aidekon(p, support, probs):
    """Hypotheses of the non-lattice Gumbel theorem, checked on the reduced walk."""
    spec = _progeny(p, support, probs)
    red = reduce_to_critical(spec)
    return {"input": spec.as_json(), "reduced": red.as_json(), "checks": check_aidekon(red)}


@experiment("gumbel", ["p", "support", "probs", "n"], {"p": None, "support": None, "probs": None, "n": None}, formats=("json",))
def run_gumbel(p, support, probs, n):
    """Parameters gamma*, rho*, sigma of the Gumbel helix for a lattice step law."""
    step = _lattice_step(p, support, probs)
    scheme = classify(step)
    params = solve_gamma_star(scheme)
    out = {"step": {str(k): v for k, v in step.as_dict().items()}, "condition_class": scheme.condition_class, **params.as_json()}
    if n is not None:
        if n < 1:
            raise DomainError("invalid value for n: must be >= 1")
        out["n"] = n
        out["a_n"] = params.a_n(n)
    if step.support == (0, 1) and step.probs[1] < 0.5:
        kappa, beta = bernoulli_kappa_beta(step.probs[1])
        out["kappa"], out["beta"] = kappa, beta
    return out


@experiment("verify-bound", ["p", "support", "probs", "n", "interval"], {"p": None, "support": None, "probs": None, "interval": "-3,3"})
def run_verify_bound(p, support, probs, n, interval):
    """Exact law of the maximum of 2^n sums against its Gumbel asymptotics."""
    table = verify_bound(classify(_lattice_step(p, support, probs)), n, tuple(interval))
    cols = ["n", "z", "m", "exact_neglog", "asymptotic_neglog", "ratio"]
    bern = any(r.bernoulli_neglog is not None for r in table.rows)
    if bern:
        cols += ["bernoulli_neglog", "reconciliation"]
    rows = []
    for r in table.rows:
        row = [r.n, r.z, r.m, r.exact_neglog, r.asymptotic_neglog, r.ratio]
        if bern:
            row += [r.bernoulli_neglog, r.reconciliation]
        rows.append(row)
    extra = {**table.params.as_json(), "a_n": table.params.a_n(n), "max_abs_ratio_minus_1": table.max_deviation()}
    return Table(cols, rows, extra)


@experiment("simulate", ["n", "p", "replicas", "seed", "workers"], {"p": "0.5", "replicas": "10000", "seed": "0", "workers": "1"})
def run_simulate(n, p, replicas, seed, workers):
    """Monte Carlo of the branching walk: per-level max, argmax count, increments."""
    stats = simulate_brw(n, p, seed, replicas, workers=workers)
    cols = ["level", "mean_M", "mean_K", "p_K_le_4", "mean_increment"]
    rows = [[r[c] for c in cols] for r in stats.per_level()]
    meta = stats.metadata()
    extra = {
        "replicas": meta["replicas"],
        "seed_derivation": meta["seed_derivation"],
        "sampler_crossover_events": meta["sampler_crossover_events"],
    }
    return Table(cols, rows, extra)


@experiment("gw", ["n", "replicas", "seed"], {"replicas": "10000", "seed": "0"})
def run_gw(n, replicas, seed):
    """Critical Galton-Watson chain restarted at 1: empirical law of Z_n."""
    res = simulate_gw_restart(n, replicas, seed)
    rows = sorted(res.pmf().items())
    return Table(["z", "prob"], rows, {"replicas": replicas, "dkw_half_width": dkw_band(replicas)})


@experiment("joint", ["n", "p", "k_max"], {"p": "0.5", "k_max": "64"}, formats=("json",))
def run_joint(n, p, k_max):
    """Exact joint law of (M'_n, min(K_n, k_max)) and the mean increment of the max."""
    rep = joint_evolve(n, p, k_max)
    out = rep.as_json()
    out["joint"] = {f"{y},{k}": v for (y, k), v in sorted(rep.joint.as_dict().items())}
    return out


def execute(exp: Experiment, flags: dict) -> None:
    config_path = flags.pop("config", None)
    cfg = load_config(config_path) if config_path else {}
    sub = cfg.pop("subcommand", None)
    if sub is not None and sub != exp.name:
        raise DomainError(f"config subcommand {sub!r} does not match {exp.name!r}")
    given = {k: v for k, v in flags.items() if v is not None}
    stray = sorted(set(given) - set(exp.keys) - {"out", "format"})
    if stray:
        raise DomainError(f"{exp.name} does not take --{stray[0].replace('_', '-')}")
    raw = {k: v for k, v in exp.defaults.items()}
    raw.update({k: v for k, v in cfg.items() if k in exp.keys or k in ("out", "format")})
    raw.update(given)
    params = {}
    for key in exp.keys:
        if key not in raw:
            raise DomainError(f"missing required parameter {key}")
        params[key] = None if raw[key] is None else PARSERS[key](key, raw[key])
    fmt = _format("format", raw.get("format", exp.formats[0]))
    if fmt not in exp.formats:
        raise DomainError(f"invalid value for format: {exp.name} writes {' or '.join(exp.formats)}")
    out = raw.get("out")
    _check_writable(out)
    result = exp.fn(**params)
    _write(out, render(exp.name, params, result, fmt))


# -- click wiring -----------------------------------------------------------------

FLAGS = [
    ("--n", "n", "Level / number of generations."),
    ("--p", "p", "Probability of an up step."),
    ("--a", "a", "Helix parameter in (0, 1)."),
    ("--levels", "levels", "Comma-separated ascending levels."),
    ("--k-max", "k_max", "Cap of the argmax count."),
    ("--replicas", "replicas", "Monte Carlo replicas."),
    ("--seed", "seed", "Master seed (0 .. 2**64-1)."),
    ("--interval", "interval", "z range 'lo,hi'."),
    ("--count", "count", "Number of subsequence entries."),
    ("--support", "support", "Comma-separated step values."),
    ("--probs", "probs", "Comma-separated step probabilities."),
    ("--workers", "workers", "Worker threads; never changes the output."),
    ("--out", "out", "Output path (stdout when omitted)."),
    ("--format", "format", "csv or json."),
    ("--config", "config", "key = value config file; flags win."),
]


def _make_command(exp: Experiment) -> click.Command:
    params = [click.Option([flag], name, default=None, type=str, help=help_) for flag, name, help_ in FLAGS]
    return click.Command(exp.name, params=params, callback=lambda **kw: execute(exp, kw), help=exp.summary)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="helixmax")
def cli():
    """Exact and simulated maxima of hierarchical Bernoulli summation schemes."""


for _exp in EXPERIMENTS.values():
    cli.add_command(_make_command(_exp))


def _config_subcommand(argv: list) -> list:
    """Prepend ``subcommand`` from the config when the command line has none."""
    if not argv or argv[0] in EXPERIMENTS or not argv[0].startswith("--config"):
        return argv
    if argv[0] == "--config" and len(argv) > 1:
        path = argv[1]
    elif argv[0].startswith("--config="):
        path = argv[0].split("=", 1)[1]
    else:
        return argv
    sub = load_config(path).get("subcommand")
    if sub is None:
        raise DomainError(f"config {path} names no subcommand")
    if sub not in EXPERIMENTS:
        raise DomainError(f"invalid value for subcommand: {sub!r}")
    return [sub] + argv


def _fail(code: int, message: str) -> int:
    click.echo(f"helixmax: error: {' '.join(message.split())}", err=True)
    return code


def run(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _config_subcommand(argv)
        cli.main(args=argv, prog_name="helixmax", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        return _fail(EXIT_VALIDATION, exc.format_message())
    except click.Abort:
        return _fail(1, "aborted")
    except OutputError as exc:
        return _fail(EXIT_OUTPUT, str(exc))
    except BudgetExceeded as exc:
        return _fail(EXIT_BUDGET, str(exc))
    except DomainError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    return 0


def main() -> None:
    sys.exit(run())
