"""Command line front end.

Subcommands map one-to-one onto the library surface: `lambda` (optimal
ratio root), `boundary` (free-boundary tables), `value` (closed form vs
quadrature), `distribution` (stopped-state law), `simulate` (Monte Carlo
estimates and the statistical check suite), `cev` (drawdown sweeps on the
price side), `fib` (Fibonacci retracement levels).

Conventions: output goes to stdout, or atomically to --out (temp file in
the target directory, then rename); reruns with equal arguments produce
byte-identical output (fixed column order, no timestamps, reals printed
with 17 significant digits and a "." decimal point).  Exit codes: 0 ok,
2 invalid arguments or domain errors, 3 numerical failures, 4 statistical
check failures.  Every option can also be set through environment
variables with the GOLDENSTOP_ prefix (e.g. GOLDENSTOP_SIMULATE_STEP).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Optional

import click

from .bessel import (
    bessel_characteristic,
    bessel_lambda,
    bessel_value,
    make_stopped_distribution,
    stopped_mean,
    stopped_quantile,
)
from .boundary import (
    boundary_from_csv,
    line_boundary,
    minimal_boundary,
    value_function_numeric,
)
from .cev import (
    CevModel,
    cev_inverse_transform,
    cev_rule_threshold,
    fibonacci_levels,
    retracement_fraction,
)
from .checks import run_checks
from .diffusion import make_bessel_model
from .errors import CheckFailure, DomainError, NumericalError
from .simulate import StoppingRule, compare_rules

__all__ = ["RunConfig", "dispatch", "main"]


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs; `extra` holds per-command fields."""

    command: str
    d: float = 3.0
    c_sigma: float = 1.0
    step: float = 1e-4
    horizon: float = 50.0
    n_paths: int = 50_000
    seed: int = 42
    grid: int = 129
    fmt: str = "csv"
    out: Optional[str] = None
    threads: int = 1
    extra: Mapping = field(default_factory=dict)


_G = "%.17g"


def _g(v) -> str:
    return _G % float(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_output(config: RunConfig, text: str) -> None:
    if config.out is None:
        click.echo(text, nl=False)
        return
    target = os.path.abspath(config.out)
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(target), prefix=".goldenstop-", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dispatch(config: RunConfig) -> int:
    """Run one command, write its output, map exceptions to exit codes."""
    try:
        builder = _COMMANDS[config.command]
    except KeyError:
        click.echo(f"error: unknown command {config.command!r}", err=True)
        return 2
    try:
        text, code = builder(config)
    except (DomainError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (NumericalError, RuntimeError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    try:
        _write_output(config, text)
    except OSError as exc:
        click.echo(f"error: cannot write output: {exc}", err=True)
        return 2
    return code


# ---------------------------------------------------------------------------
# command bodies (pure: config in, (text, exit_code) out)


def _cmd_lambda(config: RunConfig):
    lam = bessel_lambda(config.d)
    resid = abs(float(bessel_characteristic(config.d, lam)))
    if config.fmt == "json":
        text = _json_text({"d": config.d, "lambda": lam, "residual": resid})
    else:
        text = _csv_text(
            ["d", "lambda", "residual"], [[_g(config.d), _g(lam), _g(resid)]]
        )
    return text, 0


def _cmd_boundary(config: RunConfig):
    model = make_bessel_model(config.d)
    i_min = config.extra["i_min"]
    i_max = config.extra["i_max"]
    if config.extra["ray"]:
        b = line_boundary(model, bessel_lambda(config.d), i_min, i_max, config.grid)
    else:
        shots = config.extra["shots"]
        starts = [i_min * 10.0**-k for k in range(1, shots + 1)]
        b = minimal_boundary(
            model, i_min, i_max, n_grid=config.grid, shot_starts=starts
        )
    rows = [
        [_g(i), _g(f), _g(h), _g(f / i)]
        for i, f, h in zip(b.i_grid, b.f_grid, b.h_grid)
    ]
    if config.fmt == "json":
        text = _json_text(
            {
                "provenance": b.provenance,
                "rows": [
                    {"i": i, "f": f, "h": h, "f_over_i": f / i}
                    for i, f, h in zip(b.i_grid, b.f_grid, b.h_grid)
                ],
            }
        )
    else:
        text = _csv_text(["i", "f", "h", "f_over_i"], rows)
    return text, 0


def _cmd_value(config: RunConfig):
    lam = config.extra["lam"]
    if lam is None:
        lam = bessel_lambda(config.d)
    i, x = config.extra["i"], config.extra["x"]
    closed = bessel_value(config.d, lam, i, x)
    model = make_bessel_model(config.d)
    lo = min(i, x) / 4.0
    hi = max(i, x) * 4.0
    b = line_boundary(model, lam, lo, hi, 33)
    numeric = value_function_numeric(model, b, i, x)
    diff = abs(closed - numeric)
    if config.fmt == "json":
        text = _json_text(
            {
                "d": config.d,
                "lam": lam,
                "i": i,
                "x": x,
                "value_closed": closed,
                "value_quadrature": numeric,
                "abs_diff": diff,
            }
        )
    else:
        text = _csv_text(
            ["d", "lam", "i", "x", "value_closed", "value_quadrature", "abs_diff"],
            [[_g(config.d), _g(lam), _g(i), _g(x), _g(closed), _g(numeric), _g(diff)]],
        )
    return text, 0


def _cmd_distribution(config: RunConfig):
    lam = config.extra["lam"]
    if lam is None:
        lam = bessel_lambda(config.d)
    x0 = config.extra["x0"]
    dist = make_stopped_distribution(config.d, lam, x0)
    qs = [k / 20.0 for k in range(1, 20)]
    quantiles = {f"{q:.2f}": stopped_quantile(dist, q) for q in qs}
    if config.fmt == "json":
        text = _json_text(
            {
                "d": config.d,
                "lam": lam,
                "x0": x0,
                "exponent": dist.p,
                "mean": stopped_mean(dist),
                "upper_support": lam * x0,
                "quantiles": quantiles,
            }
        )
    else:
        rows = [
            ["exponent", _g(dist.p)],
            ["mean", _g(stopped_mean(dist))],
            ["upper_support", _g(lam * x0)],
        ]
        rows += [[f"q{k}", _g(quantiles[k])] for k in sorted(quantiles)]
        text = _csv_text(["name", "value"], rows)
    return text, 0


def _parse_rule(text: str, model) -> StoppingRule:
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    arg = arg.strip()
    if kind == "ratio":
        lam = float(arg) if arg else bessel_lambda(model.dim)
        return StoppingRule.ratio_rule(lam)
    if kind == "drawdown":
        if arg:
            kappa = float(arg)
        else:
            kappa = bessel_lambda(model.dim) ** (model.dim - 2.0)
        return StoppingRule.drawdown_rule(kappa)
    if kind in ("fixed", "fixed_time", "time"):
        return StoppingRule.fixed_time_rule(float(arg))
    if kind == "boundary":
        if not arg:
            raise DomainError("boundary rule needs a CSV path: boundary:FILE")
        return StoppingRule.boundary_rule(boundary_from_csv(arg, model=model))
    raise DomainError(
        f"cannot parse rule {text!r}; expected ratio[:LAM], drawdown[:KAPPA], "
        "fixed:T or boundary:FILE"
    )


def _check_table(config: RunConfig, results):
    failed = any(not r.passed for r in results)
    if config.fmt == "json":
        text = _json_text({"checks": [r.row() for r in results], "passed": not failed})
    else:
        rows = [
            [r.name, _g(r.value), _g(r.tolerance), "true" if r.passed else "false"]
            for r in results
        ]
        text = _csv_text(["name", "value", "tolerance", "passed"], rows)
    return text, 4 if failed else 0


def _cmd_simulate(config: RunConfig):
    ex = config.extra
    if ex["check"]:
        results = run_checks(
            groups=ex["check_groups"] or None,
            n_paths=ex["n_paths_opt"],
            seed=config.seed,
            step=ex["step_opt"],
        )
        return _check_table(config, results)
    model = make_bessel_model(config.d)
    rule_texts = ex["rules"] or ("ratio",)
    rules = [_parse_rule(t, model) for t in rule_texts]
    cmp = compare_rules(
        model,
        ex["x0"],
        rules,
        n_paths=config.n_paths,
        seed=config.seed,
        step=config.step,
        horizon=config.horizon,
        scheme=ex["scheme"],
        bridge=ex["bridge"],
    )
    if config.fmt == "json":
        text = _json_text({"estimates": [e.to_dict() for e in cmp.estimates]})
    else:
        rows = [
            [e.rule_id, _g(e.mean), _g(e.std_error), str(e.n_paths), str(e.seed), _g(e.step)]
            for e in cmp.estimates
        ]
        text = _csv_text(
            ["rule_id", "mean", "std_error", "n_paths", "seed", "step"], rows
        )
    return text, 0


def _cmd_cev(config: RunConfig):
    ex = config.extra
    cev = CevModel(config.d, config.c_sigma)
    z0 = ex["z0"]
    kappas = list(ex["kappas"]) or [2.0, cev_rule_threshold(cev), 4.0]
    model = make_bessel_model(config.d)
    x0 = cev_inverse_transform(cev, z0)
    rules = [StoppingRule.drawdown_rule(k) for k in kappas]
    cmp = compare_rules(
        model,
        x0,
        rules,
        n_paths=config.n_paths,
        seed=config.seed,
        step=config.step,
        horizon=config.horizon,
        scheme=ex["scheme"],
        bridge=ex["bridge"],
    )
    if config.fmt == "json":
        text = _json_text(
            {
                "d": config.d,
                "c_sigma": config.c_sigma,
                "z0": z0,
                "x0": x0,
                "threshold": cev_rule_threshold(cev),
                "retracement": retracement_fraction(),
                "estimates": [
                    dict(kappa=k, **e.to_dict())
                    for k, e in zip(kappas, cmp.estimates)
                ],
            }
        )
    else:
        rows = [
            [_g(k), _g(e.mean), _g(e.std_error)]
            for k, e in zip(kappas, cmp.estimates)
        ]
        text = _csv_text(["kappa", "mean", "std_error"], rows)
    return text, 0


def _cmd_fib(config: RunConfig):
    n = config.extra["n"]
    levels = fibonacci_levels(n)
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    if config.fmt == "json":
        text = _json_text(
            {
                "n": n,
                "shallow": levels.shallow,
                "moderate": levels.moderate,
                "golden": levels.golden,
                "limits": {
                    "shallow": phi**-3,
                    "moderate": phi**-2,
                    "golden": phi**-1,
                },
                "retracement": retracement_fraction(),
            }
        )
    else:
        rows = [
            ["n", str(n)],
            ["shallow", _g(levels.shallow)],
            ["moderate", _g(levels.moderate)],
            ["golden", _g(levels.golden)],
            ["shallow_limit", _g(phi**-3)],
            ["moderate_limit", _g(phi**-2)],
            ["golden_limit", _g(phi**-1)],
            ["retracement", _g(retracement_fraction())],
        ]
        text = _csv_text(["name", "value"], rows)
    return text, 0


_COMMANDS = {
    "lambda": _cmd_lambda,
    "boundary": _cmd_boundary,
    "value": _cmd_value,
    "distribution": _cmd_distribution,
    "simulate": _cmd_simulate,
    "cev": _cmd_cev,
    "fib": _cmd_fib,
}


# ---------------------------------------------------------------------------
# click wiring


@click.group(
    context_settings={
        "auto_envvar_prefix": "GOLDENSTOP",
        "help_option_names": ["-h", "--help"],
    }
)
@click.option("--seed", type=int, default=42, show_default=True,
              help="Base RNG seed (dimensionless integer).")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Accepted for interface stability; runs are single-process "
                   "and deterministic regardless of this value.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Write output atomically to this file instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True, help="Output format.")
@click.pass_context
def main(ctx, seed, threads, out, fmt):
    """Golden-ratio stopping toolkit: roots, boundaries, values, simulation."""
    ctx.obj = {"seed": seed, "threads": threads, "out": out, "fmt": fmt}


def _config(ctx, command: str, **kwargs) -> RunConfig:
    base = ctx.obj
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    main_kwargs = {k: v for k, v in kwargs.items() if k in fields}
    extra = {k: v for k, v in kwargs.items() if k not in fields}
    return RunConfig(
        command=command,
        seed=base["seed"],
        threads=base["threads"],
        out=base["out"],
        fmt=base["fmt"],
        extra=extra,
        **main_kwargs,
    )


_dim_option = click.option(
    "--dim", "-d", type=float, default=3.0, show_default=True,
    help="Bessel dimension d > 2 (dimensionless).",
)


@main.command("lambda")
@_dim_option
@click.pass_context
def lambda_cmd(ctx, dim):
    """Optimal stop-ratio threshold and its characteristic residual."""
    ctx.exit(dispatch(_config(ctx, "lambda", d=dim)))


@main.command("boundary")
@_dim_option
@click.option("--i-min", type=float, default=0.5, show_default=True,
              help="Lower end of the running-minimum grid (state units).")
@click.option("--i-max", type=float, default=2.0, show_default=True,
              help="Upper end of the running-minimum grid (state units).")
@click.option("--grid", type=click.IntRange(min=16), default=129, show_default=True,
              help="Number of grid nodes.")
@click.option("--shots", type=click.IntRange(min=1, max=12), default=6,
              show_default=True,
              help="Number of progressively deeper shooting starts.")
@click.option("--ray", is_flag=True, default=False,
              help="Use the closed-form straight-ray boundary instead of shooting.")
@click.pass_context
def boundary_cmd(ctx, dim, i_min, i_max, grid, shots, ray):
    """Stopping boundary table: columns i, f, h and the ratio f/i."""
    ctx.exit(dispatch(_config(
        ctx, "boundary", d=dim, grid=grid,
        i_min=i_min, i_max=i_max, shots=shots, ray=ray,
    )))


@main.command("value")
@_dim_option
@click.option("--lam", type=float, default=None,
              help="Stop-ratio threshold (> 1); defaults to the optimal root.")
@click.option("--i", "i_", type=float, default=1.0, show_default=True,
              help="Running minimum (state units).")
@click.option("--x", "x_", type=float, default=1.0, show_default=True,
              help="Current state (state units, x >= i).")
@click.pass_context
def value_cmd(ctx, dim, lam, i_, x_):
    """Expected-loss value at (i, x): closed form and quadrature side by side."""
    ctx.exit(dispatch(_config(ctx, "value", d=dim, lam=lam, i=i_, x=x_)))


@main.command("distribution")
@_dim_option
@click.option("--lam", type=float, default=None,
              help="Stop-ratio threshold (> 1); defaults to the optimal root.")
@click.option("--x0", type=float, default=1.0, show_default=True,
              help="Starting state (state units).")
@click.pass_context
def distribution_cmd(ctx, dim, lam, x0):
    """Law of the stopped state: exponent, mean, quantiles."""
    ctx.exit(dispatch(_config(ctx, "distribution", d=dim, lam=lam, x0=x0)))


@main.command("simulate")
@_dim_option
@click.option("--x0", type=float, default=1.0, show_default=True,
              help="Starting state (state units).")
@click.option("--rule", "rules", multiple=True,
              help="Stopping rule, repeatable: ratio[:LAM], drawdown[:KAPPA], "
                   "fixed:T (time units) or boundary:FILE (CSV). "
                   "Default: ratio at the optimal threshold.")
@click.option("--n-paths", type=click.IntRange(min=1), default=None,
              help="Monte Carlo sample size.  [default: 50000]")
@click.option("--step", type=float, default=None,
              help="Time step of the scheme (time units).  [default: 0.0001]")
@click.option("--horizon", type=float, default=50.0, show_default=True,
              help="Hard simulation horizon (time units).")
@click.option("--scheme", type=click.Choice(["euler", "exact"]), default="euler",
              show_default=True, help="Path discretisation scheme.")
@click.option("--bridge/--no-bridge", default=True, show_default=True,
              help="Sample sub-step minima from the diffusion bridge.")
@click.option("--check", is_flag=True, default=False,
              help="Run the statistical certification suite instead of a plain "
                   "estimate; exit code 4 if any check fails.")
@click.option("--checks", "check_groups", multiple=True,
              help="Restrict --check to named groups (golden-rule, future-min, "
                   "cev); repeatable.")
@click.pass_context
def simulate_cmd(ctx, dim, x0, rules, n_paths, step, horizon, scheme, bridge,
                 check, check_groups):
    """Monte Carlo objective estimates, or the statistical check suite."""
    ctx.exit(dispatch(_config(
        ctx, "simulate", d=dim, horizon=horizon,
        n_paths=n_paths if n_paths is not None else 50_000,
        step=step if step is not None else 1e-4,
        x0=x0, rules=rules, scheme=scheme, bridge=bridge,
        check=check, check_groups=check_groups,
        n_paths_opt=n_paths, step_opt=step,
    )))


@main.command("cev")
@_dim_option
@click.option("--c-sigma", type=float, default=1.0, show_default=True,
              help="Price-map constant c_sigma > 0 (price units).")
@click.option("--z0", type=float, default=1.0, show_default=True,
              help="Starting price (price units).")
@click.option("--kappa", "kappas", type=float, multiple=True,
              help="Drawdown threshold S/Z > 1, repeatable.  Default sweep: "
                   "2.0, the optimal threshold, 4.0.")
@click.option("--n-paths", type=click.IntRange(min=1), default=50_000,
              show_default=True, help="Monte Carlo sample size.")
@click.option("--step", type=float, default=1e-4, show_default=True,
              help="Time step of the scheme (time units).")
@click.option("--horizon", type=float, default=50.0, show_default=True,
              help="Hard simulation horizon (time units).")
@click.option("--scheme", type=click.Choice(["euler", "exact"]), default="euler",
              show_default=True, help="Path discretisation scheme.")
@click.option("--bridge/--no-bridge", default=True, show_default=True,
              help="Sample sub-step minima from the diffusion bridge.")
@click.pass_context
def cev_cmd(ctx, dim, c_sigma, z0, kappas, n_paths, step, horizon, scheme, bridge):
    """Objective sweep over drawdown thresholds on the price side."""
    ctx.exit(dispatch(_config(
        ctx, "cev", d=dim, c_sigma=c_sigma, n_paths=n_paths, step=step,
        horizon=horizon, z0=z0, kappas=kappas, scheme=scheme, bridge=bridge,
    )))


@main.command("fib")
@click.option("--n", type=click.IntRange(min=2), default=12, show_default=True,
              help="Fibonacci index (ratios use F_n against F_{n+1..3}).")
@click.pass_context
def fib_cmd(ctx, n):
    """Fibonacci retracement levels and their golden-ratio limits."""
    ctx.exit(dispatch(_config(ctx, "fib", n=n)))


if __name__ == "__main__":
    main()
