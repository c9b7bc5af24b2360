"""Statistical validation checks shared by the test suite and the CLI.

Each runner performs one Monte Carlo experiment and grades it against the
closed-form theory at a fixed tolerance, returning CheckResult rows.  The
same functions back `goldenstop simulate --check`, so a shipped binary
can re-certify itself on the target machine.

Grading conventions: `value` is the measured discrepancy or statistic,
`tolerance` the bound it must stay below, except for the sweep-optimality
check where `value` is a minimum z-score that must stay *above*
`tolerance` (the orientation is spelled out in `detail`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import ks_2samp, kstest

from .bessel import (
    bessel_lambda,
    bessel_value,
    make_stopped_distribution,
    stopped_cdf,
    stopped_mean,
)
from .cev import CevModel, direct_stopped_samples, transformed_stopped_samples
from .diffusion import make_bessel_model
from .errors import CheckFailure, DomainError
from .simulate import StoppingRule, estimate_future_min_prob, simulate_rules

__all__ = [
    "CheckResult",
    "golden_rule_checks",
    "golden_rule_star_checks",
    "golden_rule_sweep_checks",
    "future_min_checks",
    "cev_checks",
    "CHECK_GROUPS",
    "run_checks",
    "require_pass",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str

    def row(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


def golden_rule_star_checks(
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    bridge: bool = True,
) -> list:
    """d=3 rule at the golden threshold from x0=1: level and stopped law.

    One single-rule pass grades three rows:

    - objective-vs-prediction: the Monte Carlo objective within 3 SE plus
      a 1% discretisation allowance of the closed-form value;
    - stopped-law-ks: KS distance of the stopped sample to the power law
      at most 0.02;
    - stopped-mean: empirical mean of the stopped state within 1% of
      phi * x0.
    """
    d, x0 = 3.0, 1.0
    model = make_bessel_model(d)
    lam = bessel_lambda(d)
    res = simulate_rules(
        model, x0, [StoppingRule.ratio_rule(lam)], n_paths,
        seed=seed, step=step, horizon=horizon, bridge=bridge,
    )
    obj = res.objective[0]
    mean = float(obj.mean())
    se = float(obj.std(ddof=1)) / math.sqrt(n_paths)

    out = []
    target = bessel_value(d, lam, x0, x0)
    diff = abs(mean - target)
    tol = 3.0 * se + 0.01 * abs(target)
    out.append(
        CheckResult(
            name="objective-vs-prediction",
            value=diff,
            tolerance=tol,
            passed=diff <= tol,
            detail=(
                f"estimate {mean:.6f} (se {se:.2g}) vs "
                f"closed form {target:.6f}; |diff| <= 3 se + 1%"
            ),
        )
    )

    ok = ~res.truncated[0]
    sample = np.sort(res.x_stop[0, ok])
    dist = make_stopped_distribution(d, lam, x0)
    ks = float(kstest(sample, lambda y: stopped_cdf(dist, y)).statistic)
    out.append(
        CheckResult(
            name="stopped-law-ks",
            value=ks,
            tolerance=0.02,
            passed=ks <= 0.02,
            detail=f"KS of {sample.size} stopped states vs the exponent-{dist.p:.6f} power law",
        )
    )

    m_target = stopped_mean(dist)
    m_err = abs(float(sample.mean()) - m_target) / m_target
    out.append(
        CheckResult(
            name="stopped-mean",
            value=m_err,
            tolerance=0.01,
            passed=m_err <= 0.01,
            detail=f"relative error of mean stopped state vs phi*x0 = {m_target:.6f}",
        )
    )
    return out


def golden_rule_sweep_checks(
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    bridge: bool = True,
) -> list:
    """Paired optimality of the golden threshold within a ratio sweep.

    One common-random-numbers pass over {1.8, 2.1, 1+phi, 3.3, 4.0};
    every off-optimal ratio must lose to the golden one by at least 2
    paired standard errors (value = worst z-score, must exceed the
    tolerance).
    """
    d, x0 = 3.0, 1.0
    model = make_bessel_model(d)
    lam = bessel_lambda(d)
    sweep = [1.8, 2.1, lam, 3.3, 4.0]
    star = 2
    rules = [StoppingRule.ratio_rule(l) for l in sweep]
    res = simulate_rules(
        model, x0, rules, n_paths, seed=seed, step=step, horizon=horizon,
        bridge=bridge,
    )
    obj = res.objective
    zmin, worst = math.inf, ""
    for j, l in enumerate(sweep):
        if j == star:
            continue
        dvec = obj[j] - obj[star]
        dmean = float(dvec.mean())
        dse = float(dvec.std(ddof=1)) / math.sqrt(n_paths)
        z = dmean / dse
        if z < zmin:
            zmin, worst = z, f"ratio {l:g}: gap {dmean:.5f}, paired se {dse:.2g}"
    return [
        CheckResult(
            name="sweep-optimality",
            value=zmin,
            tolerance=2.0,
            passed=zmin >= 2.0,
            detail=f"min paired z-score across off-optimal ratios (>= 2 required); worst {worst}",
        )
    ]


def golden_rule_checks(
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    bridge: bool = True,
) -> list:
    """Star-rule rows plus the sweep row; two passes on the same paths."""
    kw = dict(n_paths=n_paths, seed=seed, step=step, horizon=horizon, bridge=bridge)
    return golden_rule_star_checks(**kw) + golden_rule_sweep_checks(**kw)


def future_min_checks(
    n_paths: int = 20_000,
    seed: int = 42,
    step: float = 1e-3,
    horizon: float = 20.0,
) -> list:
    """P(dip below 1 from x0=2) vs the scale-ratio law at d=3 and d=4.

    The exact values are 1/2 and 1/4; the estimate must match within
    3 binomial standard errors plus the reported truncation bias (the
    averaged conditional dip probability of the paths still above the
    level at the horizon, an unbiased completion of the estimate).
    """
    out = []
    for d, target in ((3.0, 0.5), (4.0, 0.25)):
        model = make_bessel_model(d)
        est = estimate_future_min_prob(
            model, 2.0, 1.0, n_paths=n_paths, seed=seed, step=step,
            horizon=horizon,
        )
        bias = est.extra["truncation_bias"]
        diff = abs(est.mean - target)
        tol = 3.0 * est.std_error + bias
        out.append(
            CheckResult(
                name=f"future-min-d{d:g}",
                value=diff,
                tolerance=tol,
                passed=diff <= tol,
                detail=(
                    f"p_hat {est.mean:.4f} + bias {bias:.4f} vs exact {target}; "
                    f"se {est.std_error:.2g}"
                ),
            )
        )
    return out


def cev_checks(
    n_paths: int = 10_000,
    seed: int = 42,
    step: float = 1e-3,
    horizon: float = 30.0,
) -> list:
    """Drawdown-rule consistency between the price and state pictures.

    - drawdown-step-identity: at d=3 the drawdown rule at 1+phi and the
      ratio rule at 1+phi must make bit-identical decisions on shared
      paths (the trigger events coincide exactly, not just in law);
    - cev-two-route-ks: stopped-price samples from the transformed Bessel
      route and from direct Euler on the price SDE, independently seeded,
      must agree to two-sample KS <= 0.05.  Both routes monitor extrema
      on the shared grid (no sub-step correction) so the comparison
      isolates the transform and the two discretisations.
    """
    d = 3.0
    lam = bessel_lambda(d)
    model = make_bessel_model(d)
    cev = CevModel(d, 1.0)

    n_id = min(n_paths, 2000)
    res = simulate_rules(
        model, 1.0,
        [StoppingRule.ratio_rule(lam), StoppingRule.drawdown_rule(lam)],
        n_id, seed=seed, step=step, horizon=horizon,
    )
    same = (
        np.array_equal(res.stop_step[0], res.stop_step[1])
        and np.array_equal(res.x_stop[0], res.x_stop[1])
        and np.array_equal(res.objective[0], res.objective[1])
        and np.array_equal(res.truncated[0], res.truncated[1])
    )
    max_dt = float(np.max(np.abs(res.x_stop[0] - res.x_stop[1])))
    out = [
        CheckResult(
            name="drawdown-step-identity",
            value=max_dt,
            tolerance=0.0,
            passed=same,
            detail=f"max |x_stop difference| over {n_id} shared paths (exact zero required)",
        )
    ]

    za, _ = transformed_stopped_samples(
        cev, 1.0, lam, n_paths=n_paths, seed=seed, step=step,
        horizon=horizon, bridge=False,
    )
    zb, _ = direct_stopped_samples(
        cev, 1.0, lam, n_paths=n_paths, seed=seed + 1_000_003, step=step,
        horizon=horizon,
    )
    ks = float(ks_2samp(za, zb).statistic)
    out.append(
        CheckResult(
            name="cev-two-route-ks",
            value=ks,
            tolerance=0.05,
            passed=ks <= 0.05,
            detail=(
                f"two-sample KS, {za.size} transformed vs {zb.size} direct "
                "stopped prices, independent seeds"
            ),
        )
    )
    return out


CHECK_GROUPS = {
    "golden-rule": golden_rule_checks,
    "future-min": future_min_checks,
    "cev": cev_checks,
}


def run_checks(
    groups: Optional[Sequence[str]] = None,
    n_paths: Optional[int] = None,
    seed: int = 42,
    step: Optional[float] = None,
) -> list:
    """Run the named check groups (all by default) with optional overrides.

    n_paths and step replace each group's own default only when given, so
    `run_checks()` reproduces the certification settings.
    """
    names = list(groups) if groups else list(CHECK_GROUPS)
    results = []
    for name in names:
        try:
            fn = CHECK_GROUPS[name]
        except KeyError:
            raise DomainError(
                f"unknown check group {name!r}; available: {', '.join(CHECK_GROUPS)}"
            ) from None
        kwargs = {"seed": seed}
        if n_paths is not None:
            kwargs["n_paths"] = int(n_paths)
        if step is not None:
            kwargs["step"] = float(step)
        results.extend(fn(**kwargs))
    return results


def require_pass(results: Sequence[CheckResult]) -> None:
    """Raise CheckFailure listing every failed row (no-op if all passed)."""
    bad = [r for r in results if not r.passed]
    if bad:
        lines = ", ".join(
            f"{r.name} (value {r.value:.4g}, tolerance {r.tolerance:.4g})" for r in bad
        )
        raise CheckFailure(f"{len(bad)} check(s) failed: {lines}")
