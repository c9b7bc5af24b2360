"""Monte Carlo engine for minimum-prediction stopping rules.

Paths of the model are advanced by Euler steps (with an exact
squared-Bessel substep near the origin, where Euler is unstable) or by the
exact Bessel transition every step.  The running minimum can optionally be
sharpened by the Brownian-bridge minimum between grid points, which
removes most of the discrete-monitoring bias of order sqrt(step).

Reproducibility contract
------------------------
Each path owns two counter-based streams, Philox(key=[seed, 2*index]) for
the per-step uniforms and Philox(key=[seed, 2*index + 1]) for the
occasional gamma draws.  Every step consumes exactly two uniforms from the
first stream (one mapped to a normal through the inverse CDF, one for the
bridge minimum) whether or not the bridge is enabled, so the draw a path
sees at step s is a pure function of (seed, index, s).  Results are
therefore bit-identical for any chunking of paths, any block size, any
number of rules evaluated in the same pass, and simulate_path(seed, k)
reproduces path k of a batch run exactly.

The objective accumulated along a path is int_0^tau c(I_t, X_t) dt by the
trapezoid rule on the step grid; a rule that triggers at t = 0 reports
objective 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaincinv, ndtri
from scipy.stats import kstest

from .bessel import make_stopped_distribution, stopped_cdf, stopped_cdf_general
from .boundary import Boundary
from .diffusion import DiffusionModel
from .errors import DomainError, SchemeError

__all__ = [
    "StoppingRule",
    "PathOutcome",
    "MonteCarloEstimate",
    "BatchResult",
    "RuleComparison",
    "PathStream",
    "make_path_stream",
    "simulate_path",
    "simulate_rules",
    "estimate_objective",
    "compare_rules",
    "sample_stopped_distribution",
    "estimate_future_min_prob",
]

# smallest admissible state for a raw Euler step; below it the scheme failed
EULER_FLOOR = 1e-12
# uniforms are clipped here before the inverse normal CDF (random() is a
# multiple of 2^-53, so only exact zeros are affected)
_U_FLOOR = 2.0**-53


def _check_seed(seed) -> int:
    seed = int(seed)
    if not (0 <= seed < 2**63):
        raise DomainError(f"seed must lie in [0, 2^63), got {seed}")
    return seed


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class StoppingRule:
    """Stopping rule for the minimum-prediction problem.

    Variants: ``ratio`` stops when X >= lam * I; ``boundary`` stops when
    X >= f(I) for a Boundary f; ``drawdown`` stops when the mapped price
    has fallen to 1/kappa of its running maximum, which on the Bessel side
    is the ratio rule with lam = kappa^(1/(d-2)); ``fixed_time`` stops at
    the first grid time >= t (t = 0 stops immediately with objective 0).
    """

    variant: str
    lam: Optional[float] = None
    kappa: Optional[float] = None
    t: Optional[float] = None
    boundary: Optional[Boundary] = None

    def __post_init__(self):
        v = self.variant
        if v == "ratio":
            if self.lam is None or not (self.lam > 1.0) or not math.isfinite(self.lam):
                raise DomainError(f"ratio rule needs lam > 1, got {self.lam}")
        elif v == "drawdown":
            if self.kappa is None or not (self.kappa > 1.0) or not math.isfinite(self.kappa):
                raise DomainError(f"drawdown rule needs kappa > 1, got {self.kappa}")
        elif v == "fixed_time":
            if self.t is None or not (self.t >= 0.0) or not math.isfinite(self.t):
                raise DomainError(f"fixed_time rule needs t >= 0, got {self.t}")
        elif v == "boundary":
            if not isinstance(self.boundary, Boundary):
                raise DomainError("boundary rule needs a Boundary instance")
        else:
            raise DomainError(f"unknown rule variant {v!r}")

    @classmethod
    def ratio_rule(cls, lam: float) -> "StoppingRule":
        return cls(variant="ratio", lam=float(lam))

    @classmethod
    def boundary_rule(cls, boundary: Boundary) -> "StoppingRule":
        return cls(variant="boundary", boundary=boundary)

    @classmethod
    def drawdown_rule(cls, kappa: float) -> "StoppingRule":
        return cls(variant="drawdown", kappa=float(kappa))

    @classmethod
    def fixed_time_rule(cls, t: float) -> "StoppingRule":
        return cls(variant="fixed_time", t=float(t))

    @property
    def rule_id(self) -> str:
        if self.variant == "ratio":
            return f"ratio(lam={self.lam:.17g})"
        if self.variant == "drawdown":
            return f"drawdown(kappa={self.kappa:.17g})"
        if self.variant == "fixed_time":
            return f"fixed_time(t={self.t:.17g})"
        return f"boundary({self.boundary.provenance})"


@dataclass(frozen=True)
class PathOutcome:
    """Result of one simulated path under one rule."""

    stop_time: float
    x_stop: float
    i_stop: float
    objective_integral: float
    theta_proxy: float
    n_steps: int
    truncated: bool


@dataclass(frozen=True, eq=False)
class MonteCarloEstimate:
    """Estimator output; extra carries diagnostics (e.g. truncation bias)."""

    mean: float
    std_error: float
    n_paths: int
    seed: int
    step: float
    rule_id: str
    horizon: float = math.inf
    truncated_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "step": self.step,
            "rule_id": self.rule_id,
            "horizon": self.horizon,
            "truncated_fraction": self.truncated_fraction,
        }
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class PathStream:
    """Per-path random streams: uniforms for stepping, uniforms for gammas."""

    uniform: np.random.Generator
    gamma: np.random.Generator
    seed: int
    index: int


def make_path_stream(seed: int, index: int) -> PathStream:
    """Streams for path ``index`` under ``seed``; fresh on every call."""
    seed = _check_seed(seed)
    index = int(index)
    if index < 0 or index >= 2**62:
        raise DomainError(f"path index out of range: {index}")
    key_u = np.array([seed, 2 * index], dtype=np.uint64)
    key_g = np.array([seed, 2 * index + 1], dtype=np.uint64)
    return PathStream(
        uniform=np.random.Generator(np.random.Philox(key=key_u)),
        gamma=np.random.Generator(np.random.Philox(key=key_g)),
        seed=seed,
        index=index,
    )


# ---------------------------------------------------------------------------
# rule preparation


class _CompiledRule:
    __slots__ = ("kind", "lam", "boundary", "k_stop", "level", "rule_id")

    def __init__(self, rule, model: DiffusionModel, step: float):
        self.boundary = None
        self.lam = 0.0
        self.k_stop = -1
        self.level = 0.0
        if isinstance(rule, StoppingRule):
            self.rule_id = rule.rule_id
            if rule.variant == "ratio":
                self.kind = "ratio"
                self.lam = float(rule.lam)
            elif rule.variant == "drawdown":
                if model.kind != "bessel":
                    raise DomainError(
                        "drawdown rules are defined through the Bessel price map; "
                        f"model kind {model.kind!r} is not supported"
                    )
                d = model.dim
                # d = 3 maps a drawdown threshold to the identical ratio; keep
                # it bit-exact rather than routing through pow()
                self.kind = "ratio"
                self.lam = float(rule.kappa) if d == 3.0 else float(rule.kappa) ** (1.0 / (d - 2.0))
            elif rule.variant == "fixed_time":
                self.kind = "fixed_time"
                self.k_stop = int(math.ceil(rule.t / step - 1e-9)) if rule.t > 0.0 else 0
            elif rule.variant == "boundary":
                self.kind = "boundary"
                self.boundary = rule.boundary
            else:  # pragma: no cover
                raise DomainError(f"unknown rule variant {rule.variant!r}")
        elif isinstance(rule, _DipProbe):
            self.kind = "dip"
            self.level = rule.level
            self.rule_id = f"future-min(level={rule.level:.17g})"
        else:
            raise DomainError(f"not a stopping rule: {rule!r}")

    def triggered(self, x, i, k_next: int):
        if self.kind == "ratio":
            return x >= self.lam * i
        if self.kind == "boundary":
            return x >= self.boundary(i)
        if self.kind == "fixed_time":
            if k_next >= self.k_stop:
                return np.ones_like(x, dtype=bool)
            return np.zeros_like(x, dtype=bool)
        return i < self.level  # dip


@dataclass(frozen=True)
class _DipProbe:
    """Internal pseudo-rule: fires once the running minimum falls below level."""

    level: float


# ---------------------------------------------------------------------------
# engine


class BatchResult:
    """Per-path outputs for each rule of one engine pass (path order)."""

    def __init__(self, n_rules: int, n_paths: int):
        shape = (n_rules, n_paths)
        self.stop_step = np.zeros(shape, dtype=np.int64)
        self.x_stop = np.zeros(shape)
        self.i_stop = np.zeros(shape)
        self.objective = np.zeros(shape)
        self.theta_step = np.zeros(shape, dtype=np.int64)
        self.truncated = np.zeros(shape, dtype=bool)


def _guard_level(d: float, step: float) -> float:
    # union of the drift-dominance region mu*step > 0.1 x (radius
    # sqrt(5(d-1) step)) and the region a diffusive step could cross zero
    return max(4.0 * math.sqrt((d - 1.0) * step), 8.5 * math.sqrt(step))


def simulate_rules(
    model: DiffusionModel,
    x0: float,
    rules: Sequence,
    n_paths: int,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    scheme: str = "euler",
    bridge: bool = True,
    chunk_paths: int = 8192,
    block_steps: int = 2048,
    _streams: Optional[Sequence[PathStream]] = None,
) -> BatchResult:
    """One common-random-numbers pass recording every rule's first trigger.

    The trajectory does not depend on the rules, so evaluating many rules
    in one pass is exactly equivalent to separate runs with the same seed;
    chunk_paths and block_steps are performance knobs with no effect on
    results (see module docstring).
    """
    if not (x0 > 0.0 and math.isfinite(x0)):
        raise DomainError(f"need x0 > 0, got {x0}")
    if not (step > 0.0 and math.isfinite(step)):
        raise DomainError(f"need step > 0, got {step}")
    if not (horizon > 0.0):
        raise DomainError(f"need horizon > 0, got {horizon}")
    if n_paths < 1:
        raise DomainError(f"need n_paths >= 1, got {n_paths}")
    if scheme not in ("euler", "exact"):
        raise DomainError(f"unknown scheme {scheme!r}")
    if scheme == "exact" and model.kind != "bessel":
        raise DomainError("the exact transition scheme is Bessel-specific")
    if not rules:
        raise DomainError("need at least one rule")
    seed = _check_seed(seed)

    compiled = [_CompiledRule(r, model, step) for r in rules]
    n_rules = len(compiled)
    n_max = int(math.ceil(horizon / step - 1e-9))
    res = BatchResult(n_rules, n_paths)

    is_bessel = model.kind == "bessel"
    if is_bessel:
        d = model.dim
        nu = d - 2.0
        drift_num = (d - 1.0) / 2.0
        gshape = (d - 1.0) / 2.0
        x_guard = _guard_level(d, step)
    sqdt = math.sqrt(step)

    def c_of(i_arr, x_arr):
        if is_bessel:
            r = i_arr / x_arr
            pw = r if nu == 1.0 else r**nu
            return 1.0 - 2.0 * pw
        return 1.0 - 2.0 * np.asarray(model.scale(x_arr)) / np.asarray(model.scale(i_arr))

    if _streams is not None:
        if len(_streams) != n_paths:
            raise DomainError("need one stream per path")

    for p0 in range(0, n_paths, chunk_paths):
        p1 = min(p0 + chunk_paths, n_paths)
        if _streams is None:
            gens_u = [make_path_stream(seed, p) for p in range(p0, p1)]
            gens_g = [st.gamma for st in gens_u]
            gens_u = [st.uniform for st in gens_u]
        else:
            gens_u = [st.uniform for st in _streams[p0:p1]]
            gens_g = [st.gamma for st in _streams[p0:p1]]
        m = p1 - p0
        X = np.full(m, float(x0))
        I = np.full(m, float(x0))
        obj = np.zeros(m)
        cprev = np.full(m, -1.0)  # c(x0, x0) = -1 exactly
        theta = np.zeros(m, dtype=np.int64)
        orig = np.arange(p0, p1, dtype=np.int64)
        undone = np.ones((n_rules, m), dtype=bool)

        def record(j, rows, k_next, x_arr, i_arr, truncated=False):
            ids = orig[rows]
            res.stop_step[j, ids] = k_next
            res.x_stop[j, ids] = x_arr[rows]
            res.i_stop[j, ids] = i_arr[rows]
            res.objective[j, ids] = obj[rows]
            res.theta_step[j, ids] = theta[rows]
            res.truncated[j, ids] = truncated
            undone[j, rows] = False

        # rules may already hold at t = 0 (fixed_time(0), degenerate boundary)
        for j, sp in enumerate(compiled):
            hit = sp.triggered(X, I, 0) & undone[j]
            if hit.any():
                record(j, np.nonzero(hit)[0], 0, X, I)

        s = 0
        B = block_steps
        while s < n_max and undone.any():
            keep = undone.any(axis=0)
            if not keep.all():
                X, I, obj, cprev, theta, orig = (
                    X[keep], I[keep], obj[keep], cprev[keep], theta[keep], orig[keep]
                )
                undone = undone[:, keep]
                gens_u = [g for g, k in zip(gens_u, keep) if k]
                gens_g = [g for g, k in zip(gens_g, keep) if k]
            m = X.size
            if m == 0:
                break
            # grow blocks as stragglers thin out, under a flat memory budget
            while m * (2 * B) <= 20_000_000 and B < n_max - s:
                B *= 2
            B_run = min(B, n_max - s)
            U = np.empty((m, 2 * B_run))
            for r in range(m):
                gens_u[r].random(out=U[r])
            Z = ndtri(np.maximum(U[:, 0::2], _U_FLOOR))
            BU = np.maximum(U[:, 1::2], _U_FLOOR)
            if scheme == "exact":
                G = np.empty((m, B_run))
                for r in range(m):
                    gens_g[r].random(out=G[r])
                G = 2.0 * gammaincinv(gshape, G)

            for k in range(B_run):
                z = Z[:, k]
                a = X
                live = undone.any(axis=0)
                if is_bessel:
                    if scheme == "exact":
                        Xn = np.sqrt((a + sqdt * z) ** 2 + step * G[:, k])
                    else:
                        guarded = a < x_guard
                        Xn = a + drift_num / a * step + sqdt * z
                        if guarded.any():
                            rows = np.nonzero(guarded)[0]
                            gu = np.array([gens_g[r].random() for r in rows])
                            gdraw = 2.0 * gammaincinv(gshape, np.maximum(gu, _U_FLOOR))
                            Xn[rows] = np.sqrt((a[rows] + sqdt * z[rows]) ** 2 + step * gdraw)
                        bad = (Xn <= EULER_FLOOR) & ~guarded & live
                        if bad.any():
                            r0 = np.nonzero(bad)[0][0]
                            raise SchemeError(
                                f"Euler step drove path {int(orig[r0])} to "
                                f"X={float(Xn[r0]):g} <= {EULER_FLOOR:g} "
                                f"at t={(s + k + 1) * step:g}; reduce step"
                            )
                        Xn = np.maximum(Xn, EULER_FLOOR)  # rows already settled
                else:
                    mu = np.asarray(model.drift(a), dtype=float)
                    sg = np.asarray(model.volatility(a), dtype=float)
                    Xn = a + mu * step + sg * sqdt * z
                    bad = (Xn <= EULER_FLOOR) & live
                    if bad.any():
                        r0 = np.nonzero(bad)[0][0]
                        raise SchemeError(
                            f"Euler step drove path {int(orig[r0])} to "
                            f"X={float(Xn[r0]):g} <= {EULER_FLOOR:g} "
                            f"at t={(s + k + 1) * step:g}; reduce step"
                        )
                    Xn = np.maximum(Xn, EULER_FLOOR)  # rows already settled

                if bridge:
                    sg2 = 1.0 if is_bessel else sg**2
                    span = np.minimum(a, Xn)
                    arg = (a - Xn) ** 2 - (2.0 * step) * sg2 * np.log(BU[:, k])
                    mb = 0.5 * ((a + Xn) - np.sqrt(arg))
                    mb = np.maximum(mb, EULER_FLOOR)
                    if is_bessel:
                        # near the origin the interpolating bridge is not
                        # Brownian; fall back to endpoint monitoring there
                        mb = np.where(span < x_guard, span, mb)
                    new_min = mb
                else:
                    new_min = np.minimum(a, Xn)
                upd = new_min < I
                if upd.any():
                    theta[upd] = s + k + 1
                    I = np.minimum(I, new_min)

                X = Xn
                c_new = c_of(I, X)
                obj += (0.5 * step) * (cprev + c_new)
                cprev = c_new

                k_next = s + k + 1
                for j, sp in enumerate(compiled):
                    row_mask = sp.triggered(X, I, k_next) & undone[j]
                    if row_mask.any():
                        record(j, np.nonzero(row_mask)[0], k_next, X, I)
                if not undone.any():
                    break
            s += B_run

        # horizon reached with rules still pending
        if undone.any():
            for j in range(n_rules):
                rows = np.nonzero(undone[j])[0]
                if rows.size:
                    record(j, rows, n_max, X, I, truncated=True)

    res.rule_ids = [sp.rule_id for sp in compiled]
    res.n_max = n_max
    return res


def simulate_path(
    model: DiffusionModel,
    x0: float,
    step: float,
    rule,
    horizon: float,
    stream: PathStream,
    scheme: str = "euler",
    bridge: bool = True,
) -> PathOutcome:
    """Advance a single path until the rule fires or the horizon is hit.

    With a freshly made stream for (seed, k) this reproduces path k of the
    batch estimators bit for bit.
    """
    res = simulate_rules(
        model, x0, [rule], 1,
        seed=stream.seed, step=step, horizon=horizon,
        scheme=scheme, bridge=bridge, _streams=[stream],
    )
    return PathOutcome(
        stop_time=float(res.stop_step[0, 0]) * step,
        x_stop=float(res.x_stop[0, 0]),
        i_stop=float(res.i_stop[0, 0]),
        objective_integral=float(res.objective[0, 0]),
        theta_proxy=float(res.theta_step[0, 0]) * step,
        n_steps=int(res.stop_step[0, 0]),
        truncated=bool(res.truncated[0, 0]),
    )


def _estimate_from_batch(res, j, n_paths, seed, step, horizon) -> MonteCarloEstimate:
    objs = res.objective[j]
    mean = float(np.sum(objs)) / n_paths
    se = float(np.std(objs, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
    trunc = float(np.mean(res.truncated[j]))
    return MonteCarloEstimate(
        mean=mean,
        std_error=se,
        n_paths=n_paths,
        seed=seed,
        step=step,
        rule_id=res.rule_ids[j],
        horizon=horizon,
        truncated_fraction=trunc,
    )


def estimate_objective(
    model: DiffusionModel,
    x0: float,
    rule,
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    scheme: str = "euler",
    bridge: bool = True,
) -> MonteCarloEstimate:
    """Mean and standard error of the stopped objective under one rule.

    Truncated paths (horizon hit first) contribute their accumulated
    objective; a truncated fraction above 1% draws a warning since the
    estimate is then noticeably horizon-biased.
    """
    res = simulate_rules(
        model, x0, [rule], n_paths, seed=seed, step=step, horizon=horizon,
        scheme=scheme, bridge=bridge,
    )
    est = _estimate_from_batch(res, 0, n_paths, seed, step, horizon)
    if est.truncated_fraction > 0.01:
        warnings.warn(
            f"{est.truncated_fraction:.1%} of paths hit the horizon before the "
            f"rule {est.rule_id} fired; the estimate is horizon-biased",
            stacklevel=2,
        )
    return est


@dataclass(frozen=True, eq=False)
class RuleComparison:
    """Common-random-number comparison of several rules on one pass."""

    estimates: list
    objectives: np.ndarray  # (n_rules, n_paths)
    rule_ids: list

    def paired_difference(self, j: int, k: int):
        """Mean and standard error of objective_j - objective_k (paired)."""
        diff = self.objectives[j] - self.objectives[k]
        n = diff.size
        return float(np.mean(diff)), float(np.std(diff, ddof=1) / math.sqrt(n))

    def rows(self):
        return [e.to_dict() for e in self.estimates]


def compare_rules(
    model: DiffusionModel,
    x0: float,
    rules: Sequence,
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    scheme: str = "euler",
    bridge: bool = True,
) -> RuleComparison:
    """Evaluate all rules on the same trajectories (one pass, paired)."""
    res = simulate_rules(
        model, x0, rules, n_paths, seed=seed, step=step, horizon=horizon,
        scheme=scheme, bridge=bridge,
    )
    ests = [
        _estimate_from_batch(res, j, n_paths, seed, step, horizon)
        for j in range(len(rules))
    ]
    return RuleComparison(estimates=ests, objectives=res.objective, rule_ids=res.rule_ids)


def sample_stopped_distribution(
    model: DiffusionModel,
    x0: float,
    rule,
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-4,
    horizon: float = 50.0,
    scheme: str = "euler",
    bridge: bool = True,
):
    """Sorted sample of the stopped state and its KS distance to theory.

    The reference law is the closed-form power law for ratio-type rules on
    Bessel models, and the quadrature law of `stopped_cdf_general` for
    boundary rules.  Truncated paths are excluded from the sample, with a
    warning once they exceed 1% of the run.
    """
    res = simulate_rules(
        model, x0, [rule], n_paths, seed=seed, step=step, horizon=horizon,
        scheme=scheme, bridge=bridge,
    )
    ok = ~res.truncated[0]
    n_excl = int((~ok).sum())
    if n_excl > 0.01 * n_paths:
        warnings.warn(
            f"excluding {n_excl} truncated paths from the stopped sample",
            stacklevel=2,
        )
    sample = np.sort(res.x_stop[0, ok])

    cr = _CompiledRule(rule, model, step)
    if cr.kind == "ratio" and model.kind == "bessel":
        dist = make_stopped_distribution(model.dim, cr.lam, x0)
        ks = float(kstest(sample, lambda y: stopped_cdf(dist, y)).statistic)
    elif cr.kind == "boundary":
        ks = float(
            kstest(sample, lambda y: np.array([
                stopped_cdf_general(model, cr.boundary, x0, float(v)) for v in np.atleast_1d(y)
            ])).statistic
        )
    else:
        raise DomainError(
            f"no reference stopped law for rule kind {cr.kind!r} on model {model.kind!r}"
        )
    return sample, ks


def estimate_future_min_prob(
    model: DiffusionModel,
    x0: float,
    level: float,
    n_paths: int = 50_000,
    seed: int = 42,
    step: float = 1e-3,
    horizon: float = 50.0,
    scheme: str = "euler",
    bridge: bool = True,
) -> MonteCarloEstimate:
    """P(the path ever dips below ``level``), with truncation accounting.

    Paths retire as soon as they dip (their contribution is settled), so
    the pass is much cheaper than a fixed-horizon run.  For surviving
    paths the exact conditional dip probability L(X_T)/L(level) is
    averaged and reported as extra["truncation_bias"]; the unbiased target
    is estimate + bias, and theory says L(x0)/L(level).
    """
    if not (0.0 < level < x0):
        raise DomainError(f"need 0 < level < x0, got level={level}, x0={x0}")
    res = simulate_rules(
        model, x0, [_DipProbe(level=float(level))], n_paths,
        seed=seed, step=step, horizon=horizon, scheme=scheme, bridge=bridge,
    )
    dipped = ~res.truncated[0]
    p_hat = float(np.mean(dipped))
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / n_paths)
    surv = res.truncated[0]
    if surv.any():
        x_surv = res.x_stop[0, surv]
        cond = np.asarray(model.scale(x_surv), dtype=float) / float(model.scale(level))
        bias = float(np.sum(cond)) / n_paths
    else:
        bias = 0.0
    return MonteCarloEstimate(
        mean=p_hat,
        std_error=se,
        n_paths=n_paths,
        seed=seed,
        step=step,
        rule_id=res.rule_ids[0],
        horizon=horizon,
        truncated_fraction=float(np.mean(surv)),
        extra={"truncation_bias": bias},
    )
