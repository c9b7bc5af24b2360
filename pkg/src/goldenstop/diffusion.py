"""Transient diffusions on (0, inf): scale, speed, and exit formulas.

A model is dX = mu(X) dt + sigma(X) dW on (0, inf), transient to +inf,
carried around as a bundle of evaluators for the scale function and the
speed measure.  The scale function L is normalised to be strictly
increasing and negative with

    L(0+) = -inf,        L(x) -> 0  as x -> inf.

Under this normalisation the all-time minimum I_inf of the path started at
x satisfies  P(I_inf < i) = L(x)/L(i)  for 0 < i <= x, which is what makes
L the natural coordinate for predicting the ultimate minimum.  The running
cost separating "too early" from "too late" is

    c(i, x) = 1 - 2 L(x)/L(i)        (in [-1, 1)),

negative while a new minimum is more likely than not, changing sign on the
curve h(i) = L^{-1}(L(i)/2).

The speed density is m'(x) = 2 / (sigma(x)^2 L'(x)); all expected-exit
functionals below are integrals against the Green kernel times m'.

Bessel models (dimension d > 2, drift (d-1)/(2x), unit volatility) have
closed forms throughout:  L(x) = -x^(2-d),  m'(x) = (2/(d-2)) x^(d-1),
h(i) = 2^(1/(d-2)) i.  Custom models get their scale by integrating
2 mu / sigma^2, see model_from_coefficients.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericalError, UnsupportedModelError

__all__ = [
    "DiffusionModel",
    "make_bessel_model",
    "model_from_scale",
    "model_from_coefficients",
    "model_from_csv",
    "validate_model",
    "c_value",
    "h_curve",
    "hitting_probabilities",
    "green_function",
    "expected_exit_integral",
    "QUAD_EPSABS",
    "QUAD_EPSREL",
]

# Default adaptive-quadrature tolerances for every integral in this module.
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8


@dataclass(frozen=True)
class DiffusionModel:
    """Evaluator bundle for one transient diffusion on (0, inf).

    Attributes
    ----------
    kind : str
        "bessel" for the closed-form family, "custom" otherwise.
    drift, volatility : callable
        mu(x) and sigma(x); accept floats or numpy arrays.
    scale : callable
        Normalised scale function L (negative, increasing to 0).
    scale_deriv : callable
        L'(x) > 0.
    scale_inverse : callable or None
        L^{-1} on the range of L; None when not available (then operations
        that need it, e.g. the sign-change curve, raise).
    speed_density : callable
        m'(x) = 2 / (sigma^2(x) L'(x)).
    dim : float or None
        Bessel dimension when kind == "bessel".
    domain : tuple
        (x_min, x_max) on which the evaluators are trustworthy; Bessel
        models use (0, inf).
    label : str
        Short human-readable description, used in CLI output.
    """

    kind: str
    drift: Callable
    volatility: Callable
    scale: Callable
    scale_deriv: Callable
    scale_inverse: Optional[Callable]
    speed_density: Callable
    dim: Optional[float] = None
    domain: tuple = (0.0, math.inf)
    label: str = ""

    def __repr__(self):  # keep dataclass repr from dumping closures
        return f"DiffusionModel(kind={self.kind!r}, label={self.label!r}, domain={self.domain!r})"


def _require_positive(name, value):
    if not np.all(np.isfinite(value)) or np.any(np.asarray(value) <= 0.0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def _check_in_domain(model, name, value):
    _require_positive(name, value)
    lo, hi = model.domain
    v = np.asarray(value, dtype=float)
    if np.any(v < lo) or np.any(v > hi):
        raise DomainError(f"{name}={value} outside model domain [{lo}, {hi}]")


def make_bessel_model(d: float) -> DiffusionModel:
    """Bessel process of dimension d > 2: drift (d-1)/(2x), volatility 1.

    Transient for d > 2; smaller d is recurrent (the ultimate minimum is 0
    almost surely and the prediction problem degenerates), so d <= 2 is
    rejected.
    """
    d = float(d)
    if not math.isfinite(d) or d <= 2.0:
        raise DomainError(
            f"Bessel dimension must satisfy d > 2 (transient case); got d={d}. "
            "For d <= 2 the process is recurrent and the ultimate minimum is 0."
        )
    nu = d - 2.0

    def drift(x):
        return (d - 1.0) / (2.0 * np.asarray(x, dtype=float))

    def volatility(x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if x.ndim else 1.0

    def scale(x):
        return -np.asarray(x, dtype=float) ** (-nu)

    def scale_deriv(x):
        return nu * np.asarray(x, dtype=float) ** (-nu - 1.0)

    def scale_inverse(v):
        v = np.asarray(v, dtype=float)
        if np.any(v >= 0.0):
            raise DomainError(f"scale inverse needs a negative argument, got {v}")
        return (-v) ** (-1.0 / nu)

    def speed_density(x):
        return (2.0 / nu) * np.asarray(x, dtype=float) ** (d - 1.0)

    return DiffusionModel(
        kind="bessel",
        drift=drift,
        volatility=volatility,
        scale=scale,
        scale_deriv=scale_deriv,
        scale_inverse=scale_inverse,
        speed_density=speed_density,
        dim=d,
        domain=(0.0, math.inf),
        label=f"bessel(d={d:g})",
    )


def model_from_scale(
    drift: Callable,
    volatility: Callable,
    scale: Callable,
    scale_deriv: Callable,
    scale_inverse: Optional[Callable] = None,
    domain: tuple = (0.0, math.inf),
    label: str = "custom-scale",
) -> DiffusionModel:
    """Custom model from explicit scale evaluators.

    The caller vouches for the normalisation (L < 0 increasing, L(0+) =
    -inf, L(inf-) = 0); a few spot checks run and warn on violation.
    """
    def speed_density(x):
        x = np.asarray(x, dtype=float)
        return 2.0 / (volatility(x) ** 2 * scale_deriv(x))

    model = DiffusionModel(
        kind="custom",
        drift=drift,
        volatility=volatility,
        scale=scale,
        scale_deriv=scale_deriv,
        scale_inverse=scale_inverse,
        speed_density=speed_density,
        dim=None,
        domain=domain,
        label=label,
    )
    validate_model(model)
    return model


def validate_model(model: DiffusionModel, n_probe: int = 9) -> list:
    """Spot-check the scale normalisation on a log grid; warn, never raise.

    Returns the list of warning messages (empty when everything looks
    consistent with a transient model normalised to L(inf) = 0).
    """
    msgs = []
    lo, hi = model.domain
    lo_p = max(lo, 1e-12) if lo <= 0 else lo
    hi_p = hi if math.isfinite(hi) else 1e6
    xs = np.geomspace(lo_p * (1 + 1e-9), hi_p * (1 - 1e-9), n_probe)
    try:
        Ls = np.asarray(model.scale(xs), dtype=float)
    except Exception as exc:  # pragma: no cover - defensive
        msgs.append(f"scale evaluation failed on probe grid: {exc}")
        for m in msgs:
            warnings.warn(m, stacklevel=2)
        return msgs
    if np.any(Ls >= 0.0):
        msgs.append("scale function is not strictly negative on the probe grid")
    if np.any(np.diff(Ls) <= 0.0):
        msgs.append("scale function is not strictly increasing on the probe grid")
    mid = model.scale(math.sqrt(lo_p * hi_p))
    # transience: L must flatten to 0 at the top and dive at the bottom
    if abs(Ls[-1]) > 1e-3 * abs(mid):
        msgs.append(
            f"scale does not vanish at the upper domain end (L={Ls[-1]:.3e} vs "
            f"L(mid)={mid:.3e}); transience normalisation is approximate"
        )
    if abs(Ls[0]) < 10.0 * abs(mid):
        msgs.append(
            "scale does not blow up toward the lower domain end; "
            "the entrance behaviour looks non-singular"
        )
    if model.scale_inverse is not None:
        x_probe = xs[n_probe // 2]
        back = float(model.scale_inverse(model.scale(x_probe)))
        if not math.isclose(back, float(x_probe), rel_tol=1e-8):
            msgs.append(f"scale_inverse(scale(x)) != x at x={x_probe:g} (got {back:g})")
    for m in msgs:
        warnings.warn(m, stacklevel=2)
    return msgs


def model_from_coefficients(
    drift: Callable,
    volatility: Callable,
    x_ref: float = 1.0,
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
    label: str = "custom",
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> DiffusionModel:
    """Build a model from coefficient functions by integrating the scale ODE.

    Solves, on t = log x,

        E'(t)  = 2 mu(e^t) / sigma(e^t)^2 * e^t        E(log x_ref) = 0
        T'(t)  = -exp(-E(t)) e^t                        T(log x_max) = 0

    so T(x) = int_x^{x_max} exp(-E) dy, and normalises L(x) = -T(x)/T(x_ref)
    (hence L(x_ref) = -1, L(x_max) = 0).  The tail above x_max is truncated;
    pick x_max large enough that L has flattened.  Backward integration of T
    avoids catastrophic cancellation near x_max.

    The scale inverse is by bisection on [x_min, x_max].
    """
    _require_positive("x_ref", x_ref)
    x_min = x_ref * 1e-6 if x_min is None else float(x_min)
    x_max = x_ref * 1e6 if x_max is None else float(x_max)
    if not (0.0 < x_min < x_ref < x_max):
        raise DomainError(
            f"need 0 < x_min < x_ref < x_max, got {x_min}, {x_ref}, {x_max}"
        )

    t_min, t_ref, t_max = math.log(x_min), math.log(x_ref), math.log(x_max)

    def e_rhs(t, y):
        x = math.exp(t)
        return [2.0 * drift(x) / volatility(x) ** 2 * x]

    sol_up = solve_ivp(e_rhs, (t_ref, t_max), [0.0], dense_output=True,
                       rtol=rtol, atol=atol, method="RK45")
    sol_dn = solve_ivp(e_rhs, (t_ref, t_min), [0.0], dense_output=True,
                       rtol=rtol, atol=atol, method="RK45")
    if not (sol_up.success and sol_dn.success):
        raise NumericalError(
            f"scale exponent integration failed: {sol_up.message} / {sol_dn.message}"
        )

    def e_of_t(t):
        t = np.asarray(t, dtype=float)
        up = t >= t_ref
        out = np.empty_like(t)
        if np.any(up):
            out[up] = sol_up.sol(t[up])[0]
        if np.any(~up):
            out[~up] = sol_dn.sol(t[~up])[0]
        return out

    def tail_rhs(t, y):
        return [-math.exp(-float(e_of_t(t))) * math.exp(t)]

    sol_tail = solve_ivp(tail_rhs, (t_max, t_min), [0.0], dense_output=True,
                         rtol=rtol, atol=atol, method="RK45")
    if not sol_tail.success:
        raise NumericalError(f"scale tail integration failed: {sol_tail.message}")

    t_norm = float(sol_tail.sol(t_ref)[0])
    if t_norm <= 0.0:
        raise NumericalError("scale tail came out nonpositive; check the coefficients")

    def scale(x):
        x = np.asarray(x, dtype=float)
        t = np.log(x)
        vals = sol_tail.sol(np.atleast_1d(t))[0] / t_norm
        vals = -vals
        return vals if x.ndim else float(vals[0])

    def scale_deriv(x):
        x = np.asarray(x, dtype=float)
        t = np.log(np.atleast_1d(x))
        vals = np.exp(-e_of_t(t)) / t_norm
        return vals if x.ndim else float(vals[0])

    lo_val, hi_val = float(scale(x_min)), float(scale(x_max * (1 - 1e-12)))

    def scale_inverse(v):
        def invert_one(val):
            if not (lo_val <= val <= hi_val):
                raise DomainError(
                    f"scale inverse argument {val} outside representable range "
                    f"[{lo_val:.6e}, {hi_val:.6e}]"
                )
            a, b = x_min, x_max
            for _ in range(200):
                m = math.sqrt(a * b)
                if float(scale(m)) < val:
                    a = m
                else:
                    b = m
                if b - a <= 1e-14 * b:
                    break
            return 0.5 * (a + b)

        v = np.asarray(v, dtype=float)
        if v.ndim:
            return np.array([invert_one(val) for val in v])
        return invert_one(float(v))

    def speed_density(x):
        x = np.asarray(x, dtype=float)
        return 2.0 / (volatility(x) ** 2 * scale_deriv(x))

    model = DiffusionModel(
        kind="custom",
        drift=drift,
        volatility=volatility,
        scale=scale,
        scale_deriv=scale_deriv,
        scale_inverse=scale_inverse,
        speed_density=speed_density,
        dim=None,
        domain=(x_min, x_max),
        label=label,
    )
    validate_model(model)
    return model


def model_from_csv(path, x_ref: Optional[float] = None, label: Optional[str] = None) -> DiffusionModel:
    """Model from a coefficient table.

    The file must have a header row "x,mu,sigma" and strictly ascending x.
    Coefficients are interpolated monotone-cubically inside the table range
    and the scale is built by model_from_coefficients over exactly that
    range (no extrapolation).
    """
    xs, mus, sigmas = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["x", "mu", "sigma"]:
            raise DomainError(f"{path}: expected header 'x,mu,sigma', got {header}")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            try:
                x, mu, sg = (float(row[0]), float(row[1]), float(row[2]))
            except (IndexError, ValueError) as exc:
                raise DomainError(f"{path}: malformed row {row}") from exc
            xs.append(x)
            mus.append(mu)
            sigmas.append(sg)
    if len(xs) < 4:
        raise DomainError(f"{path}: need at least 4 rows, got {len(xs)}")
    xs = np.asarray(xs)
    if np.any(np.diff(xs) <= 0.0):
        raise DomainError(f"{path}: x column must be strictly ascending")
    _require_positive("x column", xs)
    _require_positive("sigma column", np.asarray(sigmas))

    mu_i = PchipInterpolator(xs, mus)
    sg_i = PchipInterpolator(xs, sigmas)
    if x_ref is None:
        x_ref = float(xs[len(xs) // 2])
    return model_from_coefficients(
        drift=lambda x: mu_i(x),
        volatility=lambda x: sg_i(x),
        x_ref=x_ref,
        x_min=float(xs[0]),
        x_max=float(xs[-1]),
        label=label or f"csv({path})",
    )


# ---------------------------------------------------------------------------
# pointwise quantities


def c_value(model: DiffusionModel, i, x):
    """Running cost c(i, x) = 1 - 2 L(x)/L(i) for 0 < i <= x.

    Equals 2 P(min falls below i | current state x) - 1 with a sign flip:
    it is -1 at x = i, crosses 0 on the curve h, and tends to 1 as the
    chance of a new minimum vanishes.
    """
    _check_in_domain(model, "i", i)
    _check_in_domain(model, "x", x)
    if np.any(np.asarray(x) < np.asarray(i)):
        raise DomainError(f"need i <= x, got i={i}, x={x}")
    return 1.0 - 2.0 * model.scale(x) / model.scale(i)


def h_curve(model: DiffusionModel, i):
    """Sign-change curve h(i) = L^{-1}(L(i)/2) of the running cost.

    For Bessel models h(i) = 2^(1/(d-2)) i.  Needs a scale inverse.
    """
    _check_in_domain(model, "i", i)
    if model.scale_inverse is None:
        raise UnsupportedModelError(
            "h_curve needs a scale inverse, which this model does not provide"
        )
    return model.scale_inverse(model.scale(i) / 2.0)


def hitting_probabilities(model: DiffusionModel, a: float, x: float, b: float):
    """(p_a, p_b): chances of exiting (a, b) at a resp. b, started at x.

    p_a = (L(b) - L(x)) / (L(b) - L(a)), p_b = 1 - p_a exactly (the pair
    always sums to 1 in floating point).
    """
    _check_in_domain(model, "a", a)
    _check_in_domain(model, "x", x)
    _check_in_domain(model, "b", b)
    if not (a < b):
        raise DomainError(f"need a < b, got a={a}, b={b}")
    if not (a <= x <= b):
        raise DomainError(f"need a <= x <= b, got a={a}, x={x}, b={b}")
    la, lx, lb = model.scale(a), model.scale(x), model.scale(b)
    p_a = (lb - lx) / (lb - la)
    # clamp roundoff; the formula is a ratio of nearby negatives
    p_a = min(1.0, max(0.0, float(p_a)))
    return p_a, 1.0 - p_a


def green_function(model: DiffusionModel, a: float, b: float, x: float, y: float):
    """Green kernel of the interval (a, b) against the speed measure.

    G(x, y) = (L(x^y) - L(a)) (L(b) - L(xvy)) / (L(b) - L(a)), with x^y the
    smaller and xvy the larger of x, y; expected occupation functionals are
    integrals f(y) G(x, y) m'(y) dy over (a, b).
    """
    _check_in_domain(model, "a", a)
    _check_in_domain(model, "b", b)
    if not (a < b):
        raise DomainError(f"need a < b, got a={a}, b={b}")
    for name, v in (("x", x), ("y", y)):
        _check_in_domain(model, name, v)
        if not (a <= v <= b):
            raise DomainError(f"need a <= {name} <= b, got {name}={v}, a={a}, b={b}")
    la, lb = model.scale(a), model.scale(b)
    lo, hi = (x, y) if x <= y else (y, x)
    return float((model.scale(lo) - la) * (lb - model.scale(hi)) / (lb - la))


def expected_exit_integral(
    model: DiffusionModel,
    f: Callable,
    a: float,
    x: float,
    b: float,
    epsabs: float = QUAD_EPSABS,
    epsrel: float = QUAD_EPSREL,
):
    """E_x int_0^{tau_{a,b}} f(X_t) dt via the Green kernel.

    Adaptive quadrature of f(y) G(x, y) m'(y) over (a, b), split at y = x
    where the kernel has a kink.
    """
    _check_in_domain(model, "a", a)
    _check_in_domain(model, "x", x)
    _check_in_domain(model, "b", b)
    if not (a < b) or not (a <= x <= b):
        raise DomainError(f"need a <= x <= b with a < b, got a={a}, x={x}, b={b}")

    la, lb = model.scale(a), model.scale(b)
    denom = lb - la
    lx = model.scale(x)

    def left(y):
        return f(y) * (model.scale(y) - la) * (lb - lx) / denom * model.speed_density(y)

    def right(y):
        return f(y) * (lx - la) * (lb - model.scale(y)) / denom * model.speed_density(y)

    total = 0.0
    err = 0.0
    if x > a:
        v, e = quad(left, a, x, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        err += e
    if x < b:
        v, e = quad(right, x, b, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        err += e
    if not math.isfinite(total):
        raise NumericalError(f"exit integral did not converge (err estimate {err:g})")
    return total
