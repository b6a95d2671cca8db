"""Potential-function thresholds of the single (uncoupled) system.

With ``h(x, lam) = lam g(x)^(v-1)`` the single-system potential is

    U_s(x, lam) = x g(x) - G(x) - (lam / v) g(x)^v,     G(x) = int_0^x g,

and ``Q(x) = U_s(x, lam~(x))`` with ``lam~(x) = x / g(x)^(v-1)`` the unique
channel parameter that makes ``x`` a fixed point.  The potential
threshold is the smallest ``lam~`` over the nontrivial roots of ``Q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleSpec
from .numerics import (
    ConfigurationError,
    DecodingProfile,
    TailSpec,
    bisect_bracket,
    g_eval,
    g_integral,
    poisson_pmf_array,
    poisson_tail,
    sigma_bound,
)
from .results import ThresholdResult, gap_to_capacity  # noqa: F401  (re-exported)

GRID_POINTS = 10_000
ROOT_TOL = 1e-10
PROFILE_SATURATION = 1e-9


@dataclass(frozen=True)
class PotentialSpec:
    tail: TailSpec
    v: int
    lam_max: float | None = None
    x_max: float = 1.0
    channel: str | None = None

    def __post_init__(self):
        if not self.tail.has_closed_form_integral:
            raise ConfigurationError("potential analysis needs a closed-form integral; profile tails are recursion-only")
        if self.v < 2:
            raise ValueError(f"need v >= 2, got {self.v}")
        if self.channel is None:
            object.__setattr__(self, "channel", "BSC" if self.tail.kind == "bdd-error" else "BEC")
        if self.lam_max is None:
            object.__setattr__(self, "lam_max", 0.5 if self.channel == "BSC" else 1.0)


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def potential_U(x, p: float, spec: PotentialSpec):
    """Single-system potential ``x g - G - (p/v) g^v``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g_eval(spec.tail, x), dtype=float)
    return _out(x * g - g_integral(spec.tail, x) - (p / spec.v) * g**spec.v)


def fixed_point_potential_Q(x, spec: PotentialSpec):
    """Closed form ``sum_i rho_i (a_i/n_i) pi(a_i+1, n_i, x) - (x/v) g(x)``.

    Each component term is a pure tail, so the value keeps full relative
    precision near ``x = 0`` where ``Q`` is tiny.
    """
    x = np.asarray(x, dtype=float)
    first = sum(rho * (a / n) * np.asarray(poisson_tail(a + 1, n, x)) for rho, a, n in spec.tail.components())
    return _out(first - (x / spec.v) * np.asarray(g_eval(spec.tail, x)))


def fixed_point_potential_Q_forms(x, spec: PotentialSpec):
    """The two printed expansions of ``Q``.

    ``line1 = (1 - 1/v) x g(x) - sum_i rho_i (x - (1/n_i) sum_{j<a_i} pi(j+1, n_i, x))``
    ``line2 = sum_i rho_i [(a_i/n_i - x/v) pi(a_i, n_i, x) - (a_i/n_i) Po[n_i x](a_i)]``
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g_eval(spec.tail, x))
    integral = np.zeros_like(x)
    line2 = np.zeros_like(x)
    for rho, a, n in spec.tail.components():
        partial = sum(np.asarray(poisson_tail(j + 1, n, x)) for j in range(a)) if a else np.zeros_like(x)
        integral = integral + rho * (x - partial / n)
        line2 = line2 + rho * ((a / n - x / spec.v) * np.asarray(poisson_tail(a, n, x)) - (a / n) * poisson_pmf_array(a, n * x))
    line1 = (1.0 - 1.0 / spec.v) * x * g - integral
    return _out(line1), _out(line2)


def lambda_tilde(x, spec: PotentialSpec):
    """``x / g(x)^(v-1)``; ``inf`` where ``g(x) = 0``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g_eval(spec.tail, x), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(g > 0, x / np.where(g > 0, g, 1.0) ** (spec.v - 1), np.inf)
    return _out(out)


def single_system_map(x, lam: float, spec: PotentialSpec):
    """``h(x, lam) = lam g(x)^(v-1)``."""
    return _out(lam * np.asarray(g_eval(spec.tail, x), dtype=float) ** (spec.v - 1))


def unconditionally_stable(spec: PotentialSpec, lam: float | None = None) -> bool:
    """Whether ``h(x, lam) < x`` on some interval ``(0, x0)``.

    Near zero ``h(x, lam) ~ lam (c x^a)^(v-1)`` with ``a`` the smallest tail
    start, so the answer follows from the leading power; the marginal
    case ``a (v-1) = 1`` compares the slope with 1.
    """
    lam = spec.lam_max if lam is None else lam
    comps = [(rho, a, n) for rho, a, n in spec.tail.components() if rho > 0]
    a_min = min(a for _, a, _ in comps)
    power = a_min * (spec.v - 1)
    if power == 0:
        return lam == 0
    if power > 1:
        return True
    slope = lam * sum(rho * n for rho, a, n in comps if a == a_min)
    return slope < 1.0


def _q_roots(spec: PotentialSpec, grid: int, tol: float) -> list[float]:
    xs = np.linspace(0.0, spec.x_max, grid + 1)[1:]
    qs = np.asarray(fixed_point_potential_Q(xs, spec))
    sign = np.sign(qs)
    roots = [float(xs[i]) for i in np.flatnonzero(sign == 0)]
    f = lambda z: fixed_point_potential_Q(z, spec)  # noqa: E731
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        lo, hi, _ = bisect_bracket(f, xs[i], xs[i + 1], tol, f_lo=qs[i], f_hi=qs[i + 1])
        roots.append(0.5 * (lo + hi))
    return sorted(roots)


def potential_threshold(spec: PotentialSpec, grid: int = GRID_POINTS, tol: float = ROOT_TOL) -> ThresholdResult:
    """Smallest ``lam~(x)`` over the roots of ``Q`` with ``lam~ <= lam_max``."""
    roots = _q_roots(spec, grid, tol)
    lams = [float(lambda_tilde(r, spec)) for r in roots]
    admissible = [(lam, r) for lam, r in zip(lams, roots) if lam <= spec.lam_max * (1 + 1e-12)]
    flags = []
    if admissible:
        p_star, x_star = min(admissible)
    else:
        p_star, x_star = spec.lam_max, None
        flags.append("lambda-max-saturating")
    stable = unconditionally_stable(spec)
    if not stable:
        flags.append("not-unconditionally-stable")
    result = ThresholdResult(
        min(p_star, spec.lam_max),
        "potential",
        tolerance=tol,
        channel=spec.channel,
        flags=flags,
    )
    result.diagnostics.update(roots=roots, lambda_tilde=lams, x_star=x_star, unconditionally_stable=stable, grid=grid)
    return result


def potential_threshold_direct(spec: PotentialSpec, grid: int = 4000, tol: float = 1e-9) -> float:
    """Slow route: largest ``lam`` with ``U_s(x, lam) > 0`` on all of ``(0, x_max]``.

    Equivalent to the fixed-point-potential route; kept for verification.
    """
    xs = np.linspace(0.0, spec.x_max, grid + 1)[1:]
    g = np.asarray(g_eval(spec.tail, xs))
    base = xs * g - np.asarray(g_integral(spec.tail, xs))
    gv = g**spec.v / spec.v
    positive = lambda lam: bool(np.all(base - lam * gv > 0))  # noqa: E731
    if positive(spec.lam_max):
        return spec.lam_max
    lo, hi, _ = bisect_bracket(positive, 0.0, spec.lam_max, tol, predicate=True, f_lo=True, f_hi=False)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# closed-form bounds


def weight_pulling(spec, model: str | None = None) -> float:
    """``v sum_i rho_i a_i / n_i`` with ``a_i = d_i - 1`` (BEC) or ``t_i`` (BSC).

    ``spec`` is an EnsembleSpec (then ``model`` picks ``bec-bdd``/``bsc-mf``)
    or a PotentialSpec / ``(TailSpec, v)`` pair, whose tail starts are used.
    """
    if isinstance(spec, EnsembleSpec):
        if model in (None, "bec-bdd", "BEC"):
            loads = [c.d - 1 for c in spec.codes]
        elif model in ("bsc-mf", "BSC", "beyond-bdd"):
            loads = [c.t for c in spec.codes]
        else:
            raise ConfigurationError(f"unknown decoding model {model!r}")
        return spec.v * sum(r * a / c.n for r, a, c in zip(spec.rho, loads, spec.codes))
    if isinstance(spec, PotentialSpec):
        tail, v = spec.tail, spec.v
    else:
        tail, v = spec
    return v * sum(rho * a / n for rho, a, n in tail.components())


def bbd_profiles(code, t_m: int | None = None) -> tuple[DecodingProfile, DecodingProfile]:
    """Existence (``min(1, sigma)``) and fundamental-limit (``max(0, 1 - 1/sigma)``) profiles.

    ``t_m`` defaults to the first weight whose fundamental-limit entry
    exceeds ``1 - 1e-9``, capped at ``n_c``.
    """
    t_c = code.t
    if t_m is None:
        t_m = code.n
        for i in range(t_c + 1, code.n + 1):
            if sigma_bound(code.n, code.k, i) > 1.0 / PROFILE_SATURATION:
                t_m = i
                break
    if not t_c < t_m <= code.n:
        raise ValueError(f"need t_c < t_m <= n_c, got t_c={t_c}, t_m={t_m}, n_c={code.n}")
    existence, limit = {}, {}
    for i in range(t_c + 1, t_m + 1):
        sigma = sigma_bound(code.n, code.k, i)
        existence[i] = min(1.0, sigma)
        limit[i] = max(0.0, 1.0 - 1.0 / sigma) if sigma > 0 else 0.0
    return DecodingProfile(t_c, t_m, existence), DecodingProfile(t_c, t_m, limit)
