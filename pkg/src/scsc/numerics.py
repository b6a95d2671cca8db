"""Scalar special functions shared by the analysis modules.

Poisson and binomial masses, Poisson tails and their profile/mixture
variants (the ``g`` functions of the coupled recursion), closed-form tail
integrals, sphere-packing style ``sigma`` bounds, channel capacities and a
bisection root finder.

All functions are pure.  Tail functions accept numpy arrays for ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammainc, gammaln, logsumexp, xlogy

# log-domain switch points for the mass functions
LOG_DOMAIN_ALPHA = 700.0
LOG_DOMAIN_FACTORIAL = 170
LOG_DOMAIN_BINOMIAL_N = 1000

MIXTURE_WEIGHT_TOL = 1e-12

TAIL_KINDS = ("bdd-erasure", "bdd-error", "profile", "mixture")


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConfigurationError(ValueError):
    """Inconsistent combination of options."""


class BracketError(ValueError):
    """Bisection bracket does not contain a sign change."""


# ---------------------------------------------------------------------------
# mass functions


def poisson_pmf(i: int, alpha: float) -> float:
    """Poisson mass ``exp(-alpha) alpha**i / i!``."""
    if i < 0 or alpha < 0:
        raise DomainError(f"poisson_pmf needs i >= 0 and alpha >= 0, got i={i}, alpha={alpha}")
    i = int(i)
    if alpha > LOG_DOMAIN_ALPHA or i > LOG_DOMAIN_FACTORIAL:
        return float(np.exp(xlogy(i, alpha) - alpha - gammaln(i + 1)))
    return math.exp(-alpha) * alpha**i / math.factorial(i)


def poisson_pmf_array(i, alpha):
    """Vectorised Poisson mass, always evaluated in the log domain."""
    i = np.asarray(i, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return np.exp(xlogy(i, alpha) - alpha - gammaln(i + 1.0))


def binomial_pmf(i: int, n: int, p: float) -> float:
    """Binomial mass ``C(n, i) p**i (1-p)**(n-i)``."""
    if not 0 <= i <= n:
        raise DomainError(f"binomial_pmf needs 0 <= i <= n, got i={i}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binomial_pmf needs p in [0, 1], got {p}")
    if n > LOG_DOMAIN_BINOMIAL_N:
        log_c = gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
        return float(np.exp(log_c + xlogy(i, p) + xlogy(n - i, 1.0 - p)))
    # 0**0 == 1 in python, which is the convention wanted at p in {0, 1}
    return math.comb(n, i) * p**i * (1.0 - p) ** (n - i)


def binomial_tail(a: int, n: int, p):
    """``P(Bin(n, p) >= a)``, vectorised in ``p``."""
    from scipy.special import betainc

    p = np.asarray(p, dtype=float)
    if a <= 0:
        return np.ones_like(p)
    if a > n:
        return np.zeros_like(p)
    return betainc(a, n - a + 1, p)


# ---------------------------------------------------------------------------
# Poisson tails


def poisson_tail(a: int, n: int, x):
    """``pi(a, n, x) = P(Poisson(n x) >= a)``.

    Uses the regularized lower incomplete gamma function
    ``P(a, n x)``, which keeps full relative precision for tails far below
    machine epsilon.
    """
    if a < 0 or n < 1:
        raise DomainError(f"poisson_tail needs a >= 0 and n >= 1, got a={a}, n={n}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("poisson_tail needs x >= 0")
    if a == 0:
        out = np.ones_like(x_arr)
    else:
        out = gammainc(a, n * x_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DecodingProfile:
    """Fraction ``beta_i`` of weight-``i`` patterns a component decoder cannot correct.

    ``beta_i`` is 0 for ``i <= t_c`` and 1 for ``i > t_m``; ``beta`` holds the
    entries for ``t_c < i <= t_m`` (missing keys default to 1).
    """

    t_c: int
    t_m: int
    beta: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.t_c < 0 or self.t_m < self.t_c:
            raise DomainError(f"need 0 <= t_c <= t_m, got t_c={self.t_c}, t_m={self.t_m}")
        beta = {int(i): float(b) for i, b in dict(self.beta).items()}
        for i, b in beta.items():
            if not self.t_c < i <= self.t_m:
                raise DomainError(f"beta_{i} given outside (t_c, t_m] = ({self.t_c}, {self.t_m}]")
            if not 0.0 <= b <= 1.0:
                raise DomainError(f"beta_{i}={b} outside [0, 1]")
        object.__setattr__(self, "beta", beta)

    def __hash__(self):
        return hash((self.t_c, self.t_m, tuple(sorted(self.beta.items()))))

    def __call__(self, i: int) -> float:
        if i <= self.t_c:
            return 0.0
        if i > self.t_m:
            return 1.0
        return self.beta.get(int(i), 1.0)

    def as_array(self, upto: int) -> np.ndarray:
        """``beta_0 .. beta_upto`` as an array."""
        return np.array([self(i) for i in range(upto + 1)])

    @classmethod
    def bounded_distance(cls, t_c: int) -> "DecodingProfile":
        return cls(t_c=t_c, t_m=t_c)


def profile_tail(profile: DecodingProfile, a: int, n: int, x):
    """``pi_beta(a, n, x) = sum_{i >= a} beta_{i+1} Po[n x](i)``."""
    x_arr = np.asarray(x, dtype=float)
    # fold the trailing run of beta = 1 into a single complemented tail
    start = max(a, profile.t_m)
    while start > a and profile(start) == 1.0:
        start -= 1
    out = np.asarray(poisson_tail(start, n, x_arr), dtype=float)
    for i in range(a, start):
        b = profile(i + 1)
        if b:
            out = out + b * poisson_pmf_array(i, n * x_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TailSpec:
    """Selects the constraint-side function ``g`` of the recursion.

    kind
        ``bdd-erasure``  ``pi(d_c - 1, n_c, x)``
        ``bdd-error``    ``pi(t_c, n_c, x)``
        ``profile``      ``pi_beta(t_c, n_c, x)``
        ``mixture``      ``sum_i rho_i pi(a_i, n_i, x)``
    """

    kind: str
    a: int = 0
    n: int = 1
    profile: DecodingProfile | None = None
    mixture: tuple[tuple[float, int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise ConfigurationError(f"unknown tail kind {self.kind!r}")
        if self.kind == "profile" and self.profile is None:
            raise ConfigurationError("profile tail needs a DecodingProfile")
        if self.kind == "mixture":
            mix = tuple((float(r), int(a), int(n)) for r, a, n in self.mixture)
            if not mix:
                raise ConfigurationError("mixture tail needs at least one component")
            for r, a, n in mix:
                if r < 0 or a < 0 or n < 1:
                    raise DomainError(f"bad mixture component (rho={r}, a={a}, n={n})")
            if abs(sum(r for r, _, _ in mix) - 1.0) > MIXTURE_WEIGHT_TOL:
                raise DomainError("mixture weights must sum to 1")
            object.__setattr__(self, "mixture", mix)
        elif self.a < 0 or self.n < 1:
            raise DomainError(f"need a >= 0 and n >= 1, got a={self.a}, n={self.n}")

    @classmethod
    def bdd_erasure(cls, n_c: int, d_c: int) -> "TailSpec":
        return cls("bdd-erasure", a=d_c - 1, n=n_c)

    @classmethod
    def bdd_error(cls, n_c: int, d_c: int) -> "TailSpec":
        return cls("bdd-error", a=(d_c - 1) // 2, n=n_c)

    @classmethod
    def from_profile(cls, n_c: int, profile: DecodingProfile) -> "TailSpec":
        return cls("profile", a=profile.t_c, n=n_c, profile=profile)

    @classmethod
    def from_mixture(cls, components: Sequence[tuple[float, int, int]]) -> "TailSpec":
        """``components`` are ``(rho_i, a_i, n_i)`` triples."""
        return cls("mixture", mixture=tuple(components))

    def components(self) -> tuple[tuple[float, int, int], ...]:
        """``(weight, tail start, length)`` triples; one entry unless a mixture."""
        if self.kind == "mixture":
            return self.mixture
        return ((1.0, self.a, self.n),)

    @property
    def has_closed_form_integral(self) -> bool:
        return self.kind != "profile"


def g_eval(spec: TailSpec, x):
    """Evaluate the tail function selected by ``spec`` at ``x``."""
    if spec.kind == "profile":
        if spec.profile is None:
            raise ConfigurationError("profile tail without a profile")
        return profile_tail(spec.profile, spec.a, spec.n, x)
    if spec.kind == "mixture":
        x_arr = np.asarray(x, dtype=float)
        out = np.zeros_like(x_arr)
        for rho, a, n in spec.mixture:
            if rho:
                out = out + rho * poisson_tail(a, n, x_arr)
        return float(out) if out.ndim == 0 else out
    return poisson_tail(spec.a, spec.n, x)


def tail_integral(a: int, n: int, x):
    """``int_0^x pi(a, n, z) dz``.

    Equal to ``x - (1/n) sum_{j<a} pi(j+1, n, x)``; evaluated as
    ``x pi(a, n, x) - (a/n) pi(a+1, n, x)``, which avoids the cancellation
    of the sum form for small ``n x``.
    """
    x_arr = np.asarray(x, dtype=float)
    out = x_arr * poisson_tail(a, n, x_arr) - (a / n) * poisson_tail(a + 1, n, x_arr)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def g_integral(spec: TailSpec, x):
    """``int_0^x g(z) dz`` for the closed-form tail kinds."""
    if not spec.has_closed_form_integral:
        raise ConfigurationError("no closed-form integral for profile tails")
    x_arr = np.asarray(x, dtype=float)
    out = np.zeros_like(x_arr)
    for rho, a, n in spec.components():
        if rho:
            out = out + rho * tail_integral(a, n, x_arr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# bounds and capacities


def log_sigma_bound(n: int, k: int, i: int) -> float:
    """Natural log of ``sigma(n, k, i)``."""
    if not 0 <= k <= n or not 0 <= i <= n:
        raise DomainError(f"need 0 <= k <= n and 0 <= i <= n, got n={n}, k={k}, i={i}")
    j = np.arange(i + 1)
    log_binom = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
    return float(logsumexp(log_binom) + (k - n) * math.log(2.0))


def sigma_bound(n: int, k: int, i: int) -> float:
    """``sigma(n, k, i) = 2**(k-n) sum_{j<=i} C(n, j)``.

    Computed as a log-sum-exp of log-binomials; the result is ``inf`` only if
    the true value exceeds the double range.
    """
    with np.errstate(over="ignore"):
        return float(np.exp(log_sigma_bound(n, k, i)))


def binary_entropy(p):
    """``h2(p)`` in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    out = -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / math.log(2.0)
    return float(out) if out.ndim == 0 else out


def capacity(channel: str, p: float) -> float:
    """Capacity of the BEC or BSC with parameter ``p``."""
    ch = channel.upper()
    if ch == "BEC":
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"BEC erasure probability {p} outside [0, 1]")
        return 1.0 - p
    if ch == "BSC":
        if not 0.0 <= p <= 0.5:
            raise DomainError(f"BSC crossover probability {p} outside [0, 0.5]")
        return 1.0 - binary_entropy(p)
    raise DomainError(f"unknown channel {channel!r}")


# ---------------------------------------------------------------------------
# root finding


def bisect_bracket(
    f: Callable[[float], object],
    lo: float,
    hi: float,
    tol: float,
    *,
    predicate: bool = False,
    f_lo=None,
    f_hi=None,
) -> tuple[float, float, int]:
    """Shrink ``[lo, hi]`` around a sign change (or predicate flip).

    Returns ``(lo, hi, evaluations)`` with ``hi - lo <= 2 tol``.  Known
    endpoint values can be passed in to save evaluations.
    """
    if not lo < hi:
        raise BracketError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0:
        raise DomainError("tol must be positive")
    evals = 0
    if f_lo is None:
        f_lo = f(lo)
        evals += 1
    if f_hi is None:
        f_hi = f(hi)
        evals += 1

    if predicate:
        side_lo = bool(f_lo)
        if side_lo == bool(f_hi):
            raise BracketError(f"predicate has the same value {side_lo} at both ends")
        same_as_lo = lambda val: bool(val) == side_lo  # noqa: E731
    else:
        s_lo = np.sign(f_lo)
        s_hi = np.sign(f_hi)
        if s_lo == 0:
            return lo, lo, evals
        if s_hi == 0:
            return hi, hi, evals
        if s_lo == s_hi:
            raise BracketError(f"no sign change on [{lo}, {hi}]")
        same_as_lo = lambda val: np.sign(val) == s_lo  # noqa: E731

    while hi - lo > 2 * tol:
        mid = 0.5 * (lo + hi)
        val = f(mid)
        evals += 1
        if not predicate and np.sign(val) == 0:
            return mid, mid, evals
        if same_as_lo(val):
            lo = mid
        else:
            hi = mid
    return lo, hi, evals


def bisect(f: Callable[[float], object], lo: float, hi: float, tol: float, *, predicate: bool = False) -> float:
    """Point within ``tol`` of a sign change of ``f`` on ``[lo, hi]``.

    In predicate mode ``f`` returns booleans and the boundary between its
    two values is located instead.
    """
    a, b, _ = bisect_bracket(f, lo, hi, tol, predicate=predicate)
    return 0.5 * (a + b)
