"""Coupled vector recursion ``y <- A^T f(A g(y), p)`` and recursion thresholds.

``y`` lives on the ``L + w - 1`` constraint indices, ``x = A g(y)`` on the
``L`` variable indices, ``f(x, p) = p x^(v-1)`` and ``g`` is the tail
function selected by a :class:`~scsc.numerics.TailSpec`.  Multiplication by
the banded coupling matrix ``A`` is a length-``w`` moving average, so it is
done by convolution and ``A`` itself is only materialized sparsely.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import math

import numba
import numpy as np
import scipy.sparse as sp

from .numerics import TailSpec, binomial_tail, bisect_bracket, g_eval
from .results import ThresholdResult

log = logging.getLogger(__name__)

TOL_FIX = 1e-10
TOL_P = 1e-7
MAX_ITER = 100_000
DEFAULT_L = 200
# slack for floating-point rounding in the monotonicity assertion
MONOTONE_SLACK = 1e-13

ZERO = "zero"
FIXED_POINT = "fixed-point"
INDETERMINATE = "indeterminate"


def coupling_matrix(L: int, w: int) -> sp.csr_matrix:
    """Sparse ``L x (L+w-1)`` matrix with ``A[i, j] = 1/w`` for ``j - i`` in ``[w]``."""
    if L < 1 or w < 1:
        raise ValueError(f"need L >= 1 and w >= 1, got L={L}, w={w}")
    diags = [np.full(L, 1.0 / w) for _ in range(w)]
    return sp.diags(diags, list(range(w)), shape=(L, L + w - 1), format="csr")


def couple(z: np.ndarray, w: int) -> np.ndarray:
    """``A z`` for ``z`` of length ``L + w - 1``."""
    return np.convolve(z, np.full(w, 1.0 / w), mode="valid")


def couple_transpose(u: np.ndarray, w: int) -> np.ndarray:
    """``A^T u`` for ``u`` of length ``L``."""
    return np.convolve(u, np.full(w, 1.0 / w), mode="full")


@dataclass(frozen=True)
class RecursionSpec:
    tail: TailSpec
    v: int
    L: int
    w: int
    p: float = 0.0

    def __post_init__(self):
        if self.L < 1 or self.w < 1:
            raise ValueError(f"need L >= 1 and w >= 1, got L={self.L}, w={self.w}")
        if self.v < 2:
            raise ValueError(f"need v >= 2, got {self.v}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    def with_p(self, p: float) -> "RecursionSpec":
        return replace(self, p=float(p))

    @property
    def upper_bound(self) -> bool:
        """Profile tails only give an upper-bounding recursion."""
        return self.tail.kind == "profile"


@dataclass
class RecursionState:
    y: np.ndarray
    q: int = 0


def initial_state(spec: RecursionSpec) -> RecursionState:
    """``y^0 = A^T f(1, p)``: every variable initially unresolved."""
    y = couple_transpose(np.full(spec.L, spec.p), spec.w)
    return RecursionState(y, 0)


def step(state: RecursionState, spec: RecursionSpec) -> RecursionState:
    x = couple(np.asarray(g_eval(spec.tail, state.y), dtype=float), spec.w)
    y = couple_transpose(spec.p * x ** (spec.v - 1), spec.w)
    return RecursionState(y, state.q + 1)


@dataclass
class RecursionRun:
    status: str
    y: np.ndarray
    iterations: int

    @property
    def converged_to_zero(self) -> bool:
        return self.status == ZERO


# ---------------------------------------------------------------------------
# compiled iteration loop
#
# g is packed as a mixture of components; component c contributes
# rho_c * (pi(s_c, n_c x) + sum_{i = a_c}^{s_c - 1} beta_c[i - a_c] Po[n_c x](i)).


def pack_tail(tail: TailSpec):
    comps = []
    if tail.kind == "profile":
        prof = tail.profile
        start = max(tail.a, prof.t_m)
        while start > tail.a and prof(start) == 1.0:
            start -= 1
        comps.append((1.0, tail.a, tail.n, start, [prof(i + 1) for i in range(tail.a, start)]))
    else:
        for rho, a, n in tail.components():
            if rho:
                comps.append((rho, a, n, a, []))
    width = max(1, max(len(c[4]) for c in comps))
    rho = np.array([c[0] for c in comps], dtype=np.float64)
    a = np.array([c[1] for c in comps], dtype=np.int64)
    n = np.array([c[2] for c in comps], dtype=np.float64)
    start = np.array([c[3] for c in comps], dtype=np.int64)
    beta = np.zeros((len(comps), width))
    for row, c in enumerate(comps):
        beta[row, : len(c[4])] = c[4]
    return rho, a, n, start, beta


@numba.njit(cache=True)
def _poisson_tail(s, alpha):
    if s <= 0:
        return 1.0
    if alpha <= 0.0:
        return 0.0
    if alpha < s + 1.0:
        # upper series, terms decrease geometrically
        term = math.exp(s * math.log(alpha) - alpha - math.lgamma(s + 1.0))
        total = term
        i = s
        while term > 1e-17 * total:
            i += 1
            term *= alpha / i
            total += term
        return min(total, 1.0)
    term = math.exp(-alpha)
    head = term
    for i in range(1, s):
        term *= alpha / i
        head += term
    return max(1.0 - head, 0.0)


@numba.njit(cache=True)
def _g_kernel(y, out, rho, a, n, start, beta):
    for j in range(y.shape[0]):
        total = 0.0
        for c in range(rho.shape[0]):
            alpha = n[c] * y[j]
            val = _poisson_tail(start[c], alpha)
            if alpha > 0.0 and start[c] > a[c]:
                term = math.exp(a[c] * math.log(alpha) - alpha - math.lgamma(a[c] + 1.0))
                for i in range(a[c], start[c]):
                    val += beta[c, i - a[c]] * term
                    term *= alpha / (i + 1)
            total += rho[c] * val
        out[j] = total


@numba.njit(cache=True)
def _run_kernel(y, p, v, w, tol, max_iter, slack, rho, a, n, start, beta):
    """Returns (status, iterations); status 0 zero, 1 fixed point, 2 indeterminate, -1 not monotone."""
    m = y.shape[0]
    L = m - w + 1
    gy = np.empty(m)
    fx = np.empty(L)
    new = np.empty(m)
    floor = math.sqrt(tol)
    inv_w = 1.0 / w
    q = 0
    while q < max_iter:
        _g_kernel(y, gy, rho, a, n, start, beta)
        for k in range(L):
            acc = 0.0
            for t in range(w):
                acc += gy[k + t]
            fx[k] = p * (acc * inv_w) ** (v - 1)
        delta = 0.0
        ymax = 0.0
        for j in range(m):
            acc = 0.0
            for t in range(w):
                k = j - t
                if 0 <= k < L:
                    acc += fx[k]
            acc *= inv_w
            if acc > y[j] + slack * (1.0 + y[j]):
                return -1, q + 1
            d = abs(acc - y[j])
            if d > delta:
                delta = d
            if acc > ymax:
                ymax = acc
            new[j] = acc
        y[:] = new
        q += 1
        if ymax < tol:
            return 0, q
        if delta < tol and ymax > floor:
            return 1, q
    return 2, q


_STATUS = {0: ZERO, 1: FIXED_POINT, 2: INDETERMINATE}


def run(spec: RecursionSpec, tol: float = TOL_FIX, max_iter: int = MAX_ITER, packed=None) -> RecursionRun:
    """Iterate from the all-ones start until the iterate settles.

    Zero is declared once every entry is below ``tol``.  A nonzero fixed
    point is declared when the update is below ``tol`` while the iterate
    is still above ``sqrt(tol)``; iterates in between keep running, since
    slow linear decay to zero also has small updates there.  The loop is
    compiled; :func:`step` is the plain reference for one iteration.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if packed is None:
        packed = pack_tail(spec.tail)
    y = initial_state(spec).y.copy()
    code, q = _run_kernel(y, float(spec.p), spec.v, spec.w, float(tol), int(max_iter), MONOTONE_SLACK, *packed)
    if code < 0:
        raise AssertionError(f"recursion iterate increased at iteration {q}")
    if code == 2:
        log.info("recursion hit max_iter=%d at p=%g without settling", max_iter, spec.p)
    return RecursionRun(_STATUS[code], y, q)


def recursion_threshold(
    tail: TailSpec,
    v: int,
    L: int = DEFAULT_L,
    w: int = 2,
    *,
    tol_p: float = TOL_P,
    tol_fix: float = TOL_FIX,
    max_iter: int = MAX_ITER,
    lo: float = 0.0,
    hi: float | None = None,
    channel: str | None = None,
) -> ThresholdResult:
    """Largest ``p`` for which the coupled recursion is driven to zero.

    Bisection on ``[lo, hi]``; ``hi`` defaults to 0.5 for error-type tails
    and 1 otherwise.  Runs that hit ``max_iter`` count as not converging
    during the bisection, but the reported interval runs from the largest
    ``p`` seen to converge to the smallest ``p`` seen to reach a nonzero
    fixed point, so undecided points widen the tolerance instead of
    biasing the estimate.
    """
    if channel is None:
        channel = "BEC" if tail.kind in ("bdd-erasure", "mixture") else "BSC"
    if hi is None:
        hi = 1.0 if channel == "BEC" else 0.5
    base = RecursionSpec(tail, v, L, w, lo)
    packed = pack_tail(tail)
    stats = {"evaluations": 0, "iterations": 0, "indeterminate": 0}
    settled_nonzero = []

    def decodes(p: float) -> bool:
        res = run(base.with_p(p), tol_fix, max_iter, packed)
        stats["evaluations"] += 1
        stats["iterations"] += res.iterations
        if res.status == INDETERMINATE:
            stats["indeterminate"] += 1
        elif res.status == FIXED_POINT:
            settled_nonzero.append(p)
        return res.converged_to_zero

    flags = []
    if not decodes(lo):
        raise ValueError(f"recursion does not converge to zero at the lower end p={lo}")
    if decodes(hi):
        flags.append("saturated")
        result = ThresholdResult(hi, "recursion", 0.0, channel, flags=flags)
    else:
        a, b, _ = bisect_bracket(decodes, lo, hi, tol_p, predicate=True, f_lo=True, f_hi=False)
        upper = min((q for q in settled_nonzero if q >= b), default=None)
        if upper is None:
            # nothing above the bracket settled: only the lower end is verified
            flags.append("upper-end-unverified")
            upper = b
        result = ThresholdResult(0.5 * (a + upper), "recursion", 0.5 * (upper - a), channel, flags=flags)
        result.diagnostics["bracket"] = [a, upper]
        if upper is b and stats["indeterminate"]:
            result.converged = False
    if stats["indeterminate"]:
        result.flags.append("indeterminate-evaluations")
    if tail.kind == "profile":
        result.upper_bound = True
        result.flags.append("upper-bound")
    result.diagnostics.update(stats, L=L, w=w, v=v, tol_fix=tol_fix, max_iter=max_iter)
    return result


# ---------------------------------------------------------------------------
# uncoupled system


def tail_for_codes(codes, rho=None, model: str = "bec-bdd", profile=None) -> TailSpec:
    """Tail function of a (mixture of) component codes under a decoding model."""
    codes = list(codes)
    if model == "beyond-bdd":
        if len(codes) != 1 or profile is None:
            raise ValueError("beyond-bdd tails need one code and a profile")
        return TailSpec.from_profile(codes[0].n, profile)
    if model not in ("bec-bdd", "bsc-mf"):
        raise ValueError(f"unknown decoding model {model!r}")
    starts = [c.d - 1 if model == "bec-bdd" else c.t for c in codes]
    if len(codes) == 1 and rho is None:
        kind = "bdd-erasure" if model == "bec-bdd" else "bdd-error"
        return TailSpec(kind, a=starts[0], n=codes[0].n)
    if rho is None:
        raise ValueError("mixtures need weights")
    return TailSpec.from_mixture([(r, a, c.n) for r, a, c in zip(rho, starts, codes)])


def binomial_g(a: int, n: int) -> Callable:
    """Single-system constraint update ``P(Bin(n-1, y) >= a)`` without the Poisson limit."""
    return lambda y: binomial_tail(a, n - 1, y)


def _g_callable(tail) -> Callable:
    if isinstance(tail, TailSpec):
        return lambda x: g_eval(tail, x)
    return tail


def single_system_fixed_point(tail, v: int, p: float, tol: float = 1e-12, max_iter: int = 10 * MAX_ITER) -> float:
    """Largest fixed point of ``x = p g(x)^(v-1)``, iterated down from ``x = p``.

    ``tail`` is a TailSpec or any nondecreasing callable ``g``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    g = _g_callable(tail)
    x = float(p)
    for _ in range(max_iter):
        if x < tol:
            return 0.0
        nxt = p * float(g(x)) ** (v - 1)
        if abs(nxt - x) < tol:
            return nxt if nxt >= np.sqrt(tol) else 0.0
        x = nxt
    log.warning("single-system iteration hit max_iter at p=%g", p)
    return x


def single_system_threshold(tail, v: int, tol_p: float = TOL_P, hi: float = 1.0) -> float:
    """Largest ``p`` at which the uncoupled system decodes."""
    decodes = lambda p: single_system_fixed_point(tail, v, p) == 0.0  # noqa: E731
    if decodes(hi):
        return hi
    a, b, _ = bisect_bracket(decodes, 0.0, hi, tol_p, predicate=True, f_lo=True, f_hi=False)
    return 0.5 * (a + b)


def export_fixed_point_csv(y: np.ndarray, path) -> None:
    """Write ``index,y_k`` rows for plotting a wave profile."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y_k"])
        for k, val in enumerate(np.asarray(y, dtype=float)):
            writer.writerow([k, repr(float(val))])
