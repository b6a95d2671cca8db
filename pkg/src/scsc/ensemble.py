"""Spatially-coupled split-component ensembles.

An ensemble places ``M_i`` constraint nodes of each component code at every
spatial index ``j`` in ``[L + w - 1]`` and ``N`` degree-``v`` variable nodes
at every index ``k`` in ``[L]``.  The half-edges of a constraint node are
split into ``w`` contiguous type segments; the type-``tau`` segment of a
node at index ``j`` is wired, through the interleaver of index ``j - tau``,
to variable half-edges at that index.  Bundles whose partner index falls
outside ``[L]`` are suppressed.

Graph layout
------------
Constraint ids are ``j * M_total + m`` where ``m`` runs over component
codes in declaration order.  Edge ids are variable half-edge ids
``(k * N + i) * v + h``; edge ``k * N * v + s`` connects to constraint
half-edge ``perm[k][s]`` of the concatenation
``bundle(type 0, index k) | bundle(type 1, index k+1) | ...``, each bundle
listing the type segment of every constraint node at that index in label
order.
"""
from __future__ import annotations

import gzip
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln

GRAPH_FORMAT = "scsc-codegraph"
GRAPH_FORMAT_VERSION = 1
# above this many half-edges the decoupling probability is computed in log domain
EXACT_FACTORIAL_LIMIT = 2000


class EnsembleValidationError(ValueError):
    """Raised with the full list of violated ensemble constraints."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ComponentCodeSpec:
    """Binary linear ``(n, k, d)`` component code."""

    n: int
    k: int
    d: int

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise EnsembleValidationError(errors)

    def problems(self) -> list[str]:
        errors = []
        if not 1 <= self.k <= self.n:
            errors.append(f"component code needs 1 <= k_c <= n_c, got ({self.n},{self.k},{self.d})")
        if not 2 <= self.d <= self.n:
            errors.append(f"component code needs 2 <= d_c <= n_c, got ({self.n},{self.k},{self.d})")
        return errors

    @property
    def t(self) -> int:
        """Unique decoding radius."""
        return (self.d - 1) // 2

    @property
    def rate(self) -> float:
        return self.k / self.n

    def label(self) -> str:
        return f"({self.n},{self.k},{self.d})"

    @classmethod
    def parse(cls, text: str) -> "ComponentCodeSpec":
        parts = [int(s) for s in text.replace("(", "").replace(")", "").split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected n,k,d, got {text!r}")
        return cls(*parts)


def shortened_bch(m: int, t: int) -> ComponentCodeSpec:
    """BCH code of length ``2**m - 1`` shortened by one bit."""
    n = 2**m - 2
    return ComponentCodeSpec(n, n - m * t, 2 * t + 1)


def primitive_bch(m: int, t: int) -> ComponentCodeSpec:
    n = 2**m - 1
    return ComponentCodeSpec(n, n - m * t, 2 * t + 1)


@dataclass(frozen=True)
class EnsembleSpec:
    """Mixture ensemble ``E(T, v, M, w)``.

    ``components`` holds ``(code, multiplicity)`` pairs; a single-code
    ensemble has one entry.
    """

    components: tuple[tuple[ComponentCodeSpec, int], ...]
    v: int
    w: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple((c, int(m)) for c, m in self.components))

    @classmethod
    def single(cls, code: ComponentCodeSpec, M: int, v: int, w: int) -> "EnsembleSpec":
        return cls(((code, M),), v, w)

    @property
    def codes(self) -> tuple[ComponentCodeSpec, ...]:
        return tuple(c for c, _ in self.components)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.components)

    @property
    def T(self) -> int:
        return len(self.components)

    @property
    def M_total(self) -> int:
        return sum(self.multiplicities)

    @property
    def edges_per_index(self) -> int:
        """``sum_i M_i n_i`` = ``N v``."""
        return sum(c.n * m for c, m in self.components)

    @property
    def N(self) -> int:
        """Variable nodes per spatial index (floor if the balance is not integral)."""
        return self.edges_per_index // self.v

    @property
    def rho(self) -> tuple[float, ...]:
        total = self.edges_per_index
        return tuple(c.n * m / total for c, m in self.components)

    def problems(self) -> list[str]:
        errors = []
        if not self.components:
            return ["ensemble needs at least one component code"]
        for code, m in self.components:
            errors.extend(code.problems())
            if m < 1:
                errors.append(f"multiplicity of {code.label()} must be >= 1, got {m}")
        if self.v < 2:
            errors.append(f"variable degree v must be >= 2, got {self.v}")
        if self.w < 2:
            errors.append(f"coupling width w must be >= 2, got {self.w}")
        else:
            for code in self.codes:
                if code.n % self.w:
                    errors.append(f"w must divide n_c: w={self.w}, n_c={code.n}")
        if self.v >= 1 and self.edges_per_index % self.v:
            errors.append(f"N = sum M_i n_i / v = {self.edges_per_index}/{self.v} is not an integer")
        if self.v >= 2 and all(m >= 1 for m in self.multiplicities):
            if design_rate(self, math.inf) <= 0:
                errors.append("nonpositive design rate: need sum rho_i R_i > 1 - 1/v")
        return errors

    def to_dict(self) -> dict:
        return {
            "components": [{"n": c.n, "k": c.k, "d": c.d, "M": m} for c, m in self.components],
            "v": self.v,
            "w": self.w,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        comps = tuple((ComponentCodeSpec(c["n"], c["k"], c["d"]), c["M"]) for c in data["components"])
        return cls(comps, int(data["v"]), int(data["w"]))

    def label(self) -> str:
        return "+".join(f"{m}x{c.label()}" for c, m in self.components)


def validate(spec: EnsembleSpec) -> EnsembleSpec:
    """Return ``spec`` if every ensemble constraint holds, else raise with all violations."""
    errors = spec.problems()
    if errors:
        raise EnsembleValidationError(errors)
    return spec


def staircase_spec(code: ComponentCodeSpec) -> EnsembleSpec:
    """Staircase-code parameters ``M = n_c/2``, ``w = v = 2``."""
    if code.n % 2:
        raise ValueError(f"staircase codes need even n_c, got {code.n}")
    return EnsembleSpec.single(code, code.n // 2, v=2, w=2)


def design_rate(spec: EnsembleSpec, L: float = math.inf) -> float:
    """Design rate for spatial length ``L`` (``math.inf`` for the limit)."""
    if math.isinf(L):
        mean_rate = sum(r * c.rate for r, c in zip(spec.rho, spec.codes))
        return 1.0 - spec.v * (1.0 - mean_rate)
    if L < 1:
        raise ValueError("L must be >= 1")
    parity = sum(m * (c.n - c.k) for c, m in spec.components)
    N = spec.edges_per_index / spec.v
    return 1.0 - (L + spec.w - 1) * parity / (L * N)


def mixture_rate(codes: Sequence[ComponentCodeSpec], rho: Sequence[float], v: int) -> float:
    """Asymptotic rate of a mixture given its weights directly."""
    return 1.0 - v * (1.0 - sum(r * c.rate for r, c in zip(rho, codes)))


# ---------------------------------------------------------------------------
# seeds


def derive_seed(master: int, *keys: int) -> int:
    """64-bit seed derived from ``master`` and a key path, independent of call order."""
    state = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def make_rng(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys)))


# ---------------------------------------------------------------------------
# sampled graphs


@dataclass(frozen=True, eq=False)
class CodeGraph:
    """One sampled code graph: a permutation of size ``N v`` per spatial index."""

    spec: EnsembleSpec
    L: int
    perms: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perms = np.ascontiguousarray(self.perms, dtype=np.int64)
        perms.setflags(write=False)
        object.__setattr__(self, "perms", perms)
        if perms.shape != (self.L, self.spec.edges_per_index):
            raise ValueError(f"permutation array has shape {perms.shape}, expected {(self.L, self.spec.edges_per_index)}")

    def __eq__(self, other):
        if not isinstance(other, CodeGraph):
            return NotImplemented
        return self.spec == other.spec and self.L == other.L and np.array_equal(self.perms, other.perms)

    # -- sizes
    @property
    def w(self) -> int:
        return self.spec.w

    @property
    def v(self) -> int:
        return self.spec.v

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def n_indices(self) -> int:
        """Constraint spatial indices ``L + w - 1``."""
        return self.L + self.spec.w - 1

    @property
    def n_variables(self) -> int:
        return self.L * self.N

    @property
    def n_constraints(self) -> int:
        return self.n_indices * self.spec.M_total

    @property
    def n_edges(self) -> int:
        return self.L * self.N * self.v

    # -- per-label layout
    @cached_property
    def constraint_component(self) -> np.ndarray:
        """Component-code index of each constraint label ``m`` in ``[M_total]``."""
        return np.repeat(np.arange(self.spec.T), self.spec.multiplicities)

    @cached_property
    def _bundle_layout(self) -> tuple[np.ndarray, np.ndarray]:
        # for an offset inside a bundle: constraint label and slot offset within the type segment
        labels, seg = [], []
        for m, comp in enumerate(self.constraint_component):
            size = self.spec.codes[comp].n // self.w
            labels.append(np.full(size, m))
            seg.append(np.arange(size))
        return np.concatenate(labels), np.concatenate(seg)

    @cached_property
    def _edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        nv = self.spec.edges_per_index
        bundle = nv // self.w
        labels, seg = self._bundle_layout
        target = self.perms  # (L, Nv)
        tau = target // bundle
        off = target % bundle
        k = np.arange(self.L)[:, None]
        con = (k + tau) * self.spec.M_total + labels[off]
        seg_len = np.array([c.n // self.w for c in self.spec.codes])[self.constraint_component][labels[off]]
        slot = tau * seg_len + seg[off]
        var = np.repeat(np.arange(self.n_variables), self.v)
        out = (var, con.ravel(), tau.ravel(), slot.ravel())
        for arr in out:
            arr.setflags(write=False)
        return out

    @property
    def edge_var(self) -> np.ndarray:
        return self._edge_arrays[0]

    @property
    def edge_con(self) -> np.ndarray:
        return self._edge_arrays[1]

    @property
    def edge_type(self) -> np.ndarray:
        return self._edge_arrays[2]

    @property
    def edge_slot(self) -> np.ndarray:
        """Bit position of the edge inside its component codeword."""
        return self._edge_arrays[3]

    def constraint_index(self, con) -> np.ndarray:
        return np.asarray(con) // self.spec.M_total

    def variable_index(self, var) -> np.ndarray:
        return np.asarray(var) // self.N

    @cached_property
    def constraint_code(self) -> np.ndarray:
        """Component-code index of every constraint id."""
        return np.tile(self.constraint_component, self.n_indices)

    def constraint_attr(self, name: str) -> np.ndarray:
        """Per-constraint array of a component attribute (``n``, ``k``, ``d``, ``t``)."""
        vals = np.array([getattr(c, name) for c in self.spec.codes])
        return vals[self.constraint_code]

    def suppressed(self, j: int, tau: int) -> bool:
        """Whether the type-``tau`` bundle at constraint index ``j`` is suppressed."""
        return not 0 <= j - tau < self.L

    @property
    def suppressed_mask(self) -> np.ndarray:
        j = np.arange(self.n_indices)[:, None]
        tau = np.arange(self.w)[None, :]
        return (j - tau < 0) | (j - tau >= self.L)

    def degree_types(self, edges=None) -> np.ndarray:
        """``(n_constraints, w)`` counts of edges of each type, over ``edges`` (default: all)."""
        con = self.edge_con if edges is None else self.edge_con[edges]
        tau = self.edge_type if edges is None else self.edge_type[edges]
        counts = np.bincount(con * self.w + tau, minlength=self.n_constraints * self.w)
        return counts.reshape(self.n_constraints, self.w)

    # -- serialization
    def to_dict(self) -> dict:
        return {
            "format": GRAPH_FORMAT,
            "version": GRAPH_FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "L": self.L,
            "seed": self.seed,
            "permutations": self.perms.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodeGraph":
        if data.get("format") != GRAPH_FORMAT:
            raise ValueError(f"not a {GRAPH_FORMAT} document")
        if data.get("version") != GRAPH_FORMAT_VERSION:
            raise ValueError(f"unsupported {GRAPH_FORMAT} version {data.get('version')}")
        spec = validate(EnsembleSpec.from_dict(data["spec"]))
        return cls(spec, int(data["L"]), np.asarray(data["permutations"], dtype=np.int64), data.get("seed"))

    def save(self, path) -> None:
        path = Path(path)
        text = json.dumps(self.to_dict(), separators=(",", ":"))
        if path.suffix == ".gz":
            with gzip.open(path, "wt", encoding="utf-8") as fh:
                fh.write(text)
        else:
            path.write_text(text, encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CodeGraph":
        path = Path(path)
        if path.suffix == ".gz":
            with gzip.open(path, "rt", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def sample_graph(spec: EnsembleSpec, L: int, seed: int) -> CodeGraph:
    """Sample one interleaver uniformly and independently per spatial index."""
    validate(spec)
    if L < spec.w:
        raise ValueError(f"need L >= w, got L={L}, w={spec.w}")
    nv = spec.edges_per_index
    perms = np.empty((L, nv), dtype=np.int64)
    for k in range(L):
        perms[k] = make_rng(seed, k).permutation(nv)
    return CodeGraph(spec, L, perms, seed)


# ---------------------------------------------------------------------------
# degree-type distributions


def empirical_initial_dd(graph: CodeGraph, erased: np.ndarray, k: int) -> Counter:
    """Histogram of degree-type vectors of the constraint nodes at index ``k``.

    Only edges of erased variables count towards the degree type.
    """
    erased = np.asarray(erased, dtype=bool)
    live = erased[graph.edge_var]
    types = graph.degree_types(np.flatnonzero(live))
    m = graph.spec.M_total
    block = types[k * m : (k + 1) * m]
    return Counter(map(tuple, block.tolist()))


def expected_initial_dd(code: ComponentCodeSpec, M: int, w: int, L: int, p: float, k: int, degree_type) -> float:
    """Mean count ``M prod_tau Bi[n_c/w, p I[0 <= k - tau < L]](i_tau)`` for one degree type."""
    from .numerics import binomial_pmf

    out = float(M)
    for tau, i in enumerate(degree_type):
        q = p if 0 <= k - tau < L else 0.0
        out *= binomial_pmf(int(i), code.n // w, q)
    return out


# ---------------------------------------------------------------------------
# decoupling interleavers


def log_decoupling_probability(N: int, v: int) -> float:
    return float(gammaln(N + 1) + N * gammaln(v + 1) - gammaln(v * N + 1))


def decoupling_probability(N: int, v: int) -> float:
    """``N! (v!)^N / (vN)!``: chance a uniform interleaver is decoupling.

    Exact when every bundle holds ``v`` half-edges; see
    :func:`decoupling_probability_bundles` for general bundle sizes.
    """
    if N < 1 or v < 2:
        raise ValueError(f"need N >= 1 and v >= 2, got N={N}, v={v}")
    if N * v <= EXACT_FACTORIAL_LIMIT:
        return float(decoupling_fraction(N, v))
    return math.exp(log_decoupling_probability(N, v))


def decoupling_fraction(N: int, v: int) -> Fraction:
    """Exact rational ``N! (v!)^N / (vN)!``."""
    return Fraction(math.factorial(N) * math.factorial(v) ** N, math.factorial(v * N))


def decoupling_probability_bundles(N: int, v: int, w: int) -> float:
    """Exact decoupling probability for ``w`` equal bundles of ``N v / w`` half-edges."""
    if (N * v) % w:
        raise ValueError("w must divide N v")
    if N % w:
        return 0.0
    per = N // w
    bundle = N * v // w
    log_count = gammaln(N + 1) - w * gammaln(per + 1) + w * gammaln(bundle + 1)
    return float(np.exp(log_count - gammaln(N * v + 1)))


def decoupling_upper_bound(N: int, v: int) -> float:
    """Stirling-type upper bound ``N^{-(v-1)N} v^{-1/2} exp((v-1)N + (v-1)/(12vN+1))``."""
    log_b = -(v - 1) * N * math.log(N) - 0.5 * math.log(v) + (v - 1) * N + (v - 1) / (12 * v * N + 1)
    return math.exp(log_b)


def enumerate_decoupling(N: int, v: int, w: int) -> tuple[int, int]:
    """Brute-force ``(decoupling, total)`` over all ``(vN)!`` interleavers."""
    size = N * v
    if size > 10:
        raise ValueError("enumeration limited to N v <= 10")
    bundle = size // w
    hits = total = 0
    for perm in itertools.permutations(range(size)):
        total += 1
        ok = True
        for var in range(N):
            b = {perm[var * v + h] // bundle for h in range(v)}
            if len(b) != 1:
                ok = False
                break
        hits += ok
    return hits, total
