"""Generalized peeling decoding on sampled code graphs.

Decoding is simulated at graph level under the all-zero codeword: a
variable hit by the channel keeps its ``v`` edges, every other variable's
edges are removed.  A constraint is *recoverable* when its residual degree
lies in the range its component decoder handles; peeling removes the edges
of recoverable constraints and then every edge of the variables they
touch.
"""
from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import CodeGraph, EnsembleSpec, derive_seed, make_rng, sample_graph, validate
from .numerics import BracketError, ConfigurationError, DecodingProfile, bisect_bracket
from .results import ThresholdResult

log = logging.getLogger(__name__)

MODEL_KINDS = ("bec-bdd", "bsc-mf", "beyond-bdd")
CHANNELS = ("BEC", "BSC")
# batch iterations allowed per unit of L * n_c before the run is reported as capped
ITERATION_CAP_FACTOR = 10
# verify edge balance after every batch iteration (off by default; tests switch it on)
CHECK_EDGE_BALANCE = False


@dataclass(frozen=True)
class DecodingModel:
    """Which residual degrees a component decoder resolves.

    ``sticky`` (beyond-bdd only) draws each constraint's acceptance uniform
    once instead of at every iteration.
    """

    kind: str = "bec-bdd"
    profile: DecodingProfile | None = None
    sticky: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown decoding model {self.kind!r}")
        if self.kind == "beyond-bdd" and self.profile is None:
            raise ConfigurationError("beyond-bdd decoding needs a profile")
        if self.kind != "beyond-bdd" and self.profile is not None:
            raise ConfigurationError(f"{self.kind} decoding takes no profile")
        if self.sticky and self.kind != "beyond-bdd":
            raise ConfigurationError("sticky draws only apply to beyond-bdd decoding")

    @property
    def channel(self) -> str:
        return "BEC" if self.kind == "bec-bdd" else "BSC"

    def thresholds(self, graph: CodeGraph) -> np.ndarray:
        """Largest always-recoverable degree for every constraint."""
        if self.kind == "bec-bdd":
            return graph.constraint_attr("d") - 1
        if self.kind == "beyond-bdd":
            if graph.spec.T != 1:
                raise ConfigurationError("beyond-bdd decoding supports single-code ensembles only")
            return np.full(graph.n_constraints, self.profile.t_c)
        return graph.constraint_attr("t")


@dataclass
class ResidualGraph:
    """Surviving edges (sorted ids into ``graph``'s edge arrays)."""

    graph: CodeGraph
    edges: np.ndarray
    p: float = 0.0
    channel: str = "BEC"

    @classmethod
    def from_erasures(cls, graph: CodeGraph, erased, p: float = 0.0, channel: str = "BEC") -> "ResidualGraph":
        erased = np.asarray(erased, dtype=bool)
        if erased.shape != (graph.n_variables,):
            raise ValueError("erasure mask must have one entry per variable")
        edges = np.flatnonzero(np.repeat(erased, graph.v))
        return cls(graph, edges, p, channel)

    @property
    def n_edges(self) -> int:
        return int(self.edges.size)

    def constraint_degree(self) -> np.ndarray:
        return np.bincount(self.graph.edge_con[self.edges], minlength=self.graph.n_constraints)

    def variable_degree(self) -> np.ndarray:
        return np.bincount(self.graph.edge_var[self.edges], minlength=self.graph.n_variables)

    def degree_types(self) -> np.ndarray:
        """``(n_constraints, w)`` residual degree per edge type."""
        return self.graph.degree_types(self.edges)

    def unrecovered(self) -> np.ndarray:
        """Per-variable flag: still has residual edges."""
        return self.variable_degree() > 0

    def restrict(self, edges) -> "ResidualGraph":
        return ResidualGraph(self.graph, np.sort(np.asarray(edges, dtype=np.int64)), self.p, self.channel)


def apply_channel(graph: CodeGraph, channel: str, p: float, seed: int) -> ResidualGraph:
    """Hit every variable independently with probability ``p``.

    Uses one uniform per variable, so for a fixed seed the hit sets are
    nested in ``p``.
    """
    if channel not in CHANNELS:
        raise ConfigurationError(f"unknown channel {channel!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    u = make_rng(seed).random(graph.n_variables)
    return ResidualGraph.from_erasures(graph, u < p, p, channel)


@dataclass
class DecodeOutcome:
    success: bool
    iterations: int
    residual_edges: int
    unrecovered_per_index: np.ndarray
    final_edges: np.ndarray = field(repr=False)
    capped: bool = False
    graph: CodeGraph | None = field(default=None, repr=False, compare=False)

    @property
    def unrecovered(self) -> int:
        return int(self.unrecovered_per_index.sum())

    def degree_type_histograms(self) -> list[dict[tuple, int]]:
        """Per constraint index, counts of residual degree-type vectors."""
        types = self.graph.degree_types(self.final_edges)
        m = self.graph.spec.M_total
        out = []
        for j in range(self.graph.n_indices):
            hist: dict[tuple, int] = defaultdict(int)
            for row in map(tuple, types[j * m : (j + 1) * m].tolist()):
                hist[row] += 1
            out.append(dict(hist))
        return out


def _outcome(graph: CodeGraph, edges: np.ndarray, iterations: int, capped: bool) -> DecodeOutcome:
    var = np.unique(graph.edge_var[edges])
    per_index = np.bincount(var // graph.N, minlength=graph.L)
    return DecodeOutcome(edges.size == 0, iterations, int(edges.size), per_index, edges, capped, graph)


def iteration_cap(graph: CodeGraph) -> int:
    return ITERATION_CAP_FACTOR * graph.L * max(c.n for c in graph.spec.codes)


def _assert_edge_balance(graph: CodeGraph, edges, ec, initial) -> None:
    # both sides of the graph count the same surviving edges, and no variable gains edges
    con_total = int(np.bincount(ec, minlength=graph.n_constraints).sum())
    var_now = np.bincount(graph.edge_var[edges], minlength=graph.n_variables)
    var_start = np.bincount(graph.edge_var[initial], minlength=graph.n_variables)
    assert con_total == int(var_now.sum()) == edges.size, "edge balance violated"
    assert np.all((var_now == 0) | (var_now == var_start)), "partially peeled variable"


def peel_batch(residual: ResidualGraph, model: DecodingModel, seed: int = 0, max_iter: int | None = None) -> DecodeOutcome:
    """Algorithm-1 peeling: each iteration clears every recoverable constraint at once."""
    graph = residual.graph
    cap = iteration_cap(graph) if max_iter is None else max_iter
    thr = model.thresholds(graph)
    edges = np.asarray(residual.edges, dtype=np.int64)
    ev = graph.edge_var[edges]
    ec = graph.edge_con[edges]
    beyond = model.kind == "beyond-bdd"
    if beyond:
        prof = model.profile
        accept_p = 1.0 - prof.as_array(prof.t_m)  # indexed by degree, valid up to t_m
        rng = make_rng(seed, 1)
        sticky_u = rng.random(graph.n_constraints) if model.sticky else None
    recovered = np.zeros(graph.n_variables, dtype=bool)
    iterations = 0
    capped = False
    while edges.size:
        deg = np.bincount(ec, minlength=graph.n_constraints)
        ok = (deg >= 1) & (deg <= thr)
        if beyond:
            mid = (deg > prof.t_c) & (deg <= prof.t_m)
            if mid.any():
                u = sticky_u if model.sticky else rng.random(graph.n_constraints)
                ok |= mid & (u < accept_p[np.minimum(deg, prof.t_m)])
        kill = ok[ec]
        if not kill.any():
            break
        if iterations >= cap:
            capped = True
            break
        # every live variable has full degree, so touching one recovers it
        recovered[ev[kill]] = True
        keep = ~recovered[ev]
        edges, ev, ec = edges[keep], ev[keep], ec[keep]
        iterations += 1
        if CHECK_EDGE_BALANCE:
            _assert_edge_balance(graph, edges, ec, residual.edges)
    return _outcome(graph, edges, iterations, capped)


def peel_incremental(
    residual: ResidualGraph, model: DecodingModel, seed: int = 0, max_steps: int | None = None
) -> DecodeOutcome:
    """Remove one uniformly chosen recoverable edge (and its variable) per step.

    ``max_steps`` stops early (the outcome is then marked capped).
    """
    if model.kind == "beyond-bdd":
        raise ConfigurationError("incremental decoding is defined for bec-bdd and bsc-mf only")
    graph = residual.graph
    rng = random.Random(seed)
    thr = model.thresholds(graph).tolist()
    max_thr = max(thr) if thr else 0
    edge_var = graph.edge_var
    edge_con = graph.edge_con
    v = graph.v

    # per-constraint edge lists with swap-remove
    con_edges: dict[int, list[int]] = defaultdict(list)
    pos: dict[int, int] = {}
    alive_edges = residual.edges.tolist()
    for e in alive_edges:
        c = int(edge_con[e])
        pos[e] = len(con_edges[c])
        con_edges[c].append(e)

    rec_list: list[int] = []
    rec_pos: dict[int, int] = {}

    def refresh(c: int) -> None:
        deg = len(con_edges[c])
        want = 1 <= deg <= thr[c]
        if want and c not in rec_pos:
            rec_pos[c] = len(rec_list)
            rec_list.append(c)
        elif not want and c in rec_pos:
            i = rec_pos.pop(c)
            last = rec_list.pop()
            if last != c:
                rec_list[i] = last
                rec_pos[last] = i

    def drop(e: int) -> int:
        c = int(edge_con[e])
        lst = con_edges[c]
        i = pos.pop(e)
        last = lst.pop()
        if last != e:
            lst[i] = last
            pos[last] = i
        return c

    for c in list(con_edges):
        refresh(c)

    steps = 0
    capped = False
    while rec_list:
        if max_steps is not None and steps >= max_steps:
            capped = True
            break
        # uniform over recoverable edges: constraint weighted by its degree
        while True:
            c = rec_list[rng.randrange(len(rec_list))]
            if rng.random() * max_thr < len(con_edges[c]):
                break
        e = con_edges[c][rng.randrange(len(con_edges[c]))]
        var = int(edge_var[e])
        touched = set()
        for h in range(v):
            ve = var * v + h
            if ve in pos:
                touched.add(drop(ve))
        for t in touched:
            refresh(t)
        steps += 1
    edges = np.array(sorted(pos), dtype=np.int64)
    return _outcome(graph, edges, steps, capped)


# ---------------------------------------------------------------------------
# trend equation


@dataclass
class TrendRow:
    index: int
    component: int
    degree_type: tuple[int, ...]
    predicted: float
    empirical: float
    std_error: float

    @property
    def z(self) -> float:
        diff = self.empirical - self.predicted
        if self.std_error == 0:
            return 0.0 if diff == 0 else float("inf")
        return diff / self.std_error


@dataclass
class TrendReport:
    k: int
    trials: int
    sub_edges: int
    recoverable_edges: int
    rows: list[TrendRow]

    def max_abs_z(self) -> float:
        return max((abs(r.z) for r in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "trials": self.trials,
            "sub_edges": self.sub_edges,
            "recoverable_edges": self.recoverable_edges,
            "rows": [asdict(r) for r in self.rows],
        }


def trend_check(
    residual: ResidualGraph, trials: int, seed: int, k: int | None = None, model: DecodingModel | None = None
) -> TrendReport:
    """Monte-Carlo test of the one-step expected change of un-recoverable degree types.

    Each trial takes the degree-type state of the residual and the live
    edges of sub-ensemble (interleaver) ``k``, picks a recoverable edge
    uniformly and ``v - 1`` further live edges uniformly without
    replacement (the configuration-model reading of the recovered
    variable's other edges), removes them and records the change of the
    counts of every un-recoverable degree type at indices ``k .. k+w-1``.
    ``k`` defaults to the interleaver with the most recoverable edges.
    """
    if trials < 2:
        raise ValueError("trend_check needs at least two trials")
    model = model or DecodingModel("bec-bdd")
    graph = residual.graph
    w, v = graph.w, graph.v
    m_tot = graph.spec.M_total
    nv = graph.spec.edges_per_index
    thr = model.thresholds(graph)
    types = residual.degree_types()
    deg = types.sum(axis=1)
    recoverable_con = (deg >= 1) & (deg <= thr)

    edges = residual.edges
    by_k = edges // nv
    if k is None:
        counts = np.bincount(by_k[recoverable_con[graph.edge_con[edges]]], minlength=graph.L)
        k = int(np.argmax(counts))
    sub = edges[by_k == k]
    F = sub.size
    sub_con = graph.edge_con[sub]
    sub_tau = graph.edge_type[sub]
    rec_idx = np.flatnonzero(recoverable_con[sub_con])
    if rec_idx.size == 0:
        raise ValueError(f"no recoverable edge in sub-ensemble {k}")
    if F < v:
        raise ValueError("sub-ensemble has fewer live edges than the variable degree")

    rng = make_rng(seed)
    picks = np.empty((trials, v), dtype=np.int64)
    picks[:, 0] = rec_idx[rng.integers(0, rec_idx.size, trials)]
    for h in range(1, v):
        # uniform over the F - h edges not yet taken: draw a rank and skip taken ones
        draw = rng.integers(0, F - h, trials)
        taken = np.sort(picks[:, :h], axis=1)
        for col in range(h):
            draw = draw + (draw >= taken[:, col])
        picks[:, h] = draw

    con = sub_con[picks]  # (trials, v)
    tau = sub_tau[picks]
    same = con[:, :, None] == con[:, None, :]
    onehot = np.eye(w, dtype=np.int64)[tau]  # (trials, v, w)
    dec = np.einsum("tab,tbw->taw", same.astype(np.int64), onehot)
    first = ~np.any(np.tril(same, k=-1), axis=2)
    old = types[con]
    new = old - dec

    comp = graph.constraint_code[con]
    thr_c = thr[con]
    j_rel = con // m_tot - k
    base = int(types.max()) + 2
    radix = base ** np.arange(w)

    def key(vec):
        return (j_rel * graph.spec.T + comp) * base**w + (vec * radix).sum(axis=2)

    old_in = first & (old.sum(axis=2) > thr_c)
    new_in = first & (new.sum(axis=2) > thr_c)
    keys = np.concatenate([key(old)[old_in], key(new)[new_in]])
    vals = np.concatenate([-np.ones(old_in.sum()), np.ones(new_in.sum())])
    trial_of = np.concatenate([np.nonzero(old_in)[0], np.nonzero(new_in)[0]])

    # per-(trial, key) net change, then moments per key
    key_span = int(keys.max(initial=0)) + 1
    uniq, inv = np.unique(trial_of * key_span + keys, return_inverse=True)
    net = np.bincount(inv, weights=vals)
    key_of = uniq % key_span
    stats: dict[int, list[float]] = {}
    for kk, d in zip(key_of.tolist(), net.tolist()):
        s = stats.setdefault(kk, [0.0, 0.0])
        s[0] += d
        s[1] += d * d

    # predictions from the state counts at indices k .. k+w-1
    rows = []
    counts: dict[tuple, int] = defaultdict(int)
    for tau_idx in range(w):
        j = k + tau_idx
        block = slice(j * m_tot, (j + 1) * m_tot)
        for comp_i, vec in zip(graph.constraint_code[block].tolist(), types[block].tolist()):
            counts[(tau_idx, comp_i, tuple(vec))] += 1
    candidates = set()
    for (tau_idx, comp_i, vec) in counts:
        candidates.add((tau_idx, comp_i, vec))
        lower = list(vec)
        if lower[tau_idx] > 0:
            lower[tau_idx] -= 1
            candidates.add((tau_idx, comp_i, tuple(lower)))
    thr_by_comp = dict(zip(graph.constraint_component.tolist(), thr[:m_tot].tolist()))
    for kk in stats:
        tail = kk % base**w
        head = kk // base**w
        vec = tuple(int(tail // base**i % base) for i in range(w))
        candidates.add((int(head // graph.spec.T), int(head % graph.spec.T), vec))
    for tau_idx, comp_i, vec in sorted(candidates):
        if sum(vec) <= thr_by_comp[comp_i]:
            continue
        up = list(vec)
        up[tau_idx] += 1
        pred = (-vec[tau_idx] * counts.get((tau_idx, comp_i, vec), 0) + (vec[tau_idx] + 1) * counts.get((tau_idx, comp_i, tuple(up)), 0)) * (v - 1) / F
        kk = (tau_idx * graph.spec.T + comp_i) * base**w + sum(x * base**i for i, x in enumerate(vec))
        s1, s2 = stats.get(kk, (0.0, 0.0))
        mean = s1 / trials
        var = max(s2 / trials - mean * mean, 0.0) * trials / (trials - 1)
        # a {-1, 0, 1}-valued change with mean mu has variance at least |mu| - mu^2
        var = max(var, abs(pred) - pred * pred)
        if pred == 0 and s2 == 0:
            continue
        rows.append(TrendRow(k + tau_idx, comp_i, vec, pred, mean, float(np.sqrt(var / trials))))
    return TrendReport(k, trials, int(F), int(rec_idx.size), rows)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class SimulationStats:
    p: float
    channel: str
    model: str
    trials: int
    L: int
    N: int
    seed: int
    unrecovered_total: int
    output_prob: float
    std_error: float
    failures: int
    frame_error_rate: float
    per_index_unrecovered: list[float]
    mean_iterations: float
    capped_trials: int

    def to_dict(self) -> dict:
        return asdict(self)


def _trial(args) -> dict:
    spec, L, channel, p, model, master, trial = args
    seed = derive_seed(master, trial)
    graph = sample_graph(spec, L, derive_seed(seed, 0))
    residual = apply_channel(graph, channel, p, derive_seed(seed, 1))
    out = peel_batch(residual, model, derive_seed(seed, 2))
    return {
        "trial": trial,
        "seed": seed,
        "p": p,
        "success": bool(out.success),
        "iterations": out.iterations,
        "residual_edges": out.residual_edges,
        "unrecovered": out.unrecovered_per_index.tolist(),
        "capped": out.capped,
    }


def monte_carlo(
    spec: EnsembleSpec,
    L: int,
    channel: str,
    p: float,
    model: DecodingModel,
    trials: int,
    seed: int,
    parallelism: int = 1,
    log_path=None,
) -> SimulationStats:
    """Decode ``trials`` freshly sampled graphs at channel parameter ``p``.

    Trial ``t`` draws everything from ``derive_seed(seed, t)``, so results
    do not depend on ``parallelism``.
    """
    validate(spec)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if model.channel != channel:
        raise ConfigurationError(f"decoding model {model.kind} does not match channel {channel}")
    jobs = [(spec, L, channel, float(p), model, int(seed), t) for t in range(trials)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(_trial, jobs, chunksize=max(1, trials // (4 * parallelism))))
    else:
        records = [_trial(j) for j in jobs]
    if log_path is not None:
        with Path(log_path).open("a", encoding="utf-8") as fh:
            for r in records:
                entry = {k: r[k] for k in ("trial", "seed", "p", "success", "iterations", "residual_edges")}
                fh.write(json.dumps(entry) + "\n")

    bits = L * spec.N
    per_trial = np.array([sum(r["unrecovered"]) for r in records], dtype=float) / bits
    per_index = np.sum([r["unrecovered"] for r in records], axis=0) / (trials * spec.N)
    failures = sum(not r["success"] for r in records)
    std = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return SimulationStats(
        p=float(p),
        channel=channel,
        model=model.kind,
        trials=trials,
        L=L,
        N=spec.N,
        seed=int(seed),
        unrecovered_total=int(sum(sum(r["unrecovered"]) for r in records)),
        output_prob=float(per_trial.mean()),
        std_error=std,
        failures=failures,
        frame_error_rate=failures / trials,
        per_index_unrecovered=per_index.tolist(),
        mean_iterations=float(np.mean([r["iterations"] for r in records])),
        capped_trials=sum(r["capped"] for r in records),
    )


def simulated_threshold(
    spec: EnsembleSpec,
    L: int,
    channel: str,
    model: DecodingModel,
    target_prob: float,
    seed: int,
    trials: int = 20,
    tol_p: float = 1e-3,
    lo: float = 0.0,
    hi: float | None = None,
    parallelism: int = 1,
) -> ThresholdResult:
    """Bisection on ``p`` for the output probability crossing ``target_prob``.

    The same seed is used at every ``p``; since the channel draws are
    nested in ``p`` this couples the bisection points.  The reported
    tolerance is the half-width of the final bracket.
    """
    if not 0.0 < target_prob < 1.0:
        raise ValueError("target_prob must lie in (0, 1)")
    hi = (1.0 if channel == "BEC" else 0.5) if hi is None else hi
    points = []

    def below(p: float) -> bool:
        st = monte_carlo(spec, L, channel, p, model, trials, seed, parallelism)
        points.append({"p": p, "output_prob": st.output_prob, "std_error": st.std_error, "failures": st.failures})
        return st.output_prob <= target_prob

    if not below(lo):
        raise BracketError(f"output probability at p={lo} already exceeds the target")
    if below(hi):
        res = ThresholdResult(hi, "simulation", 0.0, channel, flags=["saturated"])
    else:
        a, b, _ = bisect_bracket(below, lo, hi, tol_p, predicate=True, f_lo=True, f_hi=False)
        res = ThresholdResult(0.5 * (a + b), "simulation", 0.5 * (b - a), channel)
        res.diagnostics["bracket"] = [a, b]
    res.diagnostics.update(points=points, trials=trials, target_prob=target_prob, L=L, seed=seed)
    return res
