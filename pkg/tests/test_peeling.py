from __future__ import annotations

import json
import math

import numpy as np
import pytest

import scsc.peeling as peeling
from scsc.ensemble import ComponentCodeSpec, EnsembleSpec, empirical_initial_dd, sample_graph, staircase_spec
from scsc.numerics import BracketError, ConfigurationError, DecodingProfile
from scsc.peeling import (
    DecodingModel,
    ResidualGraph,
    apply_channel,
    monte_carlo,
    peel_batch,
    peel_incremental,
    simulated_threshold,
    trend_check,
)
from scsc.potential import weight_pulling

BEC = DecodingModel("bec-bdd")
BSC = DecodingModel("bsc-mf")


@pytest.fixture(autouse=True)
def _edge_balance(monkeypatch):
    monkeypatch.setattr(peeling, "CHECK_EDGE_BALANCE", True)


def reference_peel(graph, edges, thresholds):
    """Plain-Python Algorithm 1 over sets, used as an independent oracle."""
    live = set(int(e) for e in edges)
    con_of = graph.edge_con.tolist()
    var_of = graph.edge_var.tolist()
    v = graph.v
    while True:
        deg: dict[int, int] = {}
        for e in live:
            deg[con_of[e]] = deg.get(con_of[e], 0) + 1
        good = {c for c, d in deg.items() if 1 <= d <= thresholds[c]}
        if not good:
            return live
        recovered = {var_of[e] for e in live if con_of[e] in good}
        live = {e for e in live if var_of[e] not in recovered}
        assert all(var_of[e] * v <= e < (var_of[e] + 1) * v for e in live)


def _specs():
    return [
        staircase_spec(ComponentCodeSpec(16, 10, 5)),
        EnsembleSpec.single(ComponentCodeSpec(24, 18, 5), 6, v=2, w=3),
        EnsembleSpec.single(ComponentCodeSpec(12, 10, 3), 6, v=3, w=2),
        EnsembleSpec(((ComponentCodeSpec(16, 12, 5), 4), (ComponentCodeSpec(8, 7, 2), 4)), 2, 2),
    ]


def _cases(count, seed=0):
    rng = np.random.default_rng(seed)
    specs = _specs()
    for i in range(count):
        spec = specs[i % len(specs)]
        L = int(rng.integers(spec.w, 9))
        graph = sample_graph(spec, L, int(rng.integers(2**31)))
        model = BEC if i % 2 == 0 else BSC
        p = float(rng.uniform(0.5, 1.5)) * min(weight_pulling(spec, model.kind), 0.6)
        yield graph, apply_channel(graph, model.channel, p, int(rng.integers(2**31))), model


def test_empty_residual():
    graph = sample_graph(_specs()[0], 4, 0)
    empty = ResidualGraph(graph, np.zeros(0, dtype=np.int64))
    for out in (peel_batch(empty, BEC), peel_incremental(empty, BEC)):
        assert out.success and out.iterations == 0 and out.residual_edges == 0


def test_batch_matches_reference_and_incremental():
    for graph, residual, model in _cases(120):
        thr = model.thresholds(graph).tolist()
        ref = reference_peel(graph, residual.edges, thr)
        batch = peel_batch(residual, model)
        inc = peel_incremental(residual, model, seed=7)
        assert set(batch.final_edges.tolist()) == ref
        assert np.array_equal(np.sort(batch.final_edges), inc.final_edges)
        assert batch.success == (not ref)


def test_batch_is_order_invariant():
    rng = np.random.default_rng(3)
    for graph, residual, model in _cases(20, seed=3):
        shuffled = ResidualGraph(graph, rng.permutation(residual.edges), residual.p, residual.channel)
        a, b = peel_batch(residual, model), peel_batch(shuffled, model)
        assert np.array_equal(np.sort(a.final_edges), np.sort(b.final_edges))
        assert a.iterations == b.iterations


def test_incremental_order_does_not_matter():
    for graph, residual, model in _cases(10, seed=4):
        outs = [peel_incremental(residual, model, seed=s).final_edges for s in range(3)]
        assert all(np.array_equal(outs[0], o) for o in outs[1:])


def test_monotone_in_erasures():
    spec = staircase_spec(ComponentCodeSpec(16, 10, 5))
    rng = np.random.default_rng(11)
    for pair in range(100):
        graph = sample_graph(spec, 6, pair)
        u = rng.random(graph.n_variables)
        p = rng.uniform(0.3, 0.8)
        small = peel_batch(ResidualGraph.from_erasures(graph, u < p), BEC)
        big = peel_batch(ResidualGraph.from_erasures(graph, u < p + 0.05), BEC)
        assert not (small.success is False and big.success is True)
        # stronger: the stuck set only grows
        assert set(small.final_edges.tolist()) <= set(big.final_edges.tolist())


def test_one_incremental_step_removes_v_edges():
    spec = staircase_spec(ComponentCodeSpec(16, 10, 5))
    graph = sample_graph(spec, 4, 5)
    thr = BEC.thresholds(graph)
    # variable 0 keeps edge 0 alone at its constraint; its other edge sits at a constraint
    # padded with edges of other variables beyond the recoverable range
    e0, e1 = 0, 1
    c1 = graph.edge_con[e1]
    others = [e for e in np.flatnonzero(graph.edge_con == c1) if e != e1]
    others = [e for e in others if graph.edge_con[e ^ 1] != graph.edge_con[e0]][: int(thr[c1])]
    edges = np.array(sorted([e0, e1, *others]))
    assert graph.edge_con[e0] != c1
    residual = ResidualGraph(graph, edges)
    assert residual.constraint_degree()[graph.edge_con[e0]] == 1
    assert residual.constraint_degree()[c1] == thr[c1] + 1
    out = peel_incremental(residual, BEC, seed=0, max_steps=1)
    assert out.iterations == 1 and out.capped
    assert residual.n_edges - out.residual_edges == graph.v


def test_incremental_rejects_profile_model():
    graph = sample_graph(_specs()[0], 4, 0)
    model = DecodingModel("beyond-bdd", DecodingProfile(2, 4, {3: 0.5, 4: 0.5}))
    with pytest.raises(ConfigurationError):
        peel_incremental(apply_channel(graph, "BSC", 0.1, 0), model)


def test_model_validation():
    with pytest.raises(ConfigurationError):
        DecodingModel("beyond-bdd")
    with pytest.raises(ConfigurationError):
        DecodingModel("bec-bdd", sticky=True)
    with pytest.raises(ConfigurationError):
        DecodingModel("ml")
    mixture = sample_graph(_specs()[3], 3, 0)
    with pytest.raises(ConfigurationError):
        DecodingModel("beyond-bdd", DecodingProfile(2, 3)).thresholds(mixture)


def test_beyond_bdd_extreme_profiles():
    spec = EnsembleSpec.single(ComponentCodeSpec(16, 12, 5), 8, v=2, w=2)
    t_c, t_m = 2, 5
    never = DecodingModel("beyond-bdd", DecodingProfile(t_c, t_m, {i: 1.0 for i in range(3, 6)}))
    always = DecodingModel("beyond-bdd", DecodingProfile(t_c, t_m, {i: 0.0 for i in range(3, 6)}))
    for seed in range(20):
        graph = sample_graph(spec, 5, seed)
        residual = apply_channel(graph, "BSC", 0.35, seed)
        base = peel_batch(residual, BSC)
        assert np.array_equal(peel_batch(residual, never, seed).final_edges, base.final_edges)
        wide = reference_peel(graph, residual.edges, [t_m] * graph.n_constraints)
        got = peel_batch(residual, always, seed)
        assert set(got.final_edges.tolist()) == wide
        sticky = DecodingModel("beyond-bdd", always.profile, sticky=True)
        assert np.array_equal(peel_batch(residual, sticky, seed).final_edges, got.final_edges)


def test_beyond_bdd_sits_between_extremes():
    spec = EnsembleSpec.single(ComponentCodeSpec(16, 12, 5), 8, v=2, w=2)
    half = DecodingModel("beyond-bdd", DecodingProfile(2, 5, {i: 0.5 for i in range(3, 6)}))
    for seed in range(10):
        graph = sample_graph(spec, 5, seed)
        residual = apply_channel(graph, "BSC", 0.35, seed)
        lo = set(reference_peel(graph, residual.edges, [5] * graph.n_constraints))
        hi = set(peel_batch(residual, BSC).final_edges.tolist())
        mid = set(peel_batch(residual, half, seed).final_edges.tolist())
        assert lo <= mid <= hi


def test_initial_histograms_match_empirical_dd():
    graph = sample_graph(staircase_spec(ComponentCodeSpec(16, 10, 5)), 5, 1)
    residual = apply_channel(graph, "BEC", 0.4, 2)
    out = peel_batch(residual, BEC, max_iter=0)
    assert out.capped and out.iterations == 0
    hists = out.degree_type_histograms()
    erased = np.zeros(graph.n_variables, bool)
    erased[graph.edge_var[residual.edges]] = True
    for k in range(graph.n_indices):
        assert hists[k] == dict(empirical_initial_dd(graph, erased, k))


def test_channel_statistics_and_nesting():
    graph = sample_graph(staircase_spec(ComponentCodeSpec(64, 52, 5)), 10, 0)
    n = graph.n_variables
    for p in (0.01, 0.2, 0.5):
        hit = apply_channel(graph, "BEC", p, 9).variable_degree() > 0
        assert abs(hit.mean() - p) <= 4 * math.sqrt(p * (1 - p) / n)
    a = set(apply_channel(graph, "BSC", 0.1, 9).edges.tolist())
    b = set(apply_channel(graph, "BSC", 0.3, 9).edges.tolist())
    assert a <= b
    with pytest.raises(ConfigurationError):
        apply_channel(graph, "AWGN", 0.1, 0)


def test_monte_carlo_zero_p():
    spec = staircase_spec(ComponentCodeSpec(16, 10, 5))
    st = monte_carlo(spec, 6, "BEC", 0.0, BEC, 5, seed=1)
    assert st.output_prob == 0.0 and st.failures == 0


def test_monte_carlo_rejects_mismatched_model():
    with pytest.raises(ConfigurationError):
        monte_carlo(staircase_spec(ComponentCodeSpec(16, 10, 5)), 6, "BEC", 0.1, BSC, 2, 0)


def test_standard_error_scales_with_trials():
    # a quadrupled trial count halves the standard error
    spec = staircase_spec(ComponentCodeSpec(16, 10, 5))
    a = monte_carlo(spec, 6, "BEC", 0.42, BEC, 100, seed=3)
    b = monte_carlo(spec, 6, "BEC", 0.42, BEC, 400, seed=4)
    assert 0 < a.failures < 100
    assert b.std_error / a.std_error == pytest.approx(0.5, rel=0.2)


def test_monte_carlo_parallel_determinism_and_log(tmp_path):
    spec = staircase_spec(ComponentCodeSpec(16, 10, 5))
    log = tmp_path / "trials.ndjson"
    one = monte_carlo(spec, 6, "BEC", 0.45, BEC, 12, seed=5, log_path=log)
    two = monte_carlo(spec, 6, "BEC", 0.45, BEC, 12, seed=5, parallelism=2)
    assert one == two
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert len(lines) == 12
    assert set(lines[0]) == {"trial", "seed", "p", "success", "iterations", "residual_edges"}
    assert sum(not x["success"] for x in lines) == one.failures


@pytest.mark.slow
def test_desk_scale_well_below_threshold():
    # half the coupled recursion threshold (about 0.2419) of the desk staircase
    spec = EnsembleSpec.single(ComponentCodeSpec(64, 46, 9), 512, v=2, w=2)
    st = monte_carlo(spec, 40, "BEC", 0.5 * 0.24187, BEC, 1000, seed=2024)
    assert st.output_prob == 0.0


def test_simulated_threshold_properties():
    spec = EnsembleSpec.single(ComponentCodeSpec(32, 26, 5), 32, v=2, w=2)
    bec = simulated_threshold(spec, 8, "BEC", BEC, 1e-2, seed=1, trials=10, tol_p=2e-3)
    bsc = simulated_threshold(spec, 8, "BSC", BSC, 1e-2, seed=1, trials=10, tol_p=2e-3)
    assert bsc.p_star < bec.p_star
    assert bec.p_star <= weight_pulling(spec, "bec-bdd") + 2 * bec.tolerance
    assert bsc.p_star <= weight_pulling(spec, "bsc-mf") + 2 * bsc.tolerance
    assert bec.method == "simulation" and bec.tolerance <= 2e-3
    with pytest.raises(BracketError):
        simulated_threshold(spec, 8, "BEC", BEC, 1e-2, seed=1, trials=2, lo=0.9)
    with pytest.raises(ValueError):
        simulated_threshold(spec, 8, "BEC", BEC, 1.5, seed=1)


def _trend_state(p=0.2, seed=0):
    spec = EnsembleSpec.single(ComponentCodeSpec(32, 26, 5), 256, v=2, w=2)
    graph = sample_graph(spec, 5, seed)
    return apply_channel(graph, "BEC", p, seed + 1)


def test_trend_check_matches_expected_change():
    report = trend_check(_trend_state(), trials=20_000, seed=3)
    assert report.rows
    assert report.max_abs_z() <= 4.0
    assert {r.index for r in report.rows} <= {report.k, report.k + 1}


def test_trend_check_all_recoverable_state():
    report = trend_check(_trend_state(p=0.01), trials=500, seed=1)
    assert all(r.predicted == 0 and r.empirical == 0 for r in report.rows)


def test_trend_check_needs_recoverable_edge():
    with pytest.raises(ValueError):
        trend_check(_trend_state(p=1.0), trials=10, seed=0)


def test_no_recoverable_constraint_stalls_immediately():
    residual = _trend_state(p=1.0)
    assert residual.constraint_degree().min() >= 5
    for decode in (peel_batch, peel_incremental):
        out = decode(residual, BEC)
        assert not out.success and out.iterations == 0
        assert np.array_equal(np.sort(out.final_edges), residual.edges)
