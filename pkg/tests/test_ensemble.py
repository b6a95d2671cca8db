from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scsc.ensemble import (
    CodeGraph,
    ComponentCodeSpec,
    EnsembleSpec,
    EnsembleValidationError,
    decoupling_fraction,
    decoupling_probability,
    decoupling_probability_bundles,
    decoupling_upper_bound,
    design_rate,
    empirical_initial_dd,
    enumerate_decoupling,
    log_decoupling_probability,
    sample_graph,
    staircase_spec,
    validate,
)
from scsc.numerics import binomial_pmf


def test_component_code_derived_fields():
    code = ComponentCodeSpec(254, 238, 5)
    assert code.t == 2
    assert code.rate == pytest.approx(238 / 254)
    with pytest.raises(EnsembleValidationError):
        ComponentCodeSpec(10, 11, 3)
    with pytest.raises(EnsembleValidationError):
        ComponentCodeSpec(10, 5, 1)


def test_staircase_examples():
    spec = staircase_spec(ComponentCodeSpec(254, 238, 5))
    assert (spec.M_total, spec.w, spec.v, spec.N) == (127, 2, 2, 16129)
    assert validate(spec) is spec
    small = staircase_spec(ComponentCodeSpec(6, 5, 2))
    assert (small.M_total, small.N) == (3, 9)
    with pytest.raises(ValueError):
        staircase_spec(ComponentCodeSpec(7, 4, 3))


def test_validation_reports_every_violation():
    bad = EnsembleSpec.single(ComponentCodeSpec(16, 6, 5), 8, v=2, w=3)
    with pytest.raises(EnsembleValidationError) as err:
        validate(bad)
    msgs = err.value.errors
    assert any("w must divide n_c" in m for m in msgs)
    assert any("nonpositive design rate" in m for m in msgs)


def test_validation_low_rate_and_fractional_N():
    with pytest.raises(EnsembleValidationError, match="nonpositive design rate"):
        validate(EnsembleSpec.single(ComponentCodeSpec(20, 8, 5), 10, v=2, w=2))
    with pytest.raises(EnsembleValidationError, match="not an integer"):
        validate(EnsembleSpec.single(ComponentCodeSpec(20, 18, 3), 1, v=3, w=2))


@given(st.integers(2, 200).map(lambda h: 2 * h), st.data())
@settings(max_examples=40, deadline=None)
def test_staircase_validates_when_rate_above_half(n, data):
    k = data.draw(st.integers(n // 2 + 1, n))
    d = data.draw(st.integers(2, n))
    validate(staircase_spec(ComponentCodeSpec(n, k, d)))


def test_design_rate_examples():
    spec = staircase_spec(ComponentCodeSpec(254, 238, 5))
    assert design_rate(spec, math.inf) == pytest.approx(222 / 254, abs=1e-12)
    assert design_rate(spec, 10) == pytest.approx(1 - 11 * 127 * 16 / (10 * 16129), abs=1e-12)
    full = staircase_spec(ComponentCodeSpec(16, 16, 2))
    assert design_rate(full, 5) == 1.0 and design_rate(full, math.inf) == 1.0


def test_design_rate_increases_to_limit():
    spec = EnsembleSpec(((ComponentCodeSpec(64, 52, 5), 8), (ComponentCodeSpec(128, 113, 5), 4)), 2, 2)
    rates = [design_rate(spec, L) for L in (1, 2, 5, 10, 100, 10_000)]
    assert all(b > a for a, b in zip(rates, rates[1:]))
    assert rates[-1] == pytest.approx(design_rate(spec, math.inf), abs=1e-3)


def test_mixture_weights():
    spec = EnsembleSpec(((ComponentCodeSpec(64, 52, 5), 8), (ComponentCodeSpec(128, 113, 5), 4)), 2, 2)
    assert spec.rho == pytest.approx((0.5, 0.5))
    assert spec.N == (8 * 64 + 4 * 128) // 2


def _small_graph(seed=0, L=6):
    return sample_graph(staircase_spec(ComponentCodeSpec(8, 6, 3)), L, seed)


def test_graph_structure():
    g = _small_graph()
    spec = g.spec
    assert g.n_edges == g.L * spec.N * spec.v
    types = g.degree_types()
    mask = g.suppressed_mask
    per_type = spec.codes[0].n // spec.w
    for j in range(g.n_indices):
        for tau in range(spec.w):
            expected = 0 if mask[j, tau] else per_type
            assert np.all(types[j * spec.M_total : (j + 1) * spec.M_total, tau] == expected)
    # each interleaver is a permutation and each bundle lands one index over
    for k in range(g.L):
        assert sorted(g.perms[k]) == list(range(spec.edges_per_index))
        sl = slice(k * spec.edges_per_index, (k + 1) * spec.edges_per_index)
        assert np.all(g.edge_con[sl] // spec.M_total == k + g.edge_type[sl])
    # every constraint slot used exactly once
    slots = g.edge_con * max(c.n for c in spec.codes) + g.edge_slot
    assert np.unique(slots).size == slots.size


def test_mixture_graph_layout():
    spec = EnsembleSpec(((ComponentCodeSpec(8, 7, 2), 2), (ComponentCodeSpec(4, 3, 2), 2)), 2, 2)
    g = sample_graph(spec, 4, 3)
    types = g.degree_types()
    interior = types[spec.M_total : 2 * spec.M_total]
    assert interior.tolist() == [[4, 4], [4, 4], [2, 2], [2, 2]]


def test_sampling_is_deterministic():
    a, b, c = _small_graph(5), _small_graph(5), _small_graph(6)
    assert a == b
    assert a != c


def test_graph_round_trip(tmp_path):
    g = _small_graph(9)
    for name in ("g.json", "g.json.gz"):
        path = tmp_path / name
        g.save(path)
        back = CodeGraph.load(path)
        assert back == g and back.seed == 9


def test_sample_needs_L_at_least_w():
    with pytest.raises(ValueError):
        sample_graph(staircase_spec(ComponentCodeSpec(8, 6, 3)), 1, 0)


def test_interleaver_uniformity():
    # N = 4, v = 2: each (variable half-edge, constraint half-edge) pair appears with frequency 1/8
    spec = EnsembleSpec.single(ComponentCodeSpec(4, 4, 2), 2, v=2, w=2)
    assert spec.N == 4
    size = spec.edges_per_index
    counts = np.zeros((size, size))
    samples = 10_000
    for s in range(samples):
        perm = sample_graph(spec, 2, s).perms[0]
        counts[np.arange(size), perm] += 1
    freq = counts / samples
    se = math.sqrt((1 / size) * (1 - 1 / size) / samples)
    assert np.max(np.abs(freq - 1 / size)) < 4 * se


def test_decoupling_examples():
    assert decoupling_probability(2, 2) == 1 / 3
    assert decoupling_probability(3, 2) == 1 / 15
    hits, total = enumerate_decoupling(2, 2, 2)
    assert (hits, total) == (8, 24)
    assert enumerate_decoupling(3, 2, 3) == (48, 720)


@pytest.mark.parametrize("N,v", [(1, 2), (2, 2), (3, 2), (4, 2), (2, 3), (2, 4)])
def test_decoupling_matches_enumeration(N, v):
    # with w = N every bundle holds exactly v half-edges
    hits, total = enumerate_decoupling(N, v, N)
    assert decoupling_fraction(N, v) * total == hits


@pytest.mark.parametrize("N,v,w", [(4, 2, 2), (2, 2, 1), (3, 2, 1)])
def test_bundle_formula_matches_enumeration(N, v, w):
    hits, total = enumerate_decoupling(N, v, w)
    assert decoupling_probability_bundles(N, v, w) == pytest.approx(hits / total, rel=1e-12)


def test_decoupling_scaling_trend():
    v = 2
    for N in range(2, 9):
        p = decoupling_probability(N, v)
        assert p <= decoupling_upper_bound(N, v)
    # log p / log N^{-(v-1)N} increases towards 1
    ratios = [log_decoupling_probability(N, v) / (-(v - 1) * N * math.log(N)) for N in range(2, 60)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_initial_dd_extremes():
    g = _small_graph(2, L=5)
    none = empirical_initial_dd(g, np.zeros(g.n_variables, bool), 2)
    assert none == {(0, 0): g.spec.M_total}
    full = empirical_initial_dd(g, np.ones(g.n_variables, bool), 2)
    assert full == {(4, 4): g.spec.M_total}


def test_initial_dd_matches_binomial_law():
    code = ComponentCodeSpec(64, 56, 3)
    spec = EnsembleSpec.single(code, 2048, v=2, w=2)
    p, k, seeds = 0.03, 2, 200
    half = code.n // 2
    counts = np.zeros((seeds, half + 1))
    for s in range(seeds):
        g = sample_graph(spec, 4, s)
        rng = np.random.default_rng(10_000 + s)
        erased = rng.random(g.n_variables) < p
        dd = empirical_initial_dd(g, erased, k)
        for vec, c in dd.items():
            counts[s, vec[0]] += c
    mean = counts.mean(axis=0) / spec.M_total
    se = counts.std(axis=0, ddof=1) / np.sqrt(seeds) / spec.M_total
    law = np.array([binomial_pmf(i, half, p) for i in range(half + 1)])
    visible = law > 1e-4
    assert np.all(np.abs(mean - law)[visible] <= 3 * se[visible] + 1e-12)
