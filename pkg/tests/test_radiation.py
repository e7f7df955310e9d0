import numpy as np
import pytest

from commuting import FlowMatrix, InputError, RadiationInputs, circle_population, compare_models, radiation_flows
from commuting.radiation import circle_populations, round_rows


def line_inputs():
    d = np.abs(np.subtract.outer([0.0, 1000.0, 2000.0], [0.0, 1000.0, 2000.0]))
    return RadiationInputs(np.array([5.0, 7.0, 11.0]), 23.0, 10.0, d)


def brute_force(inputs, prefactor=None):
    """Pair-by-pair evaluation straight from the definition."""
    m = inputs.populations
    d = inputs.distances
    n = len(m)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            s = sum(m[k] for k in range(n) if k not in (i, j) and d[i, k] <= d[i, j])
            pre = m[i] * inputs.n_commuters / inputs.total_population if prefactor is None else prefactor[i]
            den = (m[i] + s) * (m[i] + m[j] + s)
            out[i, j] = pre * m[i] * m[j] / den if den > 0 else 0.0
    return out


def test_circle_population_line():
    inputs = line_inputs()
    assert circle_population(0, 2, inputs) == 7
    assert circle_population(0, 1, inputs) == 0
    assert circle_population(2, 0, inputs) == 7
    with pytest.raises(InputError):
        circle_population(1, 1, inputs)


def test_circle_population_two_units():
    inputs = RadiationInputs(np.array([3.0, 4.0]), 7, 2, np.array([[0, 5.0], [5.0, 0]]))
    assert circle_population(0, 1, inputs) == 0 == circle_population(1, 0, inputs)


def test_circle_ties_included():
    d = np.array([[0, 10, 10], [10, 0, 14], [10, 14, 0.0]])
    inputs = RadiationInputs(np.array([1.0, 2.0, 3.0]), 6, 1, d)
    assert circle_population(0, 1, inputs) == 3
    assert circle_populations(inputs)[0, 1] == 3


def test_two_unit_flow():
    inputs = RadiationInputs(np.array([100.0, 100.0]), 200.0, 50.0, np.array([[0, 1.0], [1.0, 0]]))
    t = radiation_flows(inputs)
    assert t[0, 1] == 12.5
    assert t[0, 0] == 0


def test_empty_destination_gets_nothing():
    inputs = RadiationInputs(np.array([100.0, 0.0]), 100.0, 50.0, np.array([[0, 1.0], [1.0, 0]]))
    t = radiation_flows(inputs)
    assert t[0, 1] == 0 and t[1, 0] == 0


def test_line_matches_brute_force():
    inputs = line_inputs()
    assert np.allclose(radiation_flows(inputs), brute_force(inputs), rtol=1e-12, atol=0)


def test_random_instances_match_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        xy = rng.uniform(0, 10_000, (10, 2))
        # integer grid creates distance ties
        if rng.random() < 0.5:
            xy = np.round(xy / 2000) * 2000
        d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
        m = rng.integers(0, 500, 10).astype(float)
        inputs = RadiationInputs(m, m.sum() + 1, m.sum() / 3, d)
        fast = radiation_flows(inputs)
        slow = brute_force(inputs)
        assert np.allclose(fast, slow, rtol=1e-12, atol=0)
        for i in range(10):
            for j in range(10):
                if i != j:
                    assert circle_populations(inputs)[i, j] == circle_population(i, j, inputs)


def test_commuter_prefactor():
    inputs = line_inputs()
    pre = np.array([3.0, 0.0, 8.0])
    t = radiation_flows(inputs, "commuters", pre)
    assert np.allclose(t, brute_force(inputs, pre), rtol=1e-12)
    with pytest.raises(InputError):
        radiation_flows(inputs, "commuters")


def test_circle_population_monotone():
    rng = np.random.default_rng(5)
    xy = rng.uniform(0, 1, (30, 2))
    d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
    inputs = RadiationInputs(rng.uniform(0, 10, 30), 1000, 10, d)
    s = circle_populations(inputs)
    for i in range(30):
        order = [j for j in np.argsort(d[i]) if j != i]
        # s_ij + m_j is the population within the circle other than i
        cum = s[i, order] + inputs.populations[order]
        assert np.all(np.diff(cum) >= -1e-9)


def test_row_sums_follow_normalisation():
    rng = np.random.default_rng(2)
    xy = rng.uniform(0, 100_000, (100, 2))
    d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
    m = rng.integers(100, 5000, 100).astype(float)
    inputs = RadiationInputs(m, m.sum(), 0.4 * m.sum(), d)
    rows = radiation_flows(inputs).sum(axis=1)
    target = m * inputs.n_commuters / inputs.total_population
    ratio = rows / target
    assert np.all(ratio > 0.5) and np.all(ratio <= 1.0 + 1e-12)


def test_round_rows_preserves_totals():
    f = np.array([[0.4, 0.4, 0.2], [2.5, 0.25, 0.25]])
    r = round_rows(f)
    assert r.tolist() == [[1, 0, 0], [3, 0, 0]]
    rng = np.random.default_rng(0)
    g = rng.uniform(0, 5, (20, 7))
    assert np.array_equal(round_rows(g).sum(axis=1), np.rint(g.sum(axis=1)))


def test_compare_models_identity_and_zero():
    rng = np.random.default_rng(3)
    obs = rng.integers(0, 40, (6, 6))
    np.fill_diagonal(obs, 0)
    d = rng.uniform(0, 20_000, (6, 6))
    rep = compare_models(obs, {"same": obs, "zero": np.zeros((6, 6))}, log_bins=5, distances=d)
    same = rep.models["same"]
    assert same.cpc == 1.0
    assert np.allclose(same.binned[:, 2], same.binned[:, 3])
    assert np.allclose(same.scatter[:, 0], same.scatter[:, 1])
    assert np.allclose(same.distance_mass, rep.observed_distance_mass)
    assert rep.models["zero"].cpc == 0.0
    with pytest.raises(InputError):
        compare_models(obs, {"bad": np.zeros((2, 2))})


def test_compare_models_accepts_flow_matrices():
    obs = FlowMatrix([[0, 3], [1, 0]], ["a", "b"], ["a", "b"])
    rep = compare_models(obs, {"real": np.array([[0, 2.6], [1.2, 0]])})
    assert rep.models["real"].cpc == 1.0


def test_gravity_beats_radiation_on_small_units():
    from commuting import GenerationConfig, generate_network
    from commuting.core import build_distance_matrix
    from commuting.synthetic import synthetic_area

    area = synthetic_area(150, 30, extent_m=25_000, commuters=8000, seed=8)
    obs = generate_network(area, GenerationConfig(4e-4, seed=1)).flows[:, :150]
    gen = generate_network(area, GenerationConfig(4e-4, seed=2)).flows[:, :150]
    units = area.units
    pops = np.array([u.population for u in units])
    inputs = RadiationInputs(pops, pops.sum(), float(area.s_out.sum()),
                             build_distance_matrix(units, units))
    rad = radiation_flows(inputs)[:150, :150]
    rep = compare_models(obs, {"gravity": gen, "radiation": rad})
    assert rep.models["gravity"].cpc > rep.models["radiation"].cpc
