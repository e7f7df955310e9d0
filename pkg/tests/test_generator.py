import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from commuting import (
    GenerationConfig,
    InfeasibleMarginsError,
    InputError,
    NoCapacityError,
    destination_probabilities,
    generate_network,
    run_replicas,
)
from commuting.generator import (
    KernelUnderflowWarning,
    _allocate,
    kernel_matrix,
    make_rng,
)
from conftest import make_area, random_area


def test_probabilities_hand_example():
    p = destination_probabilities(0, [10, 10], [1000.0, 2000.0], 0.001, exclude_self=False)
    # 10 e^-1 / (10 e^-1 + 10 e^-2)
    expected = 1 / (1 + math.exp(-1))
    assert p == pytest.approx([expected, 1 - expected], abs=1e-12)
    assert p[0] == pytest.approx(0.7311, abs=1e-4)


def test_probabilities_beta_zero_uniform():
    p = destination_probabilities(0, [7, 7, 7], [0.0, 500.0, 9000.0], 0.0, exclude_self=False)
    assert p == pytest.approx([1 / 3] * 3, abs=1e-15)


def test_probabilities_zero_capacity():
    p = destination_probabilities(0, [0, 5], [0.0, 10.0], 0.3, exclude_self=False)
    assert list(p) == [0.0, 1.0]


def test_probabilities_exclude_self_and_no_capacity():
    p = destination_probabilities(1, [4, 9, 4], np.array([[0, 5, 5], [5, 0, 5]]), 0.0)
    assert p == pytest.approx([0.5, 0.0, 0.5])
    with pytest.raises(NoCapacityError):
        destination_probabilities(0, [3, 0], [0.0, 1.0], 0.1)


@given(st.lists(st.integers(0, 50), min_size=2, max_size=10),
       st.floats(0, 1e-2), st.integers(0, 9))
@settings(max_examples=100, deadline=None)
def test_probabilities_normalised(s_in, beta, origin):
    origin = origin % len(s_in)
    s_in = list(s_in)
    s_in[(origin + 1) % len(s_in)] += 1
    d = np.linspace(0, 40_000, len(s_in))
    p = destination_probabilities(origin, s_in, d, beta)
    assert abs(p.sum() - 1) <= 1e-12
    assert p[origin] == 0


def test_config_validation():
    with pytest.raises(InputError):
        GenerationConfig(-1.0)
    with pytest.raises(InputError):
        GenerationConfig(float("nan"))
    with pytest.raises(InputError):
        GenerationConfig(1e-4, replicas=0)


def test_single_admissible_destination():
    W = generate_network(make_area([4], [0, 9]), GenerationConfig(2e-4, seed=1))
    assert W.flows.tolist() == [[0, 4]]
    assert W.row_labels == ("r0",) and W.col_labels == ("r0", "o0")


def test_single_unit_without_outside_is_infeasible():
    with pytest.raises(InfeasibleMarginsError):
        generate_network(make_area([3], [10]), GenerationConfig(1e-4))


def test_symmetric_split_is_binomial():
    area = make_area([1000], [0, 10**6, 10**6], out_xy=[(0.0, 5000.0), (0.0, -5000.0)])
    W = generate_network(area, GenerationConfig(3e-4, seed=11))
    share = W.flows[0, 1] / 1000
    assert 0.45 <= share <= 0.55
    _, mean = run_replicas(area, GenerationConfig(3e-4, seed=11, replicas=100))
    assert 0.48 <= mean.flows[0, 1] / 1000 <= 0.52


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(0, 6),
       st.integers(1, 400), st.floats(0, 5e-4), st.booleans())
@settings(max_examples=60, deadline=None)
def test_conservation(seed, n, m, total, beta, exclude_self):
    rng = np.random.default_rng(seed)
    if n == 1 and m == 0:
        m = 1
    area = random_area(rng, n, m, total)
    W = generate_network(area, GenerationConfig(beta, seed=seed, exclude_self=exclude_self))
    f = W.flows
    assert f.dtype == np.int64
    assert np.array_equal(f.sum(axis=1), area.s_out)
    assert np.all(f.sum(axis=0) <= area.s_in)
    assert f.sum() == area.s_out.sum()
    if exclude_self:
        assert np.all(np.diag(f[:, :n]) == 0)


def test_determinism_and_seed_sensitivity(rng):
    area = random_area(rng, 30, 10, 3000)
    a = generate_network(area, GenerationConfig(2e-4, seed=5))
    b = generate_network(area, GenerationConfig(2e-4, seed=5))
    c = generate_network(area, GenerationConfig(2e-4, seed=6))
    assert a == b
    assert a.flows.tobytes() == b.flows.tobytes()
    assert a != c


def test_replicas_determinism_and_threads(rng):
    area = random_area(rng, 20, 5, 2000)
    cfg = GenerationConfig(1e-4, seed=3, replicas=6)
    one, mean1 = run_replicas(area, cfg)
    two, _ = run_replicas(area, cfg, n_jobs=3)
    assert one == two
    assert np.allclose(mean1.flows, np.mean([m.flows for m in one], axis=0))
    assert len({m.flows.tobytes() for m in one}) > 1


def test_single_replica_mean_equals_replica(rng):
    area = random_area(rng, 10, 3, 500)
    mats, mean = run_replicas(area, GenerationConfig(1e-4, seed=9, replicas=1))
    assert np.array_equal(mean.flows, mats[0].flows)


def test_jit_matches_interpreted_kernel(rng):
    """The compiled loop and its plain-Python source give identical flows."""
    area = random_area(rng, 15, 5, 800)
    kern = kernel_matrix(area.distances, 2e-4)
    outs = []
    for fn in (_allocate, _allocate.py_func):
        s_in, s_out = area.s_in.copy(), area.s_out.copy()
        flows = np.zeros((area.n, area.n_tot), dtype=np.int64)
        active = np.flatnonzero(s_out > 0).astype(np.int64)
        u = make_rng(4).random((int(s_out.sum()), 2))
        done = fn(kern, np.array(area.distances), s_in, s_out, active,
                  np.array([active.size]), u, flows, True, np.zeros(1, dtype=np.int64))
        assert done == u.shape[0]
        outs.append(flows)
    assert np.array_equal(*outs)


def test_underflow_falls_back_to_nearest():
    area = make_area([3], [0, 5, 5], out_xy=[(40_000.0, 0.0), (90_000.0, 0.0)])
    with pytest.warns(KernelUnderflowWarning):
        W = generate_network(area, GenerationConfig(1.0, seed=1))
    assert W.flows.tolist() == [[0, 3, 0]]


def test_stuck_origin_raises_when_forced():
    area = make_area([2, 1], [3, 1])
    with pytest.raises(InfeasibleMarginsError):
        generate_network(area, GenerationConfig(0.0))
    # origin r0 can only use r1 (one slot); with force the run reaches the dead end
    with pytest.raises(NoCapacityError):
        generate_network(area, GenerationConfig(0.0, seed=1), force=True)


def _enumerate_two_origins(s_out, s_in, d, beta):
    """Exact outcome law for n=2, m=0..: uniform origin among active ones, decrementing capacity."""
    law = {}

    def walk(so, si, flows, prob):
        if sum(so) == 0:
            key = tuple(map(tuple, flows))
            law[key] = law.get(key, 0.0) + prob
            return
        active = [k for k in range(len(so)) if so[k] > 0]
        for lam in active:
            w = [si[i] * math.exp(-beta * d[lam][i]) if i != lam else 0.0
                 for i in range(len(si))]
            tot = sum(w)
            for i, wi in enumerate(w):
                if wi > 0:
                    so2, si2 = list(so), list(si)
                    so2[lam] -= 1
                    si2[i] -= 1
                    f2 = [list(r) for r in flows]
                    f2[lam][i] += 1
                    walk(so2, si2, f2, prob / len(active) * wi / tot)

    walk(list(s_out), list(s_in), [[0] * len(s_in) for _ in s_out], 1.0)
    return law


@pytest.mark.slow
def test_two_origin_outcome_law_matches_enumeration():
    s_out, s_in = [2, 1], [1, 2, 1, 2]
    area = make_area(s_out, s_in)
    d = np.asarray(area.distances)
    beta = 4e-4
    law = _enumerate_two_origins(s_out, s_in, d.tolist(), beta)
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
    runs = 40_000
    counts = {}
    for seed in range(runs):
        key = tuple(map(tuple, generate_network(area, GenerationConfig(beta, seed=seed)).flows.tolist()))
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) <= set(law)
    for key, p in law.items():
        sd = math.sqrt(runs * p * (1 - p))
        assert abs(counts.get(key, 0) - runs * p) <= 4 * sd + 1, key
