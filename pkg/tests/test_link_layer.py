import math

import numpy as np
import pytest

from qnetsim.channels import fiber_transmissivity
from qnetsim.errors import BadParameter, NoFreeMode
from qnetsim.link_layer import (EntangledPair, LinkParams, PurificationFailure, attempt_generation,
                                expected_link_rate, herald_delay, run_purification, sample_generation)


def test_certain_generation_interval():
    lk = LinkParams(10.0, attenuation_db_per_km=0.0, attempt_rate_hz=1000.0)
    rng = np.random.default_rng(0)
    out = attempt_generation(lk, rng, 0.0)
    assert out.success and out.pair is not None
    assert out.herald_time == pytest.approx(1e-3 + herald_delay(lk))


def test_failed_attempt_pipelines():
    lk = LinkParams(10.0, attempt_rate_hz=1000.0, extra_efficiency=1e-12)
    out = attempt_generation(lk, np.random.default_rng(0), 2.0)
    assert not out.success and out.pair is None
    assert out.next_attempt == pytest.approx(2.001)
    with pytest.raises(NoFreeMode):
        attempt_generation(lk, np.random.default_rng(0), free_modes=False)


def test_expected_rate_examples():
    lk = LinkParams(1.0, attenuation_db_per_km=0.0, attempt_rate_hz=1000.0, extra_efficiency=0.5)
    assert expected_link_rate(lk) == 500.0
    lk50 = LinkParams(50.0, 0.2, attempt_rate_hz=1e6)
    assert lk50.p_gen == pytest.approx(fiber_transmissivity(50.0, 0.2))
    assert expected_link_rate(lk50) == pytest.approx(1e5, rel=1e-12)


def test_monte_carlo_success_rate():
    # p_gen = 0.1 at 1e6 attempts/s: successes in 1e5 attempts ~ Binomial(1e5, 0.1)
    lk = LinkParams(1.0, attenuation_db_per_km=0.0, attempt_rate_hz=1e6, extra_efficiency=0.1)
    rng = np.random.default_rng(5)
    n = 100_000
    succ = sum(attempt_generation(lk, rng).success for _ in range(n))
    sigma = math.sqrt(n * 0.1 * 0.9)
    assert abs(succ - n * 0.1) < 3 * sigma
    rate = succ / (n * lk.attempt_period_s)
    assert abs(rate - expected_link_rate(lk)) < 3 * sigma / (n * lk.attempt_period_s)


def test_sample_generation_geometric_mean():
    lk = LinkParams(1.0, attenuation_db_per_km=0.0, attempt_rate_hz=1e4, extra_efficiency=0.1)
    rng = np.random.default_rng(9)
    ks = np.array([sample_generation(lk, rng, 0.0, ("a", "b")).attempts for _ in range(20000)])
    sd = math.sqrt(0.9 / 0.01) / math.sqrt(len(ks))
    assert abs(ks.mean() - 10.0) < 3 * sd


def test_sample_generation_quota():
    lk = LinkParams(1.0, attempt_rate_hz=1e3, extra_efficiency=1e-9)
    out = sample_generation(lk, np.random.default_rng(1), 0.0, ("a", "b"), max_attempts=5)
    assert not out.success and out.attempts == 5
    assert out.herald_time == pytest.approx(5e-3 + herald_delay(lk))


def test_round_trip_herald_doubles():
    lk = LinkParams(100.0)
    assert herald_delay(lk, model="midpoint") == pytest.approx(5e-4)
    assert herald_delay(lk, model="round_trip") == pytest.approx(1e-3)


def _pairs(f, n):
    return [EntangledPair(i, ("a", "b"), f, 0.0) for i in range(n)]


def test_purification_identity_and_sizes():
    p = _pairs(0.8, 1)
    assert run_purification(p, 0) is p[0]
    with pytest.raises(BadParameter):
        run_purification(_pairs(0.8, 3), 1, rng=np.random.default_rng(0))


def test_purification_depth1_statistics():
    rng = np.random.default_rng(3)
    n = 20000
    outs = [run_purification(_pairs(0.7, 2), 1, rng=rng) for _ in range(n)]
    ok = [o for o in outs if not isinstance(o, PurificationFailure)]
    sigma = math.sqrt(n * 0.68 * 0.32)
    assert abs(len(ok) - 0.68 * n) < 3 * sigma
    assert ok[0].fidelity == pytest.approx(0.735294117647058823, abs=1e-12)
    # two inputs per output and p <= 1: at most half the input rate survives
    assert len(ok) <= (2 * n) / 2


def test_purification_rounds_cost_round_trips():
    out = run_purification(_pairs(1.0, 4), 2, rng=np.random.default_rng(0), now=1.0, round_trip_s=0.01)
    assert out.created_at == pytest.approx(1.02)
    assert out.constituents == 4
