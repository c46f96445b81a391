import numpy as np
import pytest

from qnetsim.engine import Engine, Event, EventKind, random_stream
from qnetsim.errors import PastEvent

from conftest import chain


def test_first_handle_and_clock():
    eng = Engine()
    assert eng.schedule(Event(0.0, EventKind.GENERATION_ATTEMPT)) == 0
    assert eng.now == 0.0


def test_ties_fifo():
    eng = Engine()
    seen = []
    eng.at(5.0, EventKind.CONTROL_MESSAGE, lambda ev: seen.append("A"))
    eng.at(5.0, EventKind.CONTROL_MESSAGE, lambda ev: seen.append("B"))
    eng.run_until(10.0)
    assert seen == ["A", "B"]


def test_past_event_rejected():
    eng = Engine()
    eng.run_until(2.0)
    with pytest.raises(PastEvent):
        eng.at(1.0, EventKind.CONTROL_MESSAGE)
    with pytest.raises(PastEvent):
        eng.run_until(1.0)


def test_empty_run():
    eng = Engine()
    log = eng.run_until(10.0)
    assert len(log) == 0 and eng.now == 10.0


def _script(eng):
    rng = eng.stream("a", "x")

    def tick(ev):
        if eng.now < 9.0:
            eng.after(float(rng.exponential(0.5)), EventKind.GENERATION_ATTEMPT, tick, {"u": eng.now}, "a")

    eng.at(0.0, EventKind.GENERATION_ATTEMPT, tick, None, "a")


def test_composition_and_determinism():
    e1, e2, e3 = Engine(42), Engine(42), Engine(42)
    for e in (e1, e2, e3):
        _script(e)
    e1.run_until(5.0)
    e1.run_until(10.0)
    e2.run_until(10.0)
    e3.run_until(10.0)
    assert list(e1.log) == list(e2.log) == list(e3.log)
    assert len(e1.log) > 5


def test_cancel():
    eng = Engine()
    seen = []
    h = eng.at(1.0, EventKind.CUTOFF_SWEEP, lambda ev: seen.append(1))
    assert eng.cancel(h)
    assert not eng.cancel(h)
    eng.run_until(2.0)
    assert seen == []


def test_classical_delay_100km():
    topo = chain(1, length_km=100.0)
    eng = Engine(topology=topo)
    ev = eng.send_classical("n0", "n1")
    assert ev.time == pytest.approx(5e-4, rel=1e-12)


def test_colocated_uses_min_latency():
    topo = chain(1, length_km=1.0)
    assert Engine(topology=topo).send_classical("n0", "n0").time == 0.0
    assert Engine(topology=topo, min_latency_s=1e-6).send_classical("n0", "n0").time == 1e-6


def test_multihop_delay_is_sum_of_hops():
    topo = chain(3, length_km=7.0)
    eng = Engine(topology=topo)
    hops = sum(eng.classical_delay(a, b) for a, b in (("n0", "n1"), ("n1", "n2"), ("n2", "n3")))
    assert eng.classical_delay("n0", "n3") == pytest.approx(hops, rel=1e-12)


def test_streams_reproducible_and_distinct():
    a = random_stream(7, "n0", "gen").random(5)
    b = random_stream(7, "n0", "gen").random(5)
    c = random_stream(7, "n0", "swap").random(5)
    d = random_stream(8, "n0", "gen").random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_extra_stream_does_not_perturb_others():
    e1, e2 = Engine(3), Engine(3)
    e2.stream("n9", "instrumentation").random(100)
    assert np.array_equal(e1.stream("n0", "gen").random(4), e2.stream("n0", "gen").random(4))
