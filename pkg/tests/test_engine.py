import pytest

from dramcache.engine import Engine, EngineClosed


def test_zero_delay_fires_after_earlier_events_at_same_tick():
    eng = Engine()
    log = []

    def first():
        log.append("first")
        eng.schedule(lambda: log.append("zero-delay"), 0)

    eng.schedule(first, 5)
    eng.schedule(lambda: log.append("second"), 5)
    eng.run()
    assert log == ["first", "second", "zero-delay"]


def test_fifo_tie_break():
    eng = Engine()
    log = []
    eng.schedule(lambda: log.append("a"), 5)
    eng.schedule(lambda: log.append("b"), 5)
    eng.run()
    assert log == ["a", "b"]


def test_cancel():
    eng = Engine()
    log = []
    h = eng.schedule(lambda: log.append("a"), 10)
    eng.cancel(h)
    assert not eng.pending(h)
    eng.run()
    assert log == [] and eng.dispatched == 0


def test_run_until_empty_queue():
    eng = Engine()
    assert eng.run_until(100) == 100
    assert eng.dispatched == 0


def test_run_until_stops_at_limit():
    eng = Engine()
    for t in (3, 7, 7, 12):
        eng.schedule(lambda: None, t)
    assert eng.run_until(10) == 7
    assert eng.dispatched == 3
    assert eng.peek() == 12


def test_self_rescheduling_event():
    eng = Engine()
    fired = []

    def tick():
        fired.append(eng.now)
        eng.schedule(tick, 2)

    eng.schedule(tick, 0)
    eng.run_until(9)
    assert fired == [0, 2, 4, 6, 8]


def test_schedule_after_close_is_an_error():
    eng = Engine()
    eng.close()
    with pytest.raises(EngineClosed):
        eng.schedule(lambda: None, 1)


def test_negative_delay_rejected():
    with pytest.raises(ValueError):
        Engine().schedule(lambda: None, -1)


def test_rng_is_seeded():
    assert Engine(5).rng.random() == Engine(5).rng.random()
    assert Engine(5).rng.random() != Engine(6).rng.random()
