import numpy as np
import pytest

from specksim.runtime import (
    Actor,
    DeadActor,
    Event,
    EventKind,
    Scheduler,
    TimeInPast,
    UnknownActor,
)
from specksim.transport import Network, NetworkConfig


class Recorder(Actor):
    """Actor that records every event it handles; optional callback hook."""

    def __init__(self, actor_id, on_event=None):
        super().__init__(actor_id)
        self.seen = []
        self.on_event = on_event

    def handle(self, sched, event):
        self.seen.append((sched.now, event.kind, event.tag))
        if self.on_event:
            self.on_event(self, sched, event)


def make_sched(ids=("a", "b"), on_event=None, **kw):
    sched = Scheduler(trace=True, **kw)
    actors = {i: Recorder(i, on_event) for i in ids}
    for actor in actors.values():
        sched.register(actor)
    return sched, actors


def test_same_time_ties_break_by_actor_id():
    sched, actors = make_sched()
    sched.enqueue_event(Event(5.0, "b", EventKind.TICK))
    sched.enqueue_event(Event(5.0, "a", EventKind.TICK))
    sched.advance(10.0)
    assert sched.trace == [(5.0, "a", "tick"), (5.0, "b", "tick")]


def test_enqueue_in_past_rejected():
    sched, _ = make_sched()
    sched.advance(4.0)
    with pytest.raises(TimeInPast):
        sched.enqueue_event(Event(3.0, "a", EventKind.TICK))
    with pytest.raises(UnknownActor):
        sched.enqueue_event(Event(5.0, "zz", EventKind.TICK))


def test_replay_same_seed_identical_order():
    def run(seed):
        sched, _ = make_sched(ids=[f"n{i:02d}" for i in range(8)])
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            t = float(rng.uniform(0, 50))
            actor = f"n{int(rng.integers(0, 8)):02d}"
            sched.enqueue_event(Event(t, actor, EventKind.TICK))
        sched.advance(100.0)
        return sched.trace

    assert run(123) == run(123)


def test_advance_empty_queue():
    sched, _ = make_sched()
    assert sched.advance(10.0) == 0
    assert sched.now == 10.0
    with pytest.raises(TimeInPast):
        sched.advance(5.0)


def test_single_timer():
    sched, actors = make_sched()
    sched.schedule_timer("a", 5.0, "t")
    assert sched.advance(10.0) == 1
    assert actors["a"].seen == [(5.0, EventKind.TIMER, "t")]


def test_handler_cascade_processed_in_order():
    def on_event(actor, sched, event):
        if sched.now == 5.0:
            sched.enqueue_event(Event(7.0, actor.id, EventKind.TICK, tag="child"))

    sched, actors = make_sched(on_event=on_event)
    sched.enqueue_event(Event(5.0, "a", EventKind.TICK, tag="root"))
    assert sched.advance(10.0) == 2
    assert [t for t, _, _ in actors["a"].seen] == [5.0, 7.0]


def test_timer_validation():
    sched, _ = make_sched()
    with pytest.raises(ValueError):
        sched.schedule_timer("a", 0.0, "t")
    sched.kill("b", "test")
    with pytest.raises(DeadActor):
        sched.schedule_timer("b", 1.0, "t")
    with pytest.raises(UnknownActor):
        sched.schedule_timer("zz", 1.0, "t")


def test_periodic_rearm_pattern():
    def on_event(actor, sched, event):
        if len(actor.seen) < 3:
            sched.schedule_timer(actor.id, 1.0, "tick")

    sched, actors = make_sched(on_event=on_event)
    sched.schedule_timer("a", 1.0, "tick")
    sched.advance(10.0)
    assert [t for t, _, _ in actors["a"].seen] == [1.0, 2.0, 3.0]


def test_fault_discards_pending_events():
    sched, actors = make_sched()
    sched.schedule_timer("a", 4.0, "never")
    sched.inject_fault("a", at=3.0)
    sched.advance(10.0)
    assert actors["a"].seen == []
    assert not sched.alive("a")
    with pytest.raises(UnknownActor):
        sched.inject_fault("zz", at=1.0)


def test_messages_to_crashed_actor_dropped():
    net = Network(NetworkConfig(base_delay=0.5), rng=np.random.default_rng(0))
    sched, actors = make_sched(network=net)
    sched.inject_fault("b", at=1.0)
    sched.advance(1.0)
    sched.send_message("a", "b", b"too late")
    sched.advance(5.0)
    assert actors["b"].seen == []
    stats = net.stats()
    assert stats.dropped == 1 and stats.delivered == 0 and stats.in_flight == 0


def test_message_delivery_and_reply():
    def on_event(actor, sched, event):
        if event.kind is EventKind.MESSAGE and actor.id == "b":
            sched.send_message("b", "a", b"pong")

    net = Network(NetworkConfig(base_delay=0.1), rng=np.random.default_rng(0))
    sched, actors = make_sched(network=net, on_event=on_event)
    sched.send_message("a", "b", b"ping")
    sched.advance(1.0)
    assert [k for _, k, _ in actors["b"].seen] == [EventKind.MESSAGE]
    assert [k for _, k, _ in actors["a"].seen] == [EventKind.MESSAGE]
    assert net.stats().delivered == 2


def test_handler_panic_marks_dead_and_run_continues():
    def on_event(actor, sched, event):
        if actor.id == "a":
            raise RuntimeError("boom")

    sched, actors = make_sched(on_event=on_event)
    sched.enqueue_event(Event(1.0, "a", EventKind.TICK))
    sched.enqueue_event(Event(2.0, "a", EventKind.TICK))
    sched.enqueue_event(Event(3.0, "b", EventKind.TICK))
    sched.advance(10.0)
    assert not sched.alive("a")
    assert len(actors["a"].seen) == 1  # second event discarded
    assert len(actors["b"].seen) == 1
    assert len(sched.panics) == 1


def test_spawn_cap_kills_runaway_handler():
    def on_event(actor, sched, event):
        for i in range(100):
            sched.enqueue_event(Event(sched.now + 1.0, actor.id, EventKind.TICK))

    sched, actors = make_sched(on_event=on_event, spawn_cap=64)
    sched.enqueue_event(Event(1.0, "a", EventKind.TICK))
    sched.advance(2.0)
    assert not sched.alive("a")
    assert "SpawnLimitExceeded" in sched.panics[0][2]


def test_fsm_state_validation():
    class TwoState(Actor):
        states = frozenset({"idle", "busy"})

        def handle(self, sched, event):
            pass

    actor = TwoState("x")
    actor.set_state("busy")
    assert actor.fsm_state == "busy"
    with pytest.raises(ValueError):
        actor.set_state("bogus")
    with pytest.raises(ValueError):
        TwoState("y", initial_state="bogus")
