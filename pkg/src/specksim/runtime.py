"""Deterministic discrete-event scheduler hosting one state-machine actor per id.

Events are processed one at a time in a single global order
``(time, actor id, seq)``; each handler runs to completion before the next
event starts, so actor state is never observed mid-update. Handlers may arm
timers, enqueue events, and send datagrams through the scheduler; the
scheduler turns each non-dropped datagram into a wake-up at its delivery
time and hands the due datagrams to the destination's handler in the
transport's (deliver_at, src, seq) order.

A handler that raises is treated as a crashed actor: the actor is marked
dead and the run continues (fail-stop, no recovery of the same id). Dead
actors receive no further events and their queued datagrams are dropped at
delivery time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

from .transport import Datagram, Network


class SchedulerError(Exception):
    pass


class TimeInPast(SchedulerError):
    pass


class DeadActor(SchedulerError):
    pass


class UnknownActor(SchedulerError):
    pass


class SpawnLimitExceeded(SchedulerError):
    """One handler enqueued more than spawn_cap events (runaway loop guard)."""


class EventKind(Enum):
    TIMER = "timer"
    MESSAGE = "message"
    FAULT = "fault"
    TICK = "tick"
    _WAKE = "_wake"  # internal: datagram(s) due for delivery


@dataclass
class Event:
    time: float
    actor: str
    kind: EventKind
    tag: str | None = None
    datagram: Datagram | None = None
    seq: int = -1  # global tiebreaker, assigned at enqueue


@dataclass
class ActorRecord:
    actor: "Actor"
    alive: bool = True


class Actor:
    """Base class for scheduler-hosted actors.

    Subclasses declare a finite ``states`` set, keep their current
    ``fsm_state`` via set_state, and implement ``handle``.
    """

    states: frozenset[str] = frozenset({"idle"})

    def __init__(self, actor_id: str, initial_state: str = "idle"):
        self.id = actor_id
        self._fsm_state = initial_state
        if initial_state not in self.states:
            raise ValueError(f"{initial_state!r} not in declared states")

    @property
    def fsm_state(self) -> str:
        return self._fsm_state

    def set_state(self, state: str) -> None:
        if state not in self.states:
            raise ValueError(f"{state!r} not in declared states of {self.id}")
        self._fsm_state = state

    def handle(self, sched: "Scheduler", event: Event) -> None:
        raise NotImplementedError


class Scheduler:
    """Single-threaded deterministic event loop.

    Args:
        network: optional Network used by send_message; deliveries ride the
            event queue as wake-ups at each datagram's deliver_at.
        spawn_cap: max events one handler may enqueue (Zeno guard).
        trace: when True, record one (time, actor, kind) entry per processed
            event for replay comparison / export.
    """

    def __init__(self, network: Network | None = None, spawn_cap: int = 64,
                 trace: bool = False):
        self.network = network
        self.spawn_cap = spawn_cap
        self.now = 0.0
        self.actors: dict[str, ActorRecord] = {}
        self.trace: list[tuple[float, str, str]] | None = [] if trace else None
        self.panics: list[tuple[float, str, str]] = []
        self.on_kill = None  # callback(actor_id, time, reason)
        self._heap: list = []
        self._seq = 0
        self._dispatch_budget: int | None = None

    # -- registration ------------------------------------------------------

    def register(self, actor: Actor) -> None:
        if actor.id in self.actors:
            raise ValueError(f"duplicate actor id {actor.id!r}")
        self.actors[actor.id] = ActorRecord(actor)
        if self.network is not None:
            self.network.register(actor.id)

    def alive(self, actor_id: str) -> bool:
        rec = self.actors.get(actor_id)
        return rec is not None and rec.alive

    # -- enqueue paths -------------------------------------------------------

    def enqueue_event(self, event: Event) -> None:
        if event.actor not in self.actors:
            raise UnknownActor(event.actor)
        if event.time < self.now:
            raise TimeInPast(f"event at t={event.time} < now={self.now}")
        self._charge_spawn()
        self._seq += 1
        event.seq = self._seq
        heapq.heappush(self._heap, (event.time, event.actor, event.seq, event))

    def schedule_timer(self, actor_id: str, delay: float, tag: str) -> None:
        if delay <= 0.0:
            raise ValueError("timer delay must be strictly positive")
        if not self.alive(actor_id):
            if actor_id not in self.actors:
                raise UnknownActor(actor_id)
            raise DeadActor(actor_id)
        self.enqueue_event(Event(self.now + delay, actor_id, EventKind.TIMER, tag=tag))

    def send_message(self, src: str, dst: str, payload: bytes) -> list[Datagram]:
        """Send a datagram (or broadcast) and arm delivery wake-ups."""
        if self.network is None:
            raise SchedulerError("scheduler has no network attached")
        datagrams = self.network.send(src, dst, payload, self.now)
        for dgram in datagrams:
            if not dgram.dropped:
                self.enqueue_event(
                    Event(dgram.deliver_at, dgram.dst, EventKind._WAKE))
        return datagrams

    def inject_fault(self, actor_id: str, at: float) -> None:
        if actor_id not in self.actors:
            raise UnknownActor(actor_id)
        if at < self.now:
            raise TimeInPast(f"fault at t={at} < now={self.now}")
        self._seq += 1
        ev = Event(at, actor_id, EventKind.FAULT, tag="crash", seq=self._seq)
        heapq.heappush(self._heap, (ev.time, ev.actor, ev.seq, ev))

    # -- execution -----------------------------------------------------------

    def advance(self, until: float) -> int:
        """Process every event with time <= until; returns processed count.

        Pending events of dead actors are discarded, not processed. On
        return, now == until.
        """
        if until < self.now:
            raise TimeInPast(f"advance to t={until} < now={self.now}")
        processed = 0
        heap = self._heap
        while heap and heap[0][0] <= until:
            time, actor_id, _, event = heapq.heappop(heap)
            self.now = time
            rec = self.actors[actor_id]
            if event.kind is EventKind.FAULT:
                if rec.alive:
                    self.kill(actor_id, "fault")
                    processed += 1
                    self._note(time, actor_id, "fault")
                continue
            if not rec.alive:
                if event.kind is EventKind._WAKE and self.network is not None:
                    self.network.discard_due(actor_id, time)
                continue
            if event.kind is EventKind._WAKE:
                for dgram in self.network.poll(actor_id, time):
                    msg = Event(time, actor_id, EventKind.MESSAGE,
                                datagram=dgram, seq=event.seq)
                    self._dispatch(rec, msg)
                    processed += 1
                    self._note(time, actor_id, "message")
                    if not rec.alive:  # panicked mid-batch; rest die in the inbox
                        break
                continue
            self._dispatch(rec, event)
            processed += 1
            self._note(time, actor_id, event.kind.value)
        self.now = until
        return processed

    def kill(self, actor_id: str, reason: str) -> None:
        """Fail-stop the actor: no further events, broadcasts skip it."""
        rec = self.actors.get(actor_id)
        if rec is None:
            raise UnknownActor(actor_id)
        if not rec.alive:
            return
        rec.alive = False
        if self.network is not None:
            self.network.mark_dead(actor_id)
        if self.on_kill is not None:
            self.on_kill(actor_id, self.now, reason)

    # -- internals -------------------------------------------------------------

    def _dispatch(self, rec: ActorRecord, event: Event) -> None:
        self._dispatch_budget = self.spawn_cap
        try:
            rec.actor.handle(self, event)
        except Exception as exc:  # HandlerPanic semantics: fail-stop, keep going
            self.panics.append((self.now, rec.actor.id, repr(exc)))
            self.kill(rec.actor.id, f"panic: {exc!r}")
        finally:
            self._dispatch_budget = None

    def _charge_spawn(self) -> None:
        if self._dispatch_budget is None:
            return
        self._dispatch_budget -= 1
        if self._dispatch_budget < 0:
            raise SpawnLimitExceeded(
                f"handler exceeded spawn cap of {self.spawn_cap}")

    def _note(self, time: float, actor: str, kind: str) -> None:
        if self.trace is not None:
            self.trace.append((time, actor, kind))


def trace_lines(trace: list[tuple[float, str, str]]) -> str:
    """Render a processed-event trace as line-delimited records."""
    return "".join(f"{t:.6f} {actor} {kind}\n" for t, actor, kind in trace)
