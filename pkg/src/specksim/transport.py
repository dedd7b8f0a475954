"""Simulated unreliable datagram network between actors.

Each datagram's fate is sampled once, at send time, from the network's own
random stream: either it is dropped, or it gets a delivery timestamp of
``sent_at + base_delay + U(0, jitter)``. Sampling at send time makes replays
bit-exact and keeps the delivery counters consistent at every instant.
Reordering is purely a consequence of jitter; there is no explicit
permutation, duplication, or corruption.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

BROADCAST = "*"


class TransportError(Exception):
    pass


class PayloadTooLarge(TransportError):
    pass


class UnknownDestination(TransportError):
    pass


class NetworkConfig(BaseModel):
    """Link parameters shared by every (src, dst) pair."""

    loss_probability: float = Field(default=0.0, ge=0.0, le=1.0)
    base_delay: float = Field(default=0.01, ge=0.0)
    jitter: float = Field(default=0.0, ge=0.0)
    max_payload: int = Field(default=1024, gt=0)


@dataclass
class Datagram:
    src: str
    dst: str
    payload: bytes
    sent_at: float
    deliver_at: float | None  # None = dropped at send time
    seq: int

    @property
    def dropped(self) -> bool:
        return self.deliver_at is None


@dataclass
class TransportStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    reordered: int = 0
    in_flight: int = 0

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "reordered": self.reordered,
            "in_flight": self.in_flight,
        }


class Network:
    """Datagram network with per-destination in-flight queues.

    The owning scheduler is the single writer; actors reach the network only
    through the scheduler's deterministic step, so no locking is needed here.

    Args:
        config: link parameters.
        rng: random stream for fate sampling. Anything exposing ``random()``
            returning uniforms in [0, 1) works; defaults to a fresh
            numpy Generator.
    """

    def __init__(self, config: NetworkConfig, rng=None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng()
        self._registered: set[str] = set()
        self._dead: set[str] = set()
        self._next_seq: dict[str, int] = {}
        # per-destination heap of (deliver_at, src, seq, Datagram)
        self._in_flight: dict[str, list] = {}
        # highest delivered seq per (src, dst), for the reorder counter
        self._max_delivered: dict[tuple[str, str], int] = {}
        self._sent = 0
        self._delivered = 0
        self._dropped = 0
        self._reordered = 0

    # -- membership -----------------------------------------------------

    def register(self, actor: str) -> None:
        self._registered.add(actor)
        self._in_flight.setdefault(actor, [])

    def mark_dead(self, actor: str) -> None:
        """Exclude actor from broadcast fan-out; queued datagrams to it are
        dropped when their delivery time arrives (see discard_due)."""
        self._dead.add(actor)

    def is_live(self, actor: str) -> bool:
        return actor in self._registered and actor not in self._dead

    # -- operations ------------------------------------------------------

    def send(self, src: str, dst: str, payload: bytes, now: float) -> list[Datagram]:
        """Send payload from src to dst (or BROADCAST) at sim-time now.

        Returns one datagram per destination, each with its fate already
        sampled. Broadcast fans out to every live registered actor except
        the sender, sampling each link independently.
        """
        if len(payload) > self.config.max_payload:
            raise PayloadTooLarge(
                f"payload of {len(payload)} bytes exceeds max_payload="
                f"{self.config.max_payload}"
            )
        if dst == BROADCAST:
            targets = sorted(a for a in self._registered
                             if a != src and a not in self._dead)
        else:
            if dst not in self._registered:
                raise UnknownDestination(dst)
            targets = [dst]

        cfg = self.config
        out = []
        for target in targets:
            seq = self._next_seq.get(src, 0) + 1
            self._next_seq[src] = seq
            self._sent += 1
            if cfg.loss_probability > 0.0 and self.rng.random() < cfg.loss_probability:
                dgram = Datagram(src, target, payload, now, None, seq)
                self._dropped += 1
            else:
                delay = cfg.base_delay
                if cfg.jitter > 0.0:
                    delay += self.rng.random() * cfg.jitter
                dgram = Datagram(src, target, payload, now, now + delay, seq)
                heapq.heappush(self._in_flight[target],
                               (dgram.deliver_at, src, seq, dgram))
            out.append(dgram)
        return out

    def poll(self, actor: str, now: float) -> list[Datagram]:
        """Remove and return all datagrams due for actor at sim-time now,
        ordered by (deliver_at, src, seq)."""
        due = self._pop_due(actor, now)
        for dgram in due:
            self._delivered += 1
            key = (dgram.src, dgram.dst)
            top = self._max_delivered.get(key, -1)
            if dgram.seq < top:
                self._reordered += 1
            else:
                self._max_delivered[key] = dgram.seq
        return due

    def discard_due(self, actor: str, now: float) -> int:
        """Drop (instead of deliver) everything due for a dead actor."""
        due = self._pop_due(actor, now)
        self._dropped += len(due)
        return len(due)

    def stats(self) -> TransportStats:
        in_flight = sum(len(h) for h in self._in_flight.values())
        return TransportStats(self._sent, self._delivered, self._dropped,
                              self._reordered, in_flight)

    def _pop_due(self, actor: str, now: float) -> list[Datagram]:
        if actor not in self._registered:
            raise UnknownDestination(actor)
        heap = self._in_flight[actor]
        due = []
        while heap and heap[0][0] <= now:
            due.append(heapq.heappop(heap)[3])
        return due
