"""One reliable-broadcast channel with sequenced queues and peer retaliation.

Every agent keeps one ChannelState per channel; the channel's owner is the
only agent allowed to initiate broadcasts on it. Incoming echo/ready traffic
is consumed strictly in sequence order per peer, outgoing echo/ready traffic
is withheld from any peer that still owes its own echo and ready for an
earlier sequence, and a payload is delivered once 2t+1 distinct peers have
signalled ready for the same (seq, digest).

State transitions are pure functions of (state, input); nothing here touches
a clock or a socket. The simulator feeds messages in and schedules whatever
comes out.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum
from itertools import count

from .transaction import AgentId, Transaction


class BroadcastError(Exception):
    pass


class NotOwner(BroadcastError):
    pass


class SeqMismatch(BroadcastError):
    pass


class WrongChannel(BroadcastError):
    pass


class MessageKind(str, Enum):
    INITIAL = "INITIAL"
    ECHO = "ECHO"
    READY = "READY"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BroadcastMessage:
    channel: AgentId
    kind: MessageKind
    seq: int
    payload: Transaction


@dataclass(frozen=True)
class Thresholds:
    """Quorum sizes for a system of n agents tolerating t Byzantine ones."""

    n: int
    t: int
    echo_quorum: int
    ready_init: int
    deliver_quorum: int

    @classmethod
    def for_system(cls, n: int, t: int) -> "Thresholds":
        return cls(
            n=n,
            t=t,
            echo_quorum=(n + t) // 2 + 1,  # smallest integer > (n+t)/2
            ready_init=t + 1,
            deliver_quorum=2 * t + 1,
        )

    def __post_init__(self) -> None:
        if not 3 * self.t < self.n:
            raise ValueError(f"need 3t < n, got n={self.n} t={self.t}")
        if self.deliver_quorum > self.n - self.t:
            raise ValueError("deliver quorum unreachable with all Byzantine silent")
        if self.echo_quorum != (self.n + self.t) // 2 + 1:
            raise ValueError("echo quorum must exceed (n+t)/2")


@dataclass
class ReceiveOutcome:
    """What a single on_receive call produced.

    outbound holds exactly the messages the retaliation gate released during
    this call; delivered holds (seq, payload) pairs in ascending seq order.
    """

    outbound: list[tuple[AgentId, BroadcastMessage]]
    delivered: list[tuple[int, Transaction]]


class ChannelState:
    """One agent's view of one broadcast channel."""

    def __init__(self, owner: AgentId, self_id: AgentId, thresholds: Thresholds):
        agents = range(1, thresholds.n + 1)
        self.owner = owner
        self.self_id = self_id
        self.thresholds = thresholds
        self.next_seq = 1  # meaningful on the owner only
        self.last_echo: dict[AgentId, int] = {i: 0 for i in agents}
        self.last_ready: dict[AgentId, int] = {i: 0 for i in agents}
        # in/out queues are kept sorted ascending by seq; the counter breaks
        # ties so tuple comparison never reaches the payload
        self.in_echo_queues: dict[AgentId, list] = {i: [] for i in agents}
        self.in_ready_queues: dict[AgentId, list] = {i: [] for i in agents}
        self.out_queues: dict[AgentId, list] = {i: [] for i in agents}
        self.echo_sent: set[int] = set()
        self.ready_sent: set[int] = set()
        self.initial_sent: set[int] = set()
        self.echo_tally: dict[tuple[int, bytes], set[AgentId]] = {}
        self.ready_tally: dict[tuple[int, bytes], set[AgentId]] = {}
        self.delivered: dict[int, bytes] = {}
        self.events: list[dict] = []  # retaliation + evidence, drained by the stack
        self._payloads: dict[tuple[int, bytes], Transaction] = {}
        self._initial_digest: dict[int, bytes] = {}
        self._blocked_at: dict[AgentId, int | None] = {i: None for i in agents}
        self._arrivals = count()

    # -- initiation ---------------------------------------------------------

    def broadcast(self, payload: Transaction) -> list[tuple[AgentId, BroadcastMessage]]:
        """Fan an INITIAL for the next sequence number out to every agent.

        INITIAL messages bypass the outgoing gate: the owner owes nobody
        anything at the moment it starts a new sequence.
        """
        if self.self_id != self.owner:
            raise NotOwner(f"agent {self.self_id} does not own channel {self.owner}")
        if payload.seq != self.next_seq or payload.seq in self.initial_sent:
            raise SeqMismatch(
                f"channel {self.owner}: broadcast seq {payload.seq}, expected {self.next_seq}"
            )
        self.initial_sent.add(payload.seq)
        msg = BroadcastMessage(self.owner, MessageKind.INITIAL, payload.seq, payload)
        return [(to, msg) for to in sorted(self.last_echo)]

    # -- receipt ------------------------------------------------------------

    def on_receive(self, frm: AgentId, msg: BroadcastMessage) -> ReceiveOutcome:
        if msg.channel != self.owner:
            raise WrongChannel(f"message for channel {msg.channel} on {self.owner}")
        delivered: list[tuple[int, Transaction]] = []
        if msg.kind is MessageKind.INITIAL:
            if frm != self.owner:
                self.events.append(
                    {"kind": "BYZ_EVIDENCE", "reason": "initial-from-non-owner",
                     "frm": frm, "seq": msg.seq}
                )
                return ReceiveOutcome([], [])
            seen = self._initial_digest.setdefault(msg.seq, msg.payload.digest)
            if seen != msg.payload.digest:
                self.events.append(
                    {"kind": "BYZ_EVIDENCE", "reason": "conflicting-initial",
                     "frm": frm, "seq": msg.seq}
                )
            self._payloads.setdefault((msg.seq, msg.payload.digest), msg.payload)
            if msg.seq not in self.echo_sent:
                self._enqueue_wave(MessageKind.ECHO, msg.seq, msg.payload)
        else:
            queues = (
                self.in_echo_queues if msg.kind is MessageKind.ECHO else self.in_ready_queues
            )
            entry = (msg.seq, next(self._arrivals), msg.payload.digest, msg.payload)
            bisect.insort(queues[frm], entry)
            self.flush_in_queues()
            delivered = self._evaluate_quorums()
        outbound = self.flush_out_queue()
        return ReceiveOutcome(outbound, delivered)

    # -- queue machinery ----------------------------------------------------

    def flush_in_queues(self) -> None:
        """Consume queued echo/ready entries strictly in sequence order.

        A gap (entry seq beyond last+1) stops consumption for that peer until
        the missing sequence arrives; duplicates for an already-consumed
        sequence are dropped without touching any tally.
        """
        for peer in sorted(self.last_echo):
            self._drain(self.in_echo_queues[peer], self.last_echo, peer, self.echo_tally)
            self._drain(self.in_ready_queues[peer], self.last_ready, peer, self.ready_tally)

    def _drain(self, queue: list, last: dict, peer: AgentId, tally: dict) -> None:
        while queue:
            seq, _arr, dig, payload = queue[0]
            if seq <= last[peer]:
                queue.pop(0)  # duplicate for a consumed sequence
                continue
            if seq == last[peer] + 1:
                queue.pop(0)
                last[peer] = seq
                tally.setdefault((seq, dig), set()).add(peer)
                self._payloads.setdefault((seq, dig), payload)
                continue
            break

    def flush_out_queue(self) -> list[tuple[AgentId, BroadcastMessage]]:
        """Release queued outgoing messages that pass the retaliation gate.

        A message with sequence s is released to peer j only once j has
        completed sequence s-1 (sent both its echo and its ready); the first
        withheld entry blocks everything behind it for that peer.
        """
        released: list[tuple[AgentId, BroadcastMessage]] = []
        for peer in sorted(self.out_queues):
            queue = self.out_queues[peer]
            while queue:
                seq, _arr, msg = queue[0]
                if min(self.last_echo[peer], self.last_ready[peer]) >= seq - 1:
                    queue.pop(0)
                    if self._blocked_at[peer] == seq:
                        self._blocked_at[peer] = None
                        self.events.append(
                            {"kind": "RETAL_UNBLOCK", "peer": peer, "seq": seq}
                        )
                    released.append((peer, msg))
                else:
                    if self._blocked_at[peer] != seq:
                        self._blocked_at[peer] = seq
                        self.events.append(
                            {"kind": "RETAL_BLOCK", "peer": peer, "seq": seq}
                        )
                    break
        return released

    # -- quorums and delivery -------------------------------------------------

    def _evaluate_quorums(self) -> list[tuple[int, Transaction]]:
        th = self.thresholds
        delivered: list[tuple[int, Transaction]] = []
        for key in sorted(set(self.echo_tally) | set(self.ready_tally)):
            seq, _dig = key
            echoes = len(self.echo_tally.get(key, ()))
            readies = len(self.ready_tally.get(key, ()))
            if echoes >= th.echo_quorum or readies >= th.ready_init:
                payload = self._payloads[key]
                if seq not in self.echo_sent:
                    self._enqueue_wave(MessageKind.ECHO, seq, payload)
                if seq not in self.ready_sent:
                    self._enqueue_wave(MessageKind.READY, seq, payload)
            if readies >= th.deliver_quorum:
                out = self.deliver(self._payloads[key], seq)
                if out is not None:
                    delivered.append((seq, out))
        return delivered

    def deliver(self, payload: Transaction, seq: int) -> Transaction | None:
        """Record the first delivery for seq; repeat quorum events yield nothing."""
        if seq in self.delivered:
            return None
        self.delivered[seq] = payload.digest
        if self.self_id == self.owner and seq >= self.next_seq:
            self.next_seq = seq + 1
        return payload

    def _enqueue_wave(self, kind: MessageKind, seq: int, payload: Transaction) -> None:
        # one echo and one ready per sequence, fanned out to every agent
        (self.echo_sent if kind is MessageKind.ECHO else self.ready_sent).add(seq)
        msg = BroadcastMessage(self.owner, kind, seq, payload)
        for peer in sorted(self.out_queues):
            bisect.insort(self.out_queues[peer], (seq, next(self._arrivals), msg))

    def drain_events(self) -> list[dict]:
        out, self.events = self.events, []
        return out
