"""Bulk-synchronous-parallel runtime embedded in transducer instances.

A coordinator is created per transducer plan node; each instance obtains its
context once via init. Messages sent in superstep s become readable after
the barrier that closes s. The group halts only when every peer votes done
in the same superstep.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from typing import Optional

from .datamodel import Row
from .errors import BspError


class BspContext:
    """Per-instance handle; owned by exactly one instance thread."""

    def __init__(self, coordinator: "BspCoordinator", my_id: int, npeers: int):
        self._coord = coordinator
        self.my_id = my_id
        self.npeers = npeers
        self.superstep = 0
        self.halted = False
        self.inbox: deque = deque()
        self.outboxes: list[list] = [[] for _ in range(npeers)]

    def _check_live(self, what: str) -> None:
        if self.halted:
            raise BspError(f"{what} called after the group voted to halt")

    def send(self, peer: int, message: Row) -> None:
        """Queue a message for delivery to peer at the next superstep."""
        self._check_live("send")
        if not 0 <= peer < self.npeers:
            raise BspError(f"peer {peer} out of range [0, {self.npeers})")
        self.outboxes[peer].append(message)

    def next(self) -> Optional[Row]:
        """Next message delivered for the current superstep, or None."""
        self._check_live("next")
        if self.inbox:
            return self.inbox.popleft()
        return None

    def sync(self, vote_done: bool) -> bool:
        """Barrier closing the current superstep.

        Blocks until every peer arrives, delivers all queued messages for
        the next superstep, and returns True only if every peer voted done.
        """
        self._check_live("sync")
        return self._coord._sync(self, vote_done)


class BspCoordinator:
    """Barrier and mailbox handoff shared by the instances of one group.

    Safe for n concurrent arrivals; the last arriver performs delivery.
    """

    def __init__(self, nseg: int, timeout: float = 60.0, abort_event: Optional[threading.Event] = None):
        self.nseg = nseg
        self.timeout = timeout
        self.abort_event = abort_event
        self._lock = threading.Condition()
        self._contexts: dict[int, BspContext] = {}
        self._group_size: Optional[int] = None
        self._arrived = 0
        self._votes: list[bool] = []
        self._generation = 0
        self._last_done = False

    def init_context(self, instance_id: int, n: int) -> BspContext:
        """Register an instance; all instances must pass the same n == nseg."""
        if n < 1:
            raise BspError(f"group size must be positive, got {n}")
        with self._lock:
            if self._group_size is None:
                if n != self.nseg:
                    raise BspError(
                        f"group size {n} does not match the {self.nseg} transducer instances"
                    )
                self._group_size = n
            elif n != self._group_size:
                raise BspError(f"mismatched group sizes: {self._group_size} vs {n}")
            if instance_id in self._contexts:
                raise BspError(f"instance {instance_id} initialized the group twice")
            if not 0 <= instance_id < n:
                raise BspError(f"instance id {instance_id} out of range [0, {n})")
            ctx = BspContext(self, instance_id, n)
            self._contexts[instance_id] = ctx
            return ctx

    def _deliver(self) -> None:
        # Concatenate per-sender outboxes in sender-id order: FIFO per
        # (sender, receiver) pair, interleaving across senders unspecified.
        for dest_id, dest in self._contexts.items():
            incoming = deque()
            for sender_id in sorted(self._contexts):
                incoming.extend(self._contexts[sender_id].outboxes[dest_id])
            dest.inbox = incoming
        for ctx in self._contexts.values():
            ctx.outboxes = [[] for _ in range(ctx.npeers)]

    def _sync(self, ctx: BspContext, vote_done: bool) -> bool:
        deadline = time.monotonic() + self.timeout
        with self._lock:
            generation = self._generation
            self._votes.append(vote_done)
            self._arrived += 1
            if self._arrived == self._group_size:
                done = all(self._votes)
                self._deliver()
                for peer in self._contexts.values():
                    peer.superstep += 1
                    if done:
                        peer.halted = True
                self._last_done = done
                self._arrived = 0
                self._votes = []
                self._generation += 1
                self._lock.notify_all()
                return done
            while self._generation == generation:
                if self.abort_event is not None and self.abort_event.is_set():
                    raise BspError("sync abandoned: query aborted")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise BspError(
                        f"sync timeout after {self.timeout:.0f}s: a peer never reached the barrier"
                    )
                self._lock.wait(timeout=min(remaining, 0.1))
            return self._last_done
