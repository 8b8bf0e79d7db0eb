"""Deterministic discrete-event kernel.

Events are ordered by ``(fire_at, seq)``; ``seq`` is a global insertion counter, so
simultaneous events fire in the order they were scheduled.
"""

import heapq
import random


class EngineClosed(RuntimeError):
    pass


class Engine:
    def __init__(self, seed=0):
        self.now = 0
        self.seed = seed
        self.rng = random.Random(seed)
        self.dispatched = 0
        self._queue = []
        self._seq = 0
        self._closed = False

    def schedule(self, action, delay=0, *args):
        """Run ``action(*args)`` ``delay`` Ticks from now; returns a cancellable handle."""
        if self._closed:
            raise EngineClosed("engine has been torn down")
        if delay < 0:
            raise ValueError(f"negative delay {delay}")
        self._seq += 1
        event = [self.now + delay, self._seq, action, args]
        heapq.heappush(self._queue, event)
        return event

    def schedule_at(self, action, tick, *args):
        return self.schedule(action, tick - self.now, *args)

    @staticmethod
    def cancel(handle):
        handle[2] = None

    @staticmethod
    def pending(handle):
        return handle[2] is not None

    def __len__(self):
        return sum(1 for e in self._queue if e[2] is not None)

    def peek(self):
        """Tick of the next live event, or None."""
        q = self._queue
        while q and q[0][2] is None:
            heapq.heappop(q)
        return q[0][0] if q else None

    def run_until(self, limit):
        """Dispatch every event with ``fire_at <= limit``.

        Returns the tick of the last dispatched event, or ``limit`` when the queue
        drained before reaching it.
        """
        q = self._queue
        pop = heapq.heappop
        last = None
        count = 0
        while q:
            event = q[0]
            if event[0] > limit:
                break
            pop(q)
            action = event[2]
            if action is None:
                continue
            self.now = last = event[0]
            event[2] = None
            count += 1
            action(*event[3])
        self.dispatched += count
        if last is None or self.peek() is None:
            last = max(limit, self.now)
        self.now = last
        return last

    def run(self):
        """Dispatch until the queue is empty; returns the final tick."""
        q = self._queue
        pop = heapq.heappop
        count = 0
        while q:
            event = pop(q)
            action = event[2]
            if action is None:
                continue
            self.now = event[0]
            event[2] = None
            count += 1
            action(*event[3])
        self.dispatched += count
        return self.now

    def close(self):
        self._closed = True
        self._queue.clear()
