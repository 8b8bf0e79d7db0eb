"""Demand sources: a scenario-controlled synthetic generator and trace replay."""

import dataclasses
import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cache_mgr import Admission
from .core import LINE_BYTES, TICKS_PER_NS, ConfigError, DemandRequest, ns


class Pattern(enum.Enum):
    LINEAR = "linear"
    RANDOM = "random"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ConfigError(f"unknown traffic pattern {text!r}") from None


@dataclass
class SyntheticConfig:
    pattern: Pattern = Pattern.RANDOM
    read_pct: float = 1.0
    target_miss_ratio: float = 0.0
    dirty_victim_pct: float | None = 0.0  # None: take whatever victim the pattern lands on
    inter_arrival: int = 0  # Ticks; 0 = saturating
    duration: int = ns(10_000)
    footprint: tuple = (0, 3 << 30)  # [start, end) bytes
    seed: int | None = None
    resident_fraction: float = 1.0
    dirty_fraction: float | None = None  # None: seed dirty lines at dirty_victim_pct
    stationary: bool = True
    max_requests: int = 0  # stop after this many admissions; 0 = no limit

    def __post_init__(self):
        self.pattern = Pattern.parse(self.pattern)

    @property
    def seed_dirty_fraction(self):
        if self.dirty_fraction is not None:
            return self.dirty_fraction
        return self.dirty_victim_pct or 0.0

    def validate(self, far_capacity=None):
        for name in ("read_pct", "target_miss_ratio", "resident_fraction", "seed_dirty_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                label = name.replace("seed_", "")
                raise ConfigError(f"traffic.{label} must be within [0, 1], got {v}")
        if self.dirty_victim_pct is not None and not 0 <= self.dirty_victim_pct <= 1:
            raise ConfigError(f"traffic.dirty_victim_pct must be within [0, 1], got {self.dirty_victim_pct}")
        if self.inter_arrival < 0:
            raise ConfigError("traffic.inter_arrival must be >= 0")
        if self.max_requests < 0:
            raise ConfigError("traffic.max_requests must be >= 0")
        if self.duration <= 0:
            raise ConfigError("traffic.duration must be positive")
        lo, hi = self.footprint
        if lo % LINE_BYTES or hi % LINE_BYTES or hi <= lo or lo < 0:
            raise ConfigError(f"traffic.footprint {self.footprint} must be a non-empty 64-byte aligned range")
        if far_capacity is not None and hi > far_capacity:
            raise ConfigError(f"traffic.footprint end {hi:#x} exceeds far memory capacity {far_capacity:#x}")
        return self


class _Footprint:
    """Index and tag ranges a byte range covers in a direct-mapped cache."""

    def __init__(self, footprint, num_lines):
        lo, hi = footprint
        self.lo = lo // LINE_BYTES
        self.hi = hi // LINE_BYTES
        self.n = num_lines
        self.index_base = self.lo % num_lines
        self.index_count = min(self.hi - self.lo, num_lines)

    def index(self, k):
        return (self.index_base + k) % self.n

    def tag_range(self, index):
        n = self.n
        return -((index - self.lo) // n), (self.hi - 1 - index) // n

    def contains(self, index, tag):
        return self.lo <= tag * self.n + index < self.hi


def seed_cache(tags, resident_fraction, dirty_fraction, footprint, rng):
    """Pre-populate ``tags`` with lines drawn from ``footprint``.

    Each index covered by the footprint is made valid with probability
    ``resident_fraction`` (tag uniform over the footprint's tags for that index);
    valid lines are dirty with probability ``dirty_fraction``.
    """
    if not 0 <= resident_fraction <= 1 or not 0 <= dirty_fraction <= 1:
        raise ConfigError("seed_cache fractions must be within [0, 1]")
    n = tags.geom.num_lines
    fp = _Footprint(footprint, n)
    gen = np.random.default_rng(rng.getrandbits(64))
    idx = np.arange(n, dtype=np.int64)
    t_min = -((idx - fp.lo) // n)
    t_max = (fp.hi - 1 - idx) // n
    usable = t_max >= t_min
    valid = usable & (gen.random(n) < resident_fraction)
    span = np.where(usable, t_max - t_min + 1, 1)
    tag = t_min + np.floor(gen.random(n) * span).astype(np.int64)
    tag = np.where(valid, tag, 0)
    dirty = valid & (gen.random(n) < dirty_fraction)
    tags.load(valid.astype(np.uint8).tobytes(), dirty.astype(np.uint8).tobytes(), tag.tolist())


class SyntheticSource:
    """Scenario generator injecting straight into a cache manager.

    Hit/miss and victim cleanliness are chosen by construction: the generator
    reads the manager's tag store and only targets indices with no request in
    flight, so the class it picks is the class the manager will see.
    """

    MAX_TRIES = 4096

    def __init__(self, engine, manager, config: SyntheticConfig):
        self.engine = engine
        self.manager = manager
        self.config = config
        self.rng = engine.rng
        self.fp = _Footprint(config.footprint, manager.geom.num_lines)
        self.cursor = 0
        self.next_id = 0
        self.active = False
        self.pending = None
        self.backlog = []
        self.substitutions = 0
        self.generated = 0
        self.admitted = 0
        self._restore = {}
        manager.retry_listeners.append(self._on_retry)
        if config.stationary:
            manager.retire_listeners.append(self._on_retire)

    # request construction ----------------------------------------------------

    def _next_k(self):
        if self.config.pattern is Pattern.LINEAR:
            k = self.cursor
            self.cursor = (k + 1) % self.fp.index_count
            return k
        return int(self.rng.random() * self.fp.index_count)

    def _find(self, want):
        """Index matching ``want(valid, dirty, tag)`` and not in flight, or None."""
        tags = self.manager.tags
        busy = self.manager.is_busy
        fp = self.fp
        for _ in range(self.MAX_TRIES):
            i = fp.index(self._next_k())
            if busy(i):
                continue
            if want(tags.valid[i], tags.dirty[i], tags.tags[i], i):
                return i
        return None

    def _miss_tag(self, index):
        tags = self.manager.tags
        lo, hi = self.fp.tag_range(index)
        resident = tags.tags[index] if tags.valid[index] else None
        choices = hi - lo + 1 - (1 if resident is not None and lo <= resident <= hi else 0)
        if choices <= 0:
            return None
        t = lo + int(self.rng.random() * choices)
        if resident is not None and t >= resident >= lo:
            t += 1
        return t

    def next_request(self):
        # Fixed draw order (write, miss, dirty, index..., tag) so scenarios that
        # differ only in their targets see the same index sequence.
        c = self.config
        rng = self.rng
        tags = self.manager.tags
        fp = self.fp
        is_write = rng.random() >= c.read_pct
        want_miss = rng.random() < c.target_miss_ratio
        u_dirty = rng.random()
        if c.dirty_victim_pct is None:
            want_dirty = None
        else:
            want_dirty = want_miss and u_dirty < c.dirty_victim_pct

        if not want_miss:
            index = self._find(_hit_ok(fp)) if any_valid(tags) else None
            if index is not None:
                rng.random()
                addr = (tags.tags[index] * fp.n + index) * LINE_BYTES
                return self._make(addr, is_write, index)
            self.substitutions += 1
            want_dirty = False

        if want_dirty and tags.dirty_count == 0:
            index = None
        else:
            index = self._find(_miss_ok(fp, want_dirty))
        if index is None and want_dirty:
            self.substitutions += 1
            want_dirty = False
            index = self._find(_miss_ok(fp, want_dirty))
        if index is None:
            # nothing matches: let the request conflict rather than spin
            self.substitutions += 1
            index = fp.index(self._next_k())
        tag = self._miss_tag(index)
        if tag is None:
            raise ConfigError("traffic footprint is too small to produce misses")
        return self._make((tag * fp.n + index) * LINE_BYTES, is_write, index)

    def _make(self, addr, is_write, index):
        req = DemandRequest(self.next_id, addr, is_write, self.engine.now)
        self.next_id += 1
        self.generated += 1
        if self.config.stationary:
            tags = self.manager.tags
            if tags.valid[index]:
                self._restore[req.id] = tags.dirty[index]
        return req

    # injection ---------------------------------------------------------------

    def start(self):
        self.active = True
        self.engine.schedule(self._tick, 0)

    def stop(self):
        self.active = False
        self.pending = None

    def _tick(self):
        if not self.active:
            return
        if self.engine.now >= self.config.duration:
            self.stop()
            return
        if self.config.inter_arrival:
            if not self.config.max_requests or self.generated < self.config.max_requests:
                self.backlog.append(self.next_request())
            self._drain_backlog()
            self.engine.schedule(self._tick, self.config.inter_arrival)
        else:
            self._saturate()

    def _drain_backlog(self):
        backlog = self.backlog
        while backlog:
            req = backlog[0]
            if self.manager.receive(req) is Admission.STALLED:
                return
            backlog.pop(0)
            self._admitted()

    def _saturate(self):
        manager = self.manager
        while self.active and self.engine.now < self.config.duration:
            req = self.pending
            if req is None:
                req = self.next_request()
            elif req.arrival != self.engine.now:
                # a stalled request arrives when the manager can take it
                req = dataclasses.replace(req, arrival=self.engine.now)
            if manager.receive(req) is Admission.STALLED:
                self.pending = req
                return
            self.pending = None
            self._admitted()

    def _admitted(self):
        self.admitted += 1
        if self.admitted == self.config.max_requests:
            self.stop()

    def _on_retry(self):
        if not self.active:
            return
        if self.engine.now >= self.config.duration:
            self.stop()
            return
        if self.config.inter_arrival:
            self._drain_backlog()
        else:
            self._saturate()

    def _on_retire(self, entry, now):
        dirty = self._restore.pop(entry.req.id, None)
        if dirty is None:
            return
        tags = self.manager.tags
        if tags.dirty[entry.index] != dirty:
            tags.set_dirty(entry.index, bool(dirty))


def _hit_ok(fp):
    def ok(valid, dirty, tag, i):
        return valid and fp.contains(i, tag)
    return ok


def _miss_ok(fp, want_dirty):
    def ok(valid, dirty, tag, i):
        lo, hi = fp.tag_range(i)
        spare = hi - lo + 1 - (1 if valid and lo <= tag <= hi else 0)
        if spare <= 0:
            return False
        return want_dirty is None or bool(valid and dirty) == want_dirty
    return ok


def any_valid(tags):
    # cheap probe; an all-invalid store only happens on a cold cache
    return tags.valid.find(1) >= 0


class TraceRecord(NamedTuple):
    tick: int
    addr: int
    is_write: bool


class TraceError(ConfigError):
    pass


def parse_trace(lines, source="<trace>"):
    """Parse ``<tick_ns> <hex_addr> <R|W>`` records; blank lines and ``#`` comments are skipped."""
    records = []
    last = -1
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise TraceError(f"{source}:{lineno}: expected '<tick_ns> <hex_addr> <R|W>', got {line.strip()!r}")
        t, a, rw = parts
        try:
            tick = round(float(t) * TICKS_PER_NS)
            addr = int(a, 16)
        except ValueError:
            raise TraceError(f"{source}:{lineno}: malformed tick or address in {line.strip()!r}") from None
        rw = rw.upper()
        if rw not in ("R", "W"):
            raise TraceError(f"{source}:{lineno}: access type must be R or W, got {parts[2]!r}")
        if tick < 0:
            raise TraceError(f"{source}:{lineno}: negative tick")
        if addr % LINE_BYTES:
            raise TraceError(f"{source}:{lineno}: address {addr:#x} is not 64-byte aligned")
        if tick < last:
            raise TraceError(f"{source}:{lineno}: records are not sorted by tick")
        last = tick
        records.append(TraceRecord(tick, addr, rw == "W"))
    return records


def load_trace(path):
    with open(path) as f:
        return parse_trace(f, str(path))


def format_trace(records):
    return "".join(f"{r.tick / TICKS_PER_NS:g} {r.addr:#x} {'W' if r.is_write else 'R'}\n" for r in records)


class TraceSource:
    """Replays records in order; each is injected at max(record tick, first tick it is accepted)."""

    def __init__(self, engine, manager, records, far_capacity=None):
        self.engine = engine
        self.manager = manager
        for r in records:
            if r.addr % LINE_BYTES:
                raise TraceError(f"trace address {r.addr:#x} is not 64-byte aligned")
            if far_capacity is not None and r.addr >= far_capacity:
                raise TraceError(f"trace address {r.addr:#x} exceeds far memory capacity")
        self.records = list(records)
        self.ptr = 0
        self.active = False
        self.injected = {}  # request id -> injection tick
        self._wake = None
        self.substitutions = 0
        manager.retry_listeners.append(self._pump)

    def start(self):
        self.active = True
        if self.records:
            self._wake = self.engine.schedule_at(self._wakeup, self.records[0].tick)

    def stop(self):
        self.active = False

    def replay(self, records=None):
        if records is not None:
            self.records = list(records)
            self.ptr = 0
        self.start()

    def _wakeup(self):
        self._wake = None
        self._pump()

    def _pump(self):
        if not self.active:
            return
        now = self.engine.now
        records = self.records
        while self.ptr < len(records):
            rec = records[self.ptr]
            if rec.tick > now:
                if self._wake is None:
                    self._wake = self.engine.schedule_at(self._wakeup, rec.tick)
                return
            req = DemandRequest(self.ptr, rec.addr, rec.is_write, now)
            if self.manager.receive(req) is Admission.STALLED:
                return
            self.injected[req.id] = now
            self.ptr += 1
        self.active = False
