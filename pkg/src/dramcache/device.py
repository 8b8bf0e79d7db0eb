"""Bank-level timing model of one memory channel with FR-FCFS scheduling.

Each channel owns a read queue and a write queue, a set of banks with an open-row
state, and a single data bus. The scheduler commits one operation at a time: it
picks an op (FR-FCFS among the active queue), computes the earliest data-bus slot
allowed by the target bank and the bus, and reserves it. The next decision is
taken early enough (``lookahead``) for a row-conflict access to still reach the
bus as soon as it frees, which lets activations on different banks overlap.
"""

import dataclasses
import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass

from .core import LINE_BYTES, ConfigError, ns


class DeviceKind(enum.Enum):
    HBM2_PSEUDO_CHANNEL = "hbm2"
    DDR4 = "ddr4"
    NVM = "nvm"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ConfigError(f"unknown device kind {text!r}")


@dataclass
class DeviceConfig:
    """Timing and buffering parameters of one channel; all latencies in Ticks.

    ``channels`` > 1 builds that many identical channels interleaved by cache-line
    index (HBM2 pseudo-channels); ``peak_bw`` and ``capacity_bytes`` are per channel.
    """

    kind: DeviceKind = DeviceKind.DDR4
    peak_bw: float = 19.2  # GB/s
    num_banks: int = 16
    tRCD: int = ns(14.16)
    tRP: int = ns(14.16)
    tCL: int = ns(14.16)
    tCWL: int = ns(12.0)
    tWR: int = ns(15.0)
    tRTW: int = ns(2.0)
    tWTR: int = ns(7.5)
    tBURST: int | None = None
    read_buffer: int = 64
    write_buffer: int = 64
    wr_high_watermark: float = 0.85
    wr_low_watermark: float = 0.50
    extra_read_lat: int = 0
    extra_write_lat: int = 0
    capacity_bytes: int = 3 << 30
    channels: int = 1
    row_bytes: int = 2048

    def __post_init__(self):
        self.kind = DeviceKind.parse(self.kind)
        if self.tBURST is None:
            self.tBURST = burst_ticks(self.peak_bw)

    @property
    def total_peak_bw(self):
        return self.peak_bw * self.channels

    @property
    def rows_per_bank(self):
        return max(1, self.capacity_bytes // (self.num_banks * self.row_bytes))

    def validate(self, name="device"):
        def fail(msg):
            raise ConfigError(f"{name}: {msg}")

        if self.peak_bw <= 0:
            fail("peak_bw must be positive")
        if self.num_banks <= 0 or self.channels <= 0:
            fail("num_banks and channels must be positive")
        if self.read_buffer <= 0 or self.write_buffer <= 0:
            fail("read_buffer and write_buffer must be positive")
        if not 0 < self.wr_low_watermark < self.wr_high_watermark <= 1:
            fail("watermarks must satisfy 0 < low < high <= 1")
        if self.tBURST <= 0:
            fail("tBURST must be positive")
        for field in ("tRCD", "tRP", "tCL", "tCWL", "tWR", "tRTW", "tWTR"):
            if getattr(self, field) < 0:
                fail(f"{field} must be non-negative")
        if self.kind is DeviceKind.NVM:
            if self.extra_read_lat <= 0 or self.extra_write_lat <= 0:
                fail("NVM devices need positive extra_read_lat and extra_write_lat")
        elif self.extra_read_lat or self.extra_write_lat:
            fail("DRAM devices must have zero extra_read_lat / extra_write_lat")
        if self.capacity_bytes <= 0 or self.capacity_bytes % LINE_BYTES:
            fail("capacity must be a positive multiple of 64 bytes")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def hbm2(cls, **overrides):
        params = dict(
            kind=DeviceKind.HBM2_PSEUDO_CHANNEL, peak_bw=16.0, num_banks=16,
            tRCD=ns(14), tRP=ns(14), tCL=ns(14), tCWL=ns(4), tWR=ns(16),
            tRTW=ns(2), tWTR=ns(4), tBURST=ns(4),
            capacity_bytes=64 << 20, channels=2,
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def ddr4(cls, **overrides):
        params = dict(kind=DeviceKind.DDR4, peak_bw=19.2, capacity_bytes=3 << 30)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def nvm(cls, **overrides):
        params = dict(
            kind=DeviceKind.NVM, peak_bw=19.2, capacity_bytes=3 << 30,
            extra_read_lat=ns(150), extra_write_lat=ns(500), write_buffer=16,
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def preset(cls, kind, **overrides):
        kind = DeviceKind.parse(kind)
        factory = {
            DeviceKind.HBM2_PSEUDO_CHANNEL: cls.hbm2,
            DeviceKind.DDR4: cls.ddr4,
            DeviceKind.NVM: cls.nvm,
        }[kind]
        return factory(**overrides)


def burst_ticks(peak_bw):
    """Ticks to move one 64-byte line at ``peak_bw`` GB/s."""
    return round(LINE_BYTES / peak_bw * 1000)


_op_ids = itertools.count()


class DeviceOp:
    __slots__ = ("op_id", "addr", "is_write", "origin", "purpose", "local_addr",
                 "bank", "row", "seq", "issued", "submitted_at", "data_start", "done_at")

    def __init__(self, addr, is_write, origin=None, purpose="", op_id=None):
        if addr % LINE_BYTES:
            raise ValueError(f"device op address {addr:#x} is not 64-byte aligned")
        self.op_id = next(_op_ids) if op_id is None else op_id
        self.addr = addr
        self.is_write = is_write
        self.origin = origin
        self.purpose = purpose
        self.local_addr = addr
        self.issued = False
        self.submitted_at = None
        self.data_start = None
        self.done_at = None

    def __repr__(self):
        kind = "W" if self.is_write else "R"
        return f"DeviceOp({self.op_id}, {kind}, {self.addr:#x}, {self.purpose})"


class Bank:
    __slots__ = ("open_row", "col_ready", "act_ready")

    def __init__(self):
        self.open_row = None
        self.col_ready = 0
        self.act_ready = 0


class _OpQueue:
    """Queue indexed per bank (arrival order) and per (bank, row) for row hits."""

    def __init__(self, capacity, num_banks):
        self.capacity = capacity
        self.size = 0
        self.by_bank = [deque() for _ in range(num_banks)]
        self.groups = {}

    def __len__(self):
        return self.size

    def push(self, op):
        self.by_bank[op.bank].append(op)
        key = (op.bank, op.row)
        group = self.groups.get(key)
        if group is None:
            self.groups[key] = group = deque()
        group.append(op)
        self.size += 1

    def head(self, bank):
        q = self.by_bank[bank]
        while q and q[0].issued:
            q.popleft()
        return q[0] if q else None

    def oldest(self):
        heads = [h for h in (self.head(b) for b in range(len(self.by_bank))) if h is not None]
        return min(heads, key=lambda op: op.seq) if heads else None

    def remove(self, op):
        # ``op`` is always the oldest of its (bank, row) group
        key = (op.bank, op.row)
        group = self.groups[key]
        group.popleft()
        if not group:
            del self.groups[key]
        op.issued = True
        self.size -= 1


class Device:
    """One memory channel.

    ``on_complete(op)`` fires at data-return time for reads and when the write burst
    reaches the media for writes. ``on_space(device, is_write)`` fires whenever an op
    leaves a queue.
    """

    BUCKET = ns(1000)

    def __init__(self, engine, config: DeviceConfig, name="dev", on_complete=None, on_space=None):
        self.engine = engine
        self.config = config
        self.name = name
        self.on_complete = on_complete
        self.on_space = on_space
        self.trace = None
        c = config
        self.banks = [Bank() for _ in range(c.num_banks)]
        self.read_q = _OpQueue(c.read_buffer, c.num_banks)
        self.write_q = _OpQueue(c.write_buffer, c.num_banks)
        self.write_mode = False
        self._high = c.wr_high_watermark * c.write_buffer
        self._low = c.wr_low_watermark * c.write_buffer
        self.lookahead = c.tRP + c.tRCD + max(c.tCL + c.extra_read_lat, c.tCWL)
        self.bus_free = 0
        self._last_dir = None
        self._decision = None
        self._seq = 0
        self.reads = 0
        self.writes = 0
        self.completed_reads = 0
        self.row_hits = 0
        self.row_misses = 0
        self.row_conflicts = 0
        self.bytes_transferred = 0
        self.buckets = {}
        self.max_read_q = 0
        self.max_write_q = 0
        self.write_mode_switches = 0

    def __repr__(self):
        return f"Device({self.name}, rq={len(self.read_q)}, wq={len(self.write_q)})"

    # address mapping --------------------------------------------------------

    def locate(self, addr):
        c = self.config
        bank = (addr // LINE_BYTES) % c.num_banks
        row = (addr // c.row_bytes) % c.rows_per_bank
        return bank, row

    # admission ----------------------------------------------------------------

    def can_accept(self, is_write):
        q = self.write_q if is_write else self.read_q
        return q.size < q.capacity

    def submit(self, op: DeviceOp) -> bool:
        """Queue ``op``; returns False (rejected) when the target queue is full."""
        q = self.write_q if op.is_write else self.read_q
        if q.size >= q.capacity:
            return False
        op.bank, op.row = self.locate(op.local_addr)
        self._seq += 1
        op.seq = self._seq
        op.submitted_at = self.engine.now
        q.push(op)
        if op.is_write:
            self.max_write_q = max(self.max_write_q, q.size)
        else:
            self.max_read_q = max(self.max_read_q, q.size)
        if self._decision is None:
            self._arm()
        return True

    @property
    def idle(self):
        return not self.read_q.size and not self.write_q.size and self._decision is None

    # scheduling ---------------------------------------------------------------

    def _arm(self):
        engine = self.engine
        at = max(engine.now, self.bus_free - self.lookahead)
        self._decision = engine.schedule(self._decide, at - engine.now)

    def _active_queue(self):
        nw = self.write_q.size
        nr = self.read_q.size
        if self.write_mode:
            if nw <= self._low:
                self.write_mode = False
        elif nw >= self._high:
            self.write_mode = True
            self.write_mode_switches += 1
        if nw and (self.write_mode or not nr):
            return self.write_q
        return self.read_q

    def select_next(self):
        """FR-FCFS pick from the active queue without issuing it.

        The oldest row hit wins; otherwise the op whose bank can start its
        access first, oldest first among equally ready banks.
        """
        if not self.read_q.size and not self.write_q.size:
            return None
        q = self._active_queue()
        c = self.config
        groups = q.groups
        by_bank = q.by_bank
        hit = None
        other = None
        other_ready = None
        for b, bank in enumerate(self.banks):
            bq = by_bank[b]
            while bq and bq[0].issued:
                bq.popleft()
            if not bq:
                continue
            group = groups.get((b, bank.open_row))
            if group:
                if hit is None or group[0].seq < hit.seq:
                    hit = group[0]
            elif hit is None:
                head = bq[0]
                ready = bank.act_ready + (c.tRCD if bank.open_row is None else c.tRP + c.tRCD)
                if other is None or ready < other_ready or (ready == other_ready and head.seq < other.seq):
                    other, other_ready = head, ready
        return hit if hit is not None else other

    def _decide(self):
        self._decision = None
        op = self.select_next()
        if op is None:
            return
        q = self.write_q if op.is_write else self.read_q
        q.remove(op)
        self._issue(op)
        if self.read_q.size or self.write_q.size:
            self._arm()
        if self.on_space is not None:
            self.on_space(self, op.is_write)

    def _issue(self, op):
        c = self.config
        now = self.engine.now
        bank = self.banks[op.bank]
        if bank.open_row == op.row:
            col = max(now, bank.col_ready)
            self.row_hits += 1
        elif bank.open_row is None:
            col = max(now, bank.act_ready) + c.tRCD
            self.row_misses += 1
        else:
            col = max(now, bank.act_ready) + c.tRP + c.tRCD
            self.row_conflicts += 1

        bus = self.bus_free
        if self._last_dir is not None and self._last_dir != op.is_write:
            # tWTR gates the read command, so the read data also waits out tCL
            bus += c.tRTW if op.is_write else c.tWTR + c.tCL
        if op.is_write:
            lat = c.tCWL
        else:
            lat = c.tCL + c.extra_read_lat
        start = max(col + lat, bus)
        end = start + c.tBURST
        col = start - lat

        bank.open_row = op.row
        if op.is_write:
            media = end + c.extra_write_lat
            bank.col_ready = media if c.extra_write_lat else col + c.tBURST
            bank.act_ready = media + c.tWR
            self.writes += 1
        else:
            bank.col_ready = col + c.tBURST + c.extra_read_lat
            bank.act_ready = end
            self.reads += 1
        self.bus_free = end
        self._last_dir = op.is_write

        self.bytes_transferred += LINE_BYTES
        b = start // self.BUCKET
        self.buckets[b] = self.buckets.get(b, 0) + LINE_BYTES
        op.data_start = start
        op.done_at = end
        if self.trace is not None:
            self.trace(start, self.name, op)
        self.engine.schedule(self._complete, end - now, op)

    def _complete(self, op):
        if not op.is_write:
            self.completed_reads += 1
        if self.on_complete is not None:
            self.on_complete(op)

    # statistics ---------------------------------------------------------------

    def bytes_in(self, start, end):
        """Bytes whose burst started in ``[start, end)``, prorating partial buckets."""
        if end <= start:
            raise ValueError("empty utilization window")
        size = self.BUCKET
        total = 0.0
        first, last = start // size, (end - 1) // size
        for b in range(first, last + 1):
            amount = self.buckets.get(b)
            if not amount:
                continue
            lo = max(start, b * size)
            hi = min(end, (b + 1) * size)
            total += amount * (hi - lo) / size
        return total

    def utilization(self, start, end):
        if end <= start:
            raise ValueError("zero-length utilization window")
        seconds = (end - start) * 1e-12
        return self.bytes_in(start, end) / (self.config.peak_bw * 1e9 * seconds)


class ChannelGroup:
    """One or more identical channels interleaved by cache-line index."""

    def __init__(self, engine, config: DeviceConfig, name="dev", on_complete=None, on_space=None):
        self.config = config
        self.name = name
        n = config.channels
        if n == 1:
            names = [name]
        else:
            names = [f"{name}{i}" for i in range(n)]
        self.channels = [Device(engine, config, nm, on_complete, on_space) for nm in names]

    def __iter__(self):
        return iter(self.channels)

    def __len__(self):
        return len(self.channels)

    def route(self, addr):
        """Return ``(channel index, channel-local address)``."""
        n = len(self.channels)
        if n == 1:
            return 0, addr
        line = addr // LINE_BYTES
        return line % n, (line // n) * LINE_BYTES

    @property
    def peak_bw(self):
        return self.config.total_peak_bw

    @property
    def bytes_transferred(self):
        return sum(ch.bytes_transferred for ch in self.channels)

    def utilization(self, start, end):
        if end <= start:
            raise ValueError("zero-length utilization window")
        seconds = (end - start) * 1e-12
        moved = sum(ch.bytes_in(start, end) for ch in self.channels)
        return moved / (self.peak_bw * 1e9 * seconds)

    @property
    def idle(self):
        return all(ch.idle for ch in self.channels)

    def set_trace(self, trace):
        for ch in self.channels:
            ch.trace = trace

    def counts(self):
        return sum(ch.reads for ch in self.channels), sum(ch.writes for ch in self.channels)


def peak_window_ratio(device, start, end):
    """Largest per-bucket bytes / (peak * bucket) over ``[start, end)``."""
    size = Device.BUCKET
    cap = device.config.peak_bw * 1e9 * size * 1e-12
    worst = 0.0
    for b in range(start // size, math.ceil(end / size)):
        worst = max(worst, device.buckets.get(b, 0) / cap)
    return worst
