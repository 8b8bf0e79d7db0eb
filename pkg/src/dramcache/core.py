"""Shared domain types: time base, demand requests, cache geometry and request classes."""

from dataclasses import dataclass
from typing import NamedTuple

LINE_BYTES = 64
TICKS_PER_NS = 1000


class ConfigError(ValueError):
    pass


def ns(value) -> int:
    """Convert a latency in nanoseconds to Ticks (picoseconds)."""
    ticks = round(value * TICKS_PER_NS)
    if ticks < 0:
        raise ConfigError(f"negative latency: {value} ns")
    return ticks


def to_ns(ticks: int) -> float:
    return ticks / TICKS_PER_NS


@dataclass(frozen=True)
class DemandRequest:
    id: int
    addr: int
    is_write: bool
    arrival: int = 0

    def __post_init__(self):
        if self.addr % LINE_BYTES:
            raise ConfigError(f"request {self.id}: address {self.addr:#x} is not 64-byte aligned")


@dataclass(frozen=True)
class CacheGeometry:
    capacity_bytes: int = 128 << 20
    line_bytes: int = LINE_BYTES

    def __post_init__(self):
        if self.line_bytes != LINE_BYTES:
            raise ConfigError("only 64-byte lines are supported")
        if self.capacity_bytes <= 0 or self.capacity_bytes % self.line_bytes:
            raise ConfigError("cache capacity must be a positive multiple of the line size")
        n = self.capacity_bytes // self.line_bytes
        if n & (n - 1):
            raise ConfigError(f"number of cache lines ({n}) must be a power of two")

    @property
    def num_lines(self) -> int:
        return self.capacity_bytes // self.line_bytes


class RequestClass(NamedTuple):
    is_write: bool
    is_hit: bool
    victim_dirty: bool

    @property
    def label(self) -> str:
        return ("w" if self.is_write else "r") + ("h" if self.is_hit else "m") + ("d" if self.victim_dirty else "c")


# Table order: read hit dirty/clean, read miss dirty/clean, write hit ..., write miss ...
ALL_CLASSES = tuple(
    RequestClass(w, h, d) for w in (False, True) for h in (True, False) for d in (True, False)
)
CLASS_LABELS = tuple(c.label for c in ALL_CLASSES)
CLASS_BY_LABEL = {c.label: c for c in ALL_CLASSES}


class LineMeta(NamedTuple):
    valid: bool = False
    dirty: bool = False
    tag: int = 0


def map_to_cache(addr: int, geom: CacheGeometry, far_capacity: int | None = None):
    """Return ``(index, tag)`` for a direct-mapped cache of ``geom``."""
    if addr % LINE_BYTES:
        raise ConfigError(f"address {addr:#x} is not 64-byte aligned")
    if addr < 0 or (far_capacity is not None and addr >= far_capacity):
        raise ConfigError(f"address {addr:#x} is outside far memory")
    line = addr // LINE_BYTES
    n = geom.num_lines
    return line & (n - 1), line // n


def line_address(index: int, tag: int, geom: CacheGeometry) -> int:
    return (tag * geom.num_lines + index) * LINE_BYTES


def classify(req: DemandRequest, meta: LineMeta, geom: CacheGeometry) -> RequestClass:
    _, tag = map_to_cache(req.addr, geom)
    hit = meta.valid and meta.tag == tag
    return RequestClass(req.is_write, hit, bool(meta.valid and meta.dirty))


class TagStore:
    """Functional valid/dirty/tag array, one entry per cache line."""

    def __init__(self, geom: CacheGeometry):
        self.geom = geom
        n = geom.num_lines
        self.valid = bytearray(n)
        self.dirty = bytearray(n)
        self.tags = [0] * n
        self.dirty_count = 0

    def __len__(self):
        return self.geom.num_lines

    def __getitem__(self, index) -> LineMeta:
        return LineMeta(bool(self.valid[index]), bool(self.dirty[index]), self.tags[index])

    def lookup(self, addr: int) -> LineMeta:
        index, _ = map_to_cache(addr, self.geom)
        return self[index]

    def classify(self, req: DemandRequest) -> RequestClass:
        line = req.addr // LINE_BYTES
        index = line & (self.geom.num_lines - 1)
        valid = self.valid[index]
        hit = bool(valid) and self.tags[index] == line // self.geom.num_lines
        return RequestClass(req.is_write, hit, bool(valid and self.dirty[index]))

    def fill(self, index: int, tag: int, dirty: bool):
        self.valid[index] = 1
        self.tags[index] = tag
        self.set_dirty(index, dirty)

    def set_dirty(self, index: int, dirty: bool):
        if dirty and not self.valid[index]:
            raise ValueError(f"line {index} is invalid and cannot be dirty")
        self.dirty_count += int(dirty) - self.dirty[index]
        self.dirty[index] = int(dirty)

    def load(self, valid, dirty, tags):
        """Bulk-initialize from three sequences of length ``num_lines``."""
        valid = bytearray(bytes(valid))
        dirty = bytearray(bytes(dirty))
        if len(valid) != len(self) or len(dirty) != len(self) or len(tags) != len(self):
            raise ValueError("tag store arrays have the wrong length")
        if int.from_bytes(dirty, "little") & ~int.from_bytes(valid, "little"):
            raise ValueError("dirty line that is not valid")
        self.valid = valid
        self.dirty = dirty
        self.tags = list(tags)
        self.dirty_count = sum(dirty)
