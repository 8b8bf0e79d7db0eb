"""DRAM cache manager: ORB/CRB/WB buffers, tag store and per-request plan execution."""

import enum
from collections import deque
from dataclasses import dataclass

from .core import LINE_BYTES, ConfigError, RequestClass, TagStore, ns
from .device import DeviceOp
from .policy import (
    DATA_READ, DEMAND_WRITE, FAR, FILL, NEAR, PLANS, TAG_CHECK, WRITE, WRITEBACK, PolicyKind,
)
from .telemetry import RunStats


class InvariantViolation(AssertionError):
    pass


class Admission(enum.Enum):
    ACCEPTED_TO_ORB = "accepted"
    PARKED_IN_CRB = "parked"
    STALLED = "stalled"


class State(enum.Enum):
    WAIT_TAG_CHECK = "wait_tag_check"
    WAIT_FAR_READ = "wait_far_read"
    WAIT_FILL = "wait_fill"
    WAIT_LOCAL_WRITE = "wait_local_write"
    DONE = "done"


_STATE_FOR = {
    TAG_CHECK: State.WAIT_TAG_CHECK,
    DATA_READ: State.WAIT_FAR_READ,
    FILL: State.WAIT_FILL,
    DEMAND_WRITE: State.WAIT_LOCAL_WRITE,
}


@dataclass
class ManagerConfig:
    orb_entries: int = 128
    crb_entries: int = 32
    wb_entries: int = 64
    frontend_lat: int = ns(10)
    backend_lat: int = ns(10)

    def validate(self):
        if self.orb_entries <= 0:
            raise ConfigError("manager.orb_entries must be positive")
        if self.crb_entries < 0:
            raise ConfigError("manager.crb_entries must be >= 0")
        if self.wb_entries <= 0:
            raise ConfigError("manager.wb_entries must be positive (write-back needs a WB buffer)")
        if self.frontend_lat < 0 or self.backend_lat < 0:
            raise ConfigError("manager latencies must be >= 0")
        return self

    @property
    def round_trip(self):
        return self.frontend_lat + self.backend_lat


class OrbEntry:
    __slots__ = ("req", "cls", "index", "tag", "victim_tag", "plan", "plan_cursor",
                 "issued", "done", "outstanding", "state", "timestamps", "responded")

    def __init__(self, req, cls, index, tag, victim_tag, plan, now):
        self.req = req
        self.cls = cls
        self.index = index
        self.tag = tag
        self.victim_tag = victim_tag
        self.plan = plan
        self.plan_cursor = 0
        self.issued = [False] * len(plan)
        self.done = [False] * len(plan)
        self.outstanding = len(plan)
        self.state = None
        self.timestamps = {"admitted": now}
        self.responded = None

    def __repr__(self):
        return f"OrbEntry(req={self.req.id}, class={self.cls.label}, state={self.state})"


class CrbEntry:
    __slots__ = ("req", "blocking_index", "arrival")

    def __init__(self, req, blocking_index, arrival):
        self.req = req
        self.blocking_index = blocking_index
        self.arrival = arrival


class WbEntry:
    __slots__ = ("far_addr", "inserted", "label")

    def __init__(self, far_addr, inserted, label):
        self.far_addr = far_addr
        self.inserted = inserted
        self.label = label


class CacheManager:
    """Replaces the memory controller in front of a near cache and a far backing store.

    ``near`` is a :class:`~dramcache.device.ChannelGroup`; ``far`` is a list of
    far ports (devices or links) indexed by the far group's ``route``.
    """

    def __init__(self, engine, config: ManagerConfig, policy, tags: TagStore, near, far,
                 far_route=None, stats=None, check_invariants=False):
        self.engine = engine
        self.config = config
        self.policy = PolicyKind.parse(policy)
        self.tags = tags
        self.geom = tags.geom
        self.stats = stats if stats is not None else RunStats()
        self.check_invariants = check_invariants

        self.near = near
        self.near_ports = list(near.channels)
        self.far_ports = list(far)
        self.far_route = far_route or (lambda addr: (0, addr))
        for port in self.near_ports + self.far_ports:
            port.on_complete = self._device_complete
            port.on_space = self._device_space
        self._port_id = {id(p): i for i, p in enumerate(self.near_ports + self.far_ports)}
        self._waiting = {}  # (port id, is_write) -> deque of (op, port)
        for i in range(len(self.near_ports) + len(self.far_ports)):
            self._waiting[(i, False)] = deque()
            self._waiting[(i, True)] = deque()

        self.orb = {}  # cache-line index -> OrbEntry
        self.crb = {}  # cache-line index -> deque of CrbEntry
        self.crb_count = 0
        self.wb = deque()
        self.wb_drain = False
        self._wb_waiters = deque()  # (entry, step) blocked on a full WB buffer
        self._held_far_reads = deque()  # (op, port) held back during WB drain

        self.retry_listeners = []
        self.retire_listeners = []
        self.ack_listeners = []

    # admission ---------------------------------------------------------------

    def is_busy(self, index):
        return index in self.orb or index in self.crb

    @property
    def orb_full(self):
        return len(self.orb) >= self.config.orb_entries

    def receive(self, req):
        line = req.addr // LINE_BYTES
        index = line & (self.geom.num_lines - 1)
        if index in self.orb:
            if self.crb_count >= self.config.crb_entries:
                self.stats.stalls += 1
                return Admission.STALLED
            parked = self.crb.get(index)
            if parked is None:
                self.crb[index] = parked = deque()
            parked.append(CrbEntry(req, index, self.engine.now))
            self.crb_count += 1
            self.stats.parked += 1
            if self.crb_count > self.stats.max_crb:
                self.stats.max_crb = self.crb_count
            self.stats.demands_issued += 1
            self._ack(req)
            return Admission.PARKED_IN_CRB
        if len(self.orb) >= self.config.orb_entries:
            self.stats.stalls += 1
            return Admission.STALLED
        self.stats.demands_issued += 1
        self._ack(req)
        self._admit(req, index, line)
        return Admission.ACCEPTED_TO_ORB

    def _ack(self, req):
        if req.is_write:
            for cb in self.ack_listeners:
                cb(req, self.engine.now)

    def _admit(self, req, index, line):
        geom_lines = self.geom.num_lines
        tag = line // geom_lines
        tags = self.tags
        valid = tags.valid[index]
        resident = tags.tags[index]
        hit = bool(valid) and resident == tag
        cls = RequestClass(req.is_write, hit, bool(valid and tags.dirty[index]))
        plan = PLANS[(self.policy, cls)]
        entry = OrbEntry(req, cls, index, tag, resident, plan, self.engine.now)
        if self.check_invariants and index in self.orb:
            raise InvariantViolation(f"two ORB entries for index {index}")
        self.orb[index] = entry
        if len(self.orb) > self.stats.max_orb:
            self.stats.max_orb = len(self.orb)
        self.engine.schedule(self._advance, self.config.frontend_lat, entry)

    # plan execution ----------------------------------------------------------

    def _advance(self, entry):
        """Issue every unissued step whose dependencies have completed."""
        plan = entry.plan
        issued = entry.issued
        done = entry.done
        for i in range(entry.plan_cursor, len(plan)):
            if issued[i]:
                continue
            step = plan[i]
            if all(done[d] for d in step.depends_on):
                issued[i] = True
                self._issue_step(entry, i, step)
        while entry.plan_cursor < len(plan) and issued[entry.plan_cursor]:
            entry.plan_cursor += 1

    def _issue_step(self, entry, i, step):
        now = self.engine.now
        if step.purpose == WRITEBACK:
            self._insert_wb(entry, i)
            return
        state = _STATE_FOR[step.purpose]
        entry.state = state
        entry.timestamps.setdefault(state.value, now)
        if step.target == NEAR:
            addr = entry.index * LINE_BYTES
            ch, local = self.near.route(addr)
            port = self.near_ports[ch]
            pid = ch
        else:
            addr = entry.req.addr
            ch, local = self.far_route(addr)
            port = self.far_ports[ch]
            pid = len(self.near_ports) + ch
        op = DeviceOp(addr, step.op == WRITE, (entry, i), step.purpose)
        op.local_addr = local
        if step.target == FAR and not op.is_write and self.wb_drain:
            self._held_far_reads.append((op, port, pid))
            return
        self._submit(op, port, pid)

    def _submit(self, op, port, pid):
        waiting = self._waiting[(pid, op.is_write)]
        if not waiting and port.submit(op):
            self._accepted(op)
        else:
            waiting.append((op, port))

    def _accepted(self, op):
        origin = op.origin
        label = origin.label if isinstance(origin, WbEntry) else origin[0].cls.label
        self.stats.ops_by_class[label] += 1

    def _device_space(self, port, is_write):
        pid = self._port_id[id(port)]
        if is_write and pid >= len(self.near_ports):
            self._pump_wb()
        waiting = self._waiting[(pid, is_write)]
        while waiting:
            op, p = waiting[0]
            if not p.submit(op):
                break
            waiting.popleft()
            self._accepted(op)

    def _device_complete(self, op):
        origin = op.origin
        if isinstance(origin, WbEntry):
            return
        entry, i = origin
        entry.done[i] = True
        entry.outstanding -= 1
        now = self.engine.now
        step = entry.plan[i]
        if step.purpose == DATA_READ or (step.purpose == TAG_CHECK and entry.cls.is_hit
                                         and not entry.cls.is_write):
            entry.responded = now
        if entry.outstanding == 0:
            self._finish(entry)
        else:
            self._advance(entry)

    def _finish(self, entry):
        entry.state = State.DONE
        entry.timestamps[State.DONE.value] = self.engine.now
        self.engine.schedule(self.retire, self.config.backend_lat, entry)

    # write-back buffer -------------------------------------------------------

    def _insert_wb(self, entry, i):
        if len(self.wb) >= self.config.wb_entries:
            self._wb_waiters.append((entry, i))
            return
        self.evict_dirty(entry.index, entry.victim_tag, entry.cls.label)
        entry.done[i] = True
        entry.outstanding -= 1
        if entry.outstanding == 0:
            self._finish(entry)
        else:
            self._advance(entry)

    def evict_dirty(self, index, victim_tag, label="rmd"):
        far_addr = (victim_tag * self.geom.num_lines + index) * LINE_BYTES
        self.wb.append(WbEntry(far_addr, self.engine.now, label))
        self.stats.dirty_evictions += 1
        if len(self.wb) > self.stats.max_wb:
            self.stats.max_wb = len(self.wb)
        if self.check_invariants and len(self.wb) > self.config.wb_entries:
            raise InvariantViolation("WB buffer overflow")
        if len(self.wb) >= self.config.wb_entries:
            self.wb_drain = True
        self._pump_wb()

    def _pump_wb(self):
        wb = self.wb
        freed = False
        while wb:
            wbe = wb[0]
            ch, local = self.far_route(wbe.far_addr)
            port = self.far_ports[ch]
            op = DeviceOp(wbe.far_addr, True, wbe, WRITEBACK)
            op.local_addr = local
            if not port.submit(op):
                break
            wb.popleft()
            freed = True
            self.stats.writebacks_issued += 1
            self._accepted(op)
        if not freed:
            return
        if self.wb_drain and len(wb) < self.config.wb_entries / 2:
            self.wb_drain = False
            held = self._held_far_reads
            while held:
                op, port, pid = held.popleft()
                self._submit(op, port, pid)
        waiters = self._wb_waiters
        while waiters and len(wb) < self.config.wb_entries:
            entry, i = waiters.popleft()
            self._insert_wb(entry, i)

    # retirement --------------------------------------------------------------

    def retire(self, entry):
        now = self.engine.now
        cls = entry.cls
        tags = self.tags
        if cls.is_hit:
            if cls.is_write:
                tags.set_dirty(entry.index, True)
        else:
            tags.fill(entry.index, entry.tag, cls.is_write)
        del self.orb[entry.index]
        entry.timestamps["retired"] = now
        self.stats.record_retire(cls.label, now, now - entry.req.arrival)
        for cb in self.retire_listeners:
            cb(entry, now)

        freed_crb = False
        parked = self.crb.get(entry.index)
        if parked:
            crbe = parked.popleft()
            if not parked:
                del self.crb[entry.index]
            self.crb_count -= 1
            freed_crb = True
            line = crbe.req.addr // LINE_BYTES
            self._admit(crbe.req, entry.index, line)
        if freed_crb or len(self.orb) < self.config.orb_entries:
            for cb in self.retry_listeners:
                cb()

    # introspection -----------------------------------------------------------

    @property
    def idle(self):
        return not self.orb and not self.crb_count and not self.wb

    def occupancy(self):
        return len(self.orb), self.crb_count, len(self.wb)
