"""Wires engine, traffic, manager, near channels and the linked far memory together."""

from .cache_mgr import CacheManager, InvariantViolation
from .config import RunConfig
from .core import CacheGeometry, TagStore, to_ns
from .device import ChannelGroup
from .engine import Engine
from .link import Link
from .telemetry import (
    CLASS_LABELS, Report, RunStats, UndefinedMetric, access_amplification,
    effective_bandwidth, miss_ratio, percentile,
)
from .traffic import SyntheticSource, TraceSource, load_trace, seed_cache


class System:
    def __init__(self, config: RunConfig, records=None, check_invariants=False, event_log=None):
        self.config = config
        self.engine = Engine(config.seed)
        self.stats = RunStats()
        self.geom = CacheGeometry(config.cache_bytes)
        self.tags = TagStore(self.geom)
        self.near = ChannelGroup(self.engine, config.near, "near")
        self.far = ChannelGroup(self.engine, config.far, "far")
        if config.link.round_trip:
            far_ports = [Link(self.engine, ch, config.link) for ch in self.far]
        else:
            far_ports = list(self.far)
        self.far_ports = far_ports
        self.manager = CacheManager(
            self.engine, config.manager, config.policy, self.tags, self.near, far_ports,
            far_route=self.far.route, stats=self.stats, check_invariants=check_invariants,
        )
        self._log = None
        if event_log is not None:
            self._log = event_log
            self.near.set_trace(self._trace)
            self.far.set_trace(self._trace)

        if records is None and config.trace_path is not None:
            records = load_trace(config.trace_path)
        if records is not None:
            self.source = TraceSource(self.engine, self.manager, records, config.far_bytes)
        else:
            t = config.traffic
            seed_cache(self.tags, t.resident_fraction, t.seed_dirty_fraction, t.footprint, self.engine.rng)
            self.source = SyntheticSource(self.engine, self.manager, t)
        self.window = None

    def _trace(self, tick, device, op):
        kind = "W" if op.is_write else "R"
        self._log.write(f"{tick} {device} {kind} {op.purpose} {op.addr:#x}\n")

    def run(self):
        """Inject for the configured duration, then drain all buffered work."""
        cfg = self.config
        engine = self.engine
        self.source.start()
        if isinstance(self.source, SyntheticSource):
            engine.run_until(cfg.duration - 1)
            self.source.stop()
            window = (0, cfg.duration)
        else:
            window = None
        end = engine.run()
        self.stats.elapsed = end
        if window is None:
            window = (0, max(end, 1))
        self.window = window
        self.check_closed()
        return self.report()

    def check_closed(self):
        s = self.stats
        m = self.manager
        if s.demands_issued != s.demands_retired:
            raise InvariantViolation(
                f"conservation: {s.demands_issued} demands admitted but {s.demands_retired} retired")
        if not m.idle:
            raise InvariantViolation(f"manager not empty after drain: occupancy {m.occupancy()}")
        if s.dirty_evictions != s.writebacks_issued:
            raise InvariantViolation(
                f"{s.dirty_evictions} dirty evictions but {s.writebacks_issued} far write-backs")

    def report(self):
        cfg = self.config
        s = self.stats
        start, end = self.window
        try:
            mr = miss_ratio(s)
            amp = access_amplification(s)
        except UndefinedMetric:
            mr = amp = 0.0
        for name, group in (("near", self.near), ("far", self.far)):
            reads, writes = group.counts()
            s.device_ops[(name, "read")] = reads
            s.device_ops[(name, "write")] = writes
            s.bytes_transferred[name] = group.bytes_transferred
        row = {
            "run_id": cfg.run_id,
            "seed": cfg.seed,
            "policy": cfg.policy.value,
            "far_kind": cfg.far.kind.value,
            "link_rt_ns": to_ns(cfg.link.round_trip),
            "demands": s.demands_retired,
            "miss_ratio": mr,
            "amp": amp,
            "eff_bw_gbps": effective_bandwidth(s, start, end),
            "near_util": self.near.utilization(start, end),
            "far_util": self.far.utilization(start, end),
        }
        for label in CLASS_LABELS:
            row[label] = s.per_class_counts[label]
        row.update(
            p50_lat_ns=percentile(s.latency_hist, 0.50),
            p99_lat_ns=percentile(s.latency_hist, 0.99),
            max_orb=s.max_orb,
            max_crb=s.max_crb,
            max_wb=s.max_wb,
            substitutions=getattr(self.source, "substitutions", 0),
        )
        s.class_substitutions = row["substitutions"]
        details = {
            "elapsed_ns": to_ns(s.elapsed),
            "window_ns": [to_ns(start), to_ns(end)],
            "demands_issued": s.demands_issued,
            "ops_by_class": dict(s.ops_by_class),
            "device_ops": {f"{d}_{k}": v for (d, k), v in sorted(s.device_ops.items())},
            "bytes_transferred": dict(s.bytes_transferred),
            "dirty_evictions": s.dirty_evictions,
            "stalls": s.stalls,
            "parked": s.parked,
        }
        return Report(row, cfg.echo(), details)


def simulate(config: RunConfig, records=None, **kwargs):
    system = System(config, records=records, **kwargs)
    report = system.run()
    return report, system
