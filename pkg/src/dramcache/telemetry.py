"""Run statistics, derived metrics and report serialization."""

import csv
import io
import json
from dataclasses import dataclass, field

from .core import CLASS_LABELS, LINE_BYTES, TICKS_PER_NS
from .policy import plan_length_table

RETIRE_BUCKET = 1000 * TICKS_PER_NS  # 1 us

CSV_COLUMNS = (
    "run_id", "seed", "policy", "far_kind", "link_rt_ns", "demands", "miss_ratio", "amp",
    "eff_bw_gbps", "near_util", "far_util",
    *CLASS_LABELS,
    "p50_lat_ns", "p99_lat_ns", "max_orb", "max_crb", "max_wb", "substitutions",
)


class UndefinedMetric(ValueError):
    pass


@dataclass
class RunStats:
    demands_issued: int = 0
    demands_retired: int = 0
    per_class_counts: dict = field(default_factory=lambda: dict.fromkeys(CLASS_LABELS, 0))
    class_substitutions: int = 0
    device_ops: dict = field(default_factory=dict)
    ops_by_class: dict = field(default_factory=lambda: dict.fromkeys(CLASS_LABELS, 0))
    bytes_demand_completed: int = 0
    bytes_transferred: dict = field(default_factory=dict)
    latency_hist: dict = field(default_factory=dict)  # whole ns -> count
    retire_buckets: dict = field(default_factory=dict)  # RETIRE_BUCKET index -> count
    max_orb: int = 0
    max_crb: int = 0
    max_wb: int = 0
    dirty_evictions: int = 0
    writebacks_issued: int = 0
    stalls: int = 0
    parked: int = 0
    elapsed: int = 0  # Ticks, end of drain

    def record_retire(self, label, tick, latency):
        self.demands_retired += 1
        self.per_class_counts[label] += 1
        self.bytes_demand_completed += LINE_BYTES
        b = tick // RETIRE_BUCKET
        self.retire_buckets[b] = self.retire_buckets.get(b, 0) + 1
        lat = latency // TICKS_PER_NS
        self.latency_hist[lat] = self.latency_hist.get(lat, 0) + 1

    @property
    def hits(self):
        return sum(v for k, v in self.per_class_counts.items() if k[1] == "h")

    @property
    def misses(self):
        return sum(v for k, v in self.per_class_counts.items() if k[1] == "m")


def miss_ratio(stats: RunStats):
    total = stats.hits + stats.misses
    if not total:
        raise UndefinedMetric("miss ratio is undefined without retired demands")
    return stats.misses / total


def access_amplification(stats: RunStats):
    if not stats.demands_retired:
        raise UndefinedMetric("access amplification is undefined without retired demands")
    return sum(stats.ops_by_class.values()) / stats.demands_retired


def expected_amplification(stats: RunStats, policy):
    """Amplification implied by the class mix and the policy's plan lengths."""
    lengths = plan_length_table(policy)
    total = sum(stats.per_class_counts.values())
    if not total:
        raise UndefinedMetric("no retired demands")
    return sum(lengths[k] * n for k, n in stats.per_class_counts.items()) / total


def retired_in(stats: RunStats, start, end):
    """Demands retired in ``[start, end)``, prorating partial 1 us buckets."""
    size = RETIRE_BUCKET
    total = 0.0
    for b in range(start // size, (end - 1) // size + 1):
        n = stats.retire_buckets.get(b)
        if n:
            lo = max(start, b * size)
            hi = min(end, (b + 1) * size)
            total += n * (hi - lo) / size
    return total


def effective_bandwidth(stats: RunStats, start, end):
    """Demand-side goodput in GB/s over ``[start, end)`` Ticks."""
    if end <= start:
        raise ValueError("zero-length bandwidth window")
    return retired_in(stats, start, end) * LINE_BYTES / ((end - start) / TICKS_PER_NS)


def percentile(hist, q):
    total = sum(hist.values())
    if not total:
        return 0
    rank = q * total
    seen = 0
    for lat in sorted(hist):
        seen += hist[lat]
        if seen >= rank:
            return lat
    return max(hist)


@dataclass
class Report:
    """Flat, immutable-by-convention result of one run."""

    row: dict
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.row[key]


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def to_csv(reports, header=True):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(r.row[c]) for c in CSV_COLUMNS])
    return out.getvalue()


def to_json(reports):
    def rounded(row):
        return {k: (float(_fmt(v)) if isinstance(v, float) else v) for k, v in row.items()}

    payload = [
        {"row": rounded(r.row), "config": r.config, "details": r.details}
        for r in reports
    ]
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def emit(reports, fmt="csv"):
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    fmt = fmt.lower()
    if fmt == "csv":
        return to_csv(reports)
    if fmt == "json":
        return to_json(reports)
    raise ValueError(f"unknown report format {fmt!r}")
