"""Run configuration: INI-style file, environment overrides and validation.

A config is a set of ``[section]`` blocks of ``key = value`` lines. Every key has a
dotted name (``link.far_link_round_trip_ns``); keys that are unique across
sections may also be referred to by their bare name (``far_link_round_trip_ns``).
Environment variables ``DRAMCACHE__<SECTION>__<KEY>`` override file values.
"""

import configparser
import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

from .cache_mgr import ManagerConfig
from .core import ConfigError, ns
from .device import DeviceConfig, DeviceKind
from .link import LinkConfig
from .policy import PolicyKind
from .traffic import SyntheticConfig

ENV_PREFIX = "DRAMCACHE__"

_DEVICE_KEYS = {
    "kind": str, "peak_bw_gbps": float, "num_banks": int, "channels": int,
    "trcd_ns": float, "trp_ns": float, "tcl_ns": float, "tcwl_ns": float, "twr_ns": float,
    "trtw_ns": float, "twtr_ns": float, "tburst_ns": float,
    "read_buffer": int, "write_buffer": int, "wr_high_watermark": float, "wr_low_watermark": float,
    "extra_read_ns": float, "extra_write_ns": float, "capacity_mb": float, "row_bytes": int,
}

# section -> key -> (type, default); None defaults fall back to the device preset
SCHEMA = {
    "engine": {"seed": (int, 1), "duration_ns": (float, 10_000.0), "run_id": (str, "run")},
    "manager": {
        "policy": (str, "baseline"),
        "orb_entries": (int, 128), "crb_entries": (int, 32), "wb_entries": (int, 64),
        "frontend_ns": (float, 10.0), "backend_ns": (float, 10.0),
    },
    "near_device": {k: (t, None) for k, t in _DEVICE_KEYS.items()},
    "far_device": {k: (t, None) for k, t in _DEVICE_KEYS.items()},
    "link": {"far_link_round_trip_ns": (float, 0.0)},
    "traffic": {
        "mode": (str, "synthetic"), "trace_path": (str, ""),
        "pattern": (str, "random"), "read_pct": (float, 1.0), "target_miss_ratio": (float, 0.0),
        "dirty_victim_pct": (str, "0.0"), "inter_arrival_ns": (float, 0.0),
        "footprint_start": (int, 0), "footprint_mb": (float, 0.0),
        "resident_fraction": (float, 1.0), "dirty_fraction": (str, "auto"),
        "stationary": (bool, True), "max_requests": (int, 0),
    },
    "output": {"path": (str, ""), "format": (str, "csv")},
}

DEVICE_DEFAULT_KIND = {"near_device": "hbm2", "far_device": "ddr4"}


def default_raw():
    raw = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    raw["near_device"]["kind"] = "hbm2"
    raw["near_device"]["capacity_mb"] = 128.0
    raw["far_device"]["kind"] = "ddr4"
    raw["far_device"]["capacity_mb"] = 3072.0
    return raw


def _coerce(kind, value, name):
    if value is None or not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text, 0)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r} as {kind.__name__}") from None
    return text


def resolve_key(key):
    """Map a dotted or bare key to ``(section, key)``."""
    key = key.strip()
    if "." in key:
        section, name = key.split(".", 1)
        section, name = section.lower(), name.lower()
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {key!r}")
        return section, name
    name = key.lower()
    owners = [s for s, keys in SCHEMA.items() if name in keys]
    if len(owners) == 1:
        return owners[0], name
    if not owners:
        raise ConfigError(f"unknown config key {key!r}")
    raise ConfigError(f"ambiguous config key {key!r}; use one of " + ", ".join(f"{s}.{name}" for s in owners))


def set_value(raw, key, value):
    section, name = resolve_key(key)
    kind = SCHEMA[section][name][0]
    raw[section][name] = _coerce(kind, value, f"{section}.{name}")
    return raw


def parse_text(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = default_raw()
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key {sec}.{key}")
            set_value(raw, f"{sec}.{key}", value)
    return raw


def load(path, env=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = parse_text(path.read_text(), str(path))
    apply_env(raw, os.environ if env is None else env)
    base = path.parent
    trace = raw["traffic"]["trace_path"]
    if trace and not Path(trace).is_absolute():
        raw["traffic"]["trace_path"] = str(base / trace)
    return raw


def apply_env(raw, env):
    for name, value in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].split("__")
        if len(parts) != 2:
            raise ConfigError(f"environment override {name} must look like {ENV_PREFIX}<SECTION>__<KEY>")
        set_value(raw, f"{parts[0]}.{parts[1]}", value)
    return raw


def dump(raw):
    """Render ``raw`` back to INI text (unset preset-backed keys are omitted)."""
    lines = []
    for section, keys in raw.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def _device(raw_dev, name):
    kind = DeviceKind.parse(raw_dev["kind"])
    overrides = {}
    mapping = {
        "peak_bw_gbps": "peak_bw", "num_banks": "num_banks", "channels": "channels",
        "read_buffer": "read_buffer", "write_buffer": "write_buffer",
        "wr_high_watermark": "wr_high_watermark", "wr_low_watermark": "wr_low_watermark",
        "row_bytes": "row_bytes",
    }
    for key, field_name in mapping.items():
        if raw_dev.get(key) is not None:
            overrides[field_name] = raw_dev[key]
    timing = {
        "trcd_ns": "tRCD", "trp_ns": "tRP", "tcl_ns": "tCL", "tcwl_ns": "tCWL", "twr_ns": "tWR",
        "trtw_ns": "tRTW", "twtr_ns": "tWTR", "tburst_ns": "tBURST",
        "extra_read_ns": "extra_read_lat", "extra_write_ns": "extra_write_lat",
    }
    for key, field_name in timing.items():
        if raw_dev.get(key) is not None:
            overrides[field_name] = ns(raw_dev[key])
    if "peak_bw" in overrides and "tBURST" not in overrides:
        overrides["tBURST"] = None
    dev = DeviceConfig.preset(kind, **overrides)
    if raw_dev.get("capacity_mb") is not None:
        total = int(raw_dev["capacity_mb"] * (1 << 20))
        dev.capacity_bytes = total // dev.channels
    return dev.validate(name)


@dataclass
class RunConfig:
    seed: int = 1
    duration: int = ns(10_000)
    run_id: str = "run"
    policy: PolicyKind = PolicyKind.BASELINE
    manager: ManagerConfig = field(default_factory=ManagerConfig)
    near: DeviceConfig = field(default_factory=DeviceConfig.hbm2)
    far: DeviceConfig = field(default_factory=DeviceConfig.ddr4)
    link: LinkConfig = field(default_factory=LinkConfig)
    traffic: SyntheticConfig | None = field(default_factory=SyntheticConfig)
    trace_path: str | None = None
    output_path: str | None = None
    output_format: str = "csv"
    raw: dict | None = None

    @property
    def cache_bytes(self):
        return self.near.capacity_bytes * self.near.channels

    @property
    def far_bytes(self):
        return self.far.capacity_bytes * self.far.channels

    def validate(self):
        self.manager.validate()
        self.near.validate("near_device")
        self.far.validate("far_device")
        self.link.validate()
        if self.duration <= 0:
            raise ConfigError("engine.duration_ns must be positive")
        if self.cache_bytes >= self.far_bytes:
            raise ConfigError("near capacity must be smaller than far capacity")
        if self.trace_path is not None:
            if not Path(self.trace_path).exists():
                raise ConfigError(f"trace file not found: {self.trace_path}")
        elif self.traffic is None:
            raise ConfigError("traffic: need either synthetic parameters or a trace_path")
        else:
            self.traffic.validate(self.far_bytes)
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output.format must be csv or json, got {self.output_format!r}")
        return self

    def echo(self):
        """Flat dict of every parameter needed to reproduce the run."""
        if self.raw is not None:
            return copy.deepcopy(self.raw)
        return to_raw(self)


def from_raw(raw):
    raw = copy.deepcopy(raw)
    eng, mgr, lnk, trf, out = (raw[s] for s in ("engine", "manager", "link", "traffic", "output"))
    try:
        policy = PolicyKind.parse(mgr["policy"])
    except ValueError as exc:
        raise ConfigError(f"manager.policy: {exc}") from None
    manager = ManagerConfig(
        orb_entries=mgr["orb_entries"], crb_entries=mgr["crb_entries"], wb_entries=mgr["wb_entries"],
        frontend_lat=ns(mgr["frontend_ns"]), backend_lat=ns(mgr["backend_ns"]),
    )
    near = _device(raw["near_device"], "near_device")
    far = _device(raw["far_device"], "far_device")
    link = LinkConfig(ns(lnk["far_link_round_trip_ns"]))
    duration = ns(eng["duration_ns"])
    mode = trf["mode"].strip().lower()
    traffic = None
    trace_path = None
    if mode == "trace":
        trace_path = trf["trace_path"] or ""
        if not trace_path:
            raise ConfigError("traffic.trace_path is required when traffic.mode = trace")
    elif mode == "synthetic":
        dv = str(trf["dirty_victim_pct"]).strip().lower()
        dirty_victim = None if dv in ("none", "natural", "") else _coerce(float, dv, "traffic.dirty_victim_pct")
        df = str(trf["dirty_fraction"]).strip().lower()
        dirty_fraction = None if df in ("auto", "") else _coerce(float, df, "traffic.dirty_fraction")
        far_bytes = far.capacity_bytes * far.channels
        start = trf["footprint_start"]
        size = int(trf["footprint_mb"] * (1 << 20)) if trf["footprint_mb"] else far_bytes - start
        traffic = SyntheticConfig(
            pattern=trf["pattern"], read_pct=trf["read_pct"], target_miss_ratio=trf["target_miss_ratio"],
            dirty_victim_pct=dirty_victim, inter_arrival=ns(trf["inter_arrival_ns"]), duration=duration,
            footprint=(start, start + size), resident_fraction=trf["resident_fraction"],
            dirty_fraction=dirty_fraction, stationary=trf["stationary"], max_requests=trf["max_requests"],
        )
    else:
        raise ConfigError(f"traffic.mode must be synthetic or trace, got {trf['mode']!r}")
    cfg = RunConfig(
        seed=eng["seed"], duration=duration, run_id=eng["run_id"], policy=policy, manager=manager,
        near=near, far=far, link=link, traffic=traffic, trace_path=trace_path,
        output_path=out["path"] or None, output_format=out["format"].lower(), raw=raw,
    )
    return cfg.validate()


def to_raw(cfg: RunConfig):
    """Inverse of :func:`from_raw` for programmatically built configs."""
    raw = default_raw()
    raw["engine"].update(seed=cfg.seed, duration_ns=cfg.duration / 1000, run_id=cfg.run_id)
    m = cfg.manager
    raw["manager"].update(
        policy=cfg.policy.value, orb_entries=m.orb_entries, crb_entries=m.crb_entries,
        wb_entries=m.wb_entries, frontend_ns=m.frontend_lat / 1000, backend_ns=m.backend_lat / 1000,
    )
    for section, dev in (("near_device", cfg.near), ("far_device", cfg.far)):
        raw[section].update(
            kind=dev.kind.value, peak_bw_gbps=dev.peak_bw, num_banks=dev.num_banks, channels=dev.channels,
            trcd_ns=dev.tRCD / 1000, trp_ns=dev.tRP / 1000, tcl_ns=dev.tCL / 1000, tcwl_ns=dev.tCWL / 1000,
            twr_ns=dev.tWR / 1000, trtw_ns=dev.tRTW / 1000, twtr_ns=dev.tWTR / 1000,
            tburst_ns=dev.tBURST / 1000, read_buffer=dev.read_buffer, write_buffer=dev.write_buffer,
            wr_high_watermark=dev.wr_high_watermark, wr_low_watermark=dev.wr_low_watermark,
            extra_read_ns=dev.extra_read_lat / 1000, extra_write_ns=dev.extra_write_lat / 1000,
            capacity_mb=dev.capacity_bytes * dev.channels / (1 << 20), row_bytes=dev.row_bytes,
        )
    raw["link"]["far_link_round_trip_ns"] = cfg.link.round_trip / 1000
    t = cfg.traffic
    if cfg.trace_path is not None:
        raw["traffic"].update(mode="trace", trace_path=cfg.trace_path)
    elif t is not None:
        raw["traffic"].update(
            mode="synthetic", pattern=t.pattern.value, read_pct=t.read_pct,
            target_miss_ratio=t.target_miss_ratio,
            dirty_victim_pct="natural" if t.dirty_victim_pct is None else str(t.dirty_victim_pct),
            inter_arrival_ns=t.inter_arrival / 1000, footprint_start=t.footprint[0],
            footprint_mb=(t.footprint[1] - t.footprint[0]) / (1 << 20),
            resident_fraction=t.resident_fraction,
            dirty_fraction="auto" if t.dirty_fraction is None else str(t.dirty_fraction),
            stationary=t.stationary, max_requests=t.max_requests,
        )
    raw["output"].update(path=cfg.output_path or "", format=cfg.output_format)
    return raw
