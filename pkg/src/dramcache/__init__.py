"""Discrete-event simulator of a hardware-managed DRAM cache in front of far memory."""

from .cache_mgr import CacheManager, InvariantViolation, ManagerConfig
from .config import RunConfig
from .core import CacheGeometry, ConfigError, DemandRequest, RequestClass, TagStore, ns
from .device import ChannelGroup, Device, DeviceConfig, DeviceKind
from .engine import Engine
from .link import Link, LinkConfig
from .policy import PolicyKind, plan
from .system import System, simulate
from .telemetry import Report, RunStats
from .traffic import Pattern, SyntheticConfig, TraceRecord

__version__ = "0.1.0"
