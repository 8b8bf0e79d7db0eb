import sys
from pathlib import Path

import pytest

from dramcache.cache_mgr import CacheManager, ManagerConfig
from dramcache.core import CacheGeometry, TagStore, ns
from dramcache.device import ChannelGroup, DeviceConfig
from dramcache.engine import Engine

sys.path.insert(0, str(Path(__file__).parent))


class Rig:
    """Manager wired to real devices on a small cache, for unit tests."""

    def __init__(self, policy="baseline", cache_lines=1024, manager=None, near=None, far=None):
        self.engine = Engine(7)
        self.geom = CacheGeometry(cache_lines * 64)
        self.tags = TagStore(self.geom)
        near = near or DeviceConfig.hbm2(capacity_bytes=cache_lines * 32)
        far = far or DeviceConfig.ddr4(capacity_bytes=1 << 26)
        self.near = ChannelGroup(self.engine, near, "near")
        self.far = ChannelGroup(self.engine, far, "far")
        self.mgr = CacheManager(self.engine, manager or ManagerConfig(), policy, self.tags,
                                self.near, list(self.far), far_route=self.far.route,
                                check_invariants=True)
        self.retired = []
        self.mgr.retire_listeners.append(lambda e, now: self.retired.append((e.req.id, e.cls.label, now)))


@pytest.fixture
def rig():
    return Rig


@pytest.fixture
def engine():
    return Engine(3)


def ticks(x):
    return ns(x)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
