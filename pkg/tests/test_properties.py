from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dramcache.cache_mgr import ManagerConfig
from dramcache.config import RunConfig
from dramcache.core import ns
from dramcache.device import DeviceConfig
from dramcache.link import LinkConfig
from dramcache.policy import PolicyKind
from dramcache.system import System
from dramcache.traffic import SyntheticConfig, TraceRecord


def check_closed(system):
    s = system.stats
    mgr = system.manager
    cfg = mgr.config
    assert s.demands_issued == s.demands_retired
    assert mgr.idle
    assert s.max_orb <= cfg.orb_entries and s.max_crb <= cfg.crb_entries and s.max_wb <= cfg.wb_entries
    # demand writes never reach far memory, so every far write is a write-back
    assert s.dirty_evictions == s.writebacks_issued == system.far.counts()[1]
    assert sum(s.per_class_counts.values()) == s.demands_retired


synthetic = st.builds(
    dict,
    seed=st.integers(0, 10_000),
    policy=st.sampled_from(list(PolicyKind)),
    pattern=st.sampled_from(["random", "linear"]),
    read_pct=st.floats(0, 1),
    miss=st.floats(0, 1),
    dirty=st.one_of(st.none(), st.floats(0, 1)),
    inter_arrival=st.sampled_from([0, 0, 1, 3, 10]),
    rt=st.sampled_from([0, 0, 100, 500]),
    far=st.sampled_from(["ddr4", "nvm"]),
    orb=st.integers(1, 128),
    crb=st.integers(0, 32),
    wb=st.integers(1, 64),
)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(synthetic)
def test_random_synthetic_configs_close_their_books(p):
    dur = ns(1500)
    traffic = SyntheticConfig(
        pattern=p["pattern"], read_pct=p["read_pct"], target_miss_ratio=p["miss"],
        dirty_victim_pct=p["dirty"], inter_arrival=ns(p["inter_arrival"]), duration=dur,
        dirty_fraction=0.5 if p["dirty"] is None else None,
    )
    cfg = RunConfig(
        seed=p["seed"], duration=dur, policy=p["policy"],
        manager=ManagerConfig(orb_entries=p["orb"], crb_entries=p["crb"], wb_entries=p["wb"]),
        far=DeviceConfig.preset(p["far"]), link=LinkConfig(ns(p["rt"])), traffic=traffic,
    ).validate()
    system = System(cfg, check_invariants=True)
    system.run()
    check_closed(system)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 40), st.integers(0, 255), st.booleans()), max_size=120),
    st.sampled_from(list(PolicyKind)),
    st.integers(1, 16),
    st.integers(0, 4),
)
def test_conflict_heavy_traces_close_their_books(raw, policy, orb, crb):
    # 16-line cache and a 256-line footprint: lots of index conflicts and dirty victims
    t = 0
    records = []
    for gap, line, is_write in raw:
        t += gap
        records.append(TraceRecord(ns(t), line * 64, is_write))
    cfg = RunConfig(
        policy=policy, traffic=None,
        manager=ManagerConfig(orb_entries=orb, crb_entries=crb, wb_entries=2),
        near=DeviceConfig.hbm2(capacity_bytes=8 * 64),
        far=DeviceConfig.ddr4(capacity_bytes=1 << 20, write_buffer=2),
    )
    system = System(cfg, records=records, check_invariants=True)
    system.run()
    check_closed(system)
    assert system.stats.demands_retired == len(records)
