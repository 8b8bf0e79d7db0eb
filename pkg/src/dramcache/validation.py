"""Built-in validation scenarios run by ``dramcache validate``.

Three groups of checks:

* ``plans``: the access count of every (policy, class) plan against the reference table.
* ``battery``: bandwidth orderings over read mix x hit/miss-clean/miss-dirty x pattern.
* ``hand-trace``: retire Ticks of a scripted 12-request trace against a frozen,
  independently enumerated timeline.
"""

from dataclasses import dataclass

from .cache_mgr import ManagerConfig
from .config import RunConfig
from .core import ALL_CLASSES, LINE_BYTES, ns
from .device import DeviceConfig
from .link import LinkConfig
from .policy import PolicyKind, plan
from .system import System, simulate
from .traffic import Pattern, SyntheticConfig, TraceRecord

# device accesses per demand; columns follow ALL_CLASSES (rhd rhc rmd rmc whd whc wmd wmc)
REFERENCE_PLAN_LENGTHS = {
    PolicyKind.BASELINE: (1, 1, 4, 3, 2, 2, 3, 2),
    PolicyKind.BEAR_WR_OPT: (1, 1, 4, 3, 1, 1, 3, 2),
    PolicyKind.ORACLE: (1, 1, 4, 2, 1, 1, 3, 1),
}

MIXES = (("RO", 1.0), ("67R", 0.67), ("WO", 0.0))
SCENARIOS = (("hit", 0.0, 0.0), ("miss-clean", 1.0, 0.0), ("miss-dirty", 1.0, 1.0))
BATTERY_DURATION = ns(20_000)
MISS_DIRTY_TOLERANCE = 0.10


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


# -- plan table -------------------------------------------------------------------

def plan_checks():
    checks = []
    for policy, lengths in REFERENCE_PLAN_LENGTHS.items():
        for cls, want in zip(ALL_CLASSES, lengths):
            got = len(plan(policy, cls))
            checks.append(Check(f"plans/{policy.value}/{cls.label}", got == want, f"{got} steps, table says {want}"))
    return checks


# -- bandwidth battery -------------------------------------------------------------

def battery_config(pattern, read_pct, miss, dirty, seed=1, duration=BATTERY_DURATION, run_id="battery"):
    # every line starts resident; dirty_fraction picks the victim state seen by misses
    traffic = SyntheticConfig(
        pattern=pattern, read_pct=read_pct, target_miss_ratio=miss, dirty_victim_pct=dirty,
        duration=duration, resident_fraction=1.0, dirty_fraction=dirty, seed=seed,
    )
    return RunConfig(seed=seed, duration=duration, run_id=run_id, traffic=traffic).validate()


def run_battery(seed=1, duration=BATTERY_DURATION):
    """Run all 18 scenarios; returns {(pattern, mix, scenario): Report}."""
    reports = {}
    for pattern in Pattern:
        for mix, read_pct in MIXES:
            for scen, miss, dirty in SCENARIOS:
                run_id = f"{pattern.value}-{mix}-{scen}"
                cfg = battery_config(pattern, read_pct, miss, dirty, seed, duration, run_id)
                report, _ = simulate(cfg)
                reports[(pattern.value, mix, scen)] = report
    return reports


def battery_checks(reports):
    checks = []
    bw = {k: r["eff_bw_gbps"] for k, r in reports.items()}
    for pattern in Pattern:
        p = pattern.value
        ro, r67, wo = (bw[(p, m, "hit")] for m, _ in MIXES)
        checks.append(Check(f"battery/{p}/hit RO>=67R>=WO", ro >= r67 >= wo,
                            f"{ro:.2f} >= {r67:.2f} >= {wo:.2f} GB/s"))
        for mix, _ in MIXES:
            hit, clean, dirty = (bw[(p, mix, s)] for s, _, _ in SCENARIOS)
            checks.append(Check(f"battery/{p}/{mix} hit>=miss-clean", hit >= clean,
                                f"{hit:.2f} vs {clean:.2f} GB/s"))
            gap = abs(dirty - clean) / clean if clean else float("inf")
            checks.append(Check(f"battery/{p}/{mix} miss-dirty~miss-clean", gap <= MISS_DIRTY_TOLERANCE,
                                f"{dirty:.2f} vs {clean:.2f} GB/s ({gap:.1%} apart)"))
    return checks


# -- hand trace --------------------------------------------------------------------

# (arrival ns, line, is_write); line n lives at address n * 64
HAND_TRACE = (
    (0, 0, False), (1000, 0, False), (2000, 0, True), (3000, 0, True),
    (4000, 0, False), (5000, 8, False), (6000, 16, True), (7000, 24, True),
    (8000, 1, True), (9000, 9, False), (10000, 2, False), (10005, 2, False),
)

# retire Tick per request, keyed by (policy, link round trip ns)
HAND_TIMELINE = {
    ("baseline", 0): (88000, 1034000, 2043000, 3043000, 4034000, 5078000,
                      6043000, 7043000, 8053000, 9078000, 10088000, 10122000),
    ("baseline", 100): (188000, 1034000, 2043000, 3043000, 4034000, 5178000,
                        6043000, 7043000, 8053000, 9178000, 10188000, 10222000),
    ("bear-wr-opt", 0): (88000, 1034000, 2029000, 3029000, 4034000, 5078000,
                         6043000, 7043000, 8053000, 9078000, 10088000, 10122000),
    ("bear-wr-opt", 100): (188000, 1034000, 2029000, 3029000, 4034000, 5178000,
                           6043000, 7043000, 8053000, 9178000, 10188000, 10222000),
    ("oracle", 0): (74000, 1034000, 2029000, 3029000, 4034000, 5078000,
                    6029000, 7043000, 8039000, 9078000, 10074000, 10108000),
    ("oracle", 100): (174000, 1034000, 2029000, 3029000, 4034000, 5178000,
                      6029000, 7043000, 8039000, 9178000, 10174000, 10208000),
}
HAND_CLASSES = ("rmc", "rhc", "whc", "whd", "rhd", "rmd", "wmc", "wmd", "wmc", "rmd", "rmc", "rhc")


def hand_trace_config(policy="baseline", link_rt_ns=0):
    near = DeviceConfig.hbm2(
        tRCD=ns(10), tRP=ns(10), tCL=ns(10), tCWL=ns(5), tWR=ns(6), tRTW=ns(2), tWTR=ns(3),
        tBURST=ns(4), capacity_bytes=4 * LINE_BYTES, channels=2,
    )
    far = DeviceConfig.ddr4(
        tRCD=ns(15), tRP=ns(15), tCL=ns(15), tCWL=ns(10), tWR=ns(8), tRTW=ns(2), tWTR=ns(4),
        tBURST=ns(5), capacity_bytes=1 << 20,
    )
    return RunConfig(
        run_id=f"hand-{policy}-{link_rt_ns}", policy=PolicyKind.parse(policy),
        manager=ManagerConfig(frontend_lat=ns(10), backend_lat=ns(10)),
        near=near, far=far, link=LinkConfig(ns(link_rt_ns)), traffic=None,
    )


def hand_trace_records():
    return [TraceRecord(ns(t), line * LINE_BYTES, w) for t, line, w in HAND_TRACE]


def run_hand_trace(policy="baseline", link_rt_ns=0):
    """Simulate the scripted trace; returns (report, [(request id, class label, retire Tick)])."""
    cfg = hand_trace_config(policy, link_rt_ns)
    system = System(cfg, records=hand_trace_records(), check_invariants=True)
    retired = []
    system.manager.retire_listeners.append(
        lambda entry, now: retired.append((entry.req.id, entry.cls.label, now)))
    report = system.run()
    retired.sort()
    return report, retired


def hand_trace_checks():
    checks = []
    for (policy, rt), want in HAND_TIMELINE.items():
        _, retired = run_hand_trace(policy, rt)
        got = tuple(t for _, _, t in retired)
        labels = tuple(lbl for _, lbl, _ in retired)
        bad = [i for i, (g, w) in enumerate(zip(got, want)) if g != w]
        ok = got == want and labels == HAND_CLASSES
        detail = "12/12 retire Ticks match" if ok else (
            f"mismatch at requests {bad}; classes {labels}" if bad else f"classes {labels}")
        checks.append(Check(f"hand-trace/{policy}/rt{rt}", ok, detail))
    return checks


# -- suite -------------------------------------------------------------------------

def run_suite(seed=1, name_filter=None):
    """Run the checks whose name contains ``name_filter``; returns (checks, battery reports)."""
    groups = ("plans", "battery", "hand-trace")
    selected = groups
    if name_filter:
        selected = [g for g in groups if name_filter.startswith(g) or g.startswith(name_filter)] or groups
    checks = []
    reports = []
    if "plans" in selected:
        checks += plan_checks()
    if "battery" in selected:
        battery = run_battery(seed)
        reports = list(battery.values())
        checks += battery_checks(battery)
    if "hand-trace" in selected:
        checks += hand_trace_checks()
    if name_filter:
        checks = [c for c in checks if name_filter in c.name]
    return checks, reports


def format_table(checks):
    width = max((len(c.name) for c in checks), default=10)
    lines = [f"{'check':<{width}}  result  detail"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.detail}")
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n"
