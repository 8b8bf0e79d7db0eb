"""Independent hand-trace oracle.

Enumerates, request by request, every device access of a small scripted trace on an
8-line direct-mapped cache and writes down the Tick at which each request retires.
It deliberately imports nothing from the simulator: the access schedules are typed
in by hand from the access-count table, and device timing is recomputed from the
raw bank/bus rules. Requests are spaced so that at most one demand is active at a
time (the one collision in the script is parked and only starts once its blocker
retires), which keeps the enumeration exact.

Run as a script to print the timeline that ``dramcache.validation`` freezes.
"""

PS = 1000  # Ticks per ns
LINE = 64
CACHE_LINES = 8

NEAR_TIMING = dict(tRCD=10, tRP=10, tCL=10, tCWL=5, tWR=6, tRTW=2, tWTR=3, tBURST=4, banks=16, channels=2)
FAR_TIMING = dict(tRCD=15, tRP=15, tCL=15, tCWL=10, tWR=8, tRTW=2, tWTR=4, tBURST=5, banks=16, channels=1)
FRONTEND = 10
BACKEND = 10

# (arrival ns, line number, is_write); addresses are line * 64
SCRIPT = [
    (0, 0, False),      # miss on a cold line (clean victim)
    (1000, 0, False),   # read hit, clean
    (2000, 0, True),    # write hit, clean
    (3000, 0, True),    # write hit, dirty
    (4000, 0, False),   # read hit, dirty
    (5000, 8, False),   # read miss, evicts dirty line 0
    (6000, 16, True),   # write miss, clean victim
    (7000, 24, True),   # write miss, dirty victim
    (8000, 1, True),    # write miss on a cold line
    (9000, 9, False),   # read miss, dirty victim
    (10000, 2, False),  # read miss, clean victim
    (10005, 2, False),  # collides with the previous one, parked, then hits
]

# Step lists per policy and class, written out by hand.
# Each step is (name, device, is_write, deps); device is "near", "far" or "wb".
TC = ("tag", "near", False, ())
_PLANS = {
    "baseline": {
        "rhc": [TC],
        "rhd": [TC],
        "rmc": [TC, ("far_rd", "far", False, ("tag",)), ("fill", "near", True, ("far_rd",))],
        "rmd": [TC, ("far_rd", "far", False, ("tag",)), ("fill", "near", True, ("far_rd",)),
                ("wb", "wb", True, ("tag",))],
        "whc": [TC, ("wr", "near", True, ("tag",))],
        "whd": [TC, ("wr", "near", True, ("tag",))],
        "wmc": [TC, ("wr", "near", True, ("tag",))],
        "wmd": [TC, ("wr", "near", True, ("tag",)), ("wb", "wb", True, ("tag",))],
    },
}
_PLANS["bear-wr-opt"] = dict(_PLANS["baseline"], whc=[("wr", "near", True, ())], whd=[("wr", "near", True, ())])
_PLANS["oracle"] = dict(
    _PLANS["bear-wr-opt"],
    rmc=[("far_rd", "far", False, ()), ("fill", "near", True, ("far_rd",))],
    wmc=[("wr", "near", True, ())],
)


class Chan:
    def __init__(self, t):
        self.t = t
        self.open = {}
        self.col_ready = {}
        self.act_ready = {}
        self.bus_free = 0
        self.last = None
        self.look = (t["tRP"] + t["tRCD"] + max(t["tCL"], t["tCWL"])) * PS

    def access(self, when, local_addr, is_write):
        """One access submitted at ``when`` to an otherwise idle queue; returns data end."""
        t = {k: v * PS for k, v in self.t.items() if k.startswith("t")}
        decide = max(when, self.bus_free - self.look)
        bank = (local_addr // LINE) % self.t["banks"]
        row = 0  # the toy capacities leave one row per bank
        if self.open.get(bank) == row:
            col = max(decide, self.col_ready.get(bank, 0))
        elif bank not in self.open:
            col = max(decide, self.act_ready.get(bank, 0)) + t["tRCD"]
        else:
            col = max(decide, self.act_ready.get(bank, 0)) + t["tRP"] + t["tRCD"]
        bus = self.bus_free
        if self.last is not None and self.last != is_write:
            bus += t["tRTW"] if is_write else t["tWTR"] + t["tCL"]
        lat = t["tCWL"] if is_write else t["tCL"]
        start = max(col + lat, bus)
        end = start + t["tBURST"]
        self.open[bank] = row
        self.col_ready[bank] = start - lat + t["tBURST"]
        self.act_ready[bank] = end + t["tWR"] if is_write else end
        self.bus_free = end
        self.last = is_write
        return end


def timeline(policy="baseline", link_rt_ns=0):
    """Return a list of (request number, class label, retire Tick)."""
    half = link_rt_ns * PS // 2
    other = link_rt_ns * PS - half
    near = [Chan(NEAR_TIMING) for _ in range(NEAR_TIMING["channels"])]
    far = Chan(FAR_TIMING)
    valid = [False] * CACHE_LINES
    dirty = [False] * CACHE_LINES
    tag = [0] * CACHE_LINES
    plans = _PLANS[policy]
    out = []
    busy_until = {}  # index -> retire Tick of the live request
    for n, (arr_ns, line, is_write) in enumerate(SCRIPT):
        arrival = arr_ns * PS
        idx, tg = line % CACHE_LINES, line // CACHE_LINES
        admitted = max(arrival, busy_until.get(idx, 0))
        hit = valid[idx] and tag[idx] == tg
        vdirty = valid[idx] and dirty[idx]
        label = ("w" if is_write else "r") + ("h" if hit else "m") + ("d" if vdirty else "c")
        steps = plans[label]
        victim_line = tag[idx] * CACHE_LINES + idx
        done = {}
        start = admitted + FRONTEND * PS
        # walk the steps in dependency waves; same-wave ops keep their listed order
        pending = list(steps)
        ready_at = {}
        while pending:
            wave = [s for s in pending if all(d in done for d in s[3])]
            wave_time = {s[0]: max([start] + [done[d] for d in s[3]]) for s in wave}
            wave.sort(key=lambda s: (wave_time[s[0]], steps.index(s)))
            for name, dev, w, deps in wave:
                t0 = wave_time[name]
                ready_at[name] = t0
                if dev == "near":
                    ch = near[idx % 2]
                    done[name] = ch.access(t0, (idx // 2) * LINE, w)
                elif dev == "far":
                    done[name] = far.access(t0 + half, line * LINE, w) + other
                else:  # write-back: buffered immediately, far write issued at once
                    far.access(t0 + half, victim_line * LINE, True)
                    done[name] = t0
                pending.remove((name, dev, w, deps))
        retire = max(done.values()) + BACKEND * PS
        out.append((n, label, retire))
        busy_until[idx] = retire
        if hit:
            if is_write:
                dirty[idx] = True
        else:
            valid[idx], tag[idx], dirty[idx] = True, tg, is_write
    return out


if __name__ == "__main__":
    for pol in ("baseline", "bear-wr-opt", "oracle"):
        for rt in (0, 100):
            print(pol, rt, [(lbl, t) for _, lbl, t in timeline(pol, rt)])
