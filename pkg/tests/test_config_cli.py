import csv
import io
import textwrap

import pytest

from dramcache import config as cfgmod
from dramcache.cli import main
from dramcache.core import ConfigError, ns
from dramcache.device import DeviceKind
from dramcache.system import simulate
from dramcache.telemetry import emit

BASE = textwrap.dedent("""
    [engine]
    seed = 4
    duration_ns = 3000
    run_id = t

    [manager]
    policy = baseline

    [traffic]
    read_pct = 0.7
    target_miss_ratio = 0.5
    dirty_victim_pct = 0.4
""")


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(BASE)
    return path


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_defaults_match_reference_system():
    cfg = cfgmod.from_raw(cfgmod.default_raw())
    m = cfg.manager
    assert (m.orb_entries, m.crb_entries, m.wb_entries) == (128, 32, 64)
    assert m.frontend_lat + m.backend_lat == ns(20)
    assert cfg.cache_bytes == 128 << 20 and cfg.far_bytes == 3 << 30
    assert cfg.near.kind is DeviceKind.HBM2_PSEUDO_CHANNEL and cfg.near.total_peak_bw == 32.0
    assert cfg.far.peak_bw == 19.2


def test_dotted_bare_and_env_keys():
    raw = cfgmod.parse_text(BASE)
    cfgmod.set_value(raw, "far_link_round_trip_ns", "250")
    cfgmod.set_value(raw, "far_device.kind", "nvm")
    cfgmod.apply_env(raw, {"DRAMCACHE__MANAGER__ORB_ENTRIES": "64", "OTHER": "x"})
    cfg = cfgmod.from_raw(raw)
    assert cfg.link.round_trip == ns(250)
    assert cfg.far.kind is DeviceKind.NVM
    assert cfg.manager.orb_entries == 64


def test_key_errors():
    raw = cfgmod.default_raw()
    with pytest.raises(ConfigError, match="unknown"):
        cfgmod.set_value(raw, "bogus", 1)
    with pytest.raises(ConfigError, match="ambiguous"):
        cfgmod.set_value(raw, "kind", "ddr4")
    with pytest.raises(ConfigError, match="traffic.read_pct"):
        cfgmod.parse_text("[traffic]\nread_pct = lots\n")
    with pytest.raises(ConfigError, match="unknown section"):
        cfgmod.parse_text("[nope]\nx = 1\n")


def test_near_must_be_smaller_than_far():
    raw = cfgmod.default_raw()
    cfgmod.set_value(raw, "near_device.capacity_mb", "4096")
    with pytest.raises(ConfigError, match="smaller"):
        cfgmod.from_raw(raw)


def test_echo_reproduces_run(cfg_file):
    cfg = cfgmod.from_raw(cfgmod.load(cfg_file))
    a, _ = simulate(cfg)
    again = cfgmod.from_raw(a.config)
    b, _ = simulate(again)
    assert emit(a) == emit(b)
    # programmatic configs echo too
    c, _ = simulate(cfgmod.from_raw(cfgmod.to_raw(cfg)))
    assert emit(c) == emit(a)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        cfgmod.load(tmp_path / "none.ini")


def test_cli_run(cfg_file, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", str(cfg_file), "--out", str(out)]) == 0
    (row,) = rows(out.read_text())
    assert row["run_id"] == "t" and int(row["demands"]) > 0


def test_cli_run_json_and_events(cfg_file, tmp_path, capsys):
    events = tmp_path / "ev.log"
    assert main(["run", str(cfg_file), "--format", "json", "--debug-events", str(events), "--seed", "9"]) == 0
    assert '"seed": 9' in capsys.readouterr().out
    assert events.read_text().count("\n") > 100


def test_cli_rejects_zero_wb(cfg_file, capsys):
    cfg_file.write_text(BASE.replace("policy = baseline", "policy = baseline\nwb_entries = 0"))
    assert main(["run", str(cfg_file)]) != 0
    assert "wb_entries" in capsys.readouterr().err


def test_cli_missing_trace_names_path(tmp_path, capsys):
    path = tmp_path / "t.ini"
    path.write_text("[traffic]\nmode = trace\ntrace_path = gone.trace\n")
    assert main(["run", str(path)]) != 0
    assert str(tmp_path / "gone.trace") in capsys.readouterr().err


def test_cli_trace_run(tmp_path, capsys):
    (tmp_path / "a.trace").write_text("0 0x0 R\n10 0x40 W\n20 0x0 R\n")
    path = tmp_path / "t.ini"
    path.write_text("[traffic]\nmode = trace\ntrace_path = a.trace\n")
    assert main(["run", str(path)]) == 0
    (row,) = rows(capsys.readouterr().out)
    assert row["demands"] == "3" and row["rhc"] == "1"


def test_sweep_link_latency(cfg_file, capsys):
    cfg_file.write_text(BASE.replace("duration_ns = 3000", "duration_ns = 20000"))
    assert main(["sweep", str(cfg_file), "--axis", "far_link_round_trip_ns", "--values", "100,500,1000"]) == 0
    out = rows(capsys.readouterr().out)
    assert [r["link_rt_ns"] for r in out] == ["100.000000", "500.000000", "1000.000000"]
    bw = [float(r["eff_bw_gbps"]) for r in out]
    assert bw[0] >= bw[1] >= bw[2]


def test_sweep_policy_amplification(cfg_file, capsys):
    assert main(["sweep", str(cfg_file), "--axis", "manager.policy",
                 "--values", "baseline", "bear-wr-opt", "oracle"]) == 0
    amp = [float(r["amp"]) for r in rows(capsys.readouterr().out)]
    assert amp[0] >= amp[1] >= amp[2]


def test_single_point_sweep_equals_run(cfg_file, capsys):
    main(["run", str(cfg_file)])
    (run_row,) = rows(capsys.readouterr().out)
    main(["sweep", str(cfg_file), "--axis", "engine.seed", "--values", "4"])
    (sweep_row,) = rows(capsys.readouterr().out)
    run_row.pop("run_id")
    sweep_row.pop("run_id")
    assert run_row == sweep_row


def test_sweep_unknown_axis(cfg_file, capsys):
    assert main(["sweep", str(cfg_file), "--axis", "nope", "--values", "1"]) != 0
    assert "nope" in capsys.readouterr().err


def test_validate_exit_status(capsys):
    assert main(["validate", "--filter", "plans"]) == 0
    out = capsys.readouterr().out
    assert "24/24 checks passed" in out
    assert main(["validate", "--filter", "hand-trace/oracle"]) == 0
