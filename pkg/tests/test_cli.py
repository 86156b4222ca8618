import json
import shutil

import pytest
from conftest import CONFIGS

from trafficltl.abstraction import TransitionSystem
from trafficltl.cli import run
from trafficltl.config import ConfigError, load_config


@pytest.fixture
def workdir(tmp_path):
    for name in ("one_link.json", "one_link_network.json", "one_link_losing.json"):
        shutil.copy(CONFIGS / name, tmp_path / name)
    return tmp_path


def test_shipped_configs_load():
    for name in ("casestudy.json", "baseline_dwell3.json", "baseline_dwell4.json", "one_link.json", "chain.json"):
        cfg = load_config(CONFIGS / name)
        assert cfg.formula is not None
    cfg = load_config(CONFIGS / "casestudy.json")
    assert cfg.network.cap.tolist() == [40, 50, 50, 50, 40, 40, 40, 40, 40, 40]
    assert cfg.partition.size == 500 and cfg.seeds == list(range(20))
    assert (cfg.window, cfg.horizon, cfg.steps) == (75, 75, 300)
    assert load_config(CONFIGS / "baseline_dwell3.json").baseline_dwell == 3


def test_validate(workdir, capsys):
    assert run(["validate", "--config", str(workdir / "one_link.json")]) == 0
    assert "network ok" in capsys.readouterr().out


def test_abstract_one_link(workdir):
    out = workdir / "out"
    assert run(["abstract", "--config", str(workdir / "one_link.json"), "--out", str(out)]) == 0
    ts = TransitionSystem.from_dict(json.loads((out / "abstraction.json").read_text()))
    assert (ts.n_states, ts.n_actions) == (2, 2)
    assert sorted(ts.edges()) == [(0, 0, 0), (0, 1, 0), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    report = json.loads((out / "abstraction_report.json").read_text())
    assert report["cells"] == 2 and report["signals"] == 2 and report["edges"] == 7
    assert "edge_seconds" in report and "wall_seconds" in report
    assert run(["abstract", "--config", str(workdir / "one_link.json"), "--out", str(out), "--format", "dot"]) == 0
    assert (out / "abstraction.dot").read_text().startswith("digraph")


def test_synthesize_losing_spec(workdir, capsys):
    out = workdir / "out"
    code = run(["synthesize", "--config", str(workdir / "one_link_losing.json"), "--out", str(out)])
    assert code == 1
    assert "q=0" in capsys.readouterr().err
    report = json.loads((out / "synthesis_report.json").read_text())
    assert report["realizable"] is False and report["uncovered"]


def test_synthesize_simulate_monitor(workdir):
    cfg, out = str(workdir / "one_link.json"), str(workdir / "out")
    assert run(["synthesize", "--config", cfg, "--out", out, "--format", "hoa"]) == 0
    assert (workdir / "out" / "automaton.hoa").read_text().startswith("HOA: v1")
    report = json.loads((workdir / "out" / "synthesis_report.json").read_text())
    assert report["realizable"] and report["automaton_states"] == 2
    assert run(["simulate", "--config", cfg, "--out", out, "--seed", "7", "--steps", "300"]) == 0
    first = (workdir / "out" / "trace_controller_seed7.csv").read_bytes()
    assert run(["simulate", "--config", cfg, "--out", out, "--seed", "7", "--steps", "300"]) == 0
    assert (workdir / "out" / "trace_controller_seed7.csv").read_bytes() == first
    assert len(first.decode().splitlines()) == 301
    assert run(["simulate", "--config", cfg, "--out", out, "--policy", "baseline", "--seed", "7"]) == 0
    assert run(["monitor", "--config", cfg, "--out", out]) == 0
    verdicts = json.loads((workdir / "out" / "verdicts.json").read_text())
    assert verdicts["trace_controller_seed7.csv"]["outcome"] == "pass"


def test_simulate_without_controller(workdir, capsys):
    code = run(["simulate", "--config", str(workdir / "one_link.json"), "--out", str(workdir / "none")])
    assert code == 2
    assert "synthesize" in capsys.readouterr().err


def test_missing_links_key(workdir, capsys):
    net = json.loads((workdir / "one_link_network.json").read_text())
    del net["links"]
    (workdir / "one_link_network.json").write_text(json.dumps(net))
    assert run(["validate", "--config", str(workdir / "one_link.json")]) == 2
    assert "'links'" in capsys.readouterr().err


def test_unknown_link_in_formula(workdir):
    cfg = json.loads((workdir / "one_link.json").read_text())
    cfg["formula"] = "G F x[99] <= 3"
    (workdir / "bad.json").write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="99"):
        load_config(workdir / "bad.json")
    assert run(["synthesize", "--config", str(workdir / "bad.json"), "--out", str(workdir / "o")]) == 2


@pytest.mark.parametrize(
    "patch, fragment",
    [
        ({"partition": {"gridded": {"1": [0, 50]}}}, "partition"),
        ({"seeds": "all"}, "seeds"),
        ({"monitor": {"window": 0}}, "window"),
        ({"sigma_init": 5}, "sigma_init"),
        ({"network": "missing.json"}, "not found"),
    ],
)
def test_config_errors(workdir, patch, fragment):
    cfg = json.loads((workdir / "one_link.json").read_text())
    cfg.update(patch)
    (workdir / "bad.json").write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match=fragment):
        load_config(workdir / "bad.json")


def test_sigma_init_by_phases(workdir):
    cfg = json.loads((workdir / "one_link.json").read_text())
    cfg["sigma_init"] = {"v": 1}
    (workdir / "s.json").write_text(json.dumps(cfg))
    assert load_config(workdir / "s.json").sigma_init == 1


def test_hoa_config(workdir):
    (workdir / "gf.hoa").write_text(
        'HOA: v1\nStates: 2\nStart: 0\nAP: 1 "1 in sig"\nAcceptance: 2 Fin(0) & Inf(1)\n--BODY--\n'
        "State: 0\n[!0] 0\n[0] 1\nState: 1 {1}\n[!0] 0\n[0] 1\n--END--\n"
    )
    cfg = json.loads((workdir / "one_link.json").read_text())
    del cfg["formula"]
    cfg["hoa"] = "gf.hoa"
    (workdir / "h.json").write_text(json.dumps(cfg))
    assert run(["synthesize", "--config", str(workdir / "h.json"), "--out", str(workdir / "o")]) == 0
