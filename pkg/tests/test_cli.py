import json
import subprocess
import sys

import pytest
import yaml

from tabperm.cli import main
from tabperm.datasets import fixture_path
from tabperm.report import read_heatmap_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    err = capsys.readouterr().err
    return code, (json.loads(err.strip().splitlines()[-1]) if err.strip() else None)


def write_config(path, tree):
    path.write_text(yaml.safe_dump(tree))
    return path


def test_sweep_rugby(tmp_path, capsys):
    out = tmp_path / "out"
    code, _ = run(capsys, "sweep", "--fixture", "rugby", "--out", out)
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["rugby.heatmap.csv", "rugby.heatmap.json", "rugby.heatmap.svg",
                     "rugby.report.json", "rugby.slices.svg"]
    grid = read_heatmap_csv((out / "rugby.heatmap.csv").read_text())
    assert grid.shape == (13, 13)
    lines = (out / "rugby.heatmap.csv").read_text().splitlines()
    assert lines[0] == "a\\b," + ",".join(map(str, range(13)))
    assert lines[1].startswith("12,") and lines[-1].startswith("0,")
    rep = json.loads((out / "rugby.report.json").read_text())
    assert rep["schema"] == "platonic-report/1"
    assert rep["provenance"]["provider_id"].startswith("mock-positional")
    assert "identity" in (out / "rugby.heatmap.svg").read_text()


def test_sweep_input_file_and_slices(tmp_path, capsys):
    src = tmp_path / "t.csv"
    src.write_text(fixture_path("grid6").read_text())
    code, _ = run(capsys, "sweep", "--input", src, "--out", tmp_path / "o", "--provider",
                  "mock-context-free", "--row-slice-b", "0", "--col-slice-a", "2")
    assert code == 0
    rep = json.loads((tmp_path / "o" / "t.report.json").read_text())
    assert rep["axis"]["rows"]["fixed_index"] == 0 and rep["axis"]["cols"]["fixed_index"] == 2
    assert rep["rho_mono"] is None and rep["pi_derange"] == pytest.approx(1.0)


def test_sweep_is_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", {"input": {"fixtures": ["grid6"]}, "sweep": {"seed": 4},
                                             "output": {"svg_timestamp": False}})
    for d in ("a", "b"):
        assert run(capsys, "sweep", "--config", cfg, "--out", tmp_path / d)[0] == 0
    for name in ("grid6.heatmap.csv", "grid6.heatmap.json", "grid6.report.json", "grid6.heatmap.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_changes_output(tmp_path, capsys):
    run(capsys, "sweep", "--fixture", "grid6", "--seed", "1", "--out", tmp_path / "a")
    run(capsys, "sweep", "--fixture", "grid6", "--seed", "2", "--out", tmp_path / "b")
    assert (tmp_path / "a" / "grid6.heatmap.csv").read_text() != (tmp_path / "b" / "grid6.heatmap.csv").read_text()


def test_usage_errors_exit_2(tmp_path, capsys):
    code, diag = run(capsys, "sweep", "--out", tmp_path / "o")
    assert code == 2 and "no input tables" in diag["message"]
    code, diag = run(capsys, "sweep", "--fixture", "grid6", "--set", "sweep.bogus=1", "--out", tmp_path / "o")
    assert code == 2 and "unknown config key" in diag["message"]
    code, _ = run(capsys, "sweep", "--fixture", "nope", "--out", tmp_path / "o")
    assert code == 2
    code, _ = run(capsys, "frobnicate")
    assert code == 2
    code, _ = run(capsys, "sweep", "--fixture", "grid6", "--provider", "remote-api",
                  "--set", "provider.endpoint=not a url", "--set", "provider.model=m", "--out", tmp_path / "o")
    assert code == 2
    bad = tmp_path / "ragged.csv"
    bad.write_text("a,b\n1\n")
    code, diag = run(capsys, "sweep", "--input", bad, "--out", tmp_path / "o")
    assert code == 2 and "record" in diag["message"]
    assert not (tmp_path / "o").exists()


def test_missing_auth_env_exit_2(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("TABPERM_TEST_KEY", raising=False)
    code, diag = run(capsys, "sweep", "--fixture", "grid6", "--provider", "remote-api",
                     "--set", "provider.endpoint=http://127.0.0.1:9/x", "--set", "provider.model=m",
                     "--set", "provider.auth_env=TABPERM_TEST_KEY", "--out", tmp_path / "o")
    assert code == 2 and "TABPERM_TEST_KEY" in diag["message"]


def test_unreachable_provider_exit_3_no_files(tmp_path, capsys):
    out = tmp_path / "o"
    code, diag = run(capsys, "sweep", "--fixture", "grid6", "--provider", "remote-api",
                     "--set", "provider.endpoint=http://127.0.0.1:9/x", "--set", "provider.model=m",
                     "--set", "provider.retries=0", "--set", "provider.timeout_ms=500",
                     "--set", f"cache.dir={tmp_path / 'cache'}", "--out", out)
    assert code == 3
    assert diag["error"] == "ProviderError" and "cell" in diag
    assert not out.exists()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".stage-")]


def test_remote_sweep_deterministic_with_warm_cache(tmp_path, capsys, embed_server, t3x3):
    from tabperm.table import write_table
    src = tmp_path / "t3.csv"
    src.write_text(write_table(t3x3))
    cfg = write_config(tmp_path / "c.yaml", {
        "input": {"paths": [str(src)], "row_header_column": True},
        "provider": {"kind": "remote-api", "endpoint": embed_server.url, "model": "toy"},
        "cache": {"dir": str(tmp_path / "cache")},
    })
    assert run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "a")[0] == 0
    sent = len(embed_server.requests)
    assert run(capsys, "sweep", "--config", cfg, "--out", tmp_path / "b")[0] == 0
    assert len(embed_server.requests) == sent
    for name in ("t3.heatmap.csv", "t3.heatmap.json", "t3.report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_aggregate(tmp_path, capsys):
    sweeps = tmp_path / "sweeps"
    assert run(capsys, "sweep", "--set", "input.synthetic.count=3", "--set", "input.synthetic.n_range=[4, 6]",
               "--set", "input.synthetic.m_range=[3, 4]", "--out", sweeps)[0] == 0
    code, _ = run(capsys, "aggregate", f"{sweeps}/*.report.json", "--out", tmp_path / "agg")
    assert code == 0
    doc = json.loads((tmp_path / "agg" / "summary.json").read_text())
    assert len(doc["reports"]) == 3
    group = doc["groups"][0]
    assert group["n_reports"] == 3
    assert group["columns"] == ["rho_mono.rows", "rho_mono.cols", "rho_mono.all", "pi_derange.rows",
                                "pi_derange.cols", "pi_derange.all", "auc.rows", "auc.cols"]
    header = (tmp_path / "agg" / "summary.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["provider_id", "mode", "n_reports"] and len(header) == 3 + 8 * 3


def test_aggregate_errors(tmp_path, capsys):
    code, diag = run(capsys, "aggregate", f"{tmp_path}/none-*.json", "--out", tmp_path / "agg")
    assert code == 2
    run(capsys, "sweep", "--fixture", "grid6", "--out", tmp_path / "s")
    (tmp_path / "s" / "old.report.json").write_text(json.dumps({"schema": "platonic-report/0"}))
    code, diag = run(capsys, "aggregate", f"{tmp_path}/s/*.report.json", "--out", tmp_path / "agg")
    assert code == 2 and diag["error"] == "SchemaVersionError"
    assert diag["files"] == [str(tmp_path / "s" / "old.report.json")]
    assert not (tmp_path / "agg").exists()


def test_refine(tmp_path, capsys):
    code, _ = run(capsys, "refine", "--fixture", "grid6", "--set", "refine.epochs=20", "--out", tmp_path / "r")
    assert code == 0
    summary = json.loads((tmp_path / "r" / "grid6.refine.json").read_text())
    assert summary["loss_final"] < summary["loss_initial"]
    assert summary["alignment_after"] > summary["alignment_before"]
    params = json.loads((tmp_path / "r" / "grid6.params.json").read_text())
    assert params["fingerprint"] == summary["params_fingerprint"]
    assert (tmp_path / "r" / "grid6.loss.csv").read_text().count("\n") == 21


def test_refine_zero_epochs(tmp_path, capsys):
    code, _ = run(capsys, "refine", "--fixture", "grid6", "--set", "refine.epochs=0", "--out", tmp_path / "r")
    assert code == 0
    summary = json.loads((tmp_path / "r" / "grid6.refine.json").read_text())
    assert summary["loss_final"] == summary["loss_initial"]
    assert not (tmp_path / "r" / "grid6.loss.csv").exists()


def test_probe(tmp_path, capsys):
    code, _ = run(capsys, "probe", "--provider", "mock-context-free", "--set", "input.synthetic.count=4",
                  "--set", "input.synthetic.n_range=[3, 5]", "--set", "input.synthetic.m_range=[3, 4]",
                  "--out", tmp_path / "p")
    assert code == 0
    doc = json.loads((tmp_path / "p" / "probe.json").read_text())
    assert doc["self_retrieval"] == 1.0 and doc["mrr"] == 1.0 and len(doc["tables"]) == 4


def test_embed_dump(tmp_path, capsys):
    code, _ = run(capsys, "embed-dump", "--fixture", "rugby", "--out", tmp_path / "e")
    assert code == 0
    doc = json.loads((tmp_path / "e" / "rugby.embeddings.json").read_text())
    assert len(doc["vectors"]) == 144 and len(doc["index"]) == 144
    assert (tmp_path / "e" / "rugby.pca.csv").read_text().count("\n") == 145
    code, _ = run(capsys, "embed-dump", "--fixture", "rugby", "--set", "embed.include_headers=true",
                  "--out", tmp_path / "h")
    assert len(json.loads((tmp_path / "h" / "rugby.embeddings.json").read_text())["vectors"]) == 168


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tabperm.cli", "sweep", "--fixture", "nope",
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["exit_code"] == 2
