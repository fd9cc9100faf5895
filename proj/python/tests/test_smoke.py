# Copyright 2026 The ctxnoise Authors
# SPDX-License-Identifier: Apache-2.0

import json
import math
import os
import pathlib

import pytest

import ctxnoise

ROOT = pathlib.Path(__file__).resolve().parents[2]
DATA = pathlib.Path(os.environ.get("CTXNOISE_DATA", ROOT / "data"))
FIXTURES = pathlib.Path(os.environ.get("CTXNOISE_FIXTURES", ROOT / "tests" / "fixtures"))


def test_ter():
    assert ctxnoise.ter("a b c d", "a b c d") == 0.0
    # One block shift.
    d = ctxnoise.ter_detail(["a", "b", "c", "d"], ["c", "d", "a", "b"])
    assert d["edits"] == 1 and d["shifts"] == 1 and d["exact"]
    assert ctxnoise.ter(["x", "y"], ["x"]) == pytest.approx(50.0)


def test_empty_reference_raises_typed_error():
    with pytest.raises(ctxnoise.Error) as e:
        ctxnoise.ter([], ["a"])
    assert e.value.kind == "validation"
    assert e.value.exit_code == 4


def test_entropy_and_correlations():
    assert ctxnoise.entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-12)
    c = ctxnoise.correlations([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
    assert c["pearson"] == pytest.approx(0.8)
    assert c["kendall_tau_b"] == pytest.approx(0.6)
    assert ctxnoise.correlations([1, 1, 1], [1, 2, 3])["pearson"] is None


def test_blend():
    dist, branch, cg = ctxnoise.blend({"a": 0.9, "b": 0.1}, {"a": 0.5, "b": 0.5}, 0.5)
    assert branch == "blend" and cg > 0
    assert dist["a"] == pytest.approx(0.7)
    dist, branch, _ = ctxnoise.blend({"a": 0.5, "b": 0.5}, {"a": 0.9, "b": 0.1})
    assert branch == "suppress" and dist == {"a": 0.9, "b": 0.1}
    assert ctxnoise.confidence_gain({"a": 1.0}, {"a": 0.5, "b": 0.5}) == pytest.approx(math.log(2))


def test_traces():
    path = str(FIXTURES / "traces" / "synthetic.jsonl")
    rows = ctxnoise.analyze_traces(path)
    assert len(rows) == 4
    assert rows[0]["span"] == (1, 3)
    assert rows[3]["span"] is None
    by = ctxnoise.attention_by_condition(path)
    assert by["opposite"]["context"] > by["opposite"]["idiom"]


def test_cell_aggregation():
    fid, aux = ctxnoise.load_cell_table(str(FIXTURES / "fidelity_cells_7b.csv"))
    rows = {r["condition"]: r for r in ctxnoise.aggregate_cells(fid, aux)}
    assert abs(rows["gold"]["avg_f"] - 2.3) <= 0.05
    assert abs(rows["gold"]["avg_c"] - 72.8) <= 0.05


def test_offline_run(tmp_path):
    cfg = json.loads((DATA / "demo" / "offline.json").read_text())
    cfg["datasets"] = [str(DATA / "demo" / "corpus.jsonl")]
    cfg["cache_dir"] = str(tmp_path / "cache")
    cfg["output_dir"] = str(tmp_path / "out")
    cfg["judge"]["runs"] = 3
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    cold = ctxnoise.run(str(path))
    assert cold["client_calls"] > 0
    assert (tmp_path / "out" / "aggregate.csv").exists()
    again = ctxnoise.run(str(path))
    assert again["stages_run"] == []
    assert again["client_calls"] == 0


def test_config_error():
    with pytest.raises(ctxnoise.Error) as e:
        ctxnoise.run("/nonexistent/run.json")
    assert e.value.kind in ("config", "io")
