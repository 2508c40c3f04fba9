import json

import numpy as np
import pytest

from semsense import io as sio
from semsense.signal_model import CfrPowerTrace, DatasetConfig, make_activity_dataset


def test_trace_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    for shape in [(200,), (150, 3)]:
        tr = CfrPowerTrace(rng.normal(1, 0.1, shape), 600.0, label="walking")
        sio.write_trace_csv(tmp_path / "t.csv", tr)
        back = sio.read_trace_csv(tmp_path / "t.csv")
        assert np.array_equal(back.samples, tr.samples)
        assert back.sample_rate_hz == 600.0 and back.label == "walking"
        assert back.n_subcarriers == tr.n_subcarriers


def test_header_layout(tmp_path):
    sio.write_trace_csv(tmp_path / "t.csv", CfrPowerTrace(np.array([1.0, 2.0]), 600.0, label="sit"))
    assert (tmp_path / "t.csv").read_text().splitlines() == ["sample_rate_hz,600.0", "label,sit", "1.0", "2.0"]


@pytest.mark.parametrize("text,line", [
    ("label,x\n1.0\n", 1),
    ("sample_rate_hz,abc\nlabel,x\n1.0\n", 1),
    ("sample_rate_hz,600\nfoo,x\n1.0\n", 2),
    ("sample_rate_hz,600\nlabel,x\n1.0,2.0\n3.0\n", 4),
    ("sample_rate_hz,600\nlabel,x\n1.0\nnan\n", 4),
    ("sample_rate_hz,600\nlabel,x\n1.0\nfoo\n", 4),
    ("sample_rate_hz,600\nlabel,x\n", 3),
])
def test_schema_mismatch_reports_line(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(sio.SchemaMismatchError) as exc:
        sio.read_trace_csv(p)
    assert exc.value.line == line
    assert f":{line}:" in str(exc.value)


def test_manifest_dataset(tmp_path):
    cfg = DatasetConfig(classes=("falling", "walking", "sitting", "standing"), traces_per_class=20,
                        duration_s=0.5)
    traces = make_activity_dataset(cfg)
    manifest = sio.write_dataset(tmp_path, traces, seeds=list(range(len(traces))))
    before = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    loaded = sio.ingest_csv(manifest)
    assert len(loaded) == 80
    assert [t.label for t in loaded] == [t.label for t in traces]
    assert all(np.array_equal(a.samples, b.samples) for a, b in zip(loaded, traces))
    entry = json.loads(manifest.read_text())["traces"][0]
    assert set(entry) == {"file", "label", "seed"}
    # ingestion never touches its inputs
    assert before == {p.name: p.read_bytes() for p in tmp_path.iterdir()}


def test_manifest_label_overrides_csv(tmp_path):
    sio.write_trace_csv(tmp_path / "a.csv", CfrPowerTrace(np.ones(4), 100.0, label="old"))
    (tmp_path / "m.json").write_text(json.dumps({"traces": [{"file": "a.csv", "label": "new", "seed": 1}]}))
    assert sio.ingest_csv(tmp_path / "m.json")[0].label == "new"


def test_bad_manifest(tmp_path):
    (tmp_path / "m.json").write_text("{\"nope\": 1}")
    with pytest.raises(sio.SchemaMismatchError):
        sio.ingest_csv(tmp_path / "m.json")
