import json

import numpy as np
import pytest

from symilp.data_io import (
    atomic_write_text,
    detection_from_doc,
    detection_to_doc,
    load_checkpoint,
    load_detection,
    load_instance_bundle,
    save_checkpoint,
    save_detection,
    save_instance_bundle,
    write_csv,
)
from symilp.errors import ParseError
from symilp.gnn import Scaler, init_model
from symilp.ilp import solve_exact
from symilp.symmetry import analyze_instance

from test_ilp import packing_three_items, tiny_symmetric


class TestBundles:
    def test_round_trip(self, tmp_path):
        inst = packing_three_items()
        sol = solve_exact(inst)
        path = tmp_path / "inst_0000.json"
        save_instance_bundle(path, inst, sol, sizes=[1.0, 3.0, 5.0], index=4)
        inst2, sol2, sizes, index = load_instance_bundle(path)
        assert np.array_equal(inst2.obj, inst.obj)
        assert np.array_equal(inst2.rhs, inst.rhs)
        assert np.array_equal(inst2.rows, inst.rows)
        assert np.array_equal(inst2.cols, inst.cols)
        assert np.array_equal(inst2.vals, inst.vals)
        assert sol2.status == sol.status
        assert sol2.objective == sol.objective
        assert np.array_equal(sol2.values, sol.values)
        assert np.array_equal(sizes, [1.0, 3.0, 5.0])
        assert index == 4

    def test_optional_fields(self, tmp_path):
        path = tmp_path / "bare.json"
        save_instance_bundle(path, tiny_symmetric())
        inst, sol, sizes, index = load_instance_bundle(path)
        assert sol is None and sizes is None and index is None
        assert inst.num_vars == 3

    def test_missing_instance_field(self, tmp_path):
        path = tmp_path / "bad.json"
        atomic_write_text(path, json.dumps({"solution": {}}))
        with pytest.raises(ParseError):
            load_instance_bundle(path)


class TestDetectionSidecar:
    def test_round_trip_preserves_everything(self, tmp_path):
        det = analyze_instance(packing_three_items())
        path = tmp_path / "symm.json"
        save_detection(path, det)
        det2 = load_detection(path)
        assert det2.generators.group_order_log10 == det.generators.group_order_log10
        assert det2.generators.partial == det.generators.partial
        assert len(det2.generators.generators) == len(det.generators.generators)
        for (pa, sa), (pb, sb) in zip(det.generators.generators, det2.generators.generators):
            assert np.array_equal(pa, pb) and np.array_equal(sa, sb)
        assert [list(o) for o in det2.orbits.orbits] == [list(o) for o in det.orbits.orbits]
        assert np.array_equal(det2.orbits.orbit_of, det.orbits.orbit_of)
        assert len(det2.blocks.blocks) == len(det.blocks.blocks)
        for ba, bb in zip(det.blocks.blocks, det2.blocks.blocks):
            assert ba.orbit_ids == bb.orbit_ids
            assert np.array_equal(ba.alignment, bb.alignment)
        assert det2.detect_seconds == det.detect_seconds

    def test_doc_is_json_clean(self):
        doc = detection_to_doc(analyze_instance(tiny_symmetric()))
        parsed = json.loads(json.dumps(doc))
        det = detection_from_doc(parsed)
        assert det.orbits.orbits == [[0, 1], [2]]


class TestCsv:
    def test_reproducible_bytes(self, tmp_path):
        rows = [(0, "orbit", 0.1 + 0.2), (1, "noaug", 1.0 / 3.0)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a, ["epoch", "scheme", "loss"], rows)
        write_csv(b, ["epoch", "scheme", "loss"], rows)
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        assert text.splitlines()[0] == "epoch,scheme,loss"
        # repr round-trips the float exactly
        assert float(text.splitlines()[1].split(",")[2]) == 0.1 + 0.2

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        write_csv(tmp_path / "t.csv", ["x"], [(1,)])
        assert [p.name for p in tmp_path.iterdir()] == ["t.csv"]


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        model = init_model(hidden=16, seed=9)
        scaler = Scaler(0.1, 1.1, 0.2, 1.2, 0.3, 1.3, 0.4, 1.4)
        path = tmp_path / "model.bin"
        save_checkpoint(path, model, scaler, meta={"scheme": "orbit", "epochs": 30})
        model2, scaler2, meta = load_checkpoint(path)
        assert model2.hidden == 16
        assert model2.seed == 9
        assert np.array_equal(model2.params, model.params)
        assert scaler2 == scaler
        assert meta == {"scheme": "orbit", "epochs": 30}

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ParseError):
            load_checkpoint(path)

    def test_rejects_truncated(self, tmp_path):
        model = init_model(hidden=8, seed=1)
        scaler = Scaler(0, 1, 0, 1, 0, 1, 0, 1)
        path = tmp_path / "model.bin"
        save_checkpoint(path, model, scaler)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ParseError):
            load_checkpoint(path)
