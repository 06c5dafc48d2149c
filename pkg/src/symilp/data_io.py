"""On-disk formats: JSON documents, CSV tables, binary model checkpoints.

Every write goes through a temp-file-then-rename so a crash mid-write never
leaves a truncated file behind.  CSV floats are written with repr, which
round-trips float64 exactly, so reruns can be compared byte for byte.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError
from .ilp import ILPInstance, Solution, instance_to_doc, parse_instance
from .gnn import GnnModel, Scaler
from .symmetry import (
    LinkedOrbitBlocks,
    OrbitBlock,
    OrbitPartition,
    SymmetryDetection,
    SymmetryGenerators,
)

CHECKPOINT_MAGIC = b"SYMILP01"


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path, header, rows) -> None:
    """Plain comma-joined CSV; floats via repr so output is reproducible."""

    def cell(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- instance bundles -------------------------------------------------------

def save_instance_bundle(path, inst: ILPInstance, solution: Solution | None = None,
                         sizes=None, index: int | None = None) -> None:
    doc = {"instance": instance_to_doc(inst)}
    if solution is not None:
        doc["solution"] = {
            "status": solution.status,
            "objective": float(solution.objective),
            "values": [float(v) for v in solution.values],
            "exhausted": bool(solution.exhausted),
        }
    if sizes is not None:
        doc["sizes"] = [float(s) for s in np.asarray(sizes)]
    if index is not None:
        doc["index"] = int(index)
    write_json(path, doc)


def load_instance_bundle(path):
    doc = read_json(path)
    if "instance" not in doc:
        raise ParseError(f"{path}: missing 'instance' field")
    inst = parse_instance(json.dumps(doc["instance"]))
    sol = None
    if "solution" in doc:
        s = doc["solution"]
        sol = Solution(
            status=s["status"],
            objective=float(s["objective"]),
            values=np.array(s["values"], dtype=np.float64),
            exhausted=bool(s.get("exhausted", False)),
        )
    sizes = np.array(doc["sizes"], dtype=np.float64) if "sizes" in doc else None
    return inst, sol, sizes, doc.get("index")


# -- symmetry sidecars ------------------------------------------------------

def detection_to_doc(det: SymmetryDetection) -> dict:
    return {
        "generators": [
            {"pi": [int(x) for x in pi], "sigma": [int(x) for x in sigma]}
            for pi, sigma in det.generators.generators
        ],
        "log10_order": float(det.generators.group_order_log10),
        "partial": bool(det.generators.partial),
        "orbits": [[int(x) for x in orb] for orb in det.orbits.orbits],
        "blocks": [
            {
                "orbits": [int(k) for k in blk.orbit_ids],
                "alignment": [[int(x) for x in row] for row in blk.alignment],
            }
            for blk in det.blocks.blocks
        ],
        "detect_seconds": float(det.detect_seconds),
    }


def detection_from_doc(doc: dict) -> SymmetryDetection:
    gens = SymmetryGenerators(
        [
            (np.array(g["pi"], dtype=np.int64), np.array(g["sigma"], dtype=np.int64))
            for g in doc["generators"]
        ],
        float(doc["log10_order"]),
        partial=bool(doc.get("partial", False)),
    )
    orbits = [list(map(int, orb)) for orb in doc["orbits"]]
    size = sum(len(o) for o in orbits)
    orbit_of = np.empty(size, dtype=np.int64)
    for k, orb in enumerate(orbits):
        for j in orb:
            orbit_of[j] = k
    part = OrbitPartition(orbit_of, orbits)
    blocks = LinkedOrbitBlocks(
        [
            OrbitBlock(
                [int(k) for k in b["orbits"]],
                np.array(b["alignment"], dtype=np.int64),
            )
            for b in doc["blocks"]
        ]
    )
    return SymmetryDetection(gens, part, blocks, float(doc.get("detect_seconds", 0.0)))


def save_detection(path, det: SymmetryDetection) -> None:
    write_json(path, detection_to_doc(det))


def load_detection(path) -> SymmetryDetection:
    return detection_from_doc(read_json(path))


# -- model checkpoints ------------------------------------------------------

def save_checkpoint(path, model: GnnModel, scaler: Scaler, meta: dict | None = None) -> None:
    """Binary layout: magic, version, hidden, seed, param count, params, JSON meta."""
    meta_doc = {"scaler": scaler.as_dict()}
    if meta:
        meta_doc.update(meta)
    meta_bytes = json.dumps(meta_doc, sort_keys=True).encode("utf-8")
    params = np.ascontiguousarray(model.params, dtype="<f8")
    head = struct.pack(
        "<8sIIqQ", CHECKPOINT_MAGIC, 1, model.hidden, int(model.seed), params.shape[0]
    )
    atomic_write_bytes(path, head + params.tobytes() + struct.pack("<I", len(meta_bytes)) + meta_bytes)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<8sIIqQ")
    if len(blob) < head_size:
        raise ParseError(f"{path}: truncated checkpoint")
    magic, version, hidden, seed, count = struct.unpack("<8sIIqQ", blob[:head_size])
    if magic != CHECKPOINT_MAGIC:
        raise ParseError(f"{path}: not a checkpoint file")
    if version != 1:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    body = blob[head_size:]
    need = count * 8
    if len(body) < need + 4:
        raise ParseError(f"{path}: truncated checkpoint")
    params = np.frombuffer(body[:need], dtype="<f8").astype(np.float64)
    (meta_len,) = struct.unpack("<I", body[need : need + 4])
    meta_doc = json.loads(body[need + 4 : need + 4 + meta_len].decode("utf-8"))
    model = GnnModel(hidden=int(hidden), params=params, seed=int(seed))
    scaler = Scaler.from_dict(meta_doc.pop("scaler"))
    return model, scaler, meta_doc
