"""Readers and writers for events, tracks, model checkpoints and manifests.

Binary layouts (all little-endian):

* ``EVT1``: 16-byte header ``magic, u32 width, u32 height, u32 count``, then
  16-byte records ``u16 x, u16 y, u32 reserved (0), u64 t_us`` with the
  polarity in bit 63 of the timestamp word.
* ``TRK1``: ``magic, u32 count``, then ``f32 x, f32 y, u64 t_us`` per point.
* ``S2S1``: ``magic, u32 version, u32 input, u32 hidden, u32 output,
  u32 has_optimizer``, the float64 parameter arrays row-major in
  ``PARAM_NAMES`` order, then (optionally) ``u64 adam_step`` followed by the
  first- and second-moment arrays in the same order. A JSON sidecar
  ``<path>.json`` carries the normalisation and training configuration.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from evtraj.events import EVENT_DTYPE, SENSOR_HEIGHT, SENSOR_WIDTH
from evtraj.seq2seq import PARAM_NAMES, AdamState, LstmLayerParams, NormalizationSpec, Seq2SeqModel
from evtraj.tracker import TRACK_DTYPE


class FormatError(ValueError):
    """A file does not follow the layout its reader expects."""


_EVT_RECORD = np.dtype([("x", "<u2"), ("y", "<u2"), ("reserved", "<u4"), ("tp", "<u8")])
_TRK_RECORD = np.dtype([("x", "<f4"), ("y", "<f4"), ("t", "<u8")])
_POLARITY_BIT = np.uint64(1 << 63)
CHECKPOINT_VERSION = 1


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path, data: bytes):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)


def _write_text(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


def events_to_evt1(events: np.ndarray, width: int = SENSOR_WIDTH, height: int = SENSOR_HEIGHT) -> bytes:
    t = events["t"]
    if len(t) and (t.min() < 0):
        raise FormatError("EVT1 timestamps must be non-negative")
    rec = np.zeros(len(events), dtype=_EVT_RECORD)
    rec["x"], rec["y"] = events["x"], events["y"]
    rec["tp"] = t.astype(np.uint64) | (events["p"].astype(np.uint64) << np.uint64(63))
    return b"EVT1" + struct.pack("<III", width, height, len(events)) + rec.tobytes()


def events_from_evt1(data: bytes) -> np.ndarray:
    if len(data) < 16 or data[:4] != b"EVT1":
        raise FormatError("not an EVT1 file (bad magic)")
    width, height, count = struct.unpack("<III", data[4:16])
    body = data[16:]
    if len(body) != count * _EVT_RECORD.itemsize:
        raise FormatError(f"EVT1 header announces {count} events but body holds {len(body)} bytes")
    rec = np.frombuffer(body, dtype=_EVT_RECORD)
    if np.any(rec["reserved"] != 0):
        raise FormatError("EVT1 reserved field must be zero")
    if np.any(rec["x"] >= width) or np.any(rec["y"] >= height):
        raise FormatError("EVT1 event outside the declared sensor size")
    out = np.empty(count, dtype=EVENT_DTYPE)
    out["x"], out["y"] = rec["x"], rec["y"]
    out["t"] = (rec["tp"] & ~_POLARITY_BIT).astype(np.int64)
    out["p"] = (rec["tp"] >> np.uint64(63)).astype(np.uint8)
    return out


def events_to_csv(events: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "t_us", "p"])
    w.writerows(zip(events["x"].tolist(), events["y"].tolist(), events["t"].tolist(), events["p"].tolist()))
    return buf.getvalue()


def events_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["x", "y", "t_us", "p"]:
        raise FormatError("event CSV must start with the header x,y,t_us,p")
    try:
        data = [tuple(int(v) for v in r) for r in rows[1:] if r]
    except ValueError as exc:
        raise FormatError(f"bad event CSV row: {exc}") from None
    if any(len(r) != 4 for r in data):
        raise FormatError("event CSV rows must have four fields")
    for k, (x, y, t, p) in enumerate(data):
        if not (0 <= x < SENSOR_WIDTH and 0 <= y < SENSOR_HEIGHT and t >= 0 and p in (0, 1)):
            raise FormatError(f"event CSV row {k + 1} out of range: {(x, y, t, p)}")
    return np.array(data, dtype=EVENT_DTYPE) if data else np.empty(0, dtype=EVENT_DTYPE)


def write_events(path, events: np.ndarray, fmt: str = "binary"):
    if fmt == "binary":
        _write_bytes(path, events_to_evt1(events))
    elif fmt == "csv":
        _write_text(path, events_to_csv(events))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_events(path) -> np.ndarray:
    data = _read_bytes(path)
    if data[:4] == b"EVT1":
        return events_from_evt1(data)
    return events_from_csv(data.decode())


# ---------------------------------------------------------------------------
# tracks
# ---------------------------------------------------------------------------


def track_to_trk1(points: np.ndarray) -> bytes:
    rec = np.empty(len(points), dtype=_TRK_RECORD)
    rec["x"], rec["y"], rec["t"] = points["x"], points["y"], points["t"]
    return b"TRK1" + struct.pack("<I", len(points)) + rec.tobytes()


def track_from_trk1(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != b"TRK1":
        raise FormatError("not a TRK1 file (bad magic)")
    (count,) = struct.unpack("<I", data[4:8])
    body = data[8:]
    if len(body) != count * _TRK_RECORD.itemsize:
        raise FormatError(f"TRK1 header announces {count} points but body holds {len(body)} bytes")
    rec = np.frombuffer(body, dtype=_TRK_RECORD)
    out = np.empty(count, dtype=TRACK_DTYPE)
    out["x"], out["y"], out["t"] = rec["x"], rec["y"], rec["t"].astype(np.int64)
    return out


def track_to_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_b", "y_b", "t_us"])
    for x, y, t in zip(points["x"].tolist(), points["y"].tolist(), points["t"].tolist()):
        w.writerow([repr(x), repr(y), t])
    return buf.getvalue()


def track_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["x_b", "y_b", "t_us"]:
        raise FormatError("track CSV must start with the header x_b,y_b,t_us")
    body = [r for r in rows[1:] if r]
    out = np.empty(len(body), dtype=TRACK_DTYPE)
    try:
        for k, (x, y, t) in enumerate(body):
            out[k] = (float(x), float(y), int(t))
    except ValueError as exc:
        raise FormatError(f"bad track CSV row: {exc}") from None
    return out


def write_track(path, points: np.ndarray, fmt: str = "csv"):
    if fmt == "binary":
        _write_bytes(path, track_to_trk1(points))
    elif fmt == "csv":
        _write_text(path, track_to_csv(points))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_track(path) -> np.ndarray:
    data = _read_bytes(path)
    if data[:4] == b"TRK1":
        return track_from_trk1(data)
    return track_from_csv(data.decode())


# ---------------------------------------------------------------------------
# model checkpoints
# ---------------------------------------------------------------------------


def model_to_s2s1(model: Seq2SeqModel, include_optimizer: bool = True) -> bytes:
    opt = model.optimizer
    has_opt = include_optimizer and opt.step > 0
    parts = [b"S2S1", struct.pack("<IIIII", CHECKPOINT_VERSION, model.input_size, model.hidden_size,
                                  model.output_size, int(has_opt))]
    params = model.params()
    parts += [np.ascontiguousarray(params[k], dtype="<f8").tobytes() for k in PARAM_NAMES]
    if has_opt:
        parts.append(struct.pack("<Q", opt.step))
        for moments in (opt.m, opt.v):
            parts += [np.ascontiguousarray(moments[k], dtype="<f8").tobytes() for k in PARAM_NAMES]
    return b"".join(parts)


def model_from_s2s1(data: bytes, norm: NormalizationSpec | None = None) -> Seq2SeqModel:
    if len(data) < 24 or data[:4] != b"S2S1":
        raise FormatError("not an S2S1 checkpoint (bad magic)")
    version, I, H, O, has_opt = struct.unpack("<IIIII", data[4:24])
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    shapes = {
        "encoder.W_ih": (4 * H, I), "encoder.W_hh": (4 * H, H), "encoder.b": (4 * H,),
        "decoder.W_ih": (4 * H, H), "decoder.W_hh": (4 * H, H), "decoder.b": (4 * H,),
        "readout.W": (O, H), "readout.b": (O,),
    }
    n_param = sum(int(np.prod(s)) for s in shapes.values())
    expected = 24 + 8 * n_param + ((8 + 16 * n_param) if has_opt else 0)
    if len(data) != expected:
        raise FormatError(f"S2S1 size {len(data)} does not match dims (expected {expected})")

    pos = 24

    def take():
        nonlocal pos
        out = {}
        for k in PARAM_NAMES:
            n = int(np.prod(shapes[k]))
            out[k] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shapes[k]).copy()
            pos += 8 * n
        return out

    p = take()
    opt = AdamState()
    if has_opt:
        (opt.step,) = struct.unpack("<Q", data[pos : pos + 8])
        pos += 8
        opt.m = take()
        opt.v = take()
    return Seq2SeqModel(
        LstmLayerParams(p["encoder.W_ih"], p["encoder.W_hh"], p["encoder.b"]),
        LstmLayerParams(p["decoder.W_ih"], p["decoder.W_hh"], p["decoder.b"]),
        p["readout.W"], p["readout.b"], norm or NormalizationSpec(), opt,
    )


def save_model(path, model: Seq2SeqModel, train_config=None, extra: dict | None = None):
    """Write ``path`` (S2S1) and its JSON sidecar ``path + '.json'``."""
    _write_bytes(path, model_to_s2s1(model))
    opt = model.optimizer
    sidecar = {
        "format": "S2S1",
        "version": CHECKPOINT_VERSION,
        "dims": {"input": model.input_size, "hidden": model.hidden_size, "output": model.output_size},
        "normalization": asdict(model.norm),
        "adam": {"beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps, "step": opt.step},
        "train_config": None if train_config is None else asdict(train_config),
    }
    if extra:
        sidecar.update(extra)
    _write_text(str(path) + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_model(path) -> tuple[Seq2SeqModel, dict]:
    side_path = str(path) + ".json"
    sidecar = {}
    norm = None
    if os.path.exists(side_path):
        with open(side_path) as fh:
            sidecar = json.load(fh)
        norm = NormalizationSpec(**sidecar["normalization"])
    model = model_from_s2s1(_read_bytes(path), norm)
    adam = sidecar.get("adam")
    if adam:
        model.optimizer.beta1, model.optimizer.beta2, model.optimizer.eps = adam["beta1"], adam["beta2"], adam["eps"]
    return model, sidecar


# ---------------------------------------------------------------------------
# corpus manifests
# ---------------------------------------------------------------------------


def write_corpus(directory, corpus, fmt: str = "csv") -> Path:
    """Write every trajectory to ``directory`` plus a ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "trk1" if fmt == "binary" else "csv"
    entries = []
    for k, (traj, sid, flipped) in enumerate(zip(corpus.trajectories, corpus.source_ids, corpus.flipped)):
        name = f"traj_{sid:04d}{'_flip' if flipped else ''}.{ext}"
        pts = traj.points if hasattr(traj, "points") else traj
        write_track(directory / name, pts, fmt)
        entries.append({"file": name, "source_id": int(sid), "flipped": bool(flipped),
                        "split": corpus.split[k] if corpus.split else None})
    manifest = {"format": "corpus-v1", "provenance": corpus.provenance, "trajectories": entries}
    path = directory / "manifest.json"
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_corpus(manifest_path):
    from evtraj.dataset import TrajectoryCorpus
    from evtraj.sampling import SampledSequence

    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from None
    if manifest.get("format") != "corpus-v1":
        raise FormatError("manifest format must be corpus-v1")
    entries = manifest["trajectories"]
    root = manifest_path.parent
    trajs = [SampledSequence(read_track(root / e["file"]), None) for e in entries]
    splits = [e.get("split") for e in entries]
    return TrajectoryCorpus(
        trajs,
        [int(e["source_id"]) for e in entries],
        [bool(e["flipped"]) for e in entries],
        splits if all(splits) else [],
        dict(manifest.get("provenance", {}), imported=str(manifest_path)),
    )
