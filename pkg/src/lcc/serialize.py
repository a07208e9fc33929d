"""Persistence for every artifact: JSON with 17-significant-digit
floats (bit-stable round trips) and the CSV dataset/report formats."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .coding import Code, Codebook
from .cover import ManifoldCover
from .data import Dataset
from .diagnostics import LocalityReport
from .supervised import LinearModel

_SIGN_NAMES = {1: "positive", -1: "negative", 0: "zero"}


def format_float(value: float) -> str:
    if not np.isfinite(value):
        raise ValueError(f"refusing to serialize non-finite float {value!r}")
    return format(float(value), ".17g")


def _emit(obj, out: list):
    """Recursive JSON emitter with sorted keys and .17g floats."""
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out)
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    out: list[str] = []
    _emit(obj, out)
    return "".join(out) + "\n"


def dump_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj))


def load_json(path):
    return json.loads(Path(path).read_text())


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Header x0..x{d-1}[,y], one sample per line, .17g floats."""
    header = [f"x{i}" for i in range(dataset.d)]
    if dataset.targets is not None:
        header.append("y")
    lines = [",".join(header)]
    for i in range(dataset.n):
        row = [format_float(v) for v in dataset.points[i]]
        if dataset.targets is not None:
            target = dataset.targets[i]
            row.append(str(int(target)) if np.issubdtype(dataset.targets.dtype, np.integer)
                       else format_float(target))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset_csv(path) -> Dataset:
    text = Path(path).read_text().strip().split("\n")
    header = text[0].split(",")
    has_target = header[-1] == "y"
    d = len(header) - (1 if has_target else 0)
    rows = [line.split(",") for line in text[1:]] if len(text) > 1 else []
    points = np.asarray([[float(v) for v in row[:d]] for row in rows], dtype=np.float64)
    if points.size == 0:
        points = points.reshape(0, d)
    targets = None
    if has_target:
        raw = [row[d] for row in rows]
        if all("." not in v and "e" not in v and "E" not in v for v in raw):
            targets = np.asarray([int(v) for v in raw], dtype=np.int64)
        else:
            targets = np.asarray([float(v) for v in raw], dtype=np.float64)
    return Dataset(points=points, targets=targets)


def save_codebook(codebook: Codebook, path) -> None:
    dump_json({
        "d": codebook.d,
        "mode": codebook.mode,
        "anchors": codebook.anchors,
    }, path)


def load_codebook(path) -> Codebook:
    obj = load_json(path)
    return Codebook(anchors=np.asarray(obj["anchors"], dtype=np.float64), mode=obj["mode"])


def save_codes(codes: list[Code], path) -> None:
    if codes:
        size = codes[0].size
    else:
        size = 0
    dump_json({
        "size": size,
        "codes": [[[i, code.entries[i]] for i in sorted(code.entries)] for code in codes],
    }, path)


def load_codes(path) -> list[Code]:
    obj = load_json(path)
    size = int(obj["size"])
    return [
        Code(entries={int(i): float(v) for i, v in entries}, size=size)
        for entries in obj["codes"]
    ]


def save_model(model: LinearModel, path) -> None:
    dump_json({
        "lambda": model.lam,
        "loss": model.loss,
        "classes": model.classes,
        "weights": model.weights,
    }, path)


def load_model(path) -> LinearModel:
    obj = load_json(path)
    return LinearModel(
        weights=np.asarray(obj["weights"], dtype=np.float64),
        lam=float(obj["lambda"]),
        loss=obj["loss"],
        classes=obj["classes"],
    )


def save_cover(cover: ManifoldCover, path) -> None:
    dump_json({
        "epsilon": cover.epsilon,
        "m": cover.m,
        "centers": cover.centers,
        "frames": cover.frames,
        "anchors": cover.anchors,
    }, path)


def load_cover(path) -> ManifoldCover:
    obj = load_json(path)
    return ManifoldCover(
        epsilon=float(obj["epsilon"]),
        m=int(obj["m"]),
        centers=np.asarray(obj["centers"], dtype=np.float64),
        frames=np.asarray(obj["frames"], dtype=np.float64),
    )


def save_locality_records_csv(report: LocalityReport, path) -> None:
    lines = ["sample_index,anchor_index,sign_class,distance"]
    for s, a, sign, dist in zip(report.sample_index, report.anchor_index,
                                report.sign_class, report.distance):
        lines.append(f"{s},{a},{_SIGN_NAMES[int(sign)]},{format_float(dist)}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_locality_histogram_csv(report: LocalityReport, path) -> None:
    lines = ["bin_lo,bin_hi,count_pos,count_neg,count_zero"]
    edges = report.bin_edges
    for i in range(len(edges) - 1):
        lines.append(
            f"{format_float(edges[i])},{format_float(edges[i + 1])},"
            f"{report.hist_positive[i]},{report.hist_negative[i]},{report.hist_zero[i]}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_predictions(predictions, path) -> None:
    values = np.asarray(predictions)
    if np.issubdtype(values.dtype, np.integer):
        payload = [int(v) for v in values]
    else:
        payload = [float(v) for v in values]
    dump_json({"predictions": payload}, path)


def load_predictions(path) -> np.ndarray:
    return np.asarray(load_json(path)["predictions"])
