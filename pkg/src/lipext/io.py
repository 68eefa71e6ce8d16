"""
JSON problem and result files.

A problem file looks like::

    {
      "space": {"kind": "mn-sa", "n": 2},
      "metric": {"labels": ["a", "b", "c"], "dist": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]},
      "subset": ["a", "c"],
      "values": {"a": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]], "c": ...}
    }

Element data: real kinds take a list of k reals (a bare number is accepted
when k = 1); complex scalars are [re, im]; seq-sup-complex is a list of
[re, im]; matrices are row lists of [re, im] pairs. Floats are written with
17 significant digits so every value survives a round trip.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import LipextError, MalformedElementError, MetricError
from .extension import ExtensionResult, finish
from .oracle import OracleResult
from .spaces import KINDS, FiniteMetricSpace, PartialFunction, SpaceDescriptor, coerce


class ProblemFileError(LipextError):
    """A problem or result file that does not parse; the message names the field."""


KIND_ALIASES = {
    "sup": "real-sup",
    "seq-sup": "real-sup",
    "euclid": "real-euclid",
    "complex-plane": "complex",
    "matrix": "mn",
    "matrix-sa": "mn-sa",
}


def canonical_kind(name: str) -> str:
    kind = KIND_ALIASES.get(name, name)
    if kind not in KINDS:
        raise ProblemFileError(f"unknown space kind {name!r}; expected one of {', '.join(KINDS)}")
    return kind


# --- serialization -----------------------------------------------------------


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    s = format(x, ".17g")
    return s if "." in s or "e" in s else s + ".0"


def _encode(obj, indent: int, level: int) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        # arrays of numbers stay on one line
        return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        pad = "\n" + " " * (indent * (level + 1))
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + ",".join(items) + "\n" + " " * (indent * level) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def descriptor_to_json(desc: SpaceDescriptor) -> dict:
    if desc.kind == "complex":
        return {"kind": "complex"}
    key = "n" if desc.is_matrix else "k"
    return {"kind": desc.kind, key: desc.size}


def element_to_json(desc: SpaceDescriptor, data: np.ndarray):
    if desc.is_real:
        return [float(x) for x in np.asarray(data).ravel()]
    arr = np.asarray(data, dtype=np.complex128)
    pairs = np.stack([arr.real, arr.imag], axis=-1)
    if desc.kind == "complex":
        return pairs[0].tolist()
    return pairs.tolist()


def problem_to_json(f: PartialFunction) -> dict:
    labels = list(f.space.labels)
    return {
        "space": descriptor_to_json(f.target),
        "metric": {"labels": labels, "dist": f.space.dist.tolist()},
        "subset": [labels[i] for i in f.subset],
        "values": {str(labels[i]): element_to_json(f.target, v) for i, v in zip(f.subset, f.values)},
    }


def result_to_json(f: PartialFunction, res: ExtensionResult) -> dict:
    labels = list(res.space.labels)
    return {
        "format": "lipext-extension",
        "problem": problem_to_json(f),
        "method": res.method,
        "guarantee": res.guarantee,
        "assignment": {str(lbl): element_to_json(res.target, v) for lbl, v in zip(labels, res.assignment)},
        "achieved_L": res.achieved_L,
        "achieved_sup": res.achieved_sup,
        "lipschitz_f": res.lipschitz_f,
        "ratio": res.ratio,
        "restriction_error": res.restriction_error,
        "metadata": res.metadata,
    }


def oracle_to_json(f: PartialFunction, res: OracleResult) -> dict:
    labels = list(f.space.labels)
    return {
        "format": "lipext-oracle",
        "problem": problem_to_json(f),
        "optimal_L": res.optimal_L,
        "ratio": res.ratio,
        "lo": res.lo,
        "hi": res.hi,
        "lipschitz_f": res.lipschitz_f,
        "tol_bisect": res.tol_bisect,
        "iterations": res.iterations,
        "sweeps": res.sweeps,
        "seed": res.seed,
        "assignment": {str(lbl): element_to_json(f.target, v) for lbl, v in zip(labels, res.assignment)},
    }


# --- parsing -----------------------------------------------------------------


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ProblemFileError(f"{where}: expected an object")
    if key not in obj:
        raise ProblemFileError(f"{where}: missing field {key!r}")
    return obj[key]


def _positive_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ProblemFileError(f"{where}: expected a positive integer, got {v!r}")
    return v


def descriptor_from_json(obj) -> SpaceDescriptor:
    kind = canonical_kind(_field(obj, "kind", "space"))
    if kind == "complex":
        return SpaceDescriptor.complex_plane()
    key = "n" if kind in ("mn", "mn-sa") else "k"
    other = "k" if key == "n" else "n"
    if key not in obj and other in obj:
        key = other
    size = _positive_int(_field(obj, key, "space"), f"space.{key}")
    return SpaceDescriptor(kind, size)


def _pairs(raw, shape: tuple, where: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProblemFileError(f"{where}: expected numbers, got {json.dumps(raw)[:60]}") from None
    if arr.shape != shape + (2,):
        expect = "x".join(map(str, shape)) + (" array of " if shape else "") + "[re, im] pair" + ("s" if shape else "")
        raise ProblemFileError(f"{where}: expected {expect}, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def element_from_json(desc: SpaceDescriptor, raw, where: str) -> np.ndarray:
    if desc.is_real:
        if isinstance(raw, (int, float)) and not isinstance(raw, bool) and desc.size == 1:
            raw = [raw]
        try:
            arr = np.asarray(raw, dtype=np.float64)
        except (TypeError, ValueError):
            raise ProblemFileError(f"{where}: expected a list of {desc.size} reals") from None
        if arr.shape != desc.shape:
            raise ProblemFileError(f"{where}: expected a list of {desc.size} reals, got shape {arr.shape}")
    elif desc.kind == "complex":
        arr = _pairs(raw, (), where).reshape(1)
    else:
        arr = _pairs(raw, desc.shape, where)
    try:
        return coerce(desc, arr, lead=0)
    except MalformedElementError as exc:
        raise ProblemFileError(f"{where}: {exc}") from None


def problem_from_json(obj) -> PartialFunction:
    if not isinstance(obj, dict):
        raise ProblemFileError("top level: expected an object")
    desc = descriptor_from_json(_field(obj, "space", "problem"))
    metric = _field(obj, "metric", "problem")
    labels = _field(metric, "labels", "metric")
    if not isinstance(labels, list) or not labels:
        raise ProblemFileError("metric.labels: expected a nonempty list")
    dist = _field(metric, "dist", "metric")
    try:
        d = np.asarray(dist, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProblemFileError("metric.dist: expected a square matrix of numbers") from None
    if d.shape != (len(labels), len(labels)):
        raise ProblemFileError(f"metric.dist: shape {d.shape} does not match {len(labels)} labels")
    try:
        space = FiniteMetricSpace(tuple(labels), d)
    except MetricError as exc:
        raise ProblemFileError(f"metric: {exc}") from None
    by_name = {str(lbl): lbl for lbl in labels}
    subset = _field(obj, "subset", "problem")
    values = _field(obj, "values", "problem")
    if not isinstance(subset, list) or not subset:
        raise ProblemFileError("subset: expected a nonempty list of labels")
    if not isinstance(values, dict):
        raise ProblemFileError("values: expected an object mapping labels to elements")
    idx, data = [], []
    for pos, lbl in enumerate(subset):
        key = str(lbl)
        if key not in by_name:
            raise ProblemFileError(f"subset[{pos}]: unknown label {lbl!r}")
        if key in map(str, subset[:pos]):
            raise ProblemFileError(f"subset[{pos}]: duplicate label {lbl!r}")
        if key not in values:
            raise ProblemFileError(f"values: no value for subset label {lbl!r}")
        idx.append(space.index(by_name[key]))
        data.append(element_from_json(desc, values[key], f"values[{key!r}]"))
    extra = set(values) - {str(s) for s in subset}
    if extra:
        raise ProblemFileError(f"values: labels {sorted(extra)} are not in subset")
    try:
        return PartialFunction(space, tuple(idx), np.stack(data), desc)
    except LipextError as exc:
        raise ProblemFileError(f"subset: {exc}") from None


def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_problem(path) -> PartialFunction:
    return problem_from_json(load_json(path))


def result_from_json(obj) -> tuple[PartialFunction, ExtensionResult]:
    """Rebuild an extension result; every number is recomputed from the assignment."""
    f = problem_from_json(_field(obj, "problem", "result"))
    raw = _field(obj, "assignment", "result")
    labels = [str(lbl) for lbl in f.space.labels]
    missing = [lbl for lbl in labels if lbl not in raw]
    if missing:
        raise ProblemFileError(f"assignment: no value for {missing[0]!r}")
    g = np.stack([element_from_json(f.target, raw[lbl], f"assignment[{lbl!r}]") for lbl in labels])
    res = finish(f, g, obj.get("method", "unknown"), obj.get("guarantee", ""), **obj.get("metadata", {}))
    return f, res


def load_result(path) -> tuple[PartialFunction, ExtensionResult]:
    return result_from_json(load_json(path))
