"""JSON instance files: parsing with field-anchored error messages.

Schema (version 1):

    {
      "schema_version": 1,
      "k": 2,
      "K_X": [[...], ...],            # optional, row-major k x k
      "K_X_given_Y1": [[...], ...],   # required, row-major k x k
      "K_X_given_Y2": [[...], ...],   # required, row-major k x k
      "distortion": {
        "type": "mse",              "D1": [..k entries..], "D2": [...]
        | "type": "scaled_identity", "d1": 0.15, "d2": 0.15
        | "type": "trace",           "d1": 0.15, "d2": 0.15
      }
    }

MSE targets may be given either as diagonal-entry vectors or as full square
matrices whose off-diagonal entries are zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import HbrdError
from .model import DistortionSpec, MseDiag, ProblemInstance, ScaledIdentity, Trace


class InstanceFileError(HbrdError):
    """Parse/schema failure, anchored to the offending field."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class InstanceFile:
    schema_version: int
    instance: ProblemInstance
    spec: DistortionSpec


def _as_matrix(raw, k: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != k:
        raise InstanceFileError(where, f"expected {k} rows")
    out = np.empty((k, k))
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != k:
            raise InstanceFileError(f"{where} row {i}", f"expected {k} numbers")
        for j, x in enumerate(row):
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                raise InstanceFileError(f"{where} row {i}", f"entry {j} is not a number")
            out[i, j] = float(x)
    return out


def _as_diag_vector(raw, k: int, where: str) -> np.ndarray:
    if isinstance(raw, list) and raw and isinstance(raw[0], list):
        m = _as_matrix(raw, k, where)
        off = m - np.diag(np.diag(m))
        if np.any(off != 0.0):
            raise InstanceFileError(where, "matrix form must be exactly diagonal")
        return np.diag(m).copy()
    if not isinstance(raw, list) or len(raw) != k:
        raise InstanceFileError(where, f"expected {k} diagonal entries")
    for j, x in enumerate(raw):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise InstanceFileError(where, f"entry {j} is not a number")
    return np.asarray(raw, dtype=float)


def _as_scalar(obj: dict, key: str, where: str) -> float:
    if key not in obj:
        raise InstanceFileError(where, f"missing field '{key}'")
    x = obj[key]
    if not isinstance(x, (int, float)) or isinstance(x, bool):
        raise InstanceFileError(f"{where}.{key}", "not a number")
    return float(x)


def parse_instance(text: str) -> InstanceFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFileError(f"line {exc.lineno}", exc.msg) from exc
    if not isinstance(doc, dict):
        raise InstanceFileError("document", "top level must be an object")

    version = doc.get("schema_version", 1)
    if version != 1:
        raise InstanceFileError("schema_version", f"unsupported version {version!r}")
    if "k" not in doc or not isinstance(doc["k"], int) or doc["k"] < 1:
        raise InstanceFileError("k", "required positive integer")
    k = doc["k"]

    for key in ("K_X_given_Y1", "K_X_given_Y2", "distortion"):
        if key not in doc:
            raise InstanceFileError(key, "required field is missing")
    k1 = _as_matrix(doc["K_X_given_Y1"], k, "K_X_given_Y1")
    k2 = _as_matrix(doc["K_X_given_Y2"], k, "K_X_given_Y2")
    kx = _as_matrix(doc["K_X"], k, "K_X") if "K_X" in doc else None

    dist = doc["distortion"]
    if not isinstance(dist, dict) or "type" not in dist:
        raise InstanceFileError("distortion", "expected an object with a 'type' field")
    dtype = dist["type"]
    if dtype == "mse":
        for key in ("D1", "D2"):
            if key not in dist:
                raise InstanceFileError("distortion", f"missing field '{key}'")
        spec: DistortionSpec = MseDiag(
            d1=_as_diag_vector(dist["D1"], k, "distortion.D1"),
            d2=_as_diag_vector(dist["D2"], k, "distortion.D2"),
        )
    elif dtype == "scaled_identity":
        spec = ScaledIdentity(
            d1=_as_scalar(dist, "d1", "distortion"), d2=_as_scalar(dist, "d2", "distortion")
        )
    elif dtype == "trace":
        spec = Trace(
            d1=_as_scalar(dist, "d1", "distortion"), d2=_as_scalar(dist, "d2", "distortion")
        )
    else:
        raise InstanceFileError(
            "distortion.type", f"unknown type {dtype!r} (mse, scaled_identity, trace)"
        )
    instance = ProblemInstance(k_x_given_y1=k1, k_x_given_y2=k2, k_x=kx)
    return InstanceFile(schema_version=version, instance=instance, spec=spec)


def load_instance(path: str) -> InstanceFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read())
