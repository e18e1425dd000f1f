"""JSON ingestion and emission for channels, ensembles and combs.

Complex matrices are written row-major as lists of ``[re, im]`` pairs.

* channel: ``{"kind": "kraus"|"choi"|"named", "d_in", "d_out", "data", "name", "params"}``
* ensemble: ``{"weights": [...], "dims": [dE, dA], "states": [pairs, ...]}``
* comb: ``{"dims": [dAi, dAo, dBi, dBo], "choi": pairs}``
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import channels as ch
from .channels import QuantumChannel
from .comb import NsComb
from .discrimination import StateEnsemble

NAMED_CHANNELS = ("identity", "constant", "depolarizing", "dephasing", "random")


class SchemaError(ValueError):
    """Input that does not match a schema; ``field`` names the offending entry."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


def _get(obj: dict, key: str, where: str, default: Any = ...) -> Any:
    if key in obj:
        return obj[key]
    if default is ...:
        raise SchemaError(f"{where}{key}", "missing required field")
    return default


def _int(value: Any, field: str, lo: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise SchemaError(field, f"expected an integer, got {value!r}")
    if int(value) < lo:
        raise SchemaError(field, f"must be >= {lo}, got {value}")
    return int(value)


def _float(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(field, f"expected a finite number, got {value!r}")
    return float(value)


def decode_matrix(pairs: Any, rows: int, cols: int, field: str) -> np.ndarray:
    """Row-major ``[[re, im], ...]`` of length ``rows*cols`` to a complex array."""
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(field, "expected a list of [re, im] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SchemaError(field, f"expected a list of [re, im] pairs, got shape {arr.shape}")
    if arr.shape[0] != rows * cols:
        raise SchemaError(field, f"expected {rows * cols} entries for a {rows}x{cols} matrix, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(field, "entries must be finite")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(rows, cols)


def encode_matrix(m: np.ndarray) -> list[list[float]]:
    flat = np.asarray(m, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


# -- channels -----------------------------------------------------------------

def channel_from_dict(obj: dict) -> QuantumChannel:
    if not isinstance(obj, dict):
        raise SchemaError("channel", "expected a JSON object")
    kind = _get(obj, "kind", "")
    try:
        if kind == "named":
            return _named_channel(obj)
        if kind not in ("kraus", "choi"):
            raise SchemaError("kind", f"expected 'kraus', 'choi' or 'named', got {kind!r}")
        d_in = _int(_get(obj, "d_in", ""), "d_in")
        d_out = _int(_get(obj, "d_out", ""), "d_out")
        data = _get(obj, "data", "")
        if kind == "choi":
            n = d_in * d_out
            return ch.from_choi(decode_matrix(data, n, n, "data"), d_in, d_out)
        if not isinstance(data, list) or not data:
            raise SchemaError("data", "expected a non-empty list of Kraus operators")
        ops = [decode_matrix(k, d_out, d_in, f"data[{i}]") for i, k in enumerate(data)]
        return ch.from_kraus(ops)
    except ch.InvalidChannel as exc:
        raise SchemaError("data" if kind != "named" else "params", str(exc)) from None


def _named_channel(obj: dict) -> QuantumChannel:
    name = _get(obj, "name", "")
    if name not in NAMED_CHANNELS:
        raise SchemaError("name", f"expected one of {', '.join(NAMED_CHANNELS)}, got {name!r}")
    params = _get(obj, "params", "", {})
    if not isinstance(params, dict):
        raise SchemaError("params", "expected a JSON object")
    d = obj.get("d_in", params.get("d"))
    if name in ("identity", "depolarizing", "dephasing"):
        if d is None:
            raise SchemaError("params.d", "missing required field")
        d = _int(d, "params.d")
        if name == "identity":
            return ch.identity(d)
        p = _float(_get(params, "p", "params."), "params.p")
        if not 0 <= p <= 1:
            raise SchemaError("params.p", f"must lie in [0, 1], got {p}")
        return ch.depolarizing(p, d) if name == "depolarizing" else ch.dephasing(p, d)
    d_in = _int(obj.get("d_in", params.get("d_in", d)), "d_in")
    d_out = _int(obj.get("d_out", params.get("d_out", d_in)), "d_out")
    if name == "random":
        seed = _int(params.get("seed", 0), "params.seed", lo=0)
        return ch.from_random_isometry(d_in, d_out, seed=seed)
    if "sigma" in params:
        sigma = decode_matrix(params["sigma"], d_out, d_out, "params.sigma")
    else:
        sigma = np.eye(d_out) / d_out
    return ch.constant(sigma, d_in)


def channel_to_dict(n: QuantumChannel) -> dict:
    return {"kind": "choi", "d_in": n.d_in, "d_out": n.d_out, "data": encode_matrix(n.choi)}


# -- ensembles ----------------------------------------------------------------

def ensemble_from_dict(obj: dict) -> StateEnsemble:
    if not isinstance(obj, dict):
        raise SchemaError("ensemble", "expected a JSON object")
    weights = _get(obj, "weights", "")
    if not isinstance(weights, list) or not weights:
        raise SchemaError("weights", "expected a non-empty list of numbers")
    w = np.array([_float(x, f"weights[{i}]") for i, x in enumerate(weights)])
    dims = _get(obj, "dims", "", None)
    states = _get(obj, "states", "")
    if not isinstance(states, list) or len(states) != len(w):
        raise SchemaError("states", f"expected {len(w)} states, one per weight")
    if dims is None:
        side = math.isqrt(len(states[0])) if isinstance(states[0], list) else 0
        dims = [1, side]
    if not isinstance(dims, list) or len(dims) != 2:
        raise SchemaError("dims", "expected [dE, dA]")
    de, da = _int(dims[0], "dims[0]"), _int(dims[1], "dims[1]")
    side = de * da
    rhos = np.array([decode_matrix(s, side, side, f"states[{i}]") for i, s in enumerate(states)])
    try:
        return StateEnsemble(w, rhos, (de, da))
    except ValueError as exc:
        field = "weights" if "weights" in str(exc) else "states"
        raise SchemaError(field, str(exc)) from None


def ensemble_to_dict(a: StateEnsemble) -> dict:
    return {"weights": [float(x) for x in a.weights], "dims": list(a.dims),
            "states": [encode_matrix(s) for s in a.states]}


# -- combs --------------------------------------------------------------------

def comb_from_dict(obj: dict) -> NsComb:
    if not isinstance(obj, dict):
        raise SchemaError("comb", "expected a JSON object")
    dims = _get(obj, "dims", "")
    if not isinstance(dims, list) or len(dims) != 4:
        raise SchemaError("dims", "expected [dAi, dAo, dBi, dBo]")
    dims = tuple(_int(x, f"dims[{i}]") for i, x in enumerate(dims))
    side = int(np.prod(dims))
    choi = decode_matrix(_get(obj, "choi", ""), side, side, "choi")
    try:
        return NsComb(dims, choi)
    except ValueError as exc:
        raise SchemaError("choi", str(exc)) from None


def comb_to_dict(c: NsComb) -> dict:
    return {"dims": list(c.dims), "choi": encode_matrix(c.choi)}


# -- files --------------------------------------------------------------------

def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from None


def load_channel(path: str | Path) -> QuantumChannel:
    return channel_from_dict(read_json(path))


def load_ensemble(path: str | Path) -> StateEnsemble:
    return ensemble_from_dict(read_json(path))


def load_comb(path: str | Path) -> NsComb:
    return comb_from_dict(read_json(path))


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")
