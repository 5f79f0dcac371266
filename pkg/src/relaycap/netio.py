"""Network files and report schemas.

Networks are stored as JSON objects with fields ``model``, ``n``, ``s``,
``d`` and either ``gains`` (Gaussian: floats, or ``[re, im]`` pairs when
complex; ADT: nonnegative ints, plus ``prime``) or ``eps`` (erasure
probabilities). Unknown fields are rejected. Floats are written with
``repr`` precision so that save/load round-trips are bit-exact.
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DomainError
from .netmodel import ADTNetwork, ErasureNetwork, GaussianNetwork

SCHEMAS = ("network", "capacity_report", "powopt_result")


class NetworkFormatError(DomainError):
    """Malformed or schema-invalid network file; ``line``/``column`` when known."""

    def __init__(self, message, line=None, column=None, source=None):
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:{column}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.column = column


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise KeyError(name)
    text = resources.files("relaycap").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``doc`` matches schema ``name``."""
    jsonschema.validate(doc, schema(name))


def network_to_dict(net) -> dict:
    out = {"model": net.model, "n": int(net.n), "s": int(net.s), "d": int(net.d)}
    if isinstance(net, GaussianNetwork):
        if net.is_complex:
            out["gains"] = [[[float(z.real), float(z.imag)] for z in row] for row in net.H]
        else:
            out["gains"] = net.H.tolist()
    elif isinstance(net, ADTNetwork):
        out["gains"] = net.gains.tolist()
        out["prime"] = int(net.prime)
    elif isinstance(net, ErasureNetwork):
        out["eps"] = net.eps.tolist()
    else:
        raise DomainError(f"cannot serialize {type(net).__name__}")
    return out


def _matrix(rows, n, field):
    if len(rows) != n or any(len(r) != n for r in rows):
        raise NetworkFormatError(f"'{field}' must be an {n} x {n} matrix")


def network_from_dict(doc, source=None):
    try:
        validate(doc, "network")
    except jsonschema.ValidationError as exc:
        path = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise NetworkFormatError(f"schema violation at {path}: {exc.message}", source=source) from None
    n, s, d = doc["n"], doc["s"], doc["d"]
    model = doc["model"]
    try:
        if model == "erasure":
            _matrix(doc["eps"], n, "eps")
            return ErasureNetwork(np.array(doc["eps"], dtype=float), s, d)
        _matrix(doc["gains"], n, "gains")
        if model == "adt":
            return ADTNetwork(np.array(doc["gains"], dtype=np.int64), doc["prime"], s, d)
        rows = doc["gains"]
        if any(isinstance(v, list) for r in rows for v in r):
            H = np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in r] for r in rows])
            return GaussianNetwork(H, s, d)
        return GaussianNetwork(np.array(rows, dtype=float), s, d)
    except NetworkFormatError:
        raise
    except DomainError as exc:
        raise NetworkFormatError(str(exc), source=source) from None


def loads_network(text: str, source=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(exc.msg, exc.lineno, exc.colno, source) from None
    return network_from_dict(doc, source)


def load_network(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkFormatError(f"cannot read network file: {exc.strerror}", source=str(path)) from None
    return loads_network(text, str(path))


def dumps_network(net) -> str:
    return json.dumps(network_to_dict(net))


def save_network(net, path) -> None:
    Path(path).write_text(dumps_network(net) + "\n")


def networks_equal(a, b) -> bool:
    """Exact structural equality (same model, endpoints, and bitwise-equal matrices)."""
    if a.model != b.model or (a.n, a.s, a.d) != (b.n, b.s, b.d):
        return False
    if a.model == "gaussian":
        return a.H.dtype == b.H.dtype and np.array_equal(a.H, b.H)
    if a.model == "adt":
        return a.prime == b.prime and np.array_equal(a.gains, b.gains)
    return np.array_equal(a.eps, b.eps)
