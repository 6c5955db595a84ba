"""JSON model and observable definitions.

Model file::

    {"lattice": {"type": "chain", "n": 12},
     "model": {"type": "ising_ferro", "beta": 0.3}}

``lattice.type`` is one of chain / cycle (``n``), grid2d (``dims`` = [rows, cols]),
explicit (``edges`` and optionally ``n``), infinite_chain, infinite_grid2d.
``model.type`` is ising_ferro, ising_antiferro or table; a table model needs
``tables``, either one flat 4-list [h(-,-), h(-,+), h(+,-), h(+,+)] shared by
all edges or one such list per edge in lattice edge order.

Observable file: ``{"type": "spin_product", "sites": [...]}`` or
``{"type": "table", "support": [...], "values": [...]}``. Sites of an infinite
grid are written as ``[row, col]``.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import spin_model as sm
from .errors import InputError
from .observable import Observable, spin_product

_LATTICE_KEYS = {
    "chain": {"n"}, "cycle": {"n"}, "grid2d": {"dims"}, "explicit": {"edges", "n"},
    "infinite_chain": set(), "infinite_grid2d": set(),
}
_MODEL_TYPES = ("ising_ferro", "ising_antiferro", "table")


def parse_json(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_json(text, str(path))


def _object(value, what: str, allowed: set, required: set = frozenset()) -> dict:
    if not isinstance(value, dict):
        raise InputError(f"{what} must be a JSON object")
    unknown = set(value) - allowed
    if unknown:
        raise InputError(f"unknown key(s) in {what}: {sorted(unknown)}")
    missing = set(required) - set(value)
    if missing:
        raise InputError(f"missing key(s) in {what}: {sorted(missing)}")
    return value


def _int(value, what: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InputError(f"{what} must be an integer >= {minimum}, got {value!r}")
    return value


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{what} must be a number, got {value!r}")
    return float(value)


def _tables(model: dict, n_edges: int | None):
    kind = model["type"]
    if kind == "ising_ferro":
        if "tables" in model:
            raise InputError("ising_ferro takes no tables")
        return sm.FERRO
    if kind == "ising_antiferro":
        if "tables" in model:
            raise InputError("ising_antiferro takes no tables")
        return sm.ANTIFERRO
    if "tables" not in model:
        raise InputError("a table model needs 'tables'")
    raw = model["tables"]
    if not isinstance(raw, list) or not raw:
        raise InputError("'tables' must be a 4-list or a list of 4-lists")
    if all(not isinstance(v, list) for v in raw):
        entries = [raw]
    else:
        entries = raw
        if n_edges is None:
            raise InputError("an infinite lattice takes a single shared table")
        if len(entries) != n_edges:
            raise InputError(f"'tables' lists {len(entries)} tables for {n_edges} edges")
    out = []
    for k, t in enumerate(entries):
        if not isinstance(t, list) or len(t) != 4:
            raise InputError(f"table {k} must have exactly 4 entries")
        vals = [_number(v, f"table {k} entry") for v in t]
        try:
            out.append(sm.as_table(vals))
        except ValueError as exc:
            raise InputError(f"table {k}: {exc}") from None
    return out[0] if len(out) == 1 else out


def model_from_dict(data) -> sm.SpinSystem:
    top = _object(data, "model file", {"lattice", "model"}, {"lattice", "model"})
    lat = top["lattice"]
    if not isinstance(lat, dict) or lat.get("type") not in _LATTICE_KEYS:
        raise InputError(f"lattice.type must be one of {sorted(_LATTICE_KEYS)}")
    kind = lat["type"]
    required = {"type"} | ({"edges"} if kind == "explicit" else _LATTICE_KEYS[kind])
    _object(lat, "lattice", {"type"} | _LATTICE_KEYS[kind], required)
    model = top["model"]
    if not isinstance(model, dict) or model.get("type") not in _MODEL_TYPES:
        raise InputError(f"model.type must be one of {list(_MODEL_TYPES)}")
    _object(model, "model", {"type", "beta", "tables"}, {"type", "beta"})
    beta = _number(model["beta"], "model.beta")
    try:
        if kind in ("chain", "cycle"):
            n = _int(lat["n"], "lattice.n", 1 if kind == "chain" else 3)
            build = sm.chain if kind == "chain" else sm.cycle
            return build(n, beta, _tables(model, n - 1 if kind == "chain" else n))
        if kind == "grid2d":
            dims = lat["dims"]
            if not isinstance(dims, list) or len(dims) != 2:
                raise InputError("lattice.dims must be [rows, cols]")
            rows, cols = (_int(d, "lattice.dims entry", 1) for d in dims)
            n_edges = rows * (cols - 1) + cols * (rows - 1)
            return sm.grid2d(rows, cols, beta, _tables(model, n_edges))
        if kind == "explicit":
            edges = lat["edges"]
            if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
                raise InputError("lattice.edges must be a list of [i, j] pairs")
            edges = [(_int(i, "edge endpoint"), _int(j, "edge endpoint")) for i, j in edges]
            n = lat.get("n")
            n = _int(n, "lattice.n", 1) if n is not None else 1 + max((max(e) for e in edges), default=-1)
            return sm.from_edges(n, edges, beta, _tables(model, len(edges)))
        table = _tables(model, None)
        build = sm.infinite_chain if kind == "infinite_chain" else sm.infinite_grid2d
        return build(beta, table)
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _site(value, sys: sm.SpinSystem | None):
    if isinstance(value, list):
        if len(value) != 2:
            raise InputError(f"grid sites are [row, col], got {value!r}")
        return tuple(_int(v, "site coordinate", -(1 << 62)) for v in value)
    site = _int(value, "site", -(1 << 62))
    if sys is not None and sys.lattice == "infinite_grid2d":
        raise InputError("sites of an infinite grid are written as [row, col]")
    return site


def observable_from_dict(data, sys: sm.SpinSystem | None = None) -> Observable:
    if not isinstance(data, dict) or data.get("type") not in ("spin_product", "table"):
        raise InputError("observable type must be 'spin_product' or 'table'")
    if data["type"] == "spin_product":
        _object(data, "observable", {"type", "sites", "label"}, {"type", "sites"})
        if not isinstance(data["sites"], list):
            raise InputError("observable sites must be a list")
        sites = [_site(s, sys) for s in data["sites"]]
        if len(set(sites)) != len(sites):
            raise InputError("duplicate site in observable")
        f = spin_product(sites)
    else:
        _object(data, "observable", {"type", "support", "values", "label"}, {"type", "support", "values"})
        if not isinstance(data["support"], list) or not isinstance(data["values"], list):
            raise InputError("observable support and values must be lists")
        support = [_site(s, sys) for s in data["support"]]
        values = [_number(v, "observable value") for v in data["values"]]
        f = Observable(tuple(support), values, data.get("label", "f"))
    if sys is not None:
        missing = [s for s in f.support if not sys.has_site(s)]
        if missing:
            raise InputError(f"observable sites {missing} are not in the system")
    if "label" in data:
        f = Observable(f.support, f.values, str(data["label"]))
    return f


def load_model(path) -> sm.SpinSystem:
    return model_from_dict(read_json(path))


def load_observable(path, sys: sm.SpinSystem | None = None) -> Observable:
    return observable_from_dict(read_json(path), sys)


def model_to_dict(sys: sm.SpinSystem) -> dict:
    """Inverse of :func:`model_from_dict` (always writes explicit per-edge tables)."""
    if not sys.is_finite:
        return {"lattice": {"type": sys.lattice},
                "model": {"type": "table", "beta": sys.beta,
                          "tables": [float(v) for v in sys.bulk_table.reshape(-1)]}}
    if sys.lattice in ("chain", "cycle"):
        lat = {"type": sys.lattice, "n": sys.n}
    elif sys.lattice == "grid2d":
        lat = {"type": "grid2d", "dims": list(sys.dims)}
    else:
        lat = {"type": "explicit", "n": sys.n, "edges": [list(e) for e in sys.edges]}
    tables = [[float(v) for v in t.reshape(-1)] for t in sys.tables]
    return {"lattice": lat, "model": {"type": "table", "beta": sys.beta, "tables": tables}}
