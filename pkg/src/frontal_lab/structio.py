"""File formats: structure files, frontal files, OBJ/CSV exports, reports.

Structure file (JSON, schema_version 1):

    {
      "schema_version": 1,
      "domain": [a1, b1, a2, b2],
      "basepoint": [q1, q2],
      "W0": [[..], [..], [..]],          # columns are the frame vectors
      "p": [x, y, z],
      "entries": {
        "Lambda":  {"expr": ["1", "0", "0", "2*u2"]},
        "I_Omega": {"grid": {"nx": 21, "ny": 21, "values": [[...], x4]}},
        ... h, D1, D2, S, phi ...
      }
    }

Matrix entries carry 4 expression strings (row-major) or 4 flattened
grids (row-major over u1-major sample points); phi carries 1.  Frontal
files describe a parametrization directly: {name, domain, x: [3 exprs],
omega: [[3 exprs], [3 exprs]], lambda: [4 exprs] optional, open_domain}.

Reports are JSON with sorted keys and no wall-clock content, so byte
identity of reruns is part of the contract.
"""

from __future__ import annotations

import json

import numpy as np

from .config import DEFAULT, Config
from .errors import InputError
from .frame import Frontal, frontal_from_expressions
from .reconstruct import ExprField, GridField, StructureData

SCHEMA_VERSION = 1

_MATRIX_ENTRIES = ("Lambda", "I_Omega", "h", "D1", "D2", "S")
_FIELD_BY_ENTRY = {
    "Lambda": "lam", "I_Omega": "i_omega", "h": "h",
    "D1": "d1", "D2": "d2", "S": "s_op", "phi": "phi",
}


def read_structure_file(path, config: Config = DEFAULT) -> StructureData:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported structure schema "
                         f"{doc.get('schema_version')!r}")
    try:
        domain = tuple(float(v) for v in doc["domain"])
        basepoint = tuple(float(v) for v in doc["basepoint"])
        W0 = np.asarray(doc["W0"], dtype=float)
        p = np.asarray(doc["p"], dtype=float)
        entries = doc["entries"]
    except KeyError as missing:
        raise InputError(f"structure file missing {missing}")
    if W0.shape != (3, 3) or p.shape != (3,):
        raise InputError("W0 must be 3x3 and p a 3-vector")

    fields = {}
    for name in (*_MATRIX_ENTRIES, "phi"):
        if name not in entries:
            raise InputError(f"structure file missing entry {name!r}")
        spec = entries[name]
        want = 4 if name in _MATRIX_ENTRIES else 1
        if "expr" in spec:
            sources = spec["expr"]
            if len(sources) != want:
                raise InputError(f"{name}: expected {want} expressions")
            fields[_FIELD_BY_ENTRY[name]] = ExprField(
                sources if want == 4 else sources[0])
        elif "grid" in spec:
            g = spec["grid"]
            nx, ny = int(g["nx"]), int(g["ny"])
            values = np.asarray(g["values"], dtype=float)
            if want == 4:
                values = values.reshape(4, nx, ny)
            else:
                values = values.reshape(nx, ny)
            fields[_FIELD_BY_ENTRY[name]] = GridField(domain, values)
        else:
            raise InputError(f"{name}: entry needs 'expr' or 'grid'")
    return StructureData(domain=domain, basepoint=basepoint, W0=W0, p=p,
                         meta={"path": str(path)}, **fields)


def structure_to_grids(sd: StructureData, shape=(33, 33)):
    """Sample every entry of a StructureData to plain grids."""
    a1, b1, a2, b2 = sd.domain
    u1, u2 = np.meshgrid(np.linspace(a1, b1, shape[0]),
                         np.linspace(a2, b2, shape[1]), indexing="ij")
    flat1, flat2 = u1.ravel(), u2.ravel()
    out = {}
    for name in _MATRIX_ENTRIES:
        fld = getattr(sd, _FIELD_BY_ENTRY[name])
        m = fld.jet(flat1, flat2, 0)
        comps = [np.broadcast_to(np.asarray(m[i][j].value, dtype=float),
                                 flat1.shape).reshape(shape)
                 for i in range(2) for j in range(2)]
        out[name] = np.stack(comps)
    phi = sd.phi.jet(flat1, flat2, 0)
    out["phi"] = np.broadcast_to(np.asarray(phi.value, dtype=float),
                                 flat1.shape).reshape(shape)
    return out


def write_structure_file(path, sd: StructureData, shape=(33, 33),
                         expressions=None):
    """Serialize a StructureData; callable-backed entries are sampled.

    expressions: optional dict name -> list of sources to store exact
    text instead of grids for selected entries.
    """
    expressions = expressions or {}
    entries = {}
    sampled = None
    for name in (*_MATRIX_ENTRIES, "phi"):
        fld = getattr(sd, _FIELD_BY_ENTRY[name])
        if name in expressions:
            entries[name] = {"expr": list(expressions[name])}
        elif isinstance(fld, ExprField):
            entries[name] = {"expr": list(fld.sources)}
        else:
            if sampled is None:
                sampled = structure_to_grids(sd, shape)
            values = sampled[name]
            entries[name] = {"grid": {
                "nx": int(shape[0]), "ny": int(shape[1]),
                "values": (values.reshape(4, -1).tolist()
                           if name != "phi" else values.ravel().tolist()),
            }}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "domain": [float(v) for v in sd.domain],
        "basepoint": [float(v) for v in sd.basepoint],
        "W0": np.asarray(sd.W0, dtype=float).tolist(),
        "p": np.asarray(sd.p, dtype=float).tolist(),
        "entries": entries,
    }
    write_report(path, doc)


def read_frontal_file(path, config: Config = DEFAULT) -> Frontal:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        name = doc.get("name", "user-frontal")
        domain = tuple(float(v) for v in doc["domain"])
        x_srcs = doc["x"]
        omega_srcs = doc["omega"]
    except KeyError as missing:
        raise InputError(f"frontal file missing {missing}")
    if len(x_srcs) != 3 or len(omega_srcs) != 2:
        raise InputError("frontal file needs 3 x-components and 2 basis "
                         "columns")
    return frontal_from_expressions(
        name, x_srcs, (omega_srcs[0], omega_srcs[1]), domain,
        lam_srcs=doc.get("lambda"), gauss_src=doc.get("K"),
        blaschke_srcs=doc.get("xi"), source="user", config=config,
        open_domain=bool(doc.get("open_domain", False)))


# --- exports -----------------------------------------------------------------------


def export_obj(path, x_grid):
    """Wavefront OBJ: vertices in row-major grid order, quad faces."""
    x = np.asarray(x_grid, dtype=float)
    n1, n2 = x.shape[:2]
    lines = []
    for i in range(n1):
        for j in range(n2):
            lines.append("v " + " ".join(repr(float(c)) for c in x[i, j]))
    for i in range(n1 - 1):
        for j in range(n2 - 1):
            a = i * n2 + j + 1
            b = (i + 1) * n2 + j + 1
            lines.append(f"f {a} {b} {b + 1} {a + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def export_field_csv(path, u1, u2, x_grid, xi_grid):
    """CSV columns u1,u2,x,y,z,xi1,xi2,xi3 in row-major grid order."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    x = np.asarray(x_grid, dtype=float).reshape(u1.size, 3)
    xi = np.asarray(xi_grid, dtype=float).reshape(u1.size, 3)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("u1,u2,x,y,z,xi1,xi2,xi3\n")
        for k in range(u1.size):
            row = [u1.ravel()[k], u2.ravel()[k], *x[k], *xi[k]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def export_frame_csv(path, u1, u2, data):
    """Frame-data table; data maps column name -> grid of values."""
    cols = sorted(data)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("u1,u2," + ",".join(cols) + "\n")
        flat = {c: np.asarray(data[c], dtype=float).ravel() for c in cols}
        for k in range(np.asarray(u1).size):
            row = [np.asarray(u1).ravel()[k], np.asarray(u2).ravel()[k]]
            row += [flat[c][k] for c in cols]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_report(path, payload):
    """Deterministic JSON: sorted keys, no timestamps, trailing newline."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def report_json(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
