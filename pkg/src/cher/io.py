"""File formats: JSON for structured data, CSV for grids and time series.

Every file carries ``format_version`` and ``config_hash``.  Floats are written
with 17 significant digits so a save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .dephasing import ChiSeries, DephasingFactors
from .lie import GENERATOR_ORDER
from .oracle import ModeConfig
from .retrieval import Axis, Delta, QuasiDistribution

FORMAT_VERSION = 1
OUTPUT_DIR_ENV = "CHER_OUTPUT_DIR"


class SchemaError(ValueError):
    pass


class UpgradeNeeded(SchemaError):
    pass


# -- plumbing ---------------------------------------------------------------------------

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "cher-out"))


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "as_dict"):
        return obj.as_dict()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, default=_jsonable, allow_nan=False) + "\n"


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate(doc, schema: dict, kind: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"{kind}: document root must be an object")
    version = doc.get("format_version")
    if version is None:
        raise SchemaError(f"{kind}: missing field /format_version")
    if version != FORMAT_VERSION:
        raise UpgradeNeeded(
            f"{kind}: format_version {version!r} is not supported (expected {FORMAT_VERSION}); "
            "upgrade the file or the tool"
        )
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    e = errors[0]
    where = _pointer(list(e.absolute_path))
    if e.validator == "required":
        missing = [r for r in e.validator_value if r not in e.instance]
        field = where.rstrip("/") + "/" + missing[0]
        raise SchemaError(f"{kind}: missing field {field}")
    if e.validator == "additionalProperties":
        extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
        field = where.rstrip("/") + "/" + extra[0]
        raise SchemaError(f"{kind}: unknown field {field}")
    raise SchemaError(f"{kind}: invalid value at {where}: {e.message}")


_NUM = {"type": "number"}
_CPLX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_HEADER = {"format_version": {"type": "integer"}, "config_hash": {"type": "string"}}

CHI_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "n", "generator_order", "times", "chi"],
    "properties": {
        **_HEADER,
        "n": {"type": "integer", "minimum": 2},
        "generator_order": {"const": GENERATOR_ORDER},
        "times": {"type": "array", "items": _NUM, "minItems": 1},
        "chi": {"type": "array", "items": {"type": "array", "items": _CPLX}},
        "metadata": {"type": "object"},
    },
}

FACTORS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "kind", "n", "times", "factors"],
    "properties": {
        **_HEADER,
        "kind": {"const": "dephasing-factors"},
        "n": {"type": "integer", "minimum": 2},
        "times": {"type": "array", "items": _NUM, "minItems": 1},
        "factors": {
            "type": "object",
            "patternProperties": {"^[0-9]+$": {"type": "array", "items": _CPLX}},
            "additionalProperties": False,
        },
        "metadata": {"type": "object"},
    },
}

QD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "kind", "coordinates", "axes", "deltas", "density"],
    "properties": {
        **_HEADER,
        "kind": {"const": "quasi-distribution"},
        "coordinates": {"enum": ["lambda", "simple-root", "omega"]},
        "axes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "min", "step", "n"],
                "properties": {"label": {"type": "string"}, "min": _NUM, "step": _NUM,
                               "n": {"type": "integer", "minimum": 1}},
            },
        },
        "deltas": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "location"],
                "properties": {"label": {"type": "string"}, "location": _NUM, "mass": _NUM},
            },
        },
        "basis": {"type": ["array", "null"], "items": {"type": "array", "items": _NUM}},
        "density": {"type": "array", "items": _NUM},
        "normalization": _NUM,
    },
}

MODES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "kind", "modes"],
    "properties": {
        **_HEADER,
        "kind": {"const": "mode-config"},
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["omega", "g1"],
                "properties": {"omega": _NUM, "g1": _CPLX, "g2": _CPLX},
            },
        },
        "fock_cutoff": {"type": "integer"},
        "temperature": _NUM,
        "method": {"enum": ["analytic-displacement", "truncated-fock"]},
        "n_qubits": {"enum": [1, 2]},
    },
}


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def _header(hash_: str | None) -> dict:
    return {"format_version": FORMAT_VERSION, "config_hash": hash_ or "unspecified"}


def _cplx_list(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_cplx(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


# -- ChiSeries -------------------------------------------------------------------------

def chi_to_dict(chi: ChiSeries, hash_: str | None = None) -> dict:
    N = chi.n * chi.n
    doc = _header(hash_)
    doc.update({
        "n": chi.n,
        "generator_order": GENERATOR_ORDER,
        "times": np.asarray(chi.times, dtype=float).tolist(),
        "chi": [_cplx_list(np.asarray(c).reshape(N * N)) for c in chi.chi],
    })
    if chi.metadata:
        doc["metadata"] = chi.metadata
    return doc


def chi_from_dict(doc: dict) -> ChiSeries:
    validate(doc, CHI_SCHEMA, "ChiSeries")
    n = doc["n"]
    N = n * n
    chi = _from_cplx(doc["chi"]) if doc["chi"] else np.zeros((0, N * N), complex)
    if chi.shape != (len(doc["times"]), N * N):
        raise SchemaError(f"ChiSeries: /chi must have shape ({len(doc['times'])}, {N * N}) x 2, got {chi.shape}")
    return ChiSeries(n, np.array(doc["times"], dtype=float), chi.reshape(-1, N, N), doc.get("metadata", {}))


def save_chi(path, chi: ChiSeries, hash_: str | None = None) -> Path:
    return atomic_write(path, dumps(chi_to_dict(chi, hash_)))


def load_chi(path) -> ChiSeries:
    return chi_from_dict(_load_json(path))


# -- DephasingFactors -----------------------------------------------------------------

def factors_to_dict(f: DephasingFactors, hash_: str | None = None) -> dict:
    doc = _header(hash_)
    doc.update({
        "kind": "dephasing-factors",
        "n": f.n,
        "times": np.asarray(f.times, dtype=float).tolist(),
        "factors": {str(m): _cplx_list(v) for m, v in sorted(f.factors.items())},
        "metadata": _plain(f.metadata),
    })
    return doc


def factors_from_dict(doc: dict) -> DephasingFactors:
    validate(doc, FACTORS_SCHEMA, "DephasingFactors")
    t = np.array(doc["times"], dtype=float)
    factors = {}
    for key, vals in doc["factors"].items():
        v = _from_cplx(vals)
        if v.shape != t.shape:
            raise SchemaError(f"DephasingFactors: /factors/{key} has {v.size} samples, expected {t.size}")
        factors[int(key)] = v
    return DephasingFactors(doc["n"], t, factors, doc.get("metadata", {}))


def save_factors(path, f: DephasingFactors, hash_: str | None = None) -> Path:
    return atomic_write(path, dumps(factors_to_dict(f, hash_)))


def load_factors(path) -> DephasingFactors:
    return factors_from_dict(_load_json(path))


def factors_csv(f: DephasingFactors, hash_: str | None = None) -> str:
    cols = ["t"]
    data = [np.asarray(f.times)]
    for m, v in sorted(f.factors.items()):
        cols += [f"re_phi{m}", f"im_phi{m}"]
        data += [v.real, v.imag]
    head = f"# format_version {FORMAT_VERSION}\n# config_hash {hash_ or 'unspecified'}\n" + ",".join(cols)
    return _savetxt(np.stack(data, axis=1), head)


def _plain(meta: dict) -> dict:
    """Metadata restricted to JSON-representable values."""
    return json.loads(json.dumps(meta, default=_jsonable))


# -- QuasiDistribution ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _savetxt(arr: np.ndarray, header: str) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    np.savetxt(buf, arr, fmt="%.17g", delimiter=",")
    return buf.getvalue()


def qd_csv(q: QuasiDistribution, hash_: str | None = None) -> str:
    lines = [
        f"# format_version {FORMAT_VERSION}",
        f"# config_hash {hash_ or 'unspecified'}",
        f"# coordinates {q.coordinates}",
    ]
    for a in q.axes:
        lines.append(f"# axis {a.label} min={_fmt(a.start)} step={_fmt(a.step)} n={a.size}")
    for d in q.deltas:
        extra = "" if d.mass == 1.0 else f" mass={_fmt(d.mass)}"
        lines.append(f"# delta {d.label} at {d.location:.17g}{extra}")
    if q.basis is not None:
        lines.append("# basis " + ";".join(" ".join(_fmt(x) for x in row) for row in q.basis))
    labels = list(q.labels)
    if q.axes:
        pts = q.points().reshape(-1, len(q.axes))
        arr = np.column_stack([pts, q.density.ravel()])
    else:
        arr = np.array([[float(q.density)]])
    return _savetxt(arr, "\n".join(lines) + "\n" + ",".join(labels + ["value"]))


def qd_from_csv(text: str, source: str = "<csv>") -> QuasiDistribution:
    meta: dict = {}
    axes, deltas, basis = [], [], None
    body_start = 0
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        parts = line[1:].strip().split(None, 1)
        if not parts:
            continue
        key, rest = parts[0], (parts[1] if len(parts) > 1 else "")
        try:
            if key == "axis":
                label, *kv = rest.split()
                fields = dict(s.split("=", 1) for s in kv)
                axes.append(Axis(label, float(fields["min"]), float(fields["step"]), int(fields["n"])))
            elif key == "delta":
                tokens = rest.split()
                label, loc = tokens[0], float(tokens[2])
                mass = float(tokens[3].split("=", 1)[1]) if len(tokens) > 3 else 1.0
                deltas.append(Delta(label, loc, mass))
            elif key == "basis":
                basis = np.array([[float(x) for x in row.split()] for row in rest.split(";")])
            else:
                meta[key] = rest
        except (KeyError, IndexError, ValueError) as exc:
            raise SchemaError(f"{source}: malformed header line {i + 1}: {line!r}") from exc
    else:
        body_start = len(lines)
    if "format_version" not in meta:
        raise SchemaError(f"{source}: missing field format_version")
    if meta["format_version"] != str(FORMAT_VERSION):
        raise UpgradeNeeded(f"{source}: format_version {meta['format_version']} is not supported (expected {FORMAT_VERSION})")
    if "coordinates" not in meta:
        raise SchemaError(f"{source}: missing field coordinates")
    body = "\n".join(lines[body_start + 1 :])
    vals = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2) if body.strip() else np.zeros((0, 1))
    shape = tuple(a.size for a in axes)
    expected = int(np.prod(shape)) if axes else 1
    if vals.shape[0] != expected:
        raise SchemaError(f"{source}: expected {expected} data rows, found {vals.shape[0]}")
    dens = vals[:, -1].reshape(shape) if axes else np.array(vals[0, -1])
    return QuasiDistribution(meta["coordinates"], tuple(axes), dens, tuple(deltas), basis,
                             {"config_hash": meta.get("config_hash")})


def qd_to_dict(q: QuasiDistribution, hash_: str | None = None) -> dict:
    doc = _header(hash_)
    doc.update({
        "kind": "quasi-distribution",
        "coordinates": q.coordinates,
        "axes": [{"label": a.label, "min": a.start, "step": a.step, "n": a.size} for a in q.axes],
        "deltas": [{"label": d.label, "location": d.location, "mass": d.mass} for d in q.deltas],
        "basis": None if q.basis is None else q.basis.tolist(),
        "density": np.asarray(q.density, dtype=float).ravel().tolist(),
        "normalization": q.normalization,
    })
    return doc


def qd_from_dict(doc: dict) -> QuasiDistribution:
    validate(doc, QD_SCHEMA, "QuasiDistribution")
    axes = tuple(Axis(a["label"], float(a["min"]), float(a["step"]), int(a["n"])) for a in doc["axes"])
    deltas = tuple(Delta(d["label"], float(d["location"]), float(d.get("mass", 1.0))) for d in doc["deltas"])
    shape = tuple(a.size for a in axes)
    dens = np.array(doc["density"], dtype=float)
    expected = int(np.prod(shape)) if axes else 1
    if dens.size != expected:
        raise SchemaError(f"QuasiDistribution: /density has {dens.size} values, expected {expected}")
    dens = dens.reshape(shape) if axes else np.array(dens[0])
    basis = None if doc.get("basis") is None else np.array(doc["basis"], dtype=float)
    return QuasiDistribution(doc["coordinates"], axes, dens, deltas, basis, {"config_hash": doc.get("config_hash")})


def save_qd(path, q: QuasiDistribution, hash_: str | None = None) -> Path:
    path = Path(path)
    if path.suffix == ".json":
        return atomic_write(path, dumps(qd_to_dict(q, hash_)))
    return atomic_write(path, qd_csv(q, hash_))


def load_qd(path) -> QuasiDistribution:
    path = Path(path)
    if path.suffix == ".json":
        return qd_from_dict(_load_json(path))
    return qd_from_csv(path.read_text(), str(path))


# -- ModeConfig -----------------------------------------------------------------------

def modes_to_dict(cfg: ModeConfig, hash_: str | None = None) -> dict:
    doc = _header(hash_)
    doc.update({
        "kind": "mode-config",
        "modes": [{"omega": w, "g1": [g1.real, g1.imag], "g2": [g2.real, g2.imag]} for w, g1, g2 in cfg.modes],
        "fock_cutoff": cfg.fock_cutoff,
        "temperature": cfg.temperature,
        "method": cfg.method,
        "n_qubits": cfg.n_qubits,
    })
    return doc


def modes_from_dict(doc: dict) -> ModeConfig:
    validate(doc, MODES_SCHEMA, "ModeConfig")
    modes = []
    for m in doc["modes"]:
        g1 = complex(*m["g1"])
        g2 = complex(*m["g2"]) if "g2" in m else 0j
        modes.append((m["omega"], g1, g2))
    kw = {k: doc[k] for k in ("fock_cutoff", "temperature", "method", "n_qubits") if k in doc}
    return ModeConfig(modes=modes, **kw)


def save_modes(path, cfg: ModeConfig, hash_: str | None = None) -> Path:
    return atomic_write(path, dumps(modes_to_dict(cfg, hash_)))


def load_modes(path) -> ModeConfig:
    return modes_from_dict(_load_json(path))


# -- results --------------------------------------------------------------------------

def save_result(path, result: dict, hash_: str | None = None) -> Path:
    doc = _header(hash_)
    doc.update(result)
    return atomic_write(path, dumps(doc))


def load_result(path) -> dict:
    doc = _load_json(path)
    if doc.get("format_version") != FORMAT_VERSION:
        raise UpgradeNeeded(f"{path}: unsupported or missing format_version")
    return doc
