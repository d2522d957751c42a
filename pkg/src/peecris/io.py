"""Scenario files and CSV/JSON result formats."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional
import csv
import hashlib
import json

import numpy as np
import yaml
from scipy.constants import speed_of_light

from .geometry import Dipole, GeometryError, Scenario, default_wire_radius, ris_array


class ConfigError(ValueError):
    """Invalid scenario or input file; the message starts with the offending key."""


BUNDLED = {"reference": "reference.scenario"}


def bundled_path(name: str = "reference") -> Path:
    return Path(str(resources.files("peecris") / "data" / BUNDLED[name]))


def _number(value, key: str, lam: Optional[float] = None) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if lam is not None and text.endswith("lambda"):
            try:
                return float(text[: -len("lambda")]) * lam
            except ValueError:
                pass
        try:
            return float(text)
        except ValueError:
            pass
    raise ConfigError(f"{key}: expected a number, got {value!r}")


def _vector(value, key: str, lam=None, n=3) -> List[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{key}: expected a list of {n} numbers, got {value!r}")
    return [_number(v, f"{key}[{i}]", lam) for i, v in enumerate(value)]


def _int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def _require(doc: dict, key: str, prefix: str = ""):
    if key not in doc:
        raise ConfigError(f"{prefix}{key}: missing")
    return doc[key]


@dataclass
class ScenarioConfig:
    scenario: Scenario
    zg: complex
    zr: complex
    digest: str
    raw: dict = field(repr=False, default_factory=dict)


def scenario_from_dict(doc, require_link: bool = True) -> ScenarioConfig:
    """Validate a parsed document. Without ``require_link`` a file may hold any
    non-empty set of dipoles with at most one Tx and one Rx (impedance-only runs)."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected a mapping")
    freq = _number(_require(doc, "frequency_hz"), "frequency_hz")
    if not freq > 0:
        raise ConfigError("frequency_hz: must be positive")
    lam = speed_of_light / freq
    nseg = _int(doc.get("segments_per_dipole", 11), "segments_per_dipole")
    if nseg < 3 or nseg % 2 == 0:
        raise ConfigError("segments_per_dipole: must be odd and >= 3")
    radius = (
        _number(doc["wire_radius_m"], "wire_radius_m", lam)
        if "wire_radius_m" in doc
        else default_wire_radius(freq)
    )
    zg = complex(*_vector(doc.get("zg_ohm", [50, 0]), "zg_ohm", n=2))
    zr = complex(*_vector(doc.get("zr_ohm", [50, 0]), "zr_ohm", n=2))

    dipoles = []
    entries = doc.get("dipoles", [])
    if not isinstance(entries, list):
        raise ConfigError("dipoles: expected a list")
    for i, d in enumerate(entries):
        key = f"dipoles[{i}]."
        if not isinstance(d, dict):
            raise ConfigError(f"dipoles[{i}]: expected a mapping")
        center = _vector(_require(d, "center", key), key + "center", lam)
        axis = _vector(d.get("axis", [0, 0, 1]), key + "axis", lam)
        norm = float(np.linalg.norm(axis))
        if norm == 0:
            raise ConfigError(f"{key}axis: must be nonzero")
        axis = [a / norm for a in axis]
        length = _number(_require(d, "length_m", key), key + "length_m", lam)
        role = _require(d, "role", key)
        if role not in ("Tx", "Rx", "RIS"):
            raise ConfigError(f"{key}role: must be Tx, Rx or RIS, got {role!r}")
        if not length > 0:
            raise ConfigError(f"{key}length_m: must be positive")
        dipoles.append(Dipole(tuple(center), tuple(axis), length, role, len(dipoles)))

    if "ris_array" in doc:
        g = doc["ris_array"]
        key = "ris_array."
        if not isinstance(g, dict):
            raise ConfigError("ris_array: expected a mapping")
        center = _vector(_require(g, "center", key), key + "center", lam)
        rows = _int(_require(g, "rows", key), key + "rows")
        cols = _int(_require(g, "cols", key), key + "cols")
        if rows < 1 or cols < 1:
            raise ConfigError(f"{key}rows: rows and cols must be >= 1")
        dy = _number(_require(g, "dy_m", key), key + "dy_m", lam)
        dz = _number(_require(g, "dz_m", key), key + "dz_m", lam)
        length = _number(_require(g, "element_length_m", key), key + "element_length_m", lam)
        if not length > 0:
            raise ConfigError(f"{key}element_length_m: must be positive")
        dipoles += ris_array(center, rows, cols, dy, dz, length, first_port=len(dipoles))

    if not dipoles:
        raise ConfigError("dipoles: missing")
    for role in ("Tx", "Rx"):
        count = sum(d.role == role for d in dipoles)
        if count > 1 or (require_link and count != 1):
            raise ConfigError(f"dipoles: need exactly one {role} dipole, found {count}")
    try:
        scenario = Scenario(freq, radius, nseg, tuple(dipoles))
    except GeometryError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    canon = json.dumps(doc, sort_keys=True, default=str, separators=(",", ":"))
    digest = hashlib.sha256(canon.encode()).hexdigest()
    return ScenarioConfig(scenario, zg, zr, digest, doc)


def load_config(path, require_link: bool = True) -> ScenarioConfig:
    path = bundled_path(path) if str(path) in BUNDLED else Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: not valid structured text: {exc}") from exc
    return scenario_from_dict(doc, require_link)


def parse_scenario(path) -> Scenario:
    return load_config(path).scenario


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_currents_csv(currents, path) -> None:
    _write_rows(path, ["segment", "re_amp", "im_amp"],
                [[i, repr(float(c.real)), repr(float(c.imag))] for i, c in enumerate(currents)])


def write_loads_csv(loads, path) -> None:
    _write_rows(path, ["ris_index", "re_ohm", "im_ohm"],
                [[i, repr(float(z.real)), repr(float(z.imag))] for i, z in enumerate(loads)])


def read_loads_csv(path, expected: Optional[int] = None) -> np.ndarray:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"loads: cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["ris_index", "re_ohm", "im_ohm"]:
            raise ConfigError("loads: header must be ris_index,re_ohm,im_ohm")
        values: Dict[int, complex] = {}
        for row_no, row in enumerate(reader, start=2):
            try:
                idx = int(row["ris_index"])
                z = complex(float(row["re_ohm"]), float(row["im_ohm"]))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"loads: row {row_no}: {exc}") from exc
            if idx in values or idx < 0:
                raise ConfigError(f"loads: row {row_no}: bad or duplicate ris_index {idx}")
            values[idx] = z
    n = len(values)
    if sorted(values) != list(range(n)):
        raise ConfigError("loads: ris_index values must be 0..N-1")
    if expected is not None and n != expected:
        raise ConfigError(f"loads: expected {expected} rows, found {n}")
    return np.array([values[i] for i in range(n)], dtype=complex)


def write_trace_csv(trace, path) -> None:
    _write_rows(path, ["step", "sweep", "ris_index", "objective"],
                [[t["step"], t["sweep"], t["ris_index"], repr(float(t["objective"]))] for t in trace])


@dataclass
class RunReport:
    command: str
    scenario_digest: str
    frequency_hz: float
    num_branches: int
    num_nodes: int
    objective_before: Optional[float] = None
    objective_after: Optional[float] = None
    rate_after: Optional[float] = None
    sweeps: Optional[int] = None
    extra: dict = field(default_factory=dict)
    timings_s: Dict[str, float] = field(default_factory=dict)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
