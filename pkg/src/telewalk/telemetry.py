"""Per-tick telemetry: fixed-order CSV with a version stamp.

Floats are written with 17 significant digits so byte-identical files are the
determinism criterion. The first line stamps the schema version; the parser
rejects anything else.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields

import numpy as np

SCHEMA_VERSION = 1
SCHEMA_STAMP = f"# telewalk-telemetry v{SCHEMA_VERSION}"


class TelemetryError(ValueError):
    """Telemetry file malformed or from an incompatible schema version."""


@dataclass
class TelemetryRecord:
    t: float
    dcm: np.ndarray              # measured capture point, 2
    dcm_ref: np.ndarray          # 2
    zmp_applied: np.ndarray      # 2
    zmp_ref: np.ndarray          # 2
    com: np.ndarray              # plant CoM, 2
    com_ref: np.ndarray          # 2
    comdot_star: np.ndarray      # balance-layer velocity output, 2
    phase: str                   # stand | ds | ss_left | ss_right
    lhand_err_pos: np.ndarray    # 3
    lhand_err_rot: np.ndarray    # 3
    rhand_err_pos: np.ndarray    # 3
    rhand_err_rot: np.ndarray    # 3
    joints: np.ndarray           # n
    qp_objective: float
    qp_residual: float
    base_yaw: float
    com_gap: float               # |plant CoM - kinematic CoM| on the ground plane
    zmp_margin: float            # support-polygon margin of the applied point


_VECTOR_FIELDS = {
    "dcm": 2, "dcm_ref": 2, "zmp_applied": 2, "zmp_ref": 2, "com": 2,
    "com_ref": 2, "comdot_star": 2, "lhand_err_pos": 3, "lhand_err_rot": 3,
    "rhand_err_pos": 3, "rhand_err_rot": 3,
}
_SCALAR_TAIL = ["qp_objective", "qp_residual", "base_yaw", "com_gap", "zmp_margin"]


def column_names(n_joints: int) -> list[str]:
    cols: list[str] = ["t"]
    for f in fields(TelemetryRecord):
        if f.name in ("t", "joints", "phase") or f.name in _SCALAR_TAIL:
            continue
        dim = _VECTOR_FIELDS[f.name]
        suffix = ["x", "y", "z"][:dim]
        cols += [f"{f.name}_{s}" for s in suffix]
    cols.append("phase")
    cols += [f"s_{i:02d}" for i in range(n_joints)]
    cols += _SCALAR_TAIL
    return cols


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def record_to_row(rec: TelemetryRecord) -> list[str]:
    row = [_fmt(rec.t)]
    for f in fields(TelemetryRecord):
        if f.name in ("t", "joints", "phase") or f.name in _SCALAR_TAIL:
            continue
        row += [_fmt(v) for v in getattr(rec, f.name)]
    row.append(rec.phase)
    row += [_fmt(v) for v in rec.joints]
    row += [_fmt(getattr(rec, name)) for name in _SCALAR_TAIL]
    return row


class TelemetryWriter:
    """Streams records to a text sink in tick order."""

    def __init__(self, sink: io.TextIOBase, n_joints: int):
        self._sink = sink
        self._columns = column_names(n_joints)
        self._sink.write(SCHEMA_STAMP + "\n")
        self._sink.write(",".join(self._columns) + "\n")

    def write(self, rec: TelemetryRecord):
        row = record_to_row(rec)
        if len(row) != len(self._columns):
            raise TelemetryError(
                f"record has {len(row)} values, header has {len(self._columns)}")
        self._sink.write(",".join(row) + "\n")


@dataclass
class TelemetryTable:
    """Parsed telemetry: one numpy column per numeric field plus phases."""

    columns: dict[str, np.ndarray]
    phases: list[str]
    n_joints: int

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def joint_matrix(self) -> np.ndarray:
        return np.column_stack([self.columns[f"s_{i:02d}"]
                                for i in range(self.n_joints)])

    def __len__(self) -> int:
        return len(self.phases)


def parse_telemetry(text: str) -> TelemetryTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# telewalk-telemetry"):
        raise TelemetryError("missing telemetry schema stamp")
    if lines[0].strip() != SCHEMA_STAMP:
        raise TelemetryError(
            f"schema version mismatch: file says {lines[0].strip()!r}, "
            f"reader supports {SCHEMA_STAMP!r}")
    if len(lines) < 2:
        raise TelemetryError("missing header row")
    header = lines[1].split(",")
    n_joints = sum(1 for c in header if c.startswith("s_"))
    expected = column_names(n_joints)
    if header != expected:
        raise TelemetryError("header does not match the fixed column order")
    phase_idx = header.index("phase")
    data: list[list[float]] = []
    phases: list[str] = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise TelemetryError(f"line {lineno}: {len(parts)} fields, "
                                 f"expected {len(header)}")
        phases.append(parts[phase_idx])
        try:
            data.append([float(v) for i, v in enumerate(parts) if i != phase_idx])
        except ValueError as e:
            raise TelemetryError(f"line {lineno}: {e}") from e
    numeric_names = [c for c in header if c != "phase"]
    matrix = np.asarray(data, dtype=float) if data else np.zeros((0, len(numeric_names)))
    columns = {name: matrix[:, i] for i, name in enumerate(numeric_names)}
    return TelemetryTable(columns=columns, phases=phases, n_joints=n_joints)


def read_telemetry(path) -> TelemetryTable:
    with open(path, "r", encoding="utf-8") as f:
        return parse_telemetry(f.read())
