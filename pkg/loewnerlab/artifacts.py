"""Readers and writers for run artifacts.

JSON for reports and curves, CSV for driving functions, a packed
little-endian binary for large path batches. Every artifact embeds the
RunConfig that produced it; wall-clock timestamps live only in the
manifest, so numeric artifacts of one seed are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ErrorCode, InputError
from .geometry import (
    ComplementRegion,
    ConformalMap,
    DiskRegion,
    HalfPlaneRegion,
    MapChain,
    Mobius,
    Polynomial,
    PolygonRegion,
    Region,
    TubeRegion,
    disk_automorphism,
    geodesic_neighborhood,
    keyhole_neighborhood,
    rotation,
    scaling,
)
from .models import Chart, CurvePath, DrivingFunction, DrivingKind, complex_from_json

UTC = timezone.utc

logger = logging.getLogger("loewnerlab.artifacts")

MANIFEST_NAME = "manifest.json"
BATCH_MAGIC = b"LWLB"
_HEADER = struct.Struct("<4sI")


def _malformed(path: Path | str, message: str, cause: Exception | None = None) -> InputError:
    return InputError(
        code=ErrorCode.MALFORMED_INPUT,
        message=message,
        details={"path": str(path)},
        cause=cause,
    )


def _plain(value: Any) -> Any:
    """JSON fallback for numpy values and complex numbers."""
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_plain, allow_nan=True)


def read_json(path: Path | str) -> Any:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise _malformed(path, "input file not found", e) from e
    except json.JSONDecodeError as e:
        raise _malformed(path, "input file is not valid JSON", e) from e


def write_json(path: Path | str, payload: dict[str, Any], run: RunConfig) -> Path:
    """Write a report with the run config embedded under "run_config"."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps({"run_config": run.to_dict(), **payload}) + "\n")
    logger.debug("Wrote JSON artifact", extra={"path": str(path)})
    return path


# ---------------------------------------------------------------------------
# Driving functions (CSV)
# ---------------------------------------------------------------------------


def write_driving_csv(path: Path | str, driving: DrivingFunction, run: RunConfig) -> Path:
    """Two columns t,value under "# kind=" and "# run_config=" comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# kind={driving.kind.value}\n")
        f.write(f"# run_config={json.dumps(run.to_dict(), sort_keys=True, default=_plain)}\n")
        writer = csv.writer(f)
        writer.writerow(["t", "value"])
        for t, w in zip(driving.grid, driving.values, strict=True):
            writer.writerow([repr(float(t)), repr(float(w))])
    return path


def read_driving_csv(path: Path | str, kind: DrivingKind | None = None) -> DrivingFunction:
    """
    Read a t,value CSV; a "# kind=radial" line selects the radial equation.

    Raises:
        InputError: If the file is missing, has no rows, or has non-numeric cells.
    """
    header_kind = DrivingKind.CHORDAL
    rows: list[tuple[float, float]] = []
    try:
        with open(path, newline="") as f:
            lines = []
            for line in f:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    if key.strip() == "kind":
                        header_kind = DrivingKind(value.strip())
                    continue
                lines.append(line)
        for row in csv.reader(lines):
            if not row or row[0].strip() in ("t", "time"):
                continue
            rows.append((float(row[0]), float(row[1])))
    except FileNotFoundError as e:
        raise _malformed(path, "driving file not found", e) from e
    except (ValueError, IndexError) as e:
        raise _malformed(path, "driving CSV needs numeric t,value rows", e) from e
    if not rows:
        raise _malformed(path, "driving CSV has no rows")
    data = np.array(rows, dtype=float)
    return DrivingFunction(data[:, 0], data[:, 1], kind or header_kind)


# ---------------------------------------------------------------------------
# Curves (JSON)
# ---------------------------------------------------------------------------


def read_curves(path: Path | str) -> list[CurvePath]:
    """A bare curve object, {"curve": {...}} or {"curves": [...]}."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise _malformed(path, "curve file must hold a JSON object")
    if "curves" in data:
        items = data["curves"]
    elif "curve" in data:
        items = [data["curve"]]
    else:
        items = [data]
    try:
        return [CurvePath.from_dict(item) for item in items]
    except InputError as e:
        e.details.setdefault("path", str(path))
        raise


def write_curves(path: Path | str, curves: Sequence[CurvePath], run: RunConfig, **extra: Any) -> Path:
    return write_json(path, {"curves": [c.to_dict() for c in curves], **extra}, run)


# ---------------------------------------------------------------------------
# Path batches (packed binary)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathBatch:
    """Decoded batch: header plus one (grid, values) pair per path."""

    header: dict[str, Any]
    drivings: list[DrivingFunction]

    @property
    def run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.header["run_config"])


def write_path_batch(path: Path | str, drivings: Sequence[DrivingFunction], run: RunConfig) -> Path:
    """
    Magic, header length, JSON header, then for each path its grid followed
    by its values as little-endian float64.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "run_config": run.to_dict(),
        "kind": drivings[0].kind.value if drivings else DrivingKind.CHORDAL.value,
        "lengths": [int(d.grid.size) for d in drivings],
        "dtype": "<f8",
    }
    encoded = json.dumps(header, sort_keys=True, default=_plain).encode()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(BATCH_MAGIC, len(encoded)))
        f.write(encoded)
        for d in drivings:
            f.write(np.asarray(d.grid, dtype="<f8").tobytes())
            f.write(np.asarray(d.values, dtype="<f8").tobytes())
    logger.debug("Wrote path batch", extra={"path": str(path), "n_paths": len(drivings)})
    return path


def read_path_batch(path: Path | str) -> PathBatch:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise _malformed(path, "batch file not found", e) from e
    if len(raw) < _HEADER.size:
        raise _malformed(path, "batch file is truncated")
    magic, size = _HEADER.unpack_from(raw)
    if magic != BATCH_MAGIC:
        raise _malformed(path, "not a path batch file")
    try:
        header = json.loads(raw[_HEADER.size : _HEADER.size + size])
    except json.JSONDecodeError as e:
        raise _malformed(path, "batch header is not valid JSON", e) from e
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size + size)
    kind = DrivingKind(header["kind"])
    drivings = []
    offset = 0
    for length in header["lengths"]:
        if offset + 2 * length > body.size:
            raise _malformed(path, "batch body is shorter than its header")
        grid = body[offset : offset + length]
        values = body[offset + length : offset + 2 * length]
        drivings.append(DrivingFunction(grid.copy(), values.copy(), kind))
        offset += 2 * length
    return PathBatch(header, drivings)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir: Path | str,
    run: RunConfig,
    artifacts: Sequence[Path],
    started: datetime,
    finished: datetime | None = None,
    status: str = "ok",
) -> Path:
    """manifest.json: run config, artifact checksums and the run's timestamps."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    finished = finished or datetime.now(UTC)
    entries = [
        {"path": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)}
        for p in artifacts
        if p.exists()
    ]
    payload = {
        "version": __version__,
        "run_id": run.run_id,
        "status": status,
        "started_at": started.isoformat(),
        "finished_at": finished.isoformat(),
        "elapsed_seconds": (finished - started).total_seconds(),
        "artifacts": entries,
    }
    return write_json(out / MANIFEST_NAME, payload, run)


# ---------------------------------------------------------------------------
# Maps and regions
# ---------------------------------------------------------------------------


def _complex(data: dict[str, Any], key: str, default: complex | None = None) -> complex:
    if key not in data:
        if default is None:
            raise KeyError(key)
        return default
    return complex_from_json(data[key])


def map_from_dict(data: dict[str, Any]) -> ConformalMap:
    """
    Build a map from {"kind": ...}.

    Kinds: identity, mobius {a, b, c, d}, polynomial {coefficients},
    rotation {angle}, scale {factor, shift}, automorphism {a, angle},
    chain {maps: [...]} (applied in order).
    """
    try:
        kind = data["kind"]
        if kind == "identity":
            return MapChain(())
        if kind == "mobius":
            return Mobius(*(_complex(data, k) for k in ("a", "b", "c", "d")))
        if kind == "polynomial":
            return Polynomial(tuple(complex_from_json(c) for c in data["coefficients"]))
        if kind == "rotation":
            return rotation(float(data["angle"]))
        if kind == "scale":
            return scaling(float(data["factor"]), float(data.get("shift", 0.0)))
        if kind == "automorphism":
            return disk_automorphism(_complex(data, "a"), float(data.get("angle", 0.0)))
        if kind == "chain":
            return MapChain.of(*(map_from_dict(m) for m in data["maps"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message=f"malformed map description: missing or invalid {e}",
            details={"map": data.get("kind") if isinstance(data, dict) else None},
            cause=e,
        ) from e
    raise InputError(
        code=ErrorCode.MALFORMED_INPUT,
        message=f"unknown map kind: {kind}",
        details={
            "kind": kind,
            "choices": ["identity", "mobius", "polynomial", "rotation", "scale", "automorphism", "chain"],
        },
    )


def read_map(path: Path | str) -> ConformalMap:
    data = read_json(path)
    if not isinstance(data, dict):
        raise _malformed(path, "map file must hold a JSON object")
    return map_from_dict(data)


def region_from_dict(data: dict[str, Any]) -> Region:
    """
    Build a region from {"kind": ...}.

    Kinds: disk {center, radius}, halfplane, polygon {points, chart},
    tube {curve, eps}, complement {host, removed}, geodesic {eps},
    keyhole {eps}. Every kind accepts {exempt, exempt_radius}.
    """
    try:
        kind = data["kind"]
        exempt = tuple(complex_from_json(z) for z in data.get("exempt", ()))
        radius = float(data.get("exempt_radius", 0.0))
        if kind == "disk":
            return DiskRegion(_complex(data, "center", 0j), float(data.get("radius", 1.0)), Chart.D, exempt, radius)
        if kind == "halfplane":
            return HalfPlaneRegion(Chart.H, exempt, radius)
        if kind == "polygon":
            points = np.array([complex_from_json(p) for p in data["points"]], dtype=complex)
            return PolygonRegion(points, Chart(data.get("chart", "D")), exempt, radius)
        if kind == "tube":
            curve = CurvePath.from_dict(data["curve"])
            return TubeRegion(curve, float(data["eps"]), curve.chart, exempt, radius)
        if kind == "complement":
            return ComplementRegion(region_from_dict(data["host"]), region_from_dict(data["removed"]), exempt, radius)
        if kind == "geodesic":
            return geodesic_neighborhood(float(data["eps"]))
        if kind == "keyhole":
            return keyhole_neighborhood(float(data["eps"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message=f"malformed region description: missing or invalid {e}",
            cause=e,
        ) from e
    raise InputError(
        code=ErrorCode.MALFORMED_INPUT,
        message=f"unknown region kind: {kind}",
        details={"kind": kind},
    )


def read_region(path: Path | str) -> Region:
    data = read_json(path)
    if not isinstance(data, dict):
        raise _malformed(path, "region file must hold a JSON object")
    return region_from_dict(data)
