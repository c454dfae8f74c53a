"""On-disk formats: field snapshots, PGM images, checkpoints and CSV tables."""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .schemes import State
from .spectral import Grid, make_grid

SNAPSHOT_MAGIC = b"PFCF1"
CHECKPOINT_MAGIC = b"PFCC1"
CHECKPOINT_VERSION = 1


class SnapshotFormatError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class Snapshot:
    grid: Grid
    phi: np.ndarray
    t: float
    step: int


def encode_snapshot(grid: Grid, phi: np.ndarray, t: float, step: int) -> bytes:
    phi = grid.check(phi)
    header = f"{grid.N} {grid.Lx!r} {grid.Ly!r} {float(t)!r} {int(step)}\n".encode("ascii")
    return SNAPSHOT_MAGIC + b"\n" + header + np.ascontiguousarray(phi, dtype="<f8").tobytes()


def _decode_snapshot(buf: bytes, offset: int, source: str) -> tuple[Snapshot, int]:
    end = buf.find(b"\n", offset)
    if end < 0 or buf[offset:end] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{source}: bad magic, expected {SNAPSHOT_MAGIC!r}")
    hend = buf.find(b"\n", end + 1)
    if hend < 0:
        raise SnapshotFormatError(f"{source}: missing header line")
    try:
        n, lx, ly, t, step = buf[end + 1 : hend].decode("ascii").split()
        grid = make_grid(float(lx), float(ly), int(n))
        t, step = float(t), int(step)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SnapshotFormatError(f"{source}: malformed header: {exc}") from exc
    start = hend + 1
    expected = 8 * grid.N * grid.N
    actual = min(len(buf) - start, expected)
    if actual < expected:
        raise SnapshotFormatError(f"{source}: truncated payload, expected {expected} bytes, got {actual}")
    phi = np.frombuffer(buf, dtype="<f8", count=grid.N * grid.N, offset=start).reshape(grid.shape)
    return Snapshot(grid, phi.astype(float), t, step), start + expected


def write_snapshot(path: str | os.PathLike, grid: Grid, phi: np.ndarray, t: float, step: int) -> None:
    Path(path).write_bytes(encode_snapshot(grid, phi, t, step))


def read_snapshot(path: str | os.PathLike, expected_t: float | None = None) -> Snapshot:
    buf = Path(path).read_bytes()
    snap, end = _decode_snapshot(buf, 0, str(path))
    if end != len(buf):
        raise SnapshotFormatError(f"{path}: {len(buf) - end} trailing bytes after payload")
    if expected_t is not None and not math.isclose(snap.t, expected_t, rel_tol=1e-12, abs_tol=1e-12):
        warnings.warn(f"{path}: header time {snap.t} does not match manifest time {expected_t}", stacklevel=2)
    return snap


def check_snapshots_against_manifest(manifest: dict, directory: str | os.PathLike) -> list[str]:
    """Warn about snapshots whose header time disagrees with the manifest; return the names checked."""
    names = []
    for entry in manifest.get("snapshots", []):
        read_snapshot(Path(directory) / entry["file"], expected_t=entry["t"])
        names.append(entry["file"])
    return names


def write_pgm(path: str | os.PathLike, phi: np.ndarray) -> None:
    """8-bit binary PGM; image row ``j`` holds ``phi[:, j]`` (x runs left to right)."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("cannot render a non-finite field")
    lo, hi = float(phi.min()), float(phi.max())
    if hi > lo:
        pixels = np.rint(255 * (phi - lo) / (hi - lo)).astype(np.uint8)
    else:
        pixels = np.full(phi.shape, 128, dtype=np.uint8)
    image = pixels.T
    h, w = image.shape
    header = f"P5\n# phi_min={lo!r} phi_max={hi!r}\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.tobytes())


def read_pgm(path: str | os.PathLike) -> tuple[np.ndarray, dict[str, float]]:
    """Pixels (rows = y) and the ``phi_min``/``phi_max`` recorded in the comment."""
    buf = Path(path).read_bytes()
    tokens: list[bytes] = []
    meta: dict[str, float] = {}
    pos = 0
    while len(tokens) < 4:
        end = buf.index(b"\n", pos)
        line = buf[pos:end]
        pos = end + 1
        if line.startswith(b"#"):
            for item in line[1:].split():
                key, _, value = item.decode().partition("=")
                meta[key] = float(value)
            continue
        tokens.extend(line.split())
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    return pixels, meta


@dataclass
class Checkpoint:
    state: State
    previous: State | None
    scheme: str
    config: dict


def write_checkpoint(
    path: str | os.PathLike, state: State, scheme: str, config: dict, previous: State | None = None
) -> None:
    """Store ``phi^n``, ``R^n`` and, for the second-order scheme, ``phi^{n-1}``.

    Written to a temporary file first so an interrupted write never replaces a good checkpoint.
    """
    if scheme == "second" and state.step_index > 0 and previous is None:
        raise CheckpointError("second-order checkpoint needs the previous level")
    grid = state.grid
    header = {
        "version": CHECKPOINT_VERSION,
        "scheme": scheme,
        "step": state.step_index,
        "dt": state.dt.hex(),
        "R": float(state.R).hex(),
        "N": grid.N,
        "Lx": grid.Lx,
        "Ly": grid.Ly,
        "has_previous": previous is not None,
        "previous_R": float(previous.R).hex() if previous is not None else None,
        "config": config,
    }
    blob = CHECKPOINT_MAGIC + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n"
    blob += encode_snapshot(grid, state.phi, state.t, state.step_index)
    if previous is not None:
        blob += encode_snapshot(grid, previous.phi, previous.t, previous.step_index)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def read_checkpoint(
    path: str | os.PathLike, grid: Grid | None = None, scheme: str | None = None
) -> Checkpoint:
    buf = Path(path).read_bytes()
    end = buf.find(b"\n")
    if buf[:end] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    hend = buf.find(b"\n", end + 1)
    try:
        header = json.loads(buf[end + 1 : hend])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {header.get('version')} != {CHECKPOINT_VERSION}")
    try:
        snap, pos = _decode_snapshot(buf, hend + 1, str(path))
        prev_snap = _decode_snapshot(buf, pos, str(path))[0] if header["has_previous"] else None
    except SnapshotFormatError as exc:
        raise CheckpointError(str(exc)) from exc
    if grid is not None and grid != snap.grid:
        raise CheckpointError(f"{path}: checkpoint grid {snap.grid} does not match run grid {grid}")
    if scheme is not None and scheme == "second" and snap.step > 0 and prev_snap is None:
        raise CheckpointError(f"{path}: checkpoint has no previous level (phi^(n-1)); cannot resume second-order run")
    dt = float.fromhex(header["dt"])
    state = State(snap.grid, snap.phi, float.fromhex(header["R"]), snap.step, dt)
    previous = None
    if prev_snap is not None:
        previous = State(snap.grid, prev_snap.phi, float.fromhex(header["previous_R"]), prev_snap.step, dt)
    return Checkpoint(state, previous, header["scheme"], header["config"])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[Sequence], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def write_json(path: str | os.PathLike, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
