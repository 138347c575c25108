"""Grid snapshots on disk: CSV masses, a JSON sidecar and log-scale PGM heatmaps.

Masses are written with ``repr`` (shortest round-tripping decimal), so a
snapshot read back is bit-identical.  The depleted mass goes to the sidecar
both as an exact decimal string and as the accumulator's partials in
``float.hex`` form.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import BatteryParams
from .dist import SocDistribution, marginals_and_export
from .exactsum import ExtendedSum

DEFAULT_FLOOR = 1e-30


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


def _read_rows(path: Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        return np.array([[float(x) for x in row] for row in csv.reader(fh) if row], dtype=float)


def heatmap_levels(values: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """8-bit gray levels of ``log10(values)`` on ``[log10 floor, 0]``; zero and sub-floor mass is black."""
    if not 0.0 < floor < 1.0:
        raise ValueError("heatmap floor must lie in (0, 1)")
    lo = math.log10(floor)
    with np.errstate(divide="ignore"):
        logs = np.log10(np.clip(values, floor, 1.0))
    levels = np.rint(255.0 * (logs - lo) / -lo)
    levels[values < floor] = 0
    return levels.astype(np.uint8)


def write_pgm(path, levels: np.ndarray, comment: str = "") -> None:
    """Binary P5 graymap, 8 bits per pixel."""
    levels = np.ascontiguousarray(levels, dtype=np.uint8)
    h, w = levels.shape
    header = "P5\n"
    if comment:
        header += "".join(f"# {line}\n" for line in comment.splitlines())
    header += f"{w} {h}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(levels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    if maxval != 255 or pixels.size != w * h:
        raise ValueError(f"{path}: truncated or not 8-bit")
    return pixels.reshape(h, w)


def snapshot_image(dist: SocDistribution, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Image with available charge along x and bound charge up; the last column is the a = amax strip."""
    grid = np.concatenate([dist.inner, dist.boundary[None, :]], axis=0)
    return heatmap_levels(grid, floor).T[::-1]


def write_snapshot(dist: SocDistribution, directory, stem: str, t: float | None = None,
                   floor: float = DEFAULT_FLOOR) -> dict[str, Path]:
    """Write ``stem_inner.csv``, ``stem_boundary.csv``, ``stem.json`` and ``stem.pgm``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    summary = marginals_and_export(dist)
    paths = {
        "inner": out / f"{stem}_inner.csv",
        "boundary": out / f"{stem}_boundary.csv",
        "scalars": out / f"{stem}.json",
        "heatmap": out / f"{stem}.pgm",
    }
    _write_rows(paths["inner"], summary["inner"])
    _write_rows(paths["boundary"], [summary["boundary"]])
    p = dist.params
    sidecar = {
        "time_min": t,
        "battery": {"c": p.c, "p_per_min": p.p, "capacity_mAmin": p.d},
        "n_grid": dist.n_grid,
        "inner_total": summary["inner_total"],
        "boundary_total": summary["boundary_total"],
        "depleted": str(summary["depleted"]),
        "survival": str(summary["survival"]),
        "depleted_partials": [x.hex() for x in dist.depleted.partials],
    }
    paths["scalars"].write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    write_pgm(paths["heatmap"], snapshot_image(dist, floor),
              f"log10 mass, black <= {floor:g}, white = 1; x = available charge, y = bound charge")
    return paths


def read_snapshot(directory, stem: str) -> SocDistribution:
    """Inverse of :func:`write_snapshot` (the heatmap is not needed)."""
    out = Path(directory)
    meta = json.loads((out / f"{stem}.json").read_text(encoding="utf-8"))
    bat = meta["battery"]
    params = BatteryParams(bat["c"], bat["p_per_min"], bat["capacity_mAmin"])
    n = int(meta["n_grid"])
    inner = _read_rows(out / f"{stem}_inner.csv")
    boundary = _read_rows(out / f"{stem}_boundary.csv")
    if inner.shape != (n, n) or boundary.shape != (1, n):
        raise ValueError(f"snapshot {stem!r} does not match n_grid = {n}")
    mass = np.concatenate([inner.ravel(), boundary[0]])
    depleted = ExtendedSum.from_partials(float.fromhex(x) for x in meta["depleted_partials"])
    return SocDistribution(params, n, mass, depleted)
