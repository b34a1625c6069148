"""Local-maximum detection with sub-grid refinement, plus grid file loading."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import MalformedGrid
from .signals import Axis, SpectrumGrid


@dataclass(frozen=True)
class Peak:
    """One detected local maximum (1D)."""

    index: int
    position: float          # grid coordinate
    refined_position: float  # parabolic sub-grid estimate
    height: float            # refined magnitude
    classification: str = ""


@dataclass(frozen=True)
class Peak2D:
    """One detected local maximum of a 2D magnitude map."""

    index: tuple[int, int]
    position: tuple[float, float]          # (axis1, axis2) grid coordinates
    refined_position: tuple[float, float]
    height: float
    classification: str = ""
    k_tag: int | None = None               # integer phonon offset, if matched


def _parabolic(y_m: float, y_0: float, y_p: float) -> tuple[float, float]:
    """Vertex offset (in grid steps) and height of the parabola through 3 points."""
    denom = y_m - 2.0 * y_0 + y_p
    if denom == 0.0:
        return 0.0, y_0
    delta = 0.5 * (y_m - y_p) / denom
    delta = max(-0.5, min(0.5, delta))
    return delta, y_0 - 0.25 * (y_m - y_p) * delta


def find_peaks_1d(x: np.ndarray, values: np.ndarray, min_rel_height: float = 0.0) -> list[Peak]:
    """Strict local maxima of |values| after 3-point magnitude smoothing."""
    x = np.asarray(x, dtype=float)
    mag = np.abs(np.asarray(values))
    if mag.size < 3 or np.all(mag == mag.flat[0]):
        return []
    smooth = np.convolve(mag, np.ones(3) / 3.0, mode="same")
    interior = np.arange(1, mag.size - 1)
    is_max = (smooth[interior] > smooth[interior - 1]) & (smooth[interior] > smooth[interior + 1])
    floor = min_rel_height * float(mag.max())
    out = []
    step = x[1] - x[0]
    for idx in interior[is_max]:
        delta, height = _parabolic(mag[idx - 1], mag[idx], mag[idx + 1])
        if height < floor:
            continue
        out.append(Peak(
            index=int(idx),
            position=float(x[idx]),
            refined_position=float(x[idx] + delta * step),
            height=float(height),
        ))
    out.sort(key=lambda p: -p.height)
    return out


def classify_2d(omega1: float, omega3: float, omega_v: float, tol: float) -> tuple[str, int | None]:
    diff = omega1 - omega3
    k = int(round(diff / omega_v))
    if abs(diff - k * omega_v) <= tol:
        return ("diagonal" if k == 0 else "cross"), k
    return "coherence", None


def find_peaks_2d(ax1: np.ndarray, ax2: np.ndarray, values: np.ndarray,
                  omega_v: float | None = None, min_rel_height: float = 0.0,
                  tol: float | None = None) -> list[Peak2D]:
    """Strict 8-neighbor local maxima of |values| after 3x3 smoothing.

    ``values`` is indexed [axis1, axis2].  With ``omega_v`` given, each peak
    is classified by whether its axis offset matches an integer number of
    vibrational quanta.
    """
    ax1 = np.asarray(ax1, dtype=float)
    ax2 = np.asarray(ax2, dtype=float)
    mag = np.abs(np.asarray(values))
    if mag.shape[0] < 3 or mag.shape[1] < 3 or np.all(mag == mag.flat[0]):
        return []
    smooth = ndimage.uniform_filter(mag, size=3, mode="nearest")
    step1 = ax1[1] - ax1[0]
    step2 = ax2[1] - ax2[0]
    if tol is None:
        tol = 2.0 * max(abs(step1), abs(step2))
    floor = min_rel_height * float(mag.max())
    core = smooth[1:-1, 1:-1]
    neighbors = [smooth[1 + di:mag.shape[0] - 1 + di, 1 + dj:mag.shape[1] - 1 + dj]
                 for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    is_max = np.ones_like(core, dtype=bool)
    for nb in neighbors:
        is_max &= core > nb
    out = []
    for r, c in zip(*np.nonzero(is_max)):
        i, j = r + 1, c + 1
        d1, h1 = _parabolic(mag[i - 1, j], mag[i, j], mag[i + 1, j])
        d2, h2 = _parabolic(mag[i, j - 1], mag[i, j], mag[i, j + 1])
        height = max(h1, h2)
        if height < floor:
            continue
        pos1, pos2 = float(ax1[i]), float(ax2[j])
        ref1, ref2 = float(ax1[i] + d1 * step1), float(ax2[j] + d2 * step2)
        cls, k = ("", None)
        if omega_v is not None:
            cls, k = classify_2d(ref1, ref2, omega_v, tol)
        out.append(Peak2D(
            index=(int(i), int(j)),
            position=(pos1, pos2),
            refined_position=(ref1, ref2),
            height=float(height),
            classification=cls,
            k_tag=k,
        ))
    out.sort(key=lambda p: -p.height)
    return out


# ---------------------------------------------------------------------------
# grid file loading


def _meta_cast(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def load_grid(path) -> SpectrumGrid:
    """Read a spectrum grid written by the CLI (CSV or JSON)."""
    path = Path(path)
    if not path.exists():
        raise MalformedGrid(f"no such file: {path}")
    try:
        if path.suffix.lower() == ".json":
            return _load_json(path)
        return _load_csv(path)
    except MalformedGrid:
        raise
    except Exception as exc:  # malformed content of any flavor
        raise MalformedGrid(f"cannot parse {path}: {exc}") from exc


def _axis_from_values(vals: np.ndarray, offset: float, label: str) -> Axis:
    return Axis(float(vals[0]), float(vals[-1]), int(vals.size), offset, label)


def _load_csv(path: Path) -> SpectrumGrid:
    meta: dict = {}
    rows = []
    header: list[str] | None = None
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = _meta_cast(val.strip())
            continue
        if header is None:
            header = [h.strip() for h in line.split(",")]
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if header is None or not rows:
        raise MalformedGrid(f"{path}: no data rows")
    data = np.array(rows)
    offset = float(meta.get("axis_offset", 0.0))
    signal = str(meta.get("signal", "unknown"))
    t_wait = meta.get("t_wait")
    if header[:2] == ["omega1", "omega3"]:
        om1 = np.unique(data[:, 0])
        om3 = np.unique(data[:, 1])
        if om1.size * om3.size != data.shape[0]:
            raise MalformedGrid(f"{path}: 2D grid is not a full product grid")
        values = (data[:, 2] + 1j * data[:, 3]).reshape(om1.size, om3.size)
        return SpectrumGrid(signal, _axis_from_values(om1, offset, "omega1"),
                            _axis_from_values(om3, offset, "omega3"),
                            t_wait, values, meta)
    if header[0] != "omega":
        raise MalformedGrid(f"{path}: unrecognized column layout {header}")
    values = data[:, 1].astype(complex)
    return SpectrumGrid(signal, _axis_from_values(data[:, 0], offset, "omega"),
                        None, t_wait, values, meta)


def _load_json(path: Path) -> SpectrumGrid:
    doc = json.loads(path.read_text())
    meta = doc.get("metadata", {})

    def axis(rec, label):
        if rec is None:
            return None
        return Axis(rec["start"], rec["stop"], rec["count"], rec.get("offset", 0.0), label)

    ax1 = axis(doc["axis1"], doc["axis1"].get("label", "omega"))
    ax2 = axis(doc.get("axis2"), "omega3") if doc.get("axis2") else None
    values = np.array(doc["values_re"]) + 1j * np.array(doc["values_im"])
    return SpectrumGrid(doc.get("signal", "unknown"), ax1, ax2,
                        doc.get("t_wait"), values, meta)


def grid_peak_report(grid: SpectrumGrid, min_rel_height: float = 0.01) -> list[dict]:
    """Peak list of a loaded grid, sorted by height, as plain dicts."""
    omega_v = grid.metadata.get("omega_v")
    if grid.axis2 is None:
        found = find_peaks_1d(grid.axis1.values(), grid.display(), min_rel_height)
        return [
            {"omega": p.position, "refined": p.refined_position,
             "height": p.height, "classification": p.classification}
            for p in found
        ]
    found = find_peaks_2d(grid.axis1.values(), grid.axis2.values(), grid.display(),
                          omega_v=omega_v, min_rel_height=min_rel_height)
    return [
        {"omega1": p.position[0], "omega3": p.position[1],
         "refined1": p.refined_position[0], "refined3": p.refined_position[1],
         "height": p.height, "classification": p.classification, "k": p.k_tag}
        for p in found
    ]
