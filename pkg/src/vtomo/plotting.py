"""Raster output (binary PGM/PPM) and matplotlib report figures.

Gray levels use the affine map ``round(255 * (v - min) / (max - min))``;
a constant array maps to 0.  Image rows follow the first array axis, so a
field ``values[i, j]`` appears with ``x`` running down and ``y`` across.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import FieldIOError  # noqa: E402

PARAMS = {
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "image.cmap": "RdBu_r",
}


def gray_levels(values: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    lo = float(v.min()) if vmin is None else vmin
    hi = float(v.max()) if vmax is None else vmax
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    g = np.rint(255.0 * (np.clip(v, lo, hi) - lo) / (hi - lo))
    return g.astype(np.uint8)


def _write(path: Path, data: bytes) -> None:
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc


def write_pgm(values: np.ndarray, path) -> dict:
    """Binary P5 image of a 2-D array plus a ``.json`` sidecar with the min/max."""
    path = Path(path)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    rows, cols = v.shape
    _write(path, f"P5\n{cols} {rows}\n255\n".encode("ascii") + gray_levels(v).tobytes())
    meta = {"format": "P5", "width": cols, "height": rows, "min": float(v.min()), "max": float(v.max()),
            "map": "round(255*(v-min)/(max-min))"}
    _write(path.with_suffix(path.suffix + ".json"), json.dumps(meta, indent=2).encode("utf-8"))
    return meta


def write_ppm(channels: np.ndarray, path) -> dict:
    """Binary P6 image from up to three channels sharing one min/max; missing channels are 0."""
    path = Path(path)
    c = np.asarray(channels, dtype=np.float64)
    if c.ndim != 3 or not 1 <= c.shape[0] <= 3:
        raise ValueError("PPM needs 1 to 3 channels of equal 2-D shape")
    lo, hi = float(c.min()), float(c.max())
    rgb = np.zeros(c.shape[1:] + (3,), dtype=np.uint8)
    for k in range(c.shape[0]):
        rgb[..., k] = gray_levels(c[k], lo, hi)
    rows, cols = c.shape[1:]
    _write(path, f"P6\n{cols} {rows}\n255\n".encode("ascii") + rgb.tobytes())
    meta = {"format": "P6", "width": cols, "height": rows, "min": lo, "max": hi, "channels": c.shape[0],
            "map": "round(255*(v-min)/(max-min)) per channel, shared min/max"}
    _write(path.with_suffix(path.suffix + ".json"), json.dumps(meta, indent=2).encode("utf-8"))
    return meta


def read_pnm(path) -> np.ndarray:
    """Read back a P5/P6 file written by this module (no comments in the header)."""
    buf = Path(path).read_bytes()
    magic, dims, maxval, rest = buf.split(b"\n", 3)
    cols, rows = (int(t) for t in dims.split())
    if magic == b"P5":
        return np.frombuffer(rest, dtype=np.uint8).reshape(rows, cols)
    return np.frombuffer(rest, dtype=np.uint8).reshape(rows, cols, 3)


def _symmetric(ax, img, extent, title):
    vmax = float(np.abs(img).max()) or 1.0
    im = ax.imshow(img.T, origin="lower", extent=extent, vmin=-vmax, vmax=vmax, aspect="auto")
    ax.set_title(title)
    plt.colorbar(im, ax=ax, fraction=0.046, pad=0.04)


def field_figure(data: np.ndarray, domain, path, titles=None) -> Path:
    """One panel per component; ``data`` has shape ``(components, N, N)``."""
    data = np.asarray(data)
    titles = titles or [f"component {k + 1}" for k in range(data.shape[0])]
    extent = [domain[0][0], domain[0][1], domain[1][0], domain[1][1]]
    with plt.rc_context(PARAMS):
        fig, axes = plt.subplots(1, data.shape[0], figsize=(3.2 * data.shape[0], 2.8), squeeze=False)
        for ax, img, t in zip(axes[0], data, titles):
            _symmetric(ax, img, extent, t)
            ax.set_xlabel("$x_1$")
            ax.set_ylabel("$x_2$")
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def sinogram_figure(values: np.ndarray, s_max: float, path, mask: np.ndarray | None = None, title: str = "") -> Path:
    extent = [0.0, 360.0, -s_max, s_max]
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        _symmetric(ax, np.asarray(values), extent, title)
        if mask is not None and not mask.all():
            ax.contour(np.asarray(mask, dtype=float).T, levels=[0.5], colors="k", linewidths=0.6,
                       extent=extent, origin="lower")
        ax.set_xlabel("angle [deg]")
        ax.set_ylabel("offset $s$")
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def metrics_figure(report: dict, path) -> Path:
    """Metric values against tolerances on a log axis; failing metrics are drawn in red."""
    metrics = report["metrics"]
    labels = [m["label"] for m in metrics]
    vals = [max(abs(m["value"]), 1e-17) for m in metrics]
    tols = [m["tol"] for m in metrics]
    colors = ["tab:blue" if m["pass"] else "tab:red" for m in metrics]
    y = np.arange(len(metrics))
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots(figsize=(5.0, 0.35 * len(metrics) + 1.0))
        ax.barh(y, vals, color=colors)
        ax.scatter(tols, y, marker="|", s=200, color="k", label="tolerance")
        ax.set_xscale("log")
        ax.set_yticks(y, labels)
        ax.invert_yaxis()
        ax.set_title(f"{report['name']}: {'PASS' if report['pass'] else 'FAIL'}")
        ax.legend(loc="lower right")
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
