"""File outputs: stretched 8-bit images, CSV tables, JSON documents and figures.

Images are linearly stretched to [0, 255] per file. The sidecar JSON next to
each image records the stretch, so value = offset + scale * pixel recovers
the data to within half a grey level.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

SCHEMA_VERSION = "1.0"


class OutputError(OSError):
    pass


def ensure_dir(path: str | Path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {p}: {exc}") from exc
    if not p.is_dir():
        raise OutputError(f"{p} is not a directory")
    probe = p / ".write-probe"
    try:
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {p} is not writable: {exc}") from exc
    return p


def stretch(values: np.ndarray, lo: float | None = None, hi: float | None = None) -> tuple[np.ndarray, dict]:
    """Linear map of [lo, hi] onto 0..255; defaults to the data range."""
    v = np.asarray(values, dtype=float)
    lo = float(v.min()) if lo is None else float(lo)
    hi = float(v.max()) if hi is None else float(hi)
    scale = (hi - lo) / 255.0 if hi > lo else 0.0
    if scale > 0:
        pix = np.clip(np.rint((v - lo) / scale), 0, 255).astype(np.uint8)
    else:
        pix = np.zeros(v.shape, dtype=np.uint8)
    return pix, {"offset": lo, "scale": scale, "min": float(v.min()), "max": float(v.max())}


def write_image(stem: str | Path, values: np.ndarray, lo: float | None = None, hi: float | None = None,
                description: str = "") -> list[Path]:
    """Write stem.pgm, stem.png and the stretch sidecar stem.json.

    Row 0 of the image is the first array axis, column 0 the second.
    """
    stem = Path(stem)
    pix, params = stretch(values, lo, hi)
    img = Image.fromarray(pix)  # uint8 2-D arrays map to mode "L"
    pgm, png, side = stem.with_suffix(".pgm"), stem.with_suffix(".png"), stem.with_suffix(".json")
    img.save(pgm, format="PPM")
    img.save(png, format="PNG")
    doc = {"schema_version": SCHEMA_VERSION, "image": stem.name, "shape": list(pix.shape),
           "mapping": "value = offset + scale * pixel", **params}
    if description:
        doc["description"] = description
    write_json(side, doc)
    return [pgm, png, side]


def read_image(stem: str | Path) -> np.ndarray:
    """Inverse of write_image up to quantisation, using the sidecar."""
    stem = Path(stem)
    pix = np.asarray(Image.open(stem.with_suffix(".png")), dtype=float)
    side = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    return side["offset"] + side["scale"] * pix


def log_magnitude(spectrum: np.ndarray) -> np.ndarray:
    """Centred log10(1 + |F|) for display."""
    return np.fft.fftshift(np.log10(1.0 + np.abs(spectrum)))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return v


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """UTF-8, LF line endings, fixed header."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    body = _jsonable(doc)
    if "schema_version" not in body:
        body = {"schema_version": SCHEMA_VERSION, **body}
    path.write_text(json.dumps(body, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# figures


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def separation_figure(path: str | Path, f: np.ndarray, P: np.ndarray, C: np.ndarray,
                      title: str = "") -> Path:
    """Input, point part and curve part side by side on a shared colour scale.

    The scale is clipped at the 99.5th percentile of |input| so that point
    peaks do not wash out the curve.
    """
    lim = float(max(np.percentile(np.abs(f), 99.5), 1e-300))
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.8))
    for ax, img, name in zip(axes, (f, P, C), ("input", "point part", "curve part")):
        ax.imshow(img, cmap="gray", vmin=-lim, vmax=lim, origin="upper")
        ax.set_title(name)
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title)
    return _save(fig, Path(path))


def overlay_figure(path: str | Path, field: np.ndarray, point_centres: np.ndarray,
                   curve_centres: np.ndarray, title: str = "") -> Path:
    """Cluster member centres (torus coordinates) on top of the phantom.

    Empty centre arrays are allowed and simply draw nothing.
    """
    n = field.shape[0]
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.imshow(field, cmap="gray", origin="upper", extent=(0, 1, 1, 0))
    pc = np.asarray(point_centres, dtype=float).reshape(-1, 2)
    cc = np.asarray(curve_centres, dtype=float).reshape(-1, 2)
    # first coordinate indexes rows, so it is plotted on the vertical axis
    if cc.size:
        ax.scatter(cc[:, 1], cc[:, 0], s=2, c="tab:orange", label=f"curvelet cluster ({len(cc)})")
    if pc.size:
        ax.scatter(pc[:, 1], pc[:, 0], s=4, c="tab:blue", label=f"wavelet cluster ({len(pc)})")
    if pc.size or cc.size:
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlim(0, 1)
    ax.set_ylim(1, 0)
    ax.set_title(title or f"{n}x{n}")
    return _save(fig, Path(path))


def decay_figure(path: str | Path, js: Sequence[int], series: dict[str, Sequence[float]],
                 title: str = "") -> Path:
    """log2 of each series against scale j."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in series.items():
        v = np.asarray([np.nan if x is None else x for x in vals], dtype=float)
        ok = np.isfinite(v) & (v > 0)
        if ok.any():
            ax.plot(np.asarray(js)[ok], np.log2(v[ok]), "o-", label=name)
    ax.set_xlabel("scale j")
    ax.set_ylabel("log2 value")
    ax.grid(alpha=0.3)
    if ax.lines:
        ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, Path(path))
