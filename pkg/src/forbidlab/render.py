"""Field images: binary PPM with a diverging palette, SVG nodal overlays."""
from __future__ import annotations

from pathlib import Path

import numpy as np

WHITE_BAND = 0.02


def diverging_rgb(field, white_band: float = WHITE_BAND) -> np.ndarray:
    """Blue for negative, red for positive, white where |u| <= band * max|u|."""
    u = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("field has non-finite values")
    top = np.max(np.abs(u))
    rgb = np.full(u.shape + (3,), 255, dtype=np.uint8)
    if top == 0:
        return rgb
    a = u / top
    mag = np.clip((np.abs(a) - white_band) / (1 - white_band), 0.0, 1.0)
    fade = np.round(255 * (1 - mag) ** 0.8).astype(np.uint8)
    pos, neg = a > white_band, a < -white_band
    rgb[pos, 1] = fade[pos]
    rgb[pos, 2] = fade[pos]
    rgb[neg, 0] = fade[neg]
    rgb[neg, 1] = fade[neg]
    return rgb


def _image_rows(rgb):
    # field index i is x, j is y; images have y increasing upwards
    return np.ascontiguousarray(np.transpose(rgb, (1, 0, 2))[::-1])


def write_ppm(path, rgb):
    img = _image_rows(rgb)
    h, w = img.shape[:2]
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path):
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
    return np.transpose(img[::-1], (1, 0, 2))


def write_svg(path, rgb, domain, polylines=(), scale=2):
    """Raster as embedded rects per row run plus nodal polylines in black."""
    img = _image_rows(rgb)
    h, w = img.shape[:2]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale}" height="{h * scale}" '
           f'viewBox="0 0 {w} {h}" shape-rendering="crispEdges">']
    for r in range(h):
        row = img[r]
        c = 0
        while c < w:
            e = c
            while e + 1 < w and np.array_equal(row[e + 1], row[c]):
                e += 1
            col = "#%02x%02x%02x" % tuple(int(v) for v in row[c])
            if col != "#ffffff":
                out.append(f'<rect x="{c}" y="{r}" width="{e - c + 1}" height="1" fill="{col}"/>')
            c = e + 1
    x0, dx = domain.x0, domain.dx
    for line in polylines:
        pts = " ".join(f"{(p[0] - x0) / dx + 0.5:.3f},{h - ((p[1] - x0) / dx + 0.5):.3f}" for p in line)
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="0.6"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def render_field(field, path, domain=None, nodal=None, white_band: float = WHITE_BAND):
    """Write ``field`` to ``path`` (``.ppm`` or ``.svg``); returns the RGB array."""
    rgb = diverging_rgb(field, white_band)
    path = Path(path)
    if path.suffix == ".svg":
        if domain is None:
            raise ValueError("SVG output needs the domain for the overlay")
        write_svg(path, rgb, domain, nodal.polylines if nodal is not None else ())
    else:
        write_ppm(path, rgb)
    return rgb
