"""Procedural binary wheel rasters with controlled rotational symmetry.

A wheel is an outer rim annulus, a solid hub disk, and curved spokes
repeated n_sym times. Per-spoke angular offsets are drawn once from the
spec seed and repeated in every sector, so the pattern has exactly
n_sym-fold symmetry and no accidental higher order.
"""

import csv
import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .pgm import write_pgm

R_OUT = 0.95  # outer wheel radius as a fraction of the half image width
SUPERSAMPLE = 4


@dataclass(frozen=True)
class WheelSpec:
    n_sym: int
    spokes_per_sector: int
    spoke_width: float
    spoke_curvature: float
    hub_radius: float
    rim_thickness: float
    phase: float
    seed: int

    def validate(self):
        if not 4 <= self.n_sym <= 13:
            raise ValueError(f"n_sym out of range [4, 13]: {self.n_sym}")
        if self.spokes_per_sector < 0:
            raise ValueError(f"spokes_per_sector negative: {self.spokes_per_sector}")
        if not 0 < self.spoke_width < 1:
            raise ValueError(f"spoke_width out of range (0, 1): {self.spoke_width}")
        if not 0 < self.rim_thickness < 0.5:
            raise ValueError(f"rim_thickness out of range (0, 0.5): {self.rim_thickness}")
        if not 0 < self.hub_radius < 1 - self.rim_thickness:
            raise ValueError(
                f"hub_radius out of range (0, 1 - rim_thickness): {self.hub_radius}"
            )


@dataclass(frozen=True)
class WheelImage:
    width: int
    height: int
    pixels: np.ndarray  # uint8 {0,1}, 1 = material
    id: str


def _content_id(pixels):
    h = hashlib.sha256()
    h.update(f"{pixels.shape[0]}x{pixels.shape[1]}:".encode())
    h.update(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())
    return h.hexdigest()[:12]


def _as_image(pixels):
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    return WheelImage(px.shape[1], px.shape[0], px, _content_id(px))


def generate_wheel(spec, resolution=64):
    spec.validate()
    n = resolution * SUPERSAMPLE
    half = n / 2.0
    c = (np.arange(n) + 0.5 - half) / half  # normalized [-1, 1) sample centers
    x, y = np.meshgrid(c, c)
    d = np.hypot(x, y)
    ang = np.arctan2(y, x)

    r_hub = spec.hub_radius * R_OUT
    r_rim_in = (1.0 - spec.rim_thickness) * R_OUT
    fg = (d <= r_hub) | ((d >= r_rim_in) & (d <= R_OUT))

    if spec.spokes_per_sector > 0:
        rng = np.random.default_rng(spec.seed)
        offsets = rng.uniform(0.0, 2.0 * np.pi / spec.n_sym, size=spec.spokes_per_sector)
        half_w = spec.spoke_width * R_OUT / 2.0
        lo, hi = max(r_hub - half_w, 0.0), min(r_rim_in + half_w, R_OUT)
        band = (d >= lo) & (d <= hi)
        t = np.clip((d - r_hub) / max(r_rim_in - r_hub, 1e-9), 0.0, 1.0)
        sweep = spec.phase + spec.spoke_curvature * t
        for s in range(spec.n_sym):
            for off in offsets:
                center = sweep + 2.0 * np.pi * s / spec.n_sym + off
                delta = np.mod(ang - center + np.pi, 2.0 * np.pi) - np.pi
                fg |= band & (np.abs(delta) * np.maximum(d, 1e-9) <= half_w)

    s = SUPERSAMPLE
    coverage = fg.reshape(resolution, s, resolution, s).mean(axis=(1, 3))
    return _as_image(coverage >= 0.5)


def rotate_image(pixels, angle_rad):
    """Nearest-neighbor rotation about the image center; exact for 90-degree steps."""
    h, w = pixels.shape
    rows = np.arange(h) + 0.5 - h / 2.0
    cols = np.arange(w) + 0.5 - w / 2.0
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    ca, sa = np.cos(angle_rad), np.sin(angle_rad)
    # inverse map: source position of each destination pixel
    sx = ca * xx + sa * yy
    sy = -sa * xx + ca * yy
    ci = np.rint(sx - 0.5 + w / 2.0).astype(int)
    ri = np.rint(sy - 0.5 + h / 2.0).astype(int)
    inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
    out = np.zeros_like(pixels)
    out[inside] = pixels[ri[inside], ci[inside]]
    return out


def rotate_augment(img, k):
    if k < 1:
        raise ValueError(f"rotate_augment: k must be >= 1, got {k}")
    out = [img]
    for i in range(1, k):
        out.append(_as_image(rotate_image(img.pixels, 2.0 * np.pi * i / k)))
    return out


MANIFEST_FIELDS = ["id", "path", "n_sym", "spokes_per_sector", "spoke_width",
                   "spoke_curvature", "hub_radius", "rim_thickness", "phase", "seed"]


def sample_spec(rng):
    # ranges keep spokes >= ~1.5 px at 64x64 so thin features stay connected
    return WheelSpec(
        n_sym=int(rng.integers(4, 14)),
        spokes_per_sector=int(rng.integers(1, 3)),
        spoke_width=float(rng.uniform(0.05, 0.12)),
        spoke_curvature=float(rng.uniform(-0.7, 0.7)),
        hub_radius=float(rng.uniform(0.12, 0.28)),
        rim_thickness=float(rng.uniform(0.06, 0.14)),
        phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        seed=int(rng.integers(0, 2**63)),
    )


def generate_dataset(n, seed, out_dir, resolution=64):
    """Write n wheel PGMs plus manifest.csv under out_dir; returns manifest rows."""
    if n < 1:
        raise ValueError(f"generate_dataset: n must be >= 1, got {n}")
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        spec = sample_spec(rng)
        img = generate_wheel(spec, resolution=resolution)
        rel = os.path.join("images", f"{img.id}.pgm")
        write_pgm(os.path.join(out_dir, rel), img.pixels)
        rows.append({
            "id": img.id, "path": rel, "n_sym": spec.n_sym,
            "spokes_per_sector": spec.spokes_per_sector,
            "spoke_width": repr(spec.spoke_width),
            "spoke_curvature": repr(spec.spoke_curvature),
            "hub_radius": repr(spec.hub_radius),
            "rim_thickness": repr(spec.rim_thickness),
            "phase": repr(spec.phase), "seed": spec.seed,
        })
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows


def load_manifest(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
