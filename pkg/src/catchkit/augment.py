"""Dataset-reduction metrics and underwater capture simulation.

Similarity side: raw sum of squared differences (``ssd``), its per-pixel
normalization (``mse``), windowed structural similarity (``ssim``), a
patch-grid distance (``patch_distance``) and a greedy near-duplicate filter
(``dedup``).

Augmentation side: equidistant fisheye remap, contrast scaling about the
channel mean, seeded additive Gaussian noise and directional 1D motion blur.
All operations are pure: same inputs (including seed) give bit-identical
outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from catchkit.images import ImageBuffer, require_same_shape

# Structural-similarity stabilizers for 8-bit data. The window is square,
# non-overlapping; trailing partial windows are included and weighted like
# full ones. Variances are population (ddof=0).
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2
DEFAULT_SSIM_WINDOW = 8


@dataclass(frozen=True)
class BlurKernel:
    """1D blur kernel: tap count, direction (radians from +x) and weights."""

    length: int
    direction: float
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"kernel length must be >= 1, got {self.length}")
        if len(self.weights) != self.length:
            raise ValueError(
                f"{self.length} taps but {len(self.weights)} weights"
            )
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 within 1e-9, got {total}")

    @classmethod
    def box(cls, length: int, direction: float = 0.0) -> "BlurKernel":
        """Uniform weights, the default simulated-motion kernel."""
        return cls(length, direction, (1.0 / length,) * length)


@dataclass(frozen=True)
class FisheyeParams:
    """Equidistant lens model r = f * theta, center in pixel coordinates."""

    focal_px: float
    center: tuple[float, float]

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")


@dataclass(frozen=True)
class DedupConfig:
    patch_size: int = 16
    ssd_threshold: float = 300.0  # per-pixel normalized (mse-scale)
    ssim_threshold: float = 0.9

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.ssd_threshold < 0:
            raise ValueError("ssd_threshold must be >= 0")
        if not 0.0 <= self.ssim_threshold <= 1.0:
            raise ValueError("ssim_threshold must be in [0, 1]")


def ssd(a: ImageBuffer, b: ImageBuffer) -> float:
    """Unnormalized sum of squared per-pixel differences over all channels."""
    require_same_shape(a, b)
    da = a.pixels.astype(np.int64)
    db = b.pixels.astype(np.int64)
    return float(np.sum((da - db) ** 2))


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    """ssd normalized by pixel count * channels (resolution independent)."""
    return ssd(a, b) / (a.width * a.height * a.channels)


def _window_grid(h: int, w: int, size: int):
    for y0 in range(0, h, size):
        for x0 in range(0, w, size):
            yield y0, min(y0 + size, h), x0, min(x0 + size, w)


def ssim(a: ImageBuffer, b: ImageBuffer, window: int = DEFAULT_SSIM_WINDOW) -> float:
    """Mean of per-window SSIM values, windows taken over all channels jointly.

    ssim(a, a) == 1.0 exactly; the result lies in [-1, 1].
    """
    require_same_shape(a, b)
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > min(a.width, a.height):
        raise ValueError(
            f"window {window} exceeds image extent {a.width}x{a.height}"
        )
    da = a.pixels.astype(np.float64)
    db = b.pixels.astype(np.float64)
    h, w = a.height, a.width

    values = []
    for y0, y1, x0, x1 in _window_grid(h, w, window):
        wa = da[y0:y1, x0:x1].ravel()
        wb = db[y0:y1, x0:x1].ravel()
        mu_a = wa.mean()
        mu_b = wb.mean()
        var_a = wa.var()
        var_b = wb.var()
        cov = ((wa - mu_a) * (wb - mu_b)).mean()
        num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
        values.append(num / den)
    return float(np.mean(values))


def patch_distance(a: ImageBuffer, b: ImageBuffer, cfg: DedupConfig) -> float:
    """Mean over the patch grid of per-patch normalized ssd (lower = closer).

    Trailing partial patches are included, each normalized by its true
    pixel count, so a one-patch grid degenerates to mse(a, b).
    """
    require_same_shape(a, b)
    da = a.pixels.astype(np.int64)
    db = b.pixels.astype(np.int64)
    sq = (da - db) ** 2
    c = a.channels

    totals = []
    for y0, y1, x0, x1 in _window_grid(a.height, a.width, cfg.patch_size):
        block = sq[y0:y1, x0:x1]
        totals.append(block.sum() / ((y1 - y0) * (x1 - x0) * c))
    return float(np.mean(totals))


def is_duplicate(a: ImageBuffer, b: ImageBuffer, cfg: DedupConfig) -> bool:
    """Duplicate when either metric crosses its threshold (OR rule)."""
    if patch_distance(a, b, cfg) <= cfg.ssd_threshold:
        return True
    window = min(DEFAULT_SSIM_WINDOW, a.width, a.height)
    return ssim(a, b, window) >= cfg.ssim_threshold


def dedup(corpus: list[ImageBuffer], cfg: DedupConfig | None = None) -> list[int]:
    """Greedy scan in input order; keep an image only if it duplicates no
    already-kept image. The first image is always kept; indices ascend.
    """
    kept, _ = dedup_detailed(corpus, cfg)
    return kept


def dedup_detailed(
    corpus: list[ImageBuffer], cfg: DedupConfig | None = None
) -> tuple[list[int], list[dict]]:
    """dedup plus, for each dropped index, the kept index it matched and the
    pair's scores (for the CLI manifest)."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if cfg is None:
        cfg = DedupConfig()
    for i, img in enumerate(corpus[1:], start=1):
        require_same_shape(corpus[0], img)

    window = min(DEFAULT_SSIM_WINDOW, corpus[0].width, corpus[0].height)
    kept: list[int] = []
    drops: list[dict] = []
    for j, candidate in enumerate(corpus):
        match = None
        for i in kept:
            pd = patch_distance(corpus[i], candidate, cfg)
            if pd <= cfg.ssd_threshold:
                match = {"index": j, "duplicate_of": i, "patch_mse": pd,
                         "ssim": ssim(corpus[i], candidate, window)}
                break
            sv = ssim(corpus[i], candidate, window)
            if sv >= cfg.ssim_threshold:
                match = {"index": j, "duplicate_of": i, "patch_mse": pd, "ssim": sv}
                break
        if match is None:
            kept.append(j)
        else:
            drops.append(match)
    return kept, drops


def _bilinear(flat: np.ndarray, h: int, w: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (h, w, c) float pixels at fractional coords already inside
    [0, w-1] x [0, h-1]. Returns (n, c)."""
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.clip(x0, 0, w - 2) if w > 1 else np.zeros_like(x0)
    y0 = np.clip(y0, 0, h - 2) if h > 1 else np.zeros_like(y0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    p00 = flat[y0 * w + x0]
    p01 = flat[y0 * w + x1]
    p10 = flat[y1 * w + x0]
    p11 = flat[y1 * w + x1]
    top = p00 * (1 - fx) + p01 * fx
    bot = p10 * (1 - fx) + p11 * fx
    return top * (1 - fy) + bot * fy


def fisheye_transform(img: ImageBuffer, p: FisheyeParams) -> ImageBuffer:
    """Equidistant remap: an output pixel at radius r from the center samples
    the source at radius f*tan(r/f) along the same polar angle.

    Sources outside the frame (or past the 90 degree view limit) are black.
    The center pixel is a fixed point for every focal length.
    """
    h, w, c = img.height, img.width, img.channels
    cx, cy = p.center
    if not (0 <= cx < w and 0 <= cy < h):
        raise ValueError(f"center {p.center} outside image bounds {w}x{h}")

    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs.astype(np.float64).ravel() - cx
    dy = ys.astype(np.float64).ravel() - cy
    r_out = np.hypot(dx, dy)
    theta = r_out / p.focal_px

    valid = theta < (math.pi / 2.0)
    r_src = np.zeros_like(r_out)
    r_src[valid] = p.focal_px * np.tan(theta[valid])
    # scale = r_src / r_out, with the center (r_out == 0) staying put
    scale = np.ones_like(r_out)
    nonzero = r_out > 0
    scale[nonzero] = r_src[nonzero] / r_out[nonzero]

    src_x = cx + dx * scale
    src_y = cy + dy * scale
    inside = valid & (src_x >= 0) & (src_x <= w - 1) & (src_y >= 0) & (src_y <= h - 1)

    flat = img.pixels.reshape(-1, c).astype(np.float64)
    out = np.zeros((h * w, c), dtype=np.float64)
    if inside.any():
        out[inside] = _bilinear(flat, h, w, src_x[inside], src_y[inside])
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return ImageBuffer(out.reshape(h, w, c))


def contrast_adjust(img: ImageBuffer, factor: float) -> ImageBuffer:
    """out = clamp(mean + factor * (in - mean)) with a per-channel mean.

    factor < 1 washes the image toward its mean, simulating the contrast
    loss of deeper water; factor = 1 is the identity.
    """
    if factor < 0:
        raise ValueError(f"factor must be >= 0, got {factor}")
    px = img.pixels.astype(np.float64)
    mean = px.mean(axis=(0, 1), keepdims=True)
    out = mean + factor * (px - mean)
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return ImageBuffer(out)


def scatter_noise(img: ImageBuffer, intensity: float, seed: int) -> ImageBuffer:
    """Zero-mean Gaussian noise with sigma = intensity (8-bit levels).

    Deterministic for a given seed; intensity 0 is the identity.
    """
    if intensity < 0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    if intensity == 0:
        return img
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, intensity, size=img.pixels.shape)
    out = np.clip(np.rint(img.pixels.astype(np.float64) + noise), 0, 255)
    return ImageBuffer(out.astype(np.uint8))


def motion_blur(img: ImageBuffer, k: BlurKernel) -> ImageBuffer:
    """1D convolution along k.direction with symmetric tap offsets, bilinear
    sampling for oblique directions and edge-clamp boundary handling."""
    h, w, c = img.height, img.width, img.channels
    if k.length == 1:
        return img

    dx = math.cos(k.direction)
    dy = math.sin(k.direction)
    half = (k.length - 1) / 2.0

    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs.astype(np.float64).ravel()
    ys = ys.astype(np.float64).ravel()
    flat = img.pixels.reshape(-1, c).astype(np.float64)

    acc = np.zeros((h * w, c), dtype=np.float64)
    for tap, weight in enumerate(k.weights):
        u = tap - half
        sx = np.clip(xs - u * dx, 0.0, w - 1.0)
        sy = np.clip(ys - u * dy, 0.0, h - 1.0)
        acc += weight * _bilinear(flat, h, w, sx, sy)
    out = np.clip(np.rint(acc), 0, 255).astype(np.uint8)
    return ImageBuffer(out.reshape(h, w, c))


def make_dedup_corpus(
    uniques: int = 20,
    variants: int = 6,
    size: int = 128,
    noise_sigma: float = 6.0,
    seed: int = 0,
) -> list[ImageBuffer]:
    """Synthetic near-duplicate corpus: each unique blocky pattern is followed
    by noisy copies of itself. uniques=20, variants=6 gives the 140-image
    corpus the reduction target is measured on."""
    rng = np.random.default_rng(seed)
    corpus: list[ImageBuffer] = []
    cells = 8
    idx = np.arange(size) * cells // size  # nearest-cell upsample, any size
    for _ in range(uniques):
        lowres = rng.integers(0, 256, size=(cells, cells), dtype=np.uint8)
        base = lowres[idx[:, None], idx[None, :]]
        base_img = ImageBuffer(base)
        corpus.append(base_img)
        for _ in range(variants):
            noise = rng.normal(0.0, noise_sigma, size=base.shape)
            noisy = np.clip(np.rint(base.astype(np.float64) + noise), 0, 255)
            corpus.append(ImageBuffer(noisy.astype(np.uint8)))
    return corpus
