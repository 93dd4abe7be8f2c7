"""Image patches, dataset loaders, and the classical distance references.

Pixels are stored as a float64 array of shape ``(3, height, width)``
(channel-major: R, G, B), which is also the flattening order used when
images are interleaved and embedded.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CIFAR_RECORD = 3073
CIFAR_SIDE = 32

CACHE_MAGIC = b"QUSLDS01"
_CACHE_HEADER = struct.Struct("<8sIHH")


class ImageFormatError(ValueError):
    """Raised for malformed or unsupported image/dataset files."""


class DimensionError(ValueError):
    """Raised when two operands do not have compatible shapes."""


@dataclass(frozen=True, eq=False)
class ImagePatch:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[0] != 3:
            raise DimensionError(f"expected pixels of shape (3, h, w), got {px.shape}")
        if px.shape[1] == 0 or px.shape[2] == 0:
            raise DimensionError("patch must have positive width and height")
        if px.size and (px.min() < 0.0 or px.max() > 255.0):
            raise ValueError("pixel intensities must lie in [0, 255]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, ImagePatch):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ColorHistogram:
    bins_per_channel: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (3 * self.bins_per_channel,):
            raise DimensionError(
                f"histogram needs {3 * self.bins_per_channel} values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def channel(self, c: int) -> np.ndarray:
        b = self.bins_per_channel
        return self.values[c * b:(c + 1) * b]


# -- loaders -----------------------------------------------------------------

def load_cifar_binary(path) -> list[ImagePatch]:
    """Read a CIFAR-10 binary batch. Label bytes are dropped."""
    data = Path(path).read_bytes()
    if len(data) % CIFAR_RECORD:
        whole = len(data) // CIFAR_RECORD
        raise ImageFormatError(
            f"{path}: truncated CIFAR record at byte offset {whole * CIFAR_RECORD} "
            f"(file length {len(data)} is not a multiple of {CIFAR_RECORD})")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    pixels = raw[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).astype(np.float64)
    return [ImagePatch(p) for p in pixels]


def encode_cifar_record(patch: ImagePatch, label: int = 0) -> bytes:
    if patch.shape != (3, CIFAR_SIDE, CIFAR_SIDE):
        raise DimensionError(f"CIFAR records are 32x32x3, got {patch.shape}")
    px = patch.pixels
    if not np.array_equal(px, np.round(px)):
        raise ValueError("CIFAR records hold integer intensities only")
    return bytes([label]) + px.astype(np.uint8).tobytes()


def _ppm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("unexpected end of PPM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_ppm(data: bytes, name: str = "<bytes>") -> ImagePatch:
    tokens, offset = _ppm_tokens(data, 4)
    if tokens[0] != b"P6":
        raise ImageFormatError(f"{name}: unsupported PPM magic {tokens[0]!r} (only P6)")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError(f"{name}: malformed PPM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{name}: unsupported maxval {maxval} (only 255)")
    need = w * h * 3
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise ImageFormatError(f"{name}: raster truncated ({len(raster)} of {need} bytes)")
    rgb = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return ImagePatch(np.transpose(rgb, (2, 0, 1)).astype(np.float64))


def encode_ppm(patch: ImagePatch) -> bytes:
    rgb = np.transpose(np.round(patch.pixels), (1, 2, 0)).astype(np.uint8)
    return f"P6\n{patch.width} {patch.height}\n255\n".encode() + rgb.tobytes()


def load_ppm_dir(path, patch_w: int, patch_h: int) -> list[ImagePatch]:
    """Decode every ``*.ppm`` file under ``path`` (sorted by name) and resize."""
    root = Path(path)
    patches = []
    for name in sorted(os.listdir(root)):
        if not name.lower().endswith(".ppm"):
            continue
        f = root / name
        try:
            data = f.read_bytes()
        except OSError as exc:
            raise OSError(f"cannot read {f}: {exc}") from exc
        patches.append(resize(decode_ppm(data, str(f)), patch_w, patch_h))
    return patches


# -- dataset cache ------------------------------------------------------------

def write_cache(path, patches: list[ImagePatch]) -> None:
    """Write the flat dataset cache (16-byte header, then float64 LE patches)."""
    if patches:
        h, w = patches[0].height, patches[0].width
    else:
        h = w = 0
    body = []
    for p in patches:
        if (p.height, p.width) != (h, w):
            raise DimensionError("all cached patches must share one size")
        body.append(p.pixels.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, len(patches), w, h))
        fh.write(b"".join(body))


def read_cache(path) -> list[ImagePatch]:
    data = Path(path).read_bytes()
    if len(data) < _CACHE_HEADER.size:
        raise ImageFormatError(f"{path}: too short for a dataset cache header")
    magic, count, w, h = _CACHE_HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise ImageFormatError(f"{path}: bad cache magic {magic!r}")
    per = 3 * w * h
    expected = _CACHE_HEADER.size + 8 * per * count
    if len(data) != expected:
        raise ImageFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype="<f8", offset=_CACHE_HEADER.size)
    return [ImagePatch(a) for a in arr.reshape(count, 3, h, w).astype(np.float64)]


# -- transforms ---------------------------------------------------------------

def _axis_weights(n_in: int, n_out: int):
    # align corners so that the endpoints map onto the endpoints
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.linspace(0.0, n_in - 1, n_out)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize(patch: ImagePatch, new_w: int, new_h: int) -> ImagePatch:
    """Bilinear resize per channel, clamped to [0, 255]."""
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be at least 1x1")
    if (new_w, new_h) == (patch.width, patch.height):
        return patch
    px = patch.pixels
    r0, r1, fr = _axis_weights(patch.height, new_h)
    c0, c1, fc = _axis_weights(patch.width, new_w)
    rows = px[:, r0, :] * (1 - fr)[None, :, None] + px[:, r1, :] * fr[None, :, None]
    out = rows[:, :, c0] * (1 - fc) + rows[:, :, c1] * fc
    return ImagePatch(np.clip(out, 0.0, 255.0))


def histogram(patch: ImagePatch, bins_per_channel: int = 16) -> ColorHistogram:
    if bins_per_channel < 1:
        raise ValueError("bins_per_channel must be >= 1")
    idx = np.floor(patch.pixels * bins_per_channel / 256.0).astype(int)
    idx = np.clip(idx, 0, bins_per_channel - 1)
    n = patch.width * patch.height
    values = np.concatenate([
        np.bincount(idx[c].ravel(), minlength=bins_per_channel) / n for c in range(3)
    ])
    return ColorHistogram(bins_per_channel, values)


def euclidean_distance_hist(h1: ColorHistogram, h2: ColorHistogram) -> float:
    if h1.bins_per_channel != h2.bins_per_channel:
        raise DimensionError(
            f"histograms differ in bins ({h1.bins_per_channel} vs {h2.bins_per_channel})")
    d = h1.values - h2.values
    return float(np.sqrt(np.dot(d, d)))


def euclidean_distance_pixels(p1: ImagePatch, p2: ImagePatch) -> float:
    # sum of squares over all channels; see README on the per-pixel formula
    if p1.shape != p2.shape:
        raise DimensionError(f"patch shapes differ: {p1.shape} vs {p2.shape}")
    d = (p1.pixels - p2.pixels).ravel()
    return float(np.sqrt(np.dot(d, d)))


def patch_distance(p1: ImagePatch, p2: ImagePatch, mode: str = "hist",
                   bins_per_channel: int = 16) -> float:
    """Reference distance used for correlation; ``mode`` is ``hist`` or ``pixels``."""
    if mode == "hist":
        return euclidean_distance_hist(histogram(p1, bins_per_channel),
                                       histogram(p2, bins_per_channel))
    if mode == "pixels":
        return euclidean_distance_pixels(p1, p2)
    raise ValueError(f"unknown distance mode {mode!r}")


def synthetic_patches(n: int, size: int, rng: np.random.Generator,
                      n_clusters: int = 4) -> list[ImagePatch]:
    """Structured synthetic images: a few colour families with smooth gradients.

    Each patch is a cluster base colour plus a random linear gradient and a
    small amount of pixel noise, so pairwise distances span a wide range
    (near-duplicates within a family, large gaps across families).
    """
    bases = rng.uniform(30, 225, size=(n_clusters, 3))
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1) - 0.5
    out = []
    for _ in range(n):
        k = rng.integers(n_clusters)
        color = bases[k] + rng.normal(0, 12, 3)
        grad = rng.normal(0, 25, size=(3, 2))
        img = (color[:, None, None]
               + grad[:, 0, None, None] * yy
               + grad[:, 1, None, None] * xx
               + rng.normal(0, 6, size=(3, size, size)))
        out.append(ImagePatch(np.clip(img, 0.0, 255.0)))
    return out
