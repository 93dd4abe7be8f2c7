"""Anchor/positive/negative triplets, pair interleaving, and amplitude embedding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .imaging import DimensionError, ImagePatch, resize

# Orientation of the anchor/negative pair when it is interleaved.
NEGATIVE_FIRST = "negative_first"
ANCHOR_FIRST = "anchor_first"
PAIR_ORIENTATIONS = (NEGATIVE_FIRST, ANCHOR_FIRST)


class EmbeddingError(ValueError):
    """Raised when a vector cannot be amplitude-embedded."""


@dataclass(frozen=True)
class PerturbationConfig:
    sigma: float = 5.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Triplet:
    anchor: ImagePatch
    positive: ImagePatch
    negative: ImagePatch

    def __post_init__(self):
        if not (self.anchor.shape == self.positive.shape == self.negative.shape):
            raise DimensionError("triplet members must share dimensions")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    amplitudes: np.ndarray
    q: int
    payload_len: int

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.q,):
            raise DimensionError("amplitude vector length must be 2**q")


def perturb(anchor: ImagePatch, cfg: PerturbationConfig,
            rng: Optional[np.random.Generator] = None) -> ImagePatch:
    """Add i.i.d. N(0, sigma^2) noise to every intensity, clamped to [0, 255].

    Without an explicit ``rng`` the stream is seeded from ``cfg.rng_seed``.
    """
    if cfg.sigma == 0:
        return anchor
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    noisy = anchor.pixels + rng.normal(0.0, cfg.sigma, size=anchor.shape)
    return ImagePatch(np.clip(noisy, 0.0, 255.0))


def build_triplet(dataset: list[ImagePatch], anchor_idx: int, cfg: PerturbationConfig,
                  rng: np.random.Generator) -> Triplet:
    triplet, _ = build_triplet_indexed(dataset, anchor_idx, cfg, rng)
    return triplet


def build_triplet_indexed(dataset, anchor_idx, cfg, rng) -> tuple[Triplet, int]:
    """Like :func:`build_triplet` but also returns the negative's index."""
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least two images to pick a distinct negative")
    if not 0 <= anchor_idx < n:
        raise IndexError(f"anchor index {anchor_idx} out of range for {n} images")
    anchor = dataset[anchor_idx]
    positive = perturb(anchor, cfg, rng)
    neg = int(rng.integers(n - 1))
    if neg >= anchor_idx:
        neg += 1
    return Triplet(anchor, positive, dataset[neg]), neg


def sample_triplets(dataset, count: int, cfg: PerturbationConfig,
                    rng: np.random.Generator) -> tuple[list[Triplet], list[tuple[int, int]]]:
    """Draw ``count`` triplets with uniformly random anchors.

    Returns the triplets and their ``(anchor, negative)`` dataset indices.
    """
    triplets, index = [], []
    for _ in range(count):
        a = int(rng.integers(len(dataset)))
        t, neg = build_triplet_indexed(dataset, a, cfg, rng)
        triplets.append(t)
        index.append((a, neg))
    return triplets, index


def interweave(first: ImagePatch, second: ImagePatch) -> np.ndarray:
    """Alternate the channel-major flattenings: first at even, second at odd slots."""
    if first.shape != second.shape:
        raise DimensionError(f"cannot interweave {first.shape} with {second.shape}")
    out = np.empty(2 * first.pixels.size)
    out[0::2] = first.flat()
    out[1::2] = second.flat()
    return out


def embed(raw, q: int) -> EmbeddingVector:
    raw = np.asarray(raw, dtype=np.float64).ravel()
    cap = 1 << q
    if raw.size > cap:
        raise EmbeddingError(f"payload of length {raw.size} exceeds 2**{q} = {cap} amplitudes")
    scale = np.max(np.abs(raw)) if raw.size else 0.0
    if scale == 0:
        raise EmbeddingError("cannot normalise the all-zero vector")
    # rescale first so squaring tiny or huge entries cannot under/overflow
    scaled = raw / scale
    amps = np.zeros(cap)
    amps[:raw.size] = scaled / np.linalg.norm(scaled)
    return EmbeddingVector(amps, q, raw.size)


def embed_pair(first: ImagePatch, second: ImagePatch, q: int) -> EmbeddingVector:
    return embed(interweave(first, second), q)


def max_square_side(q: int) -> int:
    """Largest M with 6*M*M <= 2**q."""
    m = math.isqrt((1 << q) // 6)
    while 6 * (m + 1) ** 2 <= 1 << q:
        m += 1
    while m > 0 and 6 * m * m > 1 << q:
        m -= 1
    return m


def fit_to_qubit_budget(patch: ImagePatch, q: int) -> ImagePatch:
    """Downsample a square patch so an interleaved pair fits in ``q`` qubits."""
    if q < 2:
        raise ValueError("need at least 2 qubits")
    if 2 * patch.pixels.size <= 1 << q:
        return patch
    m = max_square_side(q)
    if m < 1:
        raise EmbeddingError(f"{q} qubits cannot hold even a 1x1 pair")
    return resize(patch, m, m)
