"""LBG vector quantizer over cepstral vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import DimensionMismatch, TooFewVectors, UsageError

SPLIT_EPS = 1e-3
KMEANS_REL_TOL = 1e-6
KMEANS_MAX_ITERS = 100


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray
    # per LBG stage, the mean squared-error distortion of every k-means pass
    distortion_history: Tuple[Tuple[float, ...], ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise UsageError(f"centroids must be a non-empty 2-D array, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise UsageError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def size(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]


def _as_matrix(features):
    if isinstance(features, np.ndarray):
        x = np.asarray(features, dtype=np.float64)
    else:
        rows = [np.asarray(f, dtype=np.float64).ravel() for f in features]
        if rows and len({r.size for r in rows}) > 1:
            raise DimensionMismatch("feature vectors have differing dimensions")
        x = np.vstack(rows) if rows else np.zeros((0, 0))
    if x.ndim == 1:
        x = x[None, :]
    return x


def squared_distances(x, centroids):
    # explicit differences keep exact ties exact; the expanded form does not
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans(x, centroids):
    history = []
    prev = None
    for _ in range(KMEANS_MAX_ITERS):
        d2 = squared_distances(x, centroids)
        assign = np.argmin(d2, axis=1)
        nearest = d2[np.arange(x.shape[0]), assign]
        distortion = float(nearest.mean())
        history.append(distortion)
        if prev is not None and (prev == 0.0 or (prev - distortion) / prev < KMEANS_REL_TOL):
            break
        prev = distortion

        new = centroids.copy()
        counts = np.bincount(assign, minlength=centroids.shape[0])
        for j in np.flatnonzero(counts):
            new[j] = x[assign == j].mean(axis=0)
        taken = set()
        for j in np.flatnonzero(counts == 0):
            # reseed from the point farthest from its own centroid
            far = np.sum((x - new[assign]) ** 2, axis=1)
            far[list(taken)] = -1.0
            i = int(np.argmax(far))
            taken.add(i)
            new[j] = x[i]
            assign[i] = j
        centroids = new
    return centroids, tuple(history)


def train_codebook(features, size=64, seed=0) -> Codebook:
    """LBG codebook training.

    Starts from the global mean and repeatedly splits centroids into
    ``c +/- eps * d`` (``d`` a seeded random unit direction), refining with
    k-means after each split until ``size`` centroids exist. When doubling
    would overshoot, only the cells with the largest distortion are split.

    Parameters
    ----------
    features : array_like, shape (n, dim) or sequence of vectors
    size : int
        Codebook size M, ``1 <= M <= n``.
    seed : int
        Seed for the split directions; training is deterministic given it.
    """
    x = _as_matrix(features)
    if size < 1:
        raise UsageError(f"codebook size must be >= 1, got {size}")
    if x.shape[0] < size:
        raise TooFewVectors(f"need at least {size} vectors, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise UsageError("features must be finite")

    rng = np.random.default_rng(seed)
    centroids = x.mean(axis=0, keepdims=True)
    history = [(float(squared_distances(x, centroids).mean()),)]
    while centroids.shape[0] < size:
        k = centroids.shape[0]
        n_split = min(k, size - k)
        if n_split < k:
            d2 = squared_distances(x, centroids)
            assign = np.argmin(d2, axis=1)
            cell = np.bincount(assign, weights=d2[np.arange(x.shape[0]), assign], minlength=k)
            # stable sort keeps lower indices first among equal cells
            order = np.argsort(-cell, kind="stable")[:n_split]
            split = np.sort(order)
        else:
            split = np.arange(k)
        d = rng.standard_normal((split.size, x.shape[1]))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        shifted = centroids.copy()
        shifted[split] = centroids[split] + SPLIT_EPS * d
        centroids = np.vstack([shifted, centroids[split] - SPLIT_EPS * d])
        centroids, stage = _kmeans(x, centroids)
        history.append(stage)
    return Codebook(centroids, distortion_history=tuple(history))


def quantize(features, cb: Codebook):
    """Map each vector to its nearest centroid index (ties go to the lowest index)."""
    x = _as_matrix(features)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if x.shape[1] != cb.dim:
        raise DimensionMismatch(f"feature dimension {x.shape[1]} != codebook dimension {cb.dim}")
    return np.argmin(squared_distances(x, cb.centroids), axis=1).astype(np.int64)
