"""Distribution distance between two image sets.

Pluggable cheap feature extractors, Gaussian statistics with optional
regularization, a PSD matrix square root, and the Fréchet distance
(squared mean gap plus covariance trace term).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def _to_gray(image: np.ndarray) -> np.ndarray:
    return image @ np.array([0.299, 0.587, 0.114])


def _downsample(gray: np.ndarray, size: int) -> np.ndarray:
    """Mean-pool to size x size (nearest-bin fallback for ragged shapes)."""
    h, w = gray.shape
    if h % size == 0 and w % size == 0:
        return gray.reshape(size, h // size, size, w // size).mean(axis=(1, 3))
    ys = (np.arange(size) * h / size).astype(int)
    xs = (np.arange(size) * w / size).astype(int)
    return gray[np.ix_(ys, xs)]


@dataclass(frozen=True)
class GrayDownsample:
    """Flatten an s x s grayscale reduction of the image."""

    size: int = 16

    @property
    def dim(self) -> int:
        return self.size * self.size

    def extract_one(self, image: np.ndarray) -> np.ndarray:
        return _downsample(_to_gray(image), self.size).ravel()

    def config_id(self) -> str:
        return f"gray{self.size}"


_PROJECTION_CACHE: dict[tuple[int, int, int], np.ndarray] = {}


@dataclass(frozen=True)
class RandomProjection:
    """GrayDownsample followed by a fixed-seed Gaussian projection."""

    dim: int = 64
    seed: int = 0
    base_size: int = 16

    def _matrix(self) -> np.ndarray:
        key = (self.dim, self.seed, self.base_size)
        mat = _PROJECTION_CACHE.get(key)
        if mat is None:
            rng = np.random.default_rng(self.seed)
            d_in = self.base_size * self.base_size
            mat = rng.standard_normal((d_in, self.dim)) / np.sqrt(d_in)
            _PROJECTION_CACHE[key] = mat
        return mat

    def extract_one(self, image: np.ndarray) -> np.ndarray:
        vec = GrayDownsample(self.base_size).extract_one(image)
        return vec @ self._matrix()

    def config_id(self) -> str:
        return f"proj{self.dim}s{self.seed}g{self.base_size}"


@dataclass(frozen=True)
class ColorGradHist:
    """Concatenated per-channel color histograms and a gradient-orientation
    histogram on the grayscale image."""

    color_bins: int = 12
    orient_bins: int = 12

    @property
    def dim(self) -> int:
        return 3 * self.color_bins + self.orient_bins

    def extract_one(self, image: np.ndarray) -> np.ndarray:
        parts = []
        for ch in range(3):
            counts, _ = np.histogram(
                image[:, :, ch], bins=self.color_bins, range=(0.0, 1.0)
            )
            parts.append(counts / image[:, :, ch].size)
        gray = _to_gray(image)
        gy, gx = np.gradient(gray)
        mag = np.hypot(gx, gy)
        ang = np.arctan2(gy, gx)
        counts, _ = np.histogram(
            ang, bins=self.orient_bins, range=(-np.pi, np.pi), weights=mag
        )
        total = counts.sum()
        parts.append(counts / total if total > 0 else counts)
        return np.concatenate(parts)

    def config_id(self) -> str:
        return f"hist{self.color_bins}x{self.orient_bins}"


FeatureExtractor = GrayDownsample | RandomProjection | ColorGradHist


def default_extractor() -> RandomProjection:
    return RandomProjection(dim=64, seed=0, base_size=16)


def extract(images, extractor: FeatureExtractor) -> np.ndarray:
    """n x d feature matrix, row i the descriptor of image i."""
    images = list(images)
    if not images:
        raise ValueError("image list must be non-empty")
    rows = [np.asarray(extractor.extract_one(np.asarray(im))) for im in images]
    d = rows[0].shape[0]
    if any(r.shape != (d,) for r in rows):
        raise ValueError("inconsistent descriptor dimensions")
    return np.vstack(rows)


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 samples")
        if self.cov.shape != (self.mean.shape[0], self.mean.shape[0]):
            raise ValueError("covariance shape mismatch")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "gaussian-stats/1",
                "n": self.n,
                "mean": self.mean.tolist(),
                "cov": self.cov.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GaussianStats":
        doc = json.loads(text)
        if doc.get("schema") != "gaussian-stats/1":
            raise ValueError(f"unsupported schema: {doc.get('schema')!r}")
        return cls(
            mean=np.array(doc["mean"], dtype=float),
            cov=np.array(doc["cov"], dtype=float),
            n=int(doc["n"]),
        )


def fit_stats(
    features: np.ndarray, regularization: float = 0.0, unbiased: bool = True
) -> GaussianStats:
    """Column mean and (symmetrized) sample covariance plus eps * I."""
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    if n < 2:
        raise ValueError("need at least 2 feature rows")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    mu = features.mean(axis=0)
    centered = features - mu
    denom = n - 1 if unbiased else n
    cov = centered.T @ centered / denom
    cov = (cov + cov.T) / 2.0
    cov = cov + regularization * np.eye(cov.shape[0])
    return GaussianStats(mean=mu, cov=cov, n=n)


def sqrtm_psd(sigma: np.ndarray, sym_tol: float = 1e-8) -> np.ndarray:
    """PSD square root via symmetric eigendecomposition; negative
    eigenvalues (round-off) clamped to zero."""
    sigma = np.asarray(sigma, dtype=float)
    scale = max(np.abs(sigma).max(), 1.0)
    if np.abs(sigma - sigma.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    sym = (sigma + sigma.T) / 2.0
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0


def frechet_distance(
    a: GaussianStats, b: GaussianStats, regularization: float | str = "auto"
) -> float:
    """Squared mean gap plus Tr(Sa + Sb - 2 (Sa Sb)^(1/2)).

    The cross term is computed through the symmetrized congruence
    (Sb^(1/2) Sa Sb^(1/2))^(1/2), which has the same trace. With
    ``regularization='auto'`` each covariance gets 1e-6 * mean(diag) * I
    added before the cross term.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sa, sb = a.cov, b.cov
    if regularization == "auto":
        eps_a = 1e-6 * float(np.trace(sa)) / a.dim
        eps_b = 1e-6 * float(np.trace(sb)) / b.dim
    else:
        eps_a = eps_b = float(regularization)
    if eps_a:
        sa = sa + eps_a * np.eye(a.dim)
    if eps_b:
        sb = sb + eps_b * np.eye(b.dim)
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    root_b = sqrtm_psd(sb)
    inner = root_b @ sa @ root_b
    cross = float(np.trace(sqrtm_psd(inner)))
    value = mean_term + float(np.trace(sa) + np.trace(sb)) - 2.0 * cross
    return max(value, 0.0)


class StatsCache:
    """Text cache of GaussianStats keyed by (dataset id, extractor config)."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, dataset_id: str, extractor: FeatureExtractor) -> Path:
        key = hashlib.sha256(
            f"{dataset_id}|{extractor.config_id()}".encode()
        ).hexdigest()[:16]
        return self.directory / f"stats_{key}.json"

    def get(self, dataset_id: str, extractor: FeatureExtractor):
        path = self._path(dataset_id, extractor)
        if path.exists():
            return GaussianStats.from_json(path.read_text())
        return None

    def put(self, dataset_id: str, extractor: FeatureExtractor, stats: GaussianStats):
        self._path(dataset_id, extractor).write_text(stats.to_json())

    def get_or_compute(self, dataset_id: str, extractor: FeatureExtractor, compute):
        stats = self.get(dataset_id, extractor)
        if stats is None:
            stats = compute()
            self.put(dataset_id, extractor, stats)
        return stats
