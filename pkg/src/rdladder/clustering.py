"""Fixed-grid R-D vectors, K-means clustering of them, and cluster
assignment for new measurements.

Each GOP's measured curve is resampled onto a shared bitrate grid, the
resulting PSNR vectors are clustered per resolution tier with K-means
(k-means++ seeding, Lloyd iterations), and each cluster centroid gets a
cubic fit. Cluster indices are 1-based in the assembled model; raw
K-means labels are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConflictError, CoverageError, InsufficientDataError, ValidationError
from .rd_model import CubicRD, eval_cubic, fit_polynomial
from .tiers import ResolutionTier

KMEANS_MAX_ITER = 300
KMEANS_DISPLACEMENT_TOL = 1e-6  # dB; max centroid movement at convergence


@dataclass(frozen=True)
class BitrateGrid:
    """Strictly increasing bitrates (Mbps) all PSNR vectors align to."""

    bitrates: tuple[float, ...]

    def __post_init__(self):
        if len(self.bitrates) < 4:
            raise ValidationError("grid needs at least 4 bitrates")
        arr = np.asarray(self.bitrates, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("grid bitrates must be finite")
        if arr[0] <= 0:
            raise ValidationError("grid bitrates must be > 0")
        if np.any(np.diff(arr) <= 0):
            raise ValidationError("grid bitrates must be strictly increasing")

    @classmethod
    def linspace(cls, lo: float = 0.2, hi: float = 6.0, count: int = 10) -> "BitrateGrid":
        return cls(tuple(float(x) for x in np.linspace(lo, hi, count)))

    @classmethod
    def default(cls) -> "BitrateGrid":
        return cls.linspace()

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bitrates, dtype=float)

    @property
    def span(self) -> tuple[float, float]:
        return (self.bitrates[0], self.bitrates[-1])

    def __len__(self) -> int:
        return len(self.bitrates)


@dataclass(frozen=True)
class RDVector:
    """One GOP's PSNR values on a bitrate grid, at one resolution tier."""

    gop_id: str
    tier: ResolutionTier
    psnr: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.psnr, dtype=float)
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise ValidationError(f"gop {self.gop_id!r}: PSNR vector must be finite and non-empty")
        if np.any(arr <= 0) or np.any(arr > 100):
            raise ValidationError(f"gop {self.gop_id!r}: PSNR values must be in (0, 100] dB")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.psnr, dtype=float)


def resample_to_grid(samples: Sequence, grid: BitrateGrid) -> RDVector:
    """Piecewise-linear resampling of one GOP x tier's measurements onto
    ``grid``. ``samples`` are measurement records with ``gop_id``, ``tier``,
    ``bitrate`` and ``psnr`` attributes, all for the same GOP and tier.

    Never extrapolates: the samples must span the whole grid.
    """
    if len(samples) < 2:
        raise InsufficientDataError("resampling needs at least 2 samples")
    gop_id = samples[0].gop_id
    tier = samples[0].tier
    if any(s.gop_id != gop_id or s.tier != tier for s in samples):
        raise ValidationError("resample_to_grid expects samples for a single gop and tier")

    by_bitrate: dict[float, float] = {}
    for s in samples:
        prev = by_bitrate.get(s.bitrate)
        if prev is not None and prev != s.psnr:
            raise ConflictError(
                f"gop {gop_id!r}: duplicate bitrate {s.bitrate} Mbps with differing PSNR "
                f"({prev} vs {s.psnr})"
            )
        by_bitrate[s.bitrate] = s.psnr
    if len(by_bitrate) < 2:
        raise InsufficientDataError("resampling needs at least 2 distinct bitrates")

    rs = np.asarray(sorted(by_bitrate), dtype=float)
    qs = np.asarray([by_bitrate[r] for r in rs], dtype=float)
    gx = grid.as_array()
    for g in gx:
        if g < rs[0] or g > rs[-1]:
            raise CoverageError(
                f"gop {gop_id!r}: grid bitrate {g:g} Mbps outside measured span "
                f"[{rs[0]:g}, {rs[-1]:g}]"
            )
    interp = np.interp(gx, rs, qs)
    return RDVector(gop_id=gop_id, tier=tier, psnr=tuple(float(v) for v in interp))


@dataclass(frozen=True)
class KMeansResult:
    """Labels are 0-based row indices into ``centroids``."""

    labels: tuple[int, ...]
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple[float, ...]


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    for i in range(1, k):
        d2 = _sq_dists(x, centers[:i]).min(axis=1)
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = x[idx]
    return centers


def kmeans(
    vectors: Sequence[RDVector],
    k: int,
    seed: int = 42,
    init_centroids: np.ndarray | None = None,
) -> KMeansResult:
    """Deterministic K-means over PSNR vectors sharing one tier.

    k-means++ seeding from ``seed``, Lloyd iterations, Euclidean distance.
    Converges when the largest centroid displacement drops below
    ``KMEANS_DISPLACEMENT_TOL`` dB or after ``KMEANS_MAX_ITER`` iterations.
    A centroid that loses all members is re-seeded at the point farthest
    from its currently assigned centroid. ``init_centroids`` overrides the
    k-means++ seeding (useful for reproducing specific runs).
    """
    if len(vectors) < k:
        raise InsufficientDataError(f"k-means needs at least k={k} vectors, got {len(vectors)}")
    dims = {len(v.psnr) for v in vectors}
    if len(dims) != 1:
        raise ValidationError("all vectors must share one grid length")
    tiers = {v.tier for v in vectors}
    if len(tiers) != 1:
        raise ValidationError("all vectors must share one resolution tier")

    x = np.stack([v.as_array() for v in vectors])
    rng = np.random.default_rng(seed)
    if init_centroids is not None:
        centers = np.array(init_centroids, dtype=float, copy=True)
        if centers.shape != (k, x.shape[1]):
            raise ValidationError(f"init_centroids must have shape ({k}, {x.shape[1]})")
    else:
        centers = _kmeanspp_init(x, k, rng)

    history: list[float] = []
    labels = np.zeros(len(vectors), dtype=int)
    for iteration in range(1, KMEANS_MAX_ITER + 1):
        d2 = _sq_dists(x, centers)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(x)), labels].sum())
        history.append(inertia)

        new_centers = centers.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
        empties = [j for j in range(k) if not np.any(labels == j)]
        if empties:
            # Farthest-point re-seed; each empty centroid takes the next
            # farthest point so two empties never collapse onto one point.
            point_d2 = d2[np.arange(len(x)), labels]
            order = np.argsort(point_d2)[::-1]
            for empty, idx in zip(empties, order):
                new_centers[empty] = x[idx]

        displacement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if displacement < KMEANS_DISPLACEMENT_TOL and not empties:
            break

    d2 = _sq_dists(x, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(x)), labels].sum())
    if not history or inertia < history[-1]:
        history.append(inertia)
    return KMeansResult(
        labels=tuple(int(v) for v in labels),
        centroids=centers,
        inertia=inertia,
        n_iter=iteration,
        inertia_history=tuple(history),
    )


@dataclass(frozen=True)
class ClusterModelSet:
    """The trained model: per (cluster, tier) a centroid vector and its
    cubic fit, plus the grid they live on. Cluster indices are 1-based."""

    k: int
    grid: BitrateGrid
    tiers: tuple[ResolutionTier, ...]
    centroids: Mapping[tuple[int, ResolutionTier], tuple[float, ...]]
    models: Mapping[tuple[int, ResolutionTier], CubicRD]
    seed: int
    provenance: str

    def __post_init__(self):
        expected = {(c, t) for c in self.clusters for t in self.tiers}
        if set(self.models) != expected or set(self.centroids) != expected:
            raise ValidationError("model set must hold exactly k x |tiers| entries")
        for key, centroid in self.centroids.items():
            if len(centroid) != len(self.grid):
                raise ValidationError(f"centroid {key} length does not match grid")

    @property
    def clusters(self) -> range:
        return range(1, self.k + 1)

    @property
    def reference_tier(self) -> ResolutionTier:
        return max(self.tiers)

    def has_tier(self, tier: ResolutionTier) -> bool:
        return tier in self.tiers

    def model(self, cluster: int, tier: ResolutionTier) -> CubicRD:
        try:
            return self.models[(cluster, tier)]
        except KeyError:
            raise ValidationError(f"model has no entry for cluster {cluster} at {tier}") from None

    def centroid(self, cluster: int, tier: ResolutionTier) -> tuple[float, ...]:
        try:
            return self.centroids[(cluster, tier)]
        except KeyError:
            raise ValidationError(f"model has no centroid for cluster {cluster} at {tier}") from None


def _greedy_match(
    ref_sets: list[set], ref_means: list[float], other_sets: list[set], other_means: list[float]
) -> dict[int, int]:
    """Match each reference cluster (row) to one other-tier cluster (column).

    Primary signal is shared GOP membership; mean-PSNR distance breaks ties
    and covers tiers with disjoint GOP ids. Returns {ref_index: other_index}.
    """
    k = len(ref_sets)
    pairs = []
    for i in range(k):
        for j in range(k):
            overlap = len(ref_sets[i] & other_sets[j])
            pairs.append((-overlap, abs(ref_means[i] - other_means[j]), i, j))
    pairs.sort()
    mapping: dict[int, int] = {}
    used = set()
    for _, _, i, j in pairs:
        if i in mapping or j in used:
            continue
        mapping[i] = j
        used.add(j)
    return mapping


def train(
    vectors_by_tier: Mapping[ResolutionTier, Sequence[RDVector]],
    grid: BitrateGrid,
    k: int = 6,
    seed: int = 42,
) -> ClusterModelSet:
    """Cluster each tier independently, fit a cubic per centroid, and
    assemble the full model.

    The highest tier is the reference: its clusters are numbered 1..k by
    ascending mean centroid PSNR, and every other tier's clusters are
    matched to reference clusters greedily by shared GOP membership (mean
    PSNR distance as tie-break/fallback).
    """
    model_set, _ = train_details(vectors_by_tier, grid, k=k, seed=seed)
    return model_set


def train_details(
    vectors_by_tier: Mapping[ResolutionTier, Sequence[RDVector]],
    grid: BitrateGrid,
    k: int = 6,
    seed: int = 42,
) -> tuple[ClusterModelSet, dict[ResolutionTier, KMeansResult]]:
    """Like ``train`` but also returns the per-tier K-means results, for
    callers that report inertia or convergence diagnostics."""
    if not vectors_by_tier:
        raise InsufficientDataError("no training vectors")
    tiers = tuple(sorted(vectors_by_tier))
    for tier in tiers:
        if len(vectors_by_tier[tier]) < k:
            raise InsufficientDataError(
                f"tier {tier}: {len(vectors_by_tier[tier])} vectors < k={k}"
            )
        for v in vectors_by_tier[tier]:
            if len(v.psnr) != len(grid):
                raise ValidationError(f"gop {v.gop_id!r}: vector length does not match grid")
            if v.tier != tier:
                raise ValidationError(f"gop {v.gop_id!r}: tier mismatch in training groups")

    results = {tier: kmeans(vectors_by_tier[tier], k, seed) for tier in tiers}

    def member_sets(tier: ResolutionTier) -> list[set]:
        sets: list[set] = [set() for _ in range(k)]
        for vec, label in zip(vectors_by_tier[tier], results[tier].labels):
            sets[label].add(vec.gop_id)
        return sets

    ref = max(tiers)
    ref_means = results[ref].centroids.mean(axis=1)
    ref_order = list(np.argsort(ref_means, kind="stable"))  # cluster 1 = lowest mean PSNR
    ref_sets = member_sets(ref)

    centroids: dict[tuple[int, ResolutionTier], tuple[float, ...]] = {}
    models: dict[tuple[int, ResolutionTier], CubicRD] = {}
    for tier in tiers:
        if tier == ref:
            label_for_cluster = {c: ref_order[c - 1] for c in range(1, k + 1)}
        else:
            other_means = list(results[tier].centroids.mean(axis=1))
            matched = _greedy_match(
                [ref_sets[ref_order[c - 1]] for c in range(1, k + 1)],
                [float(ref_means[ref_order[c - 1]]) for c in range(1, k + 1)],
                member_sets(tier),
                other_means,
            )
            label_for_cluster = {c: matched[c - 1] for c in range(1, k + 1)}
        for cluster in range(1, k + 1):
            centroid = results[tier].centroids[label_for_cluster[cluster]]
            centroids[(cluster, tier)] = tuple(float(v) for v in centroid)
            models[(cluster, tier)] = fit_polynomial(list(zip(grid.bitrates, centroid)), 3)

    model_set = ClusterModelSet(
        k=k,
        grid=grid,
        tiers=tiers,
        centroids=centroids,
        models=models,
        seed=seed,
        provenance="trained",
    )
    return model_set, results


@dataclass(frozen=True)
class GopAssignment:
    """Result of matching a GOP's measured point(s) to the nearest cluster
    centroid curve at one tier. ``distance`` is the absolute PSNR residual
    (RMS over points when several were used)."""

    gop_id: str
    cluster: int
    distance: float
    tier: ResolutionTier

    def __post_init__(self):
        if self.distance < 0:
            raise ValidationError("assignment distance must be >= 0")
        if self.cluster < 1:
            raise ValidationError("cluster indices are 1-based")


def assign_cluster_multi(
    points: Sequence[tuple[float, float]],
    model_set: ClusterModelSet,
    tier: ResolutionTier,
    gop_id: str = "",
) -> GopAssignment:
    """Assign a GOP to the cluster whose centroid curve is nearest to its
    measured (bitrate, psnr) points, by RMS PSNR residual. Ties resolve
    toward the lower cluster index."""
    if not points:
        raise ValidationError("assignment needs at least one (bitrate, psnr) point")
    if not model_set.has_tier(tier):
        raise ValidationError(f"model has no tier {tier}")
    for bitrate, psnr in points:
        if not (math.isfinite(bitrate) and bitrate > 0):
            raise ValidationError(f"bitrate must be finite and > 0, got {bitrate}")
        if not math.isfinite(psnr):
            raise ValidationError("psnr must be finite")

    def rms(cluster: int) -> float:
        model = model_set.model(cluster, tier)
        sq = [(psnr - eval_cubic(model, bitrate)) ** 2 for bitrate, psnr in points]
        return math.sqrt(sum(sq) / len(sq))

    distances = {c: rms(c) for c in model_set.clusters}
    best = min(model_set.clusters, key=lambda c: (distances[c], c))
    return GopAssignment(gop_id=gop_id, cluster=best, distance=distances[best], tier=tier)


def assign_cluster(
    point: tuple[float, float],
    model_set: ClusterModelSet,
    tier: ResolutionTier,
    gop_id: str = "",
) -> GopAssignment:
    """Single-point cluster assignment: nearest centroid curve in absolute
    PSNR distance at the point's bitrate."""
    return assign_cluster_multi([point], model_set, tier, gop_id=gop_id)
