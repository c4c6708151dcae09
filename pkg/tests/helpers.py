"""Shared test utilities: independent oracles and synthetic-data builders.

The oracles here stay deliberately dumb (dense scans, bisection, finite
differences) so they cannot share a failure mode with the code under
test.
"""

from __future__ import annotations

import numpy as np

import rdladder as rl


def bisection_roots(coeffs_desc, lo: float, hi: float, step: float = 1e-4,
                    tol: float = 1e-12) -> list[float]:
    """Sign-change scan plus bisection: an independent root finder for
    polynomials with descending coefficients."""
    coeffs = np.asarray(coeffs_desc, dtype=float)
    xs = np.arange(lo, hi + step / 2, step)
    vals = np.polyval(coeffs, xs)
    roots = []
    for i in range(len(xs) - 1):
        a, b = float(vals[i]), float(vals[i + 1])
        if a == 0.0:
            roots.append(float(xs[i]))
            continue
        if a * b < 0.0:
            left, right, f_left = float(xs[i]), float(xs[i + 1]), a
            while right - left > tol:
                mid = 0.5 * (left + right)
                f_mid = float(np.polyval(coeffs, mid))
                if f_left * f_mid <= 0.0:
                    right = mid
                else:
                    left, f_left = mid, f_mid
            roots.append(0.5 * (left + right))
    if float(vals[-1]) == 0.0:
        roots.append(float(xs[-1]))
    return roots


def central_difference(model: rl.CubicRD, r: float, h: float = 1e-5) -> float:
    return (rl.eval_cubic(model, r + h) - rl.eval_cubic(model, r - h)) / (2 * h)


def curve_points(model: rl.CubicRD, bitrates) -> list[tuple[float, float]]:
    return [(float(b), rl.eval_cubic(model, float(b))) for b in bitrates]


def measurement_csv(gop_clusters, tiers, bitrates, model_set=None, noise=None,
                    rng=None) -> str:
    """Build a measurement CSV whose GOP curves lie on the given clusters'
    centroid curves (plus optional uniform noise)."""
    model_set = model_set or rl.builtin_model()
    rows = ["gop_id,resolution,bitrate_mbps,psnr_db"]
    for index, cluster in enumerate(gop_clusters):
        for tier in tiers:
            model = model_set.model(cluster, tier)
            for b in bitrates:
                q = rl.eval_cubic(model, float(b))
                if noise:
                    q += rng.uniform(-noise, noise)
                rows.append(f"gop{index:03d},{tier.name},{b:.17g},{q:.17g}")
    return "\n".join(rows) + "\n"


def grouped_vectors(gop_clusters, tiers, grid, model_set=None, noise=None, rng=None):
    """RDVectors per tier drawn from the given clusters' centroid curves."""
    model_set = model_set or rl.builtin_model()
    by_tier = {}
    for tier in tiers:
        vectors = []
        for index, cluster in enumerate(gop_clusters):
            model = model_set.model(cluster, tier)
            psnr = [rl.eval_cubic(model, b) for b in grid.bitrates]
            if noise:
                psnr = [q + rng.uniform(-noise, noise) for q in psnr]
            vectors.append(rl.RDVector(gop_id=f"gop{index:03d}", tier=tier, psnr=tuple(psnr)))
        by_tier[tier] = vectors
    return by_tier


def random_cubics(count: int, seed: int) -> list[rl.CubicRD]:
    """Mixed random cubics: half from raw coefficients, half built from
    roots placed around the operating range so intersections are common."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 2 == 0:
            c0 = rng.uniform(10, 50)
            c1 = rng.uniform(-8, 20)
            c2 = rng.uniform(-6, 3)
            c3 = rng.uniform(-0.5, 0.8)
        else:
            roots = rng.uniform(0.0, 7.0, size=3)
            lead = rng.uniform(-2.0, 2.0)
            while abs(lead) < 1e-3:
                lead = rng.uniform(-2.0, 2.0)
            poly = lead * np.poly(roots)  # descending coefficients
            c3, c2, c1, c0 = (float(v) for v in poly)
            c0 += rng.uniform(20, 40)  # lift so curves look like PSNR
        out.append(rl.CubicRD(c0, c1, c2, c3, valid_range=(0.2, 6.0)))
    return out
