"""Transcoding decisions derived from cubic R-D curves: knee points,
per-cluster resolution ladders, visually-lossless bitrate thresholds,
near-zero-slope intervals, per-GOP recommendations and savings totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .clustering import ClusterModelSet, assign_cluster_multi
from .errors import IdenticalCurvesError, ValidationError
from .rd_model import CubicRD, eval_cubic, eval_derivative
from .tiers import ResolutionTier

# Quality ties below this (dB) are invisible; argmax resolves to the higher tier.
_TIER_TIE_TOL = 1e-9


@dataclass(frozen=True)
class DecisionConfig:
    """Thresholds and ranges for ladder/threshold/interval derivation.

    ``operating_range`` bounds ladders and near-zero-slope intervals;
    ``vl_search_range`` may extend past it because visually-lossless
    thresholds can sit beyond the fitted bitrate span (such results are
    flagged as extrapolation).
    """

    vl_psnr: float = 40.0
    nzs_slope: float = 0.1
    operating_range: tuple[float, float] = (0.2, 6.0)
    vl_search_range: tuple[float, float] = (0.2, 12.0)
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.vl_psnr <= 0:
            raise ValidationError("vl_psnr must be > 0")
        if self.nzs_slope <= 0:
            raise ValidationError("nzs_slope must be > 0")
        for name in ("operating_range", "vl_search_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or lo >= hi:
                raise ValidationError(f"{name} must satisfy 0 < lo < hi")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be > 0")


def _polish_root(coeffs_desc: np.ndarray, r: float, iters: int = 6) -> float:
    """A few Newton steps against the exact polynomial; keeps the companion
    matrix roots honest down at root-finding tolerance."""
    deriv = np.polyder(coeffs_desc)
    best, best_val = r, abs(float(np.polyval(coeffs_desc, r)))
    for _ in range(iters):
        df = float(np.polyval(deriv, r))
        if df == 0.0 or not math.isfinite(df):
            break
        step = float(np.polyval(coeffs_desc, r)) / df
        if not math.isfinite(step):
            break
        r -= step
        val = abs(float(np.polyval(coeffs_desc, r)))
        if val < best_val:
            best, best_val = r, val
        if abs(step) <= 1e-15 * max(1.0, abs(r)):
            break
    return best


def _real_roots(coeffs_desc: Sequence[float]) -> list[float]:
    """All real roots of a polynomial given in descending-coefficient order,
    Newton-polished, ascending. Near-real companion eigenvalues (double
    roots surface as conjugate pairs with tiny imaginary parts) count as
    real."""
    p = np.asarray(coeffs_desc, dtype=float)
    scale = np.max(np.abs(p)) if p.size else 0.0
    if scale == 0.0:
        return []
    keep = np.abs(p) > 1e-13 * scale
    first = int(np.argmax(keep)) if keep.any() else p.size
    p = p[first:]
    if p.size <= 1:
        return []
    roots = np.roots(p)
    out = []
    for z in roots:
        if abs(z.imag) <= 1e-6 * max(1.0, abs(z.real)):
            out.append(_polish_root(p, float(z.real)))
    return sorted(out)


@dataclass(frozen=True)
class CurveIntersection:
    """A bitrate where two curves meet. ``tangential`` marks touch points
    (even multiplicity): the quality ordering does not flip there."""

    bitrate: float
    tangential: bool = False


def curve_intersections(
    a: CubicRD,
    b: CubicRD,
    r_range: tuple[float, float],
    tol: float = 1e-9,
) -> list[CurveIntersection]:
    """Real roots of (a - b)(R) = 0 inside ``r_range``, ascending,
    deduplicated at ``tol``. Raises IdenticalCurvesError when the curves
    coincide coefficient-wise (every bitrate 'intersects', which is not an
    empty result)."""
    lo, hi = r_range
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or lo >= hi:
        raise ValidationError("intersection range must satisfy 0 < lo < hi")
    diff = np.asarray(
        [a.c3 - b.c3, a.c2 - b.c2, a.c1 - b.c1, a.c0 - b.c0], dtype=float
    )
    if np.all(diff == 0.0):
        raise IdenticalCurvesError("curves are coefficient-wise identical")

    roots = [r for r in _real_roots(diff) if lo <= r <= hi]
    merged: list[float] = []
    merge_tol = max(tol, 1e-6)
    for r in roots:
        if merged and abs(r - merged[-1]) <= merge_tol:
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)

    out = []
    for i, r in enumerate(merged):
        h = 1e-5 * max(1.0, abs(r))
        gap = min(
            abs(r - merged[i - 1]) if i > 0 else math.inf,
            abs(merged[i + 1] - r) if i + 1 < len(merged) else math.inf,
        )
        h = min(h, gap / 4.0)
        left = float(np.polyval(diff, r - h))
        right = float(np.polyval(diff, r + h))
        out.append(CurveIntersection(bitrate=r, tangential=left * right > 0.0))
    return out


@dataclass(frozen=True)
class LadderSegment:
    lo: float
    hi: float
    tier: ResolutionTier


@dataclass(frozen=True)
class ResolutionLadder:
    """Piecewise map from bitrate to the best resolution for one cluster.

    Segments tile the operating range exactly. Boundaries belong to the
    segment on their left (the lower-bitrate side).
    """

    cluster: int
    segments: tuple[LadderSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("ladder needs at least one segment")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if prev.hi != nxt.lo:
                raise ValidationError("ladder segments must tile the range contiguously")
            if prev.tier == nxt.tier:
                raise ValidationError("adjacent ladder segments must differ in tier")
        for seg in self.segments:
            if seg.lo >= seg.hi:
                raise ValidationError("ladder segment bounds must be increasing")

    @property
    def span(self) -> tuple[float, float]:
        return (self.segments[0].lo, self.segments[-1].hi)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(seg.hi for seg in self.segments[:-1])

    def tier_at(self, r: float) -> ResolutionTier:
        """Tier for a target bitrate; out-of-range targets clamp to the
        nearest end. A breakpoint bitrate belongs to its left segment."""
        lo, hi = self.span
        r = min(max(r, lo), hi)
        for seg in self.segments:
            if r <= seg.hi:
                return seg.tier
        return self.segments[-1].tier


def build_ladder(model_set: ClusterModelSet, cluster: int, cfg: DecisionConfig) -> ResolutionLadder:
    """Partition the operating range at the cluster's pairwise curve
    intersections and keep, per segment, the tier with the highest quality
    at the segment midpoint (quality ties go to the higher tier).
    Tangential intersections never flip the argmax and create no
    breakpoints; adjacent same-tier segments are merged."""
    if cluster not in model_set.clusters:
        raise ValidationError(f"unknown cluster index {cluster}")
    lo, hi = cfg.operating_range
    tiers = model_set.tiers
    curves = {t: model_set.model(cluster, t) for t in tiers}

    cuts: list[float] = []
    for i, t1 in enumerate(tiers):
        for t2 in tiers[i + 1 :]:
            try:
                hits = curve_intersections(curves[t1], curves[t2], (lo, hi), tol=cfg.tolerance)
            except IdenticalCurvesError:
                continue
            cuts.extend(x.bitrate for x in hits if not x.tangential and lo < x.bitrate < hi)

    merged_cuts: list[float] = []
    for r in sorted(cuts):
        if merged_cuts and abs(r - merged_cuts[-1]) <= max(cfg.tolerance, 1e-9):
            continue
        merged_cuts.append(r)

    edges = [lo, *merged_cuts, hi]
    segments: list[LadderSegment] = []
    for seg_lo, seg_hi in zip(edges, edges[1:]):
        mid = 0.5 * (seg_lo + seg_hi)
        qualities = {t: eval_cubic(curves[t], mid) for t in tiers}
        best_q = max(qualities.values())
        tier = max(t for t, q in qualities.items() if q >= best_q - _TIER_TIE_TOL)
        if segments and segments[-1].tier == tier:
            segments[-1] = LadderSegment(segments[-1].lo, seg_hi, tier)
        else:
            segments.append(LadderSegment(seg_lo, seg_hi, tier))
    return ResolutionLadder(cluster=cluster, segments=tuple(segments))


def build_ladders(model_set: ClusterModelSet, cfg: DecisionConfig) -> dict[int, ResolutionLadder]:
    return {c: build_ladder(model_set, c, cfg) for c in model_set.clusters}


@dataclass(frozen=True)
class VlThreshold:
    """Minimal bitrate predicted to reach the visually-lossless quality.

    ``clamped`` marks curves already at/above the target at the search
    range minimum; ``extrapolated`` marks thresholds outside the curve's
    fitted bitrate span.
    """

    bitrate: float
    clamped: bool = False
    extrapolated: bool = False


def vl_threshold(model: CubicRD, cfg: DecisionConfig) -> Optional[VlThreshold]:
    """Smallest bitrate in the search range where the curve crosses
    ``cfg.vl_psnr`` on a rising branch; None when the curve never gets
    there. A curve already at/above the target at the range minimum clamps
    to that minimum."""
    lo, hi = cfg.vl_search_range
    if eval_cubic(model, lo) >= cfg.vl_psnr:
        return VlThreshold(bitrate=lo, clamped=True, extrapolated=not model.covers(lo))
    candidates = [
        r
        for r in _real_roots([model.c3, model.c2, model.c1, model.c0 - cfg.vl_psnr])
        if lo <= r <= hi and eval_derivative(model, r) > 0.0
    ]
    if not candidates:
        return None
    r = min(candidates)
    return VlThreshold(bitrate=r, extrapolated=not model.covers(r))


@dataclass(frozen=True)
class NzsInterval:
    """Bitrate interval where the curve's slope stays below the
    near-zero-slope threshold, clamped to the operating range."""

    lo: float
    hi: float
    clamped_lo: bool = False
    clamped_hi: bool = False

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValidationError("near-zero-slope interval must have lo < hi")

    def contains(self, r: float) -> bool:
        return self.lo <= r <= self.hi


def nzs_interval(model: CubicRD, cfg: DecisionConfig) -> Optional[NzsInterval]:
    """Solve slope(R) = cfg.nzs_slope; when the slope dips below the
    threshold between two real roots, return that interval clamped to the
    operating range (None when the dip never happens or clamping empties
    the interval)."""
    a = 3.0 * model.c3
    b = 2.0 * model.c2
    c = model.c1 - cfg.nzs_slope
    if a <= 0.0:
        # The slope parabola must open upward for a bounded below-threshold
        # dip between two roots.
        return None
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return None
    sqrt_disc = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sqrt_disc, b)) if b != 0.0 else 0.5 * sqrt_disc
    r1, r2 = sorted((q / a, c / q)) if q != 0.0 else (-sqrt_disc / (2 * a), sqrt_disc / (2 * a))
    op_lo, op_hi = cfg.operating_range
    lo, hi = max(r1, op_lo), min(r2, op_hi)
    if lo >= hi:
        return None
    return NzsInterval(lo=lo, hi=hi, clamped_lo=r1 < op_lo, clamped_hi=r2 > op_hi)


def vl_thresholds(
    model_set: ClusterModelSet, cfg: DecisionConfig
) -> dict[tuple[int, ResolutionTier], Optional[VlThreshold]]:
    return {
        (c, t): vl_threshold(model_set.model(c, t), cfg)
        for c in model_set.clusters
        for t in model_set.tiers
    }


def nzs_intervals(
    model_set: ClusterModelSet, cfg: DecisionConfig
) -> dict[tuple[int, ResolutionTier], Optional[NzsInterval]]:
    return {
        (c, t): nzs_interval(model_set.model(c, t), cfg)
        for c in model_set.clusters
        for t in model_set.tiers
    }


def recommend_resolution(cluster: int, target_r: float, ladder: ResolutionLadder) -> ResolutionTier:
    """Tier for the ladder segment containing the target bitrate (segment
    boundaries belong to the lower-bitrate side)."""
    if ladder.cluster != cluster:
        raise ValidationError(f"ladder belongs to cluster {ladder.cluster}, not {cluster}")
    return ladder.tier_at(target_r)


def recommend_bitrate_vl(
    cluster: int,
    tier: ResolutionTier,
    target_r: float,
    thresholds: Mapping[tuple[int, ResolutionTier], Optional[VlThreshold]],
) -> float:
    """Cap the target at the visually-lossless threshold when one exists
    below it; otherwise keep the target."""
    if target_r <= 0:
        raise ValidationError("target bitrate must be > 0")
    threshold = thresholds.get((cluster, tier))
    if threshold is not None and target_r > threshold.bitrate:
        return threshold.bitrate
    return target_r


def recommend_bitrate_nzs(
    cluster: int,
    tier: ResolutionTier,
    target_r: float,
    intervals: Mapping[tuple[int, ResolutionTier], Optional[NzsInterval]],
) -> float:
    """Drop a target inside the near-zero-slope interval (endpoints
    inclusive) to the interval's lower end; otherwise keep the target."""
    if target_r <= 0:
        raise ValidationError("target bitrate must be > 0")
    interval = intervals.get((cluster, tier))
    if interval is not None and interval.contains(target_r):
        return interval.lo
    return target_r


@dataclass(frozen=True)
class Modes:
    """Which decision stages run: trans-sizing, visually-lossless capping,
    near-zero-slope reduction."""

    trans_size: bool = False
    vl: bool = False
    nzs: bool = False

    _NAMES = ("trans_size", "vl", "nzs")

    @classmethod
    def parse(cls, spec: str) -> "Modes":
        names = [p.strip() for p in spec.split(",") if p.strip()]
        unknown = [n for n in names if n not in cls._NAMES]
        if unknown:
            raise ValidationError(f"unknown mode(s): {', '.join(unknown)}")
        return cls(**{n: True for n in names})

    @property
    def any_enabled(self) -> bool:
        return self.trans_size or self.vl or self.nzs

    @property
    def enabled(self) -> tuple[str, ...]:
        return tuple(n for n in self._NAMES if getattr(self, n))


@dataclass(frozen=True)
class GopObservation:
    """Measured (bitrate, psnr) points for one GOP at its native tier;
    the unit a recommendation is made for."""

    gop_id: str
    tier: ResolutionTier
    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Recommendation:
    """Per-GOP output: the assigned cluster, the tier and bitrate to
    transcode at, and the quality the model predicts there."""

    gop_id: str
    cluster: int
    tier: ResolutionTier
    target_bitrate: float
    proposed_bitrate: float
    modes_applied: tuple[str, ...]
    predicted_psnr: float
    rationale: str

    def __post_init__(self):
        if self.proposed_bitrate <= 0:
            raise ValidationError("proposed bitrate must be > 0")
        if self.proposed_bitrate > self.target_bitrate:
            raise ValidationError("proposed bitrate must never exceed the target")


def recommend(
    observation: GopObservation,
    model_set: ClusterModelSet,
    cfg: DecisionConfig,
    modes: Modes,
    target_r: float,
    *,
    ladders: Mapping[int, ResolutionLadder] | None = None,
    thresholds: Mapping[tuple[int, ResolutionTier], Optional[VlThreshold]] | None = None,
    intervals: Mapping[tuple[int, ResolutionTier], Optional[NzsInterval]] | None = None,
) -> Recommendation:
    """Full decision pipeline for one GOP: assign a cluster from the
    measured points, pick a tier (ladder when trans-sizing is on, native
    otherwise), then apply the visually-lossless cap and the
    near-zero-slope reduction to the bitrate, in that order.

    ``ladders``/``thresholds``/``intervals`` accept precomputed tables for
    batch use; left as None they are derived on the fly.
    """
    if not modes.any_enabled:
        raise ValidationError("at least one mode must be enabled")
    if not (math.isfinite(target_r) and target_r > 0):
        raise ValidationError("target bitrate must be finite and > 0")

    assignment = assign_cluster_multi(
        observation.points, model_set, observation.tier, gop_id=observation.gop_id
    )
    cluster = assignment.cluster
    notes = [f"cluster {cluster} (rms {assignment.distance:.3f} dB)"]
    applied: list[str] = []

    tier = observation.tier
    if modes.trans_size:
        ladder = ladders[cluster] if ladders is not None else build_ladder(model_set, cluster, cfg)
        lo, hi = cfg.operating_range
        if not (lo <= target_r <= hi):
            notes.append(f"target outside operating range, tier chosen at {min(max(target_r, lo), hi):g}")
        tier = recommend_resolution(cluster, target_r, ladder)
        if tier != observation.tier:
            applied.append("trans_size")
            notes.append(f"trans-size {observation.tier} -> {tier}")
        else:
            notes.append(f"keep {tier}")

    bitrate = target_r
    if modes.vl:
        table = thresholds if thresholds is not None else {
            (cluster, tier): vl_threshold(model_set.model(cluster, tier), cfg)
        }
        capped = recommend_bitrate_vl(cluster, tier, bitrate, table)
        if capped < bitrate:
            applied.append("vl")
            notes.append(f"visually-lossless cap {bitrate:g} -> {capped:g}")
            bitrate = capped
    if modes.nzs:
        table = intervals if intervals is not None else {
            (cluster, tier): nzs_interval(model_set.model(cluster, tier), cfg)
        }
        reduced = recommend_bitrate_nzs(cluster, tier, bitrate, table)
        if reduced < bitrate:
            applied.append("nzs")
            notes.append(f"near-zero-slope reduction {bitrate:g} -> {reduced:g}")
            bitrate = reduced

    final_model = model_set.model(cluster, tier)
    predicted = eval_cubic(final_model, bitrate)
    if not final_model.covers(bitrate):
        notes.append("prediction extrapolates beyond the fitted bitrate span")

    return Recommendation(
        gop_id=observation.gop_id,
        cluster=cluster,
        tier=tier,
        target_bitrate=target_r,
        proposed_bitrate=bitrate,
        modes_applied=tuple(applied),
        predicted_psnr=predicted,
        rationale="; ".join(notes),
    )


@dataclass(frozen=True)
class VideoSavings:
    video_id: str
    rows: tuple[tuple[float, float], ...]  # (target, proposed) per GOP
    total_target: float
    total_proposed: float
    saving_percent: float


@dataclass(frozen=True)
class SavingsReport:
    videos: tuple[VideoSavings, ...]
    total_target: float
    total_proposed: float
    saving_percent: float


def savings_report(groups: Mapping[str, Sequence[tuple[float, float]]]) -> SavingsReport:
    """Totals and bitrate-saving percentages per video and overall, from
    (target, proposed) pairs grouped by video id. Saving is
    (sum(target) - sum(proposed)) / sum(target) * 100."""
    if not groups or all(not rows for rows in groups.values()):
        raise ValidationError("savings report needs at least one (target, proposed) row")
    videos = []
    for video_id, rows in groups.items():
        if not rows:
            raise ValidationError(f"video {video_id!r} has no rows")
        for target, proposed in rows:
            if target <= 0 or proposed <= 0:
                raise ValidationError(f"video {video_id!r}: bitrates must be > 0")
            if proposed > target:
                raise ValidationError(f"video {video_id!r}: proposed exceeds target")
        total_target = float(sum(t for t, _ in rows))
        total_proposed = float(sum(p for _, p in rows))
        videos.append(
            VideoSavings(
                video_id=video_id,
                rows=tuple((float(t), float(p)) for t, p in rows),
                total_target=total_target,
                total_proposed=total_proposed,
                saving_percent=100.0 * (total_target - total_proposed) / total_target,
            )
        )
    total_target = sum(v.total_target for v in videos)
    total_proposed = sum(v.total_proposed for v in videos)
    return SavingsReport(
        videos=tuple(videos),
        total_target=total_target,
        total_proposed=total_proposed,
        saving_percent=100.0 * (total_target - total_proposed) / total_target,
    )
