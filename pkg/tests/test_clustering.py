import numpy as np
import pytest

import rdladder as rl
from rdladder.clustering import train_details
from rdladder.errors import (
    ConflictError,
    CoverageError,
    InsufficientDataError,
    ValidationError,
)
from rdladder.ingest import RDSample

from helpers import grouped_vectors


def make_samples(gop_id, tier, pairs):
    return [RDSample(gop_id=gop_id, tier=tier, bitrate=r, psnr=q) for r, q in pairs]


def const_vector(gop_id, tier, value, length=10):
    return rl.RDVector(gop_id=gop_id, tier=tier, psnr=(value,) * length)


class TestGrid:
    def test_default(self):
        grid = rl.BitrateGrid.default()
        assert len(grid) == 10
        assert grid.bitrates[0] == 0.2 and grid.bitrates[-1] == 6.0
        assert all(b2 > b1 for b1, b2 in zip(grid.bitrates, grid.bitrates[1:]))

    def test_validation(self):
        with pytest.raises(ValidationError):
            rl.BitrateGrid((1.0, 2.0, 3.0))
        with pytest.raises(ValidationError):
            rl.BitrateGrid((0.0, 1.0, 2.0, 3.0))
        with pytest.raises(ValidationError):
            rl.BitrateGrid((1.0, 2.0, 2.0, 3.0))


def test_rdvector_validation(t1080):
    with pytest.raises(ValidationError):
        rl.RDVector("g", t1080, (30.0, float("nan")))
    with pytest.raises(ValidationError):
        rl.RDVector("g", t1080, (0.0, 30.0))
    with pytest.raises(ValidationError):
        rl.RDVector("g", t1080, (30.0, 101.0))


class TestResample:
    def test_linear_midpoint(self, t720):
        samples = make_samples("g", t720, [(1.0, 30.0), (3.0, 34.0)])
        vec = rl.resample_to_grid(samples, rl.BitrateGrid((1.0, 1.5, 2.0, 3.0)))
        assert vec.psnr == (30.0, 31.0, 32.0, 34.0)

    def test_identity_at_grid_bitrates(self, paper_model, t1080):
        grid = rl.BitrateGrid.default()
        model = paper_model.model(4, t1080)
        samples = make_samples(
            "g", t1080, [(b, rl.eval_cubic(model, b)) for b in grid.bitrates]
        )
        vec = rl.resample_to_grid(samples, grid)
        assert vec.psnr == tuple(s.psnr for s in samples)

    def test_off_grid_interpolation_stays_close_to_curve(self, paper_model, t720):
        # 20 off-grid samples from the cluster-2 720p curve; the linear
        # interpolant onto the default grid must track the cubic closely.
        grid = rl.BitrateGrid.default()
        model = paper_model.model(2, t720)
        sample_bitrates = np.linspace(0.2, 6.0, 20)
        samples = make_samples(
            "g", t720, [(float(b), rl.eval_cubic(model, float(b))) for b in sample_bitrates]
        )
        vec = rl.resample_to_grid(samples, grid)
        deviations = [
            abs(q - rl.eval_cubic(model, b)) for b, q in zip(grid.bitrates, vec.psnr)
        ]
        assert max(deviations) < 0.05

    def test_coverage_error_names_gop_and_bitrate(self, t720):
        samples = make_samples("gop7", t720, [(0.5, 30.0), (4.0, 35.0)])
        with pytest.raises(CoverageError) as exc:
            rl.resample_to_grid(samples, rl.BitrateGrid.default())
        assert "gop7" in str(exc.value) and "0.2" in str(exc.value)

    def test_conflicting_duplicates(self, t720):
        samples = make_samples("g", t720, [(1.0, 30.0), (1.0, 31.0), (3.0, 34.0)])
        with pytest.raises(ConflictError):
            rl.resample_to_grid(samples, rl.BitrateGrid((1.0, 2.0, 2.5, 3.0)))


class TestKMeans:
    def test_k1_centroid_is_mean(self, t1080):
        rng = np.random.default_rng(5)
        vectors = [
            rl.RDVector(f"g{i}", t1080, tuple(rng.uniform(20, 50, 10))) for i in range(8)
        ]
        result = rl.kmeans(vectors, k=1, seed=0)
        stacked = np.stack([v.as_array() for v in vectors])
        assert np.allclose(result.centroids[0], stacked.mean(axis=0), atol=1e-12)

    def test_separated_groups_recovered_exactly(self, t1080):
        vectors = (
            [const_vector(f"a{i}", t1080, 10.0) for i in range(4)]
            + [const_vector(f"b{i}", t1080, 50.0) for i in range(4)]
            + [const_vector(f"c{i}", t1080, 90.0) for i in range(4)]
        )
        result = rl.kmeans(vectors, k=3, seed=1)
        assert result.inertia == 0.0
        labels = result.labels
        assert len({labels[0:4], labels[4:8], labels[8:12]}) == 3
        for group in (labels[0:4], labels[4:8], labels[8:12]):
            assert len(set(group)) == 1

    def test_determinism(self, t1080):
        rng = np.random.default_rng(9)
        vectors = [
            rl.RDVector(f"g{i}", t1080, tuple(rng.uniform(20, 60, 10))) for i in range(30)
        ]
        a = rl.kmeans(vectors, k=4, seed=42)
        b = rl.kmeans(vectors, k=4, seed=42)
        assert a.labels == b.labels
        assert np.array_equal(a.centroids, b.centroids)

    def test_inertia_history_non_increasing(self, t1080):
        rng = np.random.default_rng(17)
        vectors = [
            rl.RDVector(f"g{i}", t1080, tuple(rng.uniform(15, 60, 10))) for i in range(50)
        ]
        for seed in range(5):
            result = rl.kmeans(vectors, k=5, seed=seed)
            history = result.inertia_history
            assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_labels_are_nearest_centroids(self, t1080):
        rng = np.random.default_rng(23)
        vectors = [
            rl.RDVector(f"g{i}", t1080, tuple(rng.uniform(15, 60, 10))) for i in range(40)
        ]
        result = rl.kmeans(vectors, k=4, seed=3)
        x = np.stack([v.as_array() for v in vectors])
        d2 = ((x[:, None, :] - result.centroids[None]) ** 2).sum(axis=2)
        assert np.array_equal(np.asarray(result.labels), d2.argmin(axis=1))

    def test_insufficient_vectors(self, t1080):
        with pytest.raises(InsufficientDataError):
            rl.kmeans([const_vector("g", t1080, 30.0)], k=2, seed=0)

    def test_empty_cluster_reseeded_at_farthest_point(self, t1080):
        # Force an empty cluster via an explicit init far from all data.
        vectors = [const_vector(f"a{i}", t1080, 10.0 + 0.01 * i) for i in range(5)] + [
            const_vector(f"b{i}", t1080, 50.0 + 0.01 * i) for i in range(5)
        ]
        init = np.stack(
            [
                np.full(10, 10.0),
                np.full(10, 10.5),
                np.full(10, 99.0),  # nobody will pick this one
            ]
        )
        result = rl.kmeans(vectors, k=3, seed=0, init_centroids=init)
        assert sorted(set(result.labels)) == [0, 1, 2]
        history = result.inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_recovers_reference_partition_with_noise(self, paper_model, t1080):
        grid = paper_model.grid
        clusters = [c for c in range(1, 7) for _ in range(10)]
        for seed in (0, 1, 2):
            rng = np.random.default_rng(1000 + seed)
            by_tier = grouped_vectors(clusters, [t1080], grid, paper_model, noise=0.1, rng=rng)
            result = rl.kmeans(by_tier[t1080], k=6, seed=seed)
            mapping = {}
            for want, got in zip(clusters, result.labels):
                mapping.setdefault(want, set()).add(got)
            assert all(len(v) == 1 for v in mapping.values())
            assert len({v.pop() for v in mapping.values()}) == 6


class TestTrain:
    def test_single_tier_reproduces_generating_cubics(self, paper_model, t1080):
        grid = paper_model.grid
        by_tier = grouped_vectors([1, 2, 3, 4, 5, 6], [t1080], grid, paper_model)
        trained = rl.train(by_tier, grid, k=6, seed=42)
        for c in range(1, 7):
            got = trained.model(c, t1080).coefficients
            want = paper_model.model(c, t1080).coefficients
            assert got == pytest.approx(want, abs=1e-6)

    def test_two_identical_tiers_match_identically(self, paper_model, t720, t1080):
        grid = paper_model.grid
        base = grouped_vectors([1, 2, 3, 4, 5, 6], [t1080], grid, paper_model)
        clone = [
            rl.RDVector(v.gop_id, t720, v.psnr) for v in base[t1080]
        ]
        trained = rl.train({t1080: base[t1080], t720: clone}, grid, k=6, seed=42)
        for c in range(1, 7):
            assert trained.model(c, t720).coefficients == trained.model(c, t1080).coefficients
            assert trained.centroid(c, t720) == trained.centroid(c, t1080)

    def test_cross_tier_correspondence_by_membership(self, paper_model):
        # Ten GOPs per cluster measured at all four tiers: after training,
        # cluster c at every tier must hold the curves generated from the
        # reference model's cluster c, not a neighbour with similar mean.
        grid = paper_model.grid
        clusters = [c for c in range(1, 7) for _ in range(10)]
        rng = np.random.default_rng(77)
        by_tier = grouped_vectors(clusters, paper_model.tiers, grid, paper_model, 0.05, rng)
        trained = rl.train(by_tier, grid, k=6, seed=42)
        for c in range(1, 7):
            for tier in paper_model.tiers:
                want = np.mean(paper_model.centroid(c, tier))
                got = np.mean(trained.centroid(c, tier))
                assert abs(want - got) < 0.1

    def test_train_details_reports_per_tier_kmeans(self, paper_model, t1080):
        grid = paper_model.grid
        by_tier = grouped_vectors([1, 2, 3, 4, 5, 6], [t1080], grid, paper_model)
        _, results = train_details(by_tier, grid, k=6, seed=42)
        assert set(results) == {t1080}
        assert results[t1080].inertia == pytest.approx(0.0, abs=1e-12)

    def test_insufficient_vectors_per_tier(self, paper_model, t1080):
        grid = paper_model.grid
        by_tier = grouped_vectors([1, 2, 3], [t1080], grid, paper_model)
        with pytest.raises(InsufficientDataError):
            rl.train(by_tier, grid, k=6, seed=42)


class TestAssign:
    def test_point_on_curve(self, paper_model, t1080):
        q = rl.eval_cubic(paper_model.model(3, t1080), 5.018)
        assignment = rl.assign_cluster((5.018, q), paper_model, t1080, gop_id="g")
        assert assignment.cluster == 3
        assert assignment.distance < 1e-9
        # The reference threshold bitrate evaluates to 40 dB on this curve.
        assert q == pytest.approx(40.0, abs=0.01)

    def test_reference_test_video(self, paper_model, t1080):
        # A published test video's (bitrate, PSNR) pair sits nearest the
        # cluster-6 centroid (cluster 5 is ~5.9 dB away, cluster 6 ~1.7).
        assignment = rl.assign_cluster((5.617, 54.665), paper_model, t1080)
        assert assignment.cluster == 6
        assert assignment.distance == pytest.approx(1.725, abs=0.01)

    def test_tie_breaks_toward_lower_cluster(self, paper_model, t1080):
        q1 = rl.eval_cubic(paper_model.model(1, t1080), 3.0)
        q2 = rl.eval_cubic(paper_model.model(2, t1080), 3.0)
        assignment = rl.assign_cluster((3.0, (q1 + q2) / 2), paper_model, t1080)
        assert assignment.cluster == 1

    def test_multi_reduces_to_single_for_one_point(self, paper_model, t1080):
        point = (2.5, 41.0)
        single = rl.assign_cluster(point, paper_model, t1080)
        multi = rl.assign_cluster_multi([point], paper_model, t1080)
        assert (single.cluster, single.distance) == (multi.cluster, multi.distance)

    def test_multi_on_curve(self, paper_model, t720):
        model = paper_model.model(2, t720)
        points = [(float(b), rl.eval_cubic(model, float(b))) for b in np.linspace(0.3, 5.7, 10)]
        assignment = rl.assign_cluster_multi(points, paper_model, t720)
        assert assignment.cluster == 2
        assert assignment.distance < 1e-9

    def test_multi_straddling_ties_low(self, paper_model, t1080):
        m1, m2 = paper_model.model(1, t1080), paper_model.model(2, t1080)
        points = []
        for r in (1.0, 4.0):
            mid = (rl.eval_cubic(m1, r) + rl.eval_cubic(m2, r)) / 2
            points.append((r, mid))
        assignment = rl.assign_cluster_multi(points, paper_model, t1080)
        assert assignment.cluster == 1

    def test_errors(self, paper_model, t1080):
        with pytest.raises(ValidationError):
            rl.assign_cluster_multi([], paper_model, t1080)
        with pytest.raises(ValidationError):
            rl.assign_cluster((0.0, 30.0), paper_model, t1080)
        with pytest.raises(ValidationError):
            rl.assign_cluster((1.0, 30.0), paper_model, rl.tier_from_name("1440p"))


def test_model_set_must_be_complete(paper_model):
    models = dict(paper_model.models)
    centroids = dict(paper_model.centroids)
    key = (1, paper_model.tiers[0])
    del models[key]
    with pytest.raises(ValidationError):
        rl.ClusterModelSet(
            k=paper_model.k,
            grid=paper_model.grid,
            tiers=paper_model.tiers,
            centroids=centroids,
            models=models,
            seed=0,
            provenance="broken",
        )
