import numpy as np
import pytest

from camcal.depth import DepthMap
from camcal.geometry import (
    DegenerateGeometryError,
    PointCloud,
    SimilarityTransform,
    mean_relative_distance,
    metrology_distance,
    pose_error,
    procrustes,
    project,
    read_ply,
    unproject,
    write_ply,
)


def _rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    K = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def _random_similarity(rng):
    R = _rotation(rng.normal(size=3), rng.uniform(0.1, 3.0))
    return SimilarityTransform(
        sigma=rng.uniform(0.2, 5.0), R=R, t=rng.normal(scale=2.0, size=3)
    )


class TestUnproject:
    def test_principal_pixel(self, default_K):
        depth = DepthMap.from_array(np.full((480, 640), 2.0))
        cloud = unproject(depth, default_K)
        idx = np.flatnonzero((cloud.pixels == [320, 240]).all(axis=1))[0]
        np.testing.assert_allclose(cloud.points[idx], [0, 0, 2], atol=1e-12)

    def test_unit_offset(self, default_K):
        depth = DepthMap.from_array(np.full((480, 900), 1.0))
        cloud = unproject(depth, default_K)
        idx = np.flatnonzero((cloud.pixels == [320 + 500, 240]).all(axis=1))[0]
        np.testing.assert_allclose(cloud.points[idx], [1, 0, 1], atol=1e-12)

    def test_z_equals_depth_and_reprojects(self, default_K):
        rng = np.random.default_rng(0)
        raw = rng.uniform(0.5, 8.0, (48, 64))
        mask = rng.uniform(size=raw.shape) > 0.3
        depth = DepthMap.from_array(raw, mask)
        cloud = unproject(depth, default_K)
        assert len(cloud) == mask.sum()
        np.testing.assert_array_equal(
            cloud.points[:, 2], raw[mask]
        )
        pixels = project(cloud.points, default_K)
        np.testing.assert_allclose(pixels, cloud.pixels, atol=1e-9)

    def test_empty_mask(self, default_K):
        depth = DepthMap(np.ones((4, 4)), np.zeros((4, 4), dtype=bool))
        assert len(unproject(depth, default_K)) == 0


class TestMetrology:
    @pytest.fixture
    def plane(self):
        return DepthMap.from_array(np.full((480, 640), 2.0))

    def test_same_pixel(self, plane, default_K):
        assert metrology_distance(plane, default_K, (10, 10), (10, 10)) == 0.0

    def test_fronto_parallel_width(self, plane, default_K):
        # pixels cx +- fx/2 at depth 2 unproject to x = -+0.5 * 2
        a = (int(default_K.cx - default_K.fx / 2), int(default_K.cy))
        b = (int(default_K.cx + default_K.fx / 2), int(default_K.cy))
        assert metrology_distance(plane, default_K, a, b) == pytest.approx(2.0, abs=1e-9)

    def test_swap_invariant(self, plane, default_K):
        a, b = (100, 200), (500, 30)
        d1 = metrology_distance(plane, default_K, a, b)
        d2 = metrology_distance(plane, default_K, b, a)
        assert d1 == d2

    def test_scales_with_depth(self, default_K):
        near = DepthMap.from_array(np.full((480, 640), 2.0))
        far = DepthMap.from_array(np.full((480, 640), 4.0))
        a, b = (100, 240), (600, 100)
        d_near = metrology_distance(near, default_K, a, b)
        d_far = metrology_distance(far, default_K, a, b)
        assert d_far == pytest.approx(2.0 * d_near, rel=1e-12)

    def test_invalid_pixels(self, plane, default_K):
        with pytest.raises(ValueError):
            metrology_distance(plane, default_K, (-1, 0), (1, 1))
        with pytest.raises(ValueError):
            metrology_distance(plane, default_K, (0, 0), (640, 0))
        masked = DepthMap(plane.depth, np.zeros_like(plane.mask))
        with pytest.raises(ValueError):
            metrology_distance(masked, default_K, (0, 0), (1, 1))


class TestProcrustes:
    def test_identity(self):
        rng = np.random.default_rng(1)
        x = PointCloud(rng.normal(size=(30, 3)))
        T, residual = procrustes(x, x)
        assert T.sigma == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(T.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(T.t, 0.0, atol=1e-12)
        assert residual < 1e-12

    def test_forward_construction(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(40, 3))
        R = _rotation([0, 0, 1], np.pi / 2)
        T_true = SimilarityTransform(2.0, R, np.array([1.0, 0.0, 0.0]))
        T, residual = procrustes(PointCloud(x), PointCloud(T_true.apply(x)))
        assert abs(T.sigma - 2.0) < 1e-9
        np.testing.assert_allclose(T.R, R, atol=1e-9)
        np.testing.assert_allclose(T.t, T_true.t, atol=1e-9)
        assert residual < 1e-9

    def test_hundred_random_similarities(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            T_true = _random_similarity(rng)
            x = rng.normal(size=(25, 3))
            T, residual = procrustes(PointCloud(x), PointCloud(T_true.apply(x)))
            assert residual < 1e-9
            assert abs(T.sigma - T_true.sigma) / T_true.sigma < 1e-9
            np.testing.assert_allclose(T.R, T_true.R, atol=1e-9)
            np.testing.assert_allclose(T.t, T_true.t, atol=1e-7)

    def test_reflection_guard(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 3))
        mirrored = x.copy()
        mirrored[:, 0] *= -1
        T, residual = procrustes(PointCloud(x), PointCloud(mirrored))
        assert np.linalg.det(T.R) == pytest.approx(1.0, abs=1e-9)
        assert residual > 0.1

    def test_too_few_points(self):
        x = PointCloud(np.random.default_rng(0).normal(size=(2, 3)))
        with pytest.raises(DegenerateGeometryError):
            procrustes(x, x)

    def test_collinear_rejected(self):
        line = np.outer(np.linspace(0, 1, 10), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateGeometryError):
            procrustes(PointCloud(line), PointCloud(line * 2.0))

    def test_residual_invariant_under_shared_motion(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 3))
        y = x + rng.normal(scale=0.05, size=(30, 3))
        _, base = procrustes(PointCloud(x), PointCloud(y))
        motion = SimilarityTransform(1.0, _rotation([1, 1, 0], 0.7), np.array([3.0, -1.0, 2.0]))
        _, moved = procrustes(
            PointCloud(motion.apply(x)), PointCloud(motion.apply(y))
        )
        assert moved == pytest.approx(base, rel=1e-9)


class TestPoseError:
    def test_identity(self):
        T = SimilarityTransform.identity()
        err = pose_error(T, T)
        assert (err.t_rel, err.r_rel) == (0.0, 0.0)

    @pytest.mark.parametrize("axis", [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    def test_ten_degree_rotation(self, axis):
        a = SimilarityTransform.identity()
        b = SimilarityTransform(1.0, _rotation(axis, np.deg2rad(10.0)), np.zeros(3))
        assert pose_error(a, b).r_rel == pytest.approx(10.0, abs=1e-9)

    def test_translation_norm(self):
        a = SimilarityTransform.identity()
        b = SimilarityTransform(1.0, np.eye(3), np.array([3.0, 4.0, 0.0]))
        assert pose_error(a, b).t_rel == pytest.approx(5.0, abs=1e-12)

    def test_angle_range(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = SimilarityTransform(1.0, _rotation(rng.normal(size=3), rng.uniform(0, np.pi)), np.zeros(3))
            b = SimilarityTransform(1.0, _rotation(rng.normal(size=3), rng.uniform(0, np.pi)), np.zeros(3))
            assert 0.0 <= pose_error(a, b).r_rel <= 180.0


class TestSimilarityTransformType:
    def test_rejects_improper_rotation(self):
        bad = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            SimilarityTransform(1.0, bad, np.zeros(3))

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            SimilarityTransform(0.0, np.eye(3), np.zeros(3))


class TestMeanRelativeDistance:
    def test_exact(self):
        rng = np.random.default_rng(7)
        gt = PointCloud(rng.normal(size=(30, 3)))
        assert mean_relative_distance(gt, gt) < 1e-12

    def test_similarity_absorbed(self):
        rng = np.random.default_rng(8)
        gt = PointCloud(rng.normal(size=(30, 3)))
        pred = PointCloud(_random_similarity(rng).apply(gt.points))
        assert mean_relative_distance(pred, gt) < 1e-9

    def test_matches_bruteforce_oracle(self):
        # independent reimplementation: textbook Umeyama via the homogeneous
        # matrix construction, then the definition evaluated directly
        rng = np.random.default_rng(9)
        gt_pts = rng.normal(size=(60, 3)) * 2.0
        pred_pts = gt_pts + rng.normal(scale=0.1, size=(60, 3))

        def oracle(x, y):
            n, m = x.shape
            mu_x, mu_y = x.mean(0), y.mean(0)
            cov = (y - mu_y).T @ (x - mu_x) / n
            U, d, Vt = np.linalg.svd(cov)
            S = np.eye(m)
            if np.linalg.det(U) * np.linalg.det(Vt.T) < 0:
                S[-1, -1] = -1
            c = (d * S.diagonal()).sum() / (x - mu_x).var(axis=0).sum()
            A = np.eye(m + 1)
            A[:m, :m] = c * (U @ S @ Vt)
            A[:m, m] = mu_y - c * (U @ S @ Vt) @ mu_x
            aligned = (A @ np.c_[x, np.ones(n)].T).T[:, :m]
            rms_extent = np.sqrt(np.mean(np.sum((y - mu_y) ** 2, axis=1)))
            return np.mean(np.linalg.norm(aligned - y, axis=1)) / rms_extent

        expected = oracle(pred_pts, gt_pts)
        got = mean_relative_distance(PointCloud(pred_pts), PointCloud(gt_pts))
        assert got == pytest.approx(expected, rel=1e-9)

    def test_degenerate_gt(self):
        pred = PointCloud(np.random.default_rng(0).normal(size=(5, 3)))
        gt = PointCloud(np.zeros((5, 3)))
        with pytest.raises(DegenerateGeometryError):
            mean_relative_distance(pred, gt)


class TestPly:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        cloud = PointCloud(rng.normal(size=(25, 3)))
        path = tmp_path / "c.ply"
        write_ply(path, cloud)
        back = read_ply(path)
        np.testing.assert_allclose(back.points, cloud.points, atol=1e-6)

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text("not a ply\n")
        with pytest.raises(ValueError):
            read_ply(path)

    def test_truncated_vertices(self, tmp_path):
        path = tmp_path / "trunc.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 5\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\n0 0 0\n1 1 1\n"
        )
        with pytest.raises(ValueError):
            read_ply(path)
