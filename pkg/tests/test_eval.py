"""Evaluation protocol: error metrics, statistics, the method registry,
the whole-trajectory driver and the timing harness."""

import math

import numpy as np
import pytest

from posecorrect import fixtures
from posecorrect.baseline import RotSpace, TransSpace
from posecorrect.evaluate import (
    METHODS,
    ErrorStats,
    MethodConfig,
    bench,
    correct_trajectory,
    frame_errors,
    run_protocol,
    write_report_csv,
)
from posecorrect.liegeom import Pose, Rotation, rotation_angle_deg, so3_exp
from posecorrect.trajectory import (
    FrameId,
    identity_updates,
    snap_to_gt,
    world_poses,
)


class TestErrorStats:
    def test_constant_list(self):
        stats = ErrorStats.from_values([2.5, 2.5, 2.5, 2.5])
        assert stats.mean == 2.5
        assert stats.std == 0.0
        assert stats.median == 2.5
        assert stats.count == 4

    def test_sample_std(self):
        stats = ErrorStats.from_values([1.0, 3.0])
        assert abs(stats.std - math.sqrt(2.0)) < 1e-12

    def test_single_value_std_zero(self):
        assert ErrorStats.from_values([7.0]).std == 0.0

    def test_median_within_range(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0, 10, size=101)
        stats = ErrorStats.from_values(vals)
        assert vals.min() <= stats.median <= vals.max()

    def test_empty(self):
        stats = ErrorStats.from_values([])
        assert stats.count == 0 and math.isnan(stats.mean)

    def test_format_convention(self):
        assert ErrorStats(1.234, 0.56, 0.987, 10).format() == "1.234+-0.56 (0.987)"


class TestFrameErrors:
    def _random_poses(self, rng, n=20):
        return [
            (FrameId(0.1 * i, i), Pose(Rotation.random(rng), rng.normal(size=3)))
            for i in range(n)
        ]

    def test_est_equals_gt_all_zero(self):
        poses = self._random_poses(np.random.default_rng(1))
        for e in frame_errors(poses, poses):
            assert e.translation_cm == 0.0
            assert e.rotation_deg == 0.0

    def test_one_centimeter_shift(self):
        poses = self._random_poses(np.random.default_rng(2))
        est = [
            (fid, Pose(p.rotation, p.translation + np.array([0.01, 0.0, 0.0])))
            for fid, p in poses
        ]
        for e in frame_errors(est, poses):
            assert abs(e.translation_cm - 1.0) < 1e-9
            assert e.rotation_deg < 1e-9

    def test_double_entry_against_independent_recompute(self):
        rng = np.random.default_rng(3)
        gt = self._random_poses(rng)
        est = [
            (fid, Pose(so3_exp(rng.normal(0, 0.1, 3)) * p.rotation, p.translation + rng.normal(0, 0.2, 3)))
            for fid, p in gt
        ]
        errors = frame_errors(est, gt)
        for (fid, pe), (_, pg), err in zip(est, gt, errors):
            t_ref = float(np.sqrt(np.sum((pe.translation - pg.translation) ** 2))) * 100.0
            m = pe.rotation.matrix.T @ pg.rotation.matrix
            c = min(1.0, max(-1.0, (np.trace(m) - 1.0) / 2.0))
            r_ref = math.degrees(math.acos(c))
            assert abs(err.translation_cm - t_ref) < 1e-9
            assert abs(err.rotation_deg - r_ref) < 1e-6


class TestDriver:
    def test_identity_updates_keep_world_poses(self):
        traj, _ = fixtures.noisy_fixture(0)
        updates = identity_updates(traj)
        for name in METHODS:
            world, _ = correct_trajectory(traj, updates, MethodConfig(name))
            baseline = world_poses(traj)
            for (fa, pa), (fb, pb) in zip(baseline, world):
                assert fa == fb
                assert np.linalg.norm(pa.translation - pb.translation) < 1e-12
                assert rotation_angle_deg(pa.rotation, pb.rotation) < 1e-10

    def test_threads_match_sequential_bitwise(self):
        traj, gt = fixtures.noisy_fixture(1)
        updates = snap_to_gt(traj, gt)
        for name in ("proposed", "se3-v"):
            cfg = MethodConfig(name)
            seq, _ = correct_trajectory(traj, updates, cfg, threads=1)
            par, _ = correct_trajectory(traj, updates, cfg, threads=4)
            for (fa, pa), (fb, pb) in zip(seq, par):
                assert fa == fb
                np.testing.assert_array_equal(pa.translation, pb.translation)
                np.testing.assert_array_equal(pa.rotation.quat, pb.rotation.quat)

    def test_update_count_mismatch_rejected(self):
        traj, _ = fixtures.noisy_fixture(2)
        with pytest.raises(ValueError, match="one update per keyframe"):
            correct_trajectory(traj, [], MethodConfig("proposed"))

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="unknown method"):
            MethodConfig("bspline")

    def test_method_space_pairing(self):
        cfg = MethodConfig("xyz", rot_space=RotSpace.SO3)
        assert cfg.spaces() == (TransSpace.XYZ, RotSpace.SO3)
        cfg = MethodConfig("euler", trans_space=TransSpace.SE3_V)
        assert cfg.spaces() == (TransSpace.SE3_V, RotSpace.EULER)
        with pytest.raises(ValueError):
            MethodConfig("proposed").spaces()


class TestRunProtocol:
    def test_gt_as_estimate_zero_for_every_method(self):
        scene_traj, gt = fixtures.noisy_fixture(3)
        from posecorrect.trajectory import from_world_poses

        kf_positions = [kf.id.index for kf in scene_traj.keyframes]
        # Build the estimate from the GT itself.
        positions = [i for i, (fid, _) in enumerate(gt) if fid.index in set(kf_positions)]
        traj = from_world_poses(gt, positions)
        for name in METHODS:
            report, errors = run_protocol(traj, gt, MethodConfig(name))
            assert report.translation.mean < 1e-10, name
            assert report.rotation.mean < 1e-8, name

    def test_pure_similarity_exact_for_every_method(self):
        # A clean similarity update scales every vectorization uniformly,
        # so even the element-wise baselines reproduce it; the proposed
        # method's advantage needs a non-similarity component.
        scene, update, target = fixtures.similarity_case(4)
        traj = scene.trajectory
        for name in METHODS:
            report, _ = run_protocol(traj, target, MethodConfig(name))
            assert report.translation.mean < 1e-9, name

    def test_perturbed_update_proposed_near_floor_baselines_above(self):
        traj, gt = fixtures.noisy_fixture(0)
        proposed, _ = run_protocol(traj, gt, MethodConfig("proposed"))
        for name in ("xyz", "se3-v", "no-correction"):
            report, _ = run_protocol(traj, gt, MethodConfig(name))
            assert report.translation.mean > 1.5 * proposed.translation.mean, name

    def test_relative_frames_only_are_scored(self):
        traj, gt = fixtures.noisy_fixture(4)
        report, errors = run_protocol(traj, gt, MethodConfig("no-correction"))
        assert report.translation.count == len(traj.relatives)
        rel_ids = {rel.id for rel in traj.relatives}
        assert all(e.frame in rel_ids for e in errors)


class TestBench:
    def test_small_fixture_timing_stats(self):
        from posecorrect.correction import correct_segment

        seg, upd_a, upd_b = fixtures.bench_segment()
        stats = bench(
            lambda fx: correct_segment(fx[0], fx[1], fx[2]),
            [(seg, upd_a, upd_b)],
            repetitions=50,
            warmup=5,
        )
        assert stats.count == 50
        assert stats.median > 0.0 and math.isfinite(stats.median)
        assert stats.mean > 0.0 and stats.std >= 0.0

    def test_proposed_and_so3_same_order_of_magnitude(self):
        # Reference timings put the slerp-based correction a few times
        # slower than the so(3) interpolation, same order of magnitude.
        # Wall-clock ordering is too flaky to pin down in CI, so only the
        # magnitude bound is asserted.
        from posecorrect.evaluate import _correct_one_segment

        seg, upd_a, upd_b = fixtures.bench_segment()
        medians = {}
        for name in ("so3", "proposed"):
            cfg = MethodConfig(name)
            stats = bench(
                lambda fx, cfg=cfg: _correct_one_segment(fx[0], fx[1], fx[2], cfg),
                [(seg, upd_a, upd_b)],
                repetitions=80,
                warmup=20,
            )
            medians[name] = stats.median
        ratio = medians["proposed"] / medians["so3"]
        assert 1.0 / 100.0 < ratio < 100.0


class TestSingularDiagnostics:
    def test_cross_module_singular_hit_counts(self):
        # The constructed singular fixture trips the per-component guard
        # for the element-wise spaces; the proposed correction performs no
        # such division and reports zero hits.
        traj, gt = fixtures.singular_fixture()
        se3v, _ = run_protocol(traj, gt, MethodConfig("se3-v"))
        proposed, _ = run_protocol(traj, gt, MethodConfig("proposed"))
        assert se3v.singular_hits >= 1
        assert proposed.singular_hits == 0
        assert proposed.degenerate_segments == 0


class TestReportCsv:
    def test_report_columns_and_determinism(self, tmp_path):
        traj, gt = fixtures.noisy_fixture(5)
        rows = []
        for name in ("no-correction", "proposed"):
            report, _ = run_protocol(traj, gt, MethodConfig(name))
            rows.append(("fixture5", report))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report_csv(p1, rows)
        write_report_csv(p2, rows)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == (
            "sequence,method,t_mean_cm,t_std_cm,t_median_cm,"
            "r_mean_deg,r_std_deg,r_median_deg,singular_hits,time_ms_median"
        )
        # Timing stays empty in evaluation reports.
        assert p1.read_text().splitlines()[1].endswith(",")
