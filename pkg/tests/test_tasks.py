import numpy as np
import pytest

from auxlab.optim import TaskWeighting
from auxlab.tasks import (
    CsvFormatError,
    DataSplit,
    TaskFamilyConfig,
    branch_data_view,
    family_geometry,
    generate_family,
    load_csv,
    load_family,
    sample_interpolated,
    write_csv,
    write_family,
)
from auxlab.vectors import RngStream


def cfg(relatedness, **kw):
    defaults = dict(
        n_tasks=1 + len(relatedness),
        relatedness=tuple(relatedness),
        input_dim=2,
        n_classes=4,
        n_train=50,
        n_val=20,
        n_test=20,
        noise_std=0.3,
        seed=11,
    )
    defaults.update(kw)
    return TaskFamilyConfig(**defaults)


class TestGeometry:
    def test_r1_matches_target_generator(self):
        geo = family_geometry(cfg([1.0]))
        np.testing.assert_array_equal(geo.aux_means[0], geo.target_means)
        assert geo.label_flip_probs[0] == 0.0

    def test_r0_maximal_displacement_and_half_flips(self):
        geo = family_geometry(cfg([0.0, 0.5, 1.0]))
        assert geo.label_flip_probs[0] == 0.5
        d0, d5, d10 = (geo.displacement(i) for i in range(3))
        assert d0 > d5 > d10 == 0.0

    def test_displacement_monotone_in_relatedness(self):
        rs = [0.0, 0.1, 0.25, 0.4, 0.6, 0.75, 0.9, 1.0]
        geo = family_geometry(cfg(rs))
        disp = [geo.displacement(i) for i in range(len(rs))]
        assert all(a >= b for a, b in zip(disp, disp[1:]))

    def test_target_means_on_circle(self):
        geo = family_geometry(cfg([0.5], mean_scale=3.0, input_dim=5))
        radii = np.linalg.norm(geo.target_means[:, :2], axis=1)
        np.testing.assert_allclose(radii, 3.0, rtol=1e-12)
        assert np.all(geo.target_means[:, 2:] == 0.0)


class TestGenerateFamily:
    def test_deterministic(self):
        a = generate_family(cfg([0.5]))
        b = generate_family(cfg([0.5]))
        for t in a.task_ids:
            for s in ("train", "val", "test"):
                np.testing.assert_array_equal(a.split(t, s).inputs, b.split(t, s).inputs)
                np.testing.assert_array_equal(a.split(t, s).targets, b.split(t, s).targets)

    def test_splits_disjoint_by_row_hash(self):
        fam = generate_family(cfg([0.2]))
        for t in fam.task_ids:
            seen = set()
            for s in ("train", "val", "test"):
                for row in fam.split(t, s).inputs:
                    seen_len = len(seen)
                    seen.add(row.tobytes())
                    assert len(seen) == seen_len + 1, "duplicate row across splits"

    def test_counts_and_labels(self):
        fam = generate_family(cfg([0.5, 0.9], n_train=37, n_val=11, n_test=13))
        assert fam.task_ids == (0, 1, 2)
        for t in fam.task_ids:
            assert len(fam.train(t)) == 37
            assert len(fam.val(t)) == 11
            assert len(fam.test(t)) == 13
            labels = fam.train(t).targets
            assert labels.min() >= 0 and labels.max() < 4

    def test_per_task_train_counts(self):
        fam = generate_family(cfg([0.9], n_train=(200, 2000)))
        assert len(fam.train(0)) == 200
        assert len(fam.train(1)) == 2000

    def test_aux_label_flip_rate_near_expected(self):
        # r=0: flip probability 0.5; measure against the same family regenerated
        # with r=1 on matched streams is impossible (streams differ), so check
        # statistically against the class-conditional structure instead.
        fam = generate_family(cfg([0.0], n_train=4000, noise_std=0.01, seed=3))
        geo = family_geometry(cfg([0.0], n_train=4000, noise_std=0.01, seed=3))
        split = fam.train(1)
        # with tiny noise, nearest aux mean recovers the generative label
        dists = np.linalg.norm(split.inputs[:, None, :] - geo.aux_means[0][None], axis=2)
        true_labels = dists.argmin(axis=1)
        flip_rate = np.mean(split.targets != true_labels)
        assert abs(flip_rate - 0.5) < 4 * np.sqrt(0.25 / 4000)
        flipped = split.targets[split.targets != true_labels]
        expected = (true_labels[split.targets != true_labels] + 1) % 4
        np.testing.assert_array_equal(flipped, expected)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TaskFamilyConfig(n_tasks=2, relatedness=(0.5, 0.5))
        with pytest.raises(ValueError):
            TaskFamilyConfig(n_tasks=2, relatedness=(1.5,))
        with pytest.raises(ValueError):
            TaskFamilyConfig(n_tasks=2, relatedness=(0.5,), n_val=0)
        with pytest.raises(ValueError):
            TaskFamilyConfig(n_tasks=2, relatedness=(0.5,), input_dim=1)
        with pytest.raises(ValueError):
            TaskFamilyConfig(n_tasks=3, relatedness=(0.5, 0.5), n_train=(10, 10))


class TestSampleInterpolated:
    def make_pair(self):
        tgt = DataSplit(np.zeros((500, 2)), np.zeros(500, dtype=int), 0)
        aux = DataSplit(np.ones((500, 2)), np.ones(500, dtype=int), 1)
        return tgt, aux

    def test_lambda_zero_all_target(self):
        tgt, aux = self.make_pair()
        out = sample_interpolated(tgt, aux, 0.0, 200, RngStream(5))
        assert np.all(out.inputs == 0.0)
        assert out.task_id == 0

    @pytest.mark.parametrize("lam,expected", [(1.0, 0.5), (1.0 / 3.0, 0.25)])
    def test_aux_fraction_binomial(self, lam, expected):
        tgt, aux = self.make_pair()
        n = 10_000
        out = sample_interpolated(tgt, aux, lam, n, RngStream(7).child("mix"))
        frac = float(np.mean(out.inputs[:, 0]))
        sigma = np.sqrt(expected * (1 - expected) / n)
        assert abs(frac - expected) <= 4 * sigma

    def test_rejects_negative_lambda_and_dim_mismatch(self):
        tgt, aux = self.make_pair()
        with pytest.raises(ValueError):
            sample_interpolated(tgt, aux, -0.1, 10, RngStream(0))
        bad = DataSplit(np.ones((5, 3)), np.ones(5, dtype=int), 1)
        with pytest.raises(ValueError):
            sample_interpolated(tgt, bad, 0.5, 10, RngStream(0))


class TestBranchDataView:
    def test_target_only(self):
        fam = generate_family(cfg([0.5, 0.5]))
        view = branch_data_view(fam, TaskWeighting({0: 1.0}))
        assert set(view) == {0}

    def test_zero_weight_excluded(self):
        fam = generate_family(cfg([0.5, 0.5]))
        view = branch_data_view(fam, TaskWeighting({0: 1.0, 1: 0.0, 2: 0.5}))
        assert set(view) == {0, 2}
        assert view[2] is fam.train(2)

    def test_all_tasks(self):
        fam = generate_family(cfg([0.5, 0.5, 0.5]))
        w = TaskWeighting({0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})
        assert set(branch_data_view(fam, w)) == {0, 1, 2, 3}


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        fam = generate_family(cfg([0.3]))
        path = tmp_path / "t.csv"
        write_csv(fam.train(1), path)
        back = load_csv(path, input_dim=2, n_classes=4, task_id=1)
        np.testing.assert_array_equal(back.inputs, fam.train(1).inputs)
        np.testing.assert_array_equal(back.targets, fam.train(1).targets)
        assert back.task_id == 1

    def test_small_file(self, tmp_path):
        p = tmp_path / "mini.csv"
        p.write_text("f0,f1,label\n0.5,1.5,0\n-1.0,2.0,1\n0.0,0.0,2\n")
        split = load_csv(p, input_dim=2, n_classes=4)
        assert len(split) == 3
        assert split.inputs[1, 0] == -1.0

    def test_bad_feature_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,f1,label\noops,1.0,0\n")
        with pytest.raises(CsvFormatError, match="line 2"):
            load_csv(p, input_dim=2, n_classes=4)

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,f1,label\n1.0,1.0,7\n")
        with pytest.raises(CsvFormatError, match="label 7"):
            load_csv(p, input_dim=2, n_classes=4)

    def test_header_mismatch(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y,label\n1.0,1.0,0\n")
        with pytest.raises(CsvFormatError, match="header"):
            load_csv(p, input_dim=2, n_classes=4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", input_dim=2, n_classes=4)

    def test_family_round_trip(self, tmp_path):
        fam = generate_family(cfg([0.4, 0.8]))
        write_family(fam, tmp_path)
        back = load_family(tmp_path, n_tasks=3, input_dim=2, n_classes=4)
        assert back.task_ids == fam.task_ids
        np.testing.assert_array_equal(back.val(2).inputs, fam.val(2).inputs)
