import numpy as np
import pytest

from qsurrogate.ingest import (
    DatasetError,
    generate_clustered_dataset,
    load_dataset,
    save_dataset,
    stratified_split,
)


class TestGenerator:
    def test_deterministic(self):
        a = generate_clustered_dataset(4, 3, 5, anchor_depth=6, seed=7)
        b = generate_clustered_dataset(4, 3, 5, anchor_depth=6, seed=7)
        c = generate_clustered_dataset(4, 3, 5, anchor_depth=6, seed=8)
        assert a.content_hash() == b.content_hash() != c.content_hash()
        assert a.ids[0] == "l0_0000" and a.ids[-1] == "l2_0004"
        np.testing.assert_array_equal(a.labels, np.repeat([0, 1, 2], 5))

    def test_zero_noise_collapses_clusters(self):
        ds = generate_clustered_dataset(4, 2, 4, anchor_depth=8, noise_scale=0.0, seed=1)
        s = ds.feature_states()
        for lab in range(2):
            block = s[ds.labels == lab]
            fid = np.abs(block.conj() @ block.T) ** 2
            np.testing.assert_allclose(fid, 1.0, atol=1e-12)

    def test_clusters_are_separated(self):
        ds = generate_clustered_dataset(6, 4, 50, anchor_depth=20, noise_scale=0.1, seed=0)
        s = ds.feature_states()
        fid = np.abs(s.conj() @ s.T) ** 2
        same = ds.labels[:, None] == ds.labels[None, :]
        off = ~np.eye(len(s), dtype=bool)
        assert fid[same & off].mean() >= 0.8
        assert fid[~same].mean() <= 0.2

    @pytest.mark.parametrize("n", [4, 6])
    def test_anchor_overlap_near_random(self, n):
        ds = generate_clustered_dataset(n, 10, 1, noise_scale=0.0, seed=0)
        s = ds.feature_states()
        fid = np.abs(s.conj() @ s.T) ** 2
        mean = fid[~np.eye(10, dtype=bool)].mean()
        assert 0.25 * 2.0**-n < mean < 4 * 2.0**-n

    def test_single_label_is_valid(self):
        ds = generate_clustered_dataset(3, 1, 4, anchor_depth=2)
        assert ds.label_count == 1 and len(ds) == 4

    def test_rejects_bad_arguments(self):
        with pytest.raises(DatasetError):
            generate_clustered_dataset(1, 2, 2)
        with pytest.raises(DatasetError):
            generate_clustered_dataset(3, 2, 2, noise_scale=-1)


class TestStorage:
    def test_round_trip(self, tmp_path):
        ds = generate_clustered_dataset(3, 2, 3, anchor_depth=4, seed=3)
        save_dataset(ds, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert back.content_hash() == ds.content_hash()
        np.testing.assert_array_equal(back.feature_states(), ds.feature_states())

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            load_dataset(tmp_path / "nope")

    def test_bad_qasm_reports_position(self, tmp_path):
        ds = generate_clustered_dataset(3, 2, 2, anchor_depth=2, seed=3)
        root = save_dataset(ds, tmp_path / "d")
        (root / "circuits" / "l1_0001.qasm").write_text("OPENQASM 2.0;\nqreg q[3];\nh q[9];\n")
        with pytest.raises(DatasetError, match=r"l1_0001\.qasm:3:5"):
            load_dataset(root)

    def test_bad_header(self, tmp_path):
        ds = generate_clustered_dataset(3, 2, 2, anchor_depth=2, seed=3)
        root = save_dataset(ds, tmp_path / "d")
        (root / "labels.csv").write_text("name,y\n")
        with pytest.raises(DatasetError, match="header"):
            load_dataset(root)


class TestSplit:
    def test_stratified_and_disjoint(self):
        labels = np.repeat([0, 1, 2], 10)
        tr, te = stratified_split(labels, 0.5, 0)
        assert len(np.intersect1d(tr, te)) == 0
        assert len(tr) + len(te) == 30
        np.testing.assert_array_equal(np.bincount(labels[tr]), [5, 5, 5])

    def test_seeded(self):
        labels = np.repeat([0, 1], 20)
        a = stratified_split(labels, 0.3, 4)
        b = stratified_split(labels, 0.3, 4)
        np.testing.assert_array_equal(a[0], b[0])
