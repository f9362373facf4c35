"""Image container, manifests, splitting, crops, and the synthetic generator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agenet.data import (IMG_MAGIC, ManifestEntry, SyntheticSpec, age_frequency,
                         center_crop, draw_labels, load_manifest, random_crop,
                         read_image, render_sample, split_811, synth_generate,
                         synth_split, write_image, write_manifest)

SPEC = SyntheticSpec(resolution=64, a_min=20, a_max=59, noise_sigma=0.0,
                     seed=7, counts=(8, 2, 2))


class TestImageContainer:
    def test_roundtrip_preserves_float32_values(self, tmp_path, rng):
        img = rng.random((3, 5, 9))
        path = tmp_path / "a.im1"
        write_image(path, img)
        back = read_image(path)
        assert back.shape == (3, 5, 9)
        assert np.array_equal(back, img.astype(np.float32).astype(np.float64))

    def test_header_layout(self, tmp_path):
        path = tmp_path / "b.im1"
        write_image(path, np.zeros((3, 2, 4)))
        blob = path.read_bytes()
        assert blob[:4] == IMG_MAGIC
        assert np.frombuffer(blob[4:12], dtype="<u4").tolist() == [2, 4]
        assert len(blob) == 12 + 3 * 2 * 4 * 4

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "c.im1"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValueError, match="magic"):
            read_image(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "d.im1"
        write_image(path, np.zeros((3, 2, 2)))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="truncated"):
            read_image(path)

    def test_wrong_shape_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="3 x H x W"):
            write_image(tmp_path / "e.im1", np.zeros((1, 4, 4)))


class TestManifest:
    def _write(self, tmp_path, rows):
        path = tmp_path / "manifest.csv"
        path.write_text("path,age,gender,ethnicity\n" + "".join(r + "\n" for r in rows))
        return path

    def test_three_valid_rows(self, tmp_path):
        path = self._write(tmp_path, ["a.im1,20,0,1", "b.im1,30,1,2", "c.im1,40,0,3"])
        entries = load_manifest(path, a_min=1, a_max=100)
        assert len(entries) == 3
        assert entries[1] == ManifestEntry("b.im1", 30, 1, 2)

    def test_out_of_range_age_dropped_with_line_number(self, tmp_path):
        path = self._write(tmp_path, ["a.im1,20,0,1", "b.im1,150,0,1", "c.im1,40,0,0"])
        with pytest.warns(UserWarning, match=r"lines \[3\]"):
            entries = load_manifest(path, a_min=1, a_max=100)
        assert [e.age for e in entries] == [20, 40]

    def test_header_only_warns_and_returns_empty(self, tmp_path):
        path = self._write(tmp_path, [])
        with pytest.warns(UserWarning, match="no usable rows"):
            assert load_manifest(path, a_min=1, a_max=100) == []

    def test_malformed_row_raises_with_line(self, tmp_path):
        path = self._write(tmp_path, ["a.im1,20,0"])
        with pytest.raises(ValueError, match=":2:"):
            load_manifest(path, a_min=1, a_max=100)

    def test_non_integer_label_raises(self, tmp_path):
        path = self._write(tmp_path, ["a.im1,young,0,0"])
        with pytest.raises(ValueError, match="non-integer"):
            load_manifest(path, a_min=1, a_max=100)

    def test_duplicate_header_raises(self, tmp_path):
        path = self._write(tmp_path, ["path,age,gender,ethnicity"])
        with pytest.raises(ValueError, match="duplicate header"):
            load_manifest(path, a_min=1, a_max=100)

    def test_bad_header_raises(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("file,age\n")
        with pytest.raises(ValueError, match="bad header"):
            load_manifest(path, a_min=1, a_max=100)

    def test_write_then_load_roundtrip(self, tmp_path):
        entries = [ManifestEntry(f"x{i}.im1", 20 + i, i % 2, i % 4) for i in range(5)]
        path = tmp_path / "m.csv"
        write_manifest(path, entries)
        assert load_manifest(path, a_min=1, a_max=100) == entries


class TestSplit811:
    def test_100_entries(self):
        train, val, test = split_811(list(range(100)), seed=0)
        assert (len(train), len(val), len(test)) == (80, 10, 10)

    def test_10_entries(self):
        train, val, test = split_811(list(range(10)), seed=0)
        assert (len(train), len(val), len(test)) == (8, 1, 1)

    def test_too_few_rejected(self):
        with pytest.raises(ValueError, match="at least 10"):
            split_811(list(range(9)), seed=0)

    def test_same_seed_identical(self):
        a = split_811(list(range(57)), seed=5)
        b = split_811(list(range(57)), seed=5)
        assert a == b

    def test_different_seed_differs(self):
        a = split_811(list(range(57)), seed=5)
        b = split_811(list(range(57)), seed=6)
        assert a != b

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(10, 300), seed=st.integers(0, 1000))
    def test_disjoint_and_exhaustive(self, n, seed):
        train, val, test = split_811(list(range(n)), seed=seed)
        assert len(val) == n // 10 and len(test) == n // 10
        assert sorted(train + val + test) == list(range(n))


class TestCrops:
    def test_random_offsets_cover_full_range(self):
        rng = np.random.default_rng(0)
        img = np.zeros((3, 256, 256))
        img[0] = np.arange(256)[:, None]  # channel 0 encodes the row index
        img[1] = np.arange(256)[None, :]  # channel 1 encodes the column index
        tops, lefts = set(), set()
        for _ in range(800):
            crop = random_crop(img, 224, rng)
            tops.add(int(crop[0, 0, 0]))
            lefts.add(int(crop[1, 0, 0]))
        assert tops == set(range(33))
        assert lefts == set(range(33))

    def test_identity_when_sizes_match(self, rng):
        img = rng.random((3, 32, 32))
        out = random_crop(img, 32, np.random.default_rng(1))
        assert np.array_equal(out, img)

    def test_center_crop_64_to_56(self, rng):
        img = rng.random((3, 64, 64))
        out = center_crop(img, 56)
        assert np.array_equal(out, img[:, 4:60, 4:60])

    def test_oversize_rejected(self, rng):
        with pytest.raises(ValueError, match="larger"):
            random_crop(np.zeros((3, 8, 8)), 9, rng)
        with pytest.raises(ValueError, match="larger"):
            center_crop(np.zeros((3, 8, 8)), 9)


def radial_crossings(img: np.ndarray, res: int) -> int:
    """Independent frequency proxy: sign changes of the centered pattern
    along the vertical radius below the image center."""
    col = img[0, res // 2:, res // 2]
    baseline = (col.max() + col.min()) / 2.0
    signs = np.sign(col - baseline)
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] != signs[:-1]))


class TestSynthetic:
    def test_bit_identical_regeneration(self):
        a = synth_generate(SPEC, 3)
        b = synth_generate(SPEC, 3)
        assert np.array_equal(a.image, b.image)
        assert (a.age, a.gender, a.ethnicity) == (b.age, b.gender, b.ethnicity)

    def test_noise_streams_differ_by_index(self):
        spec = SyntheticSpec(resolution=32, a_min=20, a_max=59, noise_sigma=0.05,
                             seed=7, counts=(4, 0, 0))
        assert not np.array_equal(synth_generate(spec, 0).image,
                                  synth_generate(spec, 1).image)

    def test_minimum_age_renders_single_cycle(self):
        img = render_sample(SPEC, SPEC.a_min, 0, 0)
        assert radial_crossings(img, SPEC.resolution) == 2  # one cycle = two crossings

    def test_frequency_estimate_monotone_in_age(self):
        counts = [radial_crossings(render_sample(SPEC, age, 0, 0), 64)
                  for age in range(20, 60, 3)]
        assert all(b >= a for a, b in zip(counts, counts[1:]))
        assert counts[-1] > counts[0]

    def test_gender_flip_swaps_ramp_direction(self):
        a = render_sample(SPEC, 30, 0, 0)
        b = render_sample(SPEC, 30, 1, 0)
        assert a[:, :, 32:].mean() > a[:, :, :32].mean()
        assert b[:, :, :32].mean() > b[:, :, 32:].mean()

    def test_ethnicity_permutes_channel_gains(self):
        orders = set()
        for eth in range(4):
            img = render_sample(SPEC, 30, 0, eth)
            orders.add(tuple(np.argsort(img.mean(axis=(1, 2)))))
        assert len(orders) == 4

    def test_values_in_unit_interval_and_finite(self):
        spec = SyntheticSpec(resolution=32, a_min=20, a_max=59, noise_sigma=0.5,
                             seed=1, counts=(6, 0, 0))
        for i in range(6):
            img = synth_generate(spec, i).image
            assert np.all(np.isfinite(img))
            assert img.min() >= 0.0 and img.max() <= 1.0

    def test_labels_within_ranges(self):
        for i in range(SPEC.total):
            s = synth_generate(SPEC, i)
            assert SPEC.a_min <= s.age <= SPEC.a_max
            assert s.gender in (0, 1)
            assert 0 <= s.ethnicity < 4

    def test_index_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="index"):
            synth_generate(SPEC, SPEC.total)

    def test_splits_are_disjoint_index_ranges(self):
        train = synth_split(SPEC, "train")
        val = synth_split(SPEC, "val")
        test = synth_split(SPEC, "test")
        assert (len(train), len(val), len(test)) == SPEC.counts
        assert not np.array_equal(train[0].image, val[0].image)

    def test_correlated_labels_track_age(self):
        spec = SyntheticSpec(resolution=32, a_min=20, a_max=59, noise_sigma=0.0,
                             seed=3, counts=(300, 0, 0), attr_correlation=1.0)
        for i in range(100):
            age, gender, eth = draw_labels(spec, i)
            assert gender == int(age - 20 > 19.5)
            assert eth == min(int(4 * (age - 20) / 40), 3)

    def test_frequency_endpoints(self):
        assert age_frequency(20, 20, 59) == 1.0
        assert age_frequency(59, 20, 59) == 7.0
