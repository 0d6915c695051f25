import numpy as np
import pytest
import torch
from PIL import Image

from affectsr.dataio import (HR_SIZE, LandmarkSet, PairDataset, collate,
                             load_image, load_landmarks, load_sample,
                             make_split, read_manifest)
from affectsr.errors import DataError
from affectsr.synth import generate_dataset, synthesize_landmarks, write_landmarks


@pytest.fixture
def sample_files(tmp_path, rng):
    img = (rng.uniform(0, 1, (128, 128, 3)) * 255).astype(np.uint8)
    image_path = tmp_path / "face.png"
    Image.fromarray(img).save(image_path)
    landmark_path = tmp_path / "face.lmk"
    write_landmarks(landmark_path, synthesize_landmarks(rng))
    return image_path, landmark_path


class TestLoadSample:
    def test_scale8_gives_16px_lr(self, sample_files):
        pair = load_sample(*sample_files, scale=8)
        assert pair.hr.shape == (3, 128, 128)
        assert pair.lr.shape == (3, 16, 16)
        assert pair.id == "face"

    def test_scale4_gives_32px_lr(self, sample_files):
        assert load_sample(*sample_files, scale=4).lr.shape == (3, 32, 32)

    def test_hr_lr_side_ratio_invariant(self, sample_files):
        for scale in (4, 8):
            pair = load_sample(*sample_files, scale=scale)
            assert pair.hr.shape[-1] == pair.lr.shape[-1] * scale

    def test_wrong_landmark_row_count(self, sample_files, tmp_path, rng):
        image_path, _ = sample_files
        bad = tmp_path / "bad.lmk"
        write_landmarks(bad, synthesize_landmarks(rng)[:468])
        with pytest.raises(DataError, match="478"):
            load_sample(image_path, bad, scale=4)

    def test_unsupported_scale(self, sample_files):
        with pytest.raises(DataError):
            load_sample(*sample_files, scale=3)

    def test_rectangular_input_center_cropped(self, tmp_path, rng):
        img = (rng.uniform(0, 1, (96, 160, 3)) * 255).astype(np.uint8)
        path = tmp_path / "wide.png"
        Image.fromarray(img).save(path)
        lmk = tmp_path / "wide.lmk"
        write_landmarks(lmk, synthesize_landmarks(rng))
        pair = load_sample(path, lmk, scale=4)
        assert pair.hr.shape == (3, HR_SIZE, HR_SIZE)

    def test_pure_given_file_contents(self, sample_files):
        a = load_sample(*sample_files, scale=4)
        b = load_sample(*sample_files, scale=4)
        assert torch.equal(a.hr, b.hr) and torch.equal(a.lr, b.lr)
        assert torch.equal(a.landmarks.coords, b.landmarks.coords)

    def test_cache_roundtrip(self, sample_files, tmp_path, monkeypatch):
        direct = load_sample(*sample_files, scale=4)
        monkeypatch.setenv("AFFECTSR_CACHE", str(tmp_path / "cache"))
        first = load_sample(*sample_files, scale=4)   # populates
        second = load_sample(*sample_files, scale=4)  # reads back
        assert list((tmp_path / "cache").glob("*.npz"))
        for pair in (first, second):
            assert torch.equal(pair.hr, direct.hr)
            assert torch.equal(pair.lr, direct.lr)


class TestLandmarks:
    def test_values_in_unit_square_required(self, tmp_path, rng):
        coords = synthesize_landmarks(rng)
        coords[0, 0] = 1.5
        path = tmp_path / "bad.lmk"
        write_landmarks(path, coords)
        with pytest.raises(DataError):
            load_landmarks(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.lmk"
        path.write_text("0.5,0.5\n" * 478)
        with pytest.raises(DataError, match="3 comma-separated"):
            load_landmarks(path)

    def test_wrong_shape_tensor_rejected(self):
        with pytest.raises(DataError):
            LandmarkSet(torch.zeros(468, 3))


class TestImages:
    def test_decoded_to_unit_range(self, sample_files):
        img = load_image(sample_files[0])
        assert img.dtype == torch.float32
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_undecodable_rejected(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image")
        with pytest.raises(DataError):
            load_image(path)


class TestSplit:
    def test_deterministic(self):
        ids = [f"id{i}" for i in range(10)]
        assert make_split(ids, 2, seed=7) == make_split(ids, 2, seed=7)

    def test_zero_eval_count(self):
        train, evl = make_split(["a", "b", "c"], 0, seed=0)
        assert evl == [] and sorted(train) == ["a", "b", "c"]

    def test_paper_sized_split(self):
        ids = [f"{i:05d}" for i in range(1200)]
        train, evl = make_split(ids, 1000, seed=0)
        assert len(evl) == 1000 and len(train) == 200
        assert not set(train) & set(evl)

    def test_eval_count_too_large(self):
        with pytest.raises(ValueError):
            make_split(["a", "b"], 2, seed=0)


class TestDataset:
    def test_loads_from_manifest(self, tmp_path):
        generate_dataset(tmp_path, count=3, seed=0)
        ds = PairDataset(tmp_path, scale=4)
        assert len(ds) == 3
        assert ds[0].lr.shape == (3, 32, 32)

    def test_missing_landmark_dir(self, tmp_path):
        generate_dataset(tmp_path, count=1, seed=0)
        import shutil

        shutil.rmtree(tmp_path / "landmarks")
        with pytest.raises(DataError, match="landmark"):
            PairDataset(tmp_path, scale=4)

    def test_empty_manifest_rejected(self, tmp_path):
        path = tmp_path / "manifest.txt"
        path.write_text("\n")
        with pytest.raises(DataError):
            read_manifest(path)

    def test_collate_shapes(self, toy_samples):
        batch = collate(toy_samples[:3])
        assert batch["lr"].shape == (3, 3, 32, 32)
        assert batch["hr"].shape == (3, 3, 128, 128)
        assert batch["coords"].shape == (3, 478, 3)
        assert len(batch["ids"]) == 3
