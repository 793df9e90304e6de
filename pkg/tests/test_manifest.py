import numpy as np
import pytest
from PIL import Image

from camcal.manifest import (
    ManifestRecord,
    load_gray,
    load_mask,
    read_depth,
    read_depth_raw,
    read_manifest,
    write_depth_png16,
    write_depth_raw,
    write_manifest,
)


def _record(**overrides):
    fields = dict(
        image_path="imgs/a.png", fx=500.0, fy=500.0, cx=320.0, cy=240.0,
        width=640, height=480,
    )
    fields.update(overrides)
    return ManifestRecord(**fields)


class TestRecordValidation:
    def test_ok(self):
        record = _record(depth_path="d.png", depth_scale=0.001, scene="indoor")
        assert record.key == "a"

    def test_empty_image_path(self):
        with pytest.raises(ValueError):
            _record(image_path="")

    def test_bad_intrinsics(self):
        with pytest.raises(ValueError):
            _record(fx=-1.0)

    def test_bad_depth_scale(self):
        with pytest.raises(ValueError):
            _record(depth_path="d.png", depth_scale=0.0)

    def test_bad_scene(self):
        with pytest.raises(ValueError):
            _record(scene="underwater")


class TestManifestIo:
    def test_roundtrip(self, tmp_path):
        records = [
            _record(),
            _record(image_path="imgs/b.png", depth_path="d.png", depth_scale=0.01,
                    scene="outdoor"),
        ]
        path = tmp_path / "m.jsonl"
        write_manifest(path, records)
        assert read_manifest(path) == records

    def test_bad_line_reports_lineno(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"image_path": "x.png"}\n')
        with pytest.raises(ValueError, match=":1:"):
            read_manifest(path)

    def test_blank_and_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest(path, [_record()])
        path.write_text("# comment\n\n" + path.read_text())
        assert len(read_manifest(path)) == 1


class TestDepthIo:
    def test_raw_roundtrip(self, tmp_path):
        depth = np.random.default_rng(0).uniform(0.1, 50.0, (17, 23)).astype(np.float32)
        path = tmp_path / "d.f32"
        write_depth_raw(path, depth)
        np.testing.assert_array_equal(read_depth_raw(path), depth.astype(np.float64))

    def test_raw_truncation_detected(self, tmp_path):
        path = tmp_path / "d.f32"
        write_depth_raw(path, np.ones((4, 4), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError):
            read_depth_raw(path)

    def test_png16_roundtrip_with_scale(self, tmp_path):
        rng = np.random.default_rng(1)
        depth = rng.uniform(0.5, 60.0, (12, 18))
        path = tmp_path / "d.png"
        scale = 0.001
        write_depth_png16(path, depth, scale)
        back = read_depth(path, scale)
        np.testing.assert_allclose(back, depth, atol=scale)

    def test_read_depth_dispatch(self, tmp_path):
        raw = tmp_path / "d.f32"
        write_depth_raw(raw, np.full((3, 3), 2.0, dtype=np.float32))
        np.testing.assert_array_equal(read_depth(raw, 2.0), np.full((3, 3), 4.0))


class TestImageIo:
    def test_load_gray_range_and_luma(self, tmp_path):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[0, 0] = [255, 255, 255]
        img[1, 1] = [255, 0, 0]
        path = tmp_path / "x.png"
        Image.fromarray(img, "RGB").save(path)
        gray = load_gray(path)
        assert gray[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert gray[1, 1] == pytest.approx(0.299, abs=1e-12)
        assert gray[2, 2] == 0.0

    def test_load_mask(self, tmp_path):
        arr = np.zeros((4, 4), dtype=np.uint8)
        arr[0, 0] = 255
        path = tmp_path / "m.png"
        Image.fromarray(arr, "L").save(path)
        mask = load_mask(path)
        assert mask[0, 0] and not mask[1, 1]
