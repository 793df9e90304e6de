import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from camcal.camera import ImageDims, intrinsics_after_crop
from camcal.camera_image import (
    CameraImage,
    CamiFormatError,
    ChannelVariant,
    denormalize,
    dequantize_u8,
    encode,
    encode_incidence,
    encode_variant,
    normalize,
    quantize_u8,
    ray_to_theta_phi,
    read_cami,
    rgb_to_gray,
    theta_phi_to_ray,
    write_cami,
)


class TestRgbToGray:
    def test_white_black_red(self):
        img = np.zeros((1, 3, 3))
        img[0, 0] = [1, 1, 1]
        img[0, 2] = [1, 0, 0]
        gray = rgb_to_gray(img)
        assert gray[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert gray[0, 1] == 0.0
        assert gray[0, 2] == pytest.approx(0.299, abs=1e-15)

    def test_rejects_bad_channel_count(self):
        with pytest.raises(ValueError):
            rgb_to_gray(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            rgb_to_gray(np.zeros((4, 4, 4)))


class TestEncode:
    def test_center_pixel(self, default_ci, default_K):
        cy, cx = int(default_K.cy), int(default_K.cx)
        assert default_ci.theta[cy, cx] == 0.0
        assert default_ci.phi[cy, cx] == pytest.approx(math.pi / 2, abs=1e-15)

    def test_azimuth_45(self, default_K, default_dims):
        # pixel 820 is outside the image; encode a wider strip to reach it
        wide = ImageDims(1024, 480)
        ci = encode(default_K, wide, np.zeros((480, 1024)))
        assert ci.theta[240, 820] == pytest.approx(math.pi / 4, abs=1e-15)
        assert ci.phi[240, 820] == pytest.approx(math.pi / 2, abs=1e-15)

    def test_elevation_45(self, default_K, default_dims):
        tall = ImageDims(640, 800)
        ci = encode(default_K, tall, np.zeros((800, 640)))
        v = int(default_K.cy + default_K.fy)
        assert ci.phi[v, 320] == pytest.approx(math.acos(1 / math.sqrt(2)), abs=1e-15)
        assert ci.phi[v, 320] == pytest.approx(0.7853981634, abs=1e-9)

    def test_gray_copied(self, default_ci, default_gray):
        np.testing.assert_array_equal(default_ci.gray, default_gray)

    def test_dims_mismatch(self, default_K, default_dims):
        with pytest.raises(ValueError):
            encode(default_K, default_dims, np.zeros((10, 10)))

    def test_column_constancy_exact(self, default_ci):
        spread = default_ci.theta.max(axis=0) - default_ci.theta.min(axis=0)
        assert spread.max() == 0.0

    def test_row_constancy_of_av(self, default_ci):
        a_v = np.cos(default_ci.phi) / (np.cos(default_ci.theta) * np.sin(default_ci.phi))
        spread = a_v.max(axis=1) - a_v.min(axis=1)
        assert spread.max() < 1e-9

    def test_strictly_increasing(self, default_ci):
        assert np.all(np.diff(default_ci.theta[0]) > 0)
        a_v = np.cos(default_ci.phi[:, 0]) / (
            np.cos(default_ci.theta[:, 0]) * np.sin(default_ci.phi[:, 0])
        )
        assert np.all(np.diff(a_v) > 0)

    def test_crop_commutes(self, default_K, default_dims, default_gray):
        full = encode(default_K, default_dims, default_gray)
        x0, y0, w, h = 100, 50, 200, 150
        K_crop = intrinsics_after_crop(default_K, x0, y0)
        direct = encode(K_crop, ImageDims(w, h), default_gray[y0 : y0 + h, x0 : x0 + w])
        sliced = full.crop(x0, y0, w, h)
        np.testing.assert_allclose(direct.theta, sliced.theta, atol=1e-12)
        np.testing.assert_allclose(direct.phi, sliced.phi, atol=1e-12)
        np.testing.assert_array_equal(direct.gray, sliced.gray)


class TestVariants:
    def test_grayscale_matches_encode(self, default_K, default_dims, default_gray):
        a = encode(default_K, default_dims, default_gray)
        b = encode_variant(default_K, default_dims, default_gray, ChannelVariant.grayscale())
        np.testing.assert_array_equal(a.channels(), b.channels())

    def test_duplicate_theta(self, default_K, default_dims, default_gray):
        ci = encode_variant(
            default_K, default_dims, default_gray, ChannelVariant.duplicate_theta()
        )
        np.testing.assert_array_equal(ci.gray, ci.theta)

    def test_constant_zero(self, default_K, default_dims, default_gray):
        ci = encode_variant(default_K, default_dims, default_gray, ChannelVariant.constant(0.0))
        assert np.all(ci.gray == 0.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            ChannelVariant("mystery")


class TestIncidence:
    def test_center_and_unit_norm(self, default_K, default_dims):
        inc = encode_incidence(default_K, default_dims)
        np.testing.assert_allclose(inc.rays[240, 320], [0, 0, 1], atol=1e-15)
        norms = np.linalg.norm(inc.rays, axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_known_ray(self, default_K):
        inc = encode_incidence(default_K, ImageDims(1024, 480))
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(inc.rays[240, 820], [s, 0, s], atol=1e-15)

    def test_angles_roundtrip(self, default_K, default_dims):
        inc = encode_incidence(default_K, default_dims)
        theta, phi = ray_to_theta_phi(inc.rays)
        back = theta_phi_to_ray(theta, phi)
        np.testing.assert_allclose(back, inc.rays, atol=1e-12)

    def test_angles_match_encode(self, default_ci, default_K, default_dims):
        inc = encode_incidence(default_K, default_dims)
        theta, phi = ray_to_theta_phi(inc.rays)
        np.testing.assert_allclose(theta, default_ci.theta, atol=1e-12)
        np.testing.assert_allclose(phi, default_ci.phi, atol=1e-12)


class TestNormalize:
    def test_known_values(self, default_K):
        ci = encode(default_K, ImageDims(1024, 480), np.zeros((480, 1024)))
        arr = normalize(ci)
        assert arr[240, 820, 0] == pytest.approx(0.25, abs=1e-15)  # theta = pi/4
        assert arr[240, 820, 1] == pytest.approx(0.5, abs=1e-15)  # phi = pi/2
        assert arr[240, 820, 2] == -1.0  # g = 0

    def test_roundtrip(self, default_ci):
        back = denormalize(normalize(default_ci))
        np.testing.assert_allclose(back.theta, default_ci.theta, atol=1e-12)
        np.testing.assert_allclose(back.phi, default_ci.phi, atol=1e-12)
        np.testing.assert_allclose(back.gray, default_ci.gray, atol=1e-12)

    def test_range(self, default_ci):
        arr = normalize(default_ci)
        assert arr.min() >= -1.0 and arr.max() <= 1.0


class TestQuantize:
    def test_endpoints_and_zero(self):
        got = quantize_u8(np.array([-1.0, 1.0, 0.0]))
        np.testing.assert_array_equal(got, [0, 255, 128])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            quantize_u8(np.array([1.0001]))
        with pytest.raises(ValueError):
            quantize_u8(np.array([float("nan")]))

    def test_dequantize_requires_u8(self):
        with pytest.raises(ValueError):
            dequantize_u8(np.array([1.0]))

    @given(arrays(np.uint8, st.integers(1, 64)))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_on_codes(self, codes):
        assert np.array_equal(quantize_u8(dequantize_u8(codes)), codes)

    def test_quantization_error_bounded(self, default_ci):
        arr = normalize(default_ci)
        back = dequantize_u8(quantize_u8(arr))
        assert np.max(np.abs(back - arr)) <= 1.0 / 255.0 + 1e-12


class TestCamiFormat:
    def test_roundtrip_bit_exact(self, tmp_path, default_ci):
        path = tmp_path / "x.cami"
        write_cami(path, default_ci)
        back = read_cami(path)
        np.testing.assert_array_equal(back.theta, default_ci.theta.astype(np.float32))
        np.testing.assert_array_equal(back.phi, default_ci.phi.astype(np.float32))
        np.testing.assert_array_equal(back.gray, default_ci.gray.astype(np.float32))
        # writing what we read reproduces the file byte for byte
        path2 = tmp_path / "y.cami"
        write_cami(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_truncated_rejected(self, tmp_path, default_ci):
        path = tmp_path / "x.cami"
        write_cami(path, default_ci)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CamiFormatError):
            read_cami(path)

    def test_bad_magic_rejected(self, tmp_path, default_ci):
        path = tmp_path / "x.cami"
        write_cami(path, default_ci)
        data = bytearray(path.read_bytes())
        data[:4] = b"JUNK"
        path.write_bytes(bytes(data))
        with pytest.raises(CamiFormatError):
            read_cami(path)

    def test_bad_version_rejected(self, tmp_path, default_ci):
        path = tmp_path / "x.cami"
        write_cami(path, default_ci)
        data = bytearray(path.read_bytes())
        data[4] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(CamiFormatError):
            read_cami(path)


class TestCameraImageType:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            CameraImage(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 5)))

    def test_non_finite_rejected(self):
        bad = np.zeros((4, 4))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            CameraImage(bad, np.zeros((4, 4)), np.zeros((4, 4)))

    def test_crop_bounds_checked(self, default_ci):
        with pytest.raises(ValueError):
            default_ci.crop(600, 0, 100, 100)
