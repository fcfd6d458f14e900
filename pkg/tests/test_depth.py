import numpy as np
import pytest

from depth.depth_map import DepthMap, DepthState, median_filter_3x3, min_max_normalize, preprocess
from depth.pgm import load_pgm, save_pgm
from utils.errors import PgmDimensionError, PgmFormatError, PgmMagicError, PgmTruncatedError


def _brute_force_median(pixels):
    padded = np.pad(pixels, 1, mode="edge")
    out = np.empty_like(pixels)
    for r in range(pixels.shape[0]):
        for c in range(pixels.shape[1]):
            out[r, c] = np.median(padded[r:r + 3, c:c + 3])
    return out


class TestDepthMap:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            DepthMap(np.array([[0.0, np.nan]]))

    def test_rejects_empty_and_non_2d(self):
        with pytest.raises(ValueError):
            DepthMap(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            DepthMap(np.zeros(5))

    def test_normalized_state_is_range_checked(self):
        with pytest.raises(ValueError):
            DepthMap(np.array([[0.0, 1.5]]), DepthState.NORMALIZED)

    def test_pixels_are_read_only(self):
        depth_map = DepthMap(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            depth_map.pixels[0, 0] = 1.0


class TestMedianFilter:
    def test_matches_brute_force_oracle(self, rng):
        pixels = rng.normal(size=(17, 23))
        filtered = median_filter_3x3(DepthMap(pixels))
        np.testing.assert_array_equal(filtered.pixels, _brute_force_median(pixels))

    def test_removes_isolated_impulse(self):
        pixels = np.full((9, 9), 0.5)
        pixels[4, 4] = 100.0
        pixels[0, 0] = -100.0
        filtered = median_filter_3x3(DepthMap(pixels))
        np.testing.assert_array_equal(filtered.pixels, np.full((9, 9), 0.5))

    def test_keeps_state(self):
        depth_map = DepthMap(np.eye(4), DepthState.NORMALIZED)
        assert median_filter_3x3(depth_map).state is DepthState.NORMALIZED


class TestNormalize:
    def test_exact_unit_range(self, rng):
        result = min_max_normalize(DepthMap(rng.normal(5.0, 3.0, size=(20, 20))))
        assert result.depth_map.state is DepthState.NORMALIZED
        assert result.depth_map.pixels.min() == 0.0
        assert result.depth_map.pixels.max() == 1.0
        assert not result.degenerate

    def test_constant_map_is_degenerate(self, caplog):
        result = min_max_normalize(DepthMap(np.full((5, 5), 3.0)))
        assert result.degenerate
        np.testing.assert_array_equal(result.depth_map.pixels, np.zeros((5, 5)))
        assert "Constant depth map" in caplog.text

    def test_affine_invariant(self, rng):
        pixels = rng.normal(size=(12, 12))
        a = min_max_normalize(DepthMap(pixels)).depth_map.pixels
        b = min_max_normalize(DepthMap(3.5 * pixels - 7.0)).depth_map.pixels
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_idempotent_on_normalized(self, rng):
        once = min_max_normalize(DepthMap(rng.random((8, 8)))).depth_map
        twice = min_max_normalize(once).depth_map
        np.testing.assert_allclose(once.pixels, twice.pixels, atol=1e-15)

    def test_preprocess_filters_before_normalizing(self):
        pixels = np.full((7, 7), 2.0)
        pixels[:, 4:] = 4.0
        pixels[1, 1] = 1000.0
        result = preprocess(DepthMap(pixels))
        assert result.z_max == 4.0
        assert result.depth_map.pixels[1, 1] == 0.0


class TestPgm:
    def test_round_trip_within_quantization(self, tmp_path, rng):
        depth_map = DepthMap(rng.random((10, 14)), DepthState.NORMALIZED)
        path = save_pgm(depth_map, tmp_path / "scan.pgm")
        loaded = load_pgm(path, state=DepthState.NORMALIZED)
        assert loaded.shape == (10, 14)
        np.testing.assert_allclose(loaded.pixels, depth_map.pixels, atol=0.5 / 65535 + 1e-12)

    def test_header_layout(self, tmp_path):
        path = save_pgm(DepthMap(np.zeros((2, 3)), DepthState.NORMALIZED), tmp_path / "a.pgm")
        data = path.read_bytes()
        assert data.startswith(b"P5\n3 2\n65535\n")
        assert len(data) == len(b"P5\n3 2\n65535\n") + 2 * 3 * 2

    def test_raw_map_is_stretched(self, tmp_path):
        raw = DepthMap(np.array([[10.0, 20.0], [15.0, 20.0]]))
        loaded = load_pgm(save_pgm(raw, tmp_path / "raw.pgm"))
        np.testing.assert_allclose(loaded.pixels, [[0.0, 1.0], [0.5, 1.0]], atol=1e-5)

    def test_reads_8_bit_with_comments(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n# max\n255\n" + bytes([0, 255]))
        np.testing.assert_allclose(load_pgm(path).pixels, [[0.0, 1.0]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(PgmMagicError):
            load_pgm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(PgmTruncatedError):
            load_pgm(path)

    def test_oversized_payload(self, tmp_path):
        path = tmp_path / "long.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(5))
        with pytest.raises(PgmDimensionError):
            load_pgm(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "header.pgm"
        path.write_bytes(b"P5\n4 4")
        with pytest.raises(PgmTruncatedError):
            load_pgm(path)

    def test_unsupported_maxval(self, tmp_path):
        path = tmp_path / "max.pgm"
        path.write_bytes(b"P5\n1 1\n1023\n" + bytes(2))
        with pytest.raises(PgmFormatError):
            load_pgm(path)
