"""Escape-time rendering: frozen escape steps, determinism, thread safety.

Oracles are direct orbit iteration done inline: for f = z^2 the k-th
iterate of a seed c has modulus |c|^(2^k), so the first escape step past
radius 2 is the smallest k with 2^k * log|c| > log 2.  Hand-unrolled:
|c| = 1.5 escapes on step 1, |c| = 1.2 on step 2, |c| = 1.05 on step 4.
Seeds with |c| <= 1 never escape.
"""

import numpy as np
import pytest

from hfbound._kernels import numpy_backend
from hfbound.expr import parse_map
from hfbound.render import MAX_PIXELS, RenderResult, render_escape

SQUARE = parse_map("z^2")
IDENTITY = parse_map("z")
WINDOW = (-2.0, 2.0, -2.0, 2.0)


def pixel_centers(window, width, height):
    xmin, xmax, ymin, ymax = window
    xs = xmin + (np.arange(width) + 0.5) * ((xmax - xmin) / width)
    ys = ymax - (np.arange(height) + 0.5) * ((ymax - ymin) / height)
    return xs[None, :] + 1j * ys[:, None]


class TestEscapeBuffer:
    def test_unit_disk_never_escapes(self):
        res = render_escape(SQUARE, WINDOW, 48, 2.0, 128)
        seeds = pixel_centers(WINDOW, 128, 128)
        inside = np.abs(seeds) <= 1.0
        assert inside.sum() > 1000
        assert not res.buffer[inside].any()

    def test_far_seeds_escape_immediately(self):
        res = render_escape(SQUARE, WINDOW, 48, 2.0, 128)
        seeds = pixel_centers(WINDOW, 128, 128)
        far = np.abs(seeds) > 1.5
        assert (res.buffer[far] == 1).all()

    def test_identity_never_escapes_inside_radius(self):
        res = render_escape(IDENTITY, (-1.0, 1.0, -1.0, 1.0), 32, 2.0, 64)
        assert not res.buffer.any()
        assert res.escaped_fraction() == 0.0

    @pytest.mark.parametrize(
        "seed,step",
        [(1.5, 1), (1.2, 2), (1.05, 4)],
    )
    def test_frozen_escape_steps(self, seed, step):
        # 1-pixel render centered on the seed
        half = 1e-9
        res = render_escape(
            SQUARE, (seed - half, seed + half, -half, half), 16, 2.0, 1
        )
        assert res.buffer.shape == (1, 1)
        assert res.buffer[0, 0] == step

    def test_buffer_matches_direct_iteration(self):
        window = (-1.7, 2.3, -0.9, 1.4)
        res = render_escape(SQUARE, window, 20, 2.0, (17, 11))
        seeds = pixel_centers(window, 17, 11)
        for idx in [(0, 0), (10, 16), (5, 8), (3, 12)]:
            z = seeds[idx]
            expected = 0
            for it in range(20):
                z = z * z
                if abs(z) > 2.0:
                    expected = it + 1
                    break
            assert res.buffer[idx] == expected

    def test_orientation_row_zero_is_top(self):
        # escape radius 1 over the upper half: top row seeds have |c| > 1
        res = render_escape(IDENTITY, (-0.2, 0.2, -3.0, 3.0), 4, 1.0, (3, 9))
        assert (res.buffer[0] == 1).all()  # y near +3, already outside
        assert not res.buffer[4].any()  # y near 0, inside


class TestDeterminism:
    def test_same_config_same_hash(self):
        a = render_escape(SQUARE, WINDOW, 40, 2.0, 96)
        b = render_escape(SQUARE, WINDOW, 40, 2.0, 96)
        assert a.buffer_hash() == b.buffer_hash()
        assert (a.buffer == b.buffer).all()

    @pytest.mark.parametrize("threads", [2, 3, 8])
    def test_thread_count_does_not_change_buffer(self, threads):
        base = render_escape(parse_map("sin(z)"), WINDOW, 24, 6.0, (97, 53))
        multi = render_escape(
            parse_map("sin(z)"), WINDOW, 24, 6.0, (97, 53), threads=threads
        )
        assert base.buffer_hash() == multi.buffer_hash()

    def test_hash_covers_shape(self):
        flat = render_escape(IDENTITY, (-3.0, 3.0, -0.5, 0.5), 4, 1.0, (8, 2))
        tall = render_escape(IDENTITY, (-0.5, 0.5, -3.0, 3.0), 4, 1.0, (2, 8))
        assert flat.buffer_hash() != tall.buffer_hash()

    def test_backend_parity(self):
        seeds = pixel_centers(WINDOW, 31, 17).ravel()
        via_numpy = numpy_backend.escape_counts(SQUARE, seeds, 25, 2.0)
        try:
            from hfbound._kernels import numba_backend
        except ImportError:
            pytest.skip("numba backend unavailable")
        via_numba = numba_backend.escape_counts(SQUARE, seeds, 25, 2.0)
        assert via_numpy.dtype == np.uint32 == via_numba.dtype
        assert (via_numpy == via_numba).all()


class TestValidation:
    def test_iterations_floor(self):
        with pytest.raises(ValueError, match="iterations"):
            render_escape(SQUARE, WINDOW, 0, 2.0, 16)

    def test_pixel_cap(self):
        with pytest.raises(ValueError, match="pixel cap"):
            render_escape(SQUARE, WINDOW, 4, 2.0, (8192, 8193))
        assert MAX_PIXELS == 8192 * 8192

    def test_empty_window(self):
        with pytest.raises(ValueError, match="empty"):
            render_escape(SQUARE, (1.0, 1.0, -1.0, 1.0), 4, 2.0, 16)

    def test_bad_escape_radius(self):
        with pytest.raises(ValueError, match="escape_radius"):
            render_escape(SQUARE, WINDOW, 4, 0.0, 16)

    def test_bad_resolution(self):
        with pytest.raises(ValueError, match="positive"):
            render_escape(SQUARE, WINDOW, 4, 2.0, 0)


class TestImageOutput:
    def test_grayscale_mapping(self):
        res = render_escape(SQUARE, WINDOW, 40, 2.0, 64)
        gray = res.to_grayscale()
        assert gray.dtype == np.uint8
        survivors = res.buffer == 0
        assert (gray[survivors] == 0).all()
        assert (gray[~survivors] >= 25).all()
        # step-1 escapes are the brightest band
        assert gray[res.buffer == 1].max() == 255

    def test_png_round_trip(self, tmp_path):
        from PIL import Image

        res = render_escape(SQUARE, WINDOW, 24, 2.0, (40, 30))
        path = tmp_path / "escape.png"
        res.save_png(path)
        img = Image.open(path)
        assert img.mode == "L"
        assert img.size == (40, 30)
        assert (np.asarray(img) == res.to_grayscale()).all()

    def test_png_bytes_deterministic(self):
        a = render_escape(SQUARE, WINDOW, 24, 2.0, 32).png_bytes()
        b = render_escape(SQUARE, WINDOW, 24, 2.0, 32).png_bytes()
        assert a == b

    def test_result_json_fields(self):
        res = render_escape(SQUARE, WINDOW, 24, 2.0, (40, 30))
        blob = res.to_json()
        assert blob["width"] == 40 and blob["height"] == 30
        assert blob["iterations"] == 24
        assert blob["buffer_hash"] == res.buffer_hash()
        assert 0.0 <= blob["escaped_fraction"] <= 1.0
        assert isinstance(res, RenderResult)
