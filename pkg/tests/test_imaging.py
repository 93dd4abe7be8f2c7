import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_patch
from oracles import histogram_count
from qsimilarity import imaging
from qsimilarity.imaging import (ColorHistogram, DimensionError, ImageFormatError, ImagePatch,
                                 euclidean_distance_hist, euclidean_distance_pixels, histogram,
                                 resize)

pixel_arrays = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda hw: arrays(np.float64, (3, *hw), elements=st.floats(0, 255)))


def test_patch_invariants():
    with pytest.raises(DimensionError):
        ImagePatch(np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        ImagePatch(np.full((3, 2, 2), 256.0))
    p = ImagePatch(np.zeros((3, 2, 5)))
    assert (p.width, p.height) == (5, 2)


# -- CIFAR ----------------------------------------------------------------------

def _cifar_bytes(rng, n):
    return bytes(rng.integers(0, 256, size=n * imaging.CIFAR_RECORD, dtype=np.uint8))


def test_cifar_two_records(tmp_path, rng):
    f = tmp_path / "batch.bin"
    f.write_bytes(_cifar_bytes(rng, 2))
    patches = imaging.load_cifar_binary(f)
    assert len(patches) == 2
    assert all(p.shape == (3, 32, 32) for p in patches)


def test_cifar_zero_record(tmp_path):
    f = tmp_path / "zero.bin"
    f.write_bytes(bytes([7]) + bytes(3072))
    (p,) = imaging.load_cifar_binary(f)
    assert np.all(p.pixels == 0.0)


def test_cifar_first_pixel_matches_raw_byte(tmp_path, rng):
    f = tmp_path / "batch.bin"
    f.write_bytes(_cifar_bytes(rng, 3))
    patches = imaging.load_cifar_binary(f)
    with open(f, "rb") as fh:
        raw = fh.read()
    assert patches[0].pixels[0, 0, 0] == float(raw[1])
    # green plane starts 1024 bytes into the pixel block; row-major within a plane
    assert patches[1].pixels[1, 2, 3] == float(raw[3073 + 1 + 1024 + 2 * 32 + 3])


def test_cifar_truncated(tmp_path):
    f = tmp_path / "trunc.bin"
    f.write_bytes(bytes(3073 + 100))
    with pytest.raises(ImageFormatError, match="offset 3073"):
        imaging.load_cifar_binary(f)


def test_cifar_roundtrip_bytes(tmp_path, rng):
    data = _cifar_bytes(rng, 2)
    f = tmp_path / "b.bin"
    f.write_bytes(data)
    patches = imaging.load_cifar_binary(f)
    labels = [data[0], data[3073]]
    assert b"".join(imaging.encode_cifar_record(p, l) for p, l in zip(patches, labels)) == data


# -- PPM ------------------------------------------------------------------------

def test_ppm_identity(tmp_path, rng):
    p = ImagePatch(rng.integers(0, 256, size=(3, 4, 4)).astype(float))
    (tmp_path / "a.ppm").write_bytes(imaging.encode_ppm(p))
    (q,) = imaging.load_ppm_dir(tmp_path, 4, 4)
    assert q == p


def test_ppm_empty_dir(tmp_path):
    assert imaging.load_ppm_dir(tmp_path, 4, 4) == []


def test_ppm_constant_resize(tmp_path):
    p = ImagePatch(np.full((3, 8, 8), 90.0))
    (tmp_path / "g.ppm").write_bytes(imaging.encode_ppm(p))
    (q,) = imaging.load_ppm_dir(tmp_path, 4, 4)
    assert q.shape == (3, 4, 4)
    np.testing.assert_array_equal(q.pixels, 90.0)


def test_ppm_sorted_and_header_comments(tmp_path, rng):
    imgs = [ImagePatch(np.full((3, 2, 2), v)) for v in (10.0, 20.0, 30.0)]
    for name, img in zip(("c.ppm", "a.ppm", "b.ppm"), imgs):
        data = imaging.encode_ppm(img).replace(b"P6\n", b"P6\n# comment\n", 1)
        (tmp_path / name).write_bytes(data)
    out = imaging.load_ppm_dir(tmp_path, 2, 2)
    assert [p.pixels[0, 0, 0] for p in out] == [20.0, 30.0, 10.0]


@pytest.mark.parametrize("data,msg", [
    (b"P3\n2 2\n255\n" + bytes(12), "magic"),
    (b"P6\n2 2\n65535\n" + bytes(24), "maxval"),
    (b"P6\n2 2\n255\n" + bytes(5), "truncated"),
])
def test_ppm_rejects(tmp_path, data, msg):
    (tmp_path / "x.ppm").write_bytes(data)
    with pytest.raises(ImageFormatError, match=msg):
        imaging.load_ppm_dir(tmp_path, 2, 2)


# -- cache ------------------------------------------------------------------------

def test_cache_roundtrip(tmp_path, rng):
    patches = [random_patch(rng, 5, 3) for _ in range(4)]
    f = tmp_path / "ds.bin"
    imaging.write_cache(f, patches)
    raw = f.read_bytes()
    assert raw[:8] == b"QUSLDS01"
    assert int.from_bytes(raw[8:12], "little") == 4
    assert int.from_bytes(raw[12:14], "little") == 3
    assert int.from_bytes(raw[14:16], "little") == 5
    assert len(raw) == 16 + 4 * 3 * 5 * 3 * 8
    assert imaging.read_cache(f) == patches


def test_cache_rejects_bad_magic(tmp_path):
    f = tmp_path / "bad.bin"
    f.write_bytes(b"NOTMAGIC" + bytes(8))
    with pytest.raises(ImageFormatError):
        imaging.read_cache(f)


# -- resize -----------------------------------------------------------------------

@pytest.mark.parametrize("size", [(1, 1), (3, 7), (9, 4)])
def test_resize_constant(size):
    p = ImagePatch(np.full((3, 5, 6), 42.0))
    out = resize(p, *size)
    assert out.shape == (3, size[1], size[0])
    np.testing.assert_allclose(out.pixels, 42.0, atol=1e-12)


def test_resize_midpoint():
    p = ImagePatch(np.array([[[0.0, 255.0]]] * 3))
    out = resize(p, 3, 1)
    np.testing.assert_allclose(out.pixels[:, 0, :], [[0, 127.5, 255]] * 3)


def test_resize_identity(rng):
    p = random_patch(rng, 5, 7)
    np.testing.assert_allclose(resize(p, 7, 5).pixels, p.pixels, atol=1e-9)


@given(pixel_arrays, st.integers(1, 9), st.integers(1, 9))
def test_resize_stays_in_range(px, w, h):
    out = resize(ImagePatch(px), w, h)
    assert out.pixels.min() >= 0 and out.pixels.max() <= 255


# -- histogram ---------------------------------------------------------------------

def test_histogram_zero_image():
    h = histogram(ImagePatch(np.zeros((3, 4, 4))), 16)
    for c in range(3):
        assert h.channel(c)[0] == 1.0 and h.channel(c)[1:].sum() == 0.0


def test_histogram_half_split():
    px = np.zeros((3, 2, 2))
    px[:, 0, :] = 255
    h = histogram(ImagePatch(px), 2)
    np.testing.assert_array_equal(h.values, [0.5, 0.5] * 3)


def test_histogram_matches_counting(rng):
    p = random_patch(rng, 8)
    np.testing.assert_array_equal(histogram(p, 16).values, histogram_count(p.pixels, 16))


def test_histogram_integer_boundaries():
    px = np.zeros((3, 1, 4))
    px[:, 0, :] = [15.0, 16.0, 254.9, 255.0]
    h = histogram(ImagePatch(px), 16)
    np.testing.assert_array_equal(h.values, histogram_count(px, 16))


@given(pixel_arrays, st.integers(1, 32))
def test_histogram_channels_sum_to_one(px, bins):
    h = histogram(ImagePatch(px), bins)
    assert np.all(h.values >= 0)
    for c in range(3):
        assert abs(h.channel(c).sum() - 1.0) <= 1e-9


# -- distances ---------------------------------------------------------------------

def test_hist_distance_cases(rng):
    h = histogram(random_patch(rng, 4))
    assert euclidean_distance_hist(h, h) == 0.0
    a = ColorHistogram(1, [1.0, 0.0, 1.0])
    b = ColorHistogram(1, [0.0, 1.0, 1.0])
    a2 = ColorHistogram(2, np.array([1, 0, 1, 0, 1, 0.0]))
    b2 = ColorHistogram(2, np.array([0, 1, 1, 0, 1, 0.0]))
    assert euclidean_distance_hist(a2, b2) == pytest.approx(math.sqrt(2))
    with pytest.raises(DimensionError):
        euclidean_distance_hist(a, a2)


def test_hist_distance_formula(rng):
    v1, v2 = rng.random(48), rng.random(48)
    h1, h2 = ColorHistogram(16, v1), ColorHistogram(16, v2)
    expected = math.sqrt(sum((x - y) ** 2 for x, y in zip(v1, v2)))
    assert abs(euclidean_distance_hist(h1, h2) - expected) <= 1e-12


def test_pixel_distance_cases(rng):
    p = random_patch(rng, 3)
    assert euclidean_distance_pixels(p, p) == 0.0
    a = ImagePatch(np.array([[[10.0]], [[10.0]], [[10.0]]]))
    b = ImagePatch(np.array([[[13.0]], [[14.0]], [[10.0]]]))
    assert euclidean_distance_pixels(a, b) == 5.0
    with pytest.raises(DimensionError):
        euclidean_distance_pixels(p, random_patch(rng, 4))


def test_pixel_distance_brute_force(rng):
    p1, p2 = random_patch(rng, 4), random_patch(rng, 4)
    total = 0.0
    for i in range(4):
        for j in range(4):
            for c in range(3):
                total += (p1.pixels[c, i, j] - p2.pixels[c, i, j]) ** 2
    assert abs(euclidean_distance_pixels(p1, p2) - math.sqrt(total)) <= 1e-9


@given(st.integers(0, 2**32 - 1))
def test_distances_symmetric_and_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_patch(rng, 3) for _ in range(3))
    assert euclidean_distance_pixels(a, b) == euclidean_distance_pixels(b, a)
    ha, hb = histogram(a), histogram(b)
    assert euclidean_distance_hist(ha, hb) == euclidean_distance_hist(hb, ha)
    assert (euclidean_distance_pixels(a, c)
            <= euclidean_distance_pixels(a, b) + euclidean_distance_pixels(b, c) + 1e-9)
