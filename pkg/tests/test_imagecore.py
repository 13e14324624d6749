import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shiftrecover.imagecore import (
    CountMismatchError,
    MagicMismatchError,
    MalformedHeaderError,
    SampleSet,
    TruncatedPayloadError,
    UnsupportedMagicError,
    decode_raster,
    encode_idx,
    encode_raster,
    load_idx,
    load_raster,
    save_raster,
    synth_dataset,
    to_grayscale,
)


def test_p5_decoding():
    img = decode_raster(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    assert img.shape == (2, 2, 1)
    np.testing.assert_array_equal(img[..., 0], [[0, 1], [128 / 255, 64 / 255]])


def test_p6_decoding():
    img = decode_raster(b"P6\n1 1\n255\n" + bytes([255, 255, 255]))
    np.testing.assert_array_equal(img, np.ones((1, 1, 3)))


def test_header_comments_are_skipped():
    img = decode_raster(b"P5\n# a comment\n1 1\n255\n" + bytes([51]))
    assert img[0, 0, 0] == pytest.approx(0.2)


def test_plain_ppm_magic_rejected():
    with pytest.raises(UnsupportedMagicError):
        decode_raster(b"P3\n1 1\n255\n255 255 255\n")


def test_truncated_raster():
    with pytest.raises(TruncatedPayloadError):
        decode_raster(b"P5\n2 2\n255\n" + bytes([1, 2, 3]))


@pytest.mark.parametrize("raw", [b"P5\n2\n", b"P5\nx 2\n255\n", b"P5\n2 2\n300\n", b"P5\n0 2\n255\n"])
def test_malformed_headers(raw):
    with pytest.raises(MalformedHeaderError):
        decode_raster(raw + bytes(4))


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 7), st.integers(1, 7), st.sampled_from([1, 3]))))
def test_raster_round_trip_on_byte_grid(tmp_path_factory, raw):
    img = raw.astype(np.float64) / 255
    path = tmp_path_factory.mktemp("r") / "img.pnm"
    save_raster(path, img)
    np.testing.assert_array_equal(load_raster(path), img)
    assert decode_raster(encode_raster(img)).shape == img.shape


def _idx_images(n, r, c, payload):
    return struct.pack(">iiii", 0x803, n, r, c) + bytes(payload)


def _idx_labels(n, payload, magic=0x801):
    return struct.pack(">ii", magic, n) + bytes(payload)


def test_idx_example(tmp_path):
    (tmp_path / "i").write_bytes(_idx_images(1, 2, 2, [0, 255, 0, 255]))
    (tmp_path / "l").write_bytes(_idx_labels(1, [3]))
    s = load_idx(tmp_path / "i", tmp_path / "l")
    assert len(s) == 1 and s.shape == (2, 2, 1)
    np.testing.assert_array_equal(s.images[0, ..., 0], [[0, 1], [0, 1]])
    assert s.labels.tolist() == [3]


def test_idx_label_magic_mismatch(tmp_path):
    (tmp_path / "i").write_bytes(_idx_images(1, 1, 1, [0]))
    (tmp_path / "l").write_bytes(_idx_labels(1, [0], magic=0x803))
    with pytest.raises(MagicMismatchError):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_idx_count_mismatch(tmp_path):
    (tmp_path / "i").write_bytes(_idx_images(10, 1, 1, range(10)))
    (tmp_path / "l").write_bytes(_idx_labels(9, [0] * 9))
    with pytest.raises(CountMismatchError):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_idx_truncated(tmp_path):
    (tmp_path / "i").write_bytes(_idx_images(2, 2, 2, [0] * 5))
    (tmp_path / "l").write_bytes(_idx_labels(2, [0, 1]))
    with pytest.raises(TruncatedPayloadError):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_idx_round_trip(tmp_path, small):
    q = small.with_images(np.round(small.images * 255) / 255)
    img, lab = encode_idx(q)
    (tmp_path / "i").write_bytes(img)
    (tmp_path / "l").write_bytes(lab)
    back = load_idx(tmp_path / "i", tmp_path / "l")
    np.testing.assert_array_equal(back.images, q.images)
    np.testing.assert_array_equal(back.labels, q.labels)


def test_synth_deterministic():
    a = synth_dataset(10, side=28, classes=2, seed=7)
    b = synth_dataset(10, side=28, classes=2, seed=7)
    np.testing.assert_array_equal(a.images, b.images)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_synth_empty():
    assert len(synth_dataset(0)) == 0


def test_synth_class_balance():
    counts = np.bincount(synth_dataset(1000, side=28, classes=4, seed=1).labels, minlength=4)
    assert np.all(np.abs(counts - 250) <= 25)


def test_synth_rejects_bad_arguments():
    with pytest.raises(ValueError):
        synth_dataset(5, classes=5)
    with pytest.raises(ValueError):
        synth_dataset(5, side=8)


def test_synth_range(small):
    assert small.images.min() >= 0 and small.images.max() <= 1


def test_grayscale_examples():
    assert to_grayscale(np.ones((1, 1, 3)))[0, 0, 0] == pytest.approx(1.0)
    assert to_grayscale(np.array([[[1.0, 0, 0]]]))[0, 0, 0] == pytest.approx(0.299)
    g = np.random.default_rng(0).random((4, 4, 1))
    np.testing.assert_array_equal(to_grayscale(g), g)


@given(arrays(np.float64, (3, 3, 3), elements=st.floats(0, 1)))
def test_grayscale_stays_in_unit_range(img):
    g = to_grayscale(img)
    assert g.min() >= 0 and g.max() <= 1


def test_sampleset_label_count_checked():
    with pytest.raises(ValueError):
        SampleSet(np.zeros((3, 2, 2, 1)), np.zeros(2))
