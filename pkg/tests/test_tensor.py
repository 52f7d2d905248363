import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impnet.errors import DataError, NonFiniteError, ShapeError
from impnet.tensor import (
    GaussianSource, Shape, archive_to_bytes, check_finite, flatten, gaussian_fill, linear_index,
    load_archive, load_tensor, pad_time_replicate, read_tensor_from, save_archive, save_tensor,
    save_tensor_csv, slice_time, tensor_from_bytes, tensor_to_bytes, unflatten, zeros,
)

dims = st.integers(1, 5)


@pytest.mark.parametrize("shape,count", [((2, 2, 1), 4), ((1, 1, 1), 1), ((40, 21, 1), 840)])
def test_zeros(shape, count):
    z = zeros(Shape(*shape))
    assert z.size == count and z.dtype == np.float64
    assert np.all(z == 0) and z.sum() == 0


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 1.5)])
def test_shape_rejects_non_positive(bad):
    with pytest.raises(ShapeError):
        Shape(*bad)


def test_shape_overflow():
    with pytest.raises(ShapeError):
        Shape(2**16, 2**16, 2)


def test_zero_variance_fill():
    t = gaussian_fill(Shape(1, 1, 1), GaussianSource(3, mean=5.0, stddev=0.0))
    assert t.shape == (1, 1, 1) and t[0, 0, 0] == 5.0


def test_fill_stddev_bound():
    t = gaussian_fill(Shape(100, 100, 1), GaussianSource(0, 0.0, 0.01))
    assert 0.008 <= t.std() <= 0.012


def test_same_seed_same_tensor():
    a = gaussian_fill(Shape(7, 5, 3), GaussianSource(42, 0.0, 1.0))
    b = gaussian_fill(Shape(7, 5, 3), GaussianSource(42, 0.0, 1.0))
    assert a.tobytes() == b.tobytes()


def test_box_muller_pairs_consumed():
    # an odd request discards the pair's second draw, so the next call starts a fresh pair
    src = GaussianSource(9)
    first = np.concatenate([src.standard_normal(3), src.standard_normal(2)])
    whole = GaussianSource(9).standard_normal(6)
    assert np.array_equal(first[:3], whole[:3])
    assert np.array_equal(first[3:], whole[4:6])


def test_box_muller_against_uniform_stream():
    u = np.random.Generator(np.random.PCG64(5)).random(4)
    r = np.sqrt(-2 * np.log(1 - u[0::2]))
    expect = np.stack([r * np.cos(2 * np.pi * u[1::2]), r * np.sin(2 * np.pi * u[1::2])], 1).ravel()
    assert np.array_equal(GaussianSource(5).standard_normal(4), expect)


def test_gaussian_source_rejects_negative_stddev():
    with pytest.raises(ValueError):
        GaussianSource(0, stddev=-1.0)


def test_slice_time_examples():
    t = np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1)
    assert slice_time(t, 1, 2).ravel().tolist() == [2.0, 3.0]
    assert np.array_equal(slice_time(t, 0, 3), t)
    with pytest.raises(ShapeError):
        slice_time(t, 3, 1)


def test_pad_examples():
    xy = np.array([4.0, 7.0]).reshape(1, 2, 1)
    assert pad_time_replicate(xy, 1, 0).ravel().tolist() == [4.0, 4.0, 7.0]
    assert np.array_equal(pad_time_replicate(xy, 0, 0), xy)
    x = np.array([2.5]).reshape(1, 1, 1)
    assert pad_time_replicate(x, 2, 2).ravel().tolist() == [2.5] * 5


@settings(max_examples=50, deadline=None)
@given(dims, dims, dims, st.integers(0, 3), st.integers(0, 3))
def test_pad_then_slice_roundtrip(f, t, m, left, right):
    x = np.random.default_rng(f * 100 + t * 10 + m).standard_normal((f, t, m))
    assert np.array_equal(slice_time(pad_time_replicate(x, left, right), left, t), x)


@settings(max_examples=50, deadline=None)
@given(dims, dims, dims)
def test_linear_order_roundtrip(f, t, m):
    shape = Shape(f, t, m)
    x = np.random.default_rng(f + 7 * t + 49 * m).standard_normal(shape.as_tuple())
    flat = flatten(x)
    for i in range(f):
        for j in range(t):
            for k in range(m):
                assert flat[linear_index(shape, i, j, k)] == x[i, j, k]
    assert np.array_equal(unflatten(flat, shape), x)


def test_frequency_is_fastest():
    x = np.arange(8, dtype=float).reshape((2, 2, 2), order="F")
    assert flatten(x).tolist() == list(range(8))
    assert x[1, 0, 0] == 1 and x[0, 1, 0] == 2 and x[0, 0, 1] == 4


def test_container_layout_and_roundtrip(tmp_path):
    x = np.random.default_rng(0).standard_normal((3, 4, 2))
    blob = tensor_to_bytes(x)
    assert blob[:4] == b"IMPT"
    assert struct.unpack("<4I", blob[4:20]) == (1, 3, 4, 2)
    assert np.array_equal(np.frombuffer(blob[20:], "<f8"), flatten(x))
    assert np.array_equal(tensor_from_bytes(blob), x)
    save_tensor(tmp_path / "x.impt", x)
    assert np.array_equal(load_tensor(tmp_path / "x.impt"), x)


def test_container_errors():
    blob = tensor_to_bytes(np.zeros((2, 2, 1)))
    with pytest.raises(DataError, match="magic"):
        tensor_from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(DataError, match="truncated"):
        tensor_from_bytes(blob[:-3])
    with pytest.raises(DataError, match="version"):
        tensor_from_bytes(blob[:4] + struct.pack("<I", 9) + blob[8:])


def test_archive_roundtrip(tmp_path):
    items = [("utt-a", np.ones((2, 3, 1))), ("ütt-b", np.arange(6.0).reshape(3, 2, 1))]
    save_archive(tmp_path / "a.impf", items)
    back = load_archive(tmp_path / "a.impf")
    assert [k for k, _ in back] == ["utt-a", "ütt-b"]
    assert all(np.array_equal(a, b) for (_, a), (_, b) in zip(items, back))
    raw = archive_to_bytes(items)
    (tmp_path / "b.impf").write_bytes(raw + b"\0")
    with pytest.raises(DataError, match="trailing"):
        load_archive(tmp_path / "b.impf")


def test_read_tensor_stream_consumes_exactly_one():
    a, b = np.ones((1, 2, 1)), np.zeros((2, 1, 1))
    fh = io.BytesIO(tensor_to_bytes(a) + tensor_to_bytes(b))
    assert np.array_equal(read_tensor_from(fh), a)
    assert np.array_equal(read_tensor_from(fh), b)


def test_csv_rows(tmp_path):
    x = np.arange(12, dtype=float).reshape((2, 3, 2), order="F")
    save_tensor_csv(tmp_path / "x.csv", x)
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "0,0,0.0,2.0,4.0"
    assert lines[3] == "1,1,7.0,9.0,11.0"


def test_check_finite():
    check_finite(np.array([np.nan]))  # debug off: no scan
    with pytest.raises(NonFiniteError):
        check_finite(np.array([1.0, np.inf]), force=True)
