import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdflow.field import (
    FieldFormatError, FieldSeries, FieldShapeError, GridField, apply_symmetry,
    field_to_text, load_field, load_series, parse_field, quantize, save_field,
    save_series, sup_norm_diff,
)
from conftest import random_field


def test_parse_two_by_two_torus():
    f = parse_field("FIELD2D v1\nnx 2 ny 2 boundary torus mask 0\n0 1\n2 3\n")
    assert f.shape == (2, 2) and f.is_torus
    assert f.values.ravel().tolist() == [0, 1, 2, 3]


def test_dimension_mismatch_reported():
    text = "FIELD2D v1\nnx 3 ny 3 boundary bounded mask 0\n1 2 3\n4 5 6\n7 8\n"
    with pytest.raises(FieldFormatError, match="line 5"):
        parse_field(text)


def test_bad_header():
    with pytest.raises(FieldFormatError):
        parse_field("FIELD2D v2\nnx 1 ny 1 boundary torus mask 0\n0\n")
    with pytest.raises(FieldFormatError):
        parse_field("FIELD2D v1\nnx 1 ny 1 boundary sphere mask 0\n0\n")


def test_nan_inside_domain_rejected_with_location():
    text = "FIELD2D v1\nnx 2 ny 1 boundary bounded mask 0\n1 nan\n"
    with pytest.raises((FieldFormatError, ValueError), match="column 1"):
        parse_field(text)


def test_nan_outside_mask_is_legal():
    text = "FIELD2D v1\nnx 2 ny 1 boundary bounded mask 1\n1 nan\n1 0\n"
    f = parse_field(text)
    assert f.mask.tolist() == [[True, False]]
    assert f.domain_values.tolist() == [1.0]


def test_torus_rejects_mask():
    with pytest.raises(ValueError):
        GridField(np.zeros((2, 2)), "torus", np.ones((2, 2), bool))


def test_empty_mask_rejected():
    with pytest.raises(ValueError):
        GridField(np.zeros((2, 2)), "bounded", np.zeros((2, 2), bool))


@pytest.mark.parametrize("binary", [False, True])
def test_round_trip_bit_exact(tmp_path, rng, binary):
    for i in range(20):
        f = random_field(rng, masked=True)
        f = f.with_values(f.values * 10.0 ** rng.integers(-20, 20)) if i % 3 == 0 else f
        p = tmp_path / f"f{i}.field"
        save_field(f, p, binary=binary)
        g = load_field(p)
        assert g.boundary == f.boundary
        assert (g.mask is None) == (f.mask is None)
        if f.mask is not None:
            assert np.array_equal(g.mask, f.mask)
        dom = f.domain
        assert np.array_equal(g.values[dom], f.values[dom])
        assert g == f


def test_series_round_trip(tmp_path, rng):
    frames = [GridField(rng.normal(size=(3, 4))) for _ in range(3)]
    save_series(FieldSeries(frames, 0.5), tmp_path / "s")
    s = load_series(tmp_path / "s")
    assert s.dt == 0.5 and len(s) == 3
    assert all(a == b for a, b in zip(s, frames))
    assert sorted(p.name for p in (tmp_path / "s").iterdir())[:2] == ["frame_000000.field", "frame_000001.field"]


def test_series_rejects_mixed_grids():
    with pytest.raises(ValueError):
        FieldSeries([GridField(np.zeros((2, 2))), GridField(np.zeros((2, 3)))], 1.0)
    with pytest.raises(ValueError):
        FieldSeries([GridField(np.zeros((2, 2)))], 0.0)


def test_quantize_examples():
    q = quantize(GridField(np.array([[0.0, 1.0]]), "bounded"))
    assert q.values.tolist() == [[0, 255]]
    q = quantize(GridField(np.array([[0, 0.5, 1.0]]), "bounded"), levels=3)
    assert q.values.tolist() == [[0, 1, 2]]
    # 255 * 0.3 is exactly 76.5 in binary floating point and rounds up
    q = quantize(GridField(np.array([[0.0, 0.3, 1.0]]), "bounded"))
    assert q.values.tolist() == [[0, 77, 255]]


def test_quantize_halves_round_up():
    q = quantize(GridField(np.array([[0.0, 0.25, 0.75, 1.0]]), "bounded"), levels=3)
    assert q.values.tolist() == [[0, 1, 2, 2]]


def test_quantize_rejects_constant():
    with pytest.raises(ValueError):
        quantize(GridField(np.ones((2, 2))))


def test_quantize_masked_ignores_outside():
    f = GridField(np.array([[0.0, 100.0, 1.0]]), "bounded", np.array([[True, False, True]]))
    q = quantize(f)
    assert q.values[0, 0] == 0 and q.values[0, 2] == 255 and np.isnan(q.values[0, 1])


def test_quantize_idempotent_and_monotone(rng):
    for _ in range(50):
        f = random_field(rng, max_side=10, masked=True)
        if np.ptp(f.domain_values) == 0:
            continue
        q = quantize(f)
        assert quantize(q) == q
        a, b = f.domain_values, q.domain_values
        order = np.argsort(a, kind="stable")
        assert np.all(np.diff(b[order]) >= 0)


def test_sup_norm_examples():
    f = GridField(np.arange(4.0).reshape(2, 2))
    assert sup_norm_diff(f, f) == 0
    assert sup_norm_diff(f, f.with_values(f.values + 0.25)) == 0.25
    m = np.array([[True, True], [True, False]])
    a = GridField(np.zeros((2, 2)), "bounded", m)
    b = GridField(np.array([[0, 0], [0, 7.0]]), "bounded", m)
    assert sup_norm_diff(a, b) == 0
    with pytest.raises(FieldShapeError):
        sup_norm_diff(f, GridField(np.zeros((2, 3))))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=12, max_size=12))
def test_sup_norm_is_metric(xs):
    a, b, c = (GridField(np.array(xs[i:i + 4]).reshape(2, 2)) for i in (0, 4, 8))
    assert sup_norm_diff(a, b) == sup_norm_diff(b, a) >= 0
    assert sup_norm_diff(a, a) == 0
    assert sup_norm_diff(a, c) <= sup_norm_diff(a, b) + sup_norm_diff(b, c) + 1e-9


def test_apply_symmetry_is_permutation(rng):
    f = GridField(rng.normal(size=(4, 6)))
    g = apply_symmetry(f, shift=(2, 1), rotate=True, reflect=True)
    assert sorted(g.values.ravel()) == sorted(f.values.ravel())
    assert apply_symmetry(f, shift=(6, 4)) == f


def test_text_format_layout():
    f = GridField(np.array([[1.5, 2.0]]), "bounded", np.array([[True, False]]))
    lines = field_to_text(f).splitlines()
    assert lines[0] == "FIELD2D v1"
    assert lines[1] == "nx 2 ny 1 boundary bounded mask 1"
    assert lines[2].split() == ["1.5", "2.0"]
    assert lines[3].split() == ["1", "0"]
