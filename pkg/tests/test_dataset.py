import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rectiso.dataset import (
    Dataset,
    DimKind,
    lag_embed,
    load_csv,
    parse_kinds,
    read_series,
    write_csv,
)
from rectiso.errors import EmptyDatasetError, ParseError, SchemaError, ValidationError


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_three_rows(tmp_path):
    p = _write(tmp_path, "y,x1\n1.0,0.1\n2.0,0.2\n3.5,0.3\n")
    data = load_csv(p, "y", "c")
    assert (data.n, data.d) == (3, 1)
    np.testing.assert_array_equal(data.responses, [1.0, 2.0, 3.5])
    np.testing.assert_array_equal(data.covariates[:, 0], [0.1, 0.2, 0.3])


def test_parse_error_names_row(tmp_path):
    p = _write(tmp_path, "y,x1\n1,0.1\n2,abc\n3,0.3\n")
    with pytest.raises(ParseError, match="row 2") as exc:
        load_csv(p, "y", "c")
    assert exc.value.row == 2


def test_fractional_discrete_rejected(tmp_path):
    p = _write(tmp_path, "y,x1\n1,0\n2,1.5\n")
    with pytest.raises(ValidationError):
        load_csv(p, "y", "d")


def test_missing_columns(tmp_path):
    p = _write(tmp_path, "y,x1\n1,0\n")
    with pytest.raises(SchemaError):
        load_csv(p, "z", "c")
    with pytest.raises(SchemaError):
        load_csv(p, "y", "c", covariates=["x2"])
    with pytest.raises(SchemaError):
        load_csv(p, "y", "c,d")


def test_covariate_selection_and_kinds(tmp_path):
    p = _write(tmp_path, "a,y,b\n1,2,3\n4,5,6\n")
    data = load_csv(p, "y", "d,c", covariates=["b", "a"])
    assert data.names == ("b", "a")
    assert data.kinds == (DimKind.DISCRETE, DimKind.CONTINUOUS)
    np.testing.assert_array_equal(data.covariates, [[3, 1], [6, 4]])


def test_parse_kinds_forms():
    assert parse_kinds("d,c,t") == parse_kinds("dct") == parse_kinds(["d", "c", "t"])
    with pytest.raises(SchemaError):
        parse_kinds("q")


def test_lag_embed_definition():
    data = lag_embed([1, 2, 3], lags=1)
    np.testing.assert_array_equal(data.responses, [2, 3])
    np.testing.assert_array_equal(data.covariates, [[1], [2]])
    assert data.kinds == (DimKind.DISCRETE,)


def test_lag_embed_with_trend_length():
    data = lag_embed(np.arange(68) % 7, lags=1, with_trend=True)
    assert data.n == 67
    np.testing.assert_allclose(data.covariates[:, 1], np.arange(1, 68) / 67)
    assert data.kinds[-1] is DimKind.TREND


def test_lag_embed_too_short():
    with pytest.raises(EmptyDatasetError):
        lag_embed([5], lags=1)


def test_lag_embed_continuous_series():
    data = lag_embed([0.5, 1.5, -2.0], lags=1)
    assert data.kinds == (DimKind.CONTINUOUS,)


@given(
    st.lists(st.integers(0, 30), min_size=4, max_size=40),
    st.integers(1, 3),
)
def test_lag_embed_reconstruction(series, lags):
    if len(series) <= lags:
        return
    data = lag_embed(series, lags=lags)
    s = np.asarray(series, dtype=float)
    for t in range(data.n):
        assert data.responses[t] == s[t + lags]
        np.testing.assert_array_equal(data.covariates[t], s[t : t + lags][::-1])


def test_dataset_invariants():
    with pytest.raises(EmptyDatasetError):
        Dataset([], np.empty((0, 1)), "c")
    with pytest.raises(ValidationError):
        Dataset([1.0, np.nan], [[0.0], [1.0]], "c")
    with pytest.raises(ValidationError):
        Dataset([1.0, 2.0], [[-1.0], [1.0]], "d")
    with pytest.raises(ValidationError):
        Dataset([1.0, 2.0], [[0.5, 0.5], [1.0, 1.0]], "tt")
    with pytest.raises(ValidationError):
        Dataset([1.0, 2.0], [[0.1], [1.0]], "t")
    with pytest.raises(ValidationError):
        Dataset([1.0, 2.0], [[0.1], [1.0]], "cc")


def test_dataset_is_frozen():
    data = Dataset([1.0, 2.0], [[0.0], [1.0]], "c")
    with pytest.raises(ValueError):
        data.responses[0] = 5.0
    with pytest.raises(AttributeError):
        data.kinds = ()


def test_subset_rebuilds_trend():
    data = lag_embed([3, 1, 4, 1, 5], lags=1, with_trend=True)
    sub = data.subset([0, 2])
    np.testing.assert_allclose(sub.covariates[:, 1], [0.5, 1.0])


finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, st.integers(0, 1000)), min_size=1, max_size=25))
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    y = [r[0] for r in rows]
    x = [[r[1], r[2]] for r in rows]
    data = Dataset(y, x, "cd", ("a", "b"))
    write_csv(data, path)
    back = load_csv(path, "y", "cd")
    np.testing.assert_array_equal(back.responses, data.responses)
    np.testing.assert_array_equal(back.covariates, data.covariates)
    assert back.names == ("a", "b")


def test_read_series(tmp_path):
    p = _write(tmp_path, "t,y\n0,4\n1,6\n")
    np.testing.assert_array_equal(read_series(p, "y"), [4, 6])
    with pytest.raises(SchemaError):
        read_series(p, "count")
