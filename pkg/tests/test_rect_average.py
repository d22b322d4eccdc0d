import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_average
from rectiso.dataset import Dataset
from rectiso.errors import CapacityError, InvalidRectangleError
from rectiso.rect_average import RectAverager, average, build, cell_count, compensated_cumsum


@pytest.fixture
def two_points():
    return RectAverager.from_arrays(np.array([[0.2], [0.8]]), np.array([1.0, 3.0]))


def test_totals(two_points):
    assert two_points.total == 4.0
    assert two_points.n == 2


def test_examples(two_points):
    assert two_points.average([0.0], [1.0]) == 2.0
    assert two_points.average([0.0], [0.5]) == 1.0
    assert two_points.average([0.3], [0.5]) is None


def test_invalid_rectangle(two_points):
    with pytest.raises(InvalidRectangleError):
        two_points.average([0.6], [0.4])
    with pytest.raises(InvalidRectangleError):
        two_points.average([0.0, 0.0], [1.0, 1.0])


def test_edge_closure(two_points):
    assert two_points.average([0.2], [0.8], "open") is None
    assert two_points.average([0.2], [0.8], "left-open") == 3.0
    assert two_points.average([0.2], [0.8], "right-open") == 1.0
    assert two_points.average([0.2], [0.8], [(False, True)]) == 3.0


def test_duplicates_collapse():
    ra = RectAverager.from_arrays(np.array([[1.0], [1.0], [2.0]]), np.array([1.0, 2.0, 6.0]))
    assert ra.coords[0].tolist() == [1.0, 2.0]
    assert ra.cell_counts.tolist() == [2.0, 1.0]
    assert ra.cell_sums.tolist() == [3.0, 6.0]
    assert ra.average([1.0], [1.0]) == 1.5


def test_capacity_budget():
    n = 10**4
    x = np.column_stack([np.arange(n), np.arange(n)[::-1]]).astype(float)
    assert cell_count(x) == 10**8
    with pytest.raises(CapacityError, match="grid-restricted"):
        RectAverager.from_arrays(x, np.zeros(n), max_cells=10**8 - 1)
    tied = np.random.default_rng(0).integers(0, 100, size=(n, 2)).astype(float)
    ra = RectAverager.from_arrays(tied, np.ones(n), max_cells=10**8)
    assert ra.n == n


@given(st.integers(1, 120), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_prefix_invariants(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 6, size=(n, d)).astype(float)
    y = rng.normal(size=n)
    ra = RectAverager.from_arrays(x, y)
    assert ra.n == n
    assert abs(ra.total - y.sum()) <= 1e-12 * max(1.0, np.abs(y).sum())
    for ax in range(d):
        assert np.all(np.diff(ra.cum_count, axis=ax) >= 0)


def _random_box(rng, x):
    a = rng.uniform(-0.1, 1.1, size=x.shape[1])
    b = rng.uniform(-0.1, 1.1, size=x.shape[1])
    return np.minimum(a, b), np.maximum(a, b)


def test_oracle_equivalence():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 500:
        n = int(rng.integers(1, 201))
        d = int(rng.integers(1, 4))
        x = rng.random((n, d)) if rng.random() < 0.5 else rng.integers(0, 5, (n, d)) / 4
        y = rng.normal(size=n)
        ra = RectAverager.from_arrays(x, y)
        for _ in range(10):
            lo, hi = _random_box(rng, x)
            got = ra.average(lo, hi)
            want = brute_average(x, y, lo, hi)
            if want is None:
                assert got is None
            else:
                assert abs(got - want) <= 1e-12
            checked += 1


@given(st.integers(1, 150), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_partition_consistency(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    y = rng.normal(size=n) + 3.0
    ra = RectAverager.from_arrays(x, y)
    lo, hi = _random_box(rng, x)
    cut = rng.uniform(lo, hi)
    s_all, c_all = ra.sum_count(lo, hi)
    s_parts, c_parts = 0.0, 0.0
    for mask in range(1 << d):
        plo, phi, closure = [], [], []
        for j in range(d):
            if (mask >> j) & 1:
                plo.append(cut[j])
                phi.append(hi[j])
                closure.append((False, True))
            else:
                plo.append(lo[j])
                phi.append(cut[j])
                closure.append((True, True))
        s, c = ra.sum_count(plo, phi, closure)
        s_parts += s
        c_parts += c
    assert c_parts == c_all
    assert abs(s_parts - s_all) <= 1e-10 * max(1.0, abs(s_all))


@given(st.integers(1, 80), st.floats(-1e3, 1e3), st.integers(0, 2**32 - 1))
def test_shift_equivariance(n, beta, seed):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    y = rng.normal(size=n)
    ra = RectAverager.from_arrays(x, y)
    rb = RectAverager.from_arrays(x, y + beta)
    lo, hi = _random_box(rng, x)
    a, b = ra.average(lo, hi), rb.average(lo, hi)
    if a is None:
        assert b is None
    else:
        assert abs(b - (a + beta)) <= 1e-12 * max(1.0, abs(beta))


def test_reflection_mirrors_boxes():
    rng = np.random.default_rng(5)
    x = rng.random((40, 2))
    y = rng.normal(size=40)
    ra = RectAverager.from_arrays(x, y)
    rr = ra.reflected()
    lo, hi = np.array([0.2, 0.1]), np.array([0.7, 0.9])
    assert rr.average(-hi, -lo) == pytest.approx(-ra.average(lo, hi), abs=1e-12)


def test_compensated_cumsum_accuracy():
    vals = np.array([1e16, 1.0, -1e16, 1.0] * 50)
    out = compensated_cumsum(vals[None, :], axis=1)[0]
    assert out[-1] == 100.0


def test_module_functions():
    data = Dataset([1.0, 3.0], [[0.2], [0.8]], "c")
    assert average(build(data), [0.0], [1.0]) == 2.0
