import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from capreg.core import (
    Dataset,
    Grouping,
    group_normalize,
    is_standardized,
    load_dataset,
    read_matrix_csv,
    standardize,
    write_matrix_csv,
)
from capreg.errors import (
    ConstantColumn,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidGrouping,
    InvalidNorm,
    NonFiniteData,
    NormMismatch,
)


def test_standardize_three_points():
    d = standardize(Dataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3)))
    np.testing.assert_allclose(d.x[:, 0], np.array([-1.0, 0.0, 1.0]) * math.sqrt(1.5), atol=1e-15)
    assert abs(d.x.mean()) < 1e-15
    assert d.x.var() == pytest.approx(1.0, abs=1e-14)


def test_standardize_idempotent(rng):
    d = standardize(Dataset(rng.normal(size=(15, 4)) * 3 + 2, rng.normal(size=15)))
    d2 = standardize(d)
    np.testing.assert_allclose(d2.x, d.x, atol=1e-10)
    np.testing.assert_allclose(d2.y, d.y, atol=1e-10)
    assert is_standardized(d.x, d.y)


def test_constant_column_rejected():
    X = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    with pytest.raises(ConstantColumn) as err:
        standardize(Dataset(X, np.arange(5.0)))
    assert "1" in str(err.value)


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(NonFiniteData):
        Dataset(np.array([[np.nan, 1.0], [1.0, 2.0]]), np.zeros(2))


def test_dataset_is_immutable(rng):
    d = Dataset(rng.normal(size=(4, 2)), rng.normal(size=4))
    with pytest.raises(ValueError):
        d.x[0, 0] = 1.0


def test_coefficients_back_to_original_units(rng):
    X = rng.normal(size=(20, 3)) * [1.0, 5.0, 0.1] + [3.0, -2.0, 7.0]
    y = rng.normal(size=20) + 4.0
    d = standardize(Dataset(X, y))
    beta = rng.normal(size=3)
    np.testing.assert_allclose(d.predict_original(X, beta), d.x @ beta + d.y_center, atol=1e-10)


def test_penalty_example_groups():
    g = Grouping(((0, 1), (2,)), math.inf)
    assert g.n_groups == 2 and g.is_nonoverlapping()
    assert g.membership() == [[0], [0], [1]]
    np.testing.assert_array_equal(g.labels(), [0, 0, 1])


@pytest.mark.parametrize(
    "groups, err",
    [
        (((0,), ()), InvalidGrouping),
        (((0, 0),), InvalidGrouping),
        (((0,), (2,)), InvalidGrouping),
        (((-1, 0),), IndexOutOfRange),
    ],
)
def test_grouping_rejects(groups, err):
    with pytest.raises(err):
        Grouping(groups, math.inf)


def test_grouping_index_beyond_p():
    with pytest.raises(IndexOutOfRange):
        Grouping(((0, 1, 2),), math.inf, p=2)


def test_grouping_json_round_trip(tmp_path):
    g = Grouping(((0, 1), (1, 2), (3,)), (math.inf, 2.0, 1.5), 1.0, (1.0, 2.0, 0.5))
    f = tmp_path / "g.json"
    g.to_json(f)
    assert json.loads(f.read_text())["gamma"][0] == "inf"
    assert Grouping.from_json(f) == g


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"gamma": ["inf"]}, "groups"),
        ({"groups": "0,1"}, "groups"),
        ({"groups": [[0, 1.5]]}, "groups"),
        ({"groups": [[0, 1]], "gamma": ["wide"]}, "gamma"),
    ],
)
def test_grouping_json_errors_name_field(tmp_path, doc, field):
    f = tmp_path / "g.json"
    f.write_text(json.dumps(doc))
    with pytest.raises(InvalidGrouping) as err:
        Grouping.from_json(f)
    assert field in str(err.value)


def test_grouping_json_not_json(tmp_path):
    f = tmp_path / "g.json"
    f.write_text("{groups: [")
    with pytest.raises(InvalidGrouping):
        Grouping.from_json(f)


def test_nan_norm_rejected():
    with pytest.raises(InvalidNorm):
        Grouping(((0,),), float("nan"))


@pytest.mark.parametrize("gamma, divisor", [(math.inf, 3.0), (2.0, math.sqrt(3.0))])
def test_group_normalize_divisors(rng, gamma, divisor):
    d = standardize(Dataset(rng.normal(size=(12, 4)), rng.normal(size=12)))
    g = Grouping(((0, 1, 2), (3,)), gamma)
    out = group_normalize(d, g)
    np.testing.assert_allclose(out.x[:, :3], d.x[:, :3] / divisor, atol=1e-14)
    np.testing.assert_allclose(out.x[:, 3], d.x[:, 3])


def test_group_normalize_singletons_unchanged(rng):
    d = standardize(Dataset(rng.normal(size=(10, 3)), rng.normal(size=10)))
    out = group_normalize(d, Grouping.singletons(3, 2.0))
    np.testing.assert_array_equal(out.x, d.x)
    assert out.standardized


def test_group_normalize_round_trip_predictions(rng):
    d = standardize(Dataset(rng.normal(size=(10, 5)) * 2 + 1, rng.normal(size=10)))
    out = group_normalize(d, Grouping(((0, 1), (2, 3, 4)), 2.0))
    beta = rng.normal(size=5)
    raw = rng.normal(size=(6, 5))
    # fit in normalized units, predict in original units both ways
    b_std = beta / out.x_scale * d.x_scale
    np.testing.assert_allclose(out.predict_original(raw, beta), d.predict_original(raw, b_std), atol=1e-10)
    np.testing.assert_allclose(out.x @ beta, d.x @ b_std, atol=1e-10)


def test_group_normalize_commutes_with_equal_size_reorder(rng):
    d = standardize(Dataset(rng.normal(size=(10, 4)), rng.normal(size=10)))
    a = group_normalize(d, Grouping(((0, 1), (2, 3)), 2.0))
    b = group_normalize(d, Grouping(((2, 3), (0, 1)), 2.0))
    np.testing.assert_array_equal(a.x, b.x)


def test_group_normalize_requirements(rng):
    d = standardize(Dataset(rng.normal(size=(10, 3)), rng.normal(size=10)))
    with pytest.raises(NormMismatch):
        group_normalize(d, Grouping(((0, 1), (2,)), (2.0, math.inf)))
    with pytest.raises(InvalidNorm):
        group_normalize(d, Grouping(((0, 1), (2,)), 1.0))
    with pytest.raises(InvalidGrouping):
        group_normalize(d, Grouping(((0, 1), (1, 2)), 2.0))


def test_csv_round_trip_is_exact(tmp_path, rng):
    X = rng.normal(size=(5, 3)) * 1e-3
    f = tmp_path / "x.csv"
    write_matrix_csv(f, X, header=["a", "b", "c"])
    np.testing.assert_array_equal(read_matrix_csv(f), X)


def test_load_dataset_rejects_wide_response(tmp_path, rng):
    write_matrix_csv(tmp_path / "x.csv", rng.normal(size=(4, 2)))
    write_matrix_csv(tmp_path / "y.csv", rng.normal(size=(4, 2)))
    with pytest.raises(DimensionMismatch):
        load_dataset(tmp_path / "x.csv", tmp_path / "y.csv")


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(1, 4)), elements=st.floats(-1e3, 1e3)))
def test_standardize_properties(X):
    assume(np.all(X.std(axis=0) > 1e-6 * np.maximum(1.0, np.abs(X).max(axis=0))))
    d = standardize(Dataset(X, X[:, 0]))
    np.testing.assert_allclose(d.x.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose((d.x**2).sum(axis=0), X.shape[0], rtol=1e-9)
