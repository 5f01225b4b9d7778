import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffgrn import data
from diffgrn.errors import EmptyFile, ParseError, RaggedRows, TooFewRows


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_plain_numeric_csv(tmp_path):
    t = data.load_csv(write(tmp_path, "1,2\n3,4\n5,6\n"))
    assert t.values.shape == (3, 2)
    assert t.target_columns == (1,) and t.feature_columns == (0,)
    assert t.header is None


def test_header_is_detected(tmp_path):
    t = data.load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"))
    assert t.header == ("a", "b")
    assert t.values.tolist() == [[1, 2], [3, 4]]


def test_non_numeric_cell_names_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        data.load_csv(write(tmp_path, "a,b\n1,2\n3,x\n"))
    assert exc.value.line == 3 and exc.value.column == 2


def test_ragged_and_empty(tmp_path):
    with pytest.raises(RaggedRows):
        data.load_csv(write(tmp_path, "1,2\n3\n"))
    with pytest.raises(EmptyFile):
        data.load_csv(write(tmp_path, "\n\n"))


def test_target_column_selection(tmp_path):
    t = data.load_csv(write(tmp_path, "1,2,3\n4,5,6\n"), [0, -1])
    assert t.target_columns == (0, 2) and t.feature_columns == (1,)


def test_csv_roundtrip(tmp_path):
    t = data.synthetic_mean(10, 3, seed=2)
    data.write_csv(tmp_path / "s.csv", t)
    back = data.load_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, t.values)


def test_boston_sized_split():
    t = data.synthetic_housing()
    tr, te = data.split(t, 0.25, seed=0)
    assert (tr.n_rows, te.n_rows) == (380, 126)
    assert te.n_rows == int(np.floor(506 * 0.25))


def test_split_too_few_rows():
    with pytest.raises(TooFewRows):
        data.split(data.synthetic_mean(3, 2), 0.25)


@given(n=st.integers(4, 300), seed=st.integers(0, 2**32 - 1), frac=st.floats(0.05, 0.95))
def test_split_deterministic_and_disjoint(n, seed, frac):
    t = data.table_from_arrays(np.arange(n, dtype=float)[:, None], np.zeros(n))
    tr, te = data.split(t, frac, seed)
    tr2, te2 = data.split(t, frac, seed)
    assert np.array_equal(tr.values, tr2.values) and np.array_equal(te.values, te2.values)
    a = set(tr.values[:, 0].tolist())
    b = set(te.values[:, 0].tolist())
    assert not a & b and a | b == set(range(n))
    assert len(b) == int(np.floor(n * frac))


def test_normalize_examples():
    train = data.table_from_arrays(np.array([[2.0, 7.0], [4.0, 7.0], [6.0, 7.0]]), [0.0, 5.0, 10.0])
    test = data.table_from_arrays(np.array([[8.0, 7.0], [0.0, 9.0]]), [20.0, 5.0])
    tr, te = data.normalize(train, test)
    assert tr.x[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert tr.x[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert tr.y[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert te.x[:, 0].tolist() == [1.0, 0.0]
    assert te.y[:, 0].tolist() == [1.0, 0.5]
    assert np.all((te.x >= 0) & (te.x <= 1))


@given(seed=st.integers(0, 2**32 - 1))
def test_denormalize_roundtrip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=50.0, size=(20, 3))
    t = data.table_from_arrays(x, rng.normal(size=20))
    tr, _ = data.normalize(t)
    assert np.all((tr.x >= 0) & (tr.x <= 1))
    back = data.denormalize(tr.x, tr.lo[:3], tr.hi[:3])
    np.testing.assert_allclose(back, x, rtol=0, atol=1e-12)
