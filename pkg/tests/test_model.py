import numpy as np
import pytest

from colmax.errors import (
    DimMismatch,
    EmptyTokens,
    InvalidArgument,
    NonFiniteValue,
    ZeroVector,
)
from colmax.model import (
    MultiVector,
    Precision,
    SimilarityKind,
    l2_normalize_rows,
    validate_multivector,
    validate_vector,
)


def test_valid_multivector():
    mv = MultiVector("doc", np.ones((2, 4)))
    assert validate_multivector(mv)
    assert mv.dim == 4
    assert mv.n_tokens == 2


def test_ragged_tokens_report_index():
    with pytest.raises(DimMismatch) as e:
        MultiVector("doc", [[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0]])
    assert e.value.index == 1
    assert e.value.code == "DimMismatch"


def test_non_finite_reports_position():
    tokens = np.ones((3, 4))
    tokens[2, 1] = np.nan
    with pytest.raises(NonFiniteValue) as e:
        MultiVector("doc", tokens)
    assert (e.value.index, e.value.coordinate) == (2, 1)


def test_empty_tokens():
    with pytest.raises(EmptyTokens):
        MultiVector("doc", [])
    with pytest.raises(EmptyTokens):
        MultiVector("doc", np.zeros((0, 4)))


def test_tokens_are_read_only_copies():
    tokens = np.ones((2, 3))
    mv = MultiVector("doc", tokens)
    tokens[0, 0] = 5.0
    assert mv.tokens[0, 0] == 1.0
    with pytest.raises(ValueError):
        mv.tokens[0, 0] = 2.0


def test_int_tokens_become_float():
    mv = MultiVector("doc", [[1, 0], [0, 1]])
    assert mv.tokens.dtype == np.float64


def test_precision_sizes():
    assert [p.bytes_per_element for p in Precision] == [4, 2, 1, 0.125]
    assert Precision.INT8.bytes_per_token(128) == 132
    assert Precision.BINARY.bytes_per_token(64) == 8
    assert Precision.FP16.payload_bytes(10, 8) == 160
    for p in Precision:
        assert Precision.from_code(p.code) == p


def test_parse_enums():
    assert Precision.parse("FP16") == Precision.FP16
    assert SimilarityKind.parse("cosine") == SimilarityKind.COSINE
    with pytest.raises(InvalidArgument):
        Precision.parse("fp8")
    with pytest.raises(InvalidArgument):
        SimilarityKind.parse("l2")


def test_validate_vector():
    assert validate_vector([1, 2]).dtype == np.float64
    with pytest.raises(NonFiniteValue):
        validate_vector([1.0, np.inf])
    with pytest.raises(InvalidArgument):
        validate_vector([])


def test_normalize_rows():
    out = l2_normalize_rows(np.array([[3.0, 4.0], [0.0, 2.0]]))
    np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 1.0]])
    with pytest.raises(ZeroVector):
        l2_normalize_rows(np.zeros((1, 2)))
