import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polkern import hermitian as hm
from polkern.errors import NotHermitian, NotPositiveDefinite, SingularMatrix
from polkern.hermitian import HermitianMatrix

from conftest import random_hpd


def cofactor_det(m):
    """Independent Laplace expansion along the first row."""
    m = np.asarray(m, dtype=complex)
    total = 0j
    for j in range(3):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1) ** j * m[0, j] * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return total


def hpd_matrices():
    return st.integers(0, 2**32 - 1).map(lambda s: random_hpd(np.random.default_rng(s)))


def test_determinant_identity_and_diagonal():
    assert hm.determinant(HermitianMatrix.identity()) == 1.0
    assert hm.determinant(HermitianMatrix.diag(2, 3, 4)) == 24.0


def test_determinant_reference_matrix_matches_cofactor_oracle(classes):
    a1 = classes["A1"]
    expected = cofactor_det(a1.array)
    assert abs(expected.imag) < 1e-9 * abs(expected.real)
    assert hm.determinant(a1) == pytest.approx(expected.real, rel=1e-12)


def test_inverse_examples(classes):
    assert np.allclose(hm.inverse(HermitianMatrix.identity()).array, np.eye(3))
    inv = hm.inverse(HermitianMatrix.diag(2, 4, 5)).array
    assert np.allclose(inv, np.diag([0.5, 0.25, 0.2]), rtol=0, atol=1e-15)
    pf = classes["PF"]
    back = pf.array @ hm.inverse(pf).array
    assert np.linalg.norm(back - np.eye(3)) / math.sqrt(3) < 1e-9


def test_inverse_is_hermitian_by_construction(rng):
    m = random_hpd(rng)
    inv = hm.inverse(HermitianMatrix(m)).array
    assert np.array_equal(inv, inv.conj().T)


def test_inverse_singular_raises():
    v = np.array([1.0, 2.0, 3.0 + 1j])
    with pytest.raises(SingularMatrix):
        hm.inverse(HermitianMatrix(np.outer(v, v.conj())))


def test_trace_product_examples(classes):
    eye = HermitianMatrix.identity()
    assert hm.trace_product(eye, eye) == 3.0
    s = classes["A3"]
    assert hm.trace_product(hm.inverse(s), s) == pytest.approx(3.0, rel=1e-12)
    ps, rg = classes["PS"].array, classes["RG"].array
    assert hm.trace_product(classes["PS"], classes["RG"]) == pytest.approx(np.trace(ps @ rg).real, rel=1e-13)


def test_convex_combination_examples(classes):
    a, b = classes["A1"], classes["PF"]
    assert hm.convex_combination(a, b, 1.0) == a
    assert hm.convex_combination(a, a, 0.5) == a
    mix = hm.convex_combination(a, b, 0.9).array
    for i in range(3):
        for j in range(3):
            expected = 0.9 * a.array[i, j] + (1 - 0.9) * b.array[i, j]
            assert mix[i, j] == pytest.approx(expected, rel=1e-14, abs=1e-14)


def test_not_hermitian_is_rejected():
    m = np.eye(3, dtype=complex)
    m[0, 1] = 1.0
    with pytest.raises(NotHermitian):
        HermitianMatrix(m)


def test_pd_check_at_construction():
    with pytest.raises(NotPositiveDefinite):
        HermitianMatrix(np.diag([1.0, -1.0, 1.0]), require_pd=True)
    assert not HermitianMatrix(np.diag([1.0, 0.0, 1.0])).is_positive_definite()


def test_matrix_is_immutable():
    m = HermitianMatrix.identity()
    with pytest.raises(ValueError):
        m.array[0, 0] = 2.0
    with pytest.raises(AttributeError):
        m._m = None


def test_lower_triangle_rebuilt_from_upper():
    m = np.eye(3, dtype=complex)
    m[0, 1] = 0.5 + 0.25j
    m[1, 0] = 0.5 - 0.25j + 1e-9
    h = HermitianMatrix(m)
    assert h.array[1, 0] == np.conj(h.array[0, 1])


@settings(max_examples=60, deadline=None)
@given(hpd_matrices())
def test_pack_roundtrip(m):
    h = HermitianMatrix(m)
    assert np.array_equal(HermitianMatrix.from_packed(h.packed).array, h.array)


@settings(max_examples=100, deadline=None)
@given(hpd_matrices())
def test_determinant_properties(m):
    h = HermitianMatrix(m)
    d = hm.determinant(h)
    assert d > 0
    assert d == pytest.approx(np.linalg.det(m).real, rel=1e-9)
    assert hm.determinant(hm.inverse(h)) == pytest.approx(1.0 / d, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(hpd_matrices())
def test_double_inverse(m):
    h = HermitianMatrix(m)
    back = hm.inverse(hm.inverse(h)).array
    assert np.linalg.norm(back - m) / np.linalg.norm(m) < 1e-9


@settings(max_examples=100, deadline=None)
@given(hpd_matrices(), hpd_matrices())
def test_trace_product_symmetric(a, b):
    ab = hm.trace_product(HermitianMatrix(a), HermitianMatrix(b))
    ba = hm.trace_product(HermitianMatrix(b), HermitianMatrix(a))
    assert ab == pytest.approx(ba, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(hpd_matrices(), hpd_matrices(), st.floats(0, 1))
def test_convex_combination_stays_pd(a, b, w):
    assert hm.convex_combination(HermitianMatrix(a), HermitianMatrix(b), w).is_positive_definite()


def test_batch_helpers_agree_with_numpy(rng):
    stack = np.array([random_hpd(rng) for _ in range(20)])
    assert np.allclose(hm.det3(stack), np.linalg.det(stack).real, rtol=1e-10)
    assert np.allclose(hm.inv3(stack), np.linalg.inv(stack), rtol=1e-9, atol=1e-12)
    assert np.all(hm.is_positive_definite(stack))
