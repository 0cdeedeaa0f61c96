"""Closed-form arithmetic on 3x3 complex Hermitian matrices.

Matrices are stored in the six-entry upper-triangle form used by PolSAR
covariance products::

    [[Z_hh,        Z_hhhv,      Z_hhvv],
     [conj(Z_hhhv), Z_hv,        Z_hvvv],
     [conj(Z_hhvv), conj(Z_hvvv), Z_vv ]]

The ``packed`` layout is the 9-float vector
``[Z_hh, Z_hv, Z_vv, Re Z_hhhv, Im Z_hhhv, Re Z_hhvv, Im Z_hhvv, Re Z_hvvv, Im Z_hvvv]``.

Besides the :class:`HermitianMatrix` value type, the module exposes batch
helpers (``det3``, ``inv3``, ``pack``, ``unpack``...) acting on arrays of
shape ``(..., 3, 3)``; the distance and simulation code paths use those.
"""

from __future__ import annotations

import numpy as np

from .errors import NotHermitian, NotPositiveDefinite, SingularMatrix

HERMITIAN_RTOL = 1e-6
SINGULAR_RTOL = 1e-12
IMAG_RTOL = 1e-9

# (row, col) of the off-diagonal entries in packed order
_UPPER = ((0, 1), (0, 2), (1, 2))


# --------------------------------------------------------------------------
# batch helpers


def pack(m):
    """(..., 3, 3) complex -> (..., 9) float in the packed layout."""
    m = np.asarray(m)
    out = np.empty(m.shape[:-2] + (9,), dtype=np.float64)
    out[..., 0] = m[..., 0, 0].real
    out[..., 1] = m[..., 1, 1].real
    out[..., 2] = m[..., 2, 2].real
    for k, (i, j) in enumerate(_UPPER):
        out[..., 3 + 2 * k] = m[..., i, j].real
        out[..., 4 + 2 * k] = m[..., i, j].imag
    return out


def unpack(p):
    """(..., 9) float in the packed layout -> (..., 3, 3) complex Hermitian."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 9:
        raise ValueError(f"packed Hermitian needs 9 trailing values, got {p.shape[-1]}")
    m = np.zeros(p.shape[:-1] + (3, 3), dtype=np.complex128)
    m[..., 0, 0] = p[..., 0]
    m[..., 1, 1] = p[..., 1]
    m[..., 2, 2] = p[..., 2]
    for k, (i, j) in enumerate(_UPPER):
        z = p[..., 3 + 2 * k] + 1j * p[..., 4 + 2 * k]
        m[..., i, j] = z
        m[..., j, i] = np.conj(z)
    return m


def det3_complex(m):
    """Cofactor expansion along the first row; complex result."""
    m = np.asarray(m)
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    d, e, f = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    g, h, i = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def det3(m):
    """Real determinant of Hermitian matrices, shape (..., 3, 3) -> (...)."""
    return np.real(det3_complex(m))


def adj3(m):
    """Adjugate of Hermitian matrices with the lower triangle forced to the
    conjugate of the upper one."""
    m = np.asarray(m)
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    d, e, f = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    g, h, i = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]
    out = np.empty(m.shape, dtype=np.complex128)
    out[..., 0, 0] = (e * i - f * h).real
    out[..., 1, 1] = (a * i - c * g).real
    out[..., 2, 2] = (a * e - b * d).real
    out[..., 0, 1] = c * h - b * i
    out[..., 0, 2] = b * f - c * e
    out[..., 1, 2] = c * d - a * f
    out[..., 1, 0] = np.conj(out[..., 0, 1])
    out[..., 2, 0] = np.conj(out[..., 0, 2])
    out[..., 2, 1] = np.conj(out[..., 1, 2])
    return out


def scale3(m):
    """Largest absolute diagonal entry, used to make tolerances scale-free."""
    m = np.asarray(m)
    return np.max(np.abs(np.real(np.diagonal(m, axis1=-2, axis2=-1))), axis=-1)


def inv3(m, check=True):
    """Batch Hermitian inverse via adjugate / determinant.

    With ``check`` the call raises :class:`SingularMatrix` when any
    determinant is at or below ``1e-12 * scale**3``.
    """
    m = np.asarray(m, dtype=np.complex128)
    det = det3(m)
    if check:
        tol = SINGULAR_RTOL * scale3(m) ** 3
        bad = ~(np.abs(det) > tol)
        if np.any(bad):
            raise SingularMatrix(f"determinant {np.min(np.abs(det)):.3e} below tolerance")
    return adj3(m) / det[..., None, None]


def leading_minors(m):
    """The three leading principal minors, shape (..., 3)."""
    m = np.asarray(m)
    m1 = m[..., 0, 0].real
    m2 = (m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]).real
    return np.stack([m1, m2, det3(m)], axis=-1)


def is_positive_definite(m):
    """Sylvester's criterion, batched; returns a bool array of shape (...)."""
    minors = leading_minors(m)
    scale = scale3(m)
    tol = SINGULAR_RTOL * np.stack([scale, scale**2, scale**3], axis=-1)
    return np.all(minors > tol, axis=-1) & np.all(np.isfinite(minors), axis=-1)


def hermitian_error(m):
    """Relative Frobenius distance between ``m`` and its conjugate transpose."""
    m = np.asarray(m)
    diff = np.linalg.norm(m - np.conj(np.swapaxes(m, -1, -2)), axis=(-2, -1))
    norm = np.linalg.norm(m, axis=(-2, -1))
    return np.where(norm > 0, diff / np.where(norm > 0, norm, 1.0), diff)


# --------------------------------------------------------------------------
# value type


class HermitianMatrix:
    """Immutable 3x3 complex Hermitian matrix.

    Parameters
    ----------
    matrix : array_like, shape (3, 3)
        Full complex matrix. It must be Hermitian within a relative Frobenius
        error of 1e-6; the stored value is rebuilt from the upper triangle so
        that ``M == M^H`` holds exactly.
    require_pd : bool
        Reject matrices that fail Sylvester's criterion.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix, *, require_pd=False):
        m = np.array(matrix, dtype=np.complex128)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        err = float(hermitian_error(m))
        if err > HERMITIAN_RTOL:
            raise NotHermitian(f"relative Hermitian violation {err:.2e} exceeds {HERMITIAN_RTOL}")
        m = unpack(pack(m))
        m.setflags(write=False)
        object.__setattr__(self, "_m", m)
        if require_pd and not is_positive_definite(m):
            raise NotPositiveDefinite("matrix is not positive definite")

    def __setattr__(self, name, value):
        raise AttributeError("HermitianMatrix is immutable")

    @classmethod
    def from_entries(cls, hh, hv, vv, hhhv=0j, hhvv=0j, hvvv=0j, *, require_pd=False):
        m = np.diag(np.array([hh, hv, vv], dtype=np.complex128))
        for (i, j), z in zip(_UPPER, (hhhv, hhvv, hvvv)):
            m[i, j] = z
            m[j, i] = np.conj(z)
        return cls(m, require_pd=require_pd)

    @classmethod
    def from_packed(cls, values, *, require_pd=False):
        return cls(unpack(values), require_pd=require_pd)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def diag(cls, a, b, c):
        return cls.from_entries(a, b, c)

    @property
    def array(self):
        """Read-only (3, 3) complex view."""
        return self._m

    @property
    def packed(self):
        return pack(self._m)

    @property
    def diagonal(self):
        return self._m.diagonal().real.copy()

    def is_positive_definite(self):
        return bool(is_positive_definite(self._m))

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, HermitianMatrix):
            return NotImplemented
        return bool(np.array_equal(self._m, other._m))

    def __hash__(self):
        return hash(self._m.tobytes())

    def __repr__(self):
        hh, hv, vv = self.diagonal
        off = ", ".join(f"{self._m[i, j]:.6g}" for i, j in _UPPER)
        return f"HermitianMatrix(diag=({hh:.6g}, {hv:.6g}, {vv:.6g}), upper=({off}))"


def as_array(m):
    if isinstance(m, HermitianMatrix):
        return m.array
    return np.asarray(m, dtype=np.complex128)


def determinant(m):
    """Determinant of a Hermitian matrix as a float."""
    arr = as_array(m)
    det = det3_complex(arr)
    scale = max(float(scale3(arr)), np.finfo(float).tiny) ** 3
    residual = abs(det.imag) / max(abs(det.real), scale * SINGULAR_RTOL)
    assert residual < IMAG_RTOL, f"non-real determinant of Hermitian input ({residual:.2e})"
    return float(det.real)


def inverse(m):
    """Inverse of a Hermitian matrix.

    Raises
    ------
    SingularMatrix
        When ``determinant(m) <= 1e-12 * max_diag**3``.
    """
    return HermitianMatrix(inv3(as_array(m)))


def trace_product(a, b):
    """``Re(Tr(A B))`` without forming the product."""
    return float(np.real(np.sum(as_array(a) * as_array(b).T)))


def convex_combination(a, b, w):
    """``w*A + (1-w)*B`` for ``0 <= w <= 1``."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {w}")
    if w == 1.0:
        return a if isinstance(a, HermitianMatrix) else HermitianMatrix(a)
    if w == 0.0:
        return b if isinstance(b, HermitianMatrix) else HermitianMatrix(b)
    return HermitianMatrix(w * as_array(a) + (1.0 - w) * as_array(b))
