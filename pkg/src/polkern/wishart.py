"""Scaled complex Wishart model: density, ML estimation and Goodman sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import hermitian as hm
from .errors import InsufficientPixels, NotPositiveDefinite, SingularEstimate, SingularMatrix
from .hermitian import HermitianMatrix

MIN_LOOKS = 3


@dataclass(frozen=True)
class WishartModel:
    """Covariance parameter ``sigma`` plus equivalent number of looks."""

    sigma: HermitianMatrix
    looks: float

    def __post_init__(self):
        if not isinstance(self.sigma, HermitianMatrix):
            object.__setattr__(self, "sigma", HermitianMatrix(self.sigma))
        if not self.looks >= MIN_LOOKS:
            raise ValueError(f"looks must be >= {MIN_LOOKS}, got {self.looks}")
        if not self.sigma.is_positive_definite():
            raise NotPositiveDefinite("Wishart sigma must be positive definite")


def log_multigamma3(n):
    """``ln Gamma_3(n) = 3 ln(pi) + sum_{i=0}^{2} ln Gamma(n - i)``."""
    return 3.0 * math.log(math.pi) + float(sum(gammaln(n - i) for i in range(3)))


def log_density(model, z):
    """Log of the scaled complex Wishart density at the observation ``z``.

    ``z`` may be a single matrix or a stack of shape ``(n, 3, 3)``, in which
    case an array of n values is returned.
    """
    n = float(model.looks)
    inv_sigma = hm.inverse(model.sigma).array
    const = 3.0 * n * math.log(n) - n * math.log(hm.determinant(model.sigma)) - log_multigamma3(n)
    if isinstance(z, np.ndarray) and z.ndim == 3:
        det_z = hm.det3(z)
        if np.any(det_z <= 0):
            raise NotPositiveDefinite("observation must be positive definite")
        tr = np.einsum("ij,nji->n", inv_sigma, z).real
        return const + (n - 3.0) * np.log(det_z) - n * tr
    det_z = hm.determinant(z)
    if det_z <= 0:
        raise NotPositiveDefinite("observation must be positive definite")
    return const + (n - 3.0) * math.log(det_z) - n * hm.trace_product(inv_sigma, z)


def estimate(pixels, looks):
    """Maximum-likelihood Wishart model from a set of pixel matrices.

    ``pixels`` may be a sequence of :class:`HermitianMatrix` or an array of
    shape ``(n, 3, 3)``; the estimate of sigma is their entrywise mean.
    """
    if isinstance(pixels, np.ndarray) and pixels.ndim == 3:
        arr = pixels
    else:
        arr = np.array([hm.as_array(p) for p in pixels], dtype=np.complex128).reshape(-1, 3, 3)
    if arr.shape[0] < 3:
        raise InsufficientPixels(f"need at least 3 pixels, got {arr.shape[0]}")
    mean = arr.mean(axis=0)
    if not hm.is_positive_definite(mean):
        raise SingularEstimate("mean of pixels is not positive definite")
    return WishartModel(HermitianMatrix(mean), float(looks))


def real_covariance(sigma):
    """Covariance of the stacked (Re z, Im z) Gaussian vector, i.e. Theta / 2."""
    s = hm.as_array(sigma)
    theta = np.block([[s.real, -s.imag], [s.imag, s.real]])
    return 0.5 * theta


def _cholesky6(sigma):
    try:
        return np.linalg.cholesky(real_covariance(sigma))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("real 6x6 covariance is not positive definite") from exc


def _draw(chol, rng, shape):
    w = rng.standard_normal(shape + (6,))
    x = w @ chol.T
    return x[..., :3] + 1j * x[..., 3:]


def sample_scattering(sigma, rng, size=None):
    """Zero-mean complex Gaussian scattering vector(s) with ``E[z z^H] = sigma``.

    Returns a complex array of shape ``(3,)`` or ``(size, 3)``.
    """
    chol = _cholesky6(sigma)
    shape = () if size is None else (int(size),)
    return _draw(chol, rng, shape)


def sample_multilook(sigma, looks, rng, size=None):
    """N-look covariance matrix: the mean of ``looks`` outer products ``z z^H``.

    Returns a :class:`HermitianMatrix` when ``size`` is None, otherwise an
    array of shape ``(size, 3, 3)``.
    """
    if int(looks) != looks or looks < MIN_LOOKS:
        raise ValueError(f"looks must be an integer >= {MIN_LOOKS}, got {looks}")
    looks = int(looks)
    chol = _cholesky6(sigma)
    shape = (looks,) if size is None else (int(size), looks)
    z = _draw(chol, rng, shape)
    out = np.einsum("...li,...lj->...ij", z, np.conj(z)) / looks
    if size is None:
        return HermitianMatrix(out)
    return out
