"""Closed-form stochastic distances between scaled complex Wishart models.

Five symmetrized h-phi distances are supported: Bhattacharyya, Kullback-Leibler,
Renyi of order beta, Hellinger and Chi-Square. All of them assume that both
models share the same number of looks.

The bulk work runs through :func:`pairwise`, which hands stacked covariance
arrays to the compiled kernel (or its numpy fallback).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import _backend
from . import hermitian as hm
from .errors import LooksMismatch, NonFiniteResult, QuadratureFailure, SingularMatrix

FAMILIES = ("bhattacharyya", "kullback_leibler", "renyi", "hellinger", "chi_square")
_TAGS = {"B": "bhattacharyya", "K": "kullback_leibler", "R": "renyi", "H": "hellinger", "C": "chi_square"}
_ALIASES = {"kl": "kullback_leibler", "chi2": "chi_square", "chisquare": "chi_square"}
DEFAULT_RENYI_BETA = 0.9


@dataclass(frozen=True)
class DistanceKind:
    """One of the five distances; ``beta`` is only meaningful for Renyi."""

    family: str
    beta: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown distance family {self.family!r}")
        if self.family == "renyi":
            beta = DEFAULT_RENYI_BETA if self.beta is None else float(self.beta)
            if not 0.0 < beta < 1.0:
                raise ValueError(f"Renyi order must satisfy 0 < beta < 1, got {beta}")
            object.__setattr__(self, "beta", beta)
        elif self.beta is not None:
            object.__setattr__(self, "beta", None)

    @classmethod
    def parse(cls, text, beta=None):
        """Accept family names, short tags (B, K, R, H, C) and a few aliases."""
        key = text.strip()
        if key.upper() in _TAGS:
            family = _TAGS[key.upper()]
        else:
            key = key.lower().replace("-", "_")
            family = _ALIASES.get(key, key)
        return cls(family, beta)

    @property
    def code(self):
        return FAMILIES.index(self.family)

    @property
    def tag(self):
        return "BKRHC"[self.code]

    def __str__(self):
        if self.family == "renyi":
            return f"renyi({self.beta:g})"
        return self.family


BHATTACHARYYA = DistanceKind("bhattacharyya")
KULLBACK_LEIBLER = DistanceKind("kullback_leibler")
HELLINGER = DistanceKind("hellinger")
CHI_SQUARE = DistanceKind("chi_square")


def renyi(beta=DEFAULT_RENYI_BETA):
    return DistanceKind("renyi", beta)


ALL_KINDS = (BHATTACHARYYA, KULLBACK_LEIBLER, CHI_SQUARE, renyi(), HELLINGER)


def thread_count():
    """Worker threads for bulk evaluation, from ``POLKERN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("POLKERN_THREADS", "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# array-level API


@dataclass(frozen=True)
class PreparedSet:
    """Stacked covariances with their inverses and log-determinants."""

    sigma: np.ndarray
    inv: np.ndarray
    logdet: np.ndarray

    def __len__(self):
        return self.sigma.shape[0]

    def take(self, idx):
        return PreparedSet(self.sigma[idx], self.inv[idx], self.logdet[idx])


def prepare(sigmas):
    s = np.ascontiguousarray(np.asarray(sigmas, dtype=np.complex128).reshape(-1, 3, 3))
    inv = np.ascontiguousarray(hm.inv3(s))
    det = hm.det3(s)
    if np.any(det <= 0):
        raise SingularMatrix("covariance with non-positive determinant")
    return PreparedSet(s, inv, np.ascontiguousarray(np.log(det)))


def pairwise(kind, a, b, looks, threads=None):
    """Raw distance table between two prepared sets.

    Returns ``(values, status)``; see :mod:`polkern._fallback` for status codes.
    Rows are split across ``threads`` workers; results do not depend on the
    split.
    """
    if not isinstance(a, PreparedSet):
        a = prepare(a)
    if not isinstance(b, PreparedSet):
        b = prepare(b)
    beta = kind.beta if kind.beta is not None else 0.5
    threads = thread_count() if threads is None else threads

    def run(rows):
        return _backend.pairwise_distances(
            kind.code, beta, float(looks), a.sigma[rows], a.inv[rows], a.logdet[rows], b.sigma, b.inv, b.logdet
        )

    n = len(a)
    if threads <= 1 or n < 2 * threads:
        return run(slice(0, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, chunks))
    return np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])


def raise_for_status(kind, values, status, labels=None):
    """Convert the first failing entry of a distance table into an exception."""
    bad = np.argwhere((status != _backend.STATUS_OK) | ~np.isfinite(values))
    if bad.size == 0:
        return
    i, j = (int(v) for v in bad[0])
    pair = (labels[0][i], labels[1][j]) if labels is not None else (i, j)
    if status[i, j] == _backend.STATUS_SINGULAR:
        raise SingularMatrix(f"{kind}: singular inner matrix for pair {pair}")
    raise NonFiniteResult(f"{kind}: non-finite distance for pair {pair}")


# --------------------------------------------------------------------------
# model-level API


def _common_looks(models):
    looks = {float(m.looks) for m in models}
    if len(looks) > 1:
        raise LooksMismatch(f"models have different looks: {sorted(looks)}")
    return looks.pop()


def distance(kind, a, b):
    """Distance between two :class:`~polkern.wishart.WishartModel` objects."""
    looks = _common_looks((a, b))
    values, status = pairwise(kind, [a.sigma.array], [b.sigma.array], looks, threads=1)
    raise_for_status(kind, values, status)
    return float(values[0, 0])


def distance_matrix(kind, models, ids=None):
    """Symmetric matrix of pairwise distances with an exact zero diagonal.

    Only the upper triangle is taken from the kernel; the lower triangle is
    its mirror. Failing entries raise with the offending pair of ``ids``.
    """
    models = list(models)
    if not models:
        return np.zeros((0, 0))
    looks = _common_looks(models)
    prepared = prepare([m.sigma.array for m in models])
    values, status = pairwise(kind, prepared, prepared, looks)
    n = len(models)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    labels = (ids, ids) if ids is not None else None
    raise_for_status(kind, np.where(upper, values, 0.0), np.where(upper, status, 0), labels)
    out = np.where(upper, values, 0.0)
    return out + out.T


def scalar_distance(kind, sigma1, sigma2, looks):
    """Closed form for univariate (Gamma) models.

    Embeds each scalar as ``diag(s, 1, 1)``: every distance here depends on
    the covariances only through determinants and traces, which factor over
    a block-diagonal structure, so the 3x3 result equals the 1x1 one.
    """
    a = np.diag([sigma1, 1.0, 1.0]).astype(np.complex128)
    b = np.diag([sigma2, 1.0, 1.0]).astype(np.complex128)
    values, status = pairwise(kind, [a], [b], looks, threads=1)
    raise_for_status(kind, values, status)
    return float(values[0, 0])


# --------------------------------------------------------------------------
# quadrature oracle (tests only)


def _gamma_logpdf(x, looks, mean):
    return looks * math.log(looks / mean) + (looks - 1.0) * np.log(x) - looks * x / mean - gammaln(looks)


def _phi_integrand(family, beta, lf1, lf2):
    """``phi(f1/f2) * f2`` written in terms of log-densities."""
    f1, f2 = math.exp(lf1), math.exp(lf2)
    if family == "kullback_leibler":
        return f1 * (lf1 - lf2)
    if family == "bhattacharyya":
        return 0.5 * (f1 + f2) - math.exp(0.5 * (lf1 + lf2))
    if family == "hellinger":
        return 0.5 * (math.exp(0.5 * lf1) - math.exp(0.5 * lf2)) ** 2
    if family == "renyi":
        mix1 = math.exp((1.0 - beta) * lf1 + beta * lf2)
        mix2 = math.exp(beta * lf1 + (1.0 - beta) * lf2)
        return (mix1 + mix2 - beta * (f1 - f2) - 2.0 * f2) / (2.0 * (beta - 1.0))
    if family == "chi_square":
        # (r - 1)^2 (r + 1) / r * f2 with r = f1 / f2
        return math.exp(2.0 * lf1 - lf2) + math.exp(2.0 * lf2 - lf1) - f1 - f2
    raise ValueError(family)


def _h(family, beta, y):
    if family == "bhattacharyya":
        return -math.log1p(-y)
    if family == "renyi":
        return math.log1p((beta - 1.0) * y) / (beta - 1.0)
    return y


def oracle_hphi_1d(kind, sigma1, sigma2, looks, epsabs=1e-9):
    """Symmetrized h-phi divergence between two 1-D scaled Wishart (Gamma) laws
    by adaptive quadrature, ``(d(X, Y) + d(Y, X)) / 2``.

    Intended as an independent check of the closed forms.
    """
    if sigma1 <= 0 or sigma2 <= 0 or looks <= 0:
        raise ValueError("sigma1, sigma2 and looks must be positive")
    center = math.sqrt(sigma1 * sigma2)
    spread = abs(math.log(sigma1 / sigma2))
    # Gamma tails in u = log(x / center) decay like exp(N u) on the left and
    # exp(-N e^u) on the right; beyond these bounds the integrand is < 1e-40
    lo = -(100.0 / looks) - spread - 5.0
    hi = math.log(200.0 / looks + 1.0) + spread + 6.0

    def one_way(s_x, s_y):
        def integrand(u):
            x = center * math.exp(u)
            lf1 = _gamma_logpdf(x, looks, s_x) + math.log(x)
            lf2 = _gamma_logpdf(x, looks, s_y) + math.log(x)
            return _phi_integrand(kind.family, kind.beta, lf1, lf2)

        result = integrate.quad(
            integrand, lo, hi, points=[0.0], epsabs=epsabs, epsrel=1e-12, limit=1000, full_output=1
        )
        if len(result) > 3:
            raise QuadratureFailure(f"{kind}: {result[3]}")
        return _h(kind.family, kind.beta, result[0])

    return 0.5 * (one_way(sigma1, sigma2) + one_way(sigma2, sigma1))
