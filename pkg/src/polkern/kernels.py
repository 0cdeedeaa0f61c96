"""Metricized stochastic distances and the radial-basis region kernel.

A stochastic distance D is turned into a metric between *regions* by

    m(u, v) = 0            if u and v are the same region
    m(u, v) = D(u, v) + tau otherwise,

valid as long as every D in the problem is at most ``tau``. The kernel is
``exp(-gamma * m)``.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import distances as dist
from .errors import FormatError, TauViolation

log = logging.getLogger(__name__)

TAU_SAFETY = 1.05
GRAM_MAGIC = b"WGRM"
GRAM_VERSION = 1


@dataclass(frozen=True)
class MetricContext:
    kind: dist.DistanceKind
    tau: float
    gamma: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def with_gamma(self, gamma):
        return MetricContext(self.kind, self.tau, float(gamma))


def metricize(ctx, a, b, same_region):
    if same_region:
        return 0.0
    d = dist.distance(ctx.kind, a, b)
    if d > ctx.tau:
        raise TauViolation(f"distance {d:.6g} exceeds tau {ctx.tau:.6g}", value=d, tau=ctx.tau)
    return d + ctx.tau


def kernel(ctx, a, b, same_region):
    return math.exp(-ctx.gamma * metricize(ctx, a, b, same_region))


def build_context(kind, training_models, gamma, safety=TAU_SAFETY):
    """Context whose tau is ``safety`` times the largest training distance."""
    models = list(training_models)
    if len(models) < 2:
        raise ValueError("need at least two models to fix tau")
    d = dist.distance_matrix(kind, models)
    return context_from_distances(kind, d, gamma, safety)


def context_from_distances(kind, dmat, gamma, safety=TAU_SAFETY):
    dmax = float(np.max(dmat)) if np.size(dmat) else 0.0
    return MetricContext(kind, max(safety * dmax, 1e-12), float(gamma))


def metric_matrix(tau, dmat, same, clamp=False, ids=None):
    """Array form of the metric: ``dmat + tau`` off the ``same`` mask, 0 on it.

    Entries above tau raise :class:`TauViolation`, or, with ``clamp``, are
    replaced by tau and logged.
    """
    dmat = np.asarray(dmat, dtype=np.float64)
    same = np.asarray(same, dtype=bool)
    over = (dmat > tau) & ~same
    if over.any():
        i, j = (int(v) for v in np.argwhere(over)[0])
        pair = (ids[0][i], ids[1][j]) if ids is not None else (i, j)
        if not clamp:
            raise TauViolation(
                f"distance {dmat[i, j]:.6g} exceeds tau {tau:.6g} for pair {pair}", pair=pair, value=dmat[i, j], tau=tau
            )
        log.warning("clamping %d distance(s) above tau=%.6g (first pair %s)", int(over.sum()), tau, pair)
        dmat = np.minimum(dmat, tau)
    return np.where(same, 0.0, dmat + tau)


def kernel_from_metric(metric, gamma):
    return np.exp(-gamma * np.asarray(metric))


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    context: MetricContext
    model_ids: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("Gram matrix must be square")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        ids = tuple(int(i) for i in self.model_ids) if self.model_ids else tuple(range(v.shape[0]))
        if len(ids) != v.shape[0]:
            raise ValueError("model_ids length does not match the matrix")
        object.__setattr__(self, "model_ids", ids)

    def __len__(self):
        return self.values.shape[0]

    def sub(self, idx):
        """Principal sub-Gram for the example indices ``idx``."""
        idx = np.asarray(idx, dtype=int)
        return GramMatrix(self.values[np.ix_(idx, idx)], self.context, tuple(self.model_ids[i] for i in idx))

    def min_eigenvalue(self):
        """Smallest eigenvalue; negative values mean the kernel is indefinite here."""
        return float(np.linalg.eigvalsh(self.values)[0])


def build_gram(ctx, models, region_ids):
    models = list(models)
    if len(models) != len(region_ids):
        raise ValueError("models and region_ids lengths differ")
    ids = list(region_ids)
    d = dist.distance_matrix(ctx.kind, models, ids=ids)
    same = np.equal.outer(np.asarray(ids), np.asarray(ids))
    metric = metric_matrix(ctx.tau, d, same, ids=(ids, ids))
    gram = GramMatrix(kernel_from_metric(metric, ctx.gamma), ctx, tuple(ids))
    ev = gram.min_eigenvalue()
    if ev < 0:
        log.info("Gram matrix is indefinite: min eigenvalue %.3e", ev)
    return gram


# --------------------------------------------------------------------------
# cache file


def save_gram(path, gram):
    """Write the binary Gram cache (little-endian, packed upper triangle)."""
    ctx = gram.context
    n = len(gram)
    parts = [GRAM_MAGIC, struct.pack("<BB", GRAM_VERSION, ctx.kind.code)]
    if ctx.kind.family == "renyi":
        parts.append(struct.pack("<d", ctx.kind.beta))
    parts.append(struct.pack("<ddI", ctx.tau, ctx.gamma, n))
    parts.append(np.asarray(gram.model_ids, dtype="<u4").tobytes())
    iu = np.triu_indices(n)
    parts.append(np.ascontiguousarray(gram.values[iu], dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_gram(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != GRAM_MAGIC:
        raise FormatError("not a Gram cache file (bad magic)")
    version, code = struct.unpack_from("<BB", data, 4)
    if version != GRAM_VERSION:
        raise FormatError(f"unsupported Gram cache version {version}")
    pos = 6
    family = dist.FAMILIES[code]
    beta = None
    if family == "renyi":
        (beta,) = struct.unpack_from("<d", data, pos)
        pos += 8
    tau, gamma, n = struct.unpack_from("<ddI", data, pos)
    pos += 20
    ids = np.frombuffer(data, dtype="<u4", count=n, offset=pos)
    pos += 4 * n
    m = n * (n + 1) // 2
    if len(data) != pos + 8 * m:
        raise FormatError("Gram cache length does not match its header")
    tri = np.frombuffer(data, dtype="<f8", count=m, offset=pos)
    values = np.zeros((n, n))
    iu = np.triu_indices(n)
    values[iu] = tri
    values.T[iu] = tri
    ctx = MetricContext(dist.DistanceKind(family, beta), tau, gamma)
    return GramMatrix(values, ctx, tuple(int(i) for i in ids))
