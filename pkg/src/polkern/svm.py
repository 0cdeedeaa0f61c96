"""Soft-margin SVM on precomputed region Gram matrices.

The binary solver is SMO with maximal-violating-pair working-set selection
(compiled in ``polkern._core`` when available). Multiclass problems are
decomposed One-Against-All (one model per class) or One-Against-One (one
model per unordered class pair, trained on that pair's examples only).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from . import distances as dist
from . import kernels
from .errors import DimensionMismatch, OneClassOnly, PolkernError
from .kernels import GramMatrix, MetricContext

log = logging.getLogger(__name__)

KKT_TOL = 1e-3
MAX_ITER = 1_000_000
OAA, OAO = "oaa", "oao"

DEFAULT_PENALTIES = (1.0, 10.0, 100.0, 1000.0, 10000.0)
DEFAULT_GAMMAS = tuple(round(0.05 * k, 2) for k in range(1, 201))


@dataclass(frozen=True)
class ParameterGrid:
    penalties: tuple = DEFAULT_PENALTIES
    gammas: tuple = DEFAULT_GAMMAS

    def __post_init__(self):
        p = tuple(sorted({float(c) for c in self.penalties}))
        g = tuple(sorted({float(v) for v in self.gammas}))
        if not p or not g:
            raise ValueError("parameter grid must be nonempty")
        if min(p) <= 0 or min(g) <= 0:
            raise ValueError("penalties and gammas must be positive")
        object.__setattr__(self, "penalties", p)
        object.__setattr__(self, "gammas", g)

    def __len__(self):
        return len(self.penalties) * len(self.gammas)


@dataclass
class BinarySvmModel:
    alpha: np.ndarray
    labels: np.ndarray
    bias: float
    penalty: float
    train_ids: tuple = ()
    converged: bool = True
    iterations: int = 0

    @property
    def support_ids(self):
        return tuple(i for i, a in zip(self.train_ids, self.alpha) if a > 0)

    @property
    def coef(self):
        return self.alpha * self.labels


def _as_values(gram):
    return gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)


def train_binary(gram, labels, penalty, tol=KKT_TOL, max_iter=MAX_ITER, train_ids=None):
    """Solve the soft-margin dual for labels in {-1, +1}.

    A model that hits ``max_iter`` is returned with ``converged=False``.
    """
    K = _as_values(gram)
    y = np.asarray(labels, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"Gram {K.shape} does not match {y.shape[0]} labels")
    if not np.all(np.abs(y) == 1):
        raise ValueError("binary labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise OneClassOnly("binary training needs examples of both signs")
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    alpha, bias, iterations, converged = _backend.smo(K, y, float(penalty), float(tol), int(max_iter))
    if train_ids is None:
        train_ids = gram.model_ids if isinstance(gram, GramMatrix) else tuple(range(len(y)))
    if not converged:
        log.warning("SMO stopped after %d iterations without meeting the KKT tolerance", iterations)
    return BinarySvmModel(np.asarray(alpha), y, float(bias), float(penalty), tuple(train_ids), bool(converged), int(iterations))


def decision(model, kernel_row):
    """``sum(alpha_i y_i K(x_i, x)) + bias``; accepts one row or a 2-D stack."""
    k = np.asarray(kernel_row, dtype=np.float64)
    if k.shape[-1] != model.alpha.shape[0]:
        raise DimensionMismatch(f"kernel row of length {k.shape[-1]} for {model.alpha.shape[0]} training examples")
    return k @ model.coef + model.bias


def dual_objective(model, gram):
    K = _as_values(gram)
    v = model.coef
    return float(model.alpha.sum() - 0.5 * v @ K @ v)


# --------------------------------------------------------------------------
# multiclass


@dataclass
class MulticlassModel:
    strategy: str
    classes: tuple
    binary_models: list
    # per binary model: (positive class index, negative class index or -1 for "rest")
    pairs: list
    # per binary model: indices into the full training order
    members: list
    penalty: float
    context: MetricContext | None = None
    train_ids: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def converged(self):
        return all(m.converged for m in self.binary_models)


def train_multiclass(gram, labels, strategy, penalty, context=None, tol=KKT_TOL, max_iter=MAX_ITER):
    """OAA or OAO decomposition over a precomputed Gram matrix.

    ``labels`` holds one class identifier per Gram row. OAO sub-problems see
    only the principal sub-matrix of their two classes.
    """
    K = _as_values(gram)
    labels = np.asarray(labels)
    if K.shape[0] != labels.shape[0]:
        raise DimensionMismatch("labels do not match the Gram matrix")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise OneClassOnly("multiclass training needs at least two classes")
    train_ids = gram.model_ids if isinstance(gram, GramMatrix) else tuple(range(len(labels)))
    if context is None and isinstance(gram, GramMatrix):
        context = gram.context
    cls_index = np.array([classes.index(c) for c in labels.tolist()])
    models, pairs, members = [], [], []
    strategy = strategy.lower()
    if strategy == OAA:
        idx = np.arange(len(labels))
        ids = tuple(train_ids)
        if len(classes) == 2:
            y = np.where(cls_index == 0, 1.0, -1.0)
            m = train_binary(K, y, penalty, tol, max_iter, ids)
            mirror = BinarySvmModel(m.alpha, -m.labels, -m.bias, m.penalty, m.train_ids, m.converged, m.iterations)
            models, pairs, members = [m, mirror], [(0, -1), (1, -1)], [idx, idx]
        else:
            for c in range(len(classes)):
                y = np.where(cls_index == c, 1.0, -1.0)
                models.append(train_binary(K, y, penalty, tol, max_iter, ids))
                pairs.append((c, -1))
                members.append(idx)
    elif strategy == OAO:
        for a in range(len(classes)):
            for b in range(a + 1, len(classes)):
                idx = np.flatnonzero((cls_index == a) | (cls_index == b))
                y = np.where(cls_index[idx] == a, 1.0, -1.0)
                sub = K[np.ix_(idx, idx)]
                ids = tuple(train_ids[i] for i in idx)
                models.append(train_binary(sub, y, penalty, tol, max_iter, ids))
                pairs.append((a, b))
                members.append(idx)
    else:
        raise ValueError(f"unknown multiclass strategy {strategy!r}")
    log.debug("trained %d binary SVM(s) (%s, C=%g)", len(models), strategy, penalty)
    return MulticlassModel(strategy, classes, models, pairs, members, float(penalty), context, tuple(train_ids))


def decision_values(model, kernel_rows):
    """Decision value of every binary model, shape (n_queries, n_models)."""
    rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
    if rows.shape[1] != len(model.train_ids):
        raise DimensionMismatch(f"kernel rows have {rows.shape[1]} columns, model has {len(model.train_ids)} examples")
    return np.stack([decision(m, rows[:, idx]) for m, idx in zip(model.binary_models, model.members)], axis=1)


def predict(model, kernel_rows):
    """Class per query row.

    OAA picks the largest decision value. OAO takes a majority vote; ties go
    to the larger summed signed decision value, then to the lowest class
    index.
    """
    single = np.ndim(kernel_rows) == 1
    dv = decision_values(model, kernel_rows)
    c = len(model.classes)
    if model.strategy == OAA:
        winner = np.argmax(dv[:, [model.pairs.index((k, -1)) for k in range(c)]], axis=1)
    else:
        votes = np.zeros((dv.shape[0], c))
        support = np.zeros((dv.shape[0], c))
        for col, (a, b) in enumerate(model.pairs):
            f = dv[:, col]
            votes[:, a] += f > 0
            votes[:, b] += f <= 0
            support[:, a] += f
            support[:, b] -= f
        top = votes == votes.max(axis=1, keepdims=True)
        winner = np.argmax(np.where(top, support, -np.inf), axis=1)
    labels = np.array(model.classes, dtype=object)[winner]
    out = np.array(labels.tolist())
    return out[0] if single else out


# --------------------------------------------------------------------------
# region-level training with distance caching


@dataclass
class RegionModels:
    """Stacked region covariance estimates with identifiers and optional labels."""

    ids: np.ndarray
    sigma: np.ndarray
    looks: float
    labels: np.ndarray | None = None

    def __len__(self):
        return len(self.ids)

    def take(self, idx):
        idx = np.asarray(idx, dtype=int)
        return RegionModels(self.ids[idx], self.sigma[idx], self.looks, None if self.labels is None else self.labels[idx])


def _sanitize(kind, dmat, cap=None):
    """Replace failed (non-finite) distances with ``cap`` or the largest finite value."""
    bad = ~np.isfinite(dmat)
    if bad.any():
        fill = cap if cap is not None else (np.max(dmat[~bad]) if (~bad).any() else 0.0)
        log.warning("%s: %d distance(s) failed, substituting %.6g", kind, int(bad.sum()), fill)
        dmat = np.where(bad, fill, dmat)
    return dmat


class DistanceCache:
    """Distances between a training set and itself and any query set.

    Distances are evaluated once; every (C, gamma) cell only exponentiates.
    """

    def __init__(self, kind, train):
        self.kind = kind
        self.train = train
        self._prep = dist.prepare(train.sigma)
        d, _ = dist.pairwise(kind, self._prep, self._prep, train.looks)
        n = len(train)
        upper = np.triu(np.ones((n, n), dtype=bool), k=1)
        d = _sanitize(kind, np.where(upper, d, 0.0))
        self.train_distances = d + d.T
        self.tau = kernels.context_from_distances(kind, self.train_distances, 1.0).tau
        self.train_metric = kernels.metric_matrix(self.tau, self.train_distances, np.equal.outer(train.ids, train.ids))

    def context(self, gamma):
        return MetricContext(self.kind, self.tau, float(gamma))

    def query_distances(self, query):
        d, _ = dist.pairwise(self.kind, dist.prepare(query.sigma), self._prep, self.train.looks)
        return _sanitize(self.kind, d, cap=self.tau)

    def query_metric(self, query, dq=None):
        if dq is None:
            dq = self.query_distances(query)
        same = np.equal.outer(query.ids, self.train.ids)
        return kernels.metric_matrix(self.tau, dq, same, clamp=True, ids=(query.ids, self.train.ids))

    def gram(self, gamma):
        return GramMatrix(kernels.kernel_from_metric(self.train_metric, gamma), self.context(gamma), tuple(self.train.ids))


def kernel_rows(context, training, query):
    """Kernel rows between query regions and training regions under a fixed context.

    Failed distances become tau and distances above tau are clamped.
    """
    d, _ = dist.pairwise(context.kind, dist.prepare(query.sigma), dist.prepare(training.sigma), training.looks)
    d = _sanitize(context.kind, d, cap=context.tau)
    same = np.equal.outer(query.ids, training.ids)
    metric = kernels.metric_matrix(context.tau, d, same, clamp=True, ids=(query.ids, training.ids))
    return kernels.kernel_from_metric(metric, context.gamma)


def training_from_dict(data):
    """Training regions stored alongside a model, or None."""
    t = data.get("training")
    if not t:
        return None
    from .hermitian import unpack

    return RegionModels(np.asarray(data["train_ids"]), unpack(np.asarray(t["packed"])), float(t["looks"]))


@dataclass
class GridResult:
    model: MulticlassModel
    penalty: float
    gamma: float
    score: float
    scores: dict
    invalid: list


def accuracy(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    return float(np.mean(pred == truth)) if truth.size else float("nan")


def grid_search(train, selection, grid, kind, strategy, cache=None):
    """Exhaustive (C, gamma) search scored by selection-set accuracy.

    Ties go to the smaller penalty, then the smaller gamma. Cells that raise
    are recorded in ``invalid`` and skipped.
    """
    if len(train) == 0 or len(selection) == 0:
        raise ValueError("training and selection sets must be nonempty")
    cache = cache or DistanceCache(kind, train)
    sel_metric = cache.query_metric(selection)
    best = None
    scores, invalid = {}, []
    for penalty in grid.penalties:
        for gamma in grid.gammas:
            try:
                with np.errstate(over="raise", invalid="raise", divide="raise", under="ignore"):
                    gram = cache.gram(gamma)
                    model = train_multiclass(gram, train.labels, strategy, penalty)
                    rows = kernels.kernel_from_metric(sel_metric, gamma)
                    score = accuracy(predict(model, rows), selection.labels)
            except (PolkernError, FloatingPointError) as exc:
                log.info("grid cell C=%g gamma=%g invalid: %s", penalty, gamma, exc)
                invalid.append((penalty, gamma))
                continue
            scores[(penalty, gamma)] = score
            if best is None or score > best[0]:
                best = (score, penalty, gamma, model)
    if best is None:
        raise PolkernError("every grid cell failed")
    score, penalty, gamma, model = best
    return GridResult(model, penalty, gamma, score, scores, invalid)


# --------------------------------------------------------------------------
# model file


def model_to_dict(model, training=None):
    ctx = model.context
    out = {
        "format": "polkern-svm",
        "version": 1,
        "strategy": model.strategy,
        "classes": [_jsonable(c) for c in model.classes],
        "penalty": model.penalty,
        "train_ids": [_jsonable(i) for i in model.train_ids],
        "context": None
        if ctx is None
        else {"kind": ctx.kind.family, "beta": ctx.kind.beta, "tau": ctx.tau, "gamma": ctx.gamma},
        "converged": model.converged,
        "binary_models": [
            {
                "pair": list(p),
                "members": [int(i) for i in idx],
                "alpha": m.alpha.tolist(),
                "labels": m.labels.tolist(),
                "bias": m.bias,
                "support_ids": [_jsonable(i) for i in m.support_ids],
                "converged": m.converged,
                "iterations": m.iterations,
            }
            for m, p, idx in zip(model.binary_models, model.pairs, model.members)
        ],
    }
    if training is not None:
        from .hermitian import pack

        out["training"] = {"looks": training.looks, "packed": pack(training.sigma).tolist()}
    out.update(model.extra)
    return out


def model_from_dict(data):
    ctx = None
    if data.get("context"):
        c = data["context"]
        ctx = MetricContext(dist.DistanceKind(c["kind"], c.get("beta")), c["tau"], c["gamma"])
    train_ids = tuple(data["train_ids"])
    models, pairs, members = [], [], []
    for b in data["binary_models"]:
        idx = np.asarray(b["members"], dtype=int)
        models.append(
            BinarySvmModel(
                np.asarray(b["alpha"], dtype=np.float64),
                np.asarray(b["labels"], dtype=np.float64),
                float(b["bias"]),
                float(data["penalty"]),
                tuple(train_ids[i] for i in idx),
                bool(b["converged"]),
                int(b["iterations"]),
            )
        )
        pairs.append(tuple(b["pair"]))
        members.append(idx)
    return MulticlassModel(data["strategy"], tuple(data["classes"]), models, pairs, members, float(data["penalty"]), ctx, train_ids)


def save_model(path, model, training=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, training), fh, indent=1)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def _jsonable(v):
    return v.item() if isinstance(v, np.generic) else v
