"""Accuracy assessment: confusion matrices, overall accuracy, kappa with its
large-sample variance, and equality tests between classifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import DegenerateMarginals, InsufficientSamples

SIGNIFICANCE = 0.05
PIXEL_STEP = 3


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = reference class and columns = predicted class."""

    counts: np.ndarray
    classes: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion matrix must be square")
        if c.shape[0] != len(self.classes):
            raise ValueError("class list does not match the matrix size")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if c.sum() <= 0:
            raise ValueError("confusion matrix is empty")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "classes", tuple(self.classes))

    @classmethod
    def from_arrays(cls, truth, predicted, classes=None):
        truth, predicted = np.asarray(truth), np.asarray(predicted)
        classes = tuple(sorted(set(truth.tolist()) | set(predicted.tolist()))) if classes is None else tuple(classes)
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        np.add.at(counts, ([index[t] for t in truth.tolist()], [index[p] for p in predicted.tolist()]), 1)
        return cls(counts, classes)

    @property
    def total(self):
        return int(self.counts.sum())


def overall_accuracy(cm):
    return float(np.trace(cm.counts)) / cm.total


def kappa(cm):
    """Kappa coefficient and its delta-method variance.

    With proportions p_ij, row sums p_i+ and column sums p_+i::

        t1 = sum p_ii                         (observed agreement)
        t2 = sum p_i+ p_+i                    (chance agreement)
        t3 = sum p_ii (p_i+ + p_+i)
        t4 = sum_ij p_ij (p_j+ + p_+i)^2
        var = [ t1(1-t1)/(1-t2)^2
              + 2(1-t1)(2 t1 t2 - t3)/(1-t2)^3
              + (1-t1)^2 (t4 - 4 t2^2)/(1-t2)^4 ] / n
    """
    n = cm.total
    p = cm.counts / n
    rows, cols = p.sum(axis=1), p.sum(axis=0)
    t1 = float(np.trace(p))
    t2 = float(rows @ cols)
    if t2 >= 1.0:
        raise DegenerateMarginals("chance agreement is 1; kappa is undefined")
    t3 = float(np.diag(p) @ (rows + cols))
    t4 = float(np.sum(p * (rows[None, :] + cols[:, None]) ** 2))
    k = (t1 - t2) / (1.0 - t2)
    q = 1.0 - t2
    var = (t1 * (1 - t1) / q**2 + 2 * (1 - t1) * (2 * t1 * t2 - t3) / q**3 + (1 - t1) ** 2 * (t4 - 4 * t2**2) / q**4) / n
    return k, var


def compare_accuracies(a, b, paired=False):
    """Two-sided t-test p-value for equal mean accuracy.

    Pooled-variance two-sample test by default; ``paired`` tests the mean of
    the per-image differences instead. Identical inputs give exactly 1.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientSamples("each accuracy vector needs at least 2 values")
    if paired:
        if a.size != b.size:
            raise InsufficientSamples("paired test needs vectors of equal length")
        d = a - b
        if np.all(d == d[0]):
            return 1.0 if d[0] == 0 else 0.0
        return float(stats.ttest_rel(a, b).pvalue)
    if np.array_equal(np.sort(a), np.sort(b)):
        return 1.0
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return 0.0  # different constants: zero pooled variance, infinite t
    return float(stats.ttest_ind(a, b, equal_var=True).pvalue)


def compare_kappas(k1, v1, k2, v2):
    """Two-sided normal test of equal kappas."""
    if not (v1 > 0 and v2 > 0):
        raise ValueError("kappa variances must be positive")
    if k1 == k2:
        return 1.0
    z = (k1 - k2) / math.sqrt(v1 + v2)
    return float(2.0 * ndtr(-abs(z)))


# --------------------------------------------------------------------------
# maps -> confusion matrices


def region_confusion(cmap, data, exclude=(), classes=None):
    """Confusion over labeled test regions; returns ``(matrix, unassigned)``.

    Training regions never enter. Regions without a class (degenerate or
    unclassifiable) are counted in ``unassigned`` rather than the matrix.
    """
    cls = data.class_of()
    excl = {int(e) for e in exclude}
    ids = [int(r) for r in data.ids("test") if int(r) not in excl]
    pred = np.array([cmap.classes[r] for r in ids], dtype=np.int64)
    truth = np.array([cls[r] for r in ids], dtype=np.int64)
    keep = pred >= 0
    classes = classes if classes is not None else sorted(set(truth.tolist()) | set(data.classes))
    return ConfusionMatrix.from_arrays(truth[keep], pred[keep], classes), int(np.sum(~keep))


def pixel_confusion(cmap, seg, data, exclude=(), step=PIXEL_STEP, classes=None):
    """Pixel-level confusion on every ``step``-th row and column of test regions."""
    cls = data.class_of()
    excl = {int(e) for e in exclude}
    test = np.zeros(seg.region_count, dtype=bool)
    truth_of = np.full(seg.region_count, -1, dtype=np.int64)
    for r in data.ids("test"):
        if int(r) not in excl:
            test[r] = True
            truth_of[r] = cls[int(r)]
    sub = seg.labels[::step, ::step].ravel()
    sub = sub[test[sub]]
    pred = cmap.classes[sub]
    keep = pred >= 0
    truth = truth_of[sub]
    classes = classes if classes is not None else sorted(set(truth.tolist()) | set(data.classes))
    return ConfusionMatrix.from_arrays(truth[keep], pred[keep], classes), int(np.sum(~keep))


# --------------------------------------------------------------------------
# reports


@dataclass
class ComparisonReport:
    labels: list
    p_values: np.ndarray
    test: str
    alpha: float = SIGNIFICANCE

    @property
    def equivalent(self):
        """True where the equality hypothesis is not rejected at level alpha."""
        return self.p_values >= self.alpha

    def to_dict(self):
        return {
            "test": self.test,
            "alpha": self.alpha,
            "labels": list(self.labels),
            "p_values": self.p_values.tolist(),
            "equivalent": self.equivalent.tolist(),
        }


def accuracy_report(vectors, paired=False):
    """All-pairs t-test matrix over ``{label: accuracy vector}``."""
    labels = list(vectors)
    n = len(labels)
    p = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            a, b = np.asarray(vectors[labels[i]], float), np.asarray(vectors[labels[j]], float)
            ok = np.isfinite(a) & np.isfinite(b) if paired else None
            if paired:
                a, b = a[ok], b[ok]
            else:
                a, b = a[np.isfinite(a)], b[np.isfinite(b)]
            try:
                p[i, j] = p[j, i] = compare_accuracies(a, b, paired=paired)
            except InsufficientSamples:
                p[i, j] = p[j, i] = np.nan
    return ComparisonReport(labels, p, "paired_t" if paired else "pooled_t")


def kappa_report(kappas):
    """All-pairs z-test matrix over ``{label: (kappa, variance)}``."""
    labels = list(kappas)
    n = len(labels)
    p = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            (k1, v1), (k2, v2) = kappas[labels[i]], kappas[labels[j]]
            p[i, j] = p[j, i] = compare_kappas(k1, v1, k2, v2)
    return ComparisonReport(labels, p, "kappa_z")
