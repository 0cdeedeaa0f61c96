"""Region-based classification: region/class model estimation, the minimum
stochastic distance classifier (MSDC) and the SVM front-end."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import distances as dist
from . import kernels, svm
from . import hermitian as hm
from .errors import DimensionMismatch, EmptyClass, PolkernError
from .wishart import MIN_LOOKS, WishartModel

log = logging.getLogger(__name__)

MIN_REGION_PIXELS = 3
TRAIN, TEST, NONE = "train", "test", "none"
STATUS_OK, STATUS_DEGENERATE, STATUS_UNCLASSIFIABLE = "ok", "degenerate", "unclassifiable"


@dataclass
class CovarianceRaster:
    """Per-pixel covariance matrices in packed 9-float form, shape (H, W, 9)."""

    data: np.ndarray
    looks: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 9:
            raise ValueError(f"raster must have shape (H, W, 9), got {self.data.shape}")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def pixel(self, row, col):
        return hm.HermitianMatrix.from_packed(self.data[row, col])


@dataclass
class SegmentationMap:
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("segmentation must be 2-D")
        if lab.size and lab.min() < 0:
            raise ValueError("region ids must be non-negative")
        self.labels = lab.astype(np.int64)
        present = np.unique(self.labels)
        if present.size and (present[0] != 0 or present[-1] != present.size - 1):
            raise ValueError("region ids must form the contiguous range 0..r-1")

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def region_count(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def sizes(self):
        return np.bincount(self.labels.ravel(), minlength=self.region_count)


@dataclass(frozen=True)
class LabelEntry:
    region_id: int
    class_id: int
    role: str


@dataclass
class LabeledDataset:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        entries = [e if isinstance(e, LabelEntry) else LabelEntry(int(e[0]), int(e[1]), str(e[2])) for e in self.entries]
        seen = set()
        for e in entries:
            if e.role not in (TRAIN, TEST, NONE):
                raise ValueError(f"unknown role {e.role!r}")
            if e.region_id in seen:
                raise ValueError(f"region {e.region_id} labeled twice")
            seen.add(e.region_id)
        self.entries = sorted(entries, key=lambda e: e.region_id)

    def ids(self, role):
        return np.array([e.region_id for e in self.entries if e.role == role], dtype=np.int64)

    def class_of(self):
        return {e.region_id: e.class_id for e in self.entries}

    @property
    def classes(self):
        return sorted({e.class_id for e in self.entries if e.role == TRAIN})

    def training_by_class(self):
        out = {}
        for e in self.entries:
            if e.role == TRAIN:
                out.setdefault(e.class_id, []).append(e.region_id)
        return out


@dataclass
class ClassificationMap:
    """One class per region (``-1`` where none), plus a status per region."""

    classes: np.ndarray
    status: list

    def render(self, seg):
        """Per-pixel class raster derived from the segmentation."""
        return self.classes[seg.labels]

    def assigned(self, region_id):
        return int(self.classes[region_id])


# --------------------------------------------------------------------------
# estimation


@dataclass
class RegionEstimates:
    ids: np.ndarray
    sums: np.ndarray  # (r, 9) packed pixel sums
    counts: np.ndarray
    sigma: np.ndarray  # (r, 3, 3); NaN for degenerate regions
    degenerate: np.ndarray
    looks: float

    def model(self, region_id):
        if self.degenerate[region_id]:
            raise PolkernError(f"region {region_id} is degenerate")
        return WishartModel(hm.HermitianMatrix(self.sigma[region_id]), self.looks)

    def region_models(self, ids, labels=None):
        ids = np.asarray(ids, dtype=np.int64)
        return svm.RegionModels(ids, self.sigma[ids], self.looks, None if labels is None else np.asarray(labels))


def _check_dims(raster, seg):
    if (raster.height, raster.width) != (seg.height, seg.width):
        raise DimensionMismatch(f"raster {raster.height}x{raster.width} vs segmentation {seg.height}x{seg.width}")


def estimate_region_models(raster, seg):
    """Mean covariance of each region; regions under 3 pixels or with a
    non-PD mean are flagged degenerate."""
    _check_dims(raster, seg)
    r = seg.region_count
    flat = seg.labels.ravel()
    pix = raster.data.reshape(-1, 9)
    counts = np.bincount(flat, minlength=r)
    sums = np.stack([np.bincount(flat, weights=pix[:, k], minlength=r) for k in range(9)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    sigma = hm.unpack(np.where(counts[:, None] > 0, means, 0.0))
    degenerate = (counts < MIN_REGION_PIXELS) | ~hm.is_positive_definite(sigma)
    sigma[degenerate] = np.nan
    if degenerate.any():
        log.info("%d degenerate region(s) excluded", int(degenerate.sum()))
    return RegionEstimates(np.arange(r), sums, counts, sigma, degenerate, float(raster.looks))


def estimate_class_models(raster, seg, data, regions=None):
    """Class models pooling every pixel of the class's training regions."""
    regions = regions if regions is not None else estimate_region_models(raster, seg)
    out = {}
    by_class = data.training_by_class()
    for c in data.classes:
        ids = np.asarray(by_class.get(c, []), dtype=np.int64)
        n = int(regions.counts[ids].sum()) if ids.size else 0
        if n < MIN_REGION_PIXELS:
            raise EmptyClass(f"class {c} has {n} training pixels")
        mean = regions.sums[ids].sum(axis=0) / n
        out[c] = WishartModel(hm.HermitianMatrix.from_packed(mean), regions.looks)
    return out


# --------------------------------------------------------------------------
# MSDC


def msdc_classify(region_models, class_models, kind, degenerate=None):
    """Assign each region the class at minimum distance.

    ``region_models`` is a sequence of :class:`WishartModel` (or ``None`` for
    regions to skip) or a :class:`RegionEstimates`; ``class_models`` maps
    class id to model. Ties resolve to the lowest class id; a region whose
    distances all fail is marked unclassifiable.
    """
    class_ids = sorted(class_models)
    looks = {float(m.looks) for m in class_models.values()}
    if isinstance(region_models, RegionEstimates):
        sig = region_models.sigma
        skip = region_models.degenerate.copy()
        looks.add(region_models.looks)
    else:
        region_models = list(region_models)
        skip = np.array([m is None for m in region_models])
        sig = np.array([np.full((3, 3), np.nan) if m is None else m.sigma.array for m in region_models], dtype=np.complex128)
        looks |= {float(m.looks) for m in region_models if m is not None}
    if degenerate is not None:
        skip |= np.asarray(degenerate, dtype=bool)
    if len(looks) != 1:
        from .errors import LooksMismatch

        raise LooksMismatch(f"models have different looks: {sorted(looks)}")
    n = len(sig)
    classes = np.full(n, -1, dtype=np.int64)
    status = [STATUS_DEGENERATE if s else STATUS_OK for s in skip]
    keep = np.flatnonzero(~skip)
    if keep.size:
        cls_sig = np.array([class_models[c].sigma.array for c in class_ids])
        d, st = dist.pairwise(kind, dist.prepare(sig[keep]), dist.prepare(cls_sig), looks.pop())
        d = np.where((st == 0) & np.isfinite(d), d, np.inf)
        best = np.argmin(d, axis=1)
        ties = np.sum(d == d[np.arange(len(keep)), best][:, None], axis=1) > 1
        if ties.any():
            log.info("%d MSDC tie(s) resolved to the lowest class id", int(ties.sum()))
        for row, region in enumerate(keep):
            if not np.isfinite(d[row, best[row]]):
                status[region] = STATUS_UNCLASSIFIABLE
            else:
                classes[region] = class_ids[best[row]]
    return ClassificationMap(classes, status)


def msdc_pipeline(raster, seg, data, kind):
    regions = estimate_region_models(raster, seg)
    return msdc_classify(regions, estimate_class_models(raster, seg, data, regions), kind)


# --------------------------------------------------------------------------
# SVM


def selection_split(data, regions, tune_on_test=False, fraction=0.25, seed=0):
    """Pick the regions that score grid-search cells.

    With ``tune_on_test`` the test regions themselves are used. Otherwise
    a seeded per-class ``fraction`` (at least one region) of the test regions
    is held out as a validation set; those regions should then be excluded
    from accuracy figures.
    """
    cls = data.class_of()
    test = [r for r in data.ids(TEST) if not regions.degenerate[r]]
    if tune_on_test:
        return np.asarray(test, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E1]))
    chosen = []
    for c in sorted({cls[r] for r in test}):
        members = [r for r in test if cls[r] == c]
        k = max(1, int(round(fraction * len(members))))
        chosen.extend(rng.choice(members, size=min(k, len(members)), replace=False).tolist())
    return np.array(sorted(chosen), dtype=np.int64)


@dataclass
class SvmOutcome:
    map: ClassificationMap
    model: svm.MulticlassModel
    penalty: float
    gamma: float
    score: float
    selection_ids: np.ndarray
    invalid_cells: list
    training: svm.RegionModels
    min_eigenvalue: float


def _training_set(regions, data):
    cls = data.class_of()
    ids = [r for r in data.ids(TRAIN) if not regions.degenerate[r]]
    return regions.region_models(ids, [cls[r] for r in ids])


def predict_regions(model, cache, regions, query_ids):
    """Predict classes for ``query_ids`` using kernel rows against the training set."""
    n = len(regions.ids)
    classes = np.full(n, -1, dtype=np.int64)
    status = [STATUS_DEGENERATE if d else STATUS_OK for d in regions.degenerate]
    query_ids = np.asarray([q for q in query_ids if not regions.degenerate[q]], dtype=np.int64)
    if query_ids.size:
        query = regions.region_models(query_ids)
        rows = kernels.kernel_from_metric(cache.query_metric(query), model.context.gamma)
        classes[query_ids] = svm.predict(model, rows)
    return ClassificationMap(classes, status)


def svm_classify(
    raster, seg, data, kind, strategy, grid=None, tune_on_test=False, validation_fraction=0.25, seed=0, regions=None
):
    """Grid-searched SVM over region models; predicts every non-training region."""
    regions = regions if regions is not None else estimate_region_models(raster, seg)
    grid = grid or svm.ParameterGrid()
    train = _training_set(regions, data)
    cache = svm.DistanceCache(kind, train)
    cls = data.class_of()
    sel_ids = selection_split(data, regions, tune_on_test, validation_fraction, seed)
    selection = regions.region_models(sel_ids, [cls[r] for r in sel_ids])
    result = svm.grid_search(train, selection, grid, kind, strategy, cache=cache)
    queries = [r for r in range(len(regions.ids)) if r not in set(train.ids.tolist())]
    cmap = predict_regions(result.model, cache, regions, queries)
    min_ev = cache.gram(result.gamma).min_eigenvalue()
    if min_ev < 0:
        log.info("selected Gram is indefinite (min eigenvalue %.3e)", min_ev)
    return SvmOutcome(cmap, result.model, result.penalty, result.gamma, result.score, sel_ids, result.invalid, train, min_ev)


def svm_fixed(raster, seg, data, kind, strategy, penalty, gamma, regions=None):
    """Train at a fixed (C, gamma) and predict every non-training region."""
    regions = regions if regions is not None else estimate_region_models(raster, seg)
    train = _training_set(regions, data)
    cache = svm.DistanceCache(kind, train)
    model = svm.train_multiclass(cache.gram(gamma), train.labels, strategy, penalty)
    queries = [r for r in range(len(regions.ids)) if r not in set(train.ids.tolist())]
    return predict_regions(model, cache, regions, queries), model, cache


def region_accuracy(cmap, data, exclude=()):
    """Fraction of labeled test regions (minus ``exclude``) assigned their class."""
    cls = data.class_of()
    excl = set(int(e) for e in exclude)
    ids = [r for r in data.ids(TEST) if r not in excl]
    if not ids:
        return float("nan")
    return float(np.mean([cmap.classes[r] == cls[r] for r in ids]))


__all__ = [
    "CovarianceRaster",
    "SegmentationMap",
    "LabeledDataset",
    "LabelEntry",
    "ClassificationMap",
    "RegionEstimates",
    "estimate_region_models",
    "estimate_class_models",
    "msdc_classify",
    "msdc_pipeline",
    "svm_classify",
    "svm_fixed",
    "selection_split",
    "region_accuracy",
    "MIN_LOOKS",
]
