"""Synthetic PolSAR scenes: a six-block phantom, perturbed per-segment
covariances and multilook pixel synthesis."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classify as cl
from . import distances as dist
from . import hermitian as hm
from . import reference, svm
from .errors import InfeasibleSpec, PolkernError
from .wishart import sample_multilook

log = logging.getLogger(__name__)

BLOCK_ROWS, BLOCK_COLS = 2, 3
N_BLOCKS = BLOCK_ROWS * BLOCK_COLS
MIN_SEGMENT_PIXELS = 9
SPLIT_LOW, SPLIT_HIGH = 0.35, 0.65
SIX_CLASS, THREE_CLASS = "six_class", "three_class"
DEFAULT_THETA = 0.04


@dataclass(frozen=True)
class PhantomSpec:
    block_size: int = 128
    segments_per_block: int = 16
    seed: int = 0

    @classmethod
    def full_scale(cls, seed=0):
        return cls(512, 44, seed)

    @property
    def shape(self):
        return BLOCK_ROWS * self.block_size, BLOCK_COLS * self.block_size

    @property
    def region_count(self):
        return N_BLOCKS * self.segments_per_block


@dataclass(frozen=True)
class PerturbationSpec:
    theta: float = DEFAULT_THETA
    looks: int = 9
    per_block_trained_segments: int = 4

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.per_block_trained_segments < 1:
            raise ValueError("at least one trained segment per block is required")

    @classmethod
    def full_scale(cls, theta=DEFAULT_THETA, looks=9):
        return cls(theta, looks, 11)


@dataclass
class Phantom:
    seg: cl.SegmentationMap
    block_of_region: np.ndarray
    rectangles: list  # (top, left, height, width) per region id


@dataclass
class SimulatedScene:
    raster: cl.CovarianceRaster
    seg: cl.SegmentationMap
    block_of_region: np.ndarray
    sigmas: np.ndarray  # true per-segment covariance, (r, 3, 3)
    labels: dict  # scenario -> LabeledDataset
    class_names: list


# --------------------------------------------------------------------------
# phantom


def _split_block(size, count, rng):
    rects = [(0, 0, size, size)]
    while len(rects) < count:
        areas = [h * w for _, _, h, w in rects]
        k = int(np.argmax(areas))  # first largest
        top, left, h, w = rects.pop(k)
        u = rng.uniform(SPLIT_LOW, SPLIT_HIGH)
        if h >= w:
            cut = min(max(int(round(u * h)), 1), h - 1)
            rects[k:k] = [(top, left, cut, w), (top + cut, left, h - cut, w)]
        else:
            cut = min(max(int(round(u * w)), 1), w - 1)
            rects[k:k] = [(top, left, h, cut), (top, left + cut, h, w - cut)]
    return sorted(rects)


def build_phantom(spec):
    """Six identical blocks in a 2 x 3 grid, each split into rectangles.

    The split is drawn once from ``spec.seed`` and reused by every block.
    Region ids run block by block, and within a block by (top, left).
    """
    b, k = spec.block_size, spec.segments_per_block
    if b < 32:
        raise InfeasibleSpec(f"block_size must be >= 32, got {b}")
    if k < 4:
        raise InfeasibleSpec(f"segments_per_block must be >= 4, got {k}")
    if b * b < k * MIN_SEGMENT_PIXELS:
        raise InfeasibleSpec(f"{k} segments of >= {MIN_SEGMENT_PIXELS} pixels do not fit in a {b}x{b} block")
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 0xB10C]))
    local = _split_block(b, k, rng)
    labels = np.empty(spec.shape, dtype=np.int64)
    rects, blocks = [], []
    for blk in range(N_BLOCKS):
        r0, c0 = (blk // BLOCK_COLS) * b, (blk % BLOCK_COLS) * b
        for idx, (top, left, h, w) in enumerate(local):
            labels[r0 + top : r0 + top + h, c0 + left : c0 + left + w] = blk * k + idx
            rects.append((r0 + top, c0 + left, h, w))
            blocks.append(blk)
    return Phantom(cl.SegmentationMap(labels), np.array(blocks), rects)


# --------------------------------------------------------------------------
# perturbation and synthesis


def perturb_covariance(base, spec, rng):
    """``base + s s^T`` with real ``s_i`` uniform on ``(-a_i, a_i)``,
    ``a_i = sqrt(theta * base_ii * 2 sqrt(L))``."""
    m = hm.as_array(base)
    if spec.theta == 0:
        return hm.HermitianMatrix(m)
    half = np.sqrt(spec.theta * m.diagonal().real * 2.0 * np.sqrt(spec.looks))
    s = rng.uniform(-half, half)
    return hm.HermitianMatrix(m + np.outer(s, s))


def _scenario_labels(block_of_region, trained, class_of_block):
    entries = []
    for region, blk in enumerate(block_of_region):
        role = cl.TRAIN if region in trained else cl.TEST
        entries.append(cl.LabelEntry(region, int(class_of_block(blk)), role))
    return cl.LabeledDataset(entries)


def simulate_scene(phantom_spec, classes, pert, rng, phantom=None):
    """Draw one scene.

    ``classes`` holds six PD matrices assigned to blocks in order. Each
    segment gets its own perturbed covariance and is filled with independent
    ``pert.looks``-look samples from it.
    """
    classes = [hm.HermitianMatrix(c, require_pd=True) for c in (classes.values() if isinstance(classes, dict) else classes)]
    if len(classes) != N_BLOCKS:
        raise ValueError(f"need {N_BLOCKS} class matrices, got {len(classes)}")
    if pert.per_block_trained_segments > phantom_spec.segments_per_block:
        raise InfeasibleSpec("more trained segments than segments per block")
    phantom = phantom or build_phantom(phantom_spec)
    k = phantom_spec.segments_per_block
    r = phantom_spec.region_count
    seeds = rng.bit_generator.seed_seq.spawn(2) if hasattr(rng.bit_generator, "seed_seq") else None
    pert_rng = np.random.default_rng(seeds[0]) if seeds else rng
    pix_rng = np.random.default_rng(seeds[1]) if seeds else rng

    sigmas = np.empty((r, 3, 3), dtype=np.complex128)
    for region in range(r):
        sigmas[region] = perturb_covariance(classes[phantom.block_of_region[region]], pert, pert_rng).array

    data = np.empty(phantom_spec.shape + (9,))
    for region, (top, left, h, w) in enumerate(phantom.rectangles):
        draws = sample_multilook(sigmas[region], pert.looks, pix_rng, size=h * w)
        data[top : top + h, left : left + w] = hm.pack(draws).reshape(h, w, 9)

    trained = set()
    for blk in range(N_BLOCKS):
        picks = pert_rng.choice(k, size=pert.per_block_trained_segments, replace=False)
        trained.update(int(blk * k + p) for p in picks)
    labels = {
        SIX_CLASS: _scenario_labels(phantom.block_of_region, trained, lambda b: b),
        THREE_CLASS: _scenario_labels(phantom.block_of_region, trained, lambda b: b % BLOCK_COLS),
    }
    return SimulatedScene(
        cl.CovarianceRaster(data, pert.looks), phantom.seg, phantom.block_of_region, sigmas, labels, reference.class_names()
    )


def image_rng(seed, image_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(image_index)]))


def scene_manifest(phantom_spec, pert, seed, classes, image_index=0):
    names = list(classes) if isinstance(classes, dict) else [f"C{i}" for i in range(len(classes))]
    mats = list(classes.values()) if isinstance(classes, dict) else list(classes)
    return {
        "seed": int(seed),
        "image_index": int(image_index),
        "phantom": asdict(phantom_spec),
        "perturbation": asdict(pert),
        "layout": {"rows": BLOCK_ROWS, "cols": BLOCK_COLS},
        "scenarios": {SIX_CLASS: "class = block", THREE_CLASS: "class = block mod 3"},
        "classes": {n: hm.pack(hm.as_array(m)).tolist() for n, m in zip(names, mats)},
    }


# --------------------------------------------------------------------------
# experiment


@dataclass(frozen=True)
class Method:
    name: str  # "msdc" or "svm"
    strategy: str | None = None

    @property
    def label(self):
        return self.name if self.strategy is None else f"{self.name}-{self.strategy}"


DEFAULT_METHODS = (Method("msdc"), Method("svm", svm.OAA), Method("svm", svm.OAO))


@dataclass
class ExperimentConfig:
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    methods: tuple = DEFAULT_METHODS
    kinds: tuple = dist.ALL_KINDS
    scenarios: tuple = (SIX_CLASS, THREE_CLASS)
    grid: svm.ParameterGrid = field(default_factory=svm.ParameterGrid)
    tune_on_test: bool = False
    validation_fraction: float = 0.25
    seed: int = 0
    workers: int = 1


def _run_cell(scene, regions, scenario, method, kind, cfg, exclude, class_models):
    data = scene.labels[scenario]
    start = time.perf_counter()
    row = {"scenario": scenario, "method": method.label, "distance": kind.tag, "distance_name": str(kind)}
    try:
        if method.name == "msdc":
            cmap = cl.msdc_classify(regions, class_models, kind)
        else:
            out = cl.svm_classify(
                scene.raster,
                scene.seg,
                data,
                kind,
                method.strategy,
                cfg.grid,
                tune_on_test=cfg.tune_on_test,
                validation_fraction=cfg.validation_fraction,
                seed=cfg.seed,
                regions=regions,
            )
            cmap = out.map
            row.update(penalty=out.penalty, gamma=out.gamma, invalid_cells=len(out.invalid_cells))
        row["accuracy"] = cl.region_accuracy(cmap, data, exclude)
        row["error"] = ""
    except (PolkernError, FloatingPointError, ValueError) as exc:
        log.warning("%s %s %s failed: %s", scenario, method.label, kind, exc)
        row["accuracy"] = float("nan")
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["seconds"] = time.perf_counter() - start
    return row


def run_image(cfg, image_index, classes=None, phantom=None):
    """Every (scenario, method, distance) cell on one simulated image."""
    classes = classes if classes is not None else reference.class_matrices()
    rng = image_rng(cfg.seed, image_index)
    scene = simulate_scene(cfg.phantom, classes, cfg.perturbation, rng, phantom=phantom)
    regions = cl.estimate_region_models(scene.raster, scene.seg)
    rows = []
    for scenario in cfg.scenarios:
        data = scene.labels[scenario]
        exclude = () if cfg.tune_on_test else cl.selection_split(data, regions, False, cfg.validation_fraction, cfg.seed)
        class_models = cl.estimate_class_models(scene.raster, scene.seg, data, regions)
        for method in cfg.methods:
            for kind in cfg.kinds:
                row = _run_cell(scene, regions, scenario, method, kind, cfg, exclude, class_models)
                row["image"] = image_index
                rows.append(row)
    return rows


def run_experiment(n_images, cfg=None, classes=None):
    """Monte-Carlo experiment over ``n_images`` independent scenes.

    Returns one row per (image, scenario, method, distance) with accuracy and
    wall-clock seconds. Failing cells carry an ``error`` string and NaN
    accuracy; the run continues.
    """
    if n_images < 2:
        raise ValueError("n_images must be >= 2")
    cfg = cfg or ExperimentConfig()
    phantom = build_phantom(cfg.phantom)
    job = lambda i: run_image(cfg, i, classes, phantom)  # noqa: E731
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(job, range(n_images)))
    else:
        parts = [job(i) for i in range(n_images)]
    return [row for part in parts for row in part]


def summarize(rows):
    """Mean, min, max and mean seconds per (scenario, method, distance)."""
    groups = {}
    for row in rows:
        groups.setdefault((row["scenario"], row["method"], row["distance"]), []).append(row)
    out = []
    for (scenario, method, kind), items in sorted(groups.items()):
        acc = np.array([r["accuracy"] for r in items], dtype=float)
        ok = acc[np.isfinite(acc)]
        out.append(
            {
                "scenario": scenario,
                "method": method,
                "distance": kind,
                "runs": len(items),
                "failures": int(np.sum(~np.isfinite(acc))),
                "mean_accuracy": float(ok.mean()) if ok.size else float("nan"),
                "min_accuracy": float(ok.min()) if ok.size else float("nan"),
                "max_accuracy": float(ok.max()) if ok.size else float("nan"),
                "mean_seconds": float(np.mean([r["seconds"] for r in items])),
            }
        )
    return out


def accuracy_vectors(rows, scenario):
    """``{(method, distance): accuracies ordered by image}`` for one scenario."""
    out = {}
    for row in sorted(rows, key=lambda r: r["image"]):
        if row["scenario"] == scenario:
            out.setdefault((row["method"], row["distance"]), []).append(row["accuracy"])
    return {k: np.array(v) for k, v in out.items()}
