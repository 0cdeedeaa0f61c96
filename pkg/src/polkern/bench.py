"""Timing of the compiled core against the numpy fallback."""

from __future__ import annotations

import time

import numpy as np

from . import _fallback
from . import distances as dist
from .wishart import sample_multilook

try:
    from . import _core
except ImportError:  # pragma: no cover - extension not built
    _core = None


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def random_covariances(n, rng, looks=9):
    base = np.diag([50.0, 5.0, 30.0]).astype(np.complex128)
    base[0, 2] = base[2, 0] = 10.0
    return sample_multilook(base, looks, rng, size=n)


def toy_gram(n, rng):
    x = rng.normal(size=(n, 4))
    x[: n // 2] += 1.0
    sq = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    y = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    return np.exp(-0.5 * sq), y


def run(n_regions=300, n_svm=200, repeat=3, seed=0):
    """Best-of-``repeat`` seconds per backend for a distance table and an SMO solve."""
    rng = np.random.default_rng(seed)
    prep = dist.prepare(random_covariances(n_regions, rng))
    K, y = toy_gram(n_svm, rng)
    backends = {"python": _fallback}
    if _core is not None:
        backends["cython"] = _core
    rows = []
    for kind in dist.ALL_KINDS:
        beta = kind.beta if kind.beta is not None else 0.5
        args = (kind.code, beta, 9.0, prep.sigma, prep.inv, prep.logdet, prep.sigma, prep.inv, prep.logdet)
        for name, mod in backends.items():
            secs = _best_of(lambda: mod.pairwise_distances(*args), repeat)
            rows.append({"task": f"distances-{kind.tag}", "size": n_regions, "backend": name, "seconds": secs})
    for name, mod in backends.items():
        secs = _best_of(lambda: mod.smo(K, y, 10.0, 1e-3, 1_000_000), repeat)
        rows.append({"task": "smo", "size": n_svm, "backend": name, "seconds": secs})
    return rows


def speedups(rows):
    by = {}
    for r in rows:
        by.setdefault(r["task"], {})[r["backend"]] = r["seconds"]
    return {t: v["python"] / v["cython"] for t, v in by.items() if "cython" in v and v["cython"] > 0}
