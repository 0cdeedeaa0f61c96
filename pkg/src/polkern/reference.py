"""Bundled reference class covariances and their published Hellinger table."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .hermitian import HermitianMatrix


@lru_cache(maxsize=1)
def _load():
    text = resources.files("polkern").joinpath("data/reference_classes.json").read_text()
    return json.loads(text)


def class_names():
    return list(_load()["order"])


def class_matrices():
    """Ordered mapping name -> HermitianMatrix (A1, A3, PF, PS, RG, BS)."""
    data = _load()
    out = {}
    for name in data["order"]:
        entry = data["classes"][name]
        hh, hv, vv = entry["diag"]
        up = [complex(re, im) for re, im in entry["upper"]]
        out[name] = HermitianMatrix.from_entries(hh, hv, vv, *up, require_pd=True)
    return out


def hellinger_table():
    """Published Hellinger values as a symmetric (6, 6) array with zero diagonal."""
    data = _load()
    names = data["order"]
    out = np.zeros((len(names), len(names)))
    for key, value in data["hellinger"].items():
        a, b = key.split("-")
        i, j = names.index(a), names.index(b)
        out[i, j] = out[j, i] = value
    return out


CALIBRATION_LOOKS = (3, 9, 16)


def hellinger_calibration(candidates=CALIBRATION_LOOKS):
    """Hellinger tables of the bundled classes at each candidate number of looks.

    Returns ``(best_looks, {looks: (table, max_abs_deviation)})`` where the
    deviation is taken over the 15 published off-diagonal values and
    ``best_looks`` minimizes it (first candidate on ties).
    """
    from . import distances as dist
    from .wishart import WishartModel

    mats = list(class_matrices().values())
    published = hellinger_table()
    iu = np.triu_indices(len(mats), k=1)
    results = {}
    for n in candidates:
        table = dist.distance_matrix(dist.HELLINGER, [WishartModel(m, n) for m in mats])
        results[n] = (table, float(np.max(np.abs(table[iu] - published[iu]))))
    best = min(candidates, key=lambda n: results[n][1])
    return best, results
