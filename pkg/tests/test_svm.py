import numpy as np
import pytest

from polkern import _backend
from polkern import classify as cl
from polkern import distances as dist
from polkern import svm
from polkern.errors import DimensionMismatch, OneClassOnly
from polkern.svm import BinarySvmModel, MulticlassModel


def blobs(n_per, n_classes, rng, sep=3.0):
    x = np.concatenate([rng.normal(size=(n_per, 2)) + sep * np.array([np.cos(k), np.sin(k)]) for k in range(n_classes)])
    labels = np.repeat(np.arange(n_classes), n_per)
    return x, labels


def rbf(a, b, gamma=0.5):
    return np.exp(-gamma * np.sum((a[:, None] - b[None]) ** 2, axis=-1))


def test_two_point_analytic():
    K = np.array([[1.0, 0.1], [0.1, 1.0]])
    m = svm.train_binary(K, [1, -1], 10.0)
    # symmetric dual: maximize 2a - a^2 (1 - 0.1) -> a = 1 / 0.9
    assert np.allclose(m.alpha, [1 / 0.9, 1 / 0.9], rtol=1e-12)
    assert m.bias == pytest.approx(0.0, abs=1e-12)
    f = svm.decision(m, K)
    assert f[0] > 0 > f[1]
    assert np.allclose(np.abs(f), 1.0)


def test_constraints_and_margin():
    rng = np.random.default_rng(1)
    x, lab = blobs(30, 2, rng, sep=1.5)
    y = np.where(lab == 0, 1.0, -1.0)
    K = rbf(x, x)
    for C in (0.1, 1.0, 10.0, 1000.0):
        m = svm.train_binary(K, y, C)
        assert m.converged
        assert np.all(m.alpha >= 0) and np.all(m.alpha <= C)
        assert abs(np.sum(m.alpha * y)) <= 1e-8
        free = (m.alpha > 1e-8) & (m.alpha < C - 1e-8)
        f = svm.decision(m, K[free])
        assert np.allclose(np.abs(f), 1.0, atol=1e-3)


def test_duplicated_examples_same_decision():
    # separable data and a large C: no multiplier reaches the box, so
    # duplication only splits each alpha between the two copies
    rng = np.random.default_rng(2)
    x, lab = blobs(10, 2, rng, sep=6.0)
    y = np.where(lab == 0, 1.0, -1.0)
    probe = rng.normal(size=(15, 2)) * 2
    m1 = svm.train_binary(rbf(x, x), y, 1e4, tol=1e-9)
    assert np.all(m1.alpha < 1e4 / 2)
    xx, yy = np.concatenate([x, x]), np.concatenate([y, y])
    m2 = svm.train_binary(rbf(xx, xx), yy, 1e4, tol=1e-9)
    assert np.allclose(svm.decision(m1, rbf(probe, x)), svm.decision(m2, rbf(probe, xx)), atol=1e-6)


def test_decision_oracles():
    rng = np.random.default_rng(3)
    m = BinarySvmModel(rng.uniform(0, 1, 8), np.where(rng.random(8) > 0.5, 1.0, -1.0), 0.3, 1.0)
    rows = rng.random((5, 8))
    naive = [sum(m.alpha[i] * m.labels[i] * r[i] for i in range(8)) + m.bias for r in rows]
    assert np.allclose(svm.decision(m, rows), naive, rtol=1e-10)
    zero = BinarySvmModel(np.zeros(3), np.array([1.0, -1.0, 1.0]), -0.7, 1.0)
    assert svm.decision(zero, [0.2, 0.5, 0.9]) == -0.7
    with pytest.raises(DimensionMismatch):
        svm.decision(zero, [1.0, 2.0])


def test_binary_errors():
    with pytest.raises(OneClassOnly):
        svm.train_binary(np.eye(2), [1, 1], 1.0)
    with pytest.raises(DimensionMismatch):
        svm.train_binary(np.eye(3), [1, -1], 1.0)


def test_non_convergence_is_flagged():
    rng = np.random.default_rng(4)
    x, lab = blobs(20, 2, rng, sep=0.5)
    m = svm.train_binary(rbf(x, x), np.where(lab == 0, 1.0, -1.0), 100.0, max_iter=2)
    assert not m.converged and m.iterations == 2
    assert abs(np.sum(m.alpha * m.labels)) <= 1e-8


def test_dual_objective_nondecreasing_on_psd_gram():
    rng = np.random.default_rng(5)
    x, lab = blobs(15, 2, rng, sep=1.0)
    K = rbf(x, x)
    assert np.linalg.eigvalsh(K)[0] > -1e-12
    y = np.where(lab == 0, 1.0, -1.0)
    values = [svm.dual_objective(svm.train_binary(K, y, 5.0, max_iter=k), K) for k in range(1, 40)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_separable_training_accuracy():
    rng = np.random.default_rng(6)
    x, lab = blobs(10, 2, rng, sep=6.0)
    K = rbf(x, x, 0.2)
    model = svm.train_multiclass(K, lab, svm.OAO, 100.0)
    assert np.array_equal(svm.predict(model, K), lab)


@pytest.mark.parametrize("c, oaa, oao", [(2, 2, 1), (3, 3, 3), (6, 6, 15)])
def test_model_counts(c, oaa, oao):
    rng = np.random.default_rng(c)
    x, lab = blobs(6, c, rng)
    K = rbf(x, x)
    assert len(svm.train_multiclass(K, lab, svm.OAA, 10.0).binary_models) == oaa
    assert len(svm.train_multiclass(K, lab, svm.OAO, 10.0).binary_models) == oao


def test_two_classes_strategies_agree():
    rng = np.random.default_rng(7)
    x, lab = blobs(12, 2, rng, sep=1.5)
    probe = rng.normal(size=(30, 2)) * 2
    K, rows = rbf(x, x), rbf(probe, x)
    a = svm.predict(svm.train_multiclass(K, lab, svm.OAA, 10.0), rows)
    b = svm.predict(svm.train_multiclass(K, lab, svm.OAO, 10.0), rows)
    assert np.array_equal(a, b)


def _constant_model(strategy, pairs, biases, classes=("A", "B", "C")):
    models = [BinarySvmModel(np.zeros(1), np.ones(1), float(b), 1.0, (0,)) for b in biases]
    return MulticlassModel(strategy, classes, models, pairs, [np.array([0])] * len(pairs), 1.0, None, (0,))


def test_predict_rules():
    oaa = _constant_model(svm.OAA, [(0, -1), (1, -1), (2, -1)], [-1.0, 2.0, -1.0])
    assert svm.predict(oaa, [0.0]) == "B"
    oao = _constant_model(svm.OAO, [(0, 1), (0, 2), (1, 2)], [1.0, 1.0, 1.0])
    assert svm.predict(oao, [0.0]) == "A"
    # one vote each: the larger summed decision value wins
    tie = _constant_model(svm.OAO, [(0, 1), (0, 2), (1, 2)], [0.5, -2.0, 0.5])
    assert svm.predict(tie, [0.0]) == "C"
    # complete tie falls to the lowest class index
    flat = _constant_model(svm.OAO, [(0, 1), (0, 2), (1, 2)], [1.0, -1.0, 1.0])
    assert svm.predict(flat, [0.0]) == "A"


def test_oao_touches_only_pair_examples(monkeypatch):
    rng = np.random.default_rng(9)
    x, lab = blobs(5, 3, rng)
    K = rbf(x, x)
    seen = []
    real = _backend.smo

    def spy(Ksub, y, C, tol, max_iter):
        seen.append(np.array(Ksub))
        return real(Ksub, y, C, tol, max_iter)

    monkeypatch.setattr(svm._backend, "smo", spy)
    model = svm.train_multiclass(K, lab, svm.OAO, 10.0)
    for sub, idx in zip(seen, model.members):
        assert np.array_equal(sub, K[np.ix_(idx, idx)])
        assert set(lab[idx].tolist()) == {lab[idx][0], lab[idx][-1]} and len(set(lab[idx].tolist())) == 2


def test_predict_is_deterministic():
    rng = np.random.default_rng(10)
    x, lab = blobs(8, 4, rng, sep=1.0)
    K = rbf(x, x)
    rows = rbf(rng.normal(size=(20, 2)), x)
    a = svm.predict(svm.train_multiclass(K, lab, svm.OAO, 10.0), rows)
    b = svm.predict(svm.train_multiclass(K, lab, svm.OAO, 10.0), rows)
    assert np.array_equal(a, b)


def test_parameter_grid():
    g = svm.ParameterGrid()
    assert len(g) == 1000
    assert g.gammas[0] == 0.05 and g.gammas[-1] == 10.0 and len(g.gammas) == 200
    assert svm.ParameterGrid((10, 1, 10), (0.5,)).penalties == (1.0, 10.0)
    with pytest.raises(ValueError):
        svm.ParameterGrid((), (1.0,))


@pytest.fixture(scope="module")
def scene_sets(request):
    scene = request.getfixturevalue("small_scene")
    regions = cl.estimate_region_models(scene.raster, scene.seg)
    data = scene.labels["six_class"]
    train = cl._training_set(regions, data)
    cls = data.class_of()
    test_ids = data.ids("test")
    sel = regions.region_models(test_ids, [cls[r] for r in test_ids])
    return train, sel


def test_grid_search_contract(scene_sets):
    train, sel = scene_sets
    one = svm.grid_search(train, sel, svm.ParameterGrid((10.0,), (0.5,)), dist.HELLINGER, svm.OAO)
    assert (one.penalty, one.gamma) == (10.0, 0.5)
    grid = svm.ParameterGrid((1.0, 100.0), (0.05, 1.0, 5.0))
    res = svm.grid_search(train, sel, grid, dist.HELLINGER, svm.OAA)
    assert res.score == max(res.scores.values())
    best = [k for k, v in sorted(res.scores.items()) if v == res.score]
    assert (res.penalty, res.gamma) == best[0]


def test_grid_search_matches_manual_fit(scene_sets):
    train, sel = scene_sets
    kind = dist.renyi()
    res = svm.grid_search(train, sel, svm.ParameterGrid((10.0,), (2.0,)), kind, svm.OAO)
    cache = svm.DistanceCache(kind, train)
    manual = svm.train_multiclass(cache.gram(2.0), train.labels, svm.OAO, 10.0)
    rows = svm.kernel_rows(cache.context(2.0), train, sel)
    assert np.array_equal(svm.predict(res.model, rows), svm.predict(manual, rows))


def test_model_file_roundtrip(tmp_path, scene_sets):
    train, sel = scene_sets
    cache = svm.DistanceCache(dist.BHATTACHARYYA, train)
    model = svm.train_multiclass(cache.gram(1.0), train.labels, svm.OAA, 10.0)
    path = tmp_path / "m.json"
    svm.save_model(path, model, training=train)
    back = svm.load_model(path)
    rows = cache.gram(1.0).values
    assert np.array_equal(svm.predict(back, rows), svm.predict(model, rows))
    assert back.context == model.context
    import json

    blob = json.loads(path.read_text())
    again = svm.training_from_dict(blob)
    assert np.allclose(again.sigma, train.sigma, rtol=1e-15)
