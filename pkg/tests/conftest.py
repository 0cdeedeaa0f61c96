import numpy as np
import pytest

from polkern import reference, simulate


def random_hpd(rng, eps=0.1, scale=1.0):
    v = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return scale * (v @ v.conj().T + eps * np.eye(3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def classes():
    return reference.class_matrices()


@pytest.fixture(scope="session")
def small_scene():
    """A small seeded scene: 32-pixel blocks, 4 segments each, 2 trained."""
    phantom = simulate.PhantomSpec(32, 4, seed=1)
    pert = simulate.PerturbationSpec(theta=0.02, looks=9, per_block_trained_segments=2)
    return simulate.simulate_scene(phantom, reference.class_matrices(), pert, simulate.image_rng(7, 0))


@pytest.fixture(scope="session")
def desk_scene():
    """Default desk-scale scene (128-pixel blocks, 16 segments, 4 trained)."""
    return simulate.simulate_scene(
        simulate.PhantomSpec(), reference.class_matrices(), simulate.PerturbationSpec(), simulate.image_rng(0, 0)
    )
