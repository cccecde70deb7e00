import numpy as np
import pytest

from protofuse.dataio import Config, SynthSpec, generate_synthetic

SHORT = {"text": (3, 6), "audio": (4, 8), "visual": (3, 7)}


def small_config(**overrides):
    base = dict(d=16, K=4, layers=2, heads=2, batch_size=16, dropout=0.0,
                total_steps=20, warmup_steps=4, lr=3e-3, eval_batch_size=64)
    base.update(overrides)
    return Config(**base)


def synth(seed=0, n_train=24, n_valid=8, n_test=8, **kw):
    kw.setdefault("lengths", SHORT)
    return generate_synthetic(SynthSpec(seed=seed, n_train=n_train, n_valid=n_valid,
                                        n_test=n_test, **kw))


@pytest.fixture(scope="session")
def tiny_data():
    return synth()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
