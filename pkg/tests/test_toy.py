import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mem3d.errors import DataError
from mem3d.toy import toy_experiment


def test_memorize_construction():
    r = toy_experiment(200, "memorize", seed=0)
    pts = r["points"]
    # every generated point sits within a few noise scales of a training point
    d = np.sqrt(((pts["gen"][:, None] - pts["train"][None]) ** 2).sum(-1)).min(1)
    assert d.max() < 0.05 * 6
    assert r["z_u"] < -3


def test_modes_share_random_draws():
    a = toy_experiment(100, "memorize", seed=3)["points"]
    b = toy_experiment(100, "generalize", seed=3)["points"]
    assert np.array_equal(a["train"], b["train"]) and np.array_equal(a["test"], b["test"])


def test_reproducible():
    a, b = toy_experiment(50, "generalize", 9), toy_experiment(50, "generalize", 9)
    assert a["z_u"] == b["z_u"] and a["fd_train"] == b["fd_train"]


def test_bad_arguments():
    with pytest.raises(DataError):
        toy_experiment(19, "memorize")
    with pytest.raises(ValueError):
        toy_experiment(50, "copy")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(100, 250), st.floats(0.0, 0.1))
def test_memorize_scores_below_generalize(seed, n, noise):
    mem = toy_experiment(n, "memorize", seed, noise)["z_u"]
    gen = toy_experiment(n, "generalize", seed, noise)["z_u"]
    assert mem < gen
