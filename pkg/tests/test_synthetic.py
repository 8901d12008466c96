# tests/test_synthetic.py
import numpy as np
import pytest

from src.errors import ConfigurationError
from src.ingest import sample_first_n, to_step_csv, trim_warmup
from src.synthetic import SyntheticSpec, generate_synthetic


def _body(series):
    return np.array(sample_first_n(trim_warmup(series, 2), 35).seconds)


def test_sample_cv_is_near_configured_cv():
    s = generate_synthetic(SyntheticSpec(mean=250, cv=0.10, n_steps=37, warmup_steps=2, seed=7))
    assert len(s) == 37
    body = _body(s)
    cv = body.std(ddof=1) / body.mean()
    assert 0.06 <= cv <= 0.14


def test_same_seed_is_byte_identical():
    a = generate_synthetic(SyntheticSpec(seed=12))
    b = generate_synthetic(SyntheticSpec(seed=12))
    assert to_step_csv(a) == to_step_csv(b)


def test_warmup_steps_are_inflated():
    s = generate_synthetic(SyntheticSpec(mean=100, cv=0.01, warmup_inflation=1.3, seed=0))
    assert min(s.seconds[:2]) > 1.2 * max(s.seconds[2:])


def test_vanishing_noise_returns_the_mean():
    s = generate_synthetic(SyntheticSpec(mean=250, cv=1e-9, seed=3))
    assert np.allclose(_body(s), 250.0, rtol=1e-6, atol=0)


def test_effect_scales_the_shared_stream():
    base = _body(generate_synthetic(SyntheticSpec(mean=250, cv=0.10, seed=5)))
    cand = _body(generate_synthetic(SyntheticSpec(mean=250, cv=0.10, effect_fraction=0.04, seed=5)))
    ratio = cand / base
    assert ratio.mean() == pytest.approx(0.96, abs=0.01)
    assert np.allclose(base - cand, 0.04 * 250)


def test_lognormal_shape():
    s = generate_synthetic(SyntheticSpec(mean=250, cv=0.10, n_steps=400, noise_shape="lognormal", seed=2))
    body = np.array(s.seconds[2:])
    assert (body > 0).all()
    assert body.mean() == pytest.approx(250, rel=0.03)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mean": 0},
        {"cv": 0},
        {"n_steps": 3, "warmup_steps": 2},
        {"noise_shape": "uniform"},
        {"effect_fraction": 1.0},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SyntheticSpec(**kwargs)
