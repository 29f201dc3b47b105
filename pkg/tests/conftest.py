import numpy as np
import pytest

from modgrok.mlp import Model, loss_and_grads


def random_model(p, n_hidden, seed=0, bias_scale=0.3):
    rng = np.random.default_rng(seed)
    return Model(
        rng.normal(size=(n_hidden, p)),
        rng.normal(size=(n_hidden, p)),
        rng.normal(scale=bias_scale, size=n_hidden),
        rng.normal(size=(n_hidden, p)),
    )


def all_pairs(p):
    a, b = np.divmod(np.arange(p * p), p)
    return np.column_stack([a, b]), (a + b) % p


def numeric_grad(model, X, y, name, h=1e-5):
    param = getattr(model, name)
    out = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        old = param[idx]
        param[idx] = old + h
        lp, _ = loss_and_grads(model, X, y)
        param[idx] = old - h
        lm, _ = loss_and_grads(model, X, y)
        param[idx] = old
        out[idx] = (lp - lm) / (2 * h)
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
