import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from nodemoe.csbm import CsbmParams, generate, regime1
from nodemoe.theory import (
    REPORT_COLUMNS,
    bce,
    filtered_mean_check,
    fit_bounded_logistic,
    loss_bound,
    predict,
    regime_flags,
    reports_to_csv,
    validate_part1,
    validate_part2,
    validate_theorem,
)


def test_separable_line():
    x = np.array([[-1.0], [-1.2], [1.0], [1.3]])
    y = np.array([0, 0, 1, 1])
    w, b = fit_bounded_logistic(x, y, 1.0)
    assert w[0] > 0 and np.linalg.norm(w) <= 1 + 1e-9
    assert np.all(predict(x, w, b) == y)


def test_zero_radius_base_rate():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((200, 3))
    y = (rng.random(200) < 0.3).astype(int)
    w, b = fit_bounded_logistic(x, y, 0.0, steps=3000, lr=0.5)
    assert np.all(w == 0)
    assert 1 / (1 + np.exp(-b)) == pytest.approx(y.mean(), abs=1e-6)


def test_matches_unconstrained_oracle():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((300, 2))
    y = (x @ np.array([0.5, -0.3]) + 0.1 + rng.standard_normal(300) > 0).astype(int)

    def obj(v):
        return bce(x, y, v[:2], v[2])

    ref = minimize(obj, np.zeros(3), method="BFGS", options={"gtol": 1e-10}).x
    assert np.linalg.norm(ref[:2]) < 5.0
    w, b = fit_bounded_logistic(x, y, 5.0, steps=20000, lr=1.0)
    assert np.allclose(w, ref[:2], atol=1e-4) and b == pytest.approx(ref[2], abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_norm_bound_never_exceeded(seed, R):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((40, 4)) * 3
    y = rng.integers(0, 2, 40)
    w, _ = fit_bounded_logistic(x, y, R, steps=100, lr=0.5)
    assert np.linalg.norm(w) <= R + 1e-9


def test_non_binary_rejected():
    with pytest.raises(ValueError):
        fit_bounded_logistic(np.ones((3, 1)), np.array([0, 1, 2]), 1.0)


def test_bce_matches_naive():
    rng = np.random.default_rng(2)
    x, w = rng.standard_normal((10, 3)), rng.standard_normal(3)
    y = rng.integers(0, 2, 10)
    p = 1 / (1 + np.exp(-(x @ w + 0.2)))
    assert bce(x, y, w, 0.2) == pytest.approx(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)), abs=1e-12)


def test_bound_formula_example():
    p = CsbmParams.with_distance(100, 4, 0.15, 0.05, 0.05, 0.15, 0.5, dist=1.0)
    assert loss_bound(p, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert loss_bound(regime1(), 1.0) == pytest.approx(1 / 3, abs=1e-15)


def test_part1_p_one_flags_empty_h1():
    rep = validate_part1(regime1(0).replace(n=300, P=1.0), 1.0)
    assert "empty_H1" in rep.flags and np.isnan(rep.h1_acc)


def test_part1_no_h0_errors():
    with pytest.raises(ValueError):
        validate_part1(regime1(0).replace(n=300, P=0.0), 1.0)


def test_report_bound_exact():
    params = regime1(0).replace(n=400)
    rep = validate_part1(params, 2.0)
    assert rep.bound == 2.0 * (params.q1 - params.p1) / (2 * (params.q1 + params.p1)) * params.mean_distance


def test_part2_equal_means_chance():
    mu = np.full(100, 0.05)
    p = regime1(0).replace(mu=mu, nu=mu.copy())
    acc = validate_part2(p, 1.0).part2_acc
    assert 0.44 <= acc <= 0.56


def test_single_seed_regime():
    rep = validate_theorem(regime1(0), 1.0)
    assert rep.h0_acc >= 0.99 and rep.h1_acc <= 0.05 and rep.part2_acc >= 0.99
    assert rep.h1_bce >= 0.9 * rep.bound
    assert rep.part2_acc >= rep.full_acc
    assert np.linalg.norm(rep.w) <= 1 + 1e-9
    assert "seed=0" in rep.text()


@pytest.mark.parametrize("signed", [False, True])
def test_filtered_means(signed):
    rows = filtered_mean_check(generate(regime1(1)), signed=signed)
    assert len(rows) == 4 and all(r["ok"] for r in rows)


def test_regime_flags():
    flags = regime_flags(regime1())
    assert any(f.startswith("sparse:p1") for f in flags)
    assert not any(f.startswith("close_means") for f in flags)


def test_reports_csv():
    rep = validate_theorem(regime1(0).replace(n=300), 1.0)
    lines = reports_to_csv([rep]).splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert lines[1].startswith("0,")
