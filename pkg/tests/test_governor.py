import numpy as np
import pytest

from epd.governor import (
    BatchDecision,
    DegenerateWindow,
    GovernorConfig,
    GovernorState,
    fit_slope,
    observe,
)


def brute_force_fit(xs, ys, rounds=10, grid=41):
    """Grid-refinement minimization of sum((y - (a*x + b))^2).

    Searches over (a, c) with the line written as a*(x - mean(x)) + c so the
    two axes decouple, then maps c back to the intercept b = c - a*mean(x).
    Never uses the closed-form estimate.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    x_mid = x.mean()
    xc = x - x_mid
    # Cauchy-Schwarz bounds the optimal slope by std(y)/std(x)
    a_span = 2.0 * (y.std() / max(xc.std(), 1e-9) + 1.0)
    c_span = 2.0 * (np.abs(y).max() + 1.0)
    a0, c0 = 0.0, y.mean()
    for _ in range(rounds):
        a_grid = np.linspace(a0 - a_span, a0 + a_span, grid)
        c_grid = np.linspace(c0 - c_span, c0 + c_span, grid)
        resid = y[None, None, :] - (
            a_grid[:, None, None] * xc[None, None, :] + c_grid[None, :, None]
        )
        sse = (resid**2).sum(axis=2)
        i, j = np.unravel_index(np.argmin(sse), sse.shape)
        a0, c0 = a_grid[i], c_grid[j]
        a_span /= grid / 4
        c_span /= grid / 4
    return a0, c0 - a0 * x_mid


# --- fit_slope -------------------------------------------------------------


def test_exact_line_recovered():
    fit = fit_slope([0, 1, 2, 3, 4], [1.0, 0.9, 0.8, 0.7, 0.6])
    assert fit.alpha == pytest.approx(-0.1, abs=1e-12)
    assert fit.beta == pytest.approx(1.0, abs=1e-12)


def test_constant_losses_fit_zero_slope():
    fit = fit_slope([5, 6, 7, 8], [0.5, 0.5, 0.5, 0.5])
    assert fit.alpha == pytest.approx(0.0, abs=1e-12)
    assert fit.beta == pytest.approx(0.5, abs=1e-12)


def test_noisy_window_matches_brute_force():
    xs = [0, 1, 2, 3]
    ys = [1.0, 0.8, 0.9, 0.7]
    fit = fit_slope(xs, ys)
    a, b = brute_force_fit(xs, ys)
    assert fit.alpha == pytest.approx(a, abs=1e-6)
    assert fit.beta == pytest.approx(b, abs=1e-6)
    # and the closed form by hand: cov/var = -0.1/1.25
    assert fit.alpha == pytest.approx(-0.08, abs=1e-12)
    assert fit.beta == pytest.approx(0.97, abs=1e-12)


def test_random_windows_match_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = rng.integers(2, 11)
        start = rng.integers(0, 50)
        xs = np.arange(start, start + n)
        ys = rng.uniform(0.0, 2.0, size=n)
        fit = fit_slope(xs, ys)
        a, b = brute_force_fit(xs, ys)
        assert fit.alpha == pytest.approx(a, abs=1e-6)
        assert fit.beta == pytest.approx(b, abs=1e-6)


def test_degenerate_windows_rejected():
    with pytest.raises(DegenerateWindow):
        fit_slope([1], [0.5])
    with pytest.raises(DegenerateWindow):
        fit_slope([2, 2, 2], [0.5, 0.6, 0.7])
    with pytest.raises(DegenerateWindow):
        fit_slope([1, 2], [0.5])


def test_config_validation():
    with pytest.raises(ValueError):
        GovernorConfig(n_max=30, m=0)
    with pytest.raises(ValueError):
        GovernorConfig(n_max=30, alpha_thld=0.1)
    with pytest.raises(ValueError):
        GovernorConfig(n_max=4, m=4)
    GovernorConfig(n_max=30, alpha_thld=float("-inf"))  # explicit off switch


# --- observe ----------------------------------------------------------------


def run_schedule(losses, config):
    """Feed a loss schedule epoch by epoch; returns decisions per epoch."""
    state = GovernorState()
    decisions = []
    for k, loss in enumerate(losses):
        state, decision = observe(state, config, k, loss)
        decisions.append(decision)
        if decision is BatchDecision.CALL_NEW_BATCH:
            break
    return decisions, state


def test_warmup_never_switches():
    config = GovernorConfig(n_max=30, m=4, alpha_thld=-0.001)
    # four observations only: window not yet filled, flat losses or not
    decisions, _ = run_schedule([0.5, 0.5, 0.5, 0.5], config)
    assert decisions == [BatchDecision.REMAIN_ON_BATCH] * 4


def test_steep_decrease_keeps_batch():
    config = GovernorConfig(n_max=30, m=4, alpha_thld=-0.001)
    decisions, _ = run_schedule([1.0, 0.9, 0.8, 0.7, 0.6], config)
    assert decisions[-1] is BatchDecision.REMAIN_ON_BATCH


def test_flat_window_switches():
    config = GovernorConfig(n_max=30, m=4, alpha_thld=-0.001)
    decisions, state = run_schedule([0.5] * 5, config)
    assert decisions[-1] is BatchDecision.CALL_NEW_BATCH
    assert state.window == ()  # reset on switch


def test_budget_forces_switch_regardless_of_trend():
    config = GovernorConfig(n_max=6, m=4, alpha_thld=-0.001)
    losses = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5]  # steep trend all the way
    decisions, _ = run_schedule(losses, config)
    assert len(decisions) == 6
    assert decisions[-1] is BatchDecision.CALL_NEW_BATCH
    assert all(d is BatchDecision.REMAIN_ON_BATCH for d in decisions[:-1])


def test_window_caps_at_m_plus_one():
    config = GovernorConfig(n_max=100, m=3, alpha_thld=float("-inf"))
    state = GovernorState()
    for k in range(20):
        state, _ = observe(state, config, k, 1.0 - 0.01 * k)
        assert len(state.window) <= config.m + 1
    epochs = [p[0] for p in state.window]
    assert epochs == sorted(epochs)
    assert epochs == list(range(16, 20))


def test_disabled_threshold_only_budget_switches():
    config = GovernorConfig(n_max=10, m=4, alpha_thld=float("-inf"))
    losses = [0.5] * 10  # flat would fire immediately at any finite threshold
    decisions, _ = run_schedule(losses, config)
    assert len(decisions) == 10
    assert decisions[-1] is BatchDecision.CALL_NEW_BATCH
    assert all(d is BatchDecision.REMAIN_ON_BATCH for d in decisions[:-1])


def test_threshold_monotonicity():
    # if a window fires at threshold t, it fires at any t' <= t
    rng = np.random.default_rng(6)
    for _ in range(100):
        losses = list(rng.uniform(0.2, 1.0, size=5))
        t = -float(rng.uniform(0.0, 0.05))
        t_lower = t - float(rng.uniform(0.0, 0.05))
        fired = {}
        for thld in (t, t_lower):
            config = GovernorConfig(n_max=30, m=4, alpha_thld=thld)
            decisions, _ = run_schedule(losses, config)
            fired[thld] = decisions[-1] is BatchDecision.CALL_NEW_BATCH
        if fired[t]:
            assert fired[t_lower]


def test_replaying_trace_reproduces_decisions():
    rng = np.random.default_rng(7)
    config = GovernorConfig(n_max=40, m=4, alpha_thld=-0.001)
    losses = list(rng.uniform(0.2, 1.0, size=30))
    first, _ = run_schedule(losses, config)
    second, _ = run_schedule(losses, config)
    assert first == second
