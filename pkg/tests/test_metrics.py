import math

import numpy as np
import pytest
import scipy.optimize
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st

from ehsas.errors import ConfigError, MetricUndefinedError
from ehsas.metrics import best_fit, fit_report, fpe, mse, rmse, transient_metrics
from ehsas.timeseries import TimeSeries

finite = st.floats(-1e3, 1e3, allow_nan=False)
pairs = st.integers(2, 60).flatmap(
    lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                        st.lists(finite, min_size=n, max_size=n)))

ZETA = 0.5
OMEGA = 1.0


def second_order_step(t):
    """Closed-form unit step of w^2 / (s^2 + 2 z w s + w^2), z < 1."""
    wd = OMEGA * math.sqrt(1 - ZETA**2)
    phi = math.acos(ZETA)
    return 1 - np.exp(-ZETA * OMEGA * t) / math.sqrt(1 - ZETA**2) * np.sin(wd * t + phi)


def second_order_response(dt=1e-3, t_end=40.0, gain=1.0, t0=0.0):
    sys = scipy.signal.lti([OMEGA**2], [1, 2 * ZETA * OMEGA, OMEGA**2])
    t = np.arange(0.0, t_end + dt / 2, dt)
    _, y = scipy.signal.step(sys, T=t)
    return TimeSeries(t0, dt, gain * y)


class TestFitMetrics:
    def test_fpe_value(self):
        assert fpe(1.0, 100, 6) == pytest.approx(1.1276595744680853, rel=1e-15)

    def test_fpe_zero_params(self):
        assert fpe(0.37, 50, 0) == 0.37

    @given(st.floats(1e-6, 1e6), st.integers(10, 10_000))
    def test_fpe_increasing_in_params(self, m, n):
        values = [fpe(m, n, d) for d in range(0, min(n, 20))]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("n, d", [(5, 5), (5, 6), (5, -1)])
    def test_fpe_undefined(self, n, d):
        with pytest.raises(MetricUndefinedError):
            fpe(1.0, n, d)

    @settings(max_examples=200)
    @given(pairs)
    def test_rmse_squared_is_mse(self, pair):
        y, yhat = map(np.array, pair)
        assert rmse(y, yhat) ** 2 == pytest.approx(mse(y, yhat), rel=1e-12, abs=1e-300)

    @given(pairs)
    def test_perfect_fit(self, pair):
        y = np.array(pair[0])
        if np.ptp(y) == 0:
            return
        assert best_fit(y, y) == 100.0

    def test_mean_predictor_scores_zero(self):
        y = np.array([1.0, 4.0, -2.0, 3.0])
        assert best_fit(y, np.full_like(y, y.mean())) == pytest.approx(0.0, abs=1e-12)

    def test_constant_measurement_undefined(self):
        with pytest.raises(MetricUndefinedError):
            best_fit(np.ones(5), np.zeros(5))

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            mse(np.ones(4), np.ones(5))

    def test_period_mismatch(self):
        with pytest.raises(ConfigError):
            mse(TimeSeries(0, 1, np.ones(4)), TimeSeries(0, 2, np.ones(4)))

    def test_report_consistent(self):
        y = np.sin(np.arange(100.0))
        yhat = y + 0.01 * np.cos(np.arange(100.0))
        r = fit_report(y, yhat, 6)
        assert r.rmse**2 == pytest.approx(r.mse, rel=1e-12)
        assert r.fpe == pytest.approx(fpe(r.mse, 100, 6), rel=1e-15)
        assert r.best_fit_percent == pytest.approx(best_fit(y, yhat), rel=1e-15)
        assert (r.n_samples, r.n_params) == (100, 6)


class TestTransient:
    def test_second_order_overshoot(self):
        expected = 100 * math.exp(-math.pi * ZETA / math.sqrt(1 - ZETA**2))
        assert expected == pytest.approx(16.303353482158048, rel=1e-12)
        m = transient_metrics(second_order_response(), 1.0)
        assert m.overshoot_percent == pytest.approx(expected, abs=1e-3)

    def test_second_order_rise_time(self):
        t10 = scipy.optimize.brentq(lambda t: second_order_step(t) - 0.1, 1e-6, 2.0)
        t90 = scipy.optimize.brentq(lambda t: second_order_step(t) - 0.9, t10, 3.0)
        m = transient_metrics(second_order_response(), 1.0)
        assert m.rise_time == pytest.approx(t90 - t10, abs=1e-5)

    def test_second_order_settling_time(self):
        t = np.arange(0.0, 40.0, 1e-5)
        outside = np.flatnonzero(np.abs(second_order_step(t) - 1.0) > 0.02)
        expected = t[outside[-1]]
        m = transient_metrics(second_order_response(), 1.0)
        # final value is the tail mean, so the band differs from the ideal by < 1e-6
        assert m.settling_time == pytest.approx(expected, abs=2e-3)
        assert m.steady_state_error == pytest.approx(0.0, abs=1e-6)

    def test_monotone_response(self):
        t = np.arange(0.0, 20.0, 0.01)
        m = transient_metrics(TimeSeries(0.0, 0.01, 1 - np.exp(-t)), 1.0)
        # the tail-mean final value sits a hair below the last samples
        assert m.overshoot_percent == pytest.approx(0.0, abs=1e-6)
        assert m.rise_time == pytest.approx(math.log(9), abs=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-100.0, 100.0), st.floats(1e-3, 1e3))
    def test_shift_and_scale_invariance(self, t0, c):
        base = transient_metrics(second_order_response(dt=0.01), 1.0)
        moved = transient_metrics(second_order_response(dt=0.01, gain=c, t0=t0), c)
        assert moved.rise_time == pytest.approx(base.rise_time, rel=1e-9)
        assert moved.settling_time == pytest.approx(base.settling_time, rel=1e-9)
        assert moved.overshoot_percent == pytest.approx(base.overshoot_percent, rel=1e-9)

    def test_negative_step(self):
        pos = transient_metrics(second_order_response(dt=0.01), 1.0)
        neg = transient_metrics(second_order_response(dt=0.01, gain=-1.0), -1.0)
        assert neg.overshoot_percent == pytest.approx(pos.overshoot_percent, rel=1e-12)
        assert neg.rise_time == pytest.approx(pos.rise_time, rel=1e-12)

    def test_not_settled(self):
        t = np.arange(0.0, 10.0, 0.01)
        with pytest.raises(MetricUndefinedError) as info:
            transient_metrics(TimeSeries(0.0, 0.01, 1 + np.sin(t)), 1.0)
        assert info.value.metric == "settling_time"

    def test_zero_final_value(self):
        with pytest.raises(MetricUndefinedError):
            transient_metrics(TimeSeries(0.0, 0.1, np.zeros(50)), 1.0)
