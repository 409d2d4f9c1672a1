import math
import time

import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st

from ehsas.control import (
    ArxRunner,
    ControllerState,
    NpidConfig,
    auto_tune,
    find_critical_gain,
    make_runner,
    nonlinear_gain,
    npid_step,
    proportional_step_response,
    simulate_closed_loop,
    ziegler_nichols,
)
from ehsas.errors import ConfigError, InputError, TuningError
from ehsas.plant import LinearTf
from ehsas.sysid import ArxModel
from ehsas.timeseries import TimeSeries

THIRD_ORDER = LinearTf((1.0,), (1.0, 3.0, 2.0, 0.0))  # 1 / (s (s+1) (s+2))
WIDE = dict(u_min=-1e12, u_max=1e12)


def run_controller(errors, dt, config):
    state = ControllerState()
    out = []
    for e in errors:
        u, state = npid_step(state, e, dt, config)
        out.append(u)
    return np.array(out)


def reference_pid(errors, dt, Kp, Ki, Kd, tau):
    """Vectorised linear PID with the same discrete conventions."""
    e = np.asarray(errors, dtype=float)
    previous = np.concatenate([[0.0], e[:-1]])
    integral = np.cumsum(0.5 * dt * (e + previous))
    alpha = dt / (tau + dt)
    # f[0] = e[0]; f[n] = f[n-1] + alpha (e[n] - f[n-1])
    f, _ = scipy.signal.lfilter([alpha], [1.0, alpha - 1.0], e[1:], zi=[(1 - alpha) * e[0]])
    filtered = np.concatenate([[e[0]], f])
    derivative = np.concatenate([[0.0], np.diff(filtered) / dt])
    return Kp * e + Ki * integral + Kd * derivative


class TestNonlinearGain:
    def test_zero_error(self):
        assert nonlinear_gain(0.0) == 1.0

    def test_value_at_twenty(self):
        expected = 4.0 - 3.0 / math.cosh(1.0)
        assert expected == pytest.approx(2.0558371790083436, rel=1e-15)
        assert nonlinear_gain(20.0) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("e", [math.inf, -math.inf, 1e300, -1e300, 1e4])
    def test_limit(self, e):
        assert nonlinear_gain(e) == pytest.approx(4.0, abs=1e-12)

    def test_vectorised(self):
        e = np.array([-20.0, 0.0, 20.0])
        np.testing.assert_allclose(nonlinear_gain(e), [nonlinear_gain(x) for x in e])

    @given(st.floats(-1e6, 1e6), st.floats(0.1, 5), st.floats(0, 5), st.floats(0, 10))
    def test_bounds_and_symmetry(self, e, k0, k1, k2):
        k = nonlinear_gain(e, k0, k1, k2)
        assert k0 - 1e-12 <= k <= k0 + k1 + 1e-12
        assert nonlinear_gain(-e, k0, k1, k2) == k

    @given(st.floats(0, 1e3), st.floats(0, 1e3))
    def test_monotone_in_magnitude(self, a, b):
        lo, hi = sorted((a, b))
        assert nonlinear_gain(lo) <= nonlinear_gain(hi)


class TestNpidStep:
    def test_integral_only_constant_error(self):
        config = NpidConfig(Kp=0.0, Ki=2.0, k1=0.0, **WIDE)
        u = run_controller(np.ones(10), 0.1, config)
        # trapezoid with a zero error before the first sample
        assert u[-1] == pytest.approx(0.95 * 2.0, rel=1e-12)

    def test_linear_degenerate_matches_reference(self):
        rng = np.random.default_rng(7)
        e = np.cumsum(rng.standard_normal(500)) * 0.1
        dt, Kp, Ki, Kd = 0.01, 3.0, 1.5, 0.2
        config = NpidConfig(Kp, Ki, Kd, k0=1.0, k1=0.0, **WIDE)
        expected = reference_pid(e, dt, Kp, Ki, Kd, config.filter_tau(dt))
        np.testing.assert_allclose(run_controller(e, dt, config), expected, rtol=0, atol=1e-12)

    def test_gain_scales_all_terms(self):
        rng = np.random.default_rng(3)
        e = rng.uniform(-30, 30, 200)
        dt = 0.02
        config = NpidConfig(2.0, 0.5, 0.1, **WIDE)
        linear = reference_pid(e, dt, 2.0, 0.5, 0.1, config.filter_tau(dt))
        np.testing.assert_allclose(run_controller(e, dt, config), nonlinear_gain(e) * linear,
                                   rtol=1e-12, atol=1e-12)

    def test_no_derivative_kick(self):
        config = NpidConfig(0.0, 0.0, 5.0, **WIDE)
        assert run_controller([3.0], 0.01, config)[0] == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
    def test_output_within_limits(self, errors):
        config = NpidConfig(50.0, 20.0, 1.0, u_min=-2.0, u_max=3.0)
        u = run_controller(errors, 0.05, config)
        assert np.all((u >= -2.0) & (u <= 3.0))

    def test_anti_windup_recovers_faster(self):
        errors = np.concatenate([np.full(200, 5.0), np.full(1000, -2.0)])

        def recovery(anti_windup):
            config = NpidConfig(1.0, 1.0, 0.0, k1=0.0, u_min=-1.0, u_max=1.0,
                                anti_windup=anti_windup)
            u = run_controller(errors, 0.05, config)
            return int(np.flatnonzero(u[200:] < 0)[0])

        assert recovery(True) < recovery(False)

    def test_rejects_bad_input(self):
        config = NpidConfig(1.0)
        with pytest.raises(InputError):
            npid_step(ControllerState(), math.nan, 0.01, config)
        with pytest.raises(ConfigError):
            npid_step(ControllerState(), 1.0, 0.0, config)

    @pytest.mark.parametrize("kwargs", [dict(Kp=-1.0), dict(Kp=1.0, k0=0.0),
                                        dict(Kp=1.0, u_min=1.0, u_max=1.0),
                                        dict(Kp=math.nan)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigError):
            NpidConfig(**kwargs)


class TestZieglerNichols:
    def test_rule(self):
        assert ziegler_nichols(10.0, 2.0) == pytest.approx((6.0, 6.0, 1.5))

    @given(st.floats(1e-3, 1e6), st.floats(1e-3, 1e3))
    def test_time_constants(self, kcr, tcr):
        kp, ki, kd = ziegler_nichols(kcr, tcr)
        ti, td = kp / ki, kd / kp
        assert ti * td == pytest.approx(tcr**2 / 16, rel=1e-12)

    def test_third_order_oracle(self):
        start = time.perf_counter()
        kcr, tcr = find_critical_gain(THIRD_ORDER, 0.005, 0.1, 100.0)
        assert time.perf_counter() - start < 10.0
        assert kcr == pytest.approx(6.0, rel=0.05)
        assert tcr == pytest.approx(2 * math.pi / math.sqrt(2), rel=0.05)

    def test_gain_scaling(self):
        k1, t1 = find_critical_gain(THIRD_ORDER, 0.01, 0.1, 100.0)
        k2, t2 = find_critical_gain(THIRD_ORDER.scaled(2.0), 0.01, 0.1, 100.0)
        assert k2 == pytest.approx(k1 / 2, rel=0.01)
        assert t2 == pytest.approx(t1, rel=0.01)

    def test_first_order_never_oscillates(self):
        with pytest.raises(TuningError):
            find_critical_gain(LinearTf((1.0,), (1.0, 1.0)), 0.01, 0.1, 1.5)

    def test_unstable_at_lower_bound(self):
        with pytest.raises(TuningError):
            find_critical_gain(THIRD_ORDER, 0.01, 50.0, 100.0)

    def test_auto_tune(self):
        r = auto_tune(THIRD_ORDER, 0.005, 0.1, 100.0)
        assert (r.Kp, r.Ki, r.Kd) == pytest.approx(ziegler_nichols(r.Kcr, r.Tcr))

    @pytest.mark.parametrize("lo, hi", [(0.0, 1.0), (2.0, 1.0), (1.0, math.inf)])
    def test_bad_bounds(self, lo, hi):
        with pytest.raises(ConfigError):
            find_critical_gain(THIRD_ORDER, 0.01, lo, hi)


class TestClosedLoop:
    model = ArxModel(2, 2, 1, (-1.6, 0.64), (0.02, 0.01), 0.05)

    def test_lfilter_matches_runner(self):
        gain, n = 3.0, 400
        runner = ArxRunner(self.model, 0.05)
        y = np.empty(n)
        for i in range(n):
            y[i] = runner.y
            if i + 1 < n:
                runner.advance(gain * (1.0 - y[i]))
        np.testing.assert_allclose(proportional_step_response(self.model, gain, 0.05, n),
                                   y, rtol=0, atol=1e-12)

    def test_linear_tf_runner_matches_lsim(self):
        dt = 0.01
        t = dt * np.arange(300)
        u = np.sin(t)
        _, expected, _ = scipy.signal.lsim((THIRD_ORDER.num, THIRD_ORDER.den), u, t,
                                           interp=False)
        runner = make_runner(THIRD_ORDER, dt)
        y = np.empty(t.size)
        for i in range(t.size):
            y[i] = runner.y
            runner.advance(u[i])
        np.testing.assert_allclose(y, expected, rtol=0, atol=1e-10)

    def test_zero_reference_stays_at_rest(self, params):
        r = TimeSeries(0.0, 0.05, np.zeros(100))
        result = simulate_closed_loop(params, NpidConfig(2e4, 4e4, 200.0), r)
        assert np.all(result.position.samples == 0.0)
        assert np.all(result.command.samples == 0.0)

    def test_deterministic(self, chirp_model):
        r = TimeSeries(0.0, 0.05, np.full(100, 1e-3))
        config = NpidConfig(2e4, 4e4, 200.0)
        a = simulate_closed_loop(chirp_model, config, r)
        b = simulate_closed_loop(chirp_model, config, r)
        np.testing.assert_array_equal(a.position.samples, b.position.samples)
        np.testing.assert_array_equal(a.command.samples, b.command.samples)

    def test_gain_settles_to_base(self):
        r = TimeSeries(0.0, 0.01, np.full(6000, 20.0))
        config = NpidConfig(0.5, 0.05, 0.2, **WIDE)
        result = simulate_closed_loop(LinearTf((1.0,), (1.0, 1.0, 0.0)), config, r)
        assert result.gain.samples[0] == pytest.approx(nonlinear_gain(20.0))
        assert result.gain.samples[-1] == pytest.approx(config.k0, abs=1e-6)
        assert result.position.samples[-1] == pytest.approx(20.0, rel=1e-3)

    def test_model_needs_delay(self):
        with pytest.raises(ConfigError):
            ArxRunner(ArxModel(1, 1, 0, (-0.5,), (1.0,), 0.05), 0.05)

    def test_period_mismatch(self):
        with pytest.raises(ConfigError):
            ArxRunner(self.model, 0.01)

    def test_improper_tf_rejected(self):
        with pytest.raises(ConfigError):
            make_runner(LinearTf((1.0, 1.0), (1.0, 2.0)), 0.01)
