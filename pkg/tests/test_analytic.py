"""Closed-form trajectories, visibility patterns, thermal law, entropy."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import optograv as og
from optograv import oracle
from optograv.errors import DegenerateFrequencyError, ParameterError, QuadratureError

from test_params import VISIBILITY_MINIMUM


def period_of(dc):
    return 2.0 * math.pi / dc.omega_a


class TestCoherentTrajectories:
    def test_initial_condition(self, ref_params, ref_couplings):
        traj = og.coherent_trajectories(ref_couplings, ref_params, "m", 0.0)
        assert traj.phi0 == ref_params.beta_m
        assert traj.phi1 == ref_params.beta_m
        assert traj.phase == 0.0

    def test_full_revival(self, ref_params, ref_couplings):
        t = period_of(ref_couplings)
        traj = og.coherent_trajectories(ref_couplings, ref_params, "m", t)
        assert traj.phi0 == pytest.approx(ref_params.beta_m, abs=1e-12)
        assert traj.phi1 == pytest.approx(ref_params.beta_m, abs=1e-12)
        kerr_phase = 2.0 * math.pi * ref_couplings.lambda_m**2
        assert traj.phase == pytest.approx(kerr_phase, rel=1e-9)

    def test_half_period_displacement(self, ref_params, ref_couplings):
        t = 0.5 * period_of(ref_couplings)
        traj = og.coherent_trajectories(ref_couplings, ref_params, "m", t)
        assert abs(traj.phi1 - traj.phi0) == pytest.approx(
            2.0 * ref_couplings.lambda_m, rel=1e-12
        )

    def test_conditional_oracle_amplitudes_match(self):
        """<a> conditioned on the cavity path reproduces phi0/phi1."""
        p = og.dimensionless_params(gamma=0.0, lambda_m=0.35, lambda_M=0.2,
                                    beta_m=0.8 + 0.3j)
        dc = og.derive_couplings(p)
        spec = og.HilbertSpec(24, 24)
        prop = og.Propagator(oracle.hamiltonian_blocks(dc, p, spec))
        t = 0.37 * period_of(dc)
        psi = prop.evolve(og.initial_state(p, spec), t)
        tensor = psi.as_tensor()
        lower = oracle.destroy_op(spec.dim_a)
        traj = og.coherent_trajectories(dc, p, "m", t)
        for p_bit, expected in ((0, traj.phi0), (1, traj.phi1)):
            branch = tensor[p_bit]
            norm = np.sum(np.abs(branch) ** 2)
            mean_a = np.einsum("qab,ac,qcb->", branch.conj(), lower, branch) / norm
            assert mean_a == pytest.approx(expected, abs=1e-8)

    def test_rejects_negative_time(self, ref_params, ref_couplings):
        with pytest.raises(ParameterError):
            og.coherent_trajectories(ref_couplings, ref_params, "m", -1.0)
        with pytest.raises(ParameterError):
            og.coherent_trajectories(ref_couplings, ref_params, "x", 1.0)


class TestVisibilityUncoupled:
    def test_endpoints_and_minimum(self, ref_params, ref_couplings):
        T = period_of(ref_couplings)
        trace = og.visibility_uncoupled(ref_couplings, ref_params, "m", [0.0, T / 2, T])
        assert trace.values[0] == 1.0
        assert trace.values[1] == pytest.approx(VISIBILITY_MINIMUM, rel=1e-12)
        assert trace.values[2] == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(t=st.floats(0.0, 5.0))
    def test_periodicity(self, boosted_params, boosted_couplings, t):
        T = period_of(boosted_couplings)
        a = og.visibility_uncoupled(boosted_couplings, boosted_params, "m", [t]).values[0]
        b = og.visibility_uncoupled(boosted_couplings, boosted_params, "m", [t + T]).values[0]
        assert a == pytest.approx(b, abs=1e-12)

    def test_bounds(self, ref_params, ref_couplings):
        times = np.linspace(0.0, 3 * period_of(ref_couplings), 1001)
        values = og.visibility_uncoupled(ref_couplings, ref_params, "m", times).values
        floor = math.exp(-2.0 * ref_couplings.lambda_m**2)
        assert np.all(values <= 1.0 + 1e-15)
        assert np.all(values >= floor - 1e-15)

    def test_rod_M_uses_its_own_constants(self, ref_params, ref_couplings):
        t = 0.5 * 2 * math.pi / ref_couplings.omega_b
        value = og.visibility_uncoupled(ref_couplings, ref_params, "M", [t]).values[0]
        assert value == pytest.approx(math.exp(-2 * ref_couplings.lambda_M**2), rel=1e-12)


class TestVisibilityFirstOrder:
    def test_gamma_zero_identical_to_uncoupled(self, ref_params):
        p0 = og.without_gravity(ref_params)
        dc0 = og.derive_couplings(p0)
        times = np.linspace(0.0, 2 * period_of(dc0), 257)
        first = og.visibility_first_order(dc0, p0, times).values
        plain = og.visibility_uncoupled(dc0, p0, "m", times).values
        assert np.array_equal(first, plain)

    def test_closed_and_integral_forms_agree(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            p = og.dimensionless_params(
                gamma=rng.uniform(-0.05, 0.05),
                omega_a=rng.uniform(0.5, 2.0),
                omega_b=rng.uniform(0.5, 2.0) * rng.uniform(0.3, 0.9),
                lambda_m=rng.uniform(0.0, 1.0),
                lambda_M=rng.uniform(0.0, 1.0),
                beta_m=complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                beta_M=complex(rng.uniform(-2, 2)),
            )
            dc = og.derive_couplings(p)
            if abs(dc.omega_a - dc.omega_b) < 0.05 * dc.omega_a:
                continue
            t = rng.uniform(0.1, 15.0)
            closed = og.visibility_first_order(dc, p, [t], form="closed").values[0]
            integral = og.visibility_first_order(dc, p, [t], form="integral").values[0]
            worst = max(worst, abs(closed - integral) / abs(integral))
        assert worst < 1e-10

    def test_closed_form_refuses_degenerate_frequencies(self):
        p = og.dimensionless_params(gamma=1e-3, omega_a=1.0, omega_b=1.0)
        dc = og.derive_couplings(p)
        with pytest.raises(DegenerateFrequencyError, match="integral"):
            og.visibility_first_order(dc, p, [1.0], form="closed")

    def test_integral_form_brackets_degenerate_limit(self):
        values = {}
        for eps in (-1e-6, 0.0, 1e-6):
            p = og.dimensionless_params(gamma=5e-3, omega_a=1.0, omega_b=1.0 + eps)
            dc = og.derive_couplings(p)
            values[eps] = og.visibility_first_order(dc, p, [7.3], form="integral").values[0]
        assert all(math.isfinite(v) for v in values.values())
        lo, hi = sorted((values[-1e-6], values[1e-6]))
        assert lo - 1e-12 <= values[0.0] <= hi + 1e-12

    def test_closed_form_refuses_complex_beta(self):
        p = og.dimensionless_params(gamma=1e-3, beta_M=1.0 + 0.5j)
        dc = og.derive_couplings(p)
        with pytest.raises(ParameterError, match="integral"):
            og.visibility_first_order(dc, p, [1.0], form="closed")
        value = og.visibility_first_order(dc, p, [1.0], form="integral").values[0]
        assert math.isfinite(value)

    def test_magnitude_shift_scales_as_gamma_squared(self):
        t = 9.1
        gammas = np.geomspace(1e-4, 1e-2, 7)
        shifts = []
        for g in gammas:
            p = og.dimensionless_params(gamma=float(g), lambda_m=0.445, lambda_M=0.521)
            dc = og.derive_couplings(p)
            v1 = og.visibility_first_order(dc, p, [t]).values[0]
            v0 = og.visibility_uncoupled(dc, p, "m", [t]).values[0]
            shifts.append(abs(v1 - v0))
        slope = np.polyfit(np.log(gammas), np.log(shifts), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)


class TestVisibilityShift:
    def test_zero_without_gravity(self, ref_params):
        p0 = og.without_gravity(ref_params)
        dc0 = og.derive_couplings(p0)
        times = np.linspace(0.0, period_of(dc0), 65)
        shift = og.visibility_shift(dc0, p0, times)
        assert np.all(shift.values == 0.0)
        assert shift.is_shift

    def test_zero_at_time_zero(self, ref_params, ref_couplings):
        assert og.visibility_shift(ref_couplings, ref_params, [0.0]).values[0] == 0.0

    def test_survives_zero_readout_coupling(self):
        p = og.dimensionless_params(gamma=1e-2, lambda_m=0.445, lambda_M=0.0)
        dc = og.derive_couplings(p)
        shift = og.visibility_shift(dc, p, [0.9 * period_of(dc)]).values[0]
        assert shift != 0.0

    def test_reference_magnitude_window(self, ref_params, ref_couplings):
        times = np.linspace(0.0, 3 * period_of(ref_couplings), 1024)
        shift = og.visibility_shift(ref_couplings, ref_params, times).values
        peak = np.max(np.abs(shift))
        assert 1e-7 <= peak <= 1e-5


class TestThermalVisibility:
    def test_zero_occupation_bitwise_identical(self, ref_params, ref_couplings):
        times = np.linspace(0.0, 2 * period_of(ref_couplings), 129)
        thermal = og.thermal_visibility(ref_couplings, ref_params, 0.0, times).values
        plain = og.visibility_uncoupled(ref_couplings, ref_params, "m", times).values
        assert np.array_equal(thermal, plain)

    def test_unit_occupation_half_period(self, ref_params, ref_couplings):
        t = 0.5 * period_of(ref_couplings)
        value = og.thermal_visibility(ref_couplings, ref_params, 1.0, [t]).values[0]
        assert value == pytest.approx(math.exp(-6 * ref_couplings.lambda_m**2), rel=1e-12)

    def test_montecarlo_agrees_with_law(self, ref_params, ref_couplings):
        T = period_of(ref_couplings)
        for nbar, t in ((10.0, 0.15 * T), (10.0, 0.4 * T), (2.0, 0.6 * T)):
            law = og.thermal_visibility(ref_couplings, ref_params, nbar, [t]).values[0]
            mean, err = og.thermal_visibility_montecarlo(
                ref_couplings, ref_params, None, nbar, t, 4000, seed=99
            )
            assert abs(mean - law) <= 3.0 * err + 1e-12

    def test_rejects_negative_occupation(self, ref_params, ref_couplings):
        with pytest.raises(ParameterError):
            og.thermal_visibility(ref_couplings, ref_params, -0.5, [0.0])


class TestRevivalPeakWidth:
    def test_zero_temperature_value(self, ref_params, ref_couplings):
        expected = 1.0 / (ref_couplings.lambda_m * math.sqrt(2.0))
        assert og.revival_peak_width(ref_couplings, ref_params, 0.0) == pytest.approx(
            expected, rel=1e-14
        )

    def test_high_temperature_quarter_scaling(self, ref_params, ref_couplings):
        w1 = og.revival_peak_width(ref_couplings, ref_params, 100.0)
        w4 = og.revival_peak_width(ref_couplings, ref_params, 400.0)
        assert w1 / w4 == pytest.approx(2.0, rel=1e-6)

    def test_matches_measured_half_width_within_factor_two(self, ref_params, ref_couplings):
        from scipy.optimize import brentq

        temperature = 0.1
        env = og.thermal_env(ref_params, temperature, 1e-4)
        lam = ref_couplings.lambda_m

        def pattern_minus_half(x):
            return math.exp(-lam * lam * (2 * env.nbar + 1) * (1 - math.cos(x))) - 0.5

        half_width = brentq(pattern_minus_half, 1e-12, math.pi)  # phase from the peak
        estimate = og.revival_peak_width(ref_couplings, ref_params, temperature)
        assert 0.5 <= half_width / estimate <= 2.0


class TestLinearEntropyFirstOrder:
    def test_zero_gamma_and_zero_time(self, boosted_params, boosted_couplings):
        p0 = og.without_gravity(boosted_params)
        dc0 = og.derive_couplings(p0)
        assert og.linear_entropy_first_order(dc0, p0, 3.0) == 0.0
        assert og.linear_entropy_first_order(boosted_couplings, boosted_params, 0.0) == 0.0

    def test_non_negative_over_a_period(self):
        p = og.dimensionless_params(gamma=1e-2, lambda_m=0.2, lambda_M=0.15)
        dc = og.derive_couplings(p)
        spec = og.HilbertSpec(16, 16)
        for frac in (0.2, 0.5, 0.8, 1.0):
            s = og.linear_entropy_first_order(dc, p, frac * period_of(dc), spec=spec)
            assert s >= -1e-12

    def test_quadrature_failure_is_reported(self, boosted_params, boosted_couplings):
        quadrature = og.QuadratureSpec(start_nodes=1, max_nodes=2, rel_tol=1e-14)
        with pytest.raises(QuadratureError) as excinfo:
            og.linear_entropy_first_order(
                boosted_couplings, boosted_params, 11.0,
                spec=og.HilbertSpec(16, 16), quadrature=quadrature,
            )
        assert "nodes" in excinfo.value.diagnostics


class TestVisibilityTrace:
    def test_times_must_increase(self):
        with pytest.raises(ParameterError):
            og.VisibilityTrace(times=[1.0, 0.5], values=[1.0, 1.0], method="uncoupled",
                               params_fingerprint="x")

    def test_unity_flag(self):
        ok = og.VisibilityTrace(times=[0.0, 1.0], values=[1.0, 0.5],
                                method="uncoupled", params_fingerprint="x")
        assert not ok.exceeds_unity
        hot = og.VisibilityTrace(times=[0.0, 1.0], values=[1.0, 1.1],
                                 method="first_order_closed", params_fingerprint="x")
        assert hot.exceeds_unity

    def test_serialisation_round_trip(self, ref_params, ref_couplings):
        trace = og.visibility_uncoupled(ref_couplings, ref_params, "m", [0.0, 1e-4])
        rows = trace.to_csv_rows()
        assert [float(r[0]) for r in rows] == [0.0, 1e-4]
        assert all(r[2] == "uncoupled" for r in rows)
        payload = trace.to_json_dict()
        assert payload["values"] == [float(v) for v in trace.values]
        assert payload["params_fingerprint"] == trace.params_fingerprint
