"""Tests for the experiment drivers.

The continuation worked values are hand-derived from the recurrence; the
growth worked values come from the exact 2x2 mode eigenvalues; sweep fits
are exercised on synthetic rows because the physical rescaled runs below
stay bounded (that fact itself is asserted where it matters).
"""

import math

import numpy as np
import pytest

from wavereg.experiments import (
    ContinuationSchedule,
    DatumSpec,
    SweepRow,
    continuation_schedule,
    existence_time,
    fit_existence_times,
    growth_experiment,
    lemma_m_suite,
    make_datum,
    norm_domination_margin,
    normal_history,
    scaling_sweep,
    sobolev_constant,
)
from wavereg.integrate import IntegratorConfig, solve
from wavereg.model import PressureLaw, State, SystemSpec, energy
from wavereg.normalform import NormalFormSetting, from_normal_coords
from wavereg.spectral import Grid, SpectralField, apply_m, from_modes, norm, random_field

ALL_LAWS = [
    (PressureLaw.P0, False),
    (PressureLaw.P1, False),
    (PressureLaw.P2, False),
    (PressureLaw.P0, True),
]


class TestDatumSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(target_norm=1.0 / 6.0),
            dict(target_norm=0.0),
            dict(target_norm=-0.1),
            dict(target_norm=0.3),
            dict(mode_band=(0, 8)),
            dict(mode_band=(5, 3)),
            dict(law=PressureLaw.P1, conjugated=True),
            dict(law=PressureLaw.P2, conjugated=True),
        ],
    )
    def test_rejects_bad_fields(self, kwargs):
        base = dict(seed=1, target_norm=0.15, law=PressureLaw.P0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            DatumSpec(**base)

    def test_accepts_conjugated_p0(self):
        DatumSpec(seed=1, target_norm=0.1, law=PressureLaw.P0, conjugated=True)


class TestMakeDatum:
    @pytest.mark.parametrize("law,conjugated", ALL_LAWS)
    def test_norms_and_certificate(self, law, conjugated):
        grid = Grid(32)
        spec = DatumSpec(seed=7, target_norm=0.15, law=law, conjugated=conjugated)
        state = make_datum(grid, spec)
        n1 = norm(state.u1, "Hs", s=1.0)
        n2 = norm(state.u2, "L2")
        assert abs(n1 - 0.15) < 1e-12
        assert n2 <= 0.15 + 1e-12
        assert abs(max(n1, n2) - 0.15) < 1e-12
        assert abs(state.u1.coeff(0)) == 0.0
        assert abs(state.u2.coeff(0)) == 0.0
        # independent certificate evaluation, not trusting the constructor
        assert energy(law, state, conjugated=conjugated).value < 0.0

    def test_profiles_are_real_valued(self):
        grid = Grid(16)
        spec = DatumSpec(seed=3, target_norm=0.12, law=PressureLaw.P2)
        state = make_datum(grid, spec)
        for field in (state.u1, state.u2):
            assert np.allclose(field.coeffs, np.conj(field.coeffs[::-1]), atol=1e-15)

    def test_band_is_respected(self):
        grid = Grid(16)
        spec = DatumSpec(
            seed=5, target_norm=0.1, law=PressureLaw.P1, mode_band=(2, 5)
        )
        state = make_datum(grid, spec)
        ks = np.abs(grid.wavenumbers)
        outside = (ks < 2) | (ks > 5)
        assert np.all(state.u1.coeffs[outside] == 0.0)
        assert np.all(state.u2.coeffs[outside] == 0.0)
        assert np.any(state.u1.coeffs[~outside] != 0.0)

    def test_deterministic_per_seed(self):
        grid = Grid(16)
        spec = DatumSpec(seed=42, target_norm=0.15, law=PressureLaw.P1)
        a = make_datum(grid, spec)
        b = make_datum(grid, spec)
        assert np.array_equal(a.u1.coeffs, b.u1.coeffs)
        assert np.array_equal(a.u2.coeffs, b.u2.coeffs)
        other = make_datum(grid, DatumSpec(seed=43, target_norm=0.15, law=PressureLaw.P1))
        assert not np.array_equal(a.u1.coeffs, other.u1.coeffs)

    def test_band_must_fit_grid(self):
        grid = Grid(4)
        spec = DatumSpec(seed=1, target_norm=0.1, law=PressureLaw.P0, mode_band=(1, 8))
        with pytest.raises(ValueError, match="band"):
            make_datum(grid, spec)


class TestExistenceTime:
    def _system(self, eps=0.2, amp=1.0):
        return SystemSpec("regularized", eps, rescaled=True, amplitude=amp)

    def test_zero_datum_never_crosses(self):
        grid = Grid(8)
        zero = State(from_modes(grid, {}), from_modes(grid, {}))
        config = IntegratorConfig(dt=1e-3, t_end=0.01)
        t, status = existence_time(self._system(), PressureLaw.P0, zero, config)
        assert t is None and status == "completed"

    def test_small_datum_stays_neutral(self):
        grid = Grid(16)
        spec = DatumSpec(seed=2, target_norm=0.01, law=PressureLaw.P0)
        datum = make_datum(grid, spec)
        config = IntegratorConfig(dt=1e-3, t_end=0.05)
        t, status = existence_time(self._system(), PressureLaw.P0, datum, config)
        assert t is None and status == "completed"

    def test_threshold_is_stated_in_profile_units(self):
        grid = Grid(16)
        profile = make_datum(
            grid, DatumSpec(seed=2, target_norm=0.15, law=PressureLaw.P0)
        )
        amp = 0.5
        config = IntegratorConfig(dt=1e-3, t_end=0.05)
        # rho_max below the profile size crosses immediately, even though the
        # raw state norm 0.075 never approaches 1
        t, status = existence_time(
            self._system(amp=amp), PressureLaw.P0, amp * profile, config, rho_max=0.12
        )
        assert status == "blowup" and t is not None and t < 0.05
        # and a threshold above it never crosses
        t, status = existence_time(
            self._system(amp=amp), PressureLaw.P0, amp * profile, config, rho_max=2.0
        )
        assert t is None and status == "completed"

    def test_rejects_nonpositive_rho(self):
        grid = Grid(8)
        zero = State(from_modes(grid, {}), from_modes(grid, {}))
        config = IntegratorConfig(dt=1e-3, t_end=0.01)
        with pytest.raises(ValueError, match="rho_max"):
            existence_time(self._system(), PressureLaw.P0, zero, config, rho_max=0.0)


class TestFitExistenceTimes:
    def _row(self, eps, time, status="blowup"):
        return SweepRow(eps, time, status, 1.0, 1.0)

    def test_exact_square_law(self):
        rows = [self._row(e, 3.0 * e**2) for e in (0.2, 0.1, 0.05, 0.025)]
        slope, intercept, residual, message = fit_existence_times(rows)
        assert abs(slope - 2.0) < 1e-12
        assert abs(intercept - math.log(3.0)) < 1e-12
        assert residual < 1e-13
        assert message == ""

    def test_too_few_blowups(self):
        rows = [
            self._row(0.2, 0.1),
            self._row(0.1, 0.05),
            self._row(0.05, None, status="completed"),
        ]
        slope, _, _, message = fit_existence_times(rows)
        assert slope is None
        assert "2 blow-up" in message

    def test_all_completed(self):
        rows = [self._row(e, None, status="completed") for e in (0.2, 0.1, 0.05)]
        assert fit_existence_times(rows)[3] == "no blow-up observed"

    def test_diverged_is_reported_distinctly(self):
        rows = [
            self._row(0.2, None, status="completed"),
            self._row(0.1, None, status="completed"),
            self._row(0.05, None, status="diverged"),
        ]
        slope, _, _, message = fit_existence_times(rows)
        assert slope is None
        assert "diverged" in message


class TestScalingSweep:
    def test_small_amplitude_family_never_exits(self):
        spec = DatumSpec(seed=11, target_norm=0.15, law=PressureLaw.P1)
        result = scaling_sweep(
            PressureLaw.P1,
            "regularized",
            (0.2, 0.1, 0.05),
            spec,
            amplitude_exponent=0.5,
            t_end=0.3,
            dt=2e-3,
            n_modes=16,
        )
        assert [row.epsilon for row in result.rows] == [0.2, 0.1, 0.05]
        assert all(row.status == "completed" for row in result.rows)
        assert result.slope is None
        assert result.message == "no blow-up observed"
        for row in result.rows:
            # terminal norms are reported in profile units
            assert 0.10 < row.final_norm1 < 0.20
            assert row.final_norm2 < 0.20

    def test_process_pool_matches_serial(self):
        spec = DatumSpec(seed=11, target_norm=0.15, law=PressureLaw.P1)
        kwargs = dict(
            amplitude_exponent=0.5, t_end=0.05, dt=5e-3, n_modes=16, store_every=4
        )
        serial = scaling_sweep(
            PressureLaw.P1, "regularized", (0.2, 0.1, 0.05), spec, **kwargs
        )
        pooled = scaling_sweep(
            PressureLaw.P1, "regularized", (0.2, 0.1, 0.05), spec, jobs=2, **kwargs
        )
        assert serial == pooled

    def test_fixed_amplitude_modified_runs(self):
        spec = DatumSpec(
            seed=11, target_norm=0.15, law=PressureLaw.P0, conjugated=True
        )
        result = scaling_sweep(
            PressureLaw.P0,
            "modified",
            (0.2, 0.1, 0.05),
            spec,
            amplitude=0.2,
            t_end=0.05,
            dt=2e-3,
            n_modes=16,
        )
        assert result.message == "no blow-up observed"

    @pytest.mark.parametrize(
        "kwargs,match",
        [
            (dict(epsilons=(0.2, 0.1)), "three"),
            (dict(epsilons=(0.2, 0.2, 0.1)), "distinct"),
            (dict(epsilons=(0.2, 0.1, 1.5)), "epsilon"),
            (dict(amplitude=0.3), "exactly one"),
            (dict(amplitude_exponent=None), "exactly one"),
            (dict(amplitude_exponent=-1.0), "nonnegative"),
            (dict(time_scale="cubic"), "time_scale"),
        ],
    )
    def test_validation(self, kwargs, match):
        spec = DatumSpec(seed=1, target_norm=0.1, law=PressureLaw.P0)
        base = dict(
            law=PressureLaw.P0,
            kind="regularized",
            epsilons=(0.2, 0.1, 0.05),
            spec=spec,
            amplitude_exponent=0.0,
        )
        base.update(kwargs)
        with pytest.raises(ValueError, match=match):
            scaling_sweep(
                base.pop("law"), base.pop("kind"), base.pop("epsilons"),
                base.pop("spec"), **base,
            )


class TestContinuationSchedule:
    def test_worked_values(self):
        s = continuation_schedule(0.5, 0.01, 0.5, 1.0, 1.0)
        assert s.j_formula == 11
        assert len(s.rho_sequence) == 12 and len(s.time_sequence) == 12
        assert math.isclose(s.time_sequence[0], 0.02, rel_tol=1e-14)
        assert math.isclose(s.rho_sequence[1], 0.72, rel_tol=1e-14)
        # T_1 = 0.01 / (2 * 0.72^2)
        assert math.isclose(s.time_sequence[1], 0.01 / 1.0368, rel_tol=1e-14)
        assert math.isclose(s.t_star, 0.08665272599498827, rel_tol=1e-12)

    def test_budget_doubling_stops_at_step_seven(self):
        s = continuation_schedule(0.5, 0.01, 0.5, 1.0, 1.0)
        assert s.j_star == 7
        assert s.rho_sequence[7] <= 1.0 < s.rho_sequence[8]
        assert math.isclose(s.rho_sequence[7], 0.9804072973760545, rel_tol=1e-12)
        assert math.isclose(s.rho_sequence[8], 1.0116183333643551, rel_tol=1e-12)

    def test_monotone_and_positive(self):
        s = continuation_schedule(0.5, 0.01, 0.5, 1.0, 1.0)
        rhos = np.array(s.rho_sequence)
        assert np.all(np.diff(rhos) > 0.0)
        assert all(t > 0.0 for t in s.time_sequence)

    def test_per_step_bracket_up_to_j_star(self):
        s = continuation_schedule(0.5, 0.01, 0.5, 1.0, 1.0)
        lower = 0.01 / (2.0 * 1.0 * (2.0 * 0.5) ** 2)
        for k in range(s.j_star + 1):
            assert s.time_sequence[k] >= lower

    def test_total_time_lower_bounds(self):
        s = continuation_schedule(0.5, 0.01, 0.5, 1.0, 1.0)
        assert s.t_star >= s.j_formula * 0.01 / (2.0 * (2.0 * 0.5) ** 2)  # 0.055
        assert s.t_star >= 1.0 / (16.0 * 1.0)  # 0.0625

    def test_step_count_grows_as_epsilon_shrinks(self):
        counts = [
            continuation_schedule(0.5, eps, 0.5, 1.0, 1.0).j_formula
            for eps in (0.02, 0.01, 0.005)
        ]
        assert counts == sorted(counts) and counts[0] < counts[-1]

    def test_alpha_zero_grain(self):
        s = continuation_schedule(0.5, 0.05, 0.0, 1.0, 1.0)
        assert math.isclose(s.time_sequence[0], 0.05**2 / 0.5, rel_tol=1e-14)

    @pytest.mark.parametrize(
        "args",
        [
            (0.5, 0.5, 0.5, 1.0, 1.0),  # step count below 1
            (0.0, 0.01, 0.5, 1.0, 1.0),
            (-0.3, 0.01, 0.5, 1.0, 1.0),
            (0.5, 1.5, 0.5, 1.0, 1.0),
            (0.5, 0.01, 1.5, 1.0, 1.0),
            (0.5, 0.01, 0.5, 0.0, 1.0),
            (0.5, 0.01, 0.5, 1.0, -2.0),
        ],
    )
    def test_validation(self, args):
        with pytest.raises(ValueError):
            continuation_schedule(*args)


class TestGrowthExperiment:
    def test_elliptic_worked_value(self):
        (row,) = growth_experiment(PressureLaw.P0, 0.0, [4])
        assert row.predicted == 4.0
        assert abs(row.measured - 4.0) <= 0.04

    def test_hyperbolic_point_is_neutral(self):
        (row,) = growth_experiment(PressureLaw.P0, 1.0, [4])
        assert row.predicted == 0.0
        assert abs(row.measured) <= 1e-6

    def test_rate_is_linear_in_wavenumber(self):
        rows = growth_experiment(PressureLaw.P0, 0.0, [2, 4, 8])
        measured = [row.measured for row in rows]
        assert abs(measured[1] / measured[0] - 2.0) < 0.02
        assert abs(measured[2] / measured[1] - 2.0) < 0.02
        assert [row.predicted for row in rows] == [2.0, 4.0, 8.0]

    def test_dispersion_lowers_the_measured_rate(self):
        (row,) = growth_experiment(PressureLaw.P0, 0.0, [4], epsilon=0.1)
        # exact dispersive rate: k sqrt(4 - eps^2 k^2) / 2 at p'(0) = -1
        exact = 4.0 * math.sqrt(4.0 - 0.01 * 16.0) / 2.0
        assert abs(row.measured - exact) < 1e-6
        assert row.measured < row.predicted

    def test_laws_share_the_real_axis_linearization(self):
        a = growth_experiment(PressureLaw.P0, 0.3, [2])
        b = growth_experiment(PressureLaw.P1, 0.3, [2])
        assert a[0].measured == b[0].measured
        assert a[0].predicted == b[0].predicted

    def test_validation(self):
        with pytest.raises(ValueError, match="epsilon"):
            growth_experiment(PressureLaw.P0, 0.0, [4], epsilon=-0.1)
        with pytest.raises(ValueError, match="samples"):
            growth_experiment(PressureLaw.P0, 0.0, [4], n_samples=50)


class TestLemmaMSuite:
    def test_default_run_passes(self):
        report = lemma_m_suite(seed=20240817)
        assert report.passed
        assert report.n_fields == 100 and report.n_modes == 64
        assert set(report.residuals) == {
            "first_derivative_left",
            "first_derivative_right",
            "second_derivative_left",
            "second_derivative_right",
            "conjugation_parity",
            "sobolev_shift",
            "pointwise_bound",
        }
        assert max(report.residuals.values()) < 1e-10

    def test_deterministic(self):
        a = lemma_m_suite(seed=5, n_fields=10)
        b = lemma_m_suite(seed=5, n_fields=10)
        assert a.residuals == b.residuals

    def test_fault_injection_breaks_first_derivative_identity(self):
        def corrupted(f):
            g = apply_m(f)
            coeffs = g.coeffs.copy()
            coeffs[f.grid.index(-1)] = 0.0
            return SpectralField(f.grid, coeffs)

        report = lemma_m_suite(seed=9, n_fields=10, multiplier=corrupted)
        assert not report.passed
        assert report.residuals["first_derivative_left"] > 0.1
        assert report.residuals["first_derivative_right"] > 0.1


class TestSobolevConstant:
    def test_mean_mode_only(self):
        assert sobolev_constant(0) == 1.0

    def test_monotone_increasing(self):
        values = [sobolev_constant(k) for k in range(0, 50)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_limit(self):
        limit = math.sqrt(1.0 + math.pi**2 / 3.0)
        assert abs(sobolev_constant(200_000) - limit) < 1e-5
        assert sobolev_constant(64) < limit

    def test_embedding_never_violated(self, rng):
        grid = Grid(32)
        c = sobolev_constant(32)
        for _ in range(100):
            u = random_field(grid, rng, band=(0, 32), zero_mean=False)
            assert norm(u, "Linf") <= c * norm(u, "Hs", s=1.0) * (1.0 + 1e-12)

    def test_extremal_field_attains_the_constant(self):
        grid = Grid(32)
        ks = grid.wavenumbers
        coeffs = np.maximum(1.0, np.abs(ks)).astype(complex) ** -2.0
        u = SpectralField(grid, coeffs)
        c = sobolev_constant(32)
        ratio = norm(u, "Linf") / norm(u, "Hs", s=1.0)
        assert ratio >= c * (1.0 - 1e-12)

    def test_rejects_negative_band(self):
        with pytest.raises(ValueError):
            sobolev_constant(-1)


class TestNormDomination:
    def _state(self, grid, a1, a2):
        return State(from_modes(grid, {1: a1}), from_modes(grid, {1: a2}))

    def test_p1_margin_signs(self):
        grid = Grid(4)
        setting = NormalFormSetting(epsilon=0.1, law=PressureLaw.P1)
        ratio = 1.1 / 0.9
        good = self._state(grid, 1.0, 0.5 * ratio)
        bad = self._state(grid, 1.0, 2.0 * ratio)
        assert norm_domination_margin(setting, [good]) < 0.0
        assert norm_domination_margin(setting, [bad]) > 0.0
        assert norm_domination_margin(setting, [good, bad]) > 0.0

    def test_p2_vacuous_certificate_raises(self):
        grid = Grid(4)
        setting = NormalFormSetting(
            epsilon=0.3, law=PressureLaw.P2, amplitude=2.0
        )
        big = self._state(grid, 1.0, 0.1)
        with pytest.raises(ValueError, match="vacuous"):
            norm_domination_margin(setting, [big])

    def test_plain_p0_has_no_certificate(self):
        grid = Grid(4)
        setting = NormalFormSetting(epsilon=0.1, law=PressureLaw.P0)
        with pytest.raises(ValueError, match="p0"):
            norm_domination_margin(setting, [self._state(grid, 1.0, 0.1)])

    def test_empty_history_raises(self):
        setting = NormalFormSetting(epsilon=0.1, law=PressureLaw.P1)
        with pytest.raises(ValueError, match="samples"):
            norm_domination_margin(setting, [])

    def test_holds_along_a_p1_negative_energy_run(self):
        grid = Grid(16)
        eps = 0.2
        amp = eps**0.5
        profile = make_datum(
            grid, DatumSpec(seed=11, target_norm=0.15, law=PressureLaw.P1)
        )
        system = SystemSpec("regularized", eps, rescaled=True, amplitude=amp)
        config = IntegratorConfig(dt=1e-3, t_end=0.1, store_every=10)
        trajectory = solve(system, PressureLaw.P1, amp * profile, config)
        setting = NormalFormSetting(epsilon=eps, law=PressureLaw.P1, amplitude=amp)
        states = normal_history(setting, trajectory)
        assert len(states) == len(trajectory.states)
        assert norm_domination_margin(setting, states) < 0.0

    def test_normal_history_round_trips(self):
        grid = Grid(16)
        eps = 0.2
        amp = 0.4
        profile = make_datum(
            grid, DatumSpec(seed=11, target_norm=0.15, law=PressureLaw.P1)
        )
        system = SystemSpec("regularized", eps, rescaled=True, amplitude=amp)
        config = IntegratorConfig(dt=2e-3, t_end=0.02, store_every=5)
        trajectory = solve(system, PressureLaw.P1, amp * profile, config)
        setting = NormalFormSetting(epsilon=eps, law=PressureLaw.P1, amplitude=amp)
        for raw, v in zip(trajectory.states, normal_history(setting, trajectory)):
            back = amp * from_normal_coords(setting, v)
            assert norm(back.u1 - raw.u1, "L2") < 1e-12
            assert norm(back.u2 - raw.u2, "L2") < 1e-12
