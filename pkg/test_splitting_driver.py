"""
Tests for the splitting plan, the plate step and full runs with their ledger audits
"""
import json
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import CONFIG_DIR, make_config
from src.exceptions import ParameterError
from src.ledger_recorder import json_safe, validate_summary
from src.plate_models import make_model, potential
from src.sim_config import load_config
from src.splitting_driver import (
    LEDGER_COLUMNS, EnergyLedger, LedgerEntry, PlanConstants, PlateState, SplittingPlan, average_rate,
    build_plan, build_problem, compute_N_min, initial_data, mismatch_report, n_min_breakdown, run, ssp_step,
)


def _entry(n, F=1.0, D=0.0, terminal=False):
    return LedgerEntry(n=n, t=0.1 * n, S=F, F=F, D=D, mismatch_ssp=0.0, mismatch_fsp=0.0, J_min=1.0, J_max=1.0,
                       energy_kinetic_fluid=0.0, energy_elastic=0.0, energy_plate_kinetic=0.0, potential=0.0,
                       fsp_slack=0.0, terminal=terminal)


def _plan(T=0.1, k=3, N=4, alpha=0.5):
    constants = PlanConstants(C_B=1.0, C_Gamma=1.0, C_R=0.0, R=1.0, F0_norm=0.0, C0=1.0, E0=1.0, C_star=0.0,
                              kappa=0.25, c=0.25, C_Pi_eta0=0.0)
    return SplittingPlan(T=T, k=k, alpha=alpha, a=0.0, N=N, N_min=1, N_user=N, strict=True, constants=constants)


class TestStepCount:

    def test_stiffness_only(self):
        breakdown = n_min_breakdown(1.0, 0.0, 0.0, 1.0, 0.0, 0.0, [1.0, 4.0])
        assert breakdown['stiffness_term'] == pytest.approx(8.0)
        assert breakdown['lipschitz_term'] == 0.0
        assert breakdown['raw'] == pytest.approx(np.sqrt(8.0))
        assert breakdown['N_min'] == 3

    def test_lipschitz_term_adds(self):
        breakdown = n_min_breakdown(1.0, 0.0, 0.0, 1.0, 1.0, 1.0, [1.0, 4.0])
        assert breakdown['sum_xi_a'] == pytest.approx(2.0)
        assert breakdown['lipschitz_term'] == pytest.approx(16.0)
        assert breakdown['N_min'] == 5

    def test_zero_constants_give_one_step(self):
        assert n_min_breakdown(1.0, 0.5, 0.5, 0.0, 0.0, 0.0, [10.0])['N_min'] == 1

    @pytest.mark.parametrize('alpha', [2.0, 2.5, -0.1])
    def test_alpha_outside_range(self, alpha):
        with pytest.raises(ParameterError):
            n_min_breakdown(1.0, alpha, 0.0, 1.0, 0.0, 0.0, [1.0])

    def test_monotone_in_k(self, basis):
        values = [n_min_breakdown(1.0, 0.5, 0.5, 1.0, 0.5, 0.1, basis.xi[:k])['raw'] for k in range(1, 5)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_time_grid_ends_exactly_at_T(self):
        plan = _plan(T=0.1, N=7)
        assert plan.time(plan.N) == 0.1
        assert plan.time(0) == 0.0
        assert plan.dt == pytest.approx(0.1 / 7)

    def test_compute_n_min_uses_the_first_k_eigenvalues(self, basis):
        constants = _plan().constants
        for k in (1, basis.k_max):
            expected = n_min_breakdown(1.0, 0.0, 0.0, 1.0, 0.0, 0.0, basis.xi[:k])['N_min']
            assert compute_N_min(constants, basis, 1.0, 0.0, 0.0, k=k) == expected
        assert compute_N_min(constants, basis, 1.0, 0.0, 0.0) == max(int(np.ceil(np.sqrt(2.0 * basis.xi[-1]))), 1)


class TestPlateStep:

    def test_free_decay_matches_exponential(self, basis):
        plan = _plan(k=4)
        model = make_model('zero', basis)
        alpha0 = np.array([1.0, 0.5, -0.5, 0.25])
        traj = ssp_step(PlateState(alpha0, 0.0), plan, model, basis, np.zeros(4))
        expected = np.exp(-plan.dt * basis.xi * plan.dt) * alpha0
        np.testing.assert_allclose(traj.eta_end, expected, atol=1e-9)

    def test_average_rate_is_the_mean_of_the_rate(self, basis):
        plan = _plan(k=4)
        model = make_model('zero', basis)
        traj = ssp_step(PlateState(np.zeros(4), 0.0), plan, model, basis, np.array([0.5, 0.1, -0.1, 0.2]))
        quadrature = traj.weights @ traj.rate_nodes / plan.dt
        np.testing.assert_allclose(average_rate(traj), quadrature, atol=1e-8)

    def test_gauss_nodes_lie_inside_the_interval(self, basis):
        plan = _plan(k=4)
        traj = ssp_step(PlateState(np.zeros(4), plan.time(2)), plan, make_model('zero', basis), basis,
                        np.ones(4), step=2)
        assert np.all(traj.times > traj.t0) and np.all(traj.times < traj.t1)
        assert traj.weights.sum() == pytest.approx(plan.dt)

    def test_velocity_length_must_match(self, basis):
        with pytest.raises(ParameterError):
            ssp_step(PlateState(np.zeros(4), 0.0), _plan(k=4), make_model('zero', basis), basis, np.zeros(3))


class TestLedger:

    def test_rows_need_increasing_step(self):
        ledger = EnergyLedger(F0=1.0)
        ledger.append(_entry(0))
        ledger.append(_entry(1))
        with pytest.raises(ParameterError):
            ledger.append(_entry(1))

    def test_frame_has_exact_columns(self):
        ledger = EnergyLedger(F0=1.0, entries=[_entry(0), _entry(1)])
        assert tuple(ledger.to_frame().columns) == LEDGER_COLUMNS
        assert len(ledger.to_frame(full=True).columns) > len(LEDGER_COLUMNS)

    def test_snapshot_is_independent(self):
        ledger = EnergyLedger(F0=1.0, entries=[_entry(0)])
        copy = ledger.snapshot()
        ledger.append(_entry(1))
        assert len(copy) == 1

    def test_mismatch_report_within_bounds(self):
        plan = _plan(T=0.1, N=4, alpha=0.5)
        entries = [replace(_entry(n), mismatch_ssp=0.1, rate_deviation=1e-3) for n in range(4)]
        report = mismatch_report(EnergyLedger(F0=1.0, entries=entries), plan)
        assert report['passed']
        assert report['ssp_bound']['bound'] == pytest.approx(0.025 ** 0.5)
        assert report['ssp_bound']['violations'] == []
        assert report['rate_deviation']['C_obs'] == pytest.approx(1e-3 / 0.025)
        assert report['rate_deviation']['C_ref'] == pytest.approx(4.0 / 3.0)
        assert report['rate_deviation']['within_reference']
        assert report['sums_finite']

    def test_mismatch_report_flags_violations_in_strict_mode(self):
        plan = _plan(T=0.1, N=4, alpha=0.5)
        entries = [_entry(0), replace(_entry(1), mismatch_ssp=1.0), replace(_entry(2, terminal=True), mismatch_ssp=5.0)]
        report = mismatch_report(EnergyLedger(F0=1.0, entries=entries), plan)
        assert report['ssp_bound']['violations'] == [1]
        assert report['ssp_bound']['max_mismatch_sq'] == 1.0
        assert not report['passed']

        exploratory = replace(plan, strict=False)
        assert mismatch_report(EnergyLedger(F0=1.0, entries=entries), exploratory)['passed']


class TestPlan:

    def test_strict_plan_never_goes_below_minimum(self):
        config = make_config({'run.N_user': 1, 'run.T': 0.2})
        problem = build_problem(config)
        plan, records = build_plan(config, problem, initial_data(config, problem))
        assert plan.N == max(1, plan.N_min)
        assert records and records[0]['label'] == 'empirical'
        assert plan.constants.c == pytest.approx(0.5 - plan.constants.kappa)
        assert plan.constants.sensitivity >= 1.0

    def test_exploratory_plan_uses_requested_steps(self):
        config = make_config({'run.N_user': 2, 'run.strict': False})
        problem = build_problem(config)
        plan, _ = build_plan(config, problem, initial_data(config, problem), sample_assumptions=False)
        assert plan.N == 2

    def test_initial_data_respects_flux_relief(self):
        config = make_config()
        problem = build_problem(config)
        initial = initial_data(config, problem)
        assert initial.E0 > 0.0
        assert initial.fluid.divergence_residual <= 1e-8
        assert initial.F0 == pytest.approx(initial.E0 + potential(problem.model, problem.basis, initial.eta0))


class TestRun:

    def test_zero_problem_stays_at_rest(self):
        result = run(load_config(os.path.join(CONFIG_DIR, 'zero.json')), sample_assumptions=False)
        assert result.outcome == 'completed'
        assert result.plan.N == 100
        assert len(result.ledger) == 100
        frame = result.ledger.to_frame()
        assert (frame[['S', 'F', 'D', 'mismatch_ssp', 'mismatch_fsp']] == 0.0).all().all()
        assert result.checks['telescoping']['passed']

    def test_small_kirchhoff_run_passes_every_audit(self):
        config = make_config({'run.N_user': 4})
        result = run(config, sample_assumptions=False)
        checks = result.checks
        assert result.outcome == 'completed'
        assert result.plan.N >= 4
        assert checks['ssp_equality']['passed']
        assert checks['ssp_equality']['max_residual'] <= 1e-6
        assert checks['fsp_energy']['passed']
        assert checks['telescoping']['passed']
        assert checks['uniform_bound']['passed']
        assert checks['mismatch']['ssp_bound']['passed']
        assert checks['mismatch']['sums_finite']

        F = [result.ledger.F0] + [e.F for e in result.ledger.entries]
        assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(F, F[1:]))
        assert result.trajectory[-1].t == config.run.T
        assert len(result.trajectory) == result.plan.N + 1

    @pytest.mark.parametrize('plate', [
        {'model': 'berger', 'params': {'nu': 1.0, 'G': 5.0}, 'h': {'type': 'sine_bump', 'amplitude': 0.1},
         'alpha': 0.5},
        {'model': 'von_karman', 'h': {'type': 'sine_bump', 'amplitude': 0.05},
         'F0': {'type': 'quartic_bump', 'amplitude': 0.5}, 'alpha': 0.5},
    ], ids=['berger', 'von_karman'])
    def test_strict_nonlinear_plate_run_passes_the_ledger_audits(self, plate):
        result = run(make_config(plate=plate), sample_assumptions=False)
        checks = result.checks
        assert result.outcome == 'completed'
        assert result.plan.strict and result.plan.N >= result.plan.N_min
        for name in ('ssp_equality', 'fsp_energy', 'telescoping', 'uniform_bound'):
            assert checks[name]['passed'], (name, checks[name])

    @pytest.mark.slow
    @pytest.mark.parametrize('name', ['kirchhoff', 'berger', 'von_karman'])
    def test_desk_config_strict_run_fits_the_time_budget(self, name):
        config = load_config(os.path.join(CONFIG_DIR, f'{name}.json'))
        start = time.perf_counter()
        result = run(config, sample_assumptions=False)
        elapsed = time.perf_counter() - start
        assert result.outcome == 'completed'
        assert result.checks['fsp_energy']['passed']
        assert elapsed < 120.0, f"{name}: {elapsed:.1f}s for N={result.plan.N}"

    def test_summary_matches_schema(self):
        result = run(make_config({'run.N_user': 2}), sample_assumptions=False)
        summary = json_safe(result.summary())
        assert validate_summary(summary) == []
        json.dumps(summary)

    def test_plate_starting_on_the_floor_halts_at_once(self):
        result = run(load_config(os.path.join(CONFIG_DIR, 'touch_bottom.json')), sample_assumptions=False)
        assert result.outcome == 'touched_bottom'
        assert result.halt_step == 0
        assert len(result.ledger) == 1
        last = result.ledger.entries[-1]
        assert last.terminal
        assert last.F == last.S
        assert result.summary()['halt_step'] == 0
