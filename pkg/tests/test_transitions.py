import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ptdimer.errors import GammaZero, InvalidParameters, NonConvergent
from ptdimer.lattice import Boundary, LatticeParams, PhaseLabel
from ptdimer.propagation import GAIN_SITE, LOSS_SITE, InitialSpec
from ptdimer.transitions import (
    QuadratureSettings,
    absorbed_distribution,
    disorder_hamiltonian,
    disorder_robustness,
    gamma_independence_check,
    phase_classify_grid,
    rule_phase,
    transition_curve,
)

# frozen from tests/oracles.py::delta_m_lyapunov (N=41, nu=1, gamma=1, gain start)
LYAPUNOV_DM = {0.25: 0.0, 0.5: 0.0, 1.5: -0.9999981473876319, 2.0: -0.9999999999862472}


def test_quadrature_settings_validation():
    with pytest.raises(InvalidParameters):
        QuadratureSettings(t_max=0)
    with pytest.raises(InvalidParameters):
        QuadratureSettings(tail_tol=1.0)
    with pytest.raises(InvalidParameters):
        QuadratureSettings(n_steps=0)


def test_gamma_zero_rejected():
    with pytest.raises(GammaZero):
        absorbed_distribution(LatticeParams(11, 1, 0.5, 0.0))


@pytest.mark.parametrize("nup", sorted(LYAPUNOV_DM))
def test_matches_lyapunov_oracle(nup):
    rep = absorbed_distribution(LatticeParams(41, 1.0, nup, 1.0))
    assert rep.delta_m_pt == pytest.approx(LYAPUNOV_DM[nup], abs=1e-5)


@pytest.mark.parametrize("nup,g,theta", [(0.5, 0.7, 0.0), (2.0, 1.3, math.pi / 2), (0.3, 1.5, 0.6)])
def test_absorbed_distribution_matches_lyapunov(nup, g, theta):
    rep = absorbed_distribution(LatticeParams(21, 1.0, nup, g), InitialSpec(0, theta, 0.0), strict=False)
    dm, p = oracles.delta_m_lyapunov(21, 1.0, nup, g, theta)
    assert rep.converged
    np.testing.assert_allclose(rep.absorbed, p, atol=1e-5)
    assert rep.delta_m_pt == pytest.approx(dm, abs=1e-5)


def test_plateau_and_loss_start_examples():
    assert absorbed_distribution(LatticeParams(41, 1, 0.5, 1)).delta_m_pt == pytest.approx(0, abs=0.05)
    assert absorbed_distribution(LatticeParams(41, 1, 2.0, 1)).delta_m_pt == pytest.approx(-1, abs=0.05)
    loss = absorbed_distribution(LatticeParams(41, 1, 1.7, 1), LOSS_SITE)
    assert loss.delta_m_pt == pytest.approx(0, abs=0.05)


def test_decoupled_dimer_absorbs_in_place():
    rep = absorbed_distribution(LatticeParams(41, 1.0, 0.0, 0.7))
    centre = 20
    assert rep.absorbed[centre] == pytest.approx(1 - rep.residual, abs=1e-6)
    assert np.max(np.abs(np.delete(rep.absorbed, centre))) < 1e-12
    assert abs(rep.delta_m_pt) < 1e-12


@settings(max_examples=15)
@given(st.floats(0.1, 2.0), st.floats(0.3, 2.0), st.floats(0, math.pi))
def test_absorption_completeness(nup, g, theta):
    rep = absorbed_distribution(LatticeParams(21, 1.0, nup, g), InitialSpec(0, theta, 0.0), strict=False)
    assert rep.absorbed.sum() + rep.residual == pytest.approx(1.0, abs=1e-6)
    assert rep.absorbed.min() > -1e-9


@pytest.mark.parametrize("t_max", [5.0, 10.0, 40.0])
def test_completeness_at_every_horizon(t_max):
    q = QuadratureSettings(t_max=t_max, max_doublings=0)
    rep = absorbed_distribution(LatticeParams(21, 1.0, 1.2, 0.5), GAIN_SITE, q, strict=False)
    assert rep.absorbed.sum() + rep.residual == pytest.approx(1.0, abs=1e-6)


def test_residual_decreases_with_horizon():
    p = LatticeParams(21, 1.0, 0.8, 0.5)
    res = [absorbed_distribution(p, GAIN_SITE, QuadratureSettings(t_max=t, max_doublings=0), strict=False).residual for t in (5, 10, 20, 40)]
    assert all(a > b for a, b in zip(res, res[1:]))


def test_nonconvergent_carries_partial_report():
    p = LatticeParams(21, 1.0, 0.8, 0.5)
    q = QuadratureSettings(t_max=2.0, max_doublings=0)
    with pytest.raises(NonConvergent) as info:
        absorbed_distribution(p, GAIN_SITE, q)
    assert info.value.report is not None and not info.value.report.converged
    loose = absorbed_distribution(p, GAIN_SITE, q, strict=False)
    assert not loose.converged


@pytest.mark.parametrize("nup,g", [(0.5, 1.0), (2.0, 0.6), (1.3, 1.5)])
def test_frame_consistency(nup, g):
    p = LatticeParams(21, 1.0, nup, g)
    a = absorbed_distribution(p, frame="lossy", strict=False)
    b = absorbed_distribution(p, frame="pt", strict=False)
    assert a.delta_m_pt == pytest.approx(b.delta_m_pt, abs=1e-6)
    with pytest.raises(InvalidParameters):
        absorbed_distribution(p, frame="other")


def test_quadrature_error_estimate_is_small():
    rep = absorbed_distribution(LatticeParams(41, 1.0, 2.0, 1.0))
    assert 0 <= rep.quad_error < 1e-6


def test_report_metadata():
    rep = absorbed_distribution(LatticeParams(41, 1.0, 2.0, 1.0))
    assert rep.winding == -1 and rep.phase is PhaseLabel.PT_BROKEN
    deg = absorbed_distribution(LatticeParams(21, 1.0, 1.0, 1.0), strict=False)
    assert deg.winding_degenerate


@pytest.mark.parametrize("nup", [0.25, 0.5, 1.5, 2.0])
def test_winding_agreement(nup):
    from ptdimer.lattice import winding_number

    rep = absorbed_distribution(LatticeParams(41, 1.0, nup, 1.0))
    assert round(rep.delta_m_pt) == winding_number(1.0, nup)


def test_gamma_independence():
    assert gamma_independence_check(LatticeParams(41, 1, 2.0, 1), GAIN_SITE, [0.5, 1.0, 2.0]) < 0.05
    assert gamma_independence_check(LatticeParams(41, 1, 0.5, 1), GAIN_SITE, [0.5, 1.0, 2.0]) < 0.05
    assert gamma_independence_check(LatticeParams(41, 1, 2.0, 1), GAIN_SITE, [0.8]) == 0.0
    with pytest.raises(GammaZero):
        gamma_independence_check(LatticeParams(41, 1, 2.0, 1), GAIN_SITE, [0.0, 1.0])


def test_transition_curve():
    pts = transition_curve(1.0, 1.0, GAIN_SITE, [2.0, 0.5, 1.0, 0.25, 1.5, 0.75])
    ratios = [p.nu_prime_over_nu for p in pts]
    assert ratios == sorted(ratios)
    by = {p.nu_prime_over_nu: p for p in pts}
    for r in (0.25, 0.5, 0.75):
        assert by[r].delta_m_pt == pytest.approx(0, abs=0.05)
    for r in (1.5, 2.0):
        assert by[r].delta_m_pt == pytest.approx(-1, abs=0.05)
    # measured finite-size softening at the transition; no target value
    assert -1 < by[1.0].delta_m_pt < 0 and by[1.0].near_degenerate
    for p in pts:
        assert -1.05 <= p.delta_m_pt <= 0.05


def test_transition_curve_is_schedule_independent():
    a = transition_curve(1.0, 1.0, GAIN_SITE, [0.5, 2.0], n_dimers=21, jobs=1)
    b = transition_curve(1.0, 1.0, GAIN_SITE, [0.5, 2.0], n_dimers=21, jobs=2)
    assert a == b


# phase classification


def test_rule_phase():
    assert rule_phase(0.5, 0.2, 0.5) is PhaseLabel.PT_SYMMETRIC
    assert rule_phase(0.5, 0.6, 0.5) is PhaseLabel.PT_BROKEN
    # on the line the finite lattice threshold decides
    assert rule_phase(0.5, 0.5, 0.52) is PhaseLabel.PT_SYMMETRIC
    assert rule_phase(1.0, 0.0, 0.07) is PhaseLabel.PT_SYMMETRIC


def test_phase_grid_examples():
    grid = phase_classify_grid([0.5, 1.0, 2.0], [0.2, 0.5], 41)
    lab = {(r, g): grid.phase[i, j] for i, j, r, g in grid.cells()}
    assert lab[(0.5, 0.2)] is PhaseLabel.PT_SYMMETRIC
    assert lab[(1.0, 0.5)] is PhaseLabel.PT_BROKEN
    assert lab[(2.0, 0.5)] is PhaseLabel.PT_SYMMETRIC
    assert grid.on_boundary[0, 1]
    assert not grid.failed.any()
    assert grid.rule_mismatches() == []


def test_phase_grid_jobs_do_not_change_results():
    a = phase_classify_grid([0, 0.5, 1.5], [0.3, 1.0], 21, jobs=1)
    b = phase_classify_grid([0, 0.5, 1.5], [0.3, 1.0], 21, jobs=3)
    np.testing.assert_array_equal(a.max_imag, b.max_imag)
    assert (a.phase == b.phase).all()


def test_open_grid_breaks_with_edge_modes():
    grid = phase_classify_grid([1.5], [0.2], 41, boundary=Boundary.OPEN)
    assert grid.phase[0, 0] is PhaseLabel.PT_BROKEN
    assert len(grid.rule_mismatches()) == 1


# disorder


def test_disorder_hamiltonian_preserves_structure():
    p = LatticeParams(11, 1.0, 2.0, 0.5)
    h = disorder_hamiltonian(p, 0.1, np.random.default_rng(3))
    clean = oracles.hamiltonian(11, 1.0, 2.0, 0.5)
    np.testing.assert_array_equal(h != 0, clean != 0)
    np.testing.assert_array_equal(np.diag(h), np.diag(clean))
    ratio = h[clean.real != 0].real / clean[clean.real != 0].real
    assert np.all(np.abs(ratio - 1) <= 0.1)


def test_disorder_zero_strength():
    p = LatticeParams(21, 1.0, 2.0, 1.0)
    stats = disorder_robustness(p, GAIN_SITE, 0.0, 3, seed=1)
    assert stats.std == 0
    assert stats.mean == absorbed_distribution(p).delta_m_pt


@pytest.mark.parametrize("nup,target", [(2.0, -1.0), (0.5, 0.0)])
def test_disorder_robustness(nup, target):
    stats = disorder_robustness(LatticeParams(41, 1.0, nup, 1.0), GAIN_SITE, 0.05, 20, seed=7, jobs=2)
    assert stats.mean == pytest.approx(target, abs=0.1)
    assert stats.failures == 0


def test_disorder_seed_reproducible_across_jobs():
    p = LatticeParams(21, 1.0, 2.0, 1.0)
    a = disorder_robustness(p, GAIN_SITE, 0.1, 4, seed=11, jobs=1)
    b = disorder_robustness(p, GAIN_SITE, 0.1, 4, seed=11, jobs=4)
    np.testing.assert_array_equal(a.values, b.values)
    c = disorder_robustness(p, GAIN_SITE, 0.1, 4, seed=12)
    assert not np.array_equal(a.values, c.values)
    with pytest.raises(InvalidParameters):
        disorder_robustness(p, GAIN_SITE, -0.1, 4, seed=1)
