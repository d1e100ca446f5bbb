"""Physical scenarios: interferometer, eraser, cat, recording models."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdarwin import models
from qdarwin.channels import restrict_to_fragment, validate_cptp
from qdarwin.errors import BudgetError
from qdarwin.qcore import fidelity, purity, trace_distance


# -- interferometer -----------------------------------------------------------


def test_no_detector_all_light_at_b():
    res = models.mach_zehnder(detector_on=False)
    assert abs(res.p_detector_A) < 1e-12
    assert abs(res.p_detector_B - 1) < 1e-12
    assert abs(res.visibility - 1) < 1e-12


def test_perfect_detector_splits_evenly():
    res = models.mach_zehnder(detector_on=True, overlap=0.0)
    assert abs(res.p_detector_A - 0.5) < 1e-12
    assert abs(res.visibility) < 1e-12
    assert np.allclose(res.pre_bs2_reduced.entries, np.diag([0, 0.5, 0.5, 0]))


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(0.0, 1.0))
def test_partial_which_path_information(gamma):
    res = models.mach_zehnder(detector_on=True, overlap=gamma)
    assert abs(res.p_detector_A - (1 - gamma) / 2) < 1e-12
    assert abs(res.visibility - gamma) < 1e-12
    assert abs(res.p_detector_A + res.p_detector_B - 1) < 1e-12


def test_overlap_range():
    with pytest.raises(ValueError):
        models.mach_zehnder(True, 1.5)


def test_eraser_outcomes():
    plus, minus = models.erase_and_postselect("plus"), models.erase_and_postselect("minus")
    assert abs(plus.p_detector_A) < 1e-12
    assert abs(minus.p_detector_A - 1) < 1e-12
    assert abs(plus.postselection_probability - 0.5) < 1e-12
    assert abs(minus.postselection_probability - 0.5) < 1e-12
    mixture = plus.postselection_probability * plus.p_detector_A + minus.postselection_probability * minus.p_detector_A
    assert abs(mixture - 0.5) < 1e-12
    with pytest.raises(ValueError):
        models.erase_and_postselect("sideways")


# -- cat ------------------------------------------------------------------------


def test_cat_fully_decohered():
    assert np.allclose(models.cat_photon(1, 0.0).entries, np.eye(2) / 2, atol=1e-12)


@pytest.mark.parametrize("n_env,gamma", [(0, 0.3), (1, 0.5), (3, 0.9), (8, 0.9)])
def test_cat_coherence_closed_form(n_env, gamma):
    rho = models.cat_photon(n_env, gamma).entries
    assert abs(abs(rho[0, 1]) - 0.5 * gamma**n_env) < 1e-12
    assert abs(rho[0, 0] - 0.5) < 1e-12


def test_cat_coherence_monotone_in_photons():
    values = [abs(models.cat_photon(n, 0.8).entries[0, 1]) for n in range(6)]
    assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("initial,expected", [("dead", [1, 0]), ("alive", [0, 1])])
def test_pointer_states_unaffected(initial, expected):
    rho = models.pointer_state_check(initial, n_env=3, overlap=0.2)
    assert np.allclose(rho.entries, np.diag(expected))
    assert abs(purity(rho) - 1) < 1e-12


def test_budget_enforced():
    with pytest.raises(BudgetError):
        models.cat_photon(20, 0.9)
    rho = models.cat_photon(20, 0.9, budget_qubits=21)
    assert abs(abs(rho.entries[0, 1]) - 0.5 * 0.9**20) < 1e-12


# -- recording models -------------------------------------------------------------


def _alpha_state(alpha):
    from qdarwin.qcore import ket, SubsystemLayout

    return ket([alpha, math.sqrt(1 - alpha**2)], SubsystemLayout((2,), ("S",))).density()


@pytest.mark.parametrize("n", [1, 2, 5])
def test_spam_isometry_layout(n):
    chan = models.spam_interaction(n)
    assert chan.rank == 1
    assert chan.out_layout.labels == ("S",) + tuple(f"F{j}" for j in range(1, n + 1))
    assert validate_cptp(chan).passed


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(0.0, 1.0), n=st.integers(1, 5))
def test_spam_fragments_copy_populations(alpha, n):
    marg = models.fragment_marginals(models.spam_interaction(n), _alpha_state(alpha))
    assert len(marg) == n
    for rho in marg:
        assert np.allclose(rho.entries, np.diag([alpha**2, 1 - alpha**2]), atol=1e-12)


def test_spam_theta_pi_equals_partial_record():
    a = models.spam_interaction(3)
    b = models.partial_record_interaction(3, math.pi)
    assert np.allclose(a.operators[0], b.operators[0], atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.7, math.pi / 2, 2.5])
def test_partial_record_closed_forms(theta):
    n = 3
    chan = models.partial_record_interaction(n, theta)
    sys_state = restrict_to_fragment(chan, 0)(models.named_state("right").density())
    assert abs(abs(sys_state.entries[0, 1]) - 0.5 * math.cos(theta / 2) ** n) < 1e-12
    up = models.fragment_marginals(chan, models.named_state("up").density())
    down = models.fragment_marginals(chan, models.named_state("down").density())
    for u, d in zip(up, down):
        assert abs(fidelity(u, d) - math.cos(theta / 2) ** 2) < 1e-10
        assert abs(trace_distance(u, d) - math.sin(theta / 2)) < 1e-10


def test_random_interaction_seeded():
    a = models.random_interaction(3, 2, seed=5)
    b = models.random_interaction(3, 2, seed=5)
    c = models.random_interaction(3, 2, seed=6)
    assert np.array_equal(a.operators[0], b.operators[0])
    assert not np.allclose(a.operators[0], c.operators[0])
    assert validate_cptp(a).passed


def test_model_argument_checks():
    with pytest.raises(ValueError):
        models.spam_interaction(0)
    with pytest.raises(ValueError):
        models.partial_record_interaction(2, 4.0)
    with pytest.raises(ValueError):
        models.random_interaction(2, 0, seed=1)
    with pytest.raises(BudgetError):
        models.spam_interaction(12)


# -- observer --------------------------------------------------------------------


def test_observer_branches_without_environment_overlap():
    report = models.observer_cat_scenario(0.0)
    assert np.allclose(report.reduced_state.entries, np.diag([0.5, 0, 0, 0.5]), atol=1e-12)
    assert report.max_branch_coherence < 1e-12
    assert np.allclose(report.branch_populations, [0.5, 0.5])


@settings(max_examples=20, deadline=None)
@given(gamma=st.floats(0.0, 1.0))
def test_observer_branch_coherence_scales_with_overlap(gamma):
    report = models.observer_cat_scenario(gamma)
    assert abs(report.max_branch_coherence - gamma / 2) < 1e-12


def test_named_states():
    assert np.allclose(models.named_state("dead").amplitudes, models.named_state("up").amplitudes)
    assert np.allclose(models.named_state("alive").amplitudes, [0, 1])
    with pytest.raises(ValueError):
        models.named_state("sideways")
