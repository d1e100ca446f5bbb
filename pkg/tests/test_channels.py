"""Kraus channels, Choi states and entanglement-breaking checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdarwin import channels as ch
from qdarwin.errors import DimensionError, InvalidStateError
from qdarwin.models import named_state, spam_interaction
from qdarwin.qcore import (
    HADAMARD,
    SubsystemLayout,
    bloch_ket,
    maximally_mixed,
    random_density,
    random_unitary,
)

Q1 = SubsystemLayout.qubits(1)


def random_channel(rng, d_in=2, d_out=2, rank=3):
    """Stinespring construction: random isometry into out ⊗ env, split along env."""
    rank = max(rank, -(-d_in // d_out))  # the isometry needs d_out * rank >= d_in
    u = random_unitary(d_out * rank, rng)[:, :d_in]
    ops = u.reshape(d_out, rank, d_in).transpose(1, 0, 2)
    return ch.KrausChannel(tuple(ops), SubsystemLayout.infer(d_in), SubsystemLayout.infer(d_out))


def amplitude_damping(gamma):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return ch.KrausChannel((k0, k1), Q1, Q1)


# -- construction and validation --------------------------------------------


def test_rejects_non_trace_preserving():
    with pytest.raises(InvalidStateError):
        ch.KrausChannel((0.9 * np.eye(2),), Q1, Q1)


def test_validation_report_of_scaled_identity():
    bad = ch.KrausChannel((0.9 * np.eye(2),), Q1, Q1, check=False)
    report = ch.validate_cptp(bad)
    assert not report.passed
    assert abs(report.tp_deviation - 0.19) < 1e-12


def test_validation_passes_for_valid_channel(rng):
    assert ch.validate_cptp(random_channel(rng)).passed


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        ch.KrausChannel((np.eye(3),), Q1, Q1)


def test_apply_shape_mismatch():
    with pytest.raises(DimensionError):
        ch.apply(ch.identity_channel(Q1), maximally_mixed([2, 2]))


# -- actions ------------------------------------------------------------------


def test_unitary_channel():
    out = ch.unitary_channel(HADAMARD)(named_state("up").density())
    assert np.allclose(out.entries, np.full((2, 2), 0.5))


def test_depolarizing_maps_everything_to_mixed(rng):
    out = ch.depolarizing_channel()(random_density([2], rng))
    assert np.allclose(out.entries, np.eye(2) / 2)


def test_amplitude_damping_fixed_point():
    out = amplitude_damping(1.0)(named_state("down").density())
    assert np.allclose(out.entries, np.diag([1, 0]))


def test_partial_trace_channel_matches_partial_trace(rng):
    from qdarwin.qcore import partial_trace

    lay = SubsystemLayout((2, 3, 2), ("a", "b", "c"))
    rho = random_density(lay, rng)
    ptc = ch.partial_trace_channel(lay, ["a", "c"])
    assert np.allclose(ptc(rho).entries, partial_trace(rho, [0, 2]).entries)


# -- Choi ----------------------------------------------------------------------


def test_identity_choi_is_maximally_entangled():
    j = ch.choi_of(ch.identity_channel(Q1)).state.entries
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(j, np.outer(bell, bell))


def test_choi_input_marginal_enforced():
    from qdarwin.qcore import density

    bad = density(np.diag([1.0, 0, 0, 0]))
    with pytest.raises(InvalidStateError):
        ch.ChoiMatrix(bad, Q1, Q1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d_in=st.integers(1, 3), d_out=st.integers(1, 3), rank=st.integers(1, 4))
def test_choi_round_trip(seed, d_in, d_out, rank):
    rng = np.random.default_rng(seed)
    original = random_channel(rng, d_in, d_out, rank)
    rebuilt = ch.choi_to_kraus(original.choi)
    assert rebuilt.rank <= d_in * d_out
    assert np.allclose(rebuilt.choi.state.entries, original.choi.state.entries, atol=1e-10)
    rho = random_density(SubsystemLayout.infer(d_in), rng)
    assert np.allclose(rebuilt(rho).entries, original(rho).entries, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_choi_is_valid_state(seed):
    rng = np.random.default_rng(seed)
    j = random_channel(rng, 2, 3).choi.state.entries
    assert abs(np.trace(j) - 1) < 1e-12
    assert np.linalg.eigvalsh(j)[0] > -1e-12


# -- composition ---------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), compress=st.booleans())
def test_compose_equals_sequential(seed, compress):
    rng = np.random.default_rng(seed)
    f, g = random_channel(rng, 2, 2, 3), random_channel(rng, 2, 2, 4)
    rho = random_density([2], rng)
    fg = ch.compose(f, g, compress=compress)
    assert np.allclose(fg(rho).entries, f(g(rho)).entries, atol=1e-10)
    assert fg.rank == (4 if compress else 12)


def test_compose_dimension_check(rng):
    with pytest.raises(DimensionError):
        ch.compose(random_channel(rng, 3, 2), random_channel(rng, 2, 2))


def test_tensor_channels(rng):
    f, g = random_channel(rng), random_channel(rng)
    a, b = random_density([2], rng), random_density([2], rng)
    from qdarwin.qcore import tensor

    out = ch.tensor_channels(f, g)(tensor(a, b))
    assert np.allclose(out.entries, np.kron(f(a).entries, g(b).entries))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_restrict_matches_partial_trace_composition(n):
    glob = spam_interaction(n)
    for j in range(n + 1):
        fused = ch.restrict_to_fragment(glob, j)
        slow = ch.compose(ch.partial_trace_channel(glob.out_layout, [j]), glob)
        assert np.allclose(fused.choi.state.entries, slow.choi.state.entries, atol=1e-12)


# -- POVMs and measure-and-prepare ----------------------------------------------


def test_povm_validation():
    with pytest.raises(InvalidStateError):
        ch.Povm((np.diag([1, 0]), np.diag([0, 0.5])))
    with pytest.raises(InvalidStateError):
        ch.Povm((np.diag([1.5, 0]), np.diag([-0.5, 1])))
    assert len(ch.Povm.trivial(Q1)) == 1


def _z_measure_prepare(sigma0, sigma1):
    povm = ch.Povm.from_basis([named_state("up"), named_state("down")])
    return ch.measure_and_prepare(ch.MeasureAndPrepareSpec(povm, (sigma0, sigma1)))


def test_measure_and_prepare_action(rng):
    s0, s1 = random_density([2], rng), random_density([2], rng)
    mp = _z_measure_prepare(s0, s1)
    rho = random_density([2], rng)
    expected = rho.entries[0, 0].real * s0.entries + rho.entries[1, 1].real * s1.entries
    assert np.allclose(mp(rho).entries, expected)


def test_measure_and_prepare_is_separable(rng):
    mp = _z_measure_prepare(bloch_ket([1, 0, 0]).density(), random_density([2], rng))
    assert ch.eb_negativity(mp) < 1e-12
    assert ch.ppt_is_exact(mp)


def test_identity_is_not_entanglement_breaking():
    assert abs(ch.eb_negativity(ch.identity_channel(Q1)) - 0.5) < 1e-12


def test_ppt_exactness_by_dimension():
    assert ch.ppt_is_exact(ch.identity_channel(Q1))
    assert not ch.ppt_is_exact(ch.identity_channel(SubsystemLayout((3,))))


def test_mp_spec_length_mismatch():
    povm = ch.Povm.from_basis([named_state("up"), named_state("down")])
    with pytest.raises(InvalidStateError):
        ch.MeasureAndPrepareSpec(povm, (maximally_mixed([2]),))


def test_choi_trace_distance():
    ident = ch.identity_channel(Q1)
    assert ch.choi_trace_distance(ident, ident) < 1e-12
    # Choi of full depolarisation is I/4; against the Bell projector the distance is 3/4
    assert abs(ch.choi_trace_distance(ident, ch.depolarizing_channel()) - 0.75) < 1e-12
