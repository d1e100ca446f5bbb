"""Physical scenarios: interferometer, cat and photons, fragment environments.

Every recording process is modelled as a unitary acting on an explicitly
initialised environment, so the resulting maps are CPTP by construction.
A record with overlap ``gamma`` is a qubit left in ``|0>`` on one branch and
rotated to ``Ry(theta)|0>`` on the other, where ``cos(theta/2) = gamma``.

Qubit conventions: ``|up> = |dead> = |sad> = |0>`` and
``|down> = |alive> = |happy> = |1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .channels import KrausChannel, restrict_to_fragment
from .errors import BudgetError, InvariantViolation
from .qcore import (
    DEFAULT_TOL,
    HADAMARD,
    PAULI_X,
    DensityMatrix,
    Ket,
    SubsystemLayout,
    apply_local,
    expectation,
    ket,
    partial_trace,
    project_and_renormalize,
    random_unitary,
    ry,
    tensor,
)

DEFAULT_BUDGET_QUBITS = 12

SQRT_HALF = 1 / math.sqrt(2)
_NAMED = {
    "up": [1, 0],
    "down": [0, 1],
    "right": [SQRT_HALF, SQRT_HALF],
    "left": [SQRT_HALF, -SQRT_HALF],
    "plus": [SQRT_HALF, SQRT_HALF],
    "minus": [SQRT_HALF, -SQRT_HALF],
    "dead": [1, 0],
    "alive": [0, 1],
    "0": [1, 0],
    "1": [0, 1],
}


def named_state(name: str, label: str = "q") -> Ket:
    """Single-qubit state by name (``up``, ``down``, ``right``, ``left``, ``plus``, ...)."""
    try:
        amps = _NAMED[name]
    except KeyError:
        raise ValueError(f"unknown state name {name!r}; choose from {sorted(_NAMED)}") from None
    return ket(amps, SubsystemLayout((2,), (label,)))


def check_budget(n_qubits: int, budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> None:
    if n_qubits > budget_qubits:
        raise BudgetError(f"model needs {n_qubits} qubits, budget is {budget_qubits}")


def record_angle(overlap: float) -> float:
    """Rotation angle giving record states with the requested overlap."""
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return 2.0 * math.acos(overlap)


def controlled(gate: np.ndarray) -> np.ndarray:
    """Two-qubit gate applying ``gate`` to the target when the control is |1>."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = gate
    return out


# 50:50 beam splitter on modes (a, b), photon-number basis |n_a n_b>:
# |1,0> -> (|1,0> + |0,1>)/sqrt2 and |0,1> -> (|0,1> - |1,0>)/sqrt2.
BEAM_SPLITTER = np.array(
    [
        [1, 0, 0, 0],
        [0, SQRT_HALF, SQRT_HALF, 0],
        [0, -SQRT_HALF, SQRT_HALF, 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class InterferometerResult:
    p_detector_A: float
    p_detector_B: float
    pre_bs2_reduced: DensityMatrix
    visibility: float
    postselection_probability: float = 1.0

    def __post_init__(self):
        for p in (self.p_detector_A, self.p_detector_B):
            if not -DEFAULT_TOL <= p <= 1 + DEFAULT_TOL:
                raise InvariantViolation(f"detector probability {p} outside [0, 1]")
        if abs(self.p_detector_A + self.p_detector_B - 1.0) > 1e-9:
            raise InvariantViolation(f"detector probabilities sum to {self.p_detector_A + self.p_detector_B}")


_MZ_LAYOUT = SubsystemLayout((2, 2, 2), ("a", "b", "E"))
_DETECTOR_A = np.diag([0, 0, 1, 0]).astype(complex)  # photon leaves in mode a: |1,0>
_DETECTOR_B = np.diag([0, 1, 0, 0]).astype(complex)  # photon leaves in mode b: |0,1>


def _mz_prepare(detector_on: bool, overlap: float) -> Ket:
    """Photon state between the beam splitters, environment attached."""
    psi = np.zeros(8, dtype=complex)
    psi[np.ravel_multi_index((1, 0, 0), _MZ_LAYOUT.dims)] = 1.0
    psi = apply_local(psi, BEAM_SPLITTER, [0, 1], _MZ_LAYOUT.dims)
    if detector_on:
        # record |a> = |0> for path a, |b> = Ry(theta)|0> for path b
        psi = apply_local(psi, controlled(ry(record_angle(overlap))), [1, 2], _MZ_LAYOUT.dims)
    return Ket(psi, _MZ_LAYOUT)


def _mz_finish(pre: Ket, postselection_probability: float = 1.0) -> InterferometerResult:
    reduced = partial_trace(pre, [0, 1])
    out = apply_local(pre.amplitudes, BEAM_SPLITTER, [0, 1], _MZ_LAYOUT.dims)
    photon = partial_trace(Ket(out, _MZ_LAYOUT), [0, 1])
    p_a = expectation(photon, _DETECTOR_A)
    p_b = expectation(photon, _DETECTOR_B)
    visibility = 2.0 * abs(reduced.entries[2, 1])
    return InterferometerResult(p_a, p_b, reduced, visibility, postselection_probability)


def mach_zehnder(detector_on: bool = True, overlap: float = 0.0) -> InterferometerResult:
    """Single photon through a Mach-Zehnder interferometer.

    With the which-path detector on, the environment ends in ``|a>`` or ``|b>``
    with ``<a|b> = overlap`` and ``P(A) = (1 - overlap) / 2``; without it the
    photon always exits towards detector B.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return _mz_finish(_mz_prepare(detector_on, overlap))


def erase_and_postselect(outcome: Literal["plus", "minus"]) -> InterferometerResult:
    """Project the which-path record onto ``(|a> ± |b>)/sqrt2`` before the second beam splitter."""
    if outcome not in ("plus", "minus"):
        raise ValueError(f"outcome must be 'plus' or 'minus', got {outcome!r}")
    pre = _mz_prepare(True, 0.0)
    # with overlap 0 the records are |a> = |0>, |b> = |1>
    record = HADAMARD[:, 0 if outcome == "plus" else 1]
    proj = np.kron(np.eye(4), np.outer(record, record.conj()))
    post, prob = project_and_renormalize(pre, proj)
    return _mz_finish(post, prob)


def _budgeted_layout(n_env: int, system: str, env_prefix: str, budget_qubits: int) -> SubsystemLayout:
    check_budget(n_env + 1, budget_qubits)
    return SubsystemLayout.qubits(n_env + 1, [system] + [f"{env_prefix}{k}" for k in range(1, n_env + 1)])


def cat_photon_state(n_env: int, overlap: float, initial: Ket | str = "superposition", budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> Ket:
    """Cat plus ``n_env`` photons after every photon has scattered once."""
    if n_env < 0:
        raise ValueError("n_env must be non-negative")
    layout = _budgeted_layout(n_env, "cat", "p", budget_qubits)
    if isinstance(initial, str):
        initial = named_state("right" if initial == "superposition" else initial)
    psi = np.zeros(layout.total_dim, dtype=complex)
    psi[0] = initial.amplitudes[0]
    psi[2**n_env] = initial.amplitudes[1]
    gate = controlled(ry(record_angle(overlap)))
    for k in range(1, n_env + 1):
        psi = apply_local(psi, gate, [0, k], layout.dims)
    return Ket(psi, layout)


def cat_photon(n_env: int, overlap: float = 0.0, budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> DensityMatrix:
    """Reduced cat state after scattering ``n_env`` photons, cat starting in (|dead> + |alive>)/sqrt2.

    Each photon's two record states overlap by ``overlap``, so the remaining
    coherence is ``overlap**n_env / 2``.
    """
    return partial_trace(cat_photon_state(n_env, overlap, budget_qubits=budget_qubits), [0])


def pointer_state_check(initial: Literal["dead", "alive"], n_env: int = 1, overlap: float = 0.0) -> DensityMatrix:
    """Reduced cat state for a pointer-state input; equals the input projector."""
    if initial not in ("dead", "alive"):
        raise ValueError(f"initial must be 'dead' or 'alive', got {initial!r}")
    return partial_trace(cat_photon_state(n_env, overlap, initial), [0])


def _recording_channel(n: int, gates: list[tuple[np.ndarray, list[int]]], budget_qubits: int) -> KrausChannel:
    """Isometry system -> system ⊗ n fragments, fragments starting in |0...0>."""
    layout = _budgeted_layout(n, "S", "F", budget_qubits)
    v = np.zeros((layout.total_dim, 2), dtype=complex)
    v[0, 0] = 1.0
    v[2**n, 1] = 1.0
    for gate, targets in gates:
        v = apply_local(v, gate, targets, layout.dims)
    return KrausChannel((v,), SubsystemLayout((2,), ("S",)), layout, tol=1e-9)


def spam_interaction(n: int, budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> KrausChannel:
    """``|up,0..0> -> |up,0..0>``, ``|down,0..0> -> |down,1..1>`` as a controlled flip per fragment.

    Output layout is ``(S, F1, ..., Fn)``, so fragment ``j`` sits at output position ``j``.
    """
    if n < 1:
        raise ValueError("need at least one fragment")
    cnot = controlled(PAULI_X)
    return _recording_channel(n, [(cnot, [0, j]) for j in range(1, n + 1)], budget_qubits)


def partial_record_interaction(n: int, theta: float, budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> KrausChannel:
    """Each fragment rotated by ``Ry(theta)`` when the system is down.

    ``theta = pi`` reproduces :func:`spam_interaction`; fragment record overlap is ``cos(theta/2)``.
    """
    if n < 1:
        raise ValueError("need at least one fragment")
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    gate = controlled(ry(theta))
    return _recording_channel(n, [(gate, [0, j]) for j in range(1, n + 1)], budget_qubits)


def random_interaction(n: int, depth: int, seed: int, budget_qubits: int = DEFAULT_BUDGET_QUBITS) -> KrausChannel:
    """Seeded random system-environment interaction.

    Each of the ``depth`` layers applies a Haar-random two-qubit unitary to
    the system and every fragment in turn, then to each neighbouring pair
    of fragments ``(F_j, F_j+1)``.
    """
    if n < 1:
        raise ValueError("need at least one fragment")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(depth):
        gates += [(random_unitary(4, rng), [0, j]) for j in range(1, n + 1)]
        gates += [(random_unitary(4, rng), [j, j + 1]) for j in range(1, n)]
    return _recording_channel(n, gates, budget_qubits)


def fragment_marginals(ch: KrausChannel, rho: DensityMatrix) -> list[DensityMatrix]:
    """State of every fragment (output positions 1..n) for input ``rho``."""
    return [restrict_to_fragment(ch, j)(rho) for j in range(1, len(ch.out_layout))]


@dataclass(frozen=True, eq=False)
class BranchReport:
    branch_populations: tuple[float, ...]
    max_branch_coherence: float
    full_state: Ket
    reduced_state: DensityMatrix

    def __post_init__(self):
        if abs(sum(self.branch_populations) - 1.0) > 1e-9:
            raise InvariantViolation(f"branch populations sum to {sum(self.branch_populations)}")
        if self.max_branch_coherence < 0:
            raise InvariantViolation("negative coherence")


def observer_cat_scenario(env_overlap: float) -> BranchReport:
    """Cat, observer and environment after the observer opens the box.

    The observer copies the cat (dead -> sad, alive -> happy); the environment
    records the cat with ``<E_dead|E_alive> = env_overlap``.  Branches are the
    cat-value sectors of the cat ⊗ observer state.
    """
    layout = SubsystemLayout((2, 2, 2), ("cat", "observer", "E"))
    cat = named_state("right", "cat")
    rest = ket([1, 0, 0, 0], SubsystemLayout((2, 2), ("observer", "E")))
    psi = tensor(cat, rest).amplitudes
    psi = apply_local(psi, controlled(PAULI_X), [0, 1], layout.dims)
    psi = apply_local(psi, controlled(ry(record_angle(env_overlap))), [0, 2], layout.dims)
    full = Ket(psi, layout)
    reduced = partial_trace(full, [0, 1])
    cat_value = np.repeat([0, 1], 2)
    pops = tuple(float(np.sum(reduced.entries.diagonal().real[cat_value == c])) for c in (0, 1))
    cross = np.abs(reduced.entries)[np.not_equal.outer(cat_value, cat_value)]
    return BranchReport(pops, float(cross.max()), full, reduced)
