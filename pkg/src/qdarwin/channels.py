"""Quantum channels in operator-sum (Kraus) and Choi form.

Kraus form is the working representation: applying a channel costs one
matrix sandwich per Kraus operator.  The normalised Choi state is derived
on demand and cached on the channel value; it is what channel comparisons
(trace distance, entanglement-breaking test) operate on.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, InvalidStateError
from .qcore import (
    DEFAULT_TOL,
    I2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    HermitianOperator,
    Index,
    Ket,
    SubsystemLayout,
    negativity,
    trace_distance,
)

__all__ = [
    "KrausChannel",
    "ChoiMatrix",
    "Povm",
    "MeasureAndPrepareSpec",
    "ValidationReport",
    "unitary_channel",
    "identity_channel",
    "depolarizing_channel",
    "partial_trace_channel",
    "apply",
    "compose",
    "tensor_channels",
    "validate_cptp",
    "choi_of",
    "choi_to_kraus",
    "restrict_to_fragment",
    "measure_and_prepare",
    "choi_trace_distance",
    "eb_negativity",
    "ppt_is_exact",
]


def _as_layout(layout, dim: int) -> SubsystemLayout:
    if layout is None:
        return SubsystemLayout.infer(dim)
    if isinstance(layout, SubsystemLayout):
        return layout
    return SubsystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map ``rho -> sum_k K rho K^dagger``.

    Each operator has shape ``(out_dim, in_dim)``.  Trace preservation is
    enforced at construction unless ``check=False``; unchecked instances
    exist so that :func:`validate_cptp` can report on invalid sets.
    """

    operators: tuple[np.ndarray, ...]
    in_layout: SubsystemLayout
    out_layout: SubsystemLayout
    check: InitVar[bool] = True
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, check, tol):
        ops = []
        for op in self.operators:
            arr = np.array(op, dtype=complex)
            arr.setflags(write=False)
            ops.append(arr)
        if not ops:
            raise InvalidStateError("a channel needs at least one Kraus operator")
        shape = (self.out_layout.total_dim, self.in_layout.total_dim)
        for op in ops:
            if op.shape != shape:
                raise DimensionError(f"Kraus operator of shape {op.shape}, expected {shape}")
        object.__setattr__(self, "operators", tuple(ops))
        if check:
            dev = _tp_deviation(self.operators)
            if dev > tol:
                raise InvalidStateError(f"Kraus operators are not trace preserving (deviation {dev:.3g})")

    @property
    def in_dim(self) -> int:
        return self.in_layout.total_dim

    @property
    def out_dim(self) -> int:
        return self.out_layout.total_dim

    @property
    def rank(self) -> int:
        return len(self.operators)

    @cached_property
    def stacked(self) -> np.ndarray:
        return np.stack(self.operators)

    @cached_property
    def choi(self) -> "ChoiMatrix":
        return _choi_from_kraus(self)

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply(self, rho)


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Normalised Choi state ``(id ⊗ ch)(|Ω><Ω|)`` over input-copy ⊗ output."""

    state: DensityMatrix
    in_layout: SubsystemLayout
    out_layout: SubsystemLayout
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, tol):
        if self.state.dim != self.in_dim * self.out_dim:
            raise DimensionError("Choi state dimension does not match in_dim * out_dim")
        marg = np.trace(self.state.entries.reshape(self.in_dim, self.out_dim, self.in_dim, self.out_dim), axis1=1, axis2=3)
        if np.max(np.abs(marg - np.eye(self.in_dim) / self.in_dim)) > tol:
            raise InvalidStateError("Choi input marginal is not maximally mixed; map is not trace preserving")

    @property
    def in_dim(self) -> int:
        return self.in_layout.total_dim

    @property
    def out_dim(self) -> int:
        return self.out_layout.total_dim

    @property
    def input_part(self) -> list[int]:
        return list(range(len(self.in_layout)))


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[HermitianOperator, ...]
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, tol):
        elems = []
        for e in self.elements:
            if not isinstance(e, HermitianOperator):
                e = HermitianOperator(np.asarray(e, dtype=complex), SubsystemLayout.infer(np.shape(e)[0]))
            elems.append(e)
        if not elems:
            raise InvalidStateError("POVM needs at least one element")
        layout = elems[0].layout
        if any(e.layout.dims != layout.dims for e in elems):
            raise DimensionError("POVM elements act on different spaces")
        for k, e in enumerate(elems):
            lo = np.linalg.eigvalsh(e.entries)[0]
            if lo < -tol:
                raise InvalidStateError(f"POVM element {k} has negative eigenvalue {lo:.3g}")
        total = sum(e.entries for e in elems)
        if np.max(np.abs(total - np.eye(layout.total_dim))) > tol:
            raise InvalidStateError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(elems))

    @classmethod
    def from_basis(cls, kets: Sequence[Ket]) -> "Povm":
        """Projective measurement onto the given orthonormal kets."""
        return cls(tuple(HermitianOperator(np.outer(k.amplitudes, k.amplitudes.conj()), k.layout) for k in kets))

    @classmethod
    def trivial(cls, layout: SubsystemLayout) -> "Povm":
        return cls((HermitianOperator(np.eye(layout.total_dim), layout),))

    @property
    def layout(self) -> SubsystemLayout:
        return self.elements[0].layout

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True, eq=False)
class MeasureAndPrepareSpec:
    """Measurement ``{M_k}`` followed by preparation of ``prepared[k]`` on outcome k."""

    povm: Povm
    prepared: tuple[DensityMatrix, ...]
    fragment_label: str = ""

    def __post_init__(self):
        prepared = tuple(self.prepared)
        if len(prepared) != len(self.povm):
            raise InvalidStateError(f"{len(prepared)} prepared states for {len(self.povm)} outcomes")
        if any(s.layout.dims != prepared[0].layout.dims for s in prepared):
            raise DimensionError("prepared states must share one layout")
        object.__setattr__(self, "prepared", prepared)


@dataclass(frozen=True)
class ValidationReport:
    tp_deviation: float
    min_choi_eigenvalue: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.tp_deviation <= self.tol and self.min_choi_eigenvalue >= -self.tol

    def __bool__(self) -> bool:
        return self.passed


# -- internals -------------------------------------------------------------


def _tp_deviation(ops: Sequence[np.ndarray]) -> float:
    k = np.stack(ops)
    s = np.einsum("koi,koj->ij", k.conj(), k)
    return float(np.max(np.abs(s - np.eye(s.shape[0]))))


def _choi_layout(in_layout: SubsystemLayout, out_layout: SubsystemLayout) -> SubsystemLayout:
    return SubsystemLayout(
        in_layout.dims + out_layout.dims,
        tuple(f"in:{lab}" for lab in in_layout.labels) + tuple(f"out:{lab}" for lab in out_layout.labels),
    )


def _choi_entries(ops: np.ndarray) -> np.ndarray:
    # (id ⊗ K)|Ω> has components [i, o] = K[o, i] / sqrt(d_in)
    r, d_out, d_in = ops.shape
    vecs = np.transpose(ops, (0, 2, 1)).reshape(r, d_in * d_out) / math.sqrt(d_in)
    j = vecs.T @ vecs.conj()
    return 0.5 * (j + j.conj().T)


def _choi_from_kraus(ch: KrausChannel) -> ChoiMatrix:
    state = DensityMatrix(_choi_entries(ch.stacked), _choi_layout(ch.in_layout, ch.out_layout), tol=1e-8)
    return ChoiMatrix(state, ch.in_layout, ch.out_layout, tol=1e-8)


def _kraus_from_choi_entries(j: np.ndarray, d_in: int, d_out: int, cutoff: float = 1e-14) -> list[np.ndarray]:
    w, v = np.linalg.eigh(d_in * j)
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= cutoff:
            break
        ops.append(math.sqrt(lam) * vec.reshape(d_in, d_out).T)
    return ops


def _compressed(ops: list[np.ndarray], in_layout, out_layout, compress: bool) -> KrausChannel:
    d_in, d_out = in_layout.total_dim, out_layout.total_dim
    if compress and len(ops) > d_in * d_out:
        ops = _kraus_from_choi_entries(_choi_entries(np.stack(ops)), d_in, d_out)
    return KrausChannel(tuple(ops), in_layout, out_layout, tol=1e-9)


# -- constructors ----------------------------------------------------------


def unitary_channel(u, in_layout=None, out_layout=None, tol: float = DEFAULT_TOL) -> KrausChannel:
    """Channel ``rho -> U rho U^dagger``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"unitary must be square, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol:
        raise InvalidStateError("matrix is not unitary")
    in_layout = _as_layout(in_layout, u.shape[1])
    out_layout = _as_layout(out_layout, u.shape[0]) if out_layout is not None else in_layout
    return KrausChannel((u,), in_layout, out_layout, tol=tol)


def identity_channel(layout: SubsystemLayout) -> KrausChannel:
    return KrausChannel((np.eye(layout.total_dim),), layout, layout)


def depolarizing_channel() -> KrausChannel:
    """Fully depolarising qubit channel; every input maps to I/2."""
    layout = SubsystemLayout.qubits(1)
    return KrausChannel(tuple(p / 2 for p in (I2, PAULI_X, PAULI_Y, PAULI_Z)), layout, layout)


def partial_trace_channel(layout: SubsystemLayout, keep: Iterable[Index]) -> KrausChannel:
    """The map ``rho -> Tr_{not keep}(rho)`` as a Kraus channel."""
    idx = layout.indices(keep)
    if not idx:
        raise DimensionError("keep set must be non-empty")
    rest = [i for i in range(len(layout)) if i not in idx]
    d = layout.total_dim
    dk = math.prod(layout.dims[i] for i in idx)
    rows = np.eye(d, dtype=complex).reshape(layout.dims + (d,))
    rows = np.transpose(rows, idx + rest + [len(layout)]).reshape(dk, -1, d)
    ops = tuple(rows[:, r, :] for r in range(rows.shape[1]))
    return KrausChannel(ops, layout, layout.subset(idx))


# -- operations ------------------------------------------------------------


def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if rho.layout.dims != ch.in_layout.dims:
        raise DimensionError(f"state layout {rho.layout.dims} does not match channel input {ch.in_layout.dims}")
    k = ch.stacked
    out = np.einsum("koi,ij,klj->ol", k, rho.entries, k.conj(), optimize=True)
    return DensityMatrix(0.5 * (out + out.conj().T), ch.out_layout, tol=1e-9)


def compose(f: KrausChannel, g: KrausChannel, compress: bool = True) -> KrausChannel:
    """``f ∘ g``: ``g`` acts first.

    The Kraus set is every product ``F_i G_j``.  When that set is larger than
    ``in_dim * out_dim`` it is replaced by the minimal equivalent set obtained
    from the Choi spectrum (``compress=False`` keeps the raw products).
    """
    if g.out_layout.dims != f.in_layout.dims:
        raise DimensionError(f"cannot compose: {g.out_layout.dims} feeds into {f.in_layout.dims}")
    ops = [fi @ gj for fi in f.operators for gj in g.operators]
    return _compressed(ops, g.in_layout, f.out_layout, compress)


def tensor_channels(f: KrausChannel, g: KrausChannel) -> KrausChannel:
    ops = tuple(np.kron(fi, gj) for fi in f.operators for gj in g.operators)
    return KrausChannel(ops, f.in_layout.concat(g.in_layout), f.out_layout.concat(g.out_layout), tol=1e-9)


def validate_cptp(ch: KrausChannel, tol: float = DEFAULT_TOL) -> ValidationReport:
    j = _choi_entries(ch.stacked)
    return ValidationReport(
        tp_deviation=_tp_deviation(ch.operators),
        min_choi_eigenvalue=float(np.linalg.eigvalsh(j)[0]),
        tol=tol,
    )


def choi_of(ch: KrausChannel) -> ChoiMatrix:
    return ch.choi


def choi_to_kraus(choi: ChoiMatrix) -> KrausChannel:
    """Minimal Kraus set reconstructed from the Choi spectrum."""
    ops = _kraus_from_choi_entries(choi.state.entries, choi.in_dim, choi.out_dim)
    return KrausChannel(tuple(ops), choi.in_layout, choi.out_layout, tol=1e-9)


def restrict_to_fragment(global_channel: KrausChannel, j: Index, compress: bool = True) -> KrausChannel:
    """The channel from the input to output subsystem ``j`` alone.

    Equal to ``compose(partial_trace_channel(out, [j]), global_channel)``,
    evaluated without materialising the partial-trace Kraus set: each
    global Kraus operator is split along the traced-out output factors.
    """
    out = global_channel.out_layout
    idx = out.index(j)
    rest = [i for i in range(len(out)) if i != idx]
    d_in = global_channel.in_dim
    dj = out.dims[idx]
    k = global_channel.stacked.reshape((global_channel.rank,) + out.dims + (d_in,))
    # (rank, fragment, rest..., in) -> (rank * rest, fragment, in)
    k = np.transpose(k, [0, idx + 1] + [i + 1 for i in rest] + [len(out) + 1])
    k = k.reshape(global_channel.rank, dj, -1, d_in)
    ops = [k[a, :, r, :] for a in range(k.shape[0]) for r in range(k.shape[2])]
    return _compressed(ops, global_channel.in_layout, out.subset([idx]), compress)


def measure_and_prepare(spec: MeasureAndPrepareSpec) -> KrausChannel:
    """Entanglement-breaking channel ``rho -> sum_k Tr(M_k rho) sigma_k``.

    Kraus operators are ``sqrt(m_a s_b) |f_b><e_a|`` where ``M_k = sum m_a |e_a><e_a|``
    and ``sigma_k = sum s_b |f_b><f_b|`` are spectral decompositions.
    """
    ops = []
    for m, sigma in zip(spec.povm.elements, spec.prepared):
        mw, mv = np.linalg.eigh(m.entries)
        sw, sv = np.linalg.eigh(sigma.entries)
        for a in np.nonzero(mw > 1e-14)[0]:
            for b in np.nonzero(sw > 1e-14)[0]:
                ops.append(math.sqrt(mw[a] * sw[b]) * np.outer(sv[:, b], mv[:, a].conj()))
    return KrausChannel(tuple(ops), spec.povm.layout, spec.prepared[0].layout, tol=1e-9)


def choi_trace_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Trace distance between normalised Choi states.

    Bounds the diamond distance ``D`` as ``choi <= D <= in_dim * choi``.
    """
    if a.in_layout.dims != b.in_layout.dims or a.out_layout.dims != b.out_layout.dims:
        raise DimensionError("channels act between different spaces")
    return trace_distance(a.choi.state, b.choi.state)


def eb_negativity(ch: KrausChannel) -> float:
    """Negativity of the Choi state across the input|output cut."""
    return negativity(ch.choi.state, ch.choi.input_part)


def ppt_is_exact(ch: KrausChannel) -> bool:
    """Whether zero Choi negativity certifies entanglement breaking (2⊗2 and 2⊗3 only)."""
    return ch.in_dim * ch.out_dim <= 6
