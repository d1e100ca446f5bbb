"""Dense states and operators over explicit tensor-product layouts.

Index convention: the first subsystem of a layout is the most significant
factor of the composite index (big-endian), so for two qubits the basis
order is ``|00>, |01>, |10>, |11>``.  Every multipartite routine in the
package relies on this single convention.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionError, InvalidStateError, PostSelectionError

DEFAULT_TOL = 1e-10
EIGEN_CLAMP = 1e-12
# Above this dimension the constructor skips the O(d^3) positivity check.
PSD_CHECK_MAX_DIM = 1024

Index = Union[int, str]


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered local dimensions and display labels of a composite system."""

    dims: tuple[int, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("layout needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 1, got {dims}")
        labels = tuple(str(lab) for lab in self.labels) or tuple(f"s{i}" for i in range(len(dims)))
        if len(labels) != len(dims):
            raise DimensionError("one label per subsystem required")
        if len(set(labels)) != len(labels):
            raise DimensionError(f"labels must be unique, got {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def qubits(cls, n: int, labels: Sequence[str] | None = None) -> "SubsystemLayout":
        return cls((2,) * n, tuple(labels) if labels else ())

    @classmethod
    def infer(cls, dim: int) -> "SubsystemLayout":
        """Qubit register when ``dim`` is a power of two, else one subsystem."""
        n = int(round(math.log2(dim))) if dim > 1 else 0
        if dim > 1 and 2**n == dim:
            return cls.qubits(n)
        return cls((dim,))

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def index(self, key: Index) -> int:
        if isinstance(key, str):
            try:
                return self.labels.index(key)
            except ValueError:
                raise DimensionError(f"no subsystem labelled {key!r}") from None
        key = int(key)
        if not 0 <= key < len(self.dims):
            raise DimensionError(f"subsystem index {key} out of range for {len(self.dims)} subsystems")
        return key

    def indices(self, keys: Iterable[Index]) -> list[int]:
        """Resolve indices or labels to sorted, de-duplicated positions."""
        return sorted({self.index(k) for k in keys})

    def subset(self, keys: Iterable[Index]) -> "SubsystemLayout":
        idx = self.indices(keys)
        return SubsystemLayout(tuple(self.dims[i] for i in idx), tuple(self.labels[i] for i in idx))

    def concat(self, other: "SubsystemLayout") -> "SubsystemLayout":
        labels = self.labels + other.labels
        if len(set(labels)) != len(labels):
            labels = ()
        return SubsystemLayout(self.dims + other.dims, labels)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _layout_for(dim: int, layout: SubsystemLayout | Sequence[int] | None) -> SubsystemLayout:
    if layout is None:
        return SubsystemLayout.infer(dim)
    if not isinstance(layout, SubsystemLayout):
        layout = SubsystemLayout(tuple(layout))
    return layout


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray
    layout: SubsystemLayout
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, tol):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != self.layout.total_dim:
            raise DimensionError(f"{amps.size} amplitudes for layout of dimension {self.layout.total_dim}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > tol:
            raise InvalidStateError(f"ket norm {norm} differs from 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    layout: SubsystemLayout
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, tol):
        rho = _frozen(self.entries)
        d = self.layout.total_dim
        if rho.shape != (d, d):
            raise DimensionError(f"matrix of shape {rho.shape} for layout of dimension {d}")
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(rho)
        if abs(tr - 1.0) > tol:
            raise InvalidStateError(f"density matrix trace {tr.real:.3g} differs from 1")
        if d <= PSD_CHECK_MAX_DIM:
            lo = np.linalg.eigvalsh(rho)[0]
            if lo < -tol:
                raise InvalidStateError(f"density matrix has negative eigenvalue {lo:.3g}")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.layout.total_dim


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    entries: np.ndarray
    layout: SubsystemLayout
    tol: InitVar[float] = DEFAULT_TOL

    def __post_init__(self, tol):
        m = _frozen(self.entries)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise DimensionError(f"matrix of shape {m.shape} for layout of dimension {d}")
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise InvalidStateError("operator is not Hermitian")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.layout.total_dim


# -- constructors ----------------------------------------------------------


def ket(amplitudes, layout: SubsystemLayout | Sequence[int] | None = None, normalize: bool = True) -> Ket:
    """Build a :class:`Ket`, normalising the amplitudes unless told not to."""
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if normalize:
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidStateError("cannot normalise the zero vector")
        amps = amps / norm
    return Ket(amps, _layout_for(amps.size, layout))


def basis_ket(index: int | Sequence[int], layout: SubsystemLayout | Sequence[int]) -> Ket:
    """Computational basis ket, given a flat index or one digit per subsystem."""
    layout = _layout_for(0, layout)
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[index] = 1.0
    return Ket(amps, layout)


def density(state, layout: SubsystemLayout | Sequence[int] | None = None) -> DensityMatrix:
    """Density matrix from a Ket, a state vector or a square matrix."""
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, Ket):
        return state.density()
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return ket(arr, layout, normalize=False).density()
    return DensityMatrix(arr, _layout_for(arr.shape[0], layout))


def operator(matrix, layout: SubsystemLayout | Sequence[int] | None = None) -> HermitianOperator:
    m = np.asarray(matrix, dtype=complex)
    return HermitianOperator(m, _layout_for(m.shape[0], layout))


def maximally_mixed(layout: SubsystemLayout | Sequence[int]) -> DensityMatrix:
    layout = _layout_for(0, layout)
    d = layout.total_dim
    return DensityMatrix(np.eye(d) / d, layout)


def projector(state: Ket) -> HermitianOperator:
    return HermitianOperator(np.outer(state.amplitudes, state.amplitudes.conj()), state.layout)


# Single-qubit building blocks.  ``UP``/``DOWN`` coincide with ``|0>``/``|1>``.
I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def ry(theta: float) -> np.ndarray:
    """Real rotation ``exp(-i theta Y / 2)``; maps |0> to cos(theta/2)|0> + sin(theta/2)|1>."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def bloch_ket(direction: Sequence[float]) -> Ket:
    """Pure qubit state with the given Bloch vector (normalised internally)."""
    x, y, z = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    theta = math.acos(max(-1.0, min(1.0, z)))
    phi = math.atan2(y, x)
    return ket([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], SubsystemLayout.qubits(1))


# -- tensor-index kernels --------------------------------------------------


def apply_local(vec: np.ndarray, gate: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Apply ``gate`` to the ``targets`` factors of a state vector.

    ``vec`` may carry trailing batch axes (shape ``(D, ...)``); each column is
    transformed independently.  ``targets`` are listed in the order matching
    the gate's own big-endian factor order.
    """
    dims = tuple(dims)
    targets = list(targets)
    k = len(targets)
    batch = vec.shape[1:]
    t = np.asarray(vec).reshape(dims + batch)
    g = np.asarray(gate).reshape([dims[i] for i in targets] * 2)
    out = np.tensordot(g, t, axes=(list(range(k, 2 * k)), targets))
    out = np.moveaxis(out, list(range(k)), targets)
    return out.reshape(vec.shape)


def embed(gate: np.ndarray, targets: Sequence[int], layout: SubsystemLayout) -> np.ndarray:
    """Full matrix of ``gate`` acting on ``targets`` and identity elsewhere."""
    d = layout.total_dim
    return apply_local(np.eye(d, dtype=complex), gate, targets, layout.dims)


def _ptrace_matrix(mat: np.ndarray, dims: tuple[int, ...], keep: list[int]) -> np.ndarray:
    n = len(dims)
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    dk = math.prod(dims[i] for i in keep)
    return np.einsum(mat.reshape(dims + dims), rows + cols, out).reshape(dk, dk)


def _ptrace_vector(vec: np.ndarray, dims: tuple[int, ...], keep: list[int]) -> np.ndarray:
    rest = [i for i in range(len(dims)) if i not in keep]
    dk = math.prod(dims[i] for i in keep)
    m = np.transpose(vec.reshape(dims), keep + rest).reshape(dk, -1)
    return m @ m.conj().T


# -- operations ------------------------------------------------------------


def tensor(a, b):
    """Kronecker product of two objects of the same kind."""
    if type(a) is not type(b):
        raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    layout = a.layout.concat(b.layout)
    if isinstance(a, Ket):
        return Ket(np.kron(a.amplitudes, b.amplitudes), layout)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries), layout)
    if isinstance(a, HermitianOperator):
        return HermitianOperator(np.kron(a.entries, b.entries), layout)
    raise TypeError(f"unsupported operand {type(a).__name__}")


def tensor_all(items: Sequence):
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def partial_trace(rho: DensityMatrix | Ket, keep: Iterable[Index]) -> DensityMatrix:
    """Reduced state on the ``keep`` subsystems, in their original order.

    Pure states are reduced directly from the amplitude vector, which keeps
    memory linear in the Hilbert-space dimension.
    """
    keep = list(keep)
    if not keep:
        raise DimensionError("keep set must be non-empty")
    layout = rho.layout
    idx = layout.indices(keep)
    if isinstance(rho, Ket):
        reduced = _ptrace_vector(rho.amplitudes, layout.dims, idx)
    else:
        reduced = _ptrace_matrix(rho.entries, layout.dims, idx)
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityMatrix(reduced, layout.subset(idx))


def _matrix(x) -> np.ndarray:
    return x.entries if hasattr(x, "entries") else np.asarray(x, dtype=complex)


def expectation(rho: DensityMatrix, m, tol: float = DEFAULT_TOL) -> float:
    """``Tr(rho M)`` for a Hermitian observable ``M``."""
    mat = _matrix(m)
    if mat.shape != rho.entries.shape:
        raise DimensionError(f"observable shape {mat.shape} vs state shape {rho.entries.shape}")
    value = np.einsum("ij,ji->", rho.entries, mat)
    if abs(value.imag) > tol:
        raise InvalidStateError(f"expectation has imaginary part {value.imag:.3g}; observable not Hermitian?")
    return float(value.real)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.entries.shape != sigma.entries.shape:
        raise DimensionError(f"shapes {rho.entries.shape} and {sigma.entries.shape} differ")
    diff = rho.entries - sigma.entries
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def _entropy_of_spectrum(eigs: np.ndarray) -> float:
    eigs = np.where(eigs < EIGEN_CLAMP, 0.0, eigs)
    nz = eigs[eigs > 0]
    return float(-np.sum(nz * np.log2(nz)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits."""
    return _entropy_of_spectrum(np.linalg.eigvalsh(rho.entries))


def mutual_information(rho: DensityMatrix, part_a: Iterable[Index], part_b: Iterable[Index]) -> float:
    """``S(A) + S(B) - S(AB)`` in bits for a bipartition of all subsystems of ``rho``."""
    a = rho.layout.indices(part_a)
    b = rho.layout.indices(part_b)
    if not a or not b:
        raise DimensionError("both parts must be non-empty")
    if set(a) & set(b):
        raise DimensionError(f"parts overlap: {sorted(set(a) & set(b))}")
    if len(a) + len(b) != len(rho.layout):
        raise DimensionError("parts must cover every subsystem")
    s_a = von_neumann_entropy(partial_trace(rho, a))
    s_b = von_neumann_entropy(partial_trace(rho, b))
    return s_a + s_b - von_neumann_entropy(rho)


def purity(rho: DensityMatrix) -> float:
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho.entries) ** 2))


def partial_transpose(rho: DensityMatrix | HermitianOperator, part: Iterable[Index]) -> HermitianOperator:
    layout = rho.layout
    idx = layout.indices(part)
    n = len(layout)
    t = rho.entries.reshape(layout.dims + layout.dims)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    d = layout.total_dim
    return HermitianOperator(np.transpose(t, axes).reshape(d, d), layout)


def negativity(rho: DensityMatrix, part: Iterable[Index]) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    eigs = np.linalg.eigvalsh(partial_transpose(rho, part).entries)
    return float(np.sum(np.abs(eigs[eigs < 0])))


def povm_probabilities(rho: DensityMatrix, povm, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Outcome probabilities ``Tr(M_k rho)`` for each POVM element."""
    elements = getattr(povm, "elements", povm)
    probs = np.array([expectation(rho, m, tol) for m in elements])
    if abs(probs.sum() - 1.0) > tol or probs.min() < -tol:
        raise InvalidStateError(f"POVM probabilities {probs} are not a distribution")
    return probs


def project_and_renormalize(psi: Ket, proj, tol: float = DEFAULT_TOL) -> tuple[Ket, float]:
    """Post-select ``psi`` on a projector; returns the conditional state and its probability."""
    p = _matrix(proj)
    if p.shape != (psi.dim, psi.dim):
        raise DimensionError(f"projector shape {p.shape} vs ket dimension {psi.dim}")
    if np.max(np.abs(p @ p - p)) > tol:
        raise InvalidStateError("operator is not idempotent")
    phi = p @ psi.amplitudes
    prob = float(np.vdot(phi, phi).real)
    if prob < tol:
        raise PostSelectionError(f"post-selection probability {prob:.3g} is zero")
    return Ket(phi / math.sqrt(prob), psi.layout), prob


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    w, v = np.linalg.eigh(rho.entries)
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = np.linalg.eigvalsh(sq @ sigma.entries @ sq)
    return float(np.sum(np.sqrt(np.clip(inner, 0, None))) ** 2)


# -- random instances ------------------------------------------------------


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary: QR of a complex Gaussian matrix with the phase fix on R's diagonal."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def random_ket(layout: SubsystemLayout | Sequence[int], rng: np.random.Generator) -> Ket:
    layout = _layout_for(0, layout)
    d = layout.total_dim
    return ket(rng.standard_normal(d) + 1j * rng.standard_normal(d), layout)


def random_density(layout: SubsystemLayout | Sequence[int], rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed mixed state of the given rank (full rank by default)."""
    layout = _layout_for(0, layout)
    d = layout.total_dim
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, layout)


def random_observable(layout: SubsystemLayout | Sequence[int], rng: np.random.Generator) -> HermitianOperator:
    layout = _layout_for(0, layout)
    d = layout.total_dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianOperator((g + g.conj().T) / 2, layout)
