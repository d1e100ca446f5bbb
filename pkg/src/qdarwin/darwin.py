"""Objectivity diagnostics over fragmented environments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Literal, Sequence

import numpy as np

from .channels import (
    KrausChannel,
    MeasureAndPrepareSpec,
    Povm,
    eb_negativity,
    ppt_is_exact,
    restrict_to_fragment,
)
from .errors import DimensionError
from .models import DEFAULT_BUDGET_QUBITS, check_budget, random_interaction, spam_interaction
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    Index,
    Ket,
    SubsystemLayout,
    bloch_ket,
    fidelity,
    mutual_information,
    partial_trace,
    purity,
    trace_distance,
    von_neumann_entropy,
)

MAX_SUBSETS = 200
GOLDEN = (math.sqrt(5) - 1) / 2


# -- information curves ----------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    m: int
    mean_information: float
    samples: int
    stderr: float = 0.0


@dataclass(frozen=True)
class InfoCurve:
    points: tuple[CurvePoint, ...]
    system_entropy: float

    @property
    def n(self) -> int:
        return self.points[-1].m

    @property
    def information(self) -> np.ndarray:
        return np.array([p.mean_information for p in self.points])


def _fragment_subsets(fragments: list[int], m: int, rng: np.random.Generator, max_subsets: int):
    if math.comb(len(fragments), m) <= max_subsets:
        return [list(c) for c in combinations(fragments, m)]
    return [sorted(rng.choice(fragments, size=m, replace=False).tolist()) for _ in range(max_subsets)]


def fragment_information_curve(
    global_state: DensityMatrix | Ket,
    system: Index = 0,
    max_subsets: int = MAX_SUBSETS,
    seed: int = 0,
) -> InfoCurve:
    """Mean mutual information between the system and fragment subsets of each size.

    Subsets of size ``m`` are enumerated exhaustively when there are at most
    ``max_subsets`` of them; otherwise ``max_subsets`` are drawn uniformly with
    a generator seeded by ``seed``.
    """
    layout = global_state.layout
    if len(layout) < 2:
        raise DimensionError("need a system and at least one fragment")
    sys_idx = layout.index(system)
    fragments = [i for i in range(len(layout)) if i != sys_idx]
    rng = np.random.default_rng(seed)
    s_sys = von_neumann_entropy(partial_trace(global_state, [sys_idx]))
    points = [CurvePoint(0, 0.0, 1)]
    for m in range(1, len(fragments) + 1):
        values = []
        for subset in _fragment_subsets(fragments, m, rng, max_subsets):
            reduced = partial_trace(global_state, [sys_idx] + subset)
            pos_sys = sorted([sys_idx] + subset).index(sys_idx)
            rest = [k for k in range(m + 1) if k != pos_sys]
            values.append(mutual_information(reduced, [pos_sys], rest))
        values = np.array(values)
        stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        points.append(CurvePoint(m, float(values.mean()), len(values), stderr))
    return InfoCurve(tuple(points), s_sys)


def redundancy(curve: InfoCurve, delta: float) -> float:
    """``n / m_delta``, with ``m_delta`` the smallest fragment size holding ``(1 - delta) S(system)``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if curve.system_entropy <= 1e-12:
        raise ValueError("system entropy is zero; redundancy undefined")
    target = (1.0 - delta) * curve.system_entropy
    for p in curve.points[1:]:
        if p.mean_information >= target - 1e-12:
            return curve.n / p.m
    raise ValueError(f"information never reaches {target:.4g} bits")


# -- pointer sieve ---------------------------------------------------------


def fibonacci_sphere(count: int) -> np.ndarray:
    """``count`` near-uniform unit vectors; the first and last are the poles."""
    i = np.arange(count)
    z = 1.0 - 2.0 * i / (count - 1)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True)
class SieveResult:
    directions: np.ndarray  # (count, 3) Bloch vectors
    purities: np.ndarray
    argmax: np.ndarray  # Bloch vectors within 1e-9 of the best purity

    @property
    def max_purity(self) -> float:
        return float(self.purities.max())


def _system_channel(ch: KrausChannel, system: Index) -> KrausChannel:
    if ch.in_dim != 2:
        raise DimensionError(f"pointer sieve needs a qubit system, got input dimension {ch.in_dim}")
    reduced = restrict_to_fragment(ch, system) if len(ch.out_layout) > 1 else ch
    if reduced.out_dim != 2:
        raise DimensionError("system output is not a qubit")
    return reduced


def sieve_purity(ch: KrausChannel, direction: Sequence[float], system: Index = 0) -> float:
    """Purity of the system after ``ch`` for the pure input with Bloch vector ``direction``."""
    return purity(_system_channel(ch, system)(bloch_ket(direction).density()))


def pointer_sieve(ch: KrausChannel, resolution: int = 64, system: Index = 0) -> SieveResult:
    """Post-interaction system purity over a Fibonacci grid of pure qubit inputs."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    sys_ch = _system_channel(ch, system)
    dirs = fibonacci_sphere(resolution)
    purities = np.array([purity(sys_ch(bloch_ket(v).density())) for v in dirs])
    best = purities.max()
    return SieveResult(dirs, purities, dirs[purities >= best - 1e-9])


# -- measure-and-prepare fitting -------------------------------------------


def _basis_projectors(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    up = bloch_ket(direction).amplitudes
    down = np.array([-np.conj(up[1]), np.conj(up[0])])
    return np.outer(up, up.conj()), np.outer(down, down.conj())


def _apply_raw(k: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.einsum("koi,ij,klj->ol", k, rho, k.conj())


def _mp_choi(povm: Sequence[np.ndarray], prepared: Sequence[np.ndarray]) -> np.ndarray:
    # normalised Choi state of rho -> sum_k Tr(M_k rho) sigma_k is sum_k M_k^T ⊗ sigma_k / d_in
    d_in = povm[0].shape[0]
    return sum(np.kron(m.T, s) for m, s in zip(povm, prepared)) / d_in


def _choi_distance(j_a: np.ndarray, j_b: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(j_a - j_b))))


def _polar(v: np.ndarray) -> tuple[float, float]:
    return math.acos(max(-1.0, min(1.0, v[2]))), math.atan2(v[1], v[0])


def _cartesian(theta: float, phi: float) -> np.ndarray:
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def _golden_section(f, lo: float, hi: float, iterations: int = 40) -> tuple[float, float]:
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def mp_fit(lambda_j: KrausChannel, resolution: int = 64) -> tuple[MeasureAndPrepareSpec, float]:
    """Closest measure-and-prepare channel within the projective qubit family.

    Candidate bases come from a Fibonacci grid of Bloch directions plus the
    three coordinate axes; the prepared states are the channel's own outputs
    on the basis projectors.  The best grid direction gets one golden-section
    pass in polar angle and one in azimuth.  The single-outcome measurement
    (a constant channel) is also a candidate.  Returns the spec and its Choi
    trace distance to ``lambda_j``.
    """
    if lambda_j.in_dim != 2 or lambda_j.out_dim != 2:
        raise DimensionError("mp_fit needs a qubit-to-qubit channel")
    k = lambda_j.stacked
    target = lambda_j.choi.state.entries

    def distance(direction: np.ndarray) -> float:
        povm = _basis_projectors(direction)
        return _choi_distance(target, _mp_choi(povm, [_apply_raw(k, p) for p in povm]))

    candidates = np.vstack([fibonacci_sphere(max(resolution, 8)), np.eye(3)])
    scores = [distance(v) for v in candidates]
    best = candidates[int(np.argmin(scores))]
    best_score = min(scores)

    step = math.sqrt(4.0 * math.pi / max(resolution, 8))
    theta0, phi0 = _polar(best)
    theta, score = _golden_section(lambda t: distance(_cartesian(t, phi0)), theta0 - step, theta0 + step)
    if score < best_score:
        best, best_score = _cartesian(theta, phi0), score
    theta0, phi0 = _polar(best)
    width = step / max(math.sin(theta0), step)
    phi, score = _golden_section(lambda p: distance(_cartesian(theta0, p)), phi0 - width, phi0 + width)
    if score < best_score:
        best, best_score = _cartesian(theta0, phi), score

    layout_in, layout_out = lambda_j.in_layout, lambda_j.out_layout
    constant = _apply_raw(k, np.eye(2) / 2)
    const_score = _choi_distance(target, _mp_choi([np.eye(2)], [constant]))
    if const_score < best_score:
        povm = Povm.trivial(layout_in)
        prepared = (DensityMatrix(constant, layout_out, tol=1e-9),)
        return MeasureAndPrepareSpec(povm, prepared, layout_out.labels[0]), const_score

    projs = _basis_projectors(best)
    povm = Povm(tuple(_hermitian(p, layout_in) for p in projs))
    prepared = tuple(DensityMatrix(_apply_raw(k, p), layout_out, tol=1e-9) for p in projs)
    return MeasureAndPrepareSpec(povm, prepared, layout_out.labels[0]), best_score


def _hermitian(m: np.ndarray, layout: SubsystemLayout) -> HermitianOperator:
    return HermitianOperator(0.5 * (m + m.conj().T), layout)


# -- emergence scan --------------------------------------------------------


@dataclass(frozen=True)
class EmergenceRow:
    n: int
    j: int
    seed: int
    negativity: float
    mp_distance: float
    sigma_fidelity: float  # fidelity between the fitted prepared states
    ppt_exact: bool

    def __post_init__(self):
        if self.negativity < 0 or not -1e-12 <= self.mp_distance <= 1 + 1e-12:
            raise ValueError(f"emergence row out of range: {self}")


@dataclass(frozen=True)
class EmergenceSummary:
    n: int
    rows: int
    median_negativity: float
    max_negativity: float
    median_mp_distance: float
    max_mp_distance: float


def derive_seed(master_seed: int, n: int, index: int) -> int:
    """Per-work-item seed, fixed by (master seed, n, index) alone."""
    return int(np.random.SeedSequence([master_seed, n, index]).generate_state(1, np.uint64)[0])


def _scan_item(args) -> list[EmergenceRow]:
    n, seed, depth, family, resolution, budget_qubits = args
    if family == "spam":
        ch = spam_interaction(n, budget_qubits)
    else:
        ch = random_interaction(n, depth, seed, budget_qubits)
    rows = []
    for j in range(1, n + 1):
        lam = restrict_to_fragment(ch, j)
        spec, dist = mp_fit(lam, resolution)
        fid = fidelity(*spec.prepared) if len(spec.prepared) == 2 else 1.0
        rows.append(EmergenceRow(n, j, seed, eb_negativity(lam), dist, fid, ppt_is_exact(lam)))
    return rows


def emergence_scan(
    n_values: Iterable[int],
    seeds_per_n: int,
    depth: int = 2,
    master_seed: int = 42,
    family: Literal["random", "spam"] = "random",
    resolution: int = 32,
    jobs: int = 1,
    budget_qubits: int = DEFAULT_BUDGET_QUBITS,
) -> list[EmergenceRow]:
    """Negativity and measure-and-prepare distance of every fragment channel.

    Rows are ordered by ``(n, seed index, j)`` whatever ``jobs`` is; each work
    item's seed is derived from ``master_seed`` up front.
    """
    if family not in ("random", "spam"):
        raise ValueError(f"unknown family {family!r}")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n_values = list(n_values)
    for n in n_values:
        check_budget(n + 1, budget_qubits)
    items = [
        (n, derive_seed(master_seed, n, s), depth, family, resolution, budget_qubits)
        for n in n_values
        for s in range(seeds_per_n)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_scan_item, items, chunksize=max(1, len(items) // (4 * jobs))))
    else:
        chunks = [_scan_item(item) for item in items]
    return [row for chunk in chunks for row in chunk]


def summarize_emergence(rows: Sequence[EmergenceRow]) -> list[EmergenceSummary]:
    out = []
    for n in sorted({r.n for r in rows}):
        sel = [r for r in rows if r.n == n]
        neg = np.array([r.negativity for r in sel])
        dist = np.array([r.mp_distance for r in sel])
        out.append(
            EmergenceSummary(n, len(sel), float(np.median(neg)), float(neg.max()), float(np.median(dist)), float(dist.max()))
        )
    return out


def fragment_distances(marginals: Sequence[DensityMatrix]) -> float:
    """Largest pairwise trace distance among fragment states."""
    worst = 0.0
    for a, b in combinations(marginals, 2):
        worst = max(worst, trace_distance(a, b))
    return worst
