"""Exit criteria for the package, runnable from ``qdarwin selftest`` and pytest.

Each criterion returns ``(passed, detail)``.  Tolerances live in
``TOLERANCES`` so a tampered value shows up as a named failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from . import channels, darwin, models
from .qcore import (
    SubsystemLayout,
    embed,
    expectation,
    ket,
    partial_trace,
    povm_probabilities,
    random_density,
    random_observable,
)

TOLERANCES = {
    "interference": 1e-12,
    "interference_seconds": 1.0,
    "partial_trace": 1e-10,
    "cat": 1e-12,
    "spam_objectivity": 1e-12,
    "spam_mp": 1e-9,
    "sieve": 1e-9,
    "plateau": 1e-9,
    "erasure": 1e-12,
    "emergence_ratio": 0.25,
    "emergence_seconds": 600.0,
    "branch": 1e-12,
}

# Median negativities are compared with this slack: separable Choi states
# produce partial-transpose eigenvalues of order -1e-17 instead of exact zeros.
MEDIAN_NOISE = 1e-12


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    tag: str
    check: Callable[[], tuple[bool, str]]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    tag: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name} ({self.tag}, {self.seconds:.2f}s): {self.detail}"


def _interference():
    tol = TOLERANCES["interference"]
    start = time.perf_counter()
    off = models.mach_zehnder(detector_on=False)
    on = models.mach_zehnder(detector_on=True, overlap=0.0)
    elapsed = time.perf_counter() - start
    ok = (
        abs(off.p_detector_A) <= tol
        and abs(on.p_detector_A - 0.5) <= tol
        and abs(on.p_detector_B - 0.5) <= tol
        and elapsed < TOLERANCES["interference_seconds"]
    )
    return ok, f"off P(A)={off.p_detector_A:.3g}; on P(A)={on.p_detector_A:.15f} P(B)={on.p_detector_B:.15f}; {elapsed:.3f}s"


def _partial_trace_equivalence():
    tol = TOLERANCES["partial_trace"]
    rng = np.random.default_rng(2024)
    layout = SubsystemLayout.qubits(3)
    worst = 0.0
    for _ in range(200):
        rho = random_density(layout, rng)
        local = random_observable(SubsystemLayout.qubits(1), rng)
        full = embed(local.entries, [0], layout)
        worst = max(worst, abs(expectation(rho, full) - expectation(partial_trace(rho, [0]), local)))
    return worst <= tol, f"max |Tr(rho (M⊗I)) - Tr(rho_A M)| = {worst:.2e} over 200 states"


def _cat():
    tol = TOLERANCES["cat"]
    rho = models.cat_photon(1, 0.0).entries
    mixture = np.diag([0.5, 0.5])
    err = float(np.max(np.abs(rho - mixture)))
    fid_err = 0.0
    for name, proj in (("dead", np.diag([1.0, 0.0])), ("alive", np.diag([0.0, 1.0]))):
        out = models.pointer_state_check(name).entries
        fid_err = max(fid_err, abs(np.trace(out @ proj).real - 1.0))
    return err <= tol and fid_err <= tol, f"entrywise error {err:.2e}; pointer fidelity error {fid_err:.2e}"


def _spam_objectivity():
    tol = TOLERANCES["spam_objectivity"]
    plus_minus = channels.Povm.from_basis([models.named_state("plus"), models.named_state("minus")])
    worst_state = worst_pair = worst_pm = 0.0
    for n in (2, 4, 8):
        ch = models.spam_interaction(n)
        for alpha in (1 / math.sqrt(2), 0.6):
            beta = math.sqrt(1 - alpha**2)
            rho_in = ket([alpha, beta], SubsystemLayout((2,), ("S",))).density()
            marginals = models.fragment_marginals(ch, rho_in)
            target = np.diag([alpha**2, beta**2])
            worst_state = max(worst_state, max(float(np.max(np.abs(m.entries - target))) for m in marginals))
            worst_pair = max(worst_pair, darwin.fragment_distances(marginals))
            if alpha == 1 / math.sqrt(2):
                for m in marginals:
                    worst_pm = max(worst_pm, float(np.max(np.abs(povm_probabilities(m, plus_minus) - 0.5))))
    ok = worst_state <= tol and worst_pair < tol and worst_pm <= tol
    return ok, f"marginal error {worst_state:.2e}; pairwise distance {worst_pair:.2e}; +/- error {worst_pm:.2e}"


def _spam_measure_and_prepare():
    tol = TOLERANCES["spam_mp"]
    worst_neg = worst_dist = 0.0
    for n in range(1, 7):
        ch = models.spam_interaction(n)
        for j in range(1, n + 1):
            lam = channels.restrict_to_fragment(ch, j)
            worst_neg = max(worst_neg, channels.eb_negativity(lam))
            worst_dist = max(worst_dist, darwin.mp_fit(lam)[1])
    return worst_neg < tol and worst_dist < tol, f"max negativity {worst_neg:.2e}; max MP distance {worst_dist:.2e} (n = 1..6)"


def _pointer_sieve():
    tol = TOLERANCES["sieve"]
    ch = models.spam_interaction(4)
    res = darwin.pointer_sieve(ch, 64)
    found = sorted(tuple(float(x) for x in np.round(v, 12) + 0.0) for v in res.argmax)
    expected = [(0.0, 0.0, -1.0), (0.0, 0.0, 1.0)]
    plus = darwin.sieve_purity(ch, [1.0, 0.0, 0.0])
    ok = found == expected and abs(res.max_purity - 1.0) <= tol and abs(plus - 0.5) <= tol
    return ok, f"argmax {found}; purity at |+> = {plus:.15f}"


def _plateau():
    tol = TOLERANCES["plateau"]
    state = models.spam_interaction(4)(models.named_state("right").density())
    curve = darwin.fragment_information_curve(state, 0)
    info = curve.information
    err = float(np.max(np.abs(info - np.array([0.0, 1.0, 1.0, 1.0, 2.0]))))
    red = darwin.redundancy(curve, 0.1)
    return err <= tol and red == 4, f"I(m) = {np.round(info, 12).tolist()}; error {err:.2e}; R_0.1 = {red}"


def _erasure():
    tol = TOLERANCES["erasure"]
    plus = models.erase_and_postselect("plus")
    minus = models.erase_and_postselect("minus")
    mixed = plus.postselection_probability * plus.p_detector_A + minus.postselection_probability * minus.p_detector_A
    ok = (
        abs(plus.p_detector_A) <= tol
        and abs(minus.p_detector_A - 1.0) <= tol
        and abs(plus.postselection_probability - 0.5) <= tol
        and abs(minus.postselection_probability - 0.5) <= tol
        and abs(mixed - 0.5) <= tol
    )
    return ok, f"P(A|+) = {plus.p_detector_A:.3g}, P(A|-) = {minus.p_detector_A:.15f}, p(+) = {plus.postselection_probability:.15f}, mixture {mixed:.15f}"


def _emergence():
    start = time.perf_counter()
    rows = darwin.emergence_scan(range(1, 7), 100, depth=2, master_seed=42)
    elapsed = time.perf_counter() - start
    medians = [s.median_negativity for s in darwin.summarize_emergence(rows)]
    monotone = all(b <= a + MEDIAN_NOISE for a, b in zip(medians, medians[1:]))
    shrinks = medians[-1] < TOLERANCES["emergence_ratio"] * medians[0]
    ok = monotone and shrinks and elapsed < TOLERANCES["emergence_seconds"]
    shown = ", ".join(f"{m:.4f}" for m in medians)
    return ok, f"median negativity n=1..6: [{shown}]; {elapsed:.1f}s"


def _branches():
    tol = TOLERANCES["branch"]
    report = models.observer_cat_scenario(0.0)
    mixture = np.diag([0.5, 0.0, 0.0, 0.5])
    err = float(np.max(np.abs(report.reduced_state.entries - mixture)))
    ok = report.max_branch_coherence < tol and err <= tol
    return ok, f"branch coherence {report.max_branch_coherence:.2e}; entrywise error {err:.2e}"


def _determinism():
    from .cli import parse_config, run

    runs = [
        ("emergence", {"n_min": "1", "n_max": "3", "seeds": "4", "seed": "42", "rows": "full"}),
        ("info-curve", {"model": "random", "n": "9", "seed": "7"}),
        ("mp-fit", {"model": "random", "n": "3", "j": "2", "seed": "11"}),
    ]
    mismatched = []
    for command, flags in runs:
        outputs = {run(parse_config(command, {**flags, "jobs": jobs})) for jobs in ("1", "1", "2")}
        if len(outputs) != 1:
            mismatched.append(command)
    return not mismatched, "byte-identical" if not mismatched else f"differs: {', '.join(mismatched)}"


CRITERIA = [
    Criterion(1, "interference destruction", "REFERENCE", _interference),
    Criterion(2, "partial-trace equivalence", "REFERENCE", _partial_trace_equivalence),
    Criterion(3, "cat decoherence", "REFERENCE", _cat),
    Criterion(4, "spam objectivity", "REFERENCE", _spam_objectivity),
    Criterion(5, "spam channel is measure-and-prepare", "REFERENCE", _spam_measure_and_prepare),
    Criterion(6, "pointer sieve", "REFERENCE", _pointer_sieve),
    Criterion(7, "information plateau", "DERIVED", _plateau),
    Criterion(8, "erasure", "DERIVED", _erasure),
    Criterion(9, "generic-emergence trend", "DERIVED", _emergence),
    Criterion(10, "observer-branch mixture", "REFERENCE", _branches),
    Criterion(11, "determinism", "TRIVIAL", _determinism),
]


def run_criterion(criterion: Criterion) -> CriterionResult:
    start = time.perf_counter()
    try:
        passed, detail = criterion.check()
    except Exception as exc:  # a crash is a failure of that criterion, not of the suite
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    return CriterionResult(criterion.number, criterion.name, criterion.tag, bool(passed), detail, time.perf_counter() - start)


def run_suite(quick: bool = False, stream: TextIO | None = None) -> list[CriterionResult]:
    """Run every criterion (only the reference-value ones when ``quick``)."""
    results = []
    for criterion in CRITERIA:
        if quick and criterion.tag != "REFERENCE":
            continue
        result = run_criterion(criterion)
        results.append(result)
        if stream is not None:
            print(result.line(), file=stream, flush=True)
    if stream is not None:
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {', '.join(failed)}" if failed else ""), file=stream)
    return results
