"""Every exit criterion at its stated tolerance, one PASS/FAIL line each."""

import pytest

from qdarwin import acceptance


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda c: f"{c.number:02d}-{c.name.replace(' ', '-')}")
def test_criterion(criterion, capsys):
    result = acceptance.run_criterion(criterion)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


def test_tampered_tolerance_is_named_failure(monkeypatch):
    monkeypatch.setitem(acceptance.TOLERANCES, "cat", -1.0)
    results = {r.name: r for r in acceptance.run_suite(quick=True)}
    assert not results["cat decoherence"].passed
    assert results["cat decoherence"].line().startswith("[FAIL]")
    assert all(r.passed for name, r in results.items() if name != "cat decoherence")


def test_crash_is_reported_not_raised():
    def boom():
        raise RuntimeError("broken")

    result = acceptance.run_criterion(acceptance.Criterion(99, "crash", "TRIVIAL", boom))
    assert not result.passed
    assert "RuntimeError" in result.detail


def test_quick_suite_runs_reference_criteria_only():
    numbers = [c.number for c in acceptance.CRITERIA if c.tag == "REFERENCE"]
    assert numbers == [1, 2, 3, 4, 5, 6, 10]
