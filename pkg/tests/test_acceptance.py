"""The ten acceptance criteria, each run at its stated tolerance and time budget.

Every criterion prints one PASS/FAIL line (also collected into the pytest
terminal summary).  Run directly with ``python3 tests/test_acceptance.py``.
"""
import json

import pytest

from apslog import suites

CRITERIA = [
    (1, "lemma43", "per-mode symbolic identities"),
    (2, "closed-form-518", "closed form vs finite-difference oracle"),
    (3, "odd-n-logs", "no logs for odd n (tau = 1e-6)"),
    (4, "even-n-logs", "even-n log pattern"),
    (5, "parity", "parity classification"),
    (6, "grading", "grading golden tests"),
    (7, "perturbation", "perturbation closure and Neumann oracle (1e-4)"),
    (8, "zeta-eta", "zeta/eta pole structure and values"),
    (9, "a1-formula", "a'_1 identity and alpha-derivative ratio"),
    (10, "reproducibility", "byte-identical CSV in deterministic mode"),
]


def line(num, name, desc, res) -> str:
    status = "PASS" if res.passed else "FAIL"
    extra = ""
    if not res.passed:
        failed = [c.name for c in res.failures()]
        if res.runtime > res.budget:
            failed.append(f"runtime {res.runtime:.1f}s > {res.budget:.0f}s")
        extra = " | failing: " + "; ".join(failed)
    return f"{status} criterion {num:2d} [{name}] {desc} ({res.runtime:.1f}s / {res.budget:.0f}s){extra}"


@pytest.mark.parametrize("num,name,desc", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(num, name, desc, acceptance_lines):
    res = suites.run_suite(name)
    msg = line(num, name, desc, res)
    print(msg)
    acceptance_lines.append(msg)
    assert res.passed, json.dumps(res.as_json(), indent=1, default=str)


if __name__ == "__main__":
    for num, name, desc in CRITERIA:
        print(line(num, name, desc, suites.run_suite(name)), flush=True)
