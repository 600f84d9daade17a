"""Acceptance criteria, run at their stated tolerances and budgets.

Each criterion prints one ``PASS``/``FAIL`` line (run with ``-s`` to see them
live; they are also echoed in the terminal summary).  Draws are shared between
criteria through the verification cache, so run the module as a whole.
"""

import pytest

from nanomoments import verification as v

CRITERIA = [
    ("gamma_integral", v.check_gamma_integral, False),
    ("integer_moments", v.check_integer_moments, False),
    ("oracle_small_n", v.check_oracle_small_n, True),
    ("second_moment_oracle", v.check_second_moment, True),
    ("sampler_densities", v.check_densities, True),
    ("theorem_unitary", v.check_theorem_unitary, True),
    ("theorem_so_even", v.check_theorem_so_even, True),
    ("theorem_usp", v.check_theorem_usp, True),
    ("so_odd", v.check_so_odd, True),
    ("decomposition", v.check_decomposition, True),
    ("cluster_bound", v.check_cluster_bound, True),
    ("reproducibility", v.check_reproducibility, True),
]

LINES = []


def test_criteria_list_matches_acceptance_set():
    assert tuple(fn for _, fn, _ in CRITERIA) == v.ACCEPTANCE


@pytest.mark.slow
@pytest.mark.parametrize("name,check,seeded", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(name, check, seeded):
    res = check(seed=v.DEFAULT_SEED) if seeded else check()
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, line
    assert res.within_budget, line


def test_mutated_gamma_ratio_is_caught():
    res = v.check_gamma_mutation()
    print(res.line())
    assert res.passed, res.line()

