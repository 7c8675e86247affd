"""The thirteen acceptance criteria, each run at its stated size, tolerance and time budget.

Every criterion prints one ``PASS``/``FAIL`` line, and the lines are
repeated in the terminal summary.
"""

import time

import pytest

from cdrl.experiments import ExperimentConfig, run_experiment

# (number, experiment, time budget in seconds, expected tolerances, minimum sizes)
CRITERIA = [
    (1, "lemma2_counterexample", 1.0, {"exact": 1e-12}, {}),
    (2, "contraction_prop2", 30.0, {"slack": 1e-10}, {"n_cases": 500}),
    (3, "pythagoras_lemma3", 5.0, {"identity": 1e-10}, {"n_cases": 1000}),
    (4, "projection_equivalence_prop6", 10.0, {"routes": 1e-12, "cdf_average": 1e-10}, {"n_cases": 1000}),
    (5, "bound_prop3", 120.0, {}, {"n_cases": 20}),
    (6, "bound_prop4", 120.0, {}, {"n_cases": 20}),
    (7, "monotonicity_prop5", 30.0, {"cdf": 1e-12}, {"n_cases": 500}),
    (8, "noise_lemma4", 10.0, {"exact": 1e-12}, {"n_cases": 20}),
    (9, "sandwich_lemma5", 10.0, {"distance": 1e-6, "cdf": 1e-12}, {"n_steps": 50}),
    (10, "convergence_thm1", 30.0, {"final_distance": 0.05}, {"n_steps": 10**4, "n_seeds": 10}),
    (11, "control_thm2", 60.0, {"value": 0.1, "seed_fraction": 0.9}, {"n_steps": 10**4, "n_seeds": 10}),
    (12, "stochastic_target_expectation", 10.0, {"cdf": 1e-12}, {"n_cases": 20}),
    (13, "kl_gradient_check", 5.0, {"relative": 1e-6}, {"n_cases": 200}),
]


@pytest.mark.parametrize(
    "number, name, budget, tolerances, sizes", CRITERIA, ids=[f"criterion_{c[0]:02d}_{c[1]}" for c in CRITERIA]
)
def test_criterion(number, name, budget, tolerances, sizes, acceptance_log):
    start = time.perf_counter()
    report = run_experiment(ExperimentConfig(name))
    elapsed = time.perf_counter() - start

    cfg = report.config
    for key, value in tolerances.items():
        assert cfg["tolerances"][key] == value, f"{key} tolerance drifted"
    for key, minimum in sizes.items():
        assert cfg[key] >= minimum, f"{key} below the stated size"

    failed = [f"{k} ({v.describe()})" for k, v in report.verdicts.items() if not v.passed]
    in_time = elapsed < budget
    status = "PASS" if not failed and in_time else "FAIL"
    detail = f"{elapsed:.2f}s of {budget:g}s"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    if not in_time:
        detail += "; over time budget"
    line = f"{status} {number}: {name} [{detail}]"
    print(line)
    acceptance_log.append(line)

    assert not failed, line
    assert in_time, line
