import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triadlab.analytics import (
    ExperimentConfig,
    TrialReport,
    TrialRow,
    absorption_solver,
    approx_ratio,
    edge_cut_counts,
    run_experiment,
    simulate_urn,
    urn_closed_form,
    urn_transition,
    wilson_interval,
)
from triadlab.errors import DegenerateProfile, NotMedianGraph, OutOfRange
from triadlab.generators import GeneratorSpec, build_family, generate
from triadlab.graph import OpinionProfile, win_sets


def dense_oracle(n):
    """Hit probabilities and expected times from a dense numpy solve of the full chain."""
    size = n - 1
    if size <= 0:
        return np.array([0.0, 1.0][: n + 1]), np.zeros(n + 1)
    a = np.eye(size)
    hit_rhs = np.zeros(size)
    for x in range(1, n):
        up, down, stay = (float(v) for v in urn_transition(n, x))
        i = x - 1
        a[i, i] -= stay
        if x + 1 < n:
            a[i, i + 1] -= up
        else:
            hit_rhs[i] += up
        if x - 1 > 0:
            a[i, i - 1] -= down
    hit = np.linalg.solve(a, hit_rhs)
    time = np.linalg.solve(a, np.ones(size))
    return np.concatenate([[0.0], hit, [1.0]]), np.concatenate([[0.0], time, [0.0]])


# --- urn chain ---------------------------------------------------------------


def test_urn_transition_examples():
    assert urn_transition(5, 0) == (0, 0, 1)
    assert urn_transition(5, 5) == (0, 0, 1)
    assert urn_transition(3, 1) == (Fraction(6, 27), Fraction(12, 27), Fraction(9, 27))


@given(st.integers(1, 300), st.data())
def test_urn_transition_sums_to_one(n, data):
    x = data.draw(st.integers(0, n))
    assert sum(urn_transition(n, x)) == 1


def test_urn_transition_range():
    with pytest.raises(OutOfRange):
        urn_transition(3, 4)
    with pytest.raises(OutOfRange):
        urn_closed_form(3, -1)


def test_solver_n3():
    r = absorption_solver(3)
    assert r.exact
    assert r.hit_probability[1] == Fraction(1, 4)
    assert r.hit_probability[0] == 0 and r.hit_probability[3] == 1


@pytest.mark.parametrize("n", [1, 2, 7, 30, 201, 350])
def test_solver_matches_dense_oracle(n):
    hit, time = dense_oracle(n)
    r = absorption_solver(n)
    assert np.allclose([float(h) for h in r.hit_probability], hit, atol=1e-10)
    assert np.allclose([float(t) for t in r.expected_time], time, rtol=1e-9)


@pytest.mark.parametrize("n", [9, 40, 260])
def test_solver_symmetry_and_monotonicity(n):
    h = [float(v) for v in absorption_solver(n).hit_probability]
    assert all(abs(h[x] - (1 - h[n - x])) <= 1e-12 for x in range(n + 1))
    assert all(a <= b + 1e-15 for a, b in zip(h, h[1:]))


def test_closed_form_examples():
    assert urn_closed_form(3, 1, exact=True) == Fraction(1, 4)
    assert urn_closed_form(17, 17) == 1.0
    assert urn_closed_form(17, 0) == 0.0


@pytest.mark.parametrize("n", range(1, 61))
def test_closed_form_matches_solver(n):
    r = absorption_solver(n)
    assert all(urn_closed_form(n, x, exact=True) == r.hit_probability[x] for x in range(n + 1))


def test_simulated_urn_small():
    trials = 4000
    hits = simulate_urn(6, 2, trials, seed=5)
    p = urn_closed_form(6, 2)
    assert abs(hits / trials - p) <= 4 * math.sqrt(p * (1 - p) / trials)


# --- ratios and cuts ---------------------------------------------------------


def test_approx_ratio_at_optimum(path11):
    p = OpinionProfile.from_opinions(path11, range(11))
    assert approx_ratio(path11, p, 5) == 1.0


@pytest.mark.parametrize("k", [1, 4, 50])
def test_approx_ratio_dyadic_far_end(k):
    g, p = generate(GeneratorSpec("path", {}, {"dyadic_counterexample": {"k": k}}))
    at_k = (k + 1) * k + sum(k - i for i in range(1, k + 1))
    optimum = sum(range(1, k + 1))
    assert approx_ratio(g, p, k) == pytest.approx(at_k / optimum)


@pytest.mark.parametrize("m", [1, 3, 10])
def test_approx_ratio_uniform_path_off_by_one(m):
    g, p = generate(GeneratorSpec("path", {"length": 2 * m + 1}, {"uniform_k": 1}))
    optimum = m * (m + 1)
    for x in (m - 1, m + 1):
        assert approx_ratio(g, p, x) == pytest.approx((optimum + 1) / optimum)


def test_approx_ratio_degenerate(path11):
    p = OpinionProfile.from_mapping(path11, {3: 4})
    assert approx_ratio(path11, p, 3) == 1.0
    with pytest.raises(DegenerateProfile):
        approx_ratio(path11, p, 4)


def test_edge_cut_counts_examples(path11):
    uniform = OpinionProfile.from_opinions(path11, range(11))
    assert edge_cut_counts(path11, uniform, win_sets(path11, (5, 6))) == (6, 5)
    left = OpinionProfile.from_mapping(path11, {0: 3, 2: 1})
    assert edge_cut_counts(path11, left, win_sets(path11, (5, 6))) == (4, 0)
    g, p = generate(GeneratorSpec("path", {}, {"dyadic_counterexample": {"k": 7}}))
    assert edge_cut_counts(g, p, win_sets(g, (0, 1))) == (8, 7)


def test_edge_cut_counts_needs_median_graph(triangle):
    p = OpinionProfile.from_mapping(triangle, {0: 1})
    with pytest.raises(NotMedianGraph):
        edge_cut_counts(triangle, p, win_sets(triangle, (0, 1)))


def test_wilson_examples():
    low, high = wilson_interval(50, 100)
    assert low == pytest.approx(0.4038, abs=5e-4) and high == pytest.approx(0.5962, abs=5e-4)
    assert wilson_interval(0, 20)[0] == 0.0
    assert wilson_interval(20, 20)[1] == 1.0
    with pytest.raises(OutOfRange):
        wilson_interval(3, 2)
    with pytest.raises(OutOfRange):
        wilson_interval(0, 0)


@given(st.integers(1, 500), st.data())
def test_wilson_contains_estimate(n, data):
    s = data.draw(st.integers(0, n))
    low, high = wilson_interval(s, n)
    assert 0 <= low <= s / n <= high <= 1


# --- experiment runner -------------------------------------------------------


GRID = GeneratorSpec("grid", {"size": 5}, {"uniform_k": 1})


def test_config_roundtrip():
    c = ExperimentConfig(GRID, "restricted", 2, 30, 900)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict())))
    assert again == c and again.config_hash == c.config_hash
    assert ExperimentConfig(GRID, "restricted", 2, 31).config_hash != c.config_hash


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(GRID, "nope")
    with pytest.raises(ValueError):
        ExperimentConfig(GRID, tokens=0)
    with pytest.raises(ValueError):
        ExperimentConfig(GRID, trials=-1)


def test_zero_trials():
    r = run_experiment(ExperimentConfig(GRID, trials=0), 1)
    assert r.trials == 0 and r.wins == {} and r.mean_ratio is None and r.win_fraction(12) == 0.0
    assert r.to_csv() == "trial,winner,rounds,ratio\n"
    assert json.loads(r.to_json())["trials"] == 0


def test_report_deterministic_across_threads():
    c = ExperimentConfig(GRID, "restricted", 2, 40)
    a = run_experiment(c, 77, threads=1)
    b = run_experiment(c, 77, threads=4)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    assert run_experiment(c, 78, threads=1).to_csv() != a.to_csv()


def test_report_contents():
    c = ExperimentConfig(GRID, "triad-median", 1, 50)
    r = run_experiment(c, 3)
    assert r.unterminated == 0 and sum(r.wins.values()) == 50
    assert (r.ratios >= 1).all()
    rows = r.to_csv().splitlines()
    assert rows[0] == "trial,winner,rounds,ratio" and len(rows) == 51
    doc = json.loads(r.to_json())
    assert {"wins", "mean_ratio", "p95_ratio", "mean_T", "ci", "seed", "config_hash"} <= set(doc)
    assert doc["seed"] == 3 and doc["config_hash"] == c.config_hash
    for v, (low, high) in r.ci().items():
        assert low <= r.win_fraction(v) <= high


def test_report_counts_unterminated():
    c = ExperimentConfig(GeneratorSpec("path", {"length": 30}), "triad-median", 1, 5, cap=3)
    r = run_experiment(c, 0)
    assert r.unterminated == 5 and r.wins == {} and r.mean_T is None
    assert all(line.split(",")[1] == "" for line in r.to_csv().splitlines()[1:])


def test_report_from_rows():
    rows = [TrialRow(0, 2, 10, 1.0), TrialRow(1, 2, 20, 1.5), TrialRow(2, None, 99, math.inf)]
    r = TrialReport(rows, 1, "x")
    assert r.wins == {2: 2} and r.win_fraction([2, 5]) == pytest.approx(2 / 3)
    assert r.mean_ratio == 1.25 and r.mean_T == 15 and r.median_T == 15


def test_run_experiment_accepts_prebuilt_graph():
    g, p = generate(GRID)
    c = ExperimentConfig(GRID, "triad-median", 1, 10)
    assert run_experiment(c, 9, graph=(g, p)).to_csv() == run_experiment(c, 9).to_csv()
