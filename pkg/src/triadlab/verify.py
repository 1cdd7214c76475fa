"""Cross-module invariant suites behind ``triadlab verify``.

Each property returns (passed, detail). Output text depends only on the level and
seed, so two runs with the same flags print the same report.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .analytics import absorption_solver, urn_closed_form
from .generators import build_family
from .graph import (
    OpinionGraph,
    build_graph,
    canonical_median,
    condorcet_winner,
    interval_mask,
    is_median_graph,
    theta_decomposition,
)
from .rng import make_rng
from .tmr import (
    NeverEnd,
    SelfProposer,
    UniformRandomProposer,
    bargaining_points,
    best_bargaining_point,
    run_tmr_round,
    truthful_strategy,
)


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.suite}] {self.name}: {self.detail}"


def _random_connected(rng: np.random.Generator, nodes: int) -> OpinionGraph:
    # random spanning tree plus a few extra edges
    edges = {tuple(sorted((v, int(rng.integers(v))))) for v in range(1, nodes)}
    extra = int(rng.integers(0, nodes))
    for _ in range(extra):
        a, b = (int(v) for v in rng.choice(nodes, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
    return build_graph(sorted(edges), nodes)


def small_corpus(max_nodes: int, random_count: int, seed: int) -> list[tuple[str, OpinionGraph]]:
    corpus = []
    for m in range(1, max_nodes + 1):
        corpus.append((f"path-{m}", build_family("path", {"length": m})))
        if m >= 3:
            corpus.append((f"cycle-{m}", build_family("cycle", {"length": m})))
            corpus.append((f"complete-{m}", build_family("complete", {"size": m})))
        if m >= 2:
            corpus.append((f"star-{m - 1}", build_family("star", {"leaves": m - 1})))
    corpus.append(("grid-2x2", build_family("grid", {"size": 2})))
    corpus.append(("grid-2x2x2", build_family("grid", {"size": 2, "dims": 3})))
    corpus.append(("tree-2-2", build_family("tree", {"branching": 2, "height": 2})))
    rng = make_rng(seed, 7)
    for i in range(random_count):
        nodes = int(rng.integers(3, max_nodes + 1))
        corpus.append((f"random-{i}", _random_connected(rng, nodes)))
    return corpus


def median_corpus(full: bool) -> list[tuple[str, OpinionGraph]]:
    if not full:
        return [("path-10", build_family("path", {"length": 10})), ("grid-3x3", build_family("grid", {"size": 3}))]
    return [
        ("path-20", build_family("path", {"length": 20})),
        ("grid-5x5", build_family("grid", {"size": 5})),
        ("tree-h4", build_family("tree", {"branching": 2, "height": 4})),
        ("star-8", build_family("star", {"leaves": 8})),
    ]


def _triples(n: int) -> Iterator[tuple[int, int, int]]:
    return itertools.combinations(range(n), 3)


# --- graph suite -------------------------------------------------------------


def check_characterization(corpus) -> tuple[bool, str]:
    failures = []
    medians = 0
    for name, g in corpus:
        all_winners = True
        agree = True
        for t in _triples(g.node_count):
            cw = condorcet_winner(g, list(t))
            if cw is None:
                all_winners = False
                break
            if cw != canonical_median(g, *t):
                agree = False
        median = is_median_graph(g)
        medians += median
        if median != all_winners or (median and not agree):
            failures.append(name)
    return not failures, f"{len(corpus)} graphs, {medians} median, mismatches {failures[:5]}"


def check_theta_distances(corpus) -> tuple[bool, str]:
    bad = []
    count = 0
    for name, g in corpus:
        if not g.is_median:
            continue
        count += 1
        cuts = theta_decomposition(g)
        sep = np.zeros((g.node_count, g.node_count), dtype=np.int64)
        for cut in cuts:
            side = np.zeros(g.node_count, dtype=bool)
            side[list(cut.side_u)] = True
            sep += side[:, None] != side[None, :]
        if not np.array_equal(sep, g.dist):
            bad.append(name)
    return not bad, f"{count} median graphs, distance = separating cuts, failures {bad[:5]}"


def check_median_separation(corpus) -> tuple[bool, str]:
    violations = 0
    checked = 0
    for _, g in corpus:
        for x, y, z in itertools.permutations(range(g.node_count), 3):
            m = canonical_median(g, x, y, z)
            on_path = np.flatnonzero(interval_mask(g, y, m))
            for w in on_path:
                checked += 1
                if not interval_mask(g, x, int(w))[m] or not interval_mask(g, x, y)[w]:
                    violations += 1
    return violations == 0, f"{checked} (triple, w) cases, {violations} violations"


# --- tmr suite ---------------------------------------------------------------


def check_truthful_rounds(corpus) -> tuple[bool, str]:
    wrong_winner = 0
    wrong_steps = 0
    two_steps = 0
    rounds = 0
    truthful = [truthful_strategy()] * 3
    for _, g in corpus:
        for t in _triples(g.node_count):
            m = canonical_median(g, *t)
            for w, p in itertools.permutations(range(3), 2):
                r = run_tmr_round(g, t, truthful, init=(w, p))
                rounds += 1
                wrong_winner += r.winner != m
                expected = 1 if t[w] == m else 2
                wrong_steps += r.steps != expected
                two_steps += r.steps == 2
    detail = (
        f"{rounds} rounds, winner off the median {wrong_winner}, "
        f"step count off (1 when starting at the median, else 2) {wrong_steps}, two-step rounds {two_steps}"
    )
    return wrong_winner == 0 and wrong_steps == 0, detail


def _bargaining_by_formula(g, u, others, w):
    mask = np.zeros(g.node_count, dtype=bool)
    for o in others:
        mask |= interval_mask(g, w, canonical_median(g, w, u, o))
    mask[w] = False
    return frozenset(int(v) for v in np.flatnonzero(mask))


def check_bargaining(corpus, rng, samples) -> tuple[bool, str]:
    mismatches = 0
    cases = 0
    for _, g in corpus:
        n = g.node_count
        for _ in range(samples):
            x, y, z, w = (int(v) for v in rng.integers(n, size=4))
            group = (x, y, z)
            m = canonical_median(g, x, y, z)
            for slot in range(3):
                u = group[slot]
                others = [group[i] for i in range(3) if i != slot]
                cases += 1
                b_set = bargaining_points(g, u, others, w)
                if b_set != _bargaining_by_formula(g, u, others, w):
                    mismatches += 1
                    continue
                best = best_bargaining_point(g, u, others, w)
                if b_set:
                    cands = [canonical_median(g, u, o, w) for o in others]
                    dmin = min(g.d(c, u) for c in cands)
                    if best is None or g.d(best, u) != dmin:
                        mismatches += 1
                elif best is not None:
                    mismatches += 1
                # empty exactly when the winner lies between u and the group median
                if (not b_set) != bool(interval_mask(g, u, m)[w]):
                    mismatches += 1
    return mismatches == 0, f"{cases} cases, {mismatches} mismatches"


def check_deviation_safety(corpus, rng, rounds_per_graph) -> tuple[bool, str]:
    counter = 0
    terminated = 0
    total = 0
    for _, g in corpus:
        n = g.node_count
        for _ in range(rounds_per_graph):
            group = tuple(int(v) for v in rng.integers(n, size=3))
            slot = int(rng.integers(3))
            kind = int(rng.integers(3))
            deviator = (UniformRandomProposer(rng), SelfProposer(), NeverEnd())[kind]
            strategies = [truthful_strategy()] * 3
            strategies[slot] = deviator
            r = run_tmr_round(g, group, strategies, rng=rng, step_cap=200)
            total += 1
            if r.winner is None:
                continue
            terminated += 1
            m = canonical_median(g, *group)
            if not interval_mask(g, group[slot], r.winner)[m]:
                counter += 1
    return counter == 0, f"{total} deviating rounds, {terminated} terminated, {counter} counterexamples"


# --- oracle suite ------------------------------------------------------------


def check_urn_oracle(max_n: int) -> tuple[bool, str]:
    worst = 0.0
    for n in range(1, max_n + 1):
        solved = absorption_solver(n)
        for x in range(n + 1):
            worst = max(worst, abs(solved.hit(x) - urn_closed_form(n, x)))
    return worst <= 1e-10, f"n <= {max_n}, max |closed form - solver| = {worst:.3e}"


def check_expected_time(max_n: int) -> tuple[bool, str]:
    worst = -math.inf
    for n in range(2, max_n + 1):
        times = absorption_solver(n, exact=False).expected_time
        worst = max(worst, (max(times) - n * math.log(n)) / n)
    return worst <= 5, f"n <= {max_n}, max (E[T] - n ln n)/n = {worst:.4f} (bound 5)"


def run_suites(level: str = "quick", seed: int = 0) -> list[PropertyResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be quick or full")
    full = level == "full"
    corpus = small_corpus(8, 300 if full else 60, seed)
    tmr_corpus = median_corpus(full)
    sep_corpus = [(n, g) for n, g in median_corpus(full) if g.node_count <= 20] + [
        (n, g) for n, g in corpus if g.node_count <= 8 and g.is_median
    ]
    rng = make_rng(seed, 11)
    plan: list[tuple[str, str, Callable[[], tuple[bool, str]]]] = [
        ("graph", "median graph iff every triple has a Condorcet winner", lambda: check_characterization(corpus)),
        ("graph", "distance equals number of separating cuts", lambda: check_theta_distances(corpus + tmr_corpus)),
        ("graph", "median separation", lambda: check_median_separation(sep_corpus)),
        ("tmr", "truthful round ends at the triple median", lambda: check_truthful_rounds(tmr_corpus)),
        ("tmr", "bargaining set equivalences", lambda: check_bargaining(tmr_corpus, rng, 400 if full else 100)),
        ("tmr", "deviation safety", lambda: check_deviation_safety(tmr_corpus, rng, 1000 if full else 200)),
        ("oracle", "urn closed form matches solver", lambda: check_urn_oracle(200 if full else 50)),
        ("oracle", "expected absorption time bound", lambda: check_expected_time(500 if full else 100)),
    ]
    results = []
    for suite, name, fn in plan:
        passed, detail = fn()
        results.append(PropertyResult(suite, name, passed, detail))
    return results
