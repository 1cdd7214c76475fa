import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import median_graphs
from triadlab.dynamics import DecisionRule, SelectionRule, run
from triadlab.errors import NotMedianGraph
from triadlab.generators import GeneratorSpec, build_family, generate, grid_node
from triadlab.graph import OpinionProfile, canonical_median
from triadlab.rng import make_rng
from triadlab.tmr import (
    DIVERGED,
    END,
    NeverEnd,
    SelfProposer,
    TruthfulBargaining,
    UniformRandomProposer,
    bargaining_points,
    best_bargaining_point,
    preferred_points,
    random_init,
    run_strategic_ldsg,
    run_tmr_round,
    truthful_strategy,
    utility,
)

TRUTHFUL = [truthful_strategy()] * 3


def between(g, a, b):
    """Brute-force interval: nodes c with d(a,c) + d(c,b) = d(a,b)."""
    return {c for c in range(g.node_count) if g.dist[a, c] + g.dist[c, b] == g.dist[a, b]}


def preferred_oracle(g, u, w):
    return between(g, u, w) - {w}


def bargaining_oracle(g, u, others, w):
    mine = preferred_oracle(g, u, w)
    return (mine & preferred_oracle(g, others[0], w)) | (mine & preferred_oracle(g, others[1], w))


# --- point sets --------------------------------------------------------------


def test_preferred_points_examples(path11):
    assert preferred_points(path11, 4, 4) == frozenset()
    assert preferred_points(path11, 5, 2) == {3, 4, 5}


def test_preferred_points_grid_sub_box():
    g = build_family("grid", {"size": 5})
    box = {grid_node(5, r, c) for r in range(3) for c in range(3)}
    assert preferred_points(g, grid_node(5, 2, 2), grid_node(5, 0, 0)) == box - {grid_node(5, 0, 0)}


def test_bargaining_points_examples(path11):
    assert bargaining_points(path11, 5, (2, 9), 2) == {3, 4, 5}
    assert bargaining_points(path11, 2, (5, 9), 2) == frozenset()
    for u, others in ((2, (5, 9)), (5, (2, 9)), (9, (2, 5))):
        assert bargaining_points(path11, u, others, 5) == frozenset()


def test_best_bargaining_point_examples(path11):
    assert best_bargaining_point(path11, 5, (2, 9), 2) == 5
    assert best_bargaining_point(path11, 9, (2, 5), 5) is None


def test_best_bargaining_point_lowest_id_tie():
    # on a 4-cycle, both neighbours of u=0 are bargaining points at distance 1 when w=2
    g = build_family("cycle", {"length": 4})
    assert bargaining_points(g, 0, (1, 3), 2) == {1, 3}
    assert best_bargaining_point(g, 0, (1, 3), 2) == 1
    h = build_family("grid", {"size": 3})
    u, w = grid_node(3, 0, 0), grid_node(3, 2, 2)
    others = (grid_node(3, 0, 2), grid_node(3, 2, 0))
    b = bargaining_points(h, u, others, w)
    best = best_bargaining_point(h, u, others, w)
    closest = min(h.dist[u, v] for v in b)
    assert best == min(v for v in b if h.dist[u, v] == closest)


@given(median_graphs(), st.data())
def test_point_sets_match_brute_force(g, data):
    u, a, b, w = (data.draw(st.integers(0, g.node_count - 1)) for _ in range(4))
    assert preferred_points(g, u, w) == preferred_oracle(g, u, w)
    assert bargaining_points(g, u, (a, b), w) == bargaining_oracle(g, u, (a, b), w)


@given(median_graphs(), st.data())
def test_bargaining_median_formula(g, data):
    u, a, b, w = (data.draw(st.integers(0, g.node_count - 1)) for _ in range(4))
    formula = (between(g, w, canonical_median(g, w, u, a)) | between(g, w, canonical_median(g, w, u, b))) - {w}
    assert bargaining_points(g, u, (a, b), w) == formula
    best = best_bargaining_point(g, u, (a, b), w)
    if formula:
        closer = min(g.dist[u, canonical_median(g, u, o, w)] for o in (a, b))
        assert g.dist[u, best] == closer
    else:
        assert best is None


@given(median_graphs(), st.data())
def test_no_bargaining_criterion(g, data):
    x, y, z, w = (data.draw(st.integers(0, g.node_count - 1)) for _ in range(4))
    m = canonical_median(g, x, y, z)
    assert (not bargaining_points(g, y, (x, z), w)) == (w in between(g, y, m))


@given(median_graphs(), st.data())
def test_median_winner_leaves_nothing_to_bargain(g, data):
    x, y, z = (data.draw(st.integers(0, g.node_count - 1)) for _ in range(3))
    m = canonical_median(g, x, y, z)
    for u, others in ((x, (y, z)), (y, (x, z)), (z, (x, y))):
        assert bargaining_points(g, u, others, m) == frozenset()


# --- rounds ------------------------------------------------------------------


def test_truthful_round_hand_trace(path11):
    r = run_tmr_round(path11, (2, 5, 9), TRUTHFUL, init=(0, 1))
    assert r.winner == 5 and r.steps == 2
    first, second = r.transcript
    assert first == {"proposer": 5, "proposal": 5, "votes": {"2": False, "5": True, "9": True}, "winner_after": 5}
    assert second["proposer"] == 2 and second["proposal"] == "END"
    assert all(second["votes"].values())


def test_coincident_group_ends_immediately(path11):
    r = run_tmr_round(path11, (4, 4, 4), TRUTHFUL, init=(0, 1))
    assert r.winner == 4 and r.steps == 1
    assert r.transcript[0]["proposal"] == "END"


def test_transcript_json(path11):
    r = run_tmr_round(path11, (2, 5, 9), TRUTHFUL, init=(2, 0))
    doc = json.loads(r.transcript_json())
    assert [set(e) for e in doc] == [{"proposer", "proposal", "votes", "winner_after"}] * len(doc)
    assert doc[-1]["proposal"] == "END"


@pytest.mark.parametrize(
    "family",
    [("path", {"length": 9}), ("grid", {"size": 3}), ("tree", {"branching": 2, "height": 2}), ("star", {"leaves": 4})],
)
def test_truthful_round_reaches_median(family):
    g = build_family(*family)
    for t in itertools.combinations_with_replacement(range(g.node_count), 3):
        m = canonical_median(g, *t)
        for init in itertools.permutations(range(3), 2):
            r = run_tmr_round(g, t, TRUTHFUL, init=init)
            assert r.winner == m
            assert r.steps == (1 if t[init[0]] == m else 2)


def test_random_init_is_uniform():
    rng = make_rng(3)
    trials = 60_000
    tally = {}
    for _ in range(trials):
        key = random_init((0, 1, 2), rng)
        tally[key] = tally.get(key, 0) + 1
    assert set(tally) == set(itertools.permutations(range(3), 2))
    sigma = np.sqrt(trials * (1 / 6) * (5 / 6))
    assert all(abs(c - trials / 6) <= 5 * sigma for c in tally.values())


def test_round_argument_checks(path11):
    with pytest.raises(ValueError):
        run_tmr_round(path11, (1, 2, 3), TRUTHFUL, init=(1, 1))
    with pytest.raises(ValueError):
        run_tmr_round(path11, (1, 2, 3), TRUTHFUL)
    with pytest.raises(ValueError):
        run_tmr_round(path11, (1, 2, 3), TRUTHFUL, init=(0, 1), step_cap=0)


def test_never_end_diverges(path11):
    strategies = [NeverEnd(), truthful_strategy(), truthful_strategy()]
    r = run_tmr_round(path11, (2, 5, 9), strategies, init=(0, 1), step_cap=50)
    assert r.winner is None and r.steps == 50 and r.outcome is DIVERGED
    assert utility(path11, 2, r.outcome) is DIVERGED


def test_self_proposer_terminates(path11):
    strategies = [truthful_strategy(), truthful_strategy(), SelfProposer()]
    r = run_tmr_round(path11, (2, 5, 9), strategies, init=(0, 2))
    assert r.winner == 5


def test_utility(path11):
    assert utility(path11, 2, 5) == -3
    assert utility(path11, 2, None) is DIVERGED


def test_end_and_diverged_are_singletons():
    assert type(END)() is END
    assert type(DIVERGED)() is DIVERGED
    assert repr(END) == "END"


@settings(max_examples=60)
@given(median_graphs(), st.data(), st.integers(0, 2), st.integers(0, 2**32))
def test_deviation_never_helps(g, data, kind, seed):
    group = tuple(data.draw(st.integers(0, g.node_count - 1)) for _ in range(3))
    slot = data.draw(st.integers(0, 2))
    rng = make_rng(seed)
    strategies: list = [truthful_strategy()] * 3
    strategies[slot] = (UniformRandomProposer(rng), SelfProposer(), NeverEnd())[kind]
    r = run_tmr_round(g, group, strategies, rng=rng, step_cap=200)
    if r.winner is not None:
        m = canonical_median(g, *group)
        assert m in between(g, group[slot], r.winner)


# --- strategic token process -------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_truthful_strategic_run_replays_median_dynamic(seed):
    g, p = generate(GeneratorSpec("grid", {"size": 4}, {"uniform_k": 1}))
    a = run_strategic_ldsg(g, p, None, make_rng(seed), k=2)
    b = run(g, p, 2, SelectionRule.TRIAD_UNIFORM, DecisionRule.GENERALIZED_MEDIAN_OF_GROUP, make_rng(seed))
    assert a.winner == b.winner and a.rounds_elapsed == b.rounds_elapsed
    assert np.array_equal(a.terminal_state.owners, b.terminal_state.owners)


def test_strategic_single_participant(path11):
    t = run_strategic_ldsg(path11, OpinionProfile.from_mapping(path11, {3: 2}), {}, make_rng(0))
    assert t.winner == 3 and t.rounds_elapsed == 0


def test_strategic_never_end_diverges(path11):
    p = OpinionProfile.from_mapping(path11, {1: 1, 5: 1, 9: 1})
    t = run_strategic_ldsg(path11, p, {1: NeverEnd()}, make_rng(4), tmr_cap=30)
    # the first triad containing node 1 with a non-median winner stalls; others may finish first
    assert t.outcome is DIVERGED or t.winner in (1, 5, 9)


def test_strategic_needs_median_graph(triangle):
    p = OpinionProfile.from_mapping(triangle, {0: 1, 1: 1})
    with pytest.raises(NotMedianGraph):
        run_strategic_ldsg(triangle, p, None, make_rng(0))


def test_truthful_strategy_type():
    assert isinstance(truthful_strategy(), TruthfulBargaining)
