"""Triadic majority rule: a three-member bargaining game with an END motion.

A round starts with one member's node as the winner and another member as the
proposer. Each step the proposer names a node or END, all three vote, and the
majority decides. An accepted node replaces the winner; an accepted END closes
the round. The lone dissenter of a split vote becomes the next proposer.

Strategies are addressed by slot (0, 1, 2) in the group, so two members sharing
a node can still play differently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from . import _fallback
from .dynamics import Trace, TokenState, default_step_cap, init_tokens
from .errors import NotMedianGraph
from .graph import OpinionGraph, OpinionProfile, interval_mask


class _End:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "END"


END = _End()


class _Diverged:
    """Outcome of a round or run that never terminated; worse than any node."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIVERGED"


DIVERGED = _Diverged()

DEFAULT_ROUND_CAP = 1000


@dataclass
class TMRState:
    group: tuple[int, int, int]
    current_winner: int
    proposer: int  # slot index into group
    step: int = 1
    last_proposal: object = None
    last_votes: tuple[bool, bool, bool] | None = None
    history: list[tuple[object, tuple[bool, bool, bool]]] = field(default_factory=list)

    def others(self, slot: int) -> tuple[int, int]:
        return tuple(self.group[i] for i in range(3) if i != slot)  # type: ignore[return-value]


class Strategy(Protocol):
    def propose(self, g: OpinionGraph, state: TMRState, slot: int) -> object: ...

    def vote(self, g: OpinionGraph, state: TMRState, slot: int, proposal: object) -> bool: ...


def _preferred_mask(g: OpinionGraph, u: int, w: int) -> np.ndarray:
    mask = interval_mask(g, u, w)
    mask[w] = False
    return mask


def preferred_points(g: OpinionGraph, u: int, w: int) -> frozenset[int]:
    """Nodes on a shortest path from ``u`` to the winner ``w``, excluding ``w``."""
    return frozenset(int(v) for v in np.flatnonzero(_preferred_mask(g, u, w)))


def _bargaining_mask(g: OpinionGraph, u: int, others: Sequence[int], w: int) -> np.ndarray:
    own = _preferred_mask(g, u, w)
    shared = _preferred_mask(g, others[0], w) | _preferred_mask(g, others[1], w)
    return own & shared


def bargaining_points(g: OpinionGraph, u: int, others: Sequence[int], w: int) -> frozenset[int]:
    """Preferred points of ``u`` that at least one other member also prefers."""
    return frozenset(int(v) for v in np.flatnonzero(_bargaining_mask(g, u, others, w)))


def best_bargaining_point(g: OpinionGraph, u: int, others: Sequence[int], w: int) -> int | None:
    """Bargaining point closest to ``u``; ties go to the lowest node id."""
    nodes = np.flatnonzero(_bargaining_mask(g, u, others, w))
    if nodes.size == 0:
        return None
    d = g.dist[u, nodes]
    return int(nodes[np.flatnonzero(d == d.min())[0]])


class TruthfulBargaining:
    """Propose the best bargaining point (END when there is none) and vote sincerely."""

    def propose(self, g, state, slot):
        best = best_bargaining_point(g, state.group[slot], state.others(slot), state.current_winner)
        return END if best is None else best

    def vote(self, g, state, slot, proposal):
        u = state.group[slot]
        if proposal is END:
            return not _bargaining_mask(g, u, state.others(slot), state.current_winner).any()
        return bool(g.dist[u, proposal] < g.dist[u, state.current_winner])


def truthful_strategy() -> TruthfulBargaining:
    return TruthfulBargaining()


class UniformRandomProposer:
    """Proposes a uniform node or END and votes by coin flip."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def propose(self, g, state, slot):
        pick = int(self.rng.integers(g.node_count + 1))
        return END if pick == g.node_count else pick

    def vote(self, g, state, slot, proposal):
        return bool(self.rng.integers(2))


class SelfProposer(TruthfulBargaining):
    """Pushes its own node once per round, then behaves truthfully."""

    def propose(self, g, state, slot):
        me = state.group[slot]
        tried = any(prop == me for prop, _ in state.history)
        if me != state.current_winner and not tried:
            return me
        return super().propose(g, state, slot)


class NeverEnd(TruthfulBargaining):
    """Never moves or accepts END; otherwise sincere."""

    def propose(self, g, state, slot):
        best = super().propose(g, state, slot)
        return state.group[slot] if best is END else best

    def vote(self, g, state, slot, proposal):
        if proposal is END:
            return False
        return super().vote(g, state, slot, proposal)


@dataclass
class RoundResult:
    winner: int | None
    steps: int
    transcript: list[dict] = field(default_factory=list, repr=False)

    @property
    def outcome(self):
        return DIVERGED if self.winner is None else self.winner

    def transcript_json(self) -> str:
        return json.dumps(self.transcript)


def random_init(group: Sequence[int], rng: np.random.Generator) -> tuple[int, int]:
    """Uniform ordered pair of distinct slots: (winner slot, proposer slot)."""
    w = int(rng.integers(3))
    p = (w + 1 + int(rng.integers(2))) % 3
    return w, p


def run_tmr_round(
    g: OpinionGraph,
    group: Sequence[int],
    strategies: Sequence[Strategy],
    init: tuple[int, int] | None = None,
    rng: np.random.Generator | None = None,
    step_cap: int = DEFAULT_ROUND_CAP,
) -> RoundResult:
    """Play one round. ``init`` is (winner slot, proposer slot); ``None`` draws it from ``rng``."""
    if step_cap < 1:
        raise ValueError("step_cap must be at least 1")
    if len(group) != 3 or len(strategies) != 3:
        raise ValueError("a round needs three members and three strategies")
    group = tuple(g.check_node(int(m)) for m in group)
    if init is None:
        if rng is None:
            raise ValueError("random initialisation needs an rng")
        init = random_init(group, rng)
    w_slot, p_slot = init
    if w_slot == p_slot or not {w_slot, p_slot} <= {0, 1, 2}:
        raise ValueError("winner and proposer must be distinct slots")
    state = TMRState(group, group[w_slot], p_slot)
    transcript: list[dict] = []
    while state.step <= step_cap:
        proposer = state.proposer
        proposal = strategies[proposer].propose(g, state, proposer)
        if proposal is not END:
            proposal = g.check_node(int(proposal))
        votes = tuple(bool(strategies[i].vote(g, state, i, proposal)) for i in range(3))
        passed = sum(votes) >= 2
        if passed and proposal is not END:
            state.current_winner = proposal
        dissent = [i for i in range(3) if votes[i] != passed]
        if dissent:
            state.proposer = dissent[0]
        state.last_proposal = proposal
        state.last_votes = votes
        state.history.append((proposal, votes))
        transcript.append(
            {
                "proposer": group[proposer],
                "proposal": "END" if proposal is END else proposal,
                "votes": {str(group[i]): votes[i] for i in range(3)},
                "winner_after": state.current_winner,
            }
        )
        if passed and proposal is END:
            return RoundResult(state.current_winner, state.step, transcript)
        state.step += 1
    return RoundResult(None, step_cap, transcript)


def utility(g: OpinionGraph, opinion: int, outcome) -> int | _Diverged:
    """Negative distance to the outcome; a diverged outcome stays symbolic."""
    if outcome is DIVERGED or outcome is None:
        return DIVERGED
    return -int(g.dist[opinion, outcome])


@dataclass
class StrategicTrace(Trace):
    tmr_steps: int = 0

    @property
    def outcome(self):
        return DIVERGED if self.winner is None else self.winner


def run_strategic_ldsg(
    g: OpinionGraph,
    p: OpinionProfile,
    strategy_assignment: Mapping[int, Strategy] | None,
    rng: np.random.Generator,
    k: int = 1,
    round_cap: int | None = None,
    tmr_cap: int = DEFAULT_ROUND_CAP,
    tmr_rng: np.random.Generator | None = None,
) -> StrategicTrace:
    """Token process where each triad's decision is a bargaining round.

    ``strategy_assignment`` maps opinion nodes to strategies; unlisted nodes bargain
    truthfully. Token selection consumes ``rng`` exactly like the triad-median
    dynamic, while round setup and random deviators use ``tmr_rng``, so an
    all-truthful run replays the triad-median run of the same seed.
    """
    if g.node_count <= 500 and not g.is_median:
        raise NotMedianGraph("strategic runs need a median graph")
    assignment = dict(strategy_assignment or {})
    truthful = truthful_strategy()
    if tmr_rng is None:
        tmr_rng = np.random.Generator(np.random.PCG64(rng.bit_generator.seed_seq.spawn(1)[0]))
    state = init_tokens(p, k)
    owners = state.owners.copy()
    counts = state.counts(g.node_count)
    n_tokens = owners.shape[0]
    if round_cap is None:
        round_cap = default_step_cap(n_tokens)
    bg = rng.bit_generator
    rounds = 0
    tmr_steps = 0
    if counts.max() == n_tokens:
        return StrategicTrace(TokenState(owners, 0), int(owners[0]), 0)
    while rounds < round_cap:
        selected = [_fallback.bounded(bg, n_tokens) for _ in range(3)]
        group = [int(owners[i]) for i in selected]
        strategies = [assignment.get(m, truthful) for m in group]
        result = run_tmr_round(g, group, strategies, rng=tmr_rng, step_cap=tmr_cap)
        rounds += 1
        tmr_steps += result.steps
        if result.winner is None:
            return StrategicTrace(TokenState(owners, rounds), None, rounds, tmr_steps=tmr_steps)
        dest = result.winner
        for i in selected:
            src = owners[i]
            if src != dest:
                counts[src] -= 1
                counts[dest] += 1
                owners[i] = dest
        if counts[dest] == n_tokens:
            return StrategicTrace(TokenState(owners, rounds), dest, rounds, tmr_steps=tmr_steps)
    return StrategicTrace(TokenState(owners, rounds), None, rounds, tmr_steps=tmr_steps)
