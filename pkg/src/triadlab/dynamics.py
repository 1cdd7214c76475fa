"""Token consensus processes driven by small groups.

Each participant starts with ``k`` tokens placed at its opinion node. Every round
a group of tokens is drawn uniformly with replacement, the group decides on a
node, and exactly the selected tokens move there. The run ends when one node
holds every token.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from . import _backend, _fallback
from .errors import AmbiguousMidpoint, NotMedianGraph, TriadLabError
from .graph import OpinionGraph, OpinionProfile

# exact recognition is O(V^3); bigger graphs rely on the per-decision check
MEDIAN_PRECHECK_LIMIT = 500


class SelectionRule(Enum):
    TRIAD_UNIFORM = 3
    DYAD_UNIFORM = 2

    @property
    def size(self) -> int:
        return self.value


class DecisionRule(Enum):
    GENERALIZED_MEDIAN_OF_GROUP = _fallback.TRIAD_MEDIAN
    RESTRICTED_VOTE = _fallback.RESTRICTED
    DYADIC_SYMMETRIC_MIDPOINT = _fallback.DYAD_MIDPOINT
    DYADIC_RANDOM_ENDPOINT = _fallback.DYAD_ENDPOINT

    @property
    def group_size(self) -> int:
        return 3 if self.value in (_fallback.TRIAD_MEDIAN, _fallback.RESTRICTED) else 2

    @property
    def is_dyadic(self) -> bool:
        return self.group_size == 2


DYNAMICS: dict[str, tuple[SelectionRule, DecisionRule]] = {
    "triad-median": (SelectionRule.TRIAD_UNIFORM, DecisionRule.GENERALIZED_MEDIAN_OF_GROUP),
    "restricted": (SelectionRule.TRIAD_UNIFORM, DecisionRule.RESTRICTED_VOTE),
    "dyad-midpoint": (SelectionRule.DYAD_UNIFORM, DecisionRule.DYADIC_SYMMETRIC_MIDPOINT),
    "dyad-endpoint": (SelectionRule.DYAD_UNIFORM, DecisionRule.DYADIC_RANDOM_ENDPOINT),
}


@dataclass(frozen=True)
class TokenState:
    owners: np.ndarray
    round: int = 0

    def __post_init__(self):
        owners = np.array(self.owners, dtype=np.int32)
        if owners.ndim != 1 or owners.size == 0:
            raise ValueError("owners must be a nonempty 1-d array")
        if self.round < 0:
            raise ValueError("round must be non-negative")
        owners.flags.writeable = False
        object.__setattr__(self, "owners", owners)

    @property
    def total_tokens(self) -> int:
        return int(self.owners.shape[0])

    def counts(self, node_count: int) -> np.ndarray:
        return np.bincount(self.owners, minlength=node_count).astype(np.int64)

    @property
    def is_terminal(self) -> bool:
        return bool((self.owners == self.owners[0]).all())


@dataclass
class RoundLog:
    t: int
    tokens: list[int]
    members: list[int]
    decision: int | None

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.t, "tokens": self.tokens, "members": self.members, "decision": self.decision}
        )


@dataclass
class Trace:
    terminal_state: TokenState
    winner: int | None
    rounds_elapsed: int
    log: list[RoundLog] | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.winner is not None

    def write_jsonl(self, fp: TextIO) -> None:
        for entry in self.log or ():
            fp.write(entry.to_json() + "\n")


def init_tokens(p: OpinionProfile, k: int = 1) -> TokenState:
    """``k`` tokens at every participant's opinion; token order follows node order."""
    if k < 1:
        raise ValueError("each participant needs at least one token")
    return TokenState(np.repeat(np.arange(p.graph.node_count, dtype=np.int32), p.counts * k))


def default_step_cap(n_tokens: int) -> int:
    n = max(n_tokens, 2)
    return int(100 * n * math.log(n) ** 2) + 1000


def select_group(s: TokenState, rule: SelectionRule, rng: np.random.Generator) -> list[int]:
    """Token indices drawn i.i.d. uniformly with replacement."""
    bg = rng.bit_generator
    return [int(_fallback.bounded(bg, s.total_tokens)) for _ in range(rule.size)]


def _walk_median(g: OpinionGraph, members: Sequence[int]) -> int:
    x, y, z = (g.check_node(int(m)) for m in members)
    return _fallback.median_walk(g.indptr, g.indices, g.dist, x, y, z)


def decide_triad_median(g: OpinionGraph, members: Sequence[int]) -> int:
    """Unique generalized median of three member nodes on a median graph."""
    if len(members) != 3:
        raise ValueError("a triad has three members")
    if g.node_count <= MEDIAN_PRECHECK_LIMIT and not g.is_median:
        raise NotMedianGraph("triad median decision needs a median graph")
    dest = _walk_median(g, members)
    if dest < 0:
        raise NotMedianGraph(f"no median for {tuple(members)}")
    return dest


def decide_restricted_vote(g: OpinionGraph, members: Sequence[int], rng: np.random.Generator) -> int | None:
    """Mutual vote among three members; ``None`` when every member gets one vote."""
    a, b, c = (g.check_node(int(m)) for m in members)
    dest = _fallback.restricted_vote(g.dist, a, b, c, rng.bit_generator)
    return None if dest == _fallback.NO_DECISION else dest


def decide_dyad(g: OpinionGraph, members: Sequence[int], rule: DecisionRule, rng: np.random.Generator) -> int:
    if not rule.is_dyadic:
        raise ValueError(f"{rule.name} is not a dyadic rule")
    x, y = (g.check_node(int(m)) for m in members)
    dest = _fallback.decide(rule.value, g.indptr, g.indices, g.dist, [x, y], rng.bit_generator)
    if dest == _fallback.ERR_AMBIGUOUS:
        raise AmbiguousMidpoint(f"interval between {x} and {y} is not a path")
    return dest


def _check_rules(g: OpinionGraph, sel: SelectionRule, dec: DecisionRule) -> None:
    if sel.size != dec.group_size:
        raise ValueError(f"{sel.name} selects {sel.size} tokens but {dec.name} needs {dec.group_size}")
    if (
        dec is DecisionRule.GENERALIZED_MEDIAN_OF_GROUP
        and g.node_count <= MEDIAN_PRECHECK_LIMIT
        and not g.is_median
    ):
        raise NotMedianGraph("generalized-median decisions need a median graph")


def _raise_status(status: int) -> None:
    if status == _fallback.ERR_NOT_MEDIAN:
        raise NotMedianGraph("group had no unique generalized median")
    if status == _fallback.ERR_AMBIGUOUS:
        raise AmbiguousMidpoint("dyad interval is not a path")


def step(
    g: OpinionGraph, s: TokenState, sel: SelectionRule, dec: DecisionRule, rng: np.random.Generator
) -> TokenState:
    """One round: the selected tokens move to the group's decision (or stay on a tie)."""
    _check_rules(g, sel, dec)
    if s.is_terminal:
        raise TriadLabError("state is already terminal")
    owners = s.owners.copy()
    counts = s.counts(g.node_count)
    *_, status = _fallback.step_tokens(dec.value, g.indptr, g.indices, g.dist, owners, counts, rng.bit_generator)
    _raise_status(status)
    return TokenState(owners, s.round + 1)


def run(
    g: OpinionGraph,
    p: OpinionProfile,
    k: int,
    sel: SelectionRule,
    dec: DecisionRule,
    rng: np.random.Generator,
    step_cap: int | None = None,
    trace: bool = False,
) -> Trace:
    """Run to consensus or ``step_cap`` rounds.

    With ``trace=True`` every round is logged; this path steps in Python but draws
    the same random stream as the compiled loop, so outcomes are identical.
    """
    _check_rules(g, sel, dec)
    state = init_tokens(p, k)
    if step_cap is None:
        step_cap = default_step_cap(state.total_tokens)
    if step_cap < 1:
        raise ValueError("step_cap must be at least 1")
    owners = state.owners.copy()
    counts = state.counts(g.node_count)
    bg = rng.bit_generator
    log: list[RoundLog] | None = None
    if counts.max() == owners.shape[0]:
        steps, status = 0, _fallback.CONVERGED
    elif trace:
        log = []
        steps, status = 0, _fallback.RUNNING
        while steps < step_cap and status == _fallback.RUNNING:
            selected, members, dest, status = _fallback.step_tokens(
                dec.value, g.indptr, g.indices, g.dist, owners, counts, bg
            )
            steps += 1
            decision = None if dest < 0 else int(dest)
            log.append(RoundLog(steps, [int(i) for i in selected], members, decision))
    else:
        steps, status = _backend.run_tokens(dec.value, g.indptr, g.indices, g.dist, owners, counts, bg, step_cap)
    _raise_status(status)
    winner = int(owners[0]) if status == _fallback.CONVERGED else None
    return Trace(TokenState(owners, steps), winner, int(steps), log)


def token_mean(s: TokenState, embedding: Callable[[int], float] | Sequence[float] | None = None) -> float:
    """Average embedded token position; node ids by default (line graphs)."""
    if embedding is None:
        return float(s.owners.mean())
    if callable(embedding):
        return float(np.mean([embedding(int(v)) for v in s.owners]))
    table = np.asarray(embedding, dtype=float)
    return float(table[s.owners].mean())


# --- star chains -------------------------------------------------------------


@dataclass(frozen=True)
class StarState:
    """Token counts on a star: the root, then one entry per leaf."""

    root_tokens: int
    leaf_tokens: tuple[int, ...]

    def __post_init__(self):
        if self.root_tokens < 0 or any(c < 0 for c in self.leaf_tokens):
            raise ValueError("token counts must be non-negative")
        object.__setattr__(self, "leaf_tokens", tuple(int(c) for c in self.leaf_tokens))

    @property
    def n(self) -> int:
        return self.root_tokens + sum(self.leaf_tokens)

    @property
    def truncation(self) -> tuple[int, int]:
        return self.root_tokens, max(self.leaf_tokens, default=0)

    @property
    def absorbed(self) -> bool:
        return self.root_tokens == self.n or max(self.leaf_tokens, default=0) == self.n

    @property
    def root_won(self) -> bool:
        return self.root_tokens == self.n

    @classmethod
    def from_profile(cls, p: OpinionProfile, k: int = 1) -> "StarState":
        counts = p.counts * k
        return cls(int(counts[0]), tuple(int(c) for c in counts[1:]))

    def concentrated(self) -> "StarState":
        leaves = np.array(self.leaf_tokens, dtype=np.int64)
        _fallback.concentrate(leaves)
        return StarState(self.root_tokens, tuple(leaves))


def _star_step(star: StarState, concentrate: bool, rng: np.random.Generator) -> StarState:
    if star.absorbed:
        return star
    state = [star.root_tokens]
    leaves = np.array(star.leaf_tokens, dtype=np.int64)
    _fallback.star_step(state, leaves, concentrate, rng.bit_generator)
    return StarState(state[0], tuple(leaves))


def rtd_step(star: StarState, rng: np.random.Generator) -> StarState:
    """One restricted-triad round on star token counts."""
    return _star_step(star, False, rng)


def crtd_step(star: StarState, rng: np.random.Generator) -> StarState:
    """One restricted-triad round, then leaf counts repacked keeping their maximum."""
    return _star_step(star, True, rng)


def run_star(star: StarState, concentrate: bool, rng: np.random.Generator, step_cap: int | None = None) -> tuple[bool | None, int]:
    """Run RTD (or CRTD) to absorption. Returns (root won, or None if capped; rounds)."""
    if step_cap is None:
        step_cap = default_step_cap(star.n)
    leaves = np.array(star.leaf_tokens, dtype=np.int64)
    root, steps, status = _backend.run_star(star.root_tokens, leaves, concentrate, rng.bit_generator, step_cap)
    if status != _fallback.CONVERGED:
        return None, int(steps)
    return root == star.n, int(steps)


# --- local consistency -------------------------------------------------------


def always_left_endpoint(g: OpinionGraph, members: Sequence[int], rng: np.random.Generator) -> int:
    """Deliberately non-symmetric dyadic rule, for negative tests."""
    return min(int(m) for m in members)


def check_local_consistency(
    dec: DecisionRule | Callable[[OpinionGraph, Sequence[int], np.random.Generator], int],
    line_length: int,
    trials: int,
    rng: np.random.Generator,
    sigmas: float = 4.0,
) -> bool:
    """Empirical translation and reflection invariance of a dyadic rule on a path.

    For every dyad on the path the decision offset from the left endpoint is
    tallied over ``trials`` draws (members in random order). Offsets must match
    their reflection, and every translate must match the pooled distribution of
    its distance class, within ``sigmas`` standard errors.
    """
    from .generators import path_edges
    from .graph import build_graph

    if isinstance(dec, DecisionRule):
        if not dec.is_dyadic:
            raise ValueError("local consistency applies to dyadic rules")
        rule = dec

        def decide(g, members, r):
            return decide_dyad(g, members, rule, r)
    else:
        decide = dec

    g = build_graph(path_edges(line_length), line_length)
    for d in range(1, line_length):
        per_position = []
        for a in range(line_length - d):
            freq = np.zeros(d + 1)
            for _ in range(trials):
                members = [a, a + d] if rng.random() < 0.5 else [a + d, a]
                dest = decide(g, members, rng)
                if not a <= dest <= a + d:
                    return False
                freq[dest - a] += 1
            per_position.append(freq / trials)
        pooled = np.mean(per_position, axis=0)
        n_pooled = trials * len(per_position)
        for freq in per_position:
            if not _close(freq, freq[::-1], trials, trials, sigmas):
                return False
            if not _close(freq, pooled, trials, n_pooled, sigmas):
                return False
    return True


def _close(p1: np.ndarray, p2: np.ndarray, n1: int, n2: int, sigmas: float) -> bool:
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    se = np.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    return bool(np.all(np.abs(p1 - p2) <= sigmas * se + 1e-12))


def owners_from(nodes: Iterable[int]) -> TokenState:
    return TokenState(np.fromiter(nodes, dtype=np.int32))


def mean_increments(
    g: OpinionGraph,
    p: OpinionProfile,
    k: int,
    dec: DecisionRule,
    rng: np.random.Generator,
    steps: int,
    embedding: Sequence[float] | None = None,
) -> np.ndarray:
    """Per-round change of the token mean over ``steps`` rounds, restarting after consensus."""
    table = np.arange(g.node_count, dtype=float) if embedding is None else np.asarray(embedding, dtype=float)
    start = init_tokens(p, k)
    n_tokens = start.total_tokens
    out = np.empty(steps)
    owners = start.owners.copy()
    counts = start.counts(g.node_count)
    bg = rng.bit_generator
    for t in range(steps):
        if counts.max() == n_tokens:
            owners = start.owners.copy()
            counts = start.counts(g.node_count)
        before = owners.copy()
        selected, _, _, status = _fallback.step_tokens(dec.value, g.indptr, g.indices, g.dist, owners, counts, bg)
        _raise_status(status)
        idx = np.unique(selected)
        out[t] = (table[owners[idx]] - table[before[idx]]).sum() / n_tokens
    return out
