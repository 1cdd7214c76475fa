"""Exact oracles and Monte Carlo statistics.

The two-sided urn is the token count on one side of a cut under triad-median
moves: each round draws three tokens and the majority side gains the minority
token. Its absorption law has a binomial closed form that is checked here
against a plain linear solve of the first-step equations.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.stats import norm

from . import _backend, _fallback
from .dynamics import DYNAMICS, default_step_cap, init_tokens, run
from .errors import DegenerateProfile, NotMedianGraph, OutOfRange
from .generators import GeneratorSpec, build_family, generate, parse_spec
from .graph import EdgeCut, OpinionGraph, OpinionProfile, distance_sums
from .rng import child

EXACT_SOLVER_LIMIT = 200


def _check_state(n: int, x: int) -> None:
    if n < 1 or not 0 <= x <= n:
        raise OutOfRange(f"state {x} outside [0, {n}]")


def urn_transition(n: int, x: int) -> tuple[Fraction, Fraction, Fraction]:
    """(up, down, stay) probabilities from ``x`` of ``n`` tokens, as exact fractions."""
    _check_state(n, x)
    y = n - x
    n3 = n**3
    return Fraction(3 * x * x * y, n3), Fraction(3 * x * y * y, n3), Fraction(x**3 + y**3, n3)


@dataclass(frozen=True)
class AbsorptionResult:
    n: int
    hit_probability: tuple  # per start state 0..n
    expected_time: tuple
    exact: bool

    def hit(self, x: int) -> float:
        return float(self.hit_probability[x])


def _thomas(lower: list, diag: list, upper: list, rhs: list) -> list:
    # tridiagonal elimination, works on Fractions or floats alike
    m = len(diag)
    c = [upper[0] / diag[0]]
    d = [rhs[0] / diag[0]]
    for i in range(1, m):
        denom = diag[i] - lower[i] * c[i - 1]
        c.append(upper[i] / denom if i < m - 1 else 0)
        d.append((rhs[i] - lower[i] * d[i - 1]) / denom)
    out = [d[-1]] * m
    for i in range(m - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def absorption_solver(n: int, exact: bool | None = None) -> AbsorptionResult:
    """Hit-``n`` probabilities and expected absorption times for every start state.

    Interior first-step equations ``(up+down) h(x) = up h(x+1) + down h(x-1)`` are
    solved directly: in exact rationals up to ``EXACT_SOLVER_LIMIT``, otherwise in
    floating point with a banded solver.
    """
    if n < 1:
        raise OutOfRange("n must be at least 1")
    if exact is None:
        exact = n <= EXACT_SOLVER_LIMIT
    if n == 1:
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        return AbsorptionResult(1, (zero, one), (zero, zero), exact)
    m = n - 1
    ups, downs = [], []
    for x in range(1, n):
        up, down, _ = urn_transition(n, x)
        ups.append(up if exact else float(up))
        downs.append(down if exact else float(down))
    diag = [u + d for u, d in zip(ups, downs)]
    lower = [-d for d in downs]
    upper = [-u for u in ups]
    zero = Fraction(0) if exact else 0.0
    hit_rhs = [zero] * m
    hit_rhs[-1] = ups[-1]  # h(n) = 1
    time_rhs = [Fraction(1) if exact else 1.0] * m
    if exact:
        hit = _thomas(lower, diag, upper, hit_rhs)
        times = _thomas(lower, diag, upper, time_rhs)
    else:
        bands = np.zeros((3, m))
        bands[0, 1:] = upper[:-1]
        bands[1] = diag
        bands[2, :-1] = lower[1:]
        rhs = np.column_stack([hit_rhs, time_rhs])
        sol = solve_banded((1, 1), bands, rhs)
        hit, times = list(sol[:, 0]), list(sol[:, 1])
    one = Fraction(1) if exact else 1.0
    return AbsorptionResult(n, (zero, *hit, one), (zero, *times, zero), exact)


def urn_closed_form(n: int, x0: int, exact: bool = False) -> float | Fraction:
    """Probability the urn started at ``x0`` absorbs at ``n``: a binomial tail at one half."""
    _check_state(n, x0)
    total = sum(math.comb(n - 1, j - 1) for j in range(1, x0 + 1))
    value = Fraction(total, 2 ** (n - 1))
    return value if exact else float(value)


def simulate_urn(n: int, x0: int, trials: int, seed: int) -> int:
    """Absorptions at ``n`` out of ``trials`` runs, simulated as triad-median tokens on one edge."""
    _check_state(n, x0)
    g = build_family("path", {"length": 2})
    hits = 0
    cap = default_step_cap(n) * 10
    for t in range(trials):
        owners = np.zeros(n, dtype=np.int32)
        owners[x0:] = 1
        counts = np.array([x0, n - x0], dtype=np.int64)
        _, status = _backend.run_tokens(
            _fallback.TRIAD_MEDIAN, g.indptr, g.indices, g.dist, owners, counts, child(seed, t).bit_generator, cap
        )
        if status != _fallback.CONVERGED:
            raise RuntimeError("urn simulation hit its step cap")
        hits += int(counts[0] == n)
    return hits


def approx_ratio(g: OpinionGraph, p: OpinionProfile, x_hat: int, sums: np.ndarray | None = None) -> float:
    """D(x_hat) / D(x*). A profile with zero optimum gives 1.0 at a minimizer and raises otherwise."""
    if sums is None:
        sums = distance_sums(g, p)
    best = int(sums.min())
    here = int(sums[g.check_node(x_hat)])
    if best == 0:
        if here == 0:
            return 1.0
        raise DegenerateProfile("optimum cost is zero; ratio is infinite")
    return here / best


def edge_cut_counts(g: OpinionGraph, p: OpinionProfile, cut: EdgeCut) -> tuple[int, int]:
    """Participant counts on the larger and smaller side of a cut."""
    if not g.is_median:
        raise NotMedianGraph("cut projections need a median graph")
    mask = np.zeros(g.node_count, dtype=bool)
    mask[list(cut.side_u)] = True
    a = int(p.counts[mask].sum())
    b = int(p.counts[~mask].sum())
    return max(a, b), min(a, b)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials or not 0 < confidence < 1:
        raise OutOfRange(f"bad wilson arguments {successes}/{trials} at {confidence}")
    z = float(norm.ppf(0.5 + confidence / 2))
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


# --- experiment runner -------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    spec: GeneratorSpec
    dynamic: str = "triad-median"
    tokens: int = 1
    trials: int = 100
    cap: int | None = None

    def __post_init__(self):
        if self.dynamic not in DYNAMICS:
            raise ValueError(f"unknown dynamic {self.dynamic!r}; choose from {sorted(DYNAMICS)}")
        if self.tokens < 1 or self.trials < 0 or (self.cap is not None and self.cap < 1):
            raise ValueError("tokens and cap must be positive, trials non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "dynamic": self.dynamic,
            "tokens": self.tokens,
            "trials": self.trials,
            "cap": self.cap,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        return cls(
            parse_spec(doc["spec"]),
            doc.get("dynamic", "triad-median"),
            int(doc.get("tokens", 1)),
            int(doc.get("trials", 100)),
            doc.get("cap"),
        )

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TrialRow:
    trial: int
    winner: int | None
    rounds: int
    ratio: float


@dataclass
class TrialReport:
    rows: list[TrialRow]
    seed: int
    config_hash: str
    confidence: float = 0.95
    wins: dict[int, int] = field(init=False)

    def __post_init__(self):
        wins: dict[int, int] = {}
        for row in self.rows:
            if row.winner is not None:
                wins[row.winner] = wins.get(row.winner, 0) + 1
        self.wins = dict(sorted(wins.items()))

    @property
    def trials(self) -> int:
        return len(self.rows)

    @property
    def unterminated(self) -> int:
        return sum(row.winner is None for row in self.rows)

    def win_fraction(self, nodes: int | Sequence[int]) -> float:
        if not self.rows:
            return 0.0
        nodes = [nodes] if isinstance(nodes, (int, np.integer)) else list(nodes)
        return sum(self.wins.get(int(v), 0) for v in nodes) / self.trials

    def _terminated(self, attr: str) -> np.ndarray:
        return np.array([getattr(r, attr) for r in self.rows if r.winner is not None], dtype=float)

    @property
    def ratios(self) -> np.ndarray:
        return self._terminated("ratio")

    @property
    def rounds(self) -> np.ndarray:
        return self._terminated("rounds")

    def _stat(self, values: np.ndarray, fn) -> float | None:
        return float(fn(values)) if values.size else None

    @property
    def mean_ratio(self):
        return self._stat(self.ratios, np.mean)

    @property
    def p95_ratio(self):
        return self._stat(self.ratios, lambda v: np.percentile(v, 95))

    @property
    def mean_T(self):
        return self._stat(self.rounds, np.mean)

    @property
    def median_T(self):
        return self._stat(self.rounds, np.median)

    def ci(self) -> dict[int, tuple[float, float]]:
        return {v: wilson_interval(c, self.trials, self.confidence) for v, c in self.wins.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "winner", "rounds", "ratio"])
        for r in self.rows:
            writer.writerow([r.trial, "" if r.winner is None else r.winner, r.rounds, repr(r.ratio)])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "unterminated": self.unterminated,
            "wins": {str(v): c for v, c in self.wins.items()},
            "mean_ratio": self.mean_ratio,
            "p95_ratio": self.p95_ratio,
            "mean_T": self.mean_T,
            "median_T": self.median_T,
            "ci": {str(v): list(b) for v, b in self.ci().items()},
            "seed": self.seed,
            "config_hash": self.config_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _one_trial(g, p, sums, sel, dec, k, cap, seed, t) -> TrialRow:
    trace = run(g, p, k, sel, dec, child(seed, t), step_cap=cap)
    if trace.winner is None:
        return TrialRow(t, None, trace.rounds_elapsed, math.inf)
    try:
        ratio = approx_ratio(g, p, trace.winner, sums)
    except DegenerateProfile:
        ratio = math.inf
    return TrialRow(t, trace.winner, trace.rounds_elapsed, ratio)


def run_experiment(
    config: ExperimentConfig,
    master_seed: int,
    threads: int | None = None,
    graph: tuple[OpinionGraph, OpinionProfile] | None = None,
) -> TrialReport:
    """Run ``config.trials`` seeded trials; trial ``t`` uses stream child(master_seed, t).

    Trials run on a thread pool (the compiled loop releases the GIL); rows are
    merged by trial index so the report does not depend on ``threads``.
    """
    g, p = graph if graph is not None else generate(config.spec)
    sel, dec = DYNAMICS[config.dynamic]
    sums = distance_sums(g, p)
    cap = config.cap if config.cap is not None else default_step_cap(init_tokens(p, config.tokens).total_tokens)
    if g.node_count <= 500:
        g.is_median  # warm the cached check before threads share the graph
    workers = threads or os.cpu_count() or 1
    args = (g, p, sums, sel, dec, config.tokens, cap, master_seed)
    if workers <= 1 or config.trials <= 1:
        rows = [_one_trial(*args, t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _one_trial(*args, t), range(config.trials)))
    rows.sort(key=lambda r: r.trial)
    return TrialReport(rows, int(master_seed), config.config_hash)
