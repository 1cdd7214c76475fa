"""Named reproduction experiments driven by the shipped manifest.

Configs, seeds and tolerances live in ``reproductions.json`` so they can be
reviewed without reading code. Each runner returns a list of checks that carry
the observed value next to the registered bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Mapping

from .analytics import ExperimentConfig, run_experiment
from .dynamics import DYNAMICS, mean_increments
from .generators import GeneratorSpec, generate, grid_block
from .rng import make_rng


@dataclass(frozen=True)
class Check:
    label: str
    observed: float
    expected: str
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.label}: observed {self.observed:.4f}, expected {self.expected}"


def load_manifest() -> dict[str, Any]:
    text = resources.files(__package__).joinpath("reproductions.json").read_text()
    return json.loads(text)


def names() -> list[str]:
    return sorted(load_manifest()["reproductions"])


def _bounds(check: Mapping[str, Any]) -> str:
    lo, hi = check.get("min"), check.get("max")
    if lo is not None and hi is not None:
        return f"in [{lo}, {hi}]"
    return f">= {lo}" if lo is not None else f"<= {hi}"


def _within(value: float, check: Mapping[str, Any]) -> bool:
    lo, hi = check.get("min"), check.get("max")
    return (lo is None or value >= lo) and (hi is None or value <= hi)


def _nodes(check: Mapping[str, Any]) -> list[int]:
    if "nodes" in check:
        return list(check["nodes"])
    block = check["grid_block"]
    return grid_block(block["size"], tuple(block["center"]), block["radius"])


def run_win_rates(entry: Mapping[str, Any], threads: int | None = None) -> list[Check]:
    config = ExperimentConfig.from_dict(entry["config"])
    report = run_experiment(config, entry["seed"], threads=threads)
    out = []
    for check in entry["checks"]:
        rate = report.win_fraction(_nodes(check))
        out.append(Check(f"{check['label']} win rate", rate, _bounds(check), _within(rate, check)))
    return out


def _star_config(leaves: int, j: int, n: int, trials: int) -> ExperimentConfig:
    spec = GeneratorSpec("star", {}, {"star_root": {"leaves": leaves, "j": j, "n": n, "spread": True}})
    return ExperimentConfig(spec, "restricted", 1, trials)


def run_star(entry: Mapping[str, Any], threads: int | None = None) -> list[Check]:
    n, leaves, trials = entry["participants"], entry["leaves"], entry["trials"]
    base = math.ceil(math.sqrt(n * math.log(n)))
    rates = {}
    for mult in entry["multipliers"]:
        report = run_experiment(_star_config(leaves, mult * base, n, trials), entry["seed"] + mult, threads=threads)
        rates[mult] = report.win_fraction(0)
    head = entry["headline_multiplier"]
    out = [
        Check(
            f"root win rate at j={head * base}",
            rates[head],
            f">= {entry['min_root_rate']}",
            rates[head] >= entry["min_root_rate"],
        )
    ]
    mults = entry["multipliers"]
    for a, b in zip(mults, mults[1:]):
        pa, pb = rates[a], rates[b]
        se = math.sqrt((pa * (1 - pa) + pb * (1 - pb)) / trials)
        drop = pa - pb
        out.append(
            Check(
                f"win rate drop from j={a * base} to j={b * base}",
                drop,
                f"<= {entry['sigma']} pooled SE ({entry['sigma'] * se:.4f})",
                drop <= entry["sigma"] * se + 1e-12,
            )
        )
    return out


def run_dyadic(entry: Mapping[str, Any], threads: int | None = None) -> list[Check]:
    spec = GeneratorSpec("path", {}, {"dyadic_counterexample": {"k": entry["k"]}})
    g, p = generate(spec)
    out = []
    for i, dyn in enumerate(entry["dynamics"]):
        config = ExperimentConfig(spec, dyn, 1, entry["trials"])
        report = run_experiment(config, entry["seed"] + i, threads=threads, graph=(g, p))
        ratio = report.mean_ratio if report.mean_ratio is not None else math.inf
        if report.unterminated:
            ratio = math.inf
        out.append(
            Check(f"{dyn} mean ratio", ratio, f">= {entry['min_mean_ratio']}", ratio >= entry["min_mean_ratio"])
        )
        inc = mean_increments(g, p, 1, DYNAMICS[dyn][1], make_rng(entry["seed"], 1000 + i), entry["drift_steps"])
        z = abs(inc.mean()) / (inc.std(ddof=1) / math.sqrt(inc.size))
        out.append(
            Check(f"{dyn} token-mean drift (z-score)", z, f"<= {entry['drift_sigma']}", z <= entry["drift_sigma"])
        )
    return out


def _line_config(n: int, trials: int) -> ExperimentConfig:
    return ExperimentConfig(GeneratorSpec("path", {"length": n}), "triad-median", 1, trials)


def run_time_scaling(entry: Mapping[str, Any], threads: int | None = None) -> list[Check]:
    scaled = []
    for i, n in enumerate(entry["sizes"]):
        report = run_experiment(_line_config(n, entry["trials"]), entry["seed"] + i, threads=threads)
        median = report.median_T if report.unterminated == 0 else math.inf
        scaled.append(median / (n * math.log(n) ** 2))
    out = []
    sizes = entry["sizes"]
    for (a, sa), (b, sb) in zip(zip(sizes, scaled), zip(sizes[1:], scaled[1:])):
        out.append(
            Check(
                f"median T/(n ln^2 n) at n={b} over n={a}",
                sb / sa,
                f"<= {1 + entry['slack']}",
                sb <= sa * (1 + entry["slack"]),
            )
        )
    return out


def run_approx_scaling(entry: Mapping[str, Any], threads: int | None = None) -> list[Check]:
    head = run_experiment(
        _line_config(entry["headline_size"], entry["headline_trials"]), entry["seed"], threads=threads
    )
    p95 = head.p95_ratio if head.unterminated == 0 else math.inf
    mean = head.mean_ratio if head.unterminated == 0 else math.inf
    out = [
        Check(f"p95 ratio at n={entry['headline_size']}", p95, f"<= {entry['max_p95_ratio']}", p95 <= entry["max_p95_ratio"]),
        Check(f"mean ratio at n={entry['headline_size']}", mean, f"<= {entry['max_mean_ratio']}", mean <= entry["max_mean_ratio"]),
    ]
    excess = []
    for i, n in enumerate(entry["sizes"]):
        report = run_experiment(_line_config(n, entry["trials"]), entry["seed"] + 1 + i, threads=threads)
        excess.append(report.p95_ratio - 1 if report.unterminated == 0 else math.inf)
    sizes = entry["sizes"]
    for i in range(len(sizes) - 1):
        shrink = excess[i] / excess[i + 1] if excess[i + 1] > 0 else math.inf
        out.append(
            Check(
                f"p95 excess shrink from n={sizes[i]} to n={sizes[i + 1]}",
                shrink,
                f">= {entry['min_shrink']}",
                shrink >= entry["min_shrink"],
            )
        )
    return out


RUNNERS: dict[str, Callable[..., list[Check]]] = {
    "win_rates": run_win_rates,
    "star": run_star,
    "dyadic": run_dyadic,
    "time_scaling": run_time_scaling,
    "approx_scaling": run_approx_scaling,
}


def reproduce(name: str, threads: int | None = None, manifest: Mapping[str, Any] | None = None) -> list[Check]:
    """Run the registered experiment ``name``; raises KeyError for unknown names."""
    entries = (manifest or load_manifest())["reproductions"]
    entry = entries[name]
    return RUNNERS[entry["kind"]](entry, threads=threads)


def all_passed(checks: list[Check]) -> bool:
    return bool(checks) and all(c.passed for c in checks)

