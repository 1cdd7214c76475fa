"""Graph families, opinion profiles, and the JSON spec loader.

Node numbering: grids are row-major (last coordinate fastest), trees are in BFS
order from the root (id 0), stars put the root at 0 and leaves at 1..L,
hypercube nodes are their coordinate bit patterns.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Mapping

import numpy as np

from .errors import IndivisibleRemainder, InvalidSpec, ParseError, SchemaError
from .graph import OpinionGraph, OpinionProfile, build_graph

FAMILY_PARAMS: dict[str, tuple[str, ...]] = {
    "path": ("length",),
    "grid": ("size", "dims"),
    "tree": ("branching", "height"),
    "star": ("leaves",),
    "hypercube": ("dimension",),
    "cycle": ("length",),
    "complete": ("size",),
    "explicit": ("nodes", "edges"),
}

PROFILE_KINDS = ("uniform_k", "counts", "dyadic_counterexample", "grid_nine", "star_root")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)
    profile: Mapping[str, Any] = field(default_factory=lambda: {"uniform_k": 1})

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family}
        out.update(self.params)
        out["profile"] = dict(self.profile)
        return out


def path_edges(m: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(m - 1)]


def grid_edges(size: int, dims: int = 2) -> tuple[int, list[tuple[int, int]]]:
    count = size**dims
    edges = []
    for node in range(count):
        stride = 1
        for axis in range(dims):
            coord = (node // stride) % size
            if coord + 1 < size:
                edges.append((node, node + stride))
            stride *= size
    return count, edges


def grid_node(size: int, *coords: int) -> int:
    """Row-major id of a grid point: ``grid_node(k, row, col)``."""
    node = 0
    for c in coords:
        node = node * size + c
    return node


def tree_edges(branching: int, height: int) -> tuple[int, list[tuple[int, int]]]:
    count = sum(branching**level for level in range(height + 1))
    edges = [(parent, branching * parent + j) for parent in range(count) for j in range(1, branching + 1)
             if branching * parent + j < count]
    return count, edges


def hypercube_edges(dimension: int) -> tuple[int, list[tuple[int, int]]]:
    count = 1 << dimension
    edges = [(x, x ^ (1 << b)) for x in range(count) for b in range(dimension) if not x & (1 << b)]
    return count, edges


def _positive(params: Mapping[str, Any], key: str, default: int | None = None) -> int:
    value = params.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InvalidSpec(f"{key} must be a positive integer, got {value!r}")
    return value


def build_family(family: str, params: Mapping[str, Any]) -> OpinionGraph:
    if family == "path":
        m = _positive(params, "length")
        return build_graph(path_edges(m), m)
    if family == "grid":
        count, edges = grid_edges(_positive(params, "size"), _positive(params, "dims", 2))
        return build_graph(edges, count)
    if family == "tree":
        count, edges = tree_edges(_positive(params, "branching", 2), _nonneg(params, "height"))
        return build_graph(edges, count)
    if family == "star":
        leaves = _positive(params, "leaves")
        return build_graph([(0, j) for j in range(1, leaves + 1)], leaves + 1)
    if family == "hypercube":
        count, edges = hypercube_edges(_positive(params, "dimension"))
        return build_graph(edges, count)
    if family == "cycle":
        m = _positive(params, "length")
        if m < 3:
            raise InvalidSpec("cycle needs length >= 3")
        return build_graph(path_edges(m) + [(m - 1, 0)], m)
    if family == "complete":
        m = _positive(params, "size")
        return build_graph([(i, j) for i in range(m) for j in range(i + 1, m)], m)
    if family == "explicit":
        nodes = _positive(params, "nodes")
        edges = params.get("edges")
        if not isinstance(edges, list) or not all(
            isinstance(e, (list, tuple)) and len(e) == 2 and all(isinstance(v, int) for v in e) for e in edges
        ):
            raise InvalidSpec("edges must be a list of [int, int] pairs")
        return build_graph(edges, nodes)
    raise InvalidSpec(f"unknown family {family!r}")


def _nonneg(params: Mapping[str, Any], key: str) -> int:
    value = params.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise InvalidSpec(f"{key} must be a non-negative integer, got {value!r}")
    return value


def star_root_profile(
    leaves: int, j: int, n: int, graph: OpinionGraph | None = None, spread: bool = False
) -> OpinionProfile:
    """``j`` participants at the root and the other ``n - j`` split evenly over the leaves.

    With ``spread=True`` an indivisible remainder goes one extra participant to each of
    the lowest-numbered leaves instead of raising.
    """
    if leaves < 1 or not 0 <= j <= n or n < 1:
        raise InvalidSpec(f"bad star profile leaves={leaves} j={j} n={n}")
    each, rest = divmod(n - j, leaves)
    if rest and not spread:
        raise IndivisibleRemainder(f"{n - j} participants do not split over {leaves} leaves")
    if graph is None:
        graph = build_family("star", {"leaves": leaves})
    elif graph.node_count != leaves + 1:
        raise InvalidSpec("graph is not a star with that many leaves")
    counts = np.zeros(leaves + 1, dtype=np.int64)
    counts[0] = j
    counts[1:] = each
    counts[1 : 1 + rest] += 1
    return OpinionProfile(graph, counts)


def _profile(graph: OpinionGraph, profile: Mapping[str, Any]) -> OpinionProfile:
    if not isinstance(profile, Mapping) or len(profile) != 1:
        raise SchemaError("profile must be an object with exactly one kind")
    (kind, value), = profile.items()
    if kind == "uniform_k":
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise InvalidSpec("uniform_k must be a positive integer")
        return OpinionProfile(graph, np.full(graph.node_count, value, dtype=np.int64))
    if kind == "counts":
        if not isinstance(value, Mapping):
            raise SchemaError("counts must map node ids to multiplicities")
        try:
            mapping = {int(k): int(v) for k, v in value.items()}
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad counts entry: {exc}") from exc
        if any(v < 0 for v in mapping.values()):
            raise InvalidSpec("counts must be non-negative")
        if sum(mapping.values()) < 1:
            raise InvalidSpec("profile needs at least one participant")
        try:
            return OpinionProfile.from_mapping(graph, mapping)
        except Exception as exc:
            raise InvalidSpec(str(exc)) from exc
    if kind == "dyadic_counterexample":
        k = _positive(_expect_keys(value, {"k"}), "k")
        if graph.node_count != k + 1 or not graph.is_path:
            raise InvalidSpec("dyadic_counterexample(k) needs the path 0..k")
        counts = np.ones(k + 1, dtype=np.int64)
        counts[0] = k + 1
        return OpinionProfile(graph, counts)
    if kind == "grid_nine":
        k = _positive(_expect_keys(value, {"k"}), "k")
        if graph.node_count != k * k:
            raise InvalidSpec("grid_nine(k) needs a k x k grid")
        return OpinionProfile(graph, np.full(k * k, 9, dtype=np.int64))
    if kind == "star_root":
        value = _expect_keys(value, {"leaves", "j", "n"}, optional={"spread"})
        return star_root_profile(
            _positive(value, "leaves"),
            _nonneg(value, "j"),
            _positive(value, "n"),
            graph=graph,
            spread=bool(value.get("spread", False)),
        )
    raise SchemaError(f"unknown profile kind {kind!r}")


def _expect_keys(value: Any, required: set[str], optional: set[str] = frozenset()) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise SchemaError("profile parameters must be an object")
    missing = required - value.keys()
    extra = value.keys() - required - optional
    if missing or extra:
        raise SchemaError(f"profile keys: missing {sorted(missing)}, unknown {sorted(extra)}")
    return value


def _implied_params(family: str, params: dict[str, Any], profile: Mapping[str, Any]) -> dict[str, Any]:
    # some profiles fix their graph size; fill it in when omitted
    if not isinstance(profile, Mapping) or len(profile) != 1:
        return params
    kind, value = next(iter(profile.items()))
    if kind == "dyadic_counterexample" and family == "path" and isinstance(value, Mapping):
        params.setdefault("length", value.get("k", 0) + 1)
    if kind == "grid_nine" and family == "grid" and isinstance(value, Mapping):
        params.setdefault("size", value.get("k"))
    if kind == "star_root" and family == "star" and isinstance(value, Mapping):
        params.setdefault("leaves", value.get("leaves"))
    return params


def generate(spec: GeneratorSpec) -> tuple[OpinionGraph, OpinionProfile]:
    """Deterministically build the graph and profile a spec describes."""
    if spec.family not in FAMILY_PARAMS:
        raise InvalidSpec(f"unknown family {spec.family!r}")
    unknown = set(spec.params) - set(FAMILY_PARAMS[spec.family])
    if unknown:
        raise SchemaError(f"unknown keys for {spec.family}: {sorted(unknown)}")
    params = _implied_params(spec.family, dict(spec.params), spec.profile)
    graph = build_family(spec.family, params)
    return graph, _profile(graph, spec.profile)


def parse_spec(doc: Mapping[str, Any]) -> GeneratorSpec:
    if not isinstance(doc, Mapping):
        raise SchemaError("spec must be a JSON object")
    family = doc.get("family")
    if not isinstance(family, str):
        raise SchemaError("family must be a string")
    if family not in FAMILY_PARAMS:
        raise SchemaError(f"unknown family {family!r}")
    allowed = {"family", "profile", *FAMILY_PARAMS[family]}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"unknown keys: {sorted(unknown)}")
    profile = doc.get("profile", {"uniform_k": 1})
    if not isinstance(profile, Mapping) or len(profile) != 1 or next(iter(profile)) not in PROFILE_KINDS:
        raise SchemaError(f"profile must hold exactly one of {PROFILE_KINDS}")
    params = {k: v for k, v in doc.items() if k not in ("family", "profile")}
    return GeneratorSpec(family, params, dict(profile))


def load_spec(text: str | bytes) -> tuple[OpinionGraph, OpinionProfile]:
    """Parse a JSON spec document and generate it."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return generate(parse_spec(doc))


def grid_coords(size: int, node: int, dims: int = 2) -> tuple[int, ...]:
    coords = []
    for _ in range(dims):
        coords.append(node % size)
        node //= size
    return tuple(reversed(coords))


def grid_block(size: int, center: tuple[int, ...], radius: int) -> list[int]:
    """Grid nodes within ``radius`` of ``center`` in every coordinate."""
    ranges = [range(max(0, c - radius), min(size, c + radius + 1)) for c in center]
    return [grid_node(size, *pt) for pt in product(*ranges)]
