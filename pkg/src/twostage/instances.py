"""Problem instances and their JSON wire format.

Four problem kinds share one file layout: ``kind``, ``sigma``, ``lambda``,
item data (``weights`` plus structure, or facility cost blocks), and
``scenarios`` as ``[{"p": .., "clients": [..]}]``.  Ids are dense
nonnegative integers; clients are element ids for set cover, edge ids for
vertex cover, client ids for facility location, terminal vertices for
Steiner.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import CostPolicy, ScenarioSet

__all__ = [
    "InstanceError",
    "SetCoverInstance",
    "VertexCoverInstance",
    "UflInstance",
    "MetricGraph",
    "SteinerInstance",
    "load_instance",
    "save_instance",
    "instance_from_dict",
    "instance_to_dict",
]

GEOM_TOL = 1e-9


class InstanceError(ValueError):
    """Instance data violates its structural invariants."""


def _check_scenarios(scen: ScenarioSet, limit: int, what: str) -> None:
    for k, (_, clients) in enumerate(scen.scenarios):
        bad = [c for c in clients if not 0 <= c < limit]
        if bad:
            raise InstanceError(f"scenario {k} references unknown {what}: {sorted(bad)}")


@dataclass(frozen=True)
class SetCoverInstance:
    """Weighted set cover; items are sets, demand points are elements."""

    n_elements: int
    sets: tuple[frozenset[int], ...]
    weights: tuple[float, ...]
    policy: CostPolicy
    scenarios: ScenarioSet

    def __post_init__(self) -> None:
        if len(self.sets) != len(self.weights):
            raise InstanceError("one weight per set required")
        for s, members in enumerate(self.sets):
            bad = [e for e in members if not 0 <= e < self.n_elements]
            if bad:
                raise InstanceError(f"set {s} references unknown elements {sorted(bad)}")
        _check_scenarios(self.scenarios, self.n_elements, "elements")

    kind = "set_cover"

    @property
    def n_items(self) -> int:
        return len(self.sets)

    def incidence(self) -> np.ndarray:
        """Boolean (n_elements, n_items): which items cover which element."""
        m = np.zeros((self.n_elements, self.n_items), dtype=bool)
        for s, members in enumerate(self.sets):
            for e in members:
                m[e, s] = True
        return m

    def covering_items(self, element: int) -> tuple[int, ...]:
        return tuple(s for s, members in enumerate(self.sets) if element in members)

    def covers_demand(self, clients: frozenset[int], items: frozenset[int]) -> bool:
        covered: set[int] = set()
        for s in items:
            covered |= self.sets[s]
        return clients <= covered


@dataclass(frozen=True)
class VertexCoverInstance:
    """Vertex cover as covering: items are vertices, demand points are edges."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    policy: CostPolicy
    scenarios: ScenarioSet

    def __post_init__(self) -> None:
        if len(self.weights) != self.n_vertices:
            raise InstanceError("one weight per vertex required")
        for e, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices) or u == v:
                raise InstanceError(f"edge {e} = ({u}, {v}) is not a proper edge")
        _check_scenarios(self.scenarios, len(self.edges), "edges")

    kind = "vertex_cover"

    @property
    def n_items(self) -> int:
        return self.n_vertices

    @property
    def n_elements(self) -> int:
        return len(self.edges)

    def incidence(self) -> np.ndarray:
        m = np.zeros((len(self.edges), self.n_vertices), dtype=bool)
        for e, (u, v) in enumerate(self.edges):
            m[e, u] = True
            m[e, v] = True
        return m

    def covering_items(self, element: int) -> tuple[int, ...]:
        u, v = self.edges[element]
        return (u, v) if u < v else (v, u)

    def covers_demand(self, clients: frozenset[int], items: frozenset[int]) -> bool:
        return all(self.edges[e][0] in items or self.edges[e][1] in items for e in clients)


@dataclass(frozen=True)
class UflInstance:
    """Uncapacitated facility location with per-facility recourse prices.

    ``open_cost[i]`` is the ground opening price f_i^0, ``scenario_open_cost[k][i]``
    the inflated price f_i^k >= f_i^0 when facility i is bought only after
    scenario k materializes.  Demands are 0/1: client j is demanded in
    scenario k iff j is listed among that scenario's clients.
    """

    open_cost: tuple[float, ...]
    scenario_open_cost: tuple[tuple[float, ...], ...]
    distance: tuple[tuple[float, ...], ...]
    sigma: float
    scenarios: ScenarioSet

    def __post_init__(self) -> None:
        if not 0.0 < self.sigma < 1.0:
            raise InstanceError(f"sigma must be in (0, 1), got {self.sigma}")
        n_i = len(self.open_cost)
        if len(self.distance) != n_i:
            raise InstanceError("one distance row per facility required")
        if len(self.scenario_open_cost) != len(self.scenarios):
            raise InstanceError("one scenario cost row per scenario required")
        for k, row in enumerate(self.scenario_open_cost):
            if len(row) != n_i:
                raise InstanceError(f"scenario {k} cost row has wrong arity")
            for i, (f0, fk) in enumerate(zip(self.open_cost, row)):
                if f0 < 0 or fk < f0 - GEOM_TOL:
                    raise InstanceError(
                        f"facility {i}: need f^{k} >= f^0 >= 0, got {fk} < {f0}"
                    )
        _check_scenarios(self.scenarios, self.n_clients, "clients")
        self._check_triangle()

    def _check_triangle(self) -> None:
        # The 3-hop inequality c[i,j] <= c[i',j] + c[i',j'] + c[i,j'] is what
        # every distance argument in the roundings actually uses.
        c = self.dist
        n_i, n_j = c.shape
        for i in range(n_i):
            for j in range(n_j):
                detour = c[:, j][:, None] + c + c[i, :][None, :]
                if c[i, j] > detour.min() + GEOM_TOL:
                    raise InstanceError(
                        f"distances break the facility-client triangle rule at ({i}, {j})"
                    )

    kind = "ufl"

    @property
    def n_facilities(self) -> int:
        return len(self.open_cost)

    @property
    def n_clients(self) -> int:
        return len(self.distance[0]) if self.distance else 0

    @property
    def n_items(self) -> int:
        return self.n_facilities

    @property
    def dist(self) -> np.ndarray:
        return np.asarray(self.distance, dtype=float)

    @property
    def lam(self) -> float:
        """Worst per-facility inflation, the lambda used for SAA sample counts."""
        worst = 1.0
        for row in self.scenario_open_cost:
            for f0, fk in zip(self.open_cost, row):
                if f0 > 0:
                    worst = max(worst, fk / f0)
                elif fk > 0:
                    return math.inf
        return worst

    def demanded(self, k: int) -> tuple[int, ...]:
        return tuple(sorted(self.scenarios.scenarios[k][1]))

    def covers_demand(self, clients: frozenset[int], items: frozenset[int]) -> bool:
        return not clients or bool(items)


@dataclass(frozen=True)
class MetricGraph:
    """Connected weighted graph with a root; items are edge ids."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    root: int = 0

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.weights):
            raise InstanceError("one weight per edge required")
        if not 0 <= self.root < self.n_vertices:
            raise InstanceError(f"root {self.root} is not a vertex")
        for e, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices) or u == v:
                raise InstanceError(f"edge {e} = ({u}, {v}) is not a proper edge")
        if any(w < 0 for w in self.weights):
            raise InstanceError("edge weights must be nonnegative")
        if not self._connected():
            raise InstanceError("graph must be connected")

    def _connected(self) -> bool:
        if self.n_vertices == 0:
            return False
        seen = {0}
        frontier = [0]
        adj: dict[int, list[int]] = {v: [] for v in range(self.n_vertices)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return len(seen) == self.n_vertices

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def shortest_paths(
        self, edge_price: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """All-pairs distances and next-hop matrix under optional edge prices.

        Floyd-Warshall with strict improvement only, so tie-breaks are fixed
        by edge order and results are deterministic.
        """
        n = self.n_vertices
        price = np.asarray(self.weights, dtype=float) if edge_price is None else edge_price
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0.0)
        nxt = np.tile(np.arange(n), (n, 1))
        for e, (u, v) in enumerate(self.edges):
            if price[e] < d[u, v]:
                d[u, v] = d[v, u] = price[e]
                nxt[u, v] = v
                nxt[v, u] = u
        for k in range(n):
            via = d[:, k][:, None] + d[k, :][None, :]
            better = via < d - 1e-15
            d = np.where(better, via, d)
            nxt = np.where(better, nxt[:, k][:, None], nxt)
        return d, nxt

    def path_edges(
        self, nxt: np.ndarray, u: int, v: int, edge_price: np.ndarray | None = None
    ) -> list[int]:
        """Edge ids along the reconstructed u-v shortest path.

        Parallel edges are resolved by the same prices the next-hop matrix
        was computed under, so the reconstruction matches its distances.
        """
        price = np.asarray(self.weights, dtype=float) if edge_price is None else edge_price
        lookup = {}
        for e, (a, b) in enumerate(self.edges):
            key = (a, b) if a < b else (b, a)
            if key not in lookup or price[e] < price[lookup[key]]:
                lookup[key] = e
        out = []
        while u != v:
            w = int(nxt[u, v])
            out.append(lookup[(u, w) if u < w else (w, u)])
            u = w
        return out


@dataclass(frozen=True)
class SteinerInstance:
    graph: MetricGraph
    policy: CostPolicy
    scenarios: ScenarioSet

    def __post_init__(self) -> None:
        _check_scenarios(self.scenarios, self.graph.n_vertices, "vertices")

    kind = "steiner"

    @property
    def n_items(self) -> int:
        return self.graph.n_edges

    def covers_demand(self, clients: frozenset[int], items: frozenset[int]) -> bool:
        """Bought edges must connect every terminal to the root."""
        parent = list(range(self.graph.n_vertices))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in items:
            u, v = self.graph.edges[e]
            parent[find(u)] = find(v)
        r = find(self.graph.root)
        return all(find(t) == r for t in clients)


Instance = SetCoverInstance | VertexCoverInstance | UflInstance | SteinerInstance


def _scenarios_to_json(scen: ScenarioSet) -> list[dict]:
    return [{"p": p, "clients": sorted(clients)} for p, clients in scen.scenarios]


def _scenarios_from_json(raw: list[dict]) -> ScenarioSet:
    return ScenarioSet.explicit((entry["p"], entry["clients"]) for entry in raw)


def instance_to_dict(inst: Instance) -> dict:
    if isinstance(inst, SetCoverInstance):
        return {
            "kind": inst.kind,
            "sigma": inst.policy.sigma,
            "lambda": inst.policy.lam,
            "n_elements": inst.n_elements,
            "sets": [sorted(s) for s in inst.sets],
            "weights": list(inst.weights),
            "scenarios": _scenarios_to_json(inst.scenarios),
        }
    if isinstance(inst, VertexCoverInstance):
        return {
            "kind": inst.kind,
            "sigma": inst.policy.sigma,
            "lambda": inst.policy.lam,
            "n_vertices": inst.n_vertices,
            "edges": [list(e) for e in inst.edges],
            "weights": list(inst.weights),
            "scenarios": _scenarios_to_json(inst.scenarios),
        }
    if isinstance(inst, UflInstance):
        return {
            "kind": inst.kind,
            "sigma": inst.sigma,
            "lambda": inst.lam,
            "open_cost": list(inst.open_cost),
            "scenario_open_cost": [list(row) for row in inst.scenario_open_cost],
            "distance": [list(row) for row in inst.distance],
            "scenarios": _scenarios_to_json(inst.scenarios),
        }
    if isinstance(inst, SteinerInstance):
        return {
            "kind": inst.kind,
            "sigma": inst.policy.sigma,
            "lambda": inst.policy.lam,
            "n_vertices": inst.graph.n_vertices,
            "root": inst.graph.root,
            "edges": [list(e) for e in inst.graph.edges],
            "weights": list(inst.graph.weights),
            "scenarios": _scenarios_to_json(inst.scenarios),
        }
    raise InstanceError(f"unknown instance type {type(inst)!r}")


def instance_from_dict(raw: dict) -> Instance:
    try:
        kind = raw["kind"]
        scen = _scenarios_from_json(raw["scenarios"])
        if kind == "set_cover":
            weights = [float(w) for w in raw["weights"]]
            return SetCoverInstance(
                n_elements=int(raw["n_elements"]),
                sets=tuple(frozenset(s) for s in raw["sets"]),
                weights=tuple(weights),
                policy=CostPolicy(raw["sigma"], raw["lambda"], dict(enumerate(weights))),
                scenarios=scen,
            )
        if kind == "vertex_cover":
            weights = [float(w) for w in raw["weights"]]
            return VertexCoverInstance(
                n_vertices=int(raw["n_vertices"]),
                edges=tuple((int(u), int(v)) for u, v in raw["edges"]),
                weights=tuple(weights),
                policy=CostPolicy(raw["sigma"], raw["lambda"], dict(enumerate(weights))),
                scenarios=scen,
            )
        if kind == "ufl":
            return UflInstance(
                open_cost=tuple(float(f) for f in raw["open_cost"]),
                scenario_open_cost=tuple(
                    tuple(float(f) for f in row) for row in raw["scenario_open_cost"]
                ),
                distance=tuple(tuple(float(c) for c in row) for row in raw["distance"]),
                sigma=raw["sigma"],
                scenarios=scen,
            )
        if kind == "steiner":
            weights = [float(w) for w in raw["weights"]]
            graph = MetricGraph(
                n_vertices=int(raw["n_vertices"]),
                edges=tuple((int(u), int(v)) for u, v in raw["edges"]),
                weights=tuple(weights),
                root=int(raw.get("root", 0)),
            )
            return SteinerInstance(
                graph=graph,
                policy=CostPolicy(raw["sigma"], raw["lambda"], dict(enumerate(weights))),
                scenarios=scen,
            )
    except KeyError as exc:
        raise InstanceError(f"missing instance key {exc.args[0]!r}") from exc
    raise InstanceError(f"unknown instance kind {raw.get('kind')!r}")


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))
