"""Exact optima for small instances by exhaustive search over reservations.

For a fixed reservation the second stage decomposes per scenario: buy some
feasible item set X, exercise the part of X that was reserved (always
cheaper than re-buying it), pay recourse price on the rest.  So the oracle
scans reservation bitmasks in increasing first-stage cost, computes each
scenario's best X with precomputed subset-mass tables, and stops as soon as
the first-stage cost alone exceeds the incumbent.

Intended for cross-checking the approximation algorithms; refuses instances
with more than MAX_ITEMS items or MAX_SCENARIOS scenarios.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import (
    Instance,
    InstanceError,
    SetCoverInstance,
    SteinerInstance,
    UflInstance,
    VertexCoverInstance,
)
from .model import StageDecision, TwoStageSolution

__all__ = [
    "OracleResult",
    "brute_force_optimal",
    "best_completion",
    "verify_ratio",
    "RatioCheck",
    "MAX_ITEMS",
    "MAX_SCENARIOS",
]

MAX_ITEMS = 16
MAX_SCENARIOS = 6


@dataclass(frozen=True)
class OracleResult:
    optimal_cost: float
    optimal_solution: TwoStageSolution
    nodes_explored: int


@dataclass(frozen=True)
class RatioCheck:
    """Outcome of comparing an algorithm's cost against bound * optimum.

    ``slack`` is how much headroom was left (negative on failure).
    """

    passed: bool
    slack: float


def _bits(mask: int) -> frozenset[int]:
    out = set()
    while mask:
        low = mask & -mask
        out.add(low.bit_length() - 1)
        mask ^= low
    return frozenset(out)


def _mass_table(weights: np.ndarray) -> np.ndarray:
    """table[mask] = sum of weights over the bits of mask, for all masks."""
    n = weights.size
    table = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        table[mask] = table[mask ^ low] + weights[low.bit_length() - 1]
    return table


@dataclass
class _ScenarioTable:
    prob: float
    masks: np.ndarray       # candidate bought sets X
    base: np.ndarray        # cost of X at full recourse price (plus service)
    save_table: np.ndarray  # discount earned by the reserved part of X

    def best(self, f0_mask: int) -> tuple[float, int]:
        vals = self.base - self.save_table[self.masks & f0_mask]
        idx = int(np.argmin(vals))
        return float(vals[idx]), int(self.masks[idx])


@dataclass
class _Prep:
    n_items: int
    first_vec: np.ndarray   # first-stage cost per reservation mask
    tables: list[_ScenarioTable]


def _covering_feasible_masks(inst, clients: frozenset[int], n: int) -> np.ndarray:
    elem_masks = []
    for e in sorted(clients):
        cm = 0
        for s in inst.covering_items(e):
            cm |= 1 << s
        if cm == 0:
            raise InstanceError(f"element {e} is uncoverable")
        elem_masks.append(cm)
    return np.array(
        [x for x in range(1 << n) if all(x & cm for cm in elem_masks)], dtype=np.int64
    )


def _connecting_feasible_masks(inst: SteinerInstance, clients: frozenset[int]) -> np.ndarray:
    g = inst.graph
    n_e = g.n_edges
    terminals = [t for t in clients if t != g.root]
    if not terminals:
        return np.arange(1 << n_e, dtype=np.int64)
    out = []
    for x in range(1 << n_e):
        parent = list(range(g.n_vertices))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        m = x
        while m:
            low = m & -m
            u, v = g.edges[low.bit_length() - 1]
            parent[find(u)] = find(v)
            m ^= low
        r = find(g.root)
        if all(find(t) == r for t in terminals):
            out.append(x)
    if not out:
        raise InstanceError("no edge set connects the demanded terminals")
    return np.array(out, dtype=np.int64)


def _prepare(inst: Instance) -> _Prep:
    n = inst.n_items
    scen = inst.scenarios.scenarios
    if n > MAX_ITEMS:
        raise InstanceError(f"oracle handles at most {MAX_ITEMS} items, got {n}")
    if len(scen) > MAX_SCENARIOS:
        raise InstanceError(f"oracle handles at most {MAX_SCENARIOS} scenarios, got {len(scen)}")

    if isinstance(inst, (SetCoverInstance, VertexCoverInstance)):
        sigma, lam = inst.policy.sigma, inst.policy.lam
        w = np.array(inst.weights, dtype=float)
        table = _mass_table(w)
        save_table = (lam - 1.0 + sigma) * table
        tables = []
        for p, clients in scen:
            masks = _covering_feasible_masks(inst, clients, n)
            tables.append(_ScenarioTable(p, masks, lam * table[masks], save_table))
        return _Prep(n, sigma * table, tables)

    if isinstance(inst, SteinerInstance):
        sigma, lam = inst.policy.sigma, inst.policy.lam
        w = np.array(inst.graph.weights, dtype=float)
        table = _mass_table(w)
        save_table = (lam - 1.0 + sigma) * table
        tables = []
        for p, clients in scen:
            masks = _connecting_feasible_masks(inst, clients)
            tables.append(_ScenarioTable(p, masks, lam * table[masks], save_table))
        return _Prep(n, sigma * table, tables)

    if isinstance(inst, UflInstance):
        sigma = inst.sigma
        f0 = np.array(inst.open_cost, dtype=float)
        dist = inst.dist
        f0_table = _mass_table(f0)
        # nearest-open-facility distance per (mask, client)
        minc = np.full((1 << n, inst.n_clients), np.inf)
        for mask in range(1, 1 << n):
            low = mask & -mask
            i = low.bit_length() - 1
            minc[mask] = np.minimum(minc[mask ^ low], dist[i])
        all_masks = np.arange(1 << n, dtype=np.int64)
        tables = []
        for k, (p, clients) in enumerate(scen):
            fk = np.array(inst.scenario_open_cost[k], dtype=float)
            open_table = _mass_table(fk)
            conn = minc[:, sorted(clients)].sum(axis=1) if clients else np.zeros(1 << n)
            save_table = _mass_table(fk - (1.0 - sigma) * f0)
            tables.append(_ScenarioTable(p, all_masks, open_table + conn, save_table))
        return _Prep(n, sigma * f0_table, tables)

    raise InstanceError(f"unsupported instance type {type(inst).__name__}")


def _solution_from_masks(f0_mask: int, x_masks: list[int]) -> TwoStageSolution:
    stages = tuple(
        StageDecision(exercised=_bits(x & f0_mask), recoursed=_bits(x & ~f0_mask))
        for x in x_masks
    )
    return TwoStageSolution(reserved=_bits(f0_mask), stages=stages)


def brute_force_optimal(inst: Instance) -> OracleResult:
    prep = _prepare(inst)
    order = np.argsort(prep.first_vec, kind="stable")
    best = np.inf
    best_mask = 0
    best_xs: list[int] = []
    nodes = 0
    for mask in order:
        mask = int(mask)
        fc = prep.first_vec[mask]
        if fc >= best:
            break  # masks are sorted by first-stage cost; nothing better left
        nodes += 1
        total = fc
        xs = []
        for tab in prep.tables:
            val, x = tab.best(mask)
            total += tab.prob * val
            xs.append(x)
        if total < best:
            best, best_mask, best_xs = total, mask, xs
    return OracleResult(float(best), _solution_from_masks(best_mask, best_xs), nodes)


def best_completion(inst: Instance, reserved: frozenset[int]) -> tuple[TwoStageSolution, float]:
    """Optimal second-stage play for a given reservation, and its exact cost."""
    prep = _prepare(inst)
    mask = 0
    for s in reserved:
        mask |= 1 << s
    total = float(prep.first_vec[mask])
    xs = []
    for tab in prep.tables:
        val, x = tab.best(mask)
        total += tab.prob * val
        xs.append(x)
    return _solution_from_masks(mask, xs), total


def verify_ratio(cost: float, oracle: OracleResult, bound: float) -> RatioCheck:
    """Check cost <= bound * optimum (zero optimum demands zero cost)."""
    opt = oracle.optimal_cost
    return RatioCheck(passed=cost <= bound * opt + 1e-9, slack=bound * opt - cost)
