"""Lexicographic A* over timed states and the constraint-tree search built on it.

Search internals work in "key space": every cost vector is mapped through a
linear key function (a permutation for lexicographic orderings, a weighted
sum for scalarized baselines) so that plain tuple comparison gives the
required order. Reported costs are recomputed in canonical objective order.
"""
from __future__ import annotations

import heapq
import io
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Optional, Sequence

from .core import CostVector, LexOrdering, Scenario, WorldGraph, sum_costs, zero_cost
from .errors import PlanInfeasible, PlanTimeout

Vertex = Hashable
KeyFn = Callable[[Sequence[float]], tuple]

VERTEX = "vertex"
EDGE = "edge"


@dataclass(frozen=True, order=True)
class TimedState:
    vertex: Vertex
    t: int


@dataclass(frozen=True, order=True)
class Constraint:
    """Forbids ``robot`` from being at ``loc[0]`` at time ``t`` (vertex kind) or
    from moving ``loc[0] -> loc[1]`` between ``t`` and ``t + 1`` (edge kind)."""

    kind: str
    robot: str
    loc: tuple
    t: int

    @classmethod
    def vertex(cls, robot: str, v: Vertex, t: int) -> "Constraint":
        return cls(VERTEX, robot, (v,), t)

    @classmethod
    def edge(cls, robot: str, u: Vertex, v: Vertex, t: int) -> "Constraint":
        return cls(EDGE, robot, (u, v), t)


@dataclass(frozen=True)
class Conflict:
    kind: str
    loc: tuple
    t: int
    i: str
    j: str

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("a conflict needs two distinct robots")


@dataclass(frozen=True)
class TimedPath:
    vertices: tuple
    cost: CostVector

    @property
    def arrival(self) -> int:
        return len(self.vertices) - 1

    def at(self, t: int) -> Vertex:
        return self.vertices[min(t, len(self.vertices) - 1)]

    def states(self) -> list[TimedState]:
        return [TimedState(v, t) for t, v in enumerate(self.vertices)]


@dataclass(frozen=True, eq=False)
class JointPlan:
    """Per-robot timed paths; each robot stays at its last vertex after arrival."""

    paths: Mapping[str, tuple]
    costs: Mapping[str, CostVector]
    cost: CostVector
    stats: Mapping = field(default_factory=dict)

    @property
    def makespan(self) -> int:
        return max((len(p) - 1 for p in self.paths.values()), default=0)

    def at(self, robot: str, t: int) -> Vertex:
        p = self.paths[robot]
        return p[min(t, len(p) - 1)]

    def positions(self, t: int) -> dict:
        return {r: self.at(r, t) for r in self.paths}

    def final_positions(self) -> dict:
        return {r: p[-1] for r, p in self.paths.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("robot,timestep,vertex\n")
        for r in sorted(self.paths):
            for t, v in enumerate(self.paths[r]):
                buf.write(f"{r},{t},{v}\n")
        buf.write("cost,," + ";".join(str(c) for c in self.cost) + "\n")
        return buf.getvalue()


class ConstraintTable:
    """Constraint lookups for one robot's low-level search.

    ``blocked`` maps a vertex to the first timestep from which the robot may
    never occupy it (static obstacles use 0).
    """

    def __init__(self, constraints: Iterable[Constraint] = (), blocked: Optional[Mapping] = None):
        self.vertex = set()
        self.edge = set()
        self.last_at: dict = {}
        self.last_wait: dict = {}
        self.blocked = dict(blocked or {})
        latest = max(self.blocked.values(), default=0)
        for c in constraints:
            if c.kind == VERTEX:
                v = c.loc[0]
                self.vertex.add((v, c.t))
                self.last_at[v] = max(self.last_at.get(v, -1), c.t)
            else:
                u, v = c.loc
                self.edge.add((u, v, c.t))
                if u == v:
                    self.last_wait[u] = max(self.last_wait.get(u, -1), c.t)
            latest = max(latest, c.t)
        self.latest = latest

    def violates_state(self, v: Vertex, t: int) -> bool:
        if (v, t) in self.vertex:
            return True
        b = self.blocked.get(v)
        return b is not None and b <= t

    def forbids_move(self, u: Vertex, v: Vertex, t: int) -> bool:
        return self.violates_state(v, t + 1) or (u, v, t) in self.edge

    def can_stay_from(self, v: Vertex, t: int) -> bool:
        """True when the robot may remain at ``v`` from ``t`` onwards forever."""
        if v in self.blocked:
            return False
        return self.last_at.get(v, -1) < t and self.last_wait.get(v, -1) < t


# ---------------------------------------------------------------------------
# heuristics


def _graph_cache(graph: WorldGraph) -> dict:
    return graph._cache


def _min_step_costs(graph: WorldGraph) -> tuple[tuple, float]:
    cache = _graph_cache(graph)
    if "min_step" not in cache:
        n = graph.n_objectives
        mins = [math.inf] * n
        longest = 0.0
        for u, out in graph.edges.items():
            for v, c in out.items():
                for i in range(n):
                    mins[i] = min(mins[i], c[i])
                if graph.coords:
                    longest = max(longest, math.dist(graph.coords[u], graph.coords[v]))
        mins = tuple(0 if m == math.inf else m for m in mins)
        cache["min_step"] = (mins, longest)
    return cache["min_step"]


def grid_heuristic(v: Vertex, goal: Vertex, graph: WorldGraph, objectives=None) -> CostVector:
    """Euclidean distance to ``goal`` scaled by each objective's cheapest move.

    An objective that some move leaves free gets 0. Distances are measured in
    units of the longest move edge so the estimate never exceeds the number of
    moves still needed. Graphs without coordinates give the zero vector.
    """
    n = graph.n_objectives
    if not graph.coords or v == goal:
        return zero_cost(n)
    mins, longest = _min_step_costs(graph)
    if longest <= 0:
        return zero_cost(n)
    hops = math.dist(graph.coords[v], graph.coords[goal]) / longest
    return tuple(hops * m for m in mins)


def backward_costs(graph: WorldGraph, goal: Vertex, key: KeyFn) -> dict:
    """Key-space cost of the best path from every vertex to ``goal`` (static graph)."""
    cache = _graph_cache(graph)
    ck = ("backward", goal, key)
    try:
        if ck in cache:
            return cache[ck]
    except TypeError:
        ck = None
    n_key = len(key(zero_cost(graph.n_objectives)))
    dist = {goal: (0,) * n_key}
    heap = [((0,) * n_key, goal)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u in graph.predecessors(v):
            nd = tuple(a + b for a, b in zip(d, key(graph.edges[u][v])))
            if u not in dist or nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    if ck is not None:
        cache[ck] = dist
    return dist


def make_heuristic(graph: WorldGraph, goal: Vertex, key: KeyFn, kind: str = "euclidean") -> Callable:
    """Return a key-space heuristic ``h(v)`` for the given goal.

    ``euclidean`` scales straight-line distance (``grid_heuristic``), ``exact``
    uses static backward search costs, ``zero`` disables guidance.
    """
    n_key = len(key(zero_cost(graph.n_objectives)))
    if kind == "zero":
        z = (0,) * n_key
        return lambda v: z
    if kind == "exact":
        dist = backward_costs(graph, goal, key)
        inf = (math.inf,) * n_key
        return lambda v: dist.get(v, inf)
    if kind == "euclidean":
        memo: dict = {}

        def h(v):
            hv = memo.get(v)
            if hv is None:
                hv = memo[v] = key(grid_heuristic(v, goal, graph))
            return hv

        return h
    raise ValueError(f"unknown heuristic {kind!r}")


# ---------------------------------------------------------------------------
# low level


def _keyed_successors(graph: WorldGraph, key: KeyFn) -> dict:
    cache = _graph_cache(graph)
    ck = ("succ", key)
    try:
        hit = cache.get(ck)
    except TypeError:
        hit, ck = None, None
    if hit is not None:
        return hit
    out = {v: tuple((u, key(c)) for u, c in graph.successors(v)) for v in graph.vertices}
    if ck is not None:
        cache[ck] = out
    return out


def default_horizon(graph: WorldGraph, table: ConstraintTable, slack: float = 2.0) -> int:
    return max(table.latest, 0) + int(math.ceil(slack * len(graph.vertices)))


def space_time_search(
    graph: WorldGraph,
    start: Vertex,
    goal: Vertex,
    key: KeyFn,
    heuristic: Callable,
    table: ConstraintTable,
    horizon: int,
    deadline: Optional[float] = None,
    stats: Optional[dict] = None,
) -> Optional[tuple]:
    """Best-first search over (vertex, t) in key space; returns the vertex sequence."""
    if table.violates_state(start, 0):
        return None
    succ = _keyed_successors(graph, key)
    n_key = len(key(zero_cost(graph.n_objectives)))
    g0 = (0,) * n_key
    h0 = heuristic(start)
    if h0[0] == math.inf:
        return None
    best = {(start, 0): g0}
    parent: dict = {}
    # open entries: (f, -g[0], t, vertex, g); larger g[0] first among equal f
    heap = [(h0, 0, 0, start, g0)]
    expanded = 0
    while heap:
        _f, _ng, t, v, g = heapq.heappop(heap)
        if best.get((v, t)) != g:
            continue
        expanded += 1
        if deadline is not None and not expanded & 1023 and time.perf_counter() >= deadline:
            raise PlanTimeout("low-level search exceeded budget", {"low_level_expanded": expanded})
        if v == goal and table.can_stay_from(v, t):
            path = [v]
            state = (v, t)
            while state[1] > 0:
                prev = parent[state]
                path.append(prev)
                state = (prev, state[1] - 1)
            path.reverse()
            if stats is not None:
                stats["low_level_expanded"] = stats.get("low_level_expanded", 0) + expanded
            return tuple(path)
        if t >= horizon:
            continue
        nt = t + 1
        for u, c in succ[v]:
            if table.forbids_move(v, u, t):
                continue
            g2 = tuple(a + b for a, b in zip(g, c))
            y = (u, nt)
            old = best.get(y)
            if old is None or g2 < old:
                hu = heuristic(u)
                if hu[0] == math.inf:
                    continue
                best[y] = g2
                parent[y] = v
                heapq.heappush(heap, (tuple(a + b for a, b in zip(g2, hu)), -g2[0], nt, u, g2))
    if stats is not None:
        stats["low_level_expanded"] = stats.get("low_level_expanded", 0) + expanded
    return None


def la_star(
    graph: WorldGraph,
    start: Vertex,
    goal: Vertex,
    order,
    heuristic=None,
    constraints: Iterable[Constraint] = (),
    horizon: Optional[int] = None,
    *,
    blocked: Optional[Mapping] = None,
    horizon_slack: float = 2.0,
    deadline: Optional[float] = None,
) -> Optional[TimedPath]:
    """Lexicographically cheapest constraint-respecting timed path, or None.

    ``order`` is a LexOrdering or any linear key function on cost vectors.
    ``heuristic`` is a callable ``v -> CostVector`` (canonical order), a
    heuristic kind name, or None for the Euclidean grid heuristic.
    """
    key = order
    table = constraints if isinstance(constraints, ConstraintTable) else ConstraintTable(constraints, blocked)
    if heuristic is None or isinstance(heuristic, str):
        h = make_heuristic(graph, goal, key, heuristic or "euclidean")
    else:
        h = lambda v, _h=heuristic: key(_h(v))  # noqa: E731
    if horizon is None:
        horizon = default_horizon(graph, table, horizon_slack)
    path = space_time_search(graph, start, goal, key, h, table, horizon, deadline)
    if path is None:
        return None
    return TimedPath(path, graph.path_cost(path))


# ---------------------------------------------------------------------------
# conflicts


def detect_first_conflict(paths: Mapping[str, Sequence[Vertex]]) -> Optional[Conflict]:
    """Earliest vertex or swap conflict; robots stay at their last vertex after arrival.

    A swap between t and t+1 is reported at timestep t. Among conflicts at one
    timestep the smallest robot pair wins, vertex before edge.
    """
    ids = sorted(paths)
    if len(ids) < 2:
        return None
    seqs = [paths[r] for r in ids]
    horizon = max(len(p) for p in seqs) - 1

    def at(p, t):
        return p[t] if t < len(p) else p[-1]

    for t in range(horizon + 1):
        best = None
        here = [at(p, t) for p in seqs]
        seen: dict = {}
        for a, v in enumerate(here):
            if v in seen:
                cand = (seen[v], a, 0, Conflict(VERTEX, (v,), t, ids[seen[v]], ids[a]))
                if best is None or cand[:3] < best[:3]:
                    best = cand
            else:
                seen[v] = a
        if t < horizon:
            nxt = [at(p, t + 1) for p in seqs]
            moves = {}
            for a in range(len(ids)):
                if here[a] != nxt[a]:
                    moves[(here[a], nxt[a])] = a
            for (u, v), a in moves.items():
                b = moves.get((v, u))
                if b is not None and a < b:
                    cand = (a, b, 1, Conflict(EDGE, (u, v), t, ids[a], ids[b]))
                    if best is None or cand[:3] < best[:3]:
                        best = cand
        if best is not None:
            return best[3]
    return None


def generate_constraints(conflict: Conflict) -> tuple[Constraint, Constraint]:
    if conflict.kind == VERTEX:
        v = conflict.loc[0]
        return Constraint.vertex(conflict.i, v, conflict.t), Constraint.vertex(conflict.j, v, conflict.t)
    u, v = conflict.loc
    return Constraint.edge(conflict.i, u, v, conflict.t), Constraint.edge(conflict.j, v, u, conflict.t)


# ---------------------------------------------------------------------------
# high level


@dataclass
class CTNode:
    paths: dict
    costs: dict
    cost: CostVector
    constraints: frozenset = frozenset()

    def check(self, graph: WorldGraph) -> bool:
        """Recompute the joint cost and verify every path honours its constraints."""
        for c in self.constraints:
            p = self.paths[c.robot]
            if c.kind == VERTEX:
                if p[min(c.t, len(p) - 1)] == c.loc[0]:
                    return False
            else:
                if c.t + 1 < len(p) and (p[c.t], p[c.t + 1]) == c.loc:
                    return False
                if c.t + 1 >= len(p) and c.loc[0] == c.loc[1] == p[-1]:
                    return False
        total = sum_costs(self.costs.values(), graph.n_objectives)
        return total == self.cost


@dataclass(frozen=True)
class Agent:
    id: str
    start: Vertex
    goal: Vertex


def conflict_based_search(
    graph: WorldGraph,
    agents: Sequence,
    key: KeyFn,
    *,
    budget: Optional[float] = None,
    heuristic: str = "euclidean",
    horizon_slack: float = 2.0,
    blocked: Optional[Mapping] = None,
    max_nodes: Optional[int] = None,
    observer: Optional[Callable[[CTNode, CTNode], None]] = None,
) -> JointPlan:
    """Two-level search; the open list is ordered by ``key`` of the joint cost.

    ``agents`` are objects with ``id``, ``start`` and ``goal``. ``blocked``
    vertices are forbidden to every agent at all times.
    """
    t0 = time.perf_counter()
    deadline = None if budget is None else t0 + budget
    if deadline is not None and time.perf_counter() >= deadline:
        raise PlanTimeout("budget exhausted before search", {"ct_expanded": 0, "elapsed_s": 0.0})
    n = graph.n_objectives
    agents = list(agents)
    by_id = {a.id: a for a in agents}
    static = {v: 0 for v in (blocked or ())}
    heuristics = {a.id: make_heuristic(graph, a.goal, key, heuristic) for a in agents}
    stats = {"ct_expanded": 0, "ct_generated": 0, "low_level_expanded": 0}

    def plan(agent_id, constraints):
        mine = [c for c in constraints if c.robot == agent_id]
        table = ConstraintTable(mine, static)
        a = by_id[agent_id]
        horizon = default_horizon(graph, table, horizon_slack)
        return space_time_search(graph, a.start, a.goal, key, heuristics[agent_id], table, horizon, deadline, stats)

    root_paths, root_costs = {}, {}
    for a in agents:
        p = plan(a.id, ())
        if p is None:
            raise PlanInfeasible(f"no path for robot {a.id} from {a.start!r} to {a.goal!r}")
        root_paths[a.id] = p
        root_costs[a.id] = graph.path_cost(p)
    root = CTNode(root_paths, root_costs, sum_costs(root_costs.values(), n))
    counter = itertools.count()
    heap = [(key(root.cost), 0, next(counter), root)]
    stats["ct_generated"] = 1
    best_key = key(root.cost)
    while heap:
        if deadline is not None and time.perf_counter() >= deadline:
            stats["elapsed_s"] = time.perf_counter() - t0
            stats["best_lower_bound"] = heap[0][0]
            raise PlanTimeout(f"search exceeded {budget}s budget", stats)
        if max_nodes is not None and stats["ct_expanded"] >= max_nodes:
            raise PlanTimeout(f"search exceeded {max_nodes} constraint-tree nodes", stats)
        best_key, _, _, node = heapq.heappop(heap)
        stats["ct_expanded"] += 1
        conflict = detect_first_conflict(node.paths)
        if conflict is None:
            stats["elapsed_s"] = time.perf_counter() - t0
            return JointPlan(dict(node.paths), dict(node.costs), node.cost, stats)
        for constraint in generate_constraints(conflict):
            if constraint.robot not in by_id:
                continue
            constraints = node.constraints | {constraint}
            p = plan(constraint.robot, constraints)
            if p is None:
                continue
            paths = dict(node.paths)
            costs = dict(node.costs)
            paths[constraint.robot] = p
            costs[constraint.robot] = graph.path_cost(p)
            child = CTNode(paths, costs, sum_costs(costs.values(), n), constraints)
            if observer is not None:
                observer(node, child)
            stats["ct_generated"] += 1
            heapq.heappush(heap, (key(child.cost), -len(constraints), next(counter), child))
    raise PlanInfeasible("constraint tree exhausted without a conflict-free plan")


def scenario_agents(s: Scenario, starts: Optional[Mapping] = None) -> list[Agent]:
    starts = dict(starts or {})
    agents = [Agent(r.id, starts.get(r.id, r.start), r.goal) for r in s.robots]
    positions = [a.start for a in agents]
    if len(set(positions)) != len(positions):
        raise PlanInfeasible("robot start positions are not distinct")
    return agents


def lcbs_plan(
    s: Scenario,
    ordering: LexOrdering,
    starts: Optional[Mapping] = None,
    budget: Optional[float] = None,
    *,
    heuristic: str = "euclidean",
    horizon_slack: float = 2.0,
    max_nodes: Optional[int] = None,
    observer=None,
) -> JointPlan:
    """Conflict-free joint plan whose summed cost is lexicographically minimal under ``ordering``."""
    plan = conflict_based_search(
        s.graph,
        scenario_agents(s, starts),
        ordering,
        budget=budget,
        heuristic=heuristic,
        horizon_slack=horizon_slack,
        max_nodes=max_nodes,
        observer=observer,
    )
    assert detect_first_conflict(plan.paths) is None
    return plan
