"""World model: objectives, cost vectors, lexicographic orderings, graphs and scenarios."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Optional, Sequence

from .belief import Belief
from .errors import DimensionError, ModelError, ScenarioError

Vertex = Hashable
CostVector = tuple  # tuple of non-negative numbers in canonical objective order

WAIT = "wait"


# ---------------------------------------------------------------------------
# cost vectors and orderings


def zero_cost(n: int) -> CostVector:
    return (0,) * n


def add_costs(u: Sequence[float], v: Sequence[float]) -> CostVector:
    if len(u) != len(v):
        raise DimensionError(f"cost vectors of length {len(u)} and {len(v)}")
    return tuple(a + b for a, b in zip(u, v))


def sum_costs(vectors: Iterable[Sequence[float]], n: int) -> CostVector:
    total = zero_cost(n)
    for v in vectors:
        total = add_costs(total, v)
    return total


@dataclass(frozen=True)
class ObjectiveSet:
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def count(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class LexOrdering:
    """Strict priority over objective indices; ``priority[0]`` matters most."""

    priority: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "priority", tuple(self.priority))
        if sorted(self.priority) != list(range(len(self.priority))):
            raise ValueError(f"priority {self.priority} is not a permutation of 0..{len(self.priority) - 1}")

    @classmethod
    def from_names(cls, names: Sequence[str], objectives: ObjectiveSet) -> "LexOrdering":
        return cls(tuple(objectives.index(n) for n in names))

    @classmethod
    def identity(cls, n: int) -> "LexOrdering":
        return cls(tuple(range(n)))

    def key(self, v: Sequence[float]) -> tuple:
        """Reorder ``v`` so that plain tuple comparison is the lexicographic order."""
        return tuple(v[i] for i in self.priority)

    def __call__(self, v: Sequence[float]) -> tuple:
        return self.key(v)

    def names(self, objectives: ObjectiveSet) -> list[str]:
        return [objectives.names[i] for i in self.priority]


class Cmp(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def lex_compare(u: Sequence[float], v: Sequence[float], ordering: LexOrdering) -> Cmp:
    if len(u) != len(v) or len(u) != len(ordering.priority):
        raise DimensionError(
            f"cannot compare vectors of length {len(u)} and {len(v)} under a {len(ordering.priority)}-objective ordering"
        )
    for i in ordering.priority:
        if u[i] < v[i]:
            return Cmp.LESS
        if u[i] > v[i]:
            return Cmp.GREATER
    return Cmp.EQUAL


# ---------------------------------------------------------------------------
# graphs and stochastic models


@dataclass(frozen=True, eq=False)
class WorldGraph:
    """Directed graph with vector edge costs and an explicit wait self-loop per vertex.

    ``edges[u][v]`` is the cost of moving u -> v (u != v). ``wait_costs[v]`` is
    the cost of staying at v for one timestep.
    """

    vertices: tuple
    edges: Mapping[Vertex, Mapping[Vertex, CostVector]]
    wait_costs: Mapping[Vertex, CostVector]
    coords: Optional[Mapping[Vertex, tuple[float, float]]] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        edges = {v: {} for v in self.vertices}
        for u, out in self.edges.items():
            edges.setdefault(u, {})
            for v, c in out.items():
                edges[u][v] = tuple(c)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "wait_costs", {v: tuple(c) for v, c in self.wait_costs.items()})
        succ, pred = {}, {v: [] for v in self.vertices}
        for u in self.vertices:
            out = []
            if u in self.wait_costs:
                out.append((u, self.wait_costs[u]))
            for v in sorted(edges.get(u, {})):
                out.append((v, edges[u][v]))
                pred.setdefault(v, []).append(u)
            succ[u] = tuple(out)
        object.__setattr__(self, "_succ", succ)
        object.__setattr__(self, "_pred", {v: tuple(p) for v, p in pred.items()})
        object.__setattr__(self, "_cache", {})

    __hash__ = object.__hash__

    def __eq__(self, other):
        if not isinstance(other, WorldGraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.wait_costs == other.wait_costs
            and (self.coords or None) == (other.coords or None)
        )

    @property
    def n_objectives(self) -> int:
        for c in self.wait_costs.values():
            return len(c)
        return 0

    def successors(self, v: Vertex) -> tuple:
        """(u, cost) pairs reachable in one step, wait first."""
        return self._succ[v]

    def neighbors(self, v: Vertex) -> list:
        return sorted(self.edges.get(v, {}))

    def predecessors(self, v: Vertex) -> tuple:
        return self._pred.get(v, ())

    def cost(self, u: Vertex, v: Vertex) -> CostVector:
        if u == v:
            return self.wait_costs[u]
        return self.edges[u][v]

    def path_cost(self, path: Sequence[Vertex]) -> CostVector:
        total = zero_cost(self.n_objectives)
        for u, v in zip(path, path[1:]):
            total = add_costs(total, self.cost(u, v))
        return total

    def num_edges(self) -> int:
        return sum(len(out) for out in self.edges.values())

    def map_costs(self, fn: Callable[[CostVector], CostVector]) -> "WorldGraph":
        return WorldGraph(
            self.vertices,
            {u: {v: fn(c) for v, c in out.items()} for u, out in self.edges.items()},
            {v: fn(c) for v, c in self.wait_costs.items()},
            self.coords,
        )

    def unit_cost(self) -> "WorldGraph":
        """Single-objective copy where every move and wait costs 1 (hop count)."""
        return self.map_costs(lambda c: (1,))


@dataclass(frozen=True, eq=False)
class StochasticModel:
    """Successor distributions per (vertex, action), with the cost of taking the action."""

    tables: Mapping[tuple, Mapping[Vertex, float]]
    costs: Mapping[tuple, CostVector]

    def __post_init__(self):
        object.__setattr__(self, "tables", {k: dict(t) for k, t in self.tables.items()})
        object.__setattr__(self, "costs", {k: tuple(c) for k, c in self.costs.items()})

    def __eq__(self, other):
        if not isinstance(other, StochasticModel):
            return NotImplemented
        return self.tables == other.tables and self.costs == other.costs

    def actions(self, v: Vertex) -> list[str]:
        return sorted(a for (u, a) in self.tables if u == v)

    def most_likely(self, v: Vertex, action: str) -> Vertex:
        table = self.tables.get((v, action))
        if not table:
            raise ModelError(f"empty successor table for ({v!r}, {action!r})")
        best = max(table.values())
        return min(u for u, p in table.items() if p == best)


def determinize(model: StochasticModel, coords=None) -> WorldGraph:
    """Most-likely-outcome determinization.

    Each (vertex, action) keeps only its argmax successor, ties broken by the
    smallest vertex id. The ``wait`` action becomes the vertex's wait loop;
    other actions whose likeliest outcome is staying put contribute no edge.
    If two actions share a likeliest successor, the action sorted first wins.
    """
    vertices = set()
    for (v, _a), table in model.tables.items():
        vertices.add(v)
        vertices.update(table)
    edges: dict = {v: {} for v in vertices}
    waits: dict = {}
    for (v, a) in sorted(model.tables, key=lambda k: (k[0], k[1])):
        u = model.most_likely(v, a)
        cost = model.costs[(v, a)]
        if a == WAIT:
            waits[v] = cost
        elif u != v and u not in edges[v]:
            edges[v][u] = cost
    missing = sorted(v for v in vertices if v not in waits)
    if missing:
        raise ModelError(f"vertices without a wait action: {missing}")
    return WorldGraph(tuple(sorted(vertices)), edges, waits, coords)


def edge_actions(model: StochasticModel) -> dict:
    """Map each determinized move edge (u, v) to the action that produces it."""
    out = {}
    for (v, a) in sorted(model.tables, key=lambda k: (k[0], k[1])):
        u = model.most_likely(v, a)
        out.setdefault((v, u), a)
    return out


def action_name(u: Vertex, v: Vertex) -> str:
    return WAIT if u == v else f"to:{v}"


def degenerate_model(graph: WorldGraph) -> StochasticModel:
    """Deterministic model whose determinization is ``graph`` itself."""
    tables, costs = {}, {}
    for u in graph.vertices:
        for v, c in graph.successors(u):
            key = (u, action_name(u, v))
            tables[key] = {v: 1.0}
            costs[key] = c
    return StochasticModel(tables, costs)


def slip_model(graph: WorldGraph, slip: float) -> StochasticModel:
    """Each move reaches its intended vertex with probability ``1 - slip``.

    The slip mass is spread evenly over staying put and the other neighbours.
    Waiting is deterministic.
    """
    if not 0.0 <= slip < 0.5:
        raise ValueError("slip must lie in [0, 0.5)")
    tables, costs = {}, {}
    for u in graph.vertices:
        nbrs = graph.neighbors(u)
        for v, c in graph.successors(u):
            key = (u, action_name(u, v))
            costs[key] = c
            if u == v:
                tables[key] = {u: 1.0}
                continue
            others = [u] + [w for w in nbrs if w != v]
            table = {v: 1.0 - slip}
            for w in others:
                table[w] = table.get(w, 0.0) + slip / len(others)
            tables[key] = table
    return StochasticModel(tables, costs)


# ---------------------------------------------------------------------------
# contexts, landmarks, scenarios


@dataclass(frozen=True)
class Context:
    id: str
    ordering: LexOrdering


@dataclass(frozen=True)
class Tier:
    min_robots: int
    partition: tuple[frozenset, ...]

    def __post_init__(self):
        object.__setattr__(self, "partition", tuple(frozenset(c) for c in self.partition))

    def cell_of(self, context_id: str) -> frozenset:
        for cell in self.partition:
            if context_id in cell:
                return cell
        raise KeyError(context_id)


@dataclass(frozen=True)
class LandmarkSpec:
    id: str
    site: tuple
    tiers: tuple[Tier, ...]
    visited: bool = False

    def __post_init__(self):
        object.__setattr__(self, "site", tuple(self.site))
        object.__setattr__(self, "tiers", tuple(self.tiers))

    def tier_for(self, k: int) -> Optional[Tier]:
        """Finest tier usable by ``k`` robots, or None when ``k`` is below all tiers."""
        best = None
        for tier in self.tiers:
            if tier.min_robots <= k:
                best = tier
        return best

    @property
    def max_required(self) -> int:
        return max(t.min_robots for t in self.tiers)


@dataclass(frozen=True)
class Robot:
    id: str
    start: Vertex
    goal: Vertex


@dataclass(frozen=True)
class Scenario:
    objectives: ObjectiveSet
    graph: WorldGraph
    contexts: tuple[Context, ...]
    true_context: str
    landmarks: tuple[LandmarkSpec, ...]
    robots: tuple[Robot, ...]
    initial_belief: Belief
    stochastic: Optional[StochasticModel] = None
    id: str = "scenario"
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "contexts", tuple(self.contexts))
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        object.__setattr__(self, "robots", tuple(self.robots))

    @property
    def context_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.contexts)

    def context(self, cid: str) -> Context:
        for c in self.contexts:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def ordering(self, cid: str) -> LexOrdering:
        return self.context(cid).ordering

    def landmark(self, lid: str) -> LandmarkSpec:
        for lm in self.landmarks:
            if lm.id == lid:
                return lm
        raise KeyError(lid)

    @property
    def robot_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.robots)

    def starts(self) -> dict:
        return {r.id: r.start for r in self.robots}

    def goals(self) -> dict:
        return {r.id: r.goal for r in self.robots}

    def replace(self, **changes) -> "Scenario":
        import dataclasses

        return dataclasses.replace(self, **changes)


def _check_cost(errors: list, where: str, cost, n: int):
    if len(cost) != n:
        errors.append(f"{where} has {len(cost)} components, expected {n}")
        return
    for x in cost:
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x) or x < 0:
            errors.append(f"{where} component {x!r} is not a finite non-negative number")
            return


def validate_scenario(s: Scenario) -> Scenario:
    """Return ``s`` unchanged if every invariant holds, else raise ScenarioError listing all violations."""
    errors: list[str] = []
    n = s.objectives.count
    if n < 1:
        errors.append("objectives: at least one objective required")
    if len(set(s.objectives.names)) != n:
        errors.append("objectives: names must be unique")

    g = s.graph
    vset = set(g.vertices)
    if len(vset) != len(g.vertices):
        errors.append("graph.vertices: duplicate vertex ids")
    for u, out in g.edges.items():
        if u not in vset:
            errors.append(f"graph.edges: source {u!r} is not a vertex")
        for v, c in out.items():
            if v not in vset:
                errors.append(f"graph.edges[{u!r}->{v!r}]: target is not a vertex")
            if u == v:
                errors.append(f"graph.edges[{u!r}->{v!r}]: self-loops belong in wait_costs")
            _check_cost(errors, f"graph.edges[{u!r}->{v!r}].cost", c, n)
    for v in g.vertices:
        if v not in g.wait_costs:
            errors.append(f"graph.wait_costs: vertex {v!r} has no wait cost")
        else:
            _check_cost(errors, f"graph.wait_costs[{v!r}]", g.wait_costs[v], n)
    if g.coords is not None:
        for v in g.vertices:
            if v not in g.coords:
                errors.append(f"graph.vertices: vertex {v!r} has no coordinates")

    if s.stochastic is not None:
        for (v, a), table in s.stochastic.tables.items():
            where = f"stochastic[{v!r},{a!r}]"
            if v not in vset:
                errors.append(f"{where}: unknown vertex")
            if not table:
                errors.append(f"{where}: empty successor table")
                continue
            if any(u not in vset for u in table):
                errors.append(f"{where}: successor is not a vertex")
            if any(not 0.0 <= p <= 1.0 for p in table.values()):
                errors.append(f"{where}: probability outside [0, 1]")
            if abs(sum(table.values()) - 1.0) > 1e-9:
                errors.append(f"{where}: probabilities sum to {sum(table.values())}")
            if (v, a) not in s.stochastic.costs:
                errors.append(f"{where}: missing cost")
            else:
                _check_cost(errors, f"{where}.cost", s.stochastic.costs[(v, a)], n)
        if not errors:
            try:
                det = determinize(s.stochastic)
                if det.edges != g.edges or det.wait_costs != g.wait_costs:
                    errors.append("stochastic: determinized model does not match graph")
            except ModelError as exc:
                errors.append(f"stochastic: {exc}")

    cids = [c.id for c in s.contexts]
    if not cids:
        errors.append("contexts: at least one context required")
    seen = set()
    for i, c in enumerate(s.contexts):
        if c.id in seen:
            errors.append(f"contexts[{i}].id {c.id!r} is duplicated")
        seen.add(c.id)
        if len(c.ordering.priority) != n:
            errors.append(f"contexts[{i}].ordering has {len(c.ordering.priority)} entries, expected {n}")
    cset = set(cids)
    if s.true_context not in cset:
        errors.append(f"true_context {s.true_context!r} is not a declared context")

    lids = set()
    for i, lm in enumerate(s.landmarks):
        where = f"landmarks[{i}] ({lm.id})"
        if lm.id in lids:
            errors.append(f"{where}.id is duplicated")
        lids.add(lm.id)
        if not lm.site:
            errors.append(f"{where}.site is empty")
        if len(set(lm.site)) != len(lm.site):
            errors.append(f"{where}.site repeats a vertex")
        for v in lm.site:
            if v not in vset:
                errors.append(f"{where}.site vertex {v!r} does not exist")
        if not lm.tiers:
            errors.append(f"{where}.tiers is empty")
        prev = 0
        for j, tier in enumerate(lm.tiers):
            tw = f"{where}.tiers[{j}]"
            if tier.min_robots < 1:
                errors.append(f"{tw}.min_robots must be positive")
            if tier.min_robots <= prev:
                errors.append(f"{tw}.min_robots not in ascending order")
            prev = tier.min_robots
            if tier.min_robots > len(lm.site):
                errors.append(f"{tw}.min_robots {tier.min_robots} exceeds site size {len(lm.site)}")
            covered: list = []
            for cell in tier.partition:
                if not cell:
                    errors.append(f"{tw}.partition has an empty cell")
                covered.extend(cell)
            unknown = sorted(set(covered) - cset)
            if unknown:
                errors.append(f"{tw}.partition names unknown contexts {unknown}")
            dupes = sorted({c for c in covered if covered.count(c) > 1})
            if dupes:
                errors.append(f"{tw}.partition repeats contexts {dupes}")
            missing = sorted(cset - set(covered))
            if missing:
                errors.append(f"{tw}.partition missing contexts {missing}")

    rids = set()
    for i, r in enumerate(s.robots):
        if r.id in rids:
            errors.append(f"robots[{i}].id {r.id!r} is duplicated")
        rids.add(r.id)
        for attr in ("start", "goal"):
            v = getattr(r, attr)
            if v not in vset:
                errors.append(f"robots[{i}].{attr} {v!r} does not exist")
        for j in range(i):
            if s.robots[j].start == r.start:
                errors.append(f"robots[{i}].start collides with robots[{j}].start")
            if s.robots[j].goal == r.goal:
                errors.append(f"robots[{i}].goal collides with robots[{j}].goal")

    unknown = sorted(set(s.initial_belief.probs) - cset)
    if unknown:
        errors.append(f"initial_belief names unknown contexts {unknown}")

    if errors:
        raise ScenarioError(errors)
    return s
