"""Stage one: coordinate robot groups to visit informative landmarks until the belief collapses."""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .belief import Belief, entropy, expected_entropy_reduction, observe, update_belief
from .core import LandmarkSpec, LexOrdering, Scenario, WorldGraph
from .errors import AmbiguousContext, AssignmentInfeasible, PlanInfeasible, PlanTimeout, TransitInfeasible
from .lcbs import Agent, Constraint, JointPlan, conflict_based_search, la_star

HOP = LexOrdering((0,))


@dataclass(frozen=True)
class RobotGroup:
    members: tuple
    landmark: str
    targets: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "targets", dict(self.targets))
        if not self.members:
            raise ValueError("group needs at least one member")
        if set(self.targets) != set(self.members):
            raise ValueError("every member needs exactly one target")
        if len(set(self.targets.values())) != len(self.members):
            raise ValueError("group targets must be distinct")

    def arrived(self, positions: Mapping) -> bool:
        """Every site vertex of the group is occupied by some member.

        Members are interchangeable, so transit may swap their targets.
        """
        return {positions[m] for m in self.members} == set(self.targets.values())


@dataclass(frozen=True)
class TraceStep:
    step: int
    positions: Mapping[str, object]
    belief: Belief
    entropy: int
    visited: tuple
    observations: tuple = ()


@dataclass
class InferenceTrace:
    steps: list
    inferred: str
    final_positions: dict
    segments: list = field(default_factory=list)
    assignments: list = field(default_factory=list)

    @property
    def entropies(self) -> list[int]:
        return [s.entropy for s in self.steps]

    @property
    def cumulative_entropy(self) -> int:
        return sum(self.entropies)

    @property
    def total_steps(self) -> int:
        return self.steps[-1].step if self.steps else 0

    @property
    def visited(self) -> tuple:
        return self.steps[-1].visited if self.steps else ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,entropy,visited_landmarks,positions\n")
        for s in self.steps:
            pos = ";".join(f"{r}:{v}" for r, v in sorted(s.positions.items()))
            buf.write(f"{s.step},{s.entropy},{';'.join(s.visited)},{pos}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# team sizing and ordering


def min_robots_required(lm: LandmarkSpec, b0: Belief, max_robots: int) -> int:
    """Smallest team size reaching the largest expected entropy reduction.

    Returns ``max_robots + 1`` when no team size helps under ``b0``.
    """
    if max_robots < 1:
        raise ValueError("max_robots must be positive")
    reductions = [expected_entropy_reduction(b0, lm, k) for k in range(1, max_robots + 1)]
    best = max(reductions)
    if best <= 0:
        return max_robots + 1
    return reductions.index(best) + 1


def landmark_visit_sequence(n_req: Mapping[str, int], lms: Iterable[LandmarkSpec], b: Belief) -> list[LandmarkSpec]:
    """Landmarks by descending expected reduction; ties go to smaller teams, then id.

    Landmarks that cannot reduce entropy trail in id order.
    """

    def sort_key(lm):
        red = expected_entropy_reduction(b, lm, n_req[lm.id])
        if red <= 0:
            return (1, 0.0, 0, lm.id)
        return (0, -red, n_req[lm.id], lm.id)

    return sorted(lms, key=sort_key)


# ---------------------------------------------------------------------------
# assignment


def hop_distances_to(graph: WorldGraph, target) -> dict:
    """Hop count from every vertex that can reach ``target``."""
    cache = graph._cache
    ck = ("hops_to", target)
    if ck in cache:
        return cache[ck]
    dist = {target: 0}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for u in graph.predecessors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    cache[ck] = dist
    return dist


def assign_nearest_robots(available: Iterable[str], lm: LandmarkSpec, k: int, graph: WorldGraph, positions: Mapping) -> RobotGroup:
    """Pick the ``k`` robots closest (in hops) to the landmark site and match them to site vertices."""
    available = sorted(available)
    if len(available) < k:
        raise AssignmentInfeasible(f"landmark {lm.id} needs {k} robots, {len(available)} available")
    tables = {s: hop_distances_to(graph, s) for s in lm.site}

    def dist(r, s):
        return tables[s].get(positions[r], math.inf)

    nearest = sorted(available, key=lambda r: (min(dist(r, s) for s in lm.site), r))
    chosen = nearest[:k]
    for r in chosen:
        if min(dist(r, s) for s in lm.site) == math.inf:
            raise AssignmentInfeasible(f"robot {r} cannot reach landmark {lm.id}")
    pairs = sorted((dist(r, s), r, s) for r in chosen for s in lm.site)
    targets, used = {}, set()
    for d, r, s in pairs:
        if d == math.inf:
            break
        if r in targets or s in used:
            continue
        targets[r] = s
        used.add(s)
    if len(targets) != k:
        raise AssignmentInfeasible(f"no complete robot-to-site matching for landmark {lm.id}")
    return RobotGroup(tuple(chosen), lm.id, targets)


# ---------------------------------------------------------------------------
# transit


def _unit_graph(graph: WorldGraph) -> WorldGraph:
    cache = graph._cache
    if "unit" not in cache:
        cache["unit"] = graph.unit_cost()
    return cache["unit"]


def _nearest_free(graph: WorldGraph, v, avoid: set):
    seen = {v}
    queue = deque([v])
    while queue:
        x = queue.popleft()
        if x not in avoid:
            return x
        for u in graph.neighbors(x):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return None


def _depth(graph: WorldGraph, v, region: set) -> int:
    """Hops from ``v`` to the nearest vertex outside ``region``."""
    seen = {v}
    queue = deque([(v, 0)])
    while queue:
        x, d = queue.popleft()
        if x not in region:
            return d
        for u in graph.neighbors(x):
            if u not in seen:
                seen.add(u)
                queue.append((u, d + 1))
    return len(graph.vertices)


def _fill_order(graph: WorldGraph, groups: Sequence[RobotGroup], positions: Mapping) -> list[Agent]:
    """Movers re-matched so the closest robot takes the deepest site vertex, deepest first."""
    agents = []
    for g in groups:
        site = set(g.targets.values())
        tables = {v: hop_distances_to(graph, v) for v in site}
        # among equally deep vertices, fill the one farthest from the group first
        reach = {v: min(tables[v].get(positions[r], math.inf) for r in g.members) for v in site}
        by_depth = sorted(site, key=lambda v: (-_depth(graph, v, site), -reach[v], v))
        near = sorted(g.members, key=lambda r: (min(tables[v].get(positions[r], math.inf) for v in site), r))
        agents.extend(zip(by_depth, near))
    depth_rank = {}
    for g in groups:
        site = set(g.targets.values())
        for v in site:
            depth_rank[v] = _depth(graph, v, site)
    order = {v: i for i, (v, _) in enumerate(agents)}
    agents.sort(key=lambda tv: (-depth_rank[tv[0]], order[tv[0]]))
    return [Agent(r, positions[r], v) for v, r in agents]


def _prioritized(graph: WorldGraph, agents: Sequence[Agent], blocked: set) -> Optional[JointPlan]:
    """Plan agents one at a time, each avoiding the timed paths of those before it."""
    constraints: list[Constraint] = []
    parked: dict = {v: 0 for v in blocked}
    paths, costs = {}, {}
    for a in agents:
        path = la_star(graph, a.start, a.goal, HOP, constraints=constraints, blocked=parked)
        if path is None:
            return None
        paths[a.id] = path.vertices
        costs[a.id] = path.cost
        vs = path.vertices
        for t, v in enumerate(vs):
            constraints.append(Constraint.vertex("*", v, t))
            if t + 1 < len(vs):
                constraints.append(Constraint.edge("*", vs[t + 1], v, t))
        parked[vs[-1]] = len(vs) - 1
    total = (sum(c[0] for c in costs.values()),)
    return JointPlan(paths, costs, total, {"prioritized": True})


def plan_to_landmarks(
    all_robots: Sequence[str],
    groups: Sequence[RobotGroup],
    graph: WorldGraph,
    positions: Mapping,
    budget: Optional[float] = 30.0,
    max_nodes: int = 2000,
) -> JointPlan:
    """Hop-count CBS moving each group onto its site.

    Robots outside every group hold position and act as obstacles. When CBS
    cannot finish within ``max_nodes`` constraint-tree nodes, members are
    planned one by one, deepest site vertex first. If idle robots wall off a
    site they are allowed to step aside and return (or, when parked on a
    target, to move to the nearest free vertex).
    """
    unit = _unit_graph(graph)
    members = {}
    for g in groups:
        for m in g.members:
            if m in members:
                raise ValueError(f"robot {m} belongs to two groups")
            members[m] = g.targets[m]
    idle = [r for r in all_robots if r not in members]
    movers = [Agent(r, positions[r], members[r]) for r in sorted(members)]
    idle_cells = {positions[r] for r in idle}
    targets = set(members.values())

    def finish(plan: JointPlan, extra_idle=()) -> JointPlan:
        paths = dict(plan.paths)
        costs = dict(plan.costs)
        for r in extra_idle:
            paths[r] = (positions[r],)
            costs[r] = (0,)
        return JointPlan(paths, costs, plan.cost, plan.stats)

    if not movers:
        return finish(JointPlan({}, {}, (0,)), idle)
    if not (targets & idle_cells):
        try:
            plan = conflict_based_search(
                unit, movers, HOP, budget=budget, heuristic="exact", blocked=idle_cells, max_nodes=max_nodes
            )
            return finish(plan, idle)
        except (PlanInfeasible, PlanTimeout):
            pass
        plan = _prioritized(unit, _fill_order(unit, groups, positions), idle_cells)
        if plan is not None:
            return finish(plan, idle)
    avoid = targets | {positions[r] for r in all_robots if r in members}
    shifted = []
    for r in sorted(idle):
        goal = positions[r]
        if goal in targets:
            goal = _nearest_free(unit, goal, avoid | {a.goal for a in shifted})
            if goal is None:
                raise TransitInfeasible(f"nowhere to park idle robot {r}")
        shifted.append(Agent(r, positions[r], goal))
    try:
        return conflict_based_search(unit, movers + shifted, HOP, budget=budget, heuristic="exact", max_nodes=max_nodes)
    except (PlanInfeasible, PlanTimeout) as exc:
        plan = _prioritized(unit, _fill_order(unit, groups, positions) + shifted, set())
        if plan is None:
            raise TransitInfeasible(f"no conflict-free transit plan: {exc}") from exc
        return plan


# ---------------------------------------------------------------------------
# main loop


def run_inference_loop(
    s: Scenario,
    n_req: Mapping[str, int],
    order: Callable[[Belief], Sequence[LandmarkSpec]],
    *,
    informative_only: bool = True,
    recall: bool = True,
    transit_budget: Optional[float] = 30.0,
    max_steps: Optional[int] = None,
) -> InferenceTrace:
    """Synchronous assign / move / observe loop shared by CIMOP and its baselines.

    ``order(b)`` gives landmark priority under the current belief. Each
    iteration records one timestep; an observation fires at the timestep the
    last member of a group stands on its target.
    """
    robots = list(s.robot_ids)
    positions = dict(s.starts())
    b = s.initial_belief
    if entropy(b) == 0:
        return InferenceTrace([], b.argmax(), positions)
    if max_steps is None:
        max_steps = 20 * len(s.graph.vertices) * max(1, len(s.landmarks))
    available = set(robots)
    visited: list[str] = []
    groups: list[RobotGroup] = []
    trace = InferenceTrace([], "", positions)
    plan: Optional[JointPlan] = None
    plan_t0 = 0
    t = 0
    by_id = {lm.id: lm for lm in s.landmarks}

    while True:
        changed = False
        observations = []
        for g in list(groups):
            if g.arrived(positions):
                obs = observe(s, g.landmark, len(g.members))
                b = update_belief(b, obs)
                observations.append(obs)
                groups.remove(g)
                available.update(g.members)
                visited.append(g.landmark)
                changed = True
        if changed and recall:
            for g in list(groups):
                if expected_entropy_reduction(b, by_id[g.landmark], len(g.members)) <= 0:
                    groups.remove(g)
                    available.update(g.members)
        step = TraceStep(t, dict(positions), b, entropy(b), tuple(visited), tuple(observations))
        if trace.steps and trace.steps[-1].step == t:
            prev = trace.steps[-1]
            step = TraceStep(t, step.positions, b, step.entropy, step.visited, prev.observations + step.observations)
            trace.steps[-1] = step
        else:
            trace.steps.append(step)
        if entropy(b) == 0:
            break

        active = {g.landmark for g in groups}
        fresh = []
        for lm in order(b):
            if lm.id in visited or lm.id in active:
                continue
            k = n_req[lm.id]
            if k > len(robots) or k > len(available):
                continue
            if informative_only and expected_entropy_reduction(b, lm, k) <= 0:
                continue
            g = assign_nearest_robots(available, lm, k, s.graph, positions)
            groups.append(g)
            fresh.append(g)
            active.add(lm.id)
            available.difference_update(g.members)
            trace.assignments.append((t, g))
            changed = True
        if not groups:
            raise AmbiguousContext(
                f"entropy {entropy(b)} remains and no unvisited landmark can reduce it (visited {visited})"
            )
        if any(g.arrived(positions) for g in fresh):
            continue
        if changed or plan is None:
            plan = plan_to_landmarks(robots, groups, s.graph, positions, transit_budget)
            plan_t0 = t
            trace.segments.append((t, plan))
        t += 1
        if t > max_steps:
            raise TransitInfeasible(f"no belief collapse after {max_steps} steps")
        positions = plan.positions(t - plan_t0)

    trace.inferred = b.argmax()
    trace.final_positions = dict(positions)
    return trace


def run_cimop(s: Scenario, *, transit_budget: Optional[float] = 30.0) -> tuple[InferenceTrace, str, LexOrdering]:
    """Coordinated context inference; returns the trace, inferred context and its ordering."""
    b0 = s.initial_belief
    if entropy(b0) == 0:
        cid = b0.argmax()
        return InferenceTrace([], cid, dict(s.starts())), cid, s.ordering(cid)
    n_robots = len(s.robots)
    n_req = {lm.id: min_robots_required(lm, b0, n_robots) for lm in s.landmarks}
    trace = run_inference_loop(
        s,
        n_req,
        lambda b: landmark_visit_sequence(n_req, s.landmarks, b),
        transit_budget=transit_budget,
    )
    return trace, trace.inferred, s.ordering(trace.inferred)
