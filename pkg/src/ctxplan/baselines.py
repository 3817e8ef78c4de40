"""Comparison planners and the exhaustive joint-space oracle."""
from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .core import CostVector, LexOrdering, Scenario, WorldGraph, zero_cost
from .errors import OracleGuardError, PlanInfeasible, SamplingError
from .cimop import InferenceTrace, run_inference_loop
from .lcbs import JointPlan, backward_costs, conflict_based_search, scenario_agents

ORACLE_MAX_ROBOTS = 5
ORACLE_MAX_VERTICES = 30
ORACLE_MAX_HORIZON = 16


@dataclass(frozen=True)
class ScalarWeights:
    """Geometric weights ``M^(n-1), ..., M, 1`` assigned along a priority order."""

    M: float
    priority: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "priority", tuple(self.priority))
        if self.M <= 1:
            raise ValueError("M must exceed 1")

    @property
    def weights(self) -> tuple:
        n = len(self.priority)
        return tuple(self.M ** (n - 1 - k) for k in range(n))

    @property
    def by_objective(self) -> tuple:
        out = [0] * len(self.priority)
        for w, i in zip(self.weights, self.priority):
            out[i] = w
        return tuple(out)

    def scalar(self, c: Sequence[float]):
        return sum(w * x for w, x in zip(self.by_objective, c))

    def __call__(self, c: Sequence[float]) -> tuple:
        return (self.scalar(c),)


def random_walk_cost(graph: WorldGraph, start, goal, rng: random.Random, cap: int) -> Optional[CostVector]:
    v = start
    total = list(zero_cost(graph.n_objectives))
    for _ in range(cap):
        if v == goal:
            return tuple(total)
        nbrs = graph.neighbors(v)
        if not nbrs:
            return None
        u = rng.choice(nbrs)
        for i, x in enumerate(graph.edges[v][u]):
            total[i] += x
        v = u
    return tuple(total) if v == goal else None


def estimate_M(s: Scenario, ordering: LexOrdering, samples: int = 50, seed: int = 0, retries: int = 10) -> ScalarWeights:
    """Pick the scalarization base from random start-to-goal walks.

    Walks cycle over the robots, choose a uniformly random neighbour each step
    and are capped at ``2|V|`` steps; a failed walk is retried up to
    ``retries`` times. ``M`` is one more than the largest lower-priority cost
    seen on any successful walk (at least 2).
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = random.Random(seed)
    cap = 2 * len(s.graph.vertices)
    lower = ordering.priority[1:]
    observed = []
    for k in range(samples):
        robot = s.robots[k % len(s.robots)]
        for _ in range(retries):
            c = random_walk_cost(s.graph, robot.start, robot.goal, rng, cap)
            if c is not None:
                observed.append(c)
                break
    if not observed:
        raise SamplingError(f"no random walk reached its goal within {cap} steps")
    biggest = max((c[i] for c in observed for i in lower), default=0)
    return ScalarWeights(max(2, 1 + biggest), ordering.priority)


def scalarized_cbs(
    s: Scenario,
    weights: ScalarWeights,
    budget: Optional[float] = None,
    starts: Optional[Mapping] = None,
    **kwargs,
) -> JointPlan:
    """Standard CBS minimizing the weighted sum of objectives."""
    return conflict_based_search(s.graph, scenario_agents(s, starts), weights, budget=budget, **kwargs)


def plain_cbs(s: Scenario, budget: Optional[float] = None, starts: Optional[Mapping] = None, **kwargs) -> JointPlan:
    """Single-objective CBS; only meaningful when the scenario has one objective."""
    if s.objectives.count != 1:
        raise ValueError("plain CBS needs a single-objective scenario")
    return scalarized_cbs(s, ScalarWeights(2, (0,)), budget, starts, **kwargs)


def random_inference_baseline(s: Scenario, seed: int = 0, *, transit_budget: Optional[float] = 30.0) -> InferenceTrace:
    """Inference loop with a seeded random landmark order and maximal fixed team sizes.

    Every landmark is visited in the shuffled order whether or not it can
    still reduce entropy, and groups are never recalled.
    """
    order = sorted(s.landmarks, key=lambda lm: lm.id)
    random.Random(seed).shuffle(order)
    n_req = {lm.id: lm.max_required for lm in s.landmarks}
    return run_inference_loop(
        s,
        n_req,
        lambda b: order,
        informative_only=False,
        recall=False,
        transit_budget=transit_budget,
    )


# ---------------------------------------------------------------------------
# exhaustive oracle


def joint_search(
    graph: WorldGraph,
    agents: Sequence,
    key,
    horizon: int = ORACLE_MAX_HORIZON,
    use_heuristic: bool = True,
) -> JointPlan:
    """Best-first search over joint configurations, exact under ``key``.

    A state is (positions, finished flags). A robot standing on its goal may
    finish at zero cost, after which it occupies the goal for good; until then
    it pays for every move or wait. Labels carry their timestep and are
    discarded when a label of the same state with no greater cost and no later
    time was already expanded.
    """
    agents = list(agents)
    n_key = len(key(zero_cost(graph.n_objectives)))
    zero = (0,) * n_key
    succ = {v: tuple((u, key(c)) for u, c in graph.successors(v)) for v in graph.vertices}
    goals = [a.goal for a in agents]
    if use_heuristic:
        to_go = [backward_costs(graph, a.goal, key) for a in agents]
    inf = (math.inf,) * n_key

    def h(pos, done):
        if not use_heuristic:
            return zero
        total = zero
        for i, v in enumerate(pos):
            if not done[i]:
                d = to_go[i].get(v, inf)
                total = tuple(a + b for a, b in zip(total, d))
        return total

    start = tuple(a.start for a in agents)
    done0 = tuple(False for _ in agents)
    # label: (pos, done, t, g, parent_index)
    labels = [(start, done0, 0, zero, -1)]
    counter = itertools.count()
    heap = [(h(start, done0), 0, next(counter), 0)]
    best_at: dict = {(start, done0, 0): zero}
    expanded_t: dict = {}
    n = len(agents)
    while heap:
        _f, t, _c, idx = heapq.heappop(heap)
        pos, done, t, g, _parent = labels[idx]
        state = (pos, done)
        if expanded_t.get(state, math.inf) <= t:
            continue
        expanded_t[state] = t
        if all(done):
            return _oracle_plan(graph, agents, labels, idx)
        if t >= horizon:
            continue
        options = []
        for i in range(n):
            v = pos[i]
            if done[i]:
                options.append(((v, zero, True),))
                continue
            opts = [(u, c, False) for u, c in succ[v]]
            if v == goals[i]:
                opts.append((v, zero, True))
            options.append(tuple(opts))

        nxt_pos = [None] * n
        nxt_done = [False] * n
        costs = [None] * n

        def assign(i):
            if i == n:
                yield
                return
            v = pos[i]
            for u, c, d in options[i]:
                clash = False
                for j in range(i):
                    if nxt_pos[j] == u or (u != v and nxt_pos[j] == v and pos[j] == u):
                        clash = True
                        break
                if clash:
                    continue
                nxt_pos[i], nxt_done[i], costs[i] = u, d, c
                yield from assign(i + 1)

        for _ in assign(0):
            np_, nd = tuple(nxt_pos), tuple(nxt_done)
            g2 = g
            for c in costs:
                g2 = tuple(a + b for a, b in zip(g2, c))
            sk = (np_, nd, t + 1)
            old = best_at.get(sk)
            if old is not None and old <= g2:
                continue
            if expanded_t.get((np_, nd), math.inf) <= t + 1:
                continue
            hv = h(np_, nd)
            if hv[0] == math.inf:
                continue
            best_at[sk] = g2
            labels.append((np_, nd, t + 1, g2, idx))
            heapq.heappush(heap, (tuple(a + b for a, b in zip(g2, hv)), t + 1, next(counter), len(labels) - 1))
    raise PlanInfeasible(f"no conflict-free joint plan within horizon {horizon}")


def _oracle_plan(graph: WorldGraph, agents, labels, idx) -> JointPlan:
    chain = []
    while idx >= 0:
        chain.append(labels[idx])
        idx = labels[idx][4]
    chain.reverse()
    paths = {}
    for i, a in enumerate(agents):
        seq = []
        for pos, done, _t, _g, _p in chain:
            seq.append(pos[i])
            if done[i]:
                break
        # the finishing transition keeps the robot in place; drop the duplicate
        if len(seq) >= 2 and chain[len(seq) - 1][1][i] and not chain[len(seq) - 2][1][i]:
            seq.pop()
        paths[a.id] = tuple(seq)
    costs = {r: graph.path_cost(p) for r, p in paths.items()}
    total = zero_cost(graph.n_objectives)
    for c in costs.values():
        total = tuple(a + b for a, b in zip(total, c))
    return JointPlan(paths, costs, total, {"labels": len(labels)})


def brute_force_lex_oracle(
    s: Scenario,
    ordering: LexOrdering,
    horizon: int = ORACLE_MAX_HORIZON,
    starts: Optional[Mapping] = None,
    *,
    use_heuristic: bool = True,
) -> tuple[CostVector, JointPlan]:
    """Lexicographically minimal joint cost over all conflict-free joint plans within ``horizon``."""
    if len(s.robots) > ORACLE_MAX_ROBOTS:
        raise OracleGuardError(f"{len(s.robots)} robots exceeds oracle limit {ORACLE_MAX_ROBOTS}")
    if len(s.graph.vertices) > ORACLE_MAX_VERTICES:
        raise OracleGuardError(f"{len(s.graph.vertices)} vertices exceeds oracle limit {ORACLE_MAX_VERTICES}")
    if horizon > ORACLE_MAX_HORIZON:
        raise OracleGuardError(f"horizon {horizon} exceeds oracle limit {ORACLE_MAX_HORIZON}")
    plan = joint_search(s.graph, scenario_agents(s, starts), ordering, horizon, use_heuristic)
    return plan.cost, plan
