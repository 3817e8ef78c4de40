"""Seeded grid scenario generators for the salp, warehouse and firefight flavors."""
from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass

from .belief import Belief, entropy, expected_entropy_reduction, update_belief, Observation
from .core import (
    Context,
    LandmarkSpec,
    LexOrdering,
    ObjectiveSet,
    Robot,
    Scenario,
    Tier,
    WorldGraph,
    slip_model,
    validate_scenario,
)
from .errors import GenerationError

# objective names per flavor, in storage order
FLAVOR_OBJECTIVES = {
    "salp": ("energy", "coral", "time"),
    "warehouse": ("time", "congestion", "human"),
    "firefight": ("time", "energy", "length"),
}

# the three canonical context orderings, highest priority first
FLAVOR_ORDERINGS = {
    "salp": (("energy", "coral", "time"), ("coral", "energy", "time"), ("time", "energy", "coral")),
    "warehouse": (("time", "congestion", "human"), ("congestion", "time", "human"), ("human", "congestion", "time")),
    "firefight": (("energy", "length", "time"), ("length", "energy", "time"), ("time", "energy", "length")),
}

# objectives charged for occupying a zone cell; the rest are charged per step
ZONE_OBJECTIVES = {"coral": 4, "congestion": 3, "human": 5}

FLAVORS = tuple(FLAVOR_OBJECTIVES)


@dataclass(frozen=True)
class GenParams:
    flavor: str = "salp"
    width: int = 16
    height: int = 16
    robots: int = 5
    landmarks: int = 4
    redundant_fraction: float = 0.0
    contexts: int = 3
    obstacle_density: float = 0.1
    seed: int = 0
    objectives: int = 3
    slip: float = 0.0
    max_team: int = 3

    def __post_init__(self):
        if self.flavor not in FLAVOR_OBJECTIVES:
            raise ValueError(f"unknown flavor {self.flavor!r}; expected one of {FLAVORS}")
        if not 0.0 <= self.redundant_fraction <= 1.0:
            raise ValueError("redundant_fraction must lie in [0, 1]")
        if not 0.0 <= self.obstacle_density < 1.0:
            raise ValueError("obstacle_density must lie in [0, 1)")
        for name in ("width", "height", "robots", "contexts", "objectives", "max_team"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.landmarks < 0:
            raise ValueError("landmarks must be non-negative")
        if self.objectives > 3:
            raise ValueError("flavors define three objectives")
        if self.contexts > 6:
            raise ValueError("three objectives admit at most six distinct orderings")

    @property
    def redundant_count(self) -> int:
        return int(self.redundant_fraction * self.landmarks)


def flavor_orderings(flavor: str, count: int) -> list[tuple[str, ...]]:
    """Canonical orderings first, then the remaining permutations in lexicographic order."""
    canon = list(FLAVOR_ORDERINGS[flavor])
    rest = [p for p in itertools.permutations(sorted(FLAVOR_OBJECTIVES[flavor])) if p not in canon]
    return (canon + rest)[:count]


def _largest_component(free: set, width: int) -> set:
    best: set = set()
    seen: set = set()
    for cell in sorted(free):
        if cell in seen:
            continue
        comp = {cell}
        queue = deque([cell])
        seen.add(cell)
        while queue:
            x, y = queue.popleft()
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nb in free and nb not in seen:
                    seen.add(nb)
                    comp.add(nb)
                    queue.append(nb)
        if len(comp) > len(best):
            best = comp
    return best


def _zones(rng: random.Random, cells: list, width: int, height: int, blobs: int) -> set:
    zone = set()
    cellset = set(cells)
    for _ in range(blobs):
        cx, cy = rng.randrange(width), rng.randrange(height)
        w, h = rng.randint(1, max(1, width // 3)), rng.randint(1, max(1, height // 3))
        for x in range(cx, min(width, cx + w)):
            for y in range(cy, min(height, cy + h)):
                if (x, y) in cellset:
                    zone.add((x, y))
    return zone


def build_grid(p: GenParams, rng: random.Random):
    """Grid graph over the largest free component, with flavor cost vectors."""
    free = {
        (x, y)
        for x in range(p.width)
        for y in range(p.height)
        if rng.random() >= p.obstacle_density
    }
    cells = sorted(_largest_component(free, p.width))
    names = FLAVOR_OBJECTIVES[p.flavor][: p.objectives]
    blobs = max(1, (p.width * p.height) // 40)
    zones = {n: _zones(rng, cells, p.width, p.height, blobs) for n in names if n in ZONE_OBJECTIVES}
    terrain = {c: rng.randint(0, 2) for c in cells}

    def vid(c):
        return c[1] * p.width + c[0]

    def step_cost(dst, moving: bool):
        out = []
        for n in names:
            if n in ZONE_OBJECTIVES:
                # every step disturbs a little; a zone cell much more
                out.append(1 + (ZONE_OBJECTIVES[n] if dst in zones[n] else 0))
            elif n == "time":
                out.append(1)
            elif n == "energy":
                out.append(1 + terrain[dst] if moving else 1)
            elif n == "length":
                out.append(2 if moving else 1)
        return tuple(out)

    cellset = set(cells)
    edges, waits, coords = {}, {}, {}
    for c in cells:
        v = vid(c)
        coords[v] = (float(c[0]), float(c[1]))
        waits[v] = step_cost(c, False)
        out = {}
        x, y = c
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in cellset:
                out[vid(nb)] = step_cost(nb, True)
        edges[v] = out
    graph = WorldGraph(tuple(sorted(coords)), edges, waits, coords)
    return graph, ObjectiveSet(tuple(names)), {n: sorted(vid(c) for c in z) for n, z in zones.items()}


def _site(rng: random.Random, graph: WorldGraph, size: int, taken: set):
    """Connected cluster of ``size`` untaken vertices, or None."""
    candidates = [v for v in graph.vertices if v not in taken]
    rng.shuffle(candidates)
    for seed in candidates[:50]:
        cluster = [seed]
        frontier = [u for u in graph.neighbors(seed) if u not in taken]
        while len(cluster) < size and frontier:
            u = frontier.pop(rng.randrange(len(frontier)))
            if u in cluster:
                continue
            cluster.append(u)
            frontier.extend(w for w in graph.neighbors(u) if w not in taken and w not in cluster)
        if len(cluster) == size:
            return tuple(sorted(cluster))
    return None


def _split(rng: random.Random, cids: list) -> list[frozenset]:
    """Random partition with at least two cells (when possible)."""
    if len(cids) < 2:
        return [frozenset(cids)]
    shuffled = list(cids)
    rng.shuffle(shuffled)
    cut = rng.randint(1, len(shuffled) - 1)
    return [frozenset(shuffled[:cut]), frozenset(shuffled[cut:])]


def _refine(rng: random.Random, partitions: list[list[frozenset]], cids: list) -> None:
    """Split cells until the partitions jointly separate every pair of contexts."""
    while True:
        joint = {c: frozenset(cids) for c in cids}
        for part in partitions:
            for cell in part:
                for c in cell:
                    joint[c] = joint[c] & cell
        merged = sorted({cell for cell in joint.values() if len(cell) > 1}, key=sorted)
        if not merged:
            return
        a, b = sorted(merged[0])[:2]
        part = partitions[rng.randrange(len(partitions))]
        for i, cell in enumerate(part):
            if a in cell and b in cell:
                rest = sorted(cell - {a, b})
                rng.shuffle(rest)
                cut = rng.randint(0, len(rest))
                part[i] = frozenset([a] + rest[:cut])
                part.append(frozenset([b] + rest[cut:]))
                break


def _check_soundness(s: Scenario) -> None:
    """All informative landmarks together must collapse a uniform belief for every true context."""
    informative = [lm for lm in s.landmarks if len(lm.tiers[-1].partition) > 1]
    for truth in s.context_ids:
        b = Belief.uniform(s.context_ids)
        for lm in informative:
            b = update_belief(b, Observation(lm.tiers[-1].cell_of(truth), lm.id))
        if entropy(b) != 0:
            raise GenerationError(f"informative landmarks do not separate context {truth}")
    for lm in informative:
        if expected_entropy_reduction(s.initial_belief, lm, lm.max_required) <= 0:
            raise GenerationError(f"landmark {lm.id} is not informative under the initial belief")


def generate(p: GenParams) -> Scenario:
    """Build a validated scenario; identical params give an identical scenario."""
    rng = random.Random(p.seed)
    graph, objectives, zones = build_grid(p, rng)
    names = objectives.names
    cids = [f"c{i + 1}" for i in range(p.contexts)]
    contexts = []
    for cid, order in zip(cids, flavor_orderings(p.flavor, p.contexts)):
        projected = [n for n in order if n in names]
        contexts.append(Context(cid, LexOrdering.from_names(projected, objectives)))

    n_red = p.redundant_count
    n_inf = p.landmarks - n_red
    if p.contexts > 1 and n_inf == 0:
        raise GenerationError("no informative landmark left to separate the contexts")
    max_team = min(p.max_team, p.robots)

    cells = list(graph.vertices)
    if len(cells) < 2 * p.robots:
        raise GenerationError(f"only {len(cells)} free cells for {p.robots} robots")
    rng.shuffle(cells)
    starts, goals = cells[: p.robots], cells[p.robots : 2 * p.robots]
    taken = set(starts) | set(goals)

    # informative partitions, refined to separate all contexts jointly
    fine = [_split(rng, cids) for _ in range(n_inf)]
    if n_inf and p.contexts > 1:
        _refine(rng, fine, cids)

    landmarks = []
    ids = [f"L{i}" for i in range(p.landmarks)]
    redundant = set(rng.sample(range(p.landmarks), n_red))
    fine_iter = iter(fine)
    for i, lid in enumerate(ids):
        team = rng.randint(1, max_team)
        site = _site(rng, graph, team, taken)
        if site is None:
            raise GenerationError(f"cannot place a {team}-vertex site for landmark {lid}")
        taken.update(site)
        if i in redundant or p.contexts == 1:
            tiers = (Tier(team, (frozenset(cids),)),)
        else:
            part = sorted(next(fine_iter), key=sorted)
            tiers = [Tier(team, tuple(part))]
            if team > 1 and len(part) > 2:
                # fewer robots see a coarser split: the first two cells merge
                coarse = (part[0] | part[1],) + tuple(part[2:])
                tiers.insert(0, Tier(rng.randint(1, team - 1), coarse))
            tiers = tuple(tiers)
        landmarks.append(LandmarkSpec(lid, site, tiers))

    robots = tuple(Robot(f"r{i}", starts[i], goals[i]) for i in range(p.robots))
    s = Scenario(
        objectives=objectives,
        graph=graph,
        contexts=tuple(contexts),
        true_context=rng.choice(cids),
        landmarks=tuple(landmarks),
        robots=robots,
        initial_belief=Belief.uniform(cids),
        stochastic=slip_model(graph, p.slip) if p.slip > 0 else None,
        id=f"{p.flavor}-{p.width}x{p.height}-s{p.seed}",
        meta={"params": p.__dict__.copy(), "zones": zones, "redundant": sorted(ids[i] for i in redundant)},
    )
    validate_scenario(s)
    if p.contexts > 1:
        _check_soundness(s)
    return s


def generate_retry(p: GenParams, attempts: int = 20) -> Scenario:
    """``generate`` with successive seeds until placement succeeds."""
    import dataclasses

    last = None
    for k in range(attempts):
        try:
            return generate(dataclasses.replace(p, seed=p.seed + 7919 * k))
        except GenerationError as exc:
            last = exc
    raise GenerationError(f"gave up after {attempts} attempts: {last}")


def m_violation_instance(detour_cost: int = 10_000) -> Scenario:
    """Salp-flavored instance on which a moderate scalarization base picks the wrong path.

    Route 0-1-4 costs (2, detour_cost, 2) and route 0-2-3-4 costs
    (3, 3, 3) in (energy, coral, time). With energy first the former is
    lex-better, but any ``M`` below roughly ``detour_cost`` makes the weighted
    sum prefer the latter.
    """
    names = FLAVOR_OBJECTIVES["salp"]
    objectives = ObjectiveSet(names)
    half = detour_cost // 2
    edges = {
        0: {1: (1, half, 1), 2: (1, 1, 1)},
        1: {0: (1, half, 1), 4: (1, half, 1)},
        2: {0: (1, 1, 1), 3: (1, 1, 1)},
        3: {2: (1, 1, 1), 4: (1, 1, 1)},
        4: {1: (1, half, 1), 3: (1, 1, 1)},
    }
    coords = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (0.0, 1.0), 3: (1.0, 1.0), 4: (2.0, 0.0)}
    graph = WorldGraph((0, 1, 2, 3, 4), edges, {v: (1, 1, 1) for v in edges}, coords)
    cids = ["c1", "c2", "c3"]
    contexts = tuple(
        Context(cid, LexOrdering.from_names(order, objectives)) for cid, order in zip(cids, FLAVOR_ORDERINGS["salp"])
    )
    s = Scenario(
        objectives=objectives,
        graph=graph,
        contexts=contexts,
        true_context="c1",
        landmarks=(),
        robots=(Robot("r0", 0, 4),),
        initial_belief=Belief.point(cids, "c1"),
        id="salp-m-violation",
        meta={"params": {"flavor": "salp"}, "engineered": "m-violation"},
    )
    return validate_scenario(s)
