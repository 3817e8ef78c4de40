import pytest

from ctxplan.belief import Belief
from ctxplan.core import Context, LandmarkSpec, LexOrdering, ObjectiveSet, Robot, Scenario, Tier, WorldGraph


def undirected(pairs, n_obj=1, wait=None, coords=None):
    """Graph from (u, v, cost) triples used in both directions; waits default to a unit first component."""
    edges = {}
    vertices = set()
    for u, v, c in pairs:
        edges.setdefault(u, {})[v] = tuple(c)
        edges.setdefault(v, {})[u] = tuple(c)
        vertices.update((u, v))
    if wait is None:
        wait = (1,) + (0,) * (n_obj - 1)
    waits = {v: wait(v) if callable(wait) else tuple(wait) for v in vertices}
    return WorldGraph(tuple(sorted(vertices)), edges, waits, coords)


def scenario(graph, robots, n_obj=None, *, orderings=None, landmarks=(), true="c1", belief=None, stochastic=None, sid="t"):
    n = n_obj or graph.n_objectives
    objectives = ObjectiveSet(tuple(f"o{i}" for i in range(n)))
    orderings = orderings or [LexOrdering.identity(n)]
    contexts = tuple(Context(f"c{i + 1}", o) for i, o in enumerate(orderings))
    cids = [c.id for c in contexts]
    return Scenario(
        objectives=objectives,
        graph=graph,
        contexts=contexts,
        true_context=true,
        landmarks=tuple(landmarks),
        robots=tuple(Robot(r, s, g) for r, s, g in robots),
        initial_belief=belief or (Belief.uniform(cids) if len(cids) > 1 else Belief.point(cids, cids[0])),
        stochastic=stochastic,
        id=sid,
    )


def landmark(lid, site, *tiers):
    return LandmarkSpec(lid, tuple(site), tuple(Tier(k, tuple(frozenset(c) for c in part)) for k, part in tiers))


@pytest.fixture
def pocket():
    """Corridor A-B-C with a side pocket P hanging off B; moves (1, 1), waits (1, 0)."""
    return undirected([("A", "B", (1, 1)), ("B", "C", (1, 1)), ("B", "P", (1, 1))], wait=(1, 0))


@pytest.fixture
def line3():
    return undirected([("A", "B", (1, 0)), ("B", "C", (1, 0))], wait=(1, 0))


# one line per acceptance criterion, filled by test_acceptance and printed at the end of the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
