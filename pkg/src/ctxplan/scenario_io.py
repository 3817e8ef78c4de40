"""Versioned JSON scenario format."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .belief import Belief
from .core import (
    Context,
    LandmarkSpec,
    LexOrdering,
    ObjectiveSet,
    Robot,
    Scenario,
    StochasticModel,
    Tier,
    WorldGraph,
    validate_scenario,
)
from .errors import CtxPlanError

FORMAT_VERSION = 1

TOP_KEYS = {"format", "id", "objectives", "graph", "stochastic", "contexts", "true_context", "landmarks", "robots", "initial_belief", "meta"}
REQUIRED_TOP = TOP_KEYS - {"id", "stochastic", "meta"}


class ScenarioFormatError(CtxPlanError, ValueError):
    """Malformed or unsupported scenario file."""


def _keys(obj: Any, where: str, allowed: set, required: set) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown keys {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ScenarioFormatError(f"{where}: missing keys {missing}")
    return obj


def _list(obj: Any, where: str) -> list:
    if not isinstance(obj, list):
        raise ScenarioFormatError(f"{where}: expected a list, got {type(obj).__name__}")
    return obj


def _vertex(x: Any, where: str):
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        raise ScenarioFormatError(f"{where}: vertex ids must be integers or strings, got {x!r}")
    return x


def scenario_to_dict(s: Scenario) -> dict:
    g = s.graph
    names = s.objectives.names
    graph: dict = {
        "vertices": list(g.vertices),
        "edges": [[u, v, list(c)] for u in g.vertices for v, c in sorted(g.edges.get(u, {}).items())],
        "wait_costs": [[v, list(g.wait_costs[v])] for v in g.vertices if v in g.wait_costs],
    }
    if g.coords:
        graph["coords"] = [[v, list(g.coords[v])] for v in g.vertices if v in g.coords]
    out: dict = {
        "format": FORMAT_VERSION,
        "id": s.id,
        "objectives": list(names),
        "graph": graph,
        "contexts": [{"id": c.id, "ordering": c.ordering.names(s.objectives)} for c in s.contexts],
        "true_context": s.true_context,
        "landmarks": [
            {
                "id": lm.id,
                "site": list(lm.site),
                "tiers": [
                    {"min_robots": t.min_robots, "partition": [sorted(cell) for cell in t.partition]}
                    for t in lm.tiers
                ],
                "visited": lm.visited,
            }
            for lm in s.landmarks
        ],
        "robots": [{"id": r.id, "start": r.start, "goal": r.goal} for r in s.robots],
        "initial_belief": dict(s.initial_belief.probs),
    }
    if s.stochastic is not None:
        out["stochastic"] = [
            {
                "vertex": v,
                "action": a,
                "outcomes": [[u, p] for u, p in sorted(table.items(), key=lambda kv: str(kv[0]))],
                "cost": list(s.stochastic.costs[(v, a)]),
            }
            for (v, a), table in sorted(s.stochastic.tables.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))
        ]
    if s.meta:
        out["meta"] = json.loads(json.dumps(s.meta, default=str))
    return out


def scenario_from_dict(d: Any) -> Scenario:
    d = _keys(d, "scenario", TOP_KEYS, REQUIRED_TOP)
    if d["format"] != FORMAT_VERSION:
        raise ScenarioFormatError(f"format: unsupported version {d['format']!r} (expected {FORMAT_VERSION})")
    names = _list(d["objectives"], "objectives")
    objectives = ObjectiveSet(tuple(names))

    g = _keys(d["graph"], "graph", {"vertices", "edges", "wait_costs", "coords"}, {"vertices", "edges", "wait_costs"})
    vertices = [_vertex(v, f"graph.vertices[{i}]") for i, v in enumerate(_list(g["vertices"], "graph.vertices"))]
    edges: dict = {}
    for i, e in enumerate(_list(g["edges"], "graph.edges")):
        if not isinstance(e, list) or len(e) != 3:
            raise ScenarioFormatError(f"graph.edges[{i}]: expected [from, to, cost]")
        u, v = _vertex(e[0], f"graph.edges[{i}][0]"), _vertex(e[1], f"graph.edges[{i}][1]")
        edges.setdefault(u, {})[v] = tuple(_list(e[2], f"graph.edges[{i}][2]"))
    waits = {}
    for i, w in enumerate(_list(g["wait_costs"], "graph.wait_costs")):
        if not isinstance(w, list) or len(w) != 2:
            raise ScenarioFormatError(f"graph.wait_costs[{i}]: expected [vertex, cost]")
        waits[_vertex(w[0], f"graph.wait_costs[{i}][0]")] = tuple(_list(w[1], f"graph.wait_costs[{i}][1]"))
    coords = None
    if "coords" in g:
        coords = {}
        for i, c in enumerate(_list(g["coords"], "graph.coords")):
            if not isinstance(c, list) or len(c) != 2 or len(_list(c[1], f"graph.coords[{i}][1]")) != 2:
                raise ScenarioFormatError(f"graph.coords[{i}]: expected [vertex, [x, y]]")
            coords[_vertex(c[0], f"graph.coords[{i}][0]")] = (float(c[1][0]), float(c[1][1]))
    graph = WorldGraph(tuple(vertices), edges, waits, coords)

    contexts = []
    for i, c in enumerate(_list(d["contexts"], "contexts")):
        c = _keys(c, f"contexts[{i}]", {"id", "ordering"}, {"id", "ordering"})
        try:
            ordering = LexOrdering.from_names(_list(c["ordering"], f"contexts[{i}].ordering"), objectives)
        except (KeyError, ValueError) as exc:
            raise ScenarioFormatError(f"contexts[{i}].ordering: {exc}") from exc
        contexts.append(Context(c["id"], ordering))

    landmarks = []
    for i, lm in enumerate(_list(d["landmarks"], "landmarks")):
        lm = _keys(lm, f"landmarks[{i}]", {"id", "site", "tiers", "visited"}, {"id", "site", "tiers"})
        tiers = []
        for j, t in enumerate(_list(lm["tiers"], f"landmarks[{i}].tiers")):
            t = _keys(t, f"landmarks[{i}].tiers[{j}]", {"min_robots", "partition"}, {"min_robots", "partition"})
            cells = [frozenset(_list(cell, f"landmarks[{i}].tiers[{j}].partition")) for cell in _list(t["partition"], f"landmarks[{i}].tiers[{j}].partition")]
            tiers.append(Tier(t["min_robots"], tuple(cells)))
        site = tuple(_vertex(v, f"landmarks[{i}].site") for v in _list(lm["site"], f"landmarks[{i}].site"))
        landmarks.append(LandmarkSpec(lm["id"], site, tuple(tiers), bool(lm.get("visited", False))))

    robots = []
    for i, r in enumerate(_list(d["robots"], "robots")):
        r = _keys(r, f"robots[{i}]", {"id", "start", "goal"}, {"id", "start", "goal"})
        robots.append(Robot(r["id"], _vertex(r["start"], f"robots[{i}].start"), _vertex(r["goal"], f"robots[{i}].goal")))

    ib = d["initial_belief"]
    if not isinstance(ib, dict):
        raise ScenarioFormatError("initial_belief: expected an object mapping context id to probability")
    try:
        belief = Belief({k: float(v) for k, v in ib.items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"initial_belief: {exc}") from exc

    stochastic = None
    if d.get("stochastic") is not None:
        tables, costs = {}, {}
        for i, row in enumerate(_list(d["stochastic"], "stochastic")):
            row = _keys(row, f"stochastic[{i}]", {"vertex", "action", "outcomes", "cost"}, {"vertex", "action", "outcomes", "cost"})
            key = (_vertex(row["vertex"], f"stochastic[{i}].vertex"), row["action"])
            tables[key] = {_vertex(u, f"stochastic[{i}].outcomes"): float(p) for u, p in _list(row["outcomes"], f"stochastic[{i}].outcomes")}
            costs[key] = tuple(_list(row["cost"], f"stochastic[{i}].cost"))
        stochastic = StochasticModel(tables, costs)

    meta = d.get("meta") or {}
    if not isinstance(meta, dict):
        raise ScenarioFormatError("meta: expected an object")
    s = Scenario(
        objectives=objectives,
        graph=graph,
        contexts=tuple(contexts),
        true_context=d["true_context"],
        landmarks=tuple(landmarks),
        robots=tuple(robots),
        initial_belief=belief,
        stochastic=stochastic,
        id=d.get("id", "scenario"),
        meta=meta,
    )
    return validate_scenario(s)


def loads_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ScenarioFormatError(f"JSON parse error at byte offset {offset} (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    return scenario_from_dict(data)


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1)


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s) + "\n", encoding="utf-8")
