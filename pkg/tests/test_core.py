import pytest

from conftest import landmark, scenario, undirected
from ctxplan.core import (
    Cmp,
    LexOrdering,
    ObjectiveSet,
    Robot,
    StochasticModel,
    add_costs,
    degenerate_model,
    determinize,
    lex_compare,
    slip_model,
    validate_scenario,
)
from ctxplan.errors import DimensionError, ModelError, ScenarioError


class TestLexCompare:
    def test_decided_at_top_priority(self):
        assert lex_compare((2, 9, 9), (3, 0, 0), LexOrdering((0, 1, 2))) is Cmp.LESS

    def test_equal_vectors(self):
        for order in [(0, 1, 2), (2, 1, 0), (1, 2, 0)]:
            assert lex_compare((1, 1, 1), (1, 1, 1), LexOrdering(order)) is Cmp.EQUAL

    def test_permuted_priority(self):
        assert lex_compare((5, 0, 1), (4, 0, 2), LexOrdering((2, 0, 1))) is Cmp.LESS
        assert lex_compare((4, 0, 2), (5, 0, 1), LexOrdering((2, 0, 1))) is Cmp.GREATER

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            lex_compare((1, 2), (1, 2, 3), LexOrdering((0, 1)))
        with pytest.raises(DimensionError):
            add_costs((1,), (1, 2))

    def test_ordering_must_be_permutation(self):
        with pytest.raises(ValueError):
            LexOrdering((0, 0, 1))
        with pytest.raises(ValueError):
            LexOrdering((1, 2))

    def test_from_names(self):
        objs = ObjectiveSet(("energy", "coral", "time"))
        o = LexOrdering.from_names(["coral", "energy", "time"], objs)
        assert o.priority == (1, 0, 2)
        assert o.names(objs) == ["coral", "energy", "time"]
        assert o.key((10, 20, 30)) == (20, 10, 30)


class TestDeterminize:
    def _model(self, table):
        return StochasticModel(
            {("A", "east"): table, ("A", "wait"): {"A": 1.0}, ("B", "wait"): {"B": 1.0}, ("C", "wait"): {"C": 1.0}},
            {("A", "east"): (1,), ("A", "wait"): (0,), ("B", "wait"): (0,), ("C", "wait"): (0,)},
        )

    def test_argmax_successor(self):
        g = determinize(self._model({"B": 0.8, "C": 0.2}))
        assert g.edges["A"] == {"B": (1,)}

    def test_tie_goes_to_smaller_id(self):
        g = determinize(self._model({"C": 0.5, "B": 0.5}))
        assert g.edges["A"] == {"B": (1,)}

    def test_deterministic_table(self):
        g = determinize(self._model({"B": 1.0}))
        assert g.edges["A"] == {"B": (1,)} and g.wait_costs["A"] == (0,)

    def test_empty_table(self):
        with pytest.raises(ModelError):
            determinize(self._model({}))

    def test_missing_wait(self):
        m = StochasticModel({("A", "east"): {"B": 1.0}, ("B", "wait"): {"B": 1.0}}, {("A", "east"): (1,), ("B", "wait"): (0,)})
        with pytest.raises(ModelError):
            determinize(m)

    def test_idempotent_through_degenerate_model(self, pocket):
        assert determinize(degenerate_model(pocket)) == pocket
        once = determinize(slip_model(pocket, 0.2))
        assert determinize(degenerate_model(once)) == once

    def test_slip_model_determinizes_to_graph(self, pocket):
        m = slip_model(pocket, 0.1)
        assert determinize(m) == pocket
        for table in m.tables.values():
            assert abs(sum(table.values()) - 1) < 1e-12


class TestWorldGraph:
    def test_successors_wait_first(self, line3):
        assert line3.successors("B") == (("B", (1, 0)), ("A", (1, 0)), ("C", (1, 0)))

    def test_path_cost(self, line3):
        assert line3.path_cost(["A", "A", "B", "C"]) == (3, 0)
        assert line3.path_cost(["A"]) == (0, 0)

    def test_unit_cost(self, pocket):
        u = pocket.unit_cost()
        assert u.path_cost(["A", "B", "P"]) == (2,)
        assert u.cost("P", "P") == (1,)


class TestValidate:
    def test_well_formed_returned_unchanged(self, pocket):
        orders = [LexOrdering((0, 1)), LexOrdering((1, 0)), LexOrdering((0, 1))]
        lm = landmark("L0", ["P"], (1, [{"c1"}, {"c2", "c3"}]))
        s = scenario(pocket, [("r0", "A", "C")], orderings=orders, landmarks=[lm])
        assert validate_scenario(s) is s

    def test_duplicate_starts(self, pocket):
        s = scenario(pocket, [("r0", "A", "C"), ("r1", "A", "P")])
        with pytest.raises(ScenarioError) as err:
            validate_scenario(s)
        assert "robots[1].start collides with robots[0].start" in str(err.value)

    def test_partition_missing_context(self, pocket):
        orders = [LexOrdering((0, 1))] * 3
        lm = landmark("L7", ["P"], (1, [{"c1"}, {"c2"}]))
        s = scenario(pocket, [("r0", "A", "C")], orderings=orders, landmarks=[lm])
        with pytest.raises(ScenarioError) as err:
            validate_scenario(s)
        msg = str(err.value)
        assert "L7" in msg and "tiers[0]" in msg and "c3" in msg

    def test_all_violations_reported(self, pocket):
        s = scenario(pocket, [("r0", "A", "Z"), ("r1", "A", "C")], true="c9")
        with pytest.raises(ScenarioError) as err:
            validate_scenario(s)
        assert len(err.value.violations) >= 3

    def test_negative_cost_rejected(self):
        g = undirected([("A", "B", (-1,))])
        with pytest.raises(ScenarioError):
            validate_scenario(scenario(g, [("r0", "A", "B")]))

    def test_stochastic_must_match_graph(self, pocket, line3):
        s = scenario(pocket, [("r0", "A", "C")], stochastic=degenerate_model(line3))
        with pytest.raises(ScenarioError, match="determinized"):
            validate_scenario(s)


def test_robot_is_plain_record():
    r = Robot("r0", 1, 2)
    assert (r.id, r.start, r.goal) == ("r0", 1, 2)
