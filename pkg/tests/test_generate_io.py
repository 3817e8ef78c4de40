import json
from pathlib import Path

import pytest

from ctxplan.belief import Belief, expected_entropy_reduction
from ctxplan.generate import GenParams, flavor_orderings, generate, generate_retry, m_violation_instance
from ctxplan.errors import GenerationError
from ctxplan.scenario_io import (
    ScenarioFormatError,
    dumps_scenario,
    load_scenario,
    loads_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

GOLDEN = Path(__file__).resolve().parent.parent / "scenarios" / "salp_small.json"


class TestGenerate:
    def test_salp_orderings(self):
        s = generate(GenParams("salp", 8, 8, robots=3, landmarks=2, seed=1))
        got = [c.ordering.names(s.objectives) for c in s.contexts]
        assert got == [["energy", "coral", "time"], ["coral", "energy", "time"], ["time", "energy", "coral"]]

    def test_extra_contexts_use_other_permutations(self):
        orders = flavor_orderings("warehouse", 6)
        assert len(set(orders)) == 6

    def test_same_seed_same_scenario(self):
        p = GenParams("warehouse", 10, 10, robots=4, landmarks=3, seed=5, slip=0.1)
        assert generate(p) == generate(p)
        assert dumps_scenario(generate(p)) == dumps_scenario(generate(p))

    @pytest.mark.parametrize("flavor", ["salp", "warehouse", "firefight"])
    @pytest.mark.parametrize("seed", range(4))
    def test_no_redundancy_means_all_informative(self, flavor, seed):
        s = generate_retry(GenParams(flavor, 10, 10, robots=5, landmarks=3, contexts=4, seed=seed))
        b = Belief.uniform([c.id for c in s.contexts])
        assert s.meta["redundant"] == []
        for lm in s.landmarks:
            assert expected_entropy_reduction(b, lm, lm.max_required) > 0

    def test_redundant_landmarks_never_split(self):
        s = generate_retry(GenParams("firefight", 10, 10, landmarks=4, redundant_fraction=0.5, seed=2))
        assert len(s.meta["redundant"]) == 2
        for lm in s.landmarks:
            if lm.id in s.meta["redundant"]:
                assert all(len(t.partition) == 1 for t in lm.tiers)

    def test_informative_landmarks_separate_contexts(self):
        s = generate_retry(GenParams("salp", 10, 10, landmarks=3, contexts=5, seed=9))
        for a in s.contexts:
            for b in s.contexts:
                if a.id < b.id:
                    assert any(
                        t.cell_of(a.id) != t.cell_of(b.id) for lm in s.landmarks for t in lm.tiers
                    )

    def test_zone_cells_charge_the_zone_objective(self):
        s = generate(GenParams("salp", 10, 10, seed=3, obstacle_density=0.0))
        coral = s.objectives.names.index("coral")
        zone = set(s.meta["zones"]["coral"])
        assert zone
        for u, nbrs in s.graph.edges.items():
            for v, c in nbrs.items():
                assert all(x > 0 for x in c)
                assert (c[coral] > 1) == (v in zone)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            GenParams(redundant_fraction=1.5)
        with pytest.raises(ValueError):
            GenParams(flavor="forest")
        with pytest.raises(ValueError):
            GenParams(robots=0)

    def test_overfull_grid(self):
        with pytest.raises(GenerationError):
            generate(GenParams("salp", 2, 2, robots=3, landmarks=1))


class TestScenarioIO:
    def test_golden_file(self):
        s = load_scenario(GOLDEN)
        assert len(s.robots) == 5 and len(s.contexts) == 3
        assert s.id == "salp_small"
        assert s.stochastic is not None

    def test_round_trip(self, tmp_path):
        s = m_violation_instance()
        path = tmp_path / "m.json"
        save_scenario(s, path)
        assert load_scenario(path) == s
        g = generate(GenParams("firefight", 8, 8, robots=3, landmarks=2, seed=4, slip=0.2))
        assert loads_scenario(dumps_scenario(g)) == g

    def test_version_mismatch(self):
        d = scenario_to_dict(m_violation_instance())
        d["format"] = 2
        with pytest.raises(ScenarioFormatError, match="format"):
            scenario_from_dict(d)

    def test_truncated_file_reports_byte_offset(self):
        text = GOLDEN.read_text()
        cut = text[: len(text) // 2]
        with pytest.raises(ScenarioFormatError) as err:
            loads_scenario(cut)
        assert "byte offset" in str(err.value)
        offset = int(str(err.value).split("byte offset ")[1].split()[0])
        assert 0 < offset <= len(cut.encode())

    def test_unknown_key(self):
        d = scenario_to_dict(m_violation_instance())
        d["robots"][0]["speed"] = 2
        with pytest.raises(ScenarioFormatError, match="speed"):
            scenario_from_dict(d)

    def test_missing_key(self):
        d = scenario_to_dict(m_violation_instance())
        del d["graph"]
        with pytest.raises(ScenarioFormatError, match="graph"):
            scenario_from_dict(d)

    def test_output_is_plain_json(self):
        d = json.loads(dumps_scenario(m_violation_instance()))
        assert d["format"] == 1 and d["true_context"] == "c1"
