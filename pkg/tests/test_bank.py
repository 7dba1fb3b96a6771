import json

import pytest
from hypothesis import given, strategies as st

from evodialog import (AgentType, FeedbackSignal, FitnessParams,
                       SnapshotParseError, Strategy, StrategyBank,
                       StrategyMetadata, StrategyNotFoundError,
                       compute_fitness, generation_norms)
from evodialog.errors import LifecycleError

from conftest import make_strategy
from oracles import oracle_fitness


class TestFitness:
    def test_zero_history_is_zero(self):
        assert compute_fitness(StrategyMetadata(), 0.0, FitnessParams()) == 0.0

    def test_reference_values(self):
        p = FitnessParams()
        assert compute_fitness(StrategyMetadata(3, 1, 4), 0.5, p) == pytest.approx(
            2 / 4.01 + 0.15)
        assert compute_fitness(StrategyMetadata(0, 5, 5), 0.0, p) == pytest.approx(
            -5 / 5.01)

    @given(h_plus=st.integers(0, 100), h_minus=st.integers(0, 100),
           n_used=st.integers(0, 200), gen_norm=st.floats(0, 1))
    def test_matches_oracle(self, h_plus, h_minus, n_used, gen_norm):
        meta = StrategyMetadata(h_plus, h_minus, n_used)
        got = compute_fitness(meta, gen_norm, FitnessParams())
        assert got == pytest.approx(oracle_fitness(h_plus, h_minus, n_used, gen_norm))

    @given(h_plus=st.integers(0, 50), n_used=st.integers(0, 50))
    def test_positive_feedback_never_hurts(self, h_plus, n_used):
        p = FitnessParams()
        base = compute_fitness(StrategyMetadata(h_plus, 0, n_used), 0.0, p)
        better = compute_fitness(StrategyMetadata(h_plus + 1, 0, n_used), 0.0, p)
        assert better > base

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            FitnessParams(epsilon=0.0)
        with pytest.raises(ValueError):
            FitnessParams(alpha=-0.1)


class TestGenerationNorms:
    def test_empty(self):
        assert generation_norms([]) == {}

    def test_singleton_and_equal_map_to_zero(self, bank):
        a = make_strategy(bank, generation=5)
        assert generation_norms([a]) == {a.id: 0.0}
        b = make_strategy(bank, generation=5)
        assert generation_norms([a, b]) == {a.id: 0.0, b.id: 0.0}

    def test_min_max(self, bank):
        a = make_strategy(bank, generation=1)
        b = make_strategy(bank, generation=3)
        c = make_strategy(bank, generation=5)
        norms = generation_norms([a, b, c])
        assert norms == {a.id: 0.0, b.id: 0.5, c.id: 1.0}


class TestBankLifecycle:
    def test_ids_are_sequential(self, bank):
        assert bank.next_id() == "s000001"
        assert bank.next_id() == "s000002"

    def test_add_get_retire(self, bank):
        s = make_strategy(bank)
        assert bank.get(s.id) is s
        assert s in bank.alive()
        bank.retire(s.id)
        assert bank.get(s.id).alive is False
        assert s not in bank.alive()

    def test_duplicate_id_rejected(self, bank):
        s = make_strategy(bank)
        with pytest.raises(ValueError):
            bank.add(Strategy(id=s.id, agent_type=AgentType.DST,
                              domains=frozenset({"hotel"}), content="x"))

    def test_unknown_id(self, bank):
        with pytest.raises(StrategyNotFoundError):
            bank.get("s999999")

    def test_strategy_validation(self):
        with pytest.raises(ValueError):
            Strategy(id="a", agent_type=AgentType.DST, domains=frozenset(), content="x")
        with pytest.raises(ValueError):
            Strategy(id="a", agent_type=AgentType.DST,
                     domains=frozenset({"hotel"}), content="")

    def test_feedback_accounting(self, bank):
        s = make_strategy(bank)
        bank.record_feedback(s.id, FeedbackSignal.USED)
        bank.record_feedback(s.id, FeedbackSignal.POSITIVE)
        bank.record_feedback(s.id, FeedbackSignal.NEGATIVE)
        assert (s.metadata.usage_count, s.metadata.positive_feedback,
                s.metadata.negative_feedback) == (1, 1, 1)

    def test_feedback_on_dead_strategy_rejected(self, bank):
        s = make_strategy(bank)
        bank.retire(s.id)
        with pytest.raises(LifecycleError):
            bank.record_feedback(s.id, FeedbackSignal.USED)


class TestLookup:
    def test_candidates_exact_set_match(self, bank):
        single = make_strategy(bank, domains=("hotel",))
        combo = make_strategy(bank, domains=("hotel", "restaurant"))
        assert bank.candidates_for({"hotel"}, AgentType.DST) == [single]
        assert bank.candidates_for({"restaurant", "hotel"}, AgentType.DST) == [combo]
        assert bank.candidates_for({"restaurant"}, AgentType.DST) == []

    def test_candidates_filter_agent_type_and_alive(self, bank):
        dst = make_strategy(bank, agent_type=AgentType.DST)
        make_strategy(bank, agent_type=AgentType.DP)
        dead = make_strategy(bank, agent_type=AgentType.DST)
        bank.retire(dead.id)
        assert bank.candidates_for({"hotel"}, AgentType.DST) == [dst]

    def test_populations_grouping(self, bank):
        make_strategy(bank, agent_type=AgentType.DST, domains=("hotel",))
        make_strategy(bank, agent_type=AgentType.DST, domains=("hotel",))
        make_strategy(bank, agent_type=AgentType.DP, domains=("hotel",))
        pops = bank.populations()
        assert len(pops[(AgentType.DST, frozenset({"hotel"}))]) == 2
        assert len(pops[(AgentType.DP, frozenset({"hotel"}))]) == 1


class TestBankFitness:
    def test_norms_span_agent_type_not_domain(self, bank):
        old = make_strategy(bank, generation=1, domains=("hotel",))
        new = make_strategy(bank, generation=3, domains=("restaurant",))
        table = bank.fitness_table(AgentType.DST)
        assert table[old.id] == pytest.approx(0.0)
        assert table[new.id] == pytest.approx(0.3)

    def test_fitness_of_matches_table(self, bank):
        a = make_strategy(bank, h_plus=3, h_minus=1, n_used=4, generation=1)
        b = make_strategy(bank, generation=2)
        table = bank.fitness_table(AgentType.DST)
        assert bank.fitness_of(a) == pytest.approx(table[a.id])
        assert bank.fitness_of(b) == pytest.approx(table[b.id])


class TestSnapshots:
    def test_roundtrip(self, bank, tmp_path):
        s = make_strategy(bank, h_plus=2, h_minus=1, n_used=3, generation=4)
        dead = make_strategy(bank)
        bank.retire(dead.id)
        path = tmp_path / "bank.json"
        bank.save(path)
        loaded = StrategyBank.load(path)
        copy = loaded.get(s.id)
        assert copy.content == s.content
        assert copy.metadata == s.metadata
        assert loaded.get(dead.id).alive is False
        # id counter resumes past the highest serial
        assert loaded.next_id() == "s000003"

    def test_records_schema_fields(self, bank):
        make_strategy(bank)
        (rec,) = bank.to_records()
        assert set(rec) == {"id", "agent_type", "domains", "content", "reason",
                            "h_plus", "h_minus", "n_used", "generation", "alive"}

    def test_missing_field_names_offending_record(self, tmp_path):
        rec = {"id": "s000001", "agent_type": "DST", "domains": ["hotel"],
               "content": "x", "reason": "", "h_plus": 0, "h_minus": 0,
               "n_used": 0, "generation": 1}  # "alive" missing
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([rec]))
        with pytest.raises(SnapshotParseError) as exc:
            StrategyBank.load(path)
        assert "s000001" in str(exc.value)
        assert "alive" in str(exc.value)

    def test_malformed_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SnapshotParseError):
            StrategyBank.load(path)
        path.write_text('{"a": 1}')
        with pytest.raises(SnapshotParseError):
            StrategyBank.load(path)
