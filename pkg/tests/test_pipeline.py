import json
import random

import pytest

from evodialog import (AgentType, Database, EngineConfig, LLMGateway, Outcome,
                       ScriptedMockProvider, TrajectoryStore, UserGoal,
                       parse_action, query_database, run_episode, run_turn,
                       select_strategies, validate_action)
from evodialog.errors import (NoCandidatesError, StructuredOutputError,
                              ValidationError)
from evodialog.pipeline import DialogContext, evaluate_outcome
from evodialog.memory import TurnRecord

from conftest import make_strategy

TINY_DB = Database(
    entities={"hotel": [
        {"name": "the grand", "area": "north", "stars": "4",
         "pricerange": "cheap", "phone": "01223111111", "address": "1 mill street"},
        {"name": "the plaza", "area": "south", "stars": "3",
         "pricerange": "expensive", "phone": "01223222222", "address": "2 king street"},
    ]},
    schema={"hotel": ["name", "area", "stars", "pricerange", "phone", "address"]},
)

GOAL = UserGoal(constraints={"hotel": {"area": "north"}},
                requested={"hotel": ["phone"]})


def scripted_gateway():
    provider = ScriptedMockProvider(strict=True)
    return LLMGateway(provider), provider


def script_standard_turn(provider, belief=None, action="recommend(entity)",
                         response="i recommend the grand .",
                         dst_critique="", dp_critique="", nlg_critique="",
                         sim_critique="", query=True):
    belief = belief if belief is not None else {"hotel": {"area": "north"}}
    provider.register_script("dst", [
        {"critique": dst_critique, "belief_state": belief, "reason": "r"}])
    provider.register_script("dp", [
        {"critique": dp_critique, "system_action": action, "reason": "r",
         "query_db": query, "query": {"domain": "hotel", "state": {"hotel": belief.get("hotel", {})}}}])
    provider.register_script("nlg", [
        {"critique": nlg_critique, "response": response, "reason": "r"}])
    provider.register_script("user_sim", [
        {"critique": sim_critique, "reason": "r"}])


def make_ctx(config=None, strategies=None):
    return DialogContext(
        domains=frozenset({"hotel"}), goal=GOAL, config=config or EngineConfig(),
        strategies=strategies or {"DST": "track", "DP": "decide", "NLG": "say"})


class TestActionGrammar:
    def test_single_act(self):
        (act,) = parse_action("inform(area=north)")
        assert act.name == "inform"
        assert act.args == (("area", "north"),)

    def test_multiple_acts_and_bare_args(self):
        acts = parse_action("recommend(entity),request(stars)")
        assert [a.name for a in acts] == ["recommend", "request"]
        assert acts[1].args == (("stars", ""),)

    def test_empty_args(self):
        (act,) = parse_action("nooffer()")
        assert act.args == ()

    @pytest.mark.parametrize("bad", ["", "fly(away)", "inform", "inform(a=b",
                                     "inform(a=b) request(c)"])
    def test_malformed_rejected(self, bad):
        with pytest.raises(ValidationError):
            parse_action(bad)

    def test_slot_schema_check(self):
        validate_action("inform(area=north)", TINY_DB, frozenset({"hotel"}))
        with pytest.raises(ValidationError):
            validate_action("inform(wifi=yes)", TINY_DB, frozenset({"hotel"}))

    def test_slotless_acts_skip_schema_check(self):
        validate_action("recommend(entity)", TINY_DB, frozenset({"hotel"}))


class TestDatabaseQuery:
    def test_equality_is_case_insensitive(self):
        got = query_database(TINY_DB, {"domain": "hotel",
                                       "constraints": {"area": "NORTH"}})
        assert [e["name"] for e in got] == ["the grand"]

    def test_dontcare_and_absent_match_all(self):
        got = query_database(TINY_DB, {"domain": "hotel",
                                       "constraints": {"area": "dontcare"}})
        assert len(got) == 2
        assert len(query_database(TINY_DB, {"domain": "hotel"})) == 2

    def test_unknown_domain_and_slot_error(self):
        with pytest.raises(ValidationError):
            query_database(TINY_DB, {"domain": "train"})
        with pytest.raises(ValidationError):
            query_database(TINY_DB, {"domain": "hotel", "constraints": {"wifi": "yes"}})


class TestRunTurn:
    def test_agent_order_and_record(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        ctx = make_ctx()
        record = run_turn(ctx, "i am looking for a hotel with area north",
                          gateway, TINY_DB)
        order = [tid for tid, _ in provider.call_log]
        assert order == ["dst", "dp", "nlg", "user_sim"]
        assert record.belief_state == {"hotel": {"area": "north"}}
        assert record.system_action == "recommend(entity)"
        assert record.db_result_count == 1
        assert ctx.previous_belief == {"hotel": {"area": "north"}}
        assert len(ctx.history) == 1

    def test_critique_authorship_wiring(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, dp_critique="belief missed a slot",
                             sim_critique="unhelpful")
        record = run_turn(make_ctx(), "hi", gateway, TINY_DB)
        pairs = {(c.author_agent, c.target_agent): c.text for c in record.critiques}
        assert pairs[("DP", "DST")] == "belief missed a slot"
        assert pairs[("UserSim", "NLG")] == "unhelpful"
        assert pairs[("DST", "UserSim")] == ""
        assert pairs[("NLG", "DP")] == ""

    def test_peer_critique_off_suppresses_entries(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, dp_critique="noisy")
        cfg = EngineConfig(with_peer_critique=False)
        record = run_turn(make_ctx(config=cfg), "hi", gateway, TINY_DB)
        assert record.critiques == []

    def test_belief_clipped_to_dialog_domains(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, belief={"hotel": {"area": "north"},
                                               "train": {"day": "monday"}})
        record = run_turn(make_ctx(), "hi", gateway, TINY_DB)
        assert set(record.belief_state) == {"hotel"}

    def test_invalid_action_aborts_turn(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, action="teleport(user)")
        with pytest.raises(StructuredOutputError):
            run_turn(make_ctx(), "hi", gateway, TINY_DB)

    def test_strategy_text_includes_rationale_only_with_reasoning(self, bank):
        s = make_strategy(bank, content="the content")
        s.rationale = "the rationale"
        ctx = make_ctx(strategies={"DST": s})
        assert "the rationale" in ctx.strategy_text("DST")
        ctx_off = make_ctx(config=EngineConfig(with_reasoning=False),
                           strategies={"DST": s})
        assert "the rationale" not in ctx_off.strategy_text("DST")
        assert "the content" in ctx_off.strategy_text("DST")


class TestEndToEndMode:
    def test_two_stage_calls(self):
        gateway, provider = scripted_gateway()
        provider.register_script("e2e_stage1", [
            {"critique": "", "belief_state": {"hotel": {"area": "north"}},
             "system_action": "recommend(entity)", "reason": "r",
             "query_db": True,
             "query": {"domain": "hotel", "state": {"hotel": {"area": "north"}}}}])
        provider.register_script("e2e_stage2", [
            {"response": "i recommend the grand .", "reason": "r"}])
        cfg = EngineConfig(e2e_agent=True)
        record = run_turn(make_ctx(config=cfg), "hi", gateway, TINY_DB)
        assert [tid for tid, _ in provider.call_log] == ["e2e_stage1", "e2e_stage2"]
        assert record.system_response == "i recommend the grand ."
        assert record.db_result_count == 1


class TestArbitration:
    def test_accepted_critique_replaces_belief(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, dp_critique="area is wrong")
        provider.register_script("arbiter", [
            {"critique_accepted": True,
             "final_output": json.dumps({"hotel": {"area": "south"}}),
             "reason": "r"}])
        cfg = EngineConfig(arbitration=True)
        record = run_turn(make_ctx(config=cfg), "hi", gateway, TINY_DB)
        assert record.belief_state == {"hotel": {"area": "south"}}

    def test_rejected_critique_keeps_original(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, dp_critique="area is wrong")
        provider.register_script("arbiter", [
            {"critique_accepted": False, "final_output": "ignored", "reason": "r"}])
        cfg = EngineConfig(arbitration=True)
        record = run_turn(make_ctx(config=cfg), "hi", gateway, TINY_DB)
        assert record.belief_state == {"hotel": {"area": "north"}}

    def test_no_arbiter_call_without_critique(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        cfg = EngineConfig(arbitration=True)
        run_turn(make_ctx(config=cfg), "hi", gateway, TINY_DB)
        assert all(tid != "arbiter" for tid, _ in provider.call_log)

    def test_arbitration_off_never_calls_arbiter(self):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, dp_critique="wrong")
        run_turn(make_ctx(), "hi", gateway, TINY_DB)
        assert all(tid != "arbiter" for tid, _ in provider.call_log)


def _turn(action, response, belief=None):
    return TurnRecord(user_utterance="u", belief_state=belief or {},
                      system_action=action, system_response=response)


class TestOutcomeEvaluation:
    def test_success_requires_entity_and_requested_slots(self):
        turns = [_turn("recommend(entity)", "i recommend the grand ."),
                 _turn("inform(phone=01223111111)", "the phone is 01223111111 .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (True, True)

    def test_inform_without_requested_slots(self):
        turns = [_turn("recommend(entity)", "i recommend the grand .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (True, False)

    def test_wrong_entity_fails_inform(self):
        turns = [_turn("recommend(entity)", "i recommend the plaza .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (False, False)

    def test_last_mentioned_entity_wins(self):
        turns = [_turn("recommend(entity)", "i recommend the plaza ."),
                 _turn("recommend(entity)", "i recommend the grand ."),
                 _turn("inform(phone=01223111111)", "the phone is 01223111111 .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (True, True)

    def test_placeholder_counts_for_requested_slot(self):
        turns = [_turn("recommend(entity)", "i recommend the grand ."),
                 _turn("inform(phone=x)", "the phone is [hotel_phone] .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (True, True)

    def test_no_mention_fails(self):
        turns = [_turn("nooffer()", "sorry , nothing found .")]
        assert evaluate_outcome(turns, GOAL, TINY_DB) == (False, False)


class TestSelectStrategies:
    def test_one_per_agent_type(self, bank, config, rng):
        for at in AgentType:
            make_strategy(bank, agent_type=at, content=f"{at.value} strategy")
        chosen = select_strategies(bank, frozenset({"hotel"}), config, rng)
        assert set(chosen) == {"DST", "DP", "NLG"}
        for at in AgentType:
            assert chosen[at.value].agent_type is at

    def test_uncovered_population_raises(self, bank, config, rng):
        make_strategy(bank, agent_type=AgentType.DST)
        with pytest.raises(NoCandidatesError):
            select_strategies(bank, frozenset({"hotel"}), config, rng)


class TestRunEpisode:
    def _covered_bank(self, bank):
        for at in AgentType:
            make_strategy(bank, agent_type=at, content=f"{at.value} strategy")
        return bank

    def test_full_episode_records_and_feedback(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        belief = {"hotel": {"area": "north"}}
        provider.register_script("dst", [
            {"critique": "", "belief_state": belief, "reason": "r"}] * 2)
        provider.register_script("dp", [
            {"critique": "", "system_action": "recommend(entity)", "reason": "r",
             "query_db": True, "query": {"domain": "hotel", "state": belief}},
            {"critique": "", "system_action": "inform(phone=01223111111)", "reason": "r",
             "query_db": True, "query": {"domain": "hotel", "state": belief}}])
        provider.register_script("nlg", [
            {"critique": "", "response": "i recommend the grand .", "reason": "r"},
            {"critique": "", "response": "the phone is 01223111111 .", "reason": "r"}])
        provider.register_script("user_sim", [{"critique": "", "reason": "r"}] * 2)
        store = TrajectoryStore()
        traj = run_episode(GOAL, ["looking for a hotel", "what is the phone ?"],
                           bank, EngineConfig(), gateway, TINY_DB, rng, store=store)
        assert traj.outcome is Outcome.SUCCESS
        assert len(store) == 1
        for sid in traj.strategies_used.values():
            s = bank.get(sid)
            assert s.metadata.usage_count == 1
            assert s.metadata.positive_feedback == 1
            assert s.metadata.negative_feedback == 0

    def test_failure_gives_negative_feedback(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider, action="nooffer()",
                             response="sorry , nothing found .", query=False)
        traj = run_episode(GOAL, ["hello"], bank, EngineConfig(), gateway,
                           TINY_DB, rng)
        assert traj.outcome is Outcome.FAILURE
        for sid in traj.strategies_used.values():
            assert bank.get(sid).metadata.negative_feedback == 1

    def test_success_with_critique_marks_target_negative(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider,
                             response="i recommend the grand . the phone is 01223111111 .",
                             sim_critique="too verbose")
        traj = run_episode(GOAL, ["hello"], bank, EngineConfig(), gateway,
                           TINY_DB, rng)
        assert traj.outcome is Outcome.SUCCESS
        nlg = bank.get(traj.strategies_used["NLG"])
        dst = bank.get(traj.strategies_used["DST"])
        assert nlg.metadata.negative_feedback == 1 and nlg.metadata.positive_feedback == 0
        assert dst.metadata.positive_feedback == 1

    def test_end_token_stops_dialog(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        traj = run_episode(GOAL, ["hello", "/end", "never sent"], bank,
                           EngineConfig(), gateway, TINY_DB, rng)
        assert len(traj.turns) == 1

    def test_t_max_caps_turns(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        cfg = EngineConfig(t_max=2)
        traj = run_episode(GOAL, ["a", "b", "c", "d"], bank, cfg, gateway,
                           TINY_DB, rng)
        assert len(traj.turns) == 2

    def test_structured_failure_aborts_as_failure(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        provider.register_script("dst", ["never valid json"])
        traj = run_episode(GOAL, ["hello"], bank, EngineConfig(), gateway,
                           TINY_DB, rng)
        assert traj.outcome is Outcome.FAILURE

    def test_zero_shot_uses_static_strategies(self, rng):
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        cfg = EngineConfig(zero_shot=True)
        traj = run_episode(GOAL, ["hello"], None, cfg, gateway, TINY_DB, rng)
        assert traj.strategies_used == {"DST": "static_DST", "DP": "static_DP",
                                        "NLG": "static_NLG"}

    def test_eval_mode_leaves_bank_and_store_untouched(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        store = TrajectoryStore()
        run_episode(GOAL, ["hello"], bank, EngineConfig(), gateway, TINY_DB,
                    rng, store=store, eval_mode=True)
        assert len(store) == 0
        assert all(s.metadata.usage_count == 0 for s in bank.alive())

    def test_on_turn_callback_invoked_per_turn(self, bank, rng):
        self._covered_bank(bank)
        gateway, provider = scripted_gateway()
        script_standard_turn(provider)
        calls = []
        run_episode(GOAL, ["a", "b"], bank, EngineConfig(), gateway, TINY_DB,
                    rng, on_turn=lambda ctx, used: calls.append(len(ctx.history)))
        assert calls == [1, 2]
