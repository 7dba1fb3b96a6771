import random

import pytest

from evodialog import (AgentType, Database, EngineConfig, FitnessParams,
                       Strategy, StrategyBank, StrategyMetadata, synth_corpus)


def make_strategy(bank: StrategyBank, agent_type=AgentType.DST,
                  domains=("hotel",), content="track all slots",
                  h_plus=0, h_minus=0, n_used=0, generation=1) -> Strategy:
    s = Strategy(
        id=bank.next_id(),
        agent_type=agent_type,
        domains=frozenset(domains),
        content=content,
        rationale="because",
        metadata=StrategyMetadata(
            positive_feedback=h_plus, negative_feedback=h_minus,
            usage_count=n_used, generation_index=generation),
    )
    bank.add(s)
    return s


@pytest.fixture
def bank() -> StrategyBank:
    return StrategyBank(FitnessParams())


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0)


@pytest.fixture
def small_world() -> tuple:
    """(corpus, db) with 6 deterministic single/multi-domain dialogs."""
    return synth_corpus(seed=7, n_dialogs=6)


@pytest.fixture
def db(small_world) -> Database:
    return small_world[1]


@pytest.fixture
def config() -> EngineConfig:
    return EngineConfig()
