"""Self-evolving dialog strategy engine.

Online multi-agent task-oriented dialog (state tracking, policy, generation,
user simulation with peer critique) over a bank of natural-language
strategies that an offline evolutionary loop continually rewrites.
"""
from .bank import (AgentType, FeedbackSignal, FitnessParams, Strategy,
                   StrategyBank, StrategyMetadata, compute_fitness,
                   generation_norms)
from .config import EngineConfig, TriggerPolicy
from .corpus import (Corpus, CorpusDialog, CorpusTurn, Database, UserGoal,
                     load_corpus, synth_corpus)
from .embeddings import (EmbeddingVector, HashEmbedder, RemoteEmbedder,
                         cosine_similarity, similar_groups)
from .engine import Engine, run_experiment
from .errors import (ConflictError, DimensionMismatchError, EngineError,
                     LifecycleError, NoCandidatesError, SnapshotParseError,
                     StrategyNotFoundError, StructuredOutputError,
                     TemplateError, TransportError, ValidationError,
                     ZeroNormError)
from .evolution import (EvolutionEngine, EvolutionReport, compose_multidomain,
                        consolidate, ensure_coverage, genesis, mutate, prune)
from .gateway import (LLMGateway, ProviderConfig, ProviderRole, RemoteProvider,
                      ScriptedMockProvider, lenient_unwrap)
from .memory import (CritiqueEntry, Outcome, Trajectory, TrajectorySource,
                     TrajectoryStore, TurnRecord, flagged_strategies,
                     validate_trajectory)
from .metrics import (BankAnalytics, MetricReport, bank_entropy, bank_stats,
                      bleu, combine, score_dialogs, tokenize,
                      write_metrics_csv)
from .pipeline import (DialogContext, evaluate_outcome, parse_action,
                       query_database, run_episode, run_turn,
                       select_strategies, validate_action)
from .selection import (PolicyKind, SelectionPolicy, select, select_index,
                        selection_distribution)
from .synthetic import SyntheticAgentProvider
from .templates import (STATIC_STRATEGIES, TEMPLATES, PromptTemplate,
                        render_prompt, validate_reply)

__version__ = "0.1.0"
