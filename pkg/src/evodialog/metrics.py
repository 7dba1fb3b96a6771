"""Dialog metrics (Inform, Success, BLEU, Combine) and bank analytics."""
from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .bank import StrategyBank
from .corpus import Database, UserGoal
from .embeddings import cosine_similarity
from .errors import EngineError
from .memory import Trajectory
from .pipeline import evaluate_outcome

_TOKEN_RE = re.compile(r"[a-z0-9]+|\[[a-z0-9_]+\]")


def tokenize(text: str) -> list[str]:
    """Lower-case, split on whitespace and punctuation; keeps [placeholder] tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class MetricReport:
    inform: float
    success: float
    bleu: float
    per_dialog: list[dict] = field(default_factory=list)

    @property
    def combine(self) -> float:
        return combine(self.inform, self.success, self.bleu)


def combine(inform: float, success: float, bleu: float) -> float:
    return (inform + success) * 0.5 + bleu


def score_dialogs(trajectories: list[Trajectory], goals: list[UserGoal],
                  db: Database) -> MetricReport:
    """Inform% and Success% over aligned trajectory/goal lists."""
    if len(trajectories) != len(goals):
        raise EngineError("trajectories and goals must align")
    per_dialog = []
    informed = succeeded = 0
    for traj, goal in zip(trajectories, goals):
        inform_ok, success_ok = evaluate_outcome(traj.turns, goal, db)
        informed += inform_ok
        succeeded += success_ok
        per_dialog.append({"dialog_id": traj.dialog_id,
                           "inform": inform_ok, "success": success_ok})
    n = len(trajectories)
    report = MetricReport(
        inform=100.0 * informed / n if n else 0.0,
        success=100.0 * succeeded / n if n else 0.0,
        bleu=0.0,
        per_dialog=per_dialog,
    )
    return report


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: list[str], references: list[str], max_order: int = 4) -> float:
    """Corpus-level BLEU-4 on [0, 100]: uniform weights, brevity penalty, and
    add-one smoothing for any order with zero matches or zero n-grams.
    Identical corpora score exactly 100."""
    if len(candidates) != len(references):
        raise EngineError("candidate and reference lists must align")
    if not candidates:
        raise EngineError("empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        c_tokens = tokenize(cand)
        r_tokens = tokenize(ref)
        cand_len += len(c_tokens)
        ref_len += len(r_tokens)
        for n in range(1, max_order + 1):
            c_counts = _ngram_counts(c_tokens, n)
            r_counts = _ngram_counts(r_tokens, n)
            totals[n - 1] += sum(c_counts.values())
            matches[n - 1] += sum(min(count, r_counts[g]) for g, count in c_counts.items())
    log_precision_sum = 0.0
    for n in range(max_order):
        if matches[n] > 0 and totals[n] > 0:
            p = matches[n] / totals[n]
        else:
            p = (matches[n] + 1) / (totals[n] + 1)
        log_precision_sum += math.log(p)
    geo_mean = math.exp(log_precision_sum / max_order)
    if cand_len == 0:
        return 0.0
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * geo_mean


def bank_entropy(bank: StrategyBank) -> float:
    """Shannon entropy (bits) of the pooled unigram distribution over all
    alive strategy contents."""
    alive = bank.alive()
    if not alive:
        raise EngineError("entropy undefined for an empty alive set")
    counts = Counter()
    for s in alive:
        counts.update(tokenize(s.content))
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


@dataclass
class BankAnalytics:
    entropy_bits: float
    mean_pairwise_similarity: float | None
    mean_alive_fitness: float
    avg_generation_per_agent_type: dict[str, float]
    embeddings: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self, include_embeddings: bool = False) -> dict:
        d = {
            "entropy_bits": self.entropy_bits,
            "mean_pairwise_similarity": self.mean_pairwise_similarity,
            "mean_alive_fitness": self.mean_alive_fitness,
            "avg_generation_per_agent_type": self.avg_generation_per_agent_type,
        }
        if include_embeddings:
            d["embeddings"] = self.embeddings
        return d


def bank_stats(bank: StrategyBank, embedder) -> BankAnalytics:
    alive = bank.alive()
    if not alive:
        raise EngineError("analytics undefined for an empty bank")
    per_type: dict[str, list[int]] = {}
    for s in alive:
        per_type.setdefault(s.agent_type.value, []).append(s.metadata.generation_index)
    avg_gen = {t: sum(g) / len(g) for t, g in per_type.items()}
    fitnesses = [bank.fitness_of(s) for s in alive]
    vectors = {s.id: embedder.embed(s.content) for s in alive}
    sims = []
    ids = [s.id for s in alive]
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            sims.append(cosine_similarity(vectors[ids[i]], vectors[ids[j]]))
    return BankAnalytics(
        entropy_bits=bank_entropy(bank),
        mean_pairwise_similarity=sum(sims) / len(sims) if sims else None,
        mean_alive_fitness=sum(fitnesses) / len(fitnesses),
        avg_generation_per_agent_type=avg_gen,
        embeddings={sid: vec.values.tolist() for sid, vec in vectors.items()},
    )


def write_metrics_csv(path: str | Path, rows: list[dict]) -> None:
    """One row per evaluation phase."""
    fields = ["phase", "train_fraction", "inform", "success", "bleu", "combine"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in fields})
