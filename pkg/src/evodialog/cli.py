"""Command-line entry points: scaffold a run, train, evaluate, inspect,
serve the HTTP API, and chat interactively."""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .bank import FitnessParams, StrategyBank
from .config import EngineConfig, TriggerPolicy
from .corpus import Database, UserGoal, load_corpus, synth_corpus
from .embeddings import HashEmbedder
from .engine import Engine, run_experiment
from .errors import EngineError
from .memory import TrajectorySource
from .metrics import bank_stats
from .selection import PolicyKind, SelectionPolicy

_POLICY_CHOICES = [k.value for k in PolicyKind]
_TRIGGER_CHOICES = ["per_episode", "per_n_dialogs", "per_turn"]


def _load_config(config_path: str | None) -> EngineConfig:
    if config_path:
        return EngineConfig.load(config_path)
    return EngineConfig()


def _apply_overrides(config: EngineConfig, seed: int | None, policy: str | None,
                     tau: float | None, trigger: str | None, zero_shot: bool,
                     phase_every: float | None, bank: str | None,
                     ssm: str | None) -> EngineConfig:
    if seed is not None:
        config.rng_seed = seed
    if policy is not None or tau is not None:
        config.selection = SelectionPolicy(
            kind=PolicyKind(policy) if policy else config.selection.kind,
            temperature=tau if tau is not None else config.selection.temperature,
            epsilon=config.selection.epsilon,
        )
    if trigger is not None:
        kind, _, n = trigger.partition(":")
        config.trigger = TriggerPolicy(kind=kind, n=int(n) if n else 1)
    if zero_shot:
        config.zero_shot = True
    if phase_every is not None:
        config.phase_every = phase_every
    if bank is not None:
        config.bank_path = bank
    if ssm is not None:
        config.ssm_path = ssm
    return config


def _common_options(fn):
    for option in reversed([
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="Engine config JSON."),
        click.option("--seed", type=int, default=None, help="Override the RNG seed."),
        click.option("--policy", type=click.Choice(_POLICY_CHOICES), default=None,
                     help="Strategy selection policy."),
        click.option("--tau", type=float, default=None,
                     help="Boltzmann selection temperature."),
        click.option("--trigger", type=str, default=None,
                     help="Evolution trigger: per_episode, per_n_dialogs:N, or per_turn."),
        click.option("--zero-shot", is_flag=True, default=False,
                     help="Disable the strategy bank; use static prompts."),
        click.option("--phase-every", type=float, default=None,
                     help="Evaluation checkpoint spacing as a train fraction."),
        click.option("--bank", type=click.Path(), default=None,
                     help="Strategy bank snapshot to start from."),
        click.option("--ssm", type=click.Path(), default=None,
                     help="Trajectory store (JSON Lines) path."),
    ]):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """Self-evolving task-oriented dialog engine."""


@main.command()
@click.argument("out_dir", type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--train-dialogs", type=int, default=40, show_default=True)
@click.option("--test-dialogs", type=int, default=10, show_default=True)
def init(out_dir: str, seed: int, train_dialogs: int, test_dialogs: int) -> None:
    """Scaffold a run directory with a synthetic corpus, database, and config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, db = synth_corpus(seed, train_dialogs, split="train")
    test, _ = synth_corpus(seed + 1, test_dialogs, split="test", db=db)
    train.save(out / "corpus_train.json")
    test.save(out / "corpus_test.json")
    db.save(out / "db.json")
    config = EngineConfig(rng_seed=seed,
                          corpus_path=str(out / "corpus_train.json"),
                          db_path=str(out / "db.json"))
    config.save(out / "config.json")
    click.echo(f"initialized {out}: {train_dialogs} train dialogs, "
               f"{test_dialogs} test dialogs, config.json, db.json")


@main.command()
@_common_options
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None,
              help="Training corpus JSON (defaults to the config's corpus_path).")
@click.option("--test-corpus", type=click.Path(exists=True), default=None,
              help="Held-out corpus for phased evaluation (defaults to training corpus).")
@click.option("--db", "db_path", type=click.Path(exists=True), default=None,
              help="Entity database JSON (defaults to the config's db_path).")
@click.option("--out", "run_dir", type=click.Path(), required=True,
              help="Run directory for snapshots, logs, and metrics.")
def run(config_path, seed, policy, tau, trigger, zero_shot, phase_every, bank, ssm,
        corpus_path, test_corpus, db_path, run_dir) -> None:
    """Train over a corpus with phased evaluation; writes metrics.csv."""
    config = _apply_overrides(_load_config(config_path), seed, policy, tau,
                              trigger, zero_shot, phase_every, bank, ssm)
    corpus_path = corpus_path or config.corpus_path
    db_path = db_path or config.db_path
    if not corpus_path or not db_path:
        raise click.UsageError("--corpus and --db are required (or set in the config)")
    train = load_corpus(corpus_path)
    test = load_corpus(test_corpus) if test_corpus else train
    db = Database.load(db_path)
    try:
        rows = run_experiment(config, run_dir, train, test, db)
    except EngineError as exc:
        raise click.ClickException(str(exc)) from exc
    for row in rows:
        click.echo(json.dumps(row))
    click.echo(f"run complete: {len(rows)} evaluation phases -> {run_dir}/metrics.csv")


@main.command("eval")
@_common_options
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--db", "db_path", type=click.Path(exists=True), required=True)
def eval_cmd(config_path, seed, policy, tau, trigger, zero_shot, phase_every, bank, ssm,
             corpus_path, db_path) -> None:
    """Evaluate a bank snapshot on a corpus without updating anything."""
    config = _apply_overrides(_load_config(config_path), seed, policy, tau,
                              trigger, zero_shot, phase_every, bank, ssm)
    db = Database.load(db_path)
    engine = Engine.create(config, db, store_path=config.ssm_path)
    try:
        report = engine.evaluate(load_corpus(corpus_path))
    except EngineError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps({
        "inform": round(report.inform, 4),
        "success": round(report.success, 4),
        "bleu": round(report.bleu, 4),
        "combine": round(report.combine, 4),
    }, indent=2))


@main.command()
@click.option("--bank", "bank_path", type=click.Path(exists=True), required=True,
              help="Strategy bank snapshot JSON.")
@click.option("--embeddings", is_flag=True, default=False,
              help="Include strategy embedding vectors in the output.")
def analyze(bank_path: str, embeddings: bool) -> None:
    """Print diversity and fitness analytics for a bank snapshot."""
    bank = StrategyBank.load(bank_path, FitnessParams())
    try:
        stats = bank_stats(bank, HashEmbedder())
    except EngineError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps(stats.to_dict(include_embeddings=embeddings), indent=2))


@main.command()
@_common_options
@click.option("--db", "db_path", type=click.Path(exists=True), required=True)
@click.option("--host", default=None, help="Bind address (default: EVODIALOG_HOST or 127.0.0.1).")
@click.option("--port", type=int, default=None, help="Port (default: EVODIALOG_PORT or 8000).")
def serve(config_path, seed, policy, tau, trigger, zero_shot, phase_every, bank, ssm,
          db_path, host, port) -> None:
    """Start the HTTP API over one shared engine."""
    import uvicorn

    from .service import create_app

    config = _apply_overrides(_load_config(config_path), seed, policy, tau,
                              trigger, zero_shot, phase_every, bank, ssm)
    engine = Engine.create(config, Database.load(db_path), store_path=config.ssm_path)
    host = host or os.environ.get("EVODIALOG_HOST", "127.0.0.1")
    port = port if port is not None else int(os.environ.get("EVODIALOG_PORT", "8000"))
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")


@main.command()
@_common_options
@click.option("--db", "db_path", type=click.Path(exists=True), required=True)
@click.option("--goal", "goal_json", type=str, required=True,
              help='User goal JSON, e.g. \'{"constraints": {"hotel": {"area": "north"}}}\'.')
def chat(config_path, seed, policy, tau, trigger, zero_shot, phase_every, bank, ssm,
         db_path, goal_json) -> None:
    """Interactive dialog on stdin; '/end' closes and scores the episode."""
    config = _apply_overrides(_load_config(config_path), seed, policy, tau,
                              trigger, zero_shot, phase_every, bank, ssm)
    db = Database.load(db_path)
    engine = Engine.create(config, db, store_path=config.ssm_path)
    goal = UserGoal.from_dict(json.loads(goal_json))
    utterances = []
    click.echo("enter user turns, one per line; '/end' finishes the dialog", err=True)
    for line in sys.stdin:
        line = line.rstrip("\n")
        utterances.append(line)
        if line.strip() == "/end":
            break
    try:
        traj = engine.run_dialog(goal, utterances, source=TrajectorySource.LIVE_CHAT)
    except EngineError as exc:
        raise click.ClickException(str(exc)) from exc
    for turn in traj.turns:
        click.echo(f"user: {turn.user_utterance}")
        click.echo(f"system: {turn.system_response}")
    click.echo(json.dumps({"outcome": traj.outcome.value,
                           "turns": len(traj.turns),
                           "strategies_used": traj.strategies_used}))


if __name__ == "__main__":
    main()
