"""Referential-game training: one-step play, pair/population/learner loops.

A game step encodes the round targets with the sender, maps all in-batch
candidates with the receiver, scores them by cosine similarity at the
receiver's temperature, and applies cross-entropy against the target
positions. Gradients are analytic end to end; the discrete channel trains
through the Gumbel-Softmax relaxation or the REINFORCE estimator.

Training is bit-reproducible under a fixed seed: all stochastic draws come
from generators derived via refcomm.seeding.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .agents import ChannelSpec, ReceiverAgent, SenderAgent, agent_hash
from .data import GameBatch, GameRound, build_batch
from .errors import ConfigError, InvariantViolationError, NumericError
from .seeding import rng_for


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gumbel_tau: float = 5.0
    cosine_temperature: float = 0.1
    seed: int = 0
    channel: ChannelSpec | None = None
    reinforce_baseline: str = "batch-mean"  # "none" | "batch-mean" (leave-one-out)
    reinforce_reward: str = "success"  # "success" | "neg-ce"
    eval_batches: int = 4  # per-pair test batches per epoch

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.reinforce_baseline not in ("none", "batch-mean"):
            raise ConfigError(f"unknown baseline {self.reinforce_baseline!r}")
        if self.reinforce_reward not in ("success", "neg-ce"):
            raise ConfigError(f"unknown reward {self.reinforce_reward!r}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
        }


@dataclass
class RunMetrics:
    """Per-epoch records plus run-level summaries.

    wall_time is informational only and deliberately kept out of the
    serialized metrics/summary so reruns with equal seeds produce
    byte-identical files.
    """

    epochs: list = field(default_factory=list)
    epochs_to_peak: int = 0
    peak_test_acc: float = 0.0
    final_test_acc: float = 0.0
    wall_time: float = 0.0
    pair_accuracies: dict | None = None
    effective_epochs: float | None = None
    pair_step_counts: dict = field(default_factory=dict)

    def epoch_dicts(self):
        return [e.to_dict() for e in self.epochs]

    def summary_dict(self) -> dict:
        out = {
            "epochs_run": len(self.epochs),
            "epochs_to_peak": self.epochs_to_peak,
            "peak_test_acc": self.peak_test_acc,
            "final_test_acc": self.final_test_acc,
        }
        if self.pair_accuracies is not None:
            out["pair_accuracies"] = self.pair_accuracies
        if self.effective_epochs is not None:
            out["effective_epochs"] = self.effective_epochs
        if self.pair_step_counts:
            out["pair_step_counts"] = self.pair_step_counts
        return out


@dataclass
class PopulationSpec:
    """Sender/receiver roster; a uniform random pair plays each step."""

    senders: list
    receivers: list
    pairing: str = "uniform"

    def __post_init__(self):
        if not self.senders or not self.receivers:
            raise ConfigError("population needs at least one sender and one receiver")
        if self.pairing != "uniform":
            raise ConfigError(f"unknown pairing {self.pairing!r}")
        channels = [a.channel for a in list(self.senders) + list(self.receivers)]
        first = channels[0]
        if any(c != first for c in channels[1:]):
            raise ConfigError("all population agents must share one channel spec")


@dataclass
class PlayResult:
    loss: float
    accuracy: float
    sender_grads: dict | None = None
    receiver_grads: dict | None = None
    picks: np.ndarray | None = None


def _check_compatible(sender: SenderAgent, receiver: ReceiverAgent, stores: dict):
    for agent in (sender, receiver):
        store = stores.get(agent.architecture_name)
        if store is None:
            raise ConfigError(f"no store for architecture {agent.architecture_name!r}")
        if store.dim != agent.input_dim:
            raise ConfigError(
                f"{agent.role} {agent.architecture_name!r} expects dim "
                f"{agent.input_dim} but store has dim {store.dim}"
            )
    if sender.channel != receiver.channel:
        raise ConfigError("sender and receiver channel specs differ")


def play_batch(
    sender: SenderAgent,
    receiver: ReceiverAgent,
    batch: GameBatch,
    stores: dict,
    mode: str = "train",
    rng: np.random.Generator | None = None,
    gumbel_noise: np.ndarray | None = None,
) -> PlayResult:
    """Play every round of a batch; returns loss, accuracy and gradients.

    In train mode gradients are returned for both agents (the optimizer is
    responsible for skipping frozen ones). Eval mode uses deterministic
    messages and computes no gradients. `gumbel_noise` freezes the discrete
    channel's noise for gradient checking.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be train|eval, got {mode!r}")
    _check_compatible(sender, receiver, stores)
    Xs = stores[sender.architecture_name].vectors_for(batch.candidate_ids)
    Xr = stores[receiver.architecture_name].vectors_for(batch.candidate_ids)
    targets = batch.target_positions
    if len(batch.candidate_ids) == 1:
        warnings.warn("single-candidate batch: accuracy is trivially 1", stacklevel=2)

    Xt = Xs[targets]
    enc = sender.logits(Xt)
    ch = sender.channel
    gcache = None
    if ch.is_discrete:
        if mode == "eval":
            payload = np.zeros_like(enc)
            payload[np.arange(enc.shape[0]), np.argmax(enc, axis=1)] = 1.0
        else:
            payload, gcache = numerics.gumbel_softmax_sample(
                enc, ch.gumbel_tau, rng=rng, hard=ch.straight_through,
                noise=gumbel_noise,
            )
    else:
        payload = enc

    m_emb, dec_cache = receiver.embed_messages(payload)
    mapped, map_cache = receiver.map_candidates(Xr)
    sims, cos_cache = numerics.cosine_matrix(m_emb, mapped)
    logits = sims / receiver.cosine_temperature
    loss, dlogits = numerics.softmax_cross_entropy(logits, targets)
    picks = np.argmax(logits, axis=1)
    accuracy = float(np.mean(picks == targets))

    if mode == "eval":
        return PlayResult(loss=loss, accuracy=accuracy, picks=picks)

    dsims = dlogits / receiver.cosine_temperature
    d_memb, d_mapped = numerics.cosine_matrix_backward(dsims, cos_cache)
    receiver_grads = receiver.map_backward(d_mapped, map_cache)
    dec_grads, d_payload = receiver.embed_messages_backward(d_memb, dec_cache)
    receiver_grads.update(dec_grads)
    d_enc = (
        numerics.gumbel_softmax_backward(d_payload, gcache)
        if ch.is_discrete
        else d_payload
    )
    gW, gb, _ = numerics.linear_backward(d_enc, Xt, sender.params["W"])
    return PlayResult(
        loss=loss,
        accuracy=accuracy,
        sender_grads={"W": gW, "b": gb},
        receiver_grads=receiver_grads,
        picks=picks,
    )


def reinforce_step(
    sender: SenderAgent,
    receiver: ReceiverAgent,
    batch: GameBatch,
    stores: dict,
    config: TrainConfig,
    rng: np.random.Generator,
) -> PlayResult:
    """Score-function training step for the discrete channel.

    The sender samples a symbol from its softmax policy; its gradient is the
    log-likelihood of the sampled symbol weighted by (reward - baseline).
    The receiver (mapper and decoder) trains by ordinary cross-entropy on the
    resulting one-hot message. The batch-mean baseline is leave-one-out, so
    the estimator stays exactly unbiased.
    """
    if not sender.channel.is_discrete:
        raise ConfigError("reinforce_step requires a discrete channel")
    _check_compatible(sender, receiver, stores)
    Xs = stores[sender.architecture_name].vectors_for(batch.candidate_ids)
    Xr = stores[receiver.architecture_name].vectors_for(batch.candidate_ids)
    targets = batch.target_positions

    Xt = Xs[targets]
    enc = sender.logits(Xt)
    probs = numerics.softmax(enc, axis=1)
    n, vocab = probs.shape
    u = rng.random(n)
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    symbols = (u[:, None] > cdf).sum(axis=1)
    payload = np.zeros_like(enc)
    payload[np.arange(n), symbols] = 1.0

    m_emb, dec_cache = receiver.embed_messages(payload)
    mapped, map_cache = receiver.map_candidates(Xr)
    sims, cos_cache = numerics.cosine_matrix(m_emb, mapped)
    logits = sims / receiver.cosine_temperature
    loss, dlogits = numerics.softmax_cross_entropy(logits, targets)
    picks = np.argmax(logits, axis=1)
    accuracy = float(np.mean(picks == targets))

    # receiver path: standard cross-entropy backward (message fixed one-hot)
    dsims = dlogits / receiver.cosine_temperature
    d_memb, d_mapped = numerics.cosine_matrix_backward(dsims, cos_cache)
    receiver_grads = receiver.map_backward(d_mapped, map_cache)
    dec_grads, _ = receiver.embed_messages_backward(d_memb, dec_cache)
    receiver_grads.update(dec_grads)

    if config.reinforce_reward == "success":
        rewards = (picks == targets).astype(np.float64)
    else:
        shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        rewards = shifted[np.arange(n), targets] - logz  # per-round -CE
    if config.reinforce_baseline == "batch-mean" and n > 1:
        baseline = (rewards.sum() - rewards) / (n - 1)
    else:
        baseline = np.zeros_like(rewards)
    advantage = ((rewards - baseline) / n).astype(enc.dtype)
    d_enc = (probs - payload) * advantage[:, None]
    gW, gb, _ = numerics.linear_backward(d_enc, Xt, sender.params["W"])

    return PlayResult(
        loss=loss,
        accuracy=accuracy,
        sender_grads={"W": gW, "b": gb},
        receiver_grads=receiver_grads,
        picks=picks,
    )


# ---------------------------------------------------------------------------
# training loops


def evaluate_pair(
    sender: SenderAgent,
    receiver: ReceiverAgent,
    stores: dict,
    ids,
    batch_size: int,
    rng: np.random.Generator,
    n_batches: int,
) -> float:
    """Mean eval-mode accuracy over freshly sampled batches."""
    accs = []
    for _ in range(n_batches):
        b = build_batch(ids, batch_size, rng)
        accs.append(play_batch(sender, receiver, b, stores, mode="eval").accuracy)
    return float(np.mean(accs))


def _mean_pairwise_accuracy(senders, receivers, stores, ids, config, rng):
    accs = []
    for s in senders:
        for r in receivers:
            accs.append(
                evaluate_pair(s, r, stores, ids, config.batch_size, rng,
                              config.eval_batches)
            )
    return float(np.mean(accs)), accs


def _make_step_fn(channel: ChannelSpec, config: TrainConfig):
    if channel.is_discrete and channel.train_estimator == "reinforce":
        return lambda s, r, b, stores, rng: reinforce_step(s, r, b, stores, config, rng)
    return lambda s, r, b, stores, rng: play_batch(s, r, b, stores, "train", rng)


def _run_training(senders, receivers, stores, splits, config: TrainConfig,
                  loop_tag: str = "train") -> RunMetrics:
    train_ids, test_ids = splits
    if len(train_ids) < config.batch_size:
        raise ConfigError(
            f"train split has {len(train_ids)} ids < batch size {config.batch_size}"
        )
    for s in senders:
        for r in receivers:
            _check_compatible(s, r, stores)
    channel = senders[0].channel
    step_fn = _make_step_fn(channel, config)
    opt = {
        id(a): numerics.AdamState(lr=config.lr, beta1=config.beta1,
                                  beta2=config.beta2, eps=config.eps)
        for a in {id(x): x for x in list(senders) + list(receivers)}.values()
    }
    rng = rng_for(config.seed, loop_tag)
    t0 = time.perf_counter()
    metrics = RunMetrics()
    agents = list(senders) + list(receivers)
    best = -1.0
    best_epoch = 0
    best_params = None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(train_ids)
        losses = []
        accs = []
        n_steps = len(order) // config.batch_size
        for k in range(n_steps):
            cand = order[k * config.batch_size : (k + 1) * config.batch_size]
            si = int(rng.integers(len(senders)))
            ri = int(rng.integers(len(receivers)))
            pos = rng.permutation(config.batch_size)
            batch = GameBatch(
                candidate_ids=cand,
                rounds=[
                    GameRound(int(p), senders[si].architecture_name,
                              receivers[ri].architecture_name)
                    for p in pos
                ],
            )
            res = step_fn(senders[si], receivers[ri], batch, stores, rng)
            pair_key = (
                f"{senders[si].architecture_name}->"
                f"{receivers[ri].architecture_name}"
            )
            metrics.pair_step_counts[pair_key] = (
                metrics.pair_step_counts.get(pair_key, 0) + 1
            )
            if not np.isfinite(res.loss):
                raise NumericError(
                    f"training diverged: loss={res.loss} at epoch {epoch} step {k}"
                )
            losses.append(res.loss)
            accs.append(res.accuracy)
            for agent, grads in (
                (senders[si], res.sender_grads),
                (receivers[ri], res.receiver_grads),
            ):
                if not agent.frozen:
                    numerics.adam_step(agent.params, grads, opt[id(agent)])
        eval_rng = rng_for(config.seed, loop_tag, f"epoch-eval/{epoch}")
        test_acc, _ = _mean_pairwise_accuracy(
            senders, receivers, stores, test_ids, config, eval_rng
        )
        metrics.epochs.append(
            EpochRecord(epoch, float(np.mean(losses)), float(np.mean(accs)), test_acc)
        )
        if test_acc > best:
            best = test_acc
            best_epoch = epoch
            best_params = [
                {k: v.copy() for k, v in a.params.items()} for a in agents
            ]
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    # early stopping restores the peak-accuracy protocol into the agents
    if best_params is not None:
        for agent, saved in zip(agents, best_params):
            for k, v in saved.items():
                np.copyto(agent.params[k], v)
    metrics.epochs_to_peak = best_epoch
    metrics.peak_test_acc = best
    metrics.final_test_acc = metrics.epochs[-1].test_acc if metrics.epochs else 0.0
    metrics.wall_time = time.perf_counter() - t0
    return metrics


def train_pair(sender, receiver, stores, splits, config: TrainConfig) -> RunMetrics:
    """Jointly train a single sender-receiver pair (one-to-one setting)."""
    return _run_training([sender], [receiver], stores, splits, config)


def train_population(pop: PopulationSpec, stores, splits,
                     config: TrainConfig) -> RunMetrics:
    """Train a full population with uniform random pairing each step."""
    metrics = _run_training(pop.senders, pop.receivers, stores, splits, config)
    final_rng = rng_for(config.seed, "train", "final-matrix")
    _, accs = _mean_pairwise_accuracy(
        pop.senders, pop.receivers, stores, splits[1], config, final_rng
    )
    metrics.pair_accuracies = {
        f"{s.architecture_name}->{r.architecture_name}": accs[i * len(pop.receivers) + j]
        for i, s in enumerate(pop.senders)
        for j, r in enumerate(pop.receivers)
    }
    metrics.effective_epochs = len(metrics.epochs) / max(
        len(pop.senders), len(pop.receivers)
    )
    return metrics


def train_learner(learner, community: PopulationSpec, stores, splits,
                  config: TrainConfig) -> RunMetrics:
    """Train one new agent against a frozen, already-trained community.

    Only the learner's parameters may change; community checkpoints are
    hash-verified before and after.
    """
    community_agents = list(community.senders) + list(community.receivers)
    for agent in community_agents:
        if not agent.frozen:
            raise ConfigError(
                f"community agent {agent.architecture_name!r} ({agent.role}) "
                "must be frozen for learner training"
            )
    if learner.frozen:
        raise ConfigError("the learner agent must not be frozen")
    before = {id(a): agent_hash(a) for a in community_agents}
    if learner.role == "sender":
        metrics = _run_training([learner], community.receivers, stores, splits, config)
    else:
        metrics = _run_training(community.senders, [learner], stores, splits, config)
    for agent in community_agents:
        if agent_hash(agent) != before[id(agent)]:
            raise InvariantViolationError(
                f"frozen community agent {agent.architecture_name!r} "
                f"({agent.role}) changed during learner training"
            )
    return metrics


def epochs_to_accuracy(metrics: RunMetrics, threshold: float) -> int | None:
    """First epoch whose test accuracy reaches the threshold, if any."""
    for rec in metrics.epochs:
        if rec.test_acc >= threshold:
            return rec.epoch
    return None


def vocab_sweep(stores, splits, config: TrainConfig, vocab_sizes,
                arch_names=None, ood_stores=None, ood_ids=None,
                population_size: int | None = None,
                straight_through: bool = False) -> list:
    """Train a discrete population per vocabulary size; report accuracies.

    Returns one row per vocab size: {"vocab_size", "accuracy", "ood_accuracy"}.
    Data, seeds and schedule are matched across sweep points.
    """
    arch_names = list(arch_names or stores.keys())
    if population_size:
        arch_names = arch_names[:population_size]
    rows = []
    for vocab in vocab_sizes:
        channel = ChannelSpec(kind="discrete", vocab_size=int(vocab),
                              gumbel_tau=config.gumbel_tau,
                              train_estimator="gumbel",
                              straight_through=straight_through)
        senders = [
            SenderAgent.create(a, stores[a].dim, channel, seed=config.seed)
            for a in arch_names
        ]
        receivers = [
            ReceiverAgent.create(a, stores[a].dim, channel,
                                 cosine_temperature=config.cosine_temperature,
                                 seed=config.seed)
            for a in arch_names
        ]
        pop = PopulationSpec(senders=senders, receivers=receivers)
        metrics = train_population(pop, stores, splits, config)
        row = {
            "vocab_size": int(vocab),
            "accuracy": float(np.mean(list(metrics.pair_accuracies.values()))),
        }
        if ood_stores is not None and ood_ids is not None:
            rng = rng_for(config.seed, "eval", f"sweep-ood/{vocab}")
            acc, _ = _mean_pairwise_accuracy(
                senders, receivers, ood_stores, ood_ids, config, rng
            )
            row["ood_accuracy"] = acc
        rows.append(row)
    return rows
