"""Evaluation suites and protocol analyses over trained agents.

Everything here is read-only with respect to agents and stores (probes train
their own parameters, never the agents'), so suites can run in parallel.
Chance baselines are always computed from the batch size in use, never
hard-coded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .agents import ReceiverAgent, SenderAgent
from .data import EmbeddingStore, build_batch, build_single_class_batch, synth_blobs
from .errors import ConfigError, DegenerateInputError, InsufficientDataError
from .game import PopulationSpec, play_batch
from .seeding import rng_for
from .validation import ParamsMixin, check_fitted, check_matrix


# ---------------------------------------------------------------------------
# accuracy suites


@dataclass
class AccuracyStat:
    mean: float
    sd: float
    batches: int
    batch_size: int

    @property
    def chance(self) -> float:
        return 1.0 / self.batch_size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "batches": self.batches,
            "batch_size": self.batch_size,
            "chance": self.chance,
        }


def eval_accuracy(sender, receiver, stores, ids, batch_size: int = 64,
                  rng: np.random.Generator | None = None,
                  repeats: int = 10) -> AccuracyStat:
    """Mean accuracy (and sd) over repeated random eval batches."""
    rng = rng or np.random.default_rng()
    accs = []
    for _ in range(repeats):
        batch = build_batch(ids, batch_size, rng)
        accs.append(play_batch(sender, receiver, batch, stores, mode="eval").accuracy)
    return AccuracyStat(
        mean=float(np.mean(accs)), sd=float(np.std(accs)),
        batches=repeats, batch_size=batch_size,
    )


@dataclass
class AccuracyMatrix:
    """Pairwise accuracy for every sender x receiver combination."""

    sender_names: list
    receiver_names: list
    values: np.ndarray  # shape (senders, receivers)

    def min_entry(self) -> float:
        return float(self.values.min())

    def to_dict(self) -> dict:
        return {
            "senders": self.sender_names,
            "receivers": self.receiver_names,
            "values": self.values.tolist(),
        }

    def to_csv(self) -> str:
        lines = ["sender," + ",".join(self.receiver_names)]
        for name, row in zip(self.sender_names, self.values):
            lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        rows = [
            [name] + [f"{v:.3f}" for v in row]
            for name, row in zip(self.sender_names, self.values)
        ]
        return render_table(["sender \\ receiver"] + self.receiver_names, rows)


def eval_matrix(population: PopulationSpec, stores, ids, batch_size: int = 64,
                rng: np.random.Generator | None = None,
                repeats: int = 10) -> AccuracyMatrix:
    """Full sender x receiver accuracy grid (heat-map data)."""
    rng = rng or np.random.default_rng()
    values = np.zeros((len(population.senders), len(population.receivers)))
    for i, s in enumerate(population.senders):
        for j, r in enumerate(population.receivers):
            values[i, j] = eval_accuracy(
                s, r, stores, ids, batch_size, rng, repeats
            ).mean
    return AccuracyMatrix(
        sender_names=[s.architecture_name for s in population.senders],
        receiver_names=[r.architecture_name for r in population.receivers],
        values=values,
    )


def eval_single_class(sender, receiver, stores, size: int = 32,
                      rng: np.random.Generator | None = None,
                      class_ids=None, batches_per_class: int = 1) -> AccuracyStat:
    """Accuracy when all distractors share the target's class.

    Uses the protocol unchanged; classes with fewer than `size` images are
    skipped (an error if none remain).
    """
    rng = rng or np.random.default_rng()
    store = stores[sender.architecture_name]
    if class_ids is None:
        class_ids = np.unique(store.class_ids)
    accs = []
    used = 0
    for cid in class_ids:
        if len(store.ids_of_class(int(cid))) < size:
            continue
        used += 1
        for _ in range(batches_per_class):
            batch = build_single_class_batch(store, int(cid), size=size, rng=rng)
            accs.append(
                play_batch(sender, receiver, batch, stores, mode="eval").accuracy
            )
    if not accs:
        raise InsufficientDataError(f"no class has >= {size} images")
    return AccuracyStat(
        mean=float(np.mean(accs)), sd=float(np.std(accs)),
        batches=len(accs), batch_size=size,
    )


def eval_ood(sender, receiver, ood_stores, ids=None, batch_size: int = 64,
             rng: np.random.Generator | None = None,
             repeats: int = 10) -> AccuracyStat:
    """Standard evaluation on stores of held-out (disjoint) classes."""
    if ids is None:
        ids = ood_stores[sender.architecture_name].image_ids
    return eval_accuracy(sender, receiver, ood_stores, ids, batch_size, rng, repeats)


def blob_test(sender, receiver, batch_size: int = 64, count: int = 1024,
              seed: int = 0, repeats: int = 20) -> AccuracyStat:
    """Accuracy on structureless standard-normal stores (sanity: chance).

    Each agent gets its own independently drawn blob store of matching
    dimension, with aligned image ids.
    """
    blob_stores = {}
    for agent in (sender, receiver):
        if agent.architecture_name not in blob_stores:
            blob_stores[agent.architecture_name] = synth_blobs(
                agent.input_dim, count,
                seed=seed + len(blob_stores),
                name=agent.architecture_name,
            )
    rng = rng_for(seed, "eval", "blobs")
    ids = blob_stores[sender.architecture_name].image_ids
    return eval_accuracy(sender, receiver, blob_stores, ids, batch_size, rng, repeats)


# ---------------------------------------------------------------------------
# message-level probes (inference-time, agents never mutated)


def _eval_message_probe(sender, receiver, stores, ids, batch_size, rng, repeats,
                        transform):
    """Eval accuracy with a message-payload transform applied at inference.

    Rounds whose transformed message is the zero vector carry no information
    and are scored as failures (the selection rule is undefined for them).
    """
    accs = []
    zero_rounds = 0
    total = 0
    for _ in range(repeats):
        batch = build_batch(ids, batch_size, rng)
        Xs = stores[sender.architecture_name].vectors_for(batch.candidate_ids)
        Xr = stores[receiver.architecture_name].vectors_for(batch.candidate_ids)
        targets = batch.target_positions
        payload = sender.transform(Xs[targets])
        payload = transform(payload)
        m_emb, _ = receiver.embed_messages(payload)
        mapped, _ = receiver.map_candidates(Xr)
        norms = np.linalg.norm(m_emb, axis=1)
        ok = norms > 0
        correct = np.zeros(len(targets), dtype=bool)
        if ok.any():
            sims, _ = numerics.cosine_matrix(m_emb[ok], mapped)
            correct[ok] = np.argmax(sims, axis=1) == targets[ok]
        zero_rounds += int((~ok).sum())
        total += len(targets)
        accs.append(float(np.mean(correct)))
    stat = AccuracyStat(
        mean=float(np.mean(accs)), sd=float(np.std(accs)),
        batches=repeats, batch_size=batch_size,
    )
    return stat, zero_rounds, total


def discretize_eval(sender, receiver, stores, ids, mode: str = "threshold",
                    threshold: float = 0.0, batch_size: int = 64,
                    rng: np.random.Generator | None = None,
                    repeats: int = 10) -> AccuracyStat:
    """Quantize continuous messages at inference only; receiver unchanged.

    mode="threshold": each dimension becomes 0/1 at the given threshold.
    mode="argmax": the message becomes a one-hot at its largest dimension.
    """
    if sender.channel.is_discrete:
        raise ConfigError("discretize_eval applies to continuous channels")
    if mode not in ("threshold", "argmax"):
        raise ConfigError(f"unknown discretization mode {mode!r}")
    rng = rng or np.random.default_rng()

    if mode == "threshold":
        def transform(m):
            return (m > threshold).astype(m.dtype)
    else:
        def transform(m):
            out = np.zeros_like(m)
            out[np.arange(m.shape[0]), np.argmax(m, axis=1)] = 1.0
            return out

    stat, _, _ = _eval_message_probe(
        sender, receiver, stores, ids, batch_size, rng, repeats, transform
    )
    return stat


def threshold_grid(sender, store, ids, quantiles=(0.2, 0.35, 0.5, 0.65, 0.8)):
    """Thresholds at pooled-message-value quantiles, for the scanned grid."""
    messages = sender.transform(store.vectors_for(ids))
    return [float(np.quantile(messages, q)) for q in quantiles]


def noise_eval(sender, receiver, stores, ids, sigma: float,
               batch_size: int = 64, rng: np.random.Generator | None = None,
               repeats: int = 10, noise_seed: int = 1234) -> AccuracyStat:
    """Add i.i.d. Gaussian noise to eval messages and re-measure accuracy.

    Batch sampling uses `rng`; the noise stream is derived from noise_seed so
    sigma=0 reproduces the clean accuracy exactly on the same batches.
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    rng = rng or np.random.default_rng()
    noise_rng = rng_for(noise_seed, "eval", "message-noise")

    def transform(m):
        if sigma == 0.0:
            return m
        return m + sigma * noise_rng.standard_normal(m.shape).astype(m.dtype)

    stat, _, _ = _eval_message_probe(
        sender, receiver, stores, ids, batch_size, rng, repeats, transform
    )
    return stat


# ---------------------------------------------------------------------------
# message distances (protocol alignment)


@dataclass
class DistanceDistribution:
    """Sample of cosine distances (in [0, 2]) with summary statistics."""

    samples: np.ndarray
    mean: float
    q1: float
    median: float
    q3: float

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "DistanceDistribution":
        samples = np.asarray(samples, dtype=np.float64)
        return cls(
            samples=samples,
            mean=float(samples.mean()),
            q1=float(np.quantile(samples, 0.25)),
            median=float(np.quantile(samples, 0.5)),
            q3=float(np.quantile(samples, 0.75)),
        )

    def to_dict(self) -> dict:
        return {
            "count": int(self.samples.size),
            "mean": self.mean,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
        }


def message_distances(sender_a, sender_b, stores, ids,
                      mismatched: bool = False,
                      rng: np.random.Generator | None = None) -> DistanceDistribution:
    """Cosine distances between two senders' messages for the same images.

    With mismatched=True, sender_b's messages are taken for a shuffled set of
    images instead (the different-image baseline).
    """
    ids = np.asarray(ids)
    ma = sender_a.transform(stores[sender_a.architecture_name].vectors_for(ids))
    ids_b = ids
    if mismatched:
        rng = rng or np.random.default_rng()
        shift = 1 + int(rng.integers(len(ids) - 1)) if len(ids) > 1 else 0
        ids_b = np.roll(ids, shift)  # derangement: every image paired with another
    mb = sender_b.transform(stores[sender_b.architecture_name].vectors_for(ids_b))
    na = np.linalg.norm(ma, axis=1)
    nb = np.linalg.norm(mb, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise DegenerateInputError("message_distances: zero-norm message")
    cos = np.sum(ma * mb, axis=1) / (na * nb)
    return DistanceDistribution.from_samples(1.0 - cos)


# ---------------------------------------------------------------------------
# PCA report


@dataclass
class PcaReport:
    ratios: np.ndarray
    correlation: np.ndarray
    dominant_dimensions: list  # ratios above twice the uniform share
    correlated_pairs: list  # |r| > 0.5 off-diagonal

    def to_dict(self) -> dict:
        return {
            "explained_variance_ratios": self.ratios.tolist(),
            "correlation": self.correlation.tolist(),
            "dominant_dimensions": self.dominant_dimensions,
            "correlated_pairs": self.correlated_pairs,
        }


def pca_report(senders, stores, ids) -> PcaReport:
    """PCA over all eval-mode messages from the given (continuous) senders."""
    blocks = []
    for s in senders:
        if s.channel.is_discrete:
            raise ConfigError("pca_report applies to continuous senders")
        blocks.append(s.transform(stores[s.architecture_name].vectors_for(ids)))
    messages = np.concatenate(blocks, axis=0)
    result = numerics.pca(messages)
    k = len(result.ratios)
    dominant = [int(i) for i, r in enumerate(result.ratios) if r > 2.0 / k]
    corr = result.correlation
    pairs = [
        (int(i), int(j), float(corr[i, j]))
        for i in range(k)
        for j in range(i + 1, k)
        if abs(corr[i, j]) > 0.5
    ]
    return PcaReport(
        ratios=result.ratios, correlation=corr,
        dominant_dimensions=dominant, correlated_pairs=pairs,
    )


# ---------------------------------------------------------------------------
# linear probe (zero-shot classifier transfer)


class LinearProbe(ParamsMixin):
    """Multinomial logistic regression on message vectors.

    Trained only on messages, never on raw embeddings. fit/predict/score
    follow the usual estimator conventions.
    """

    def __init__(self, epochs: int = 200, lr: float = 1e-2, seed: int = 0):
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.weights_ = None
        self.bias_ = None
        self.classes_ = None

    def fit(self, X, y):
        X = check_matrix(X, "messages")
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        targets = np.searchsorted(self.classes_, y)
        n_classes = len(self.classes_)
        rng = rng_for(self.seed, "probe")
        bound = 1.0 / np.sqrt(X.shape[1])
        W = rng.uniform(-bound, bound, size=(n_classes, X.shape[1])).astype(np.float32)
        b = np.zeros(n_classes, dtype=np.float32)
        params = {"W": W, "b": b}
        state = numerics.AdamState(lr=self.lr)
        for _ in range(self.epochs):
            logits = numerics.linear_forward(W, b, X)
            _, dlogits = numerics.softmax_cross_entropy(logits, targets)
            gW, gb, _ = numerics.linear_backward(dlogits, X, W)
            numerics.adam_step(params, {"W": gW, "b": gb}, state)
        self.weights_ = W
        self.bias_ = b
        return self

    def predict(self, X):
        check_fitted(self, "weights_")
        logits = numerics.linear_forward(self.weights_, self.bias_, check_matrix(X))
        return self.classes_[np.argmax(logits, axis=1)]

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def probe_train(sender, store: EmbeddingStore, ids, epochs: int = 200,
                lr: float = 1e-2, seed: int = 0) -> LinearProbe:
    """Fit a probe on one sender's eval-mode messages for the given ids."""
    messages = sender.transform(store.vectors_for(ids))
    labels = store.classes_for(ids)
    return LinearProbe(epochs=epochs, lr=lr, seed=seed).fit(messages, labels)


def probe_transfer(probe: LinearProbe, sender, store: EmbeddingStore, ids) -> float:
    """Apply a trained probe, unchanged, to another sender's messages."""
    messages = sender.transform(store.vectors_for(ids))
    return probe.score(messages, store.classes_for(ids))


# ---------------------------------------------------------------------------
# report rendering


def render_table(headers, rows) -> str:
    """Aligned-column text table."""
    cells = [list(map(str, headers))] + [list(map(str, r)) for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
