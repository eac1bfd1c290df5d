"""Estimator-style wrappers around the training loops.

fit()/score()/get_params() surfaces so runs compose with generic tooling;
the CLI drives training through these. Fitted attributes follow the
trailing-underscore convention.
"""

from __future__ import annotations

import numpy as np

from .agents import ChannelSpec, ReceiverAgent, SenderAgent, set_frozen
from .data import make_splits
from .errors import ConfigError
from .game import (
    PopulationSpec,
    TrainConfig,
    train_learner,
    train_pair,
    train_population,
)
from .evaluation import eval_accuracy, eval_matrix
from .seeding import rng_for
from .validation import ParamsMixin, check_fitted


def _train_config(self) -> TrainConfig:
    return TrainConfig(
        batch_size=self.batch_size,
        max_epochs=self.max_epochs,
        patience=self.patience,
        lr=self.lr,
        seed=self.seed,
        gumbel_tau=self.channel.gumbel_tau,
        cosine_temperature=self.cosine_temperature,
        eval_batches=self.eval_batches,
    )


def _resolve_splits(stores, splits, seed, test_fraction):
    if splits is not None:
        return splits
    store = next(iter(stores.values()))
    return make_splits(store, test_fraction, seed)


class _TrainerBase(ParamsMixin):
    def __init__(self, channel=None, hidden_dim=256, cosine_temperature=0.1,
                 batch_size=64, max_epochs=50, patience=5, lr=1e-3,
                 eval_batches=4, test_fraction=0.1, seed=0):
        self.channel = channel if channel is not None else ChannelSpec()
        self.hidden_dim = hidden_dim
        self.cosine_temperature = cosine_temperature
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.lr = lr
        self.eval_batches = eval_batches
        self.test_fraction = test_fraction
        self.seed = seed
        self.metrics_ = None

    def _new_sender(self, arch, stores):
        return SenderAgent.create(arch, stores[arch].dim, self.channel, seed=self.seed)

    def _new_receiver(self, arch, stores):
        return ReceiverAgent.create(
            arch, stores[arch].dim, self.channel, hidden_dim=self.hidden_dim,
            cosine_temperature=self.cosine_temperature, seed=self.seed,
        )


class PairTrainer(_TrainerBase):
    """Jointly train one sender-receiver pair on aligned stores."""

    def __init__(self, sender_arch=None, receiver_arch=None, **kwargs):
        super().__init__(**kwargs)
        self.sender_arch = sender_arch
        self.receiver_arch = receiver_arch
        self.sender_ = None
        self.receiver_ = None

    def fit(self, stores, splits=None):
        names = list(stores)
        s_arch = self.sender_arch or names[0]
        r_arch = self.receiver_arch or s_arch
        splits = _resolve_splits(stores, splits, self.seed, self.test_fraction)
        self.sender_ = self._new_sender(s_arch, stores)
        self.receiver_ = self._new_receiver(r_arch, stores)
        self.metrics_ = train_pair(
            self.sender_, self.receiver_, stores, splits, _train_config(self)
        )
        return self

    def score(self, stores, ids, repeats: int = 10,
              rng: np.random.Generator | None = None) -> float:
        check_fitted(self, "sender_")
        rng = rng or rng_for(self.seed, "eval", "score")
        return eval_accuracy(
            self.sender_, self.receiver_, stores, ids, self.batch_size, rng, repeats
        ).mean


class PopulationTrainer(_TrainerBase):
    """Train a roster of senders and receivers with random pairing."""

    def __init__(self, architectures=None, **kwargs):
        super().__init__(**kwargs)
        self.architectures = architectures
        self.population_ = None
        self.matrix_ = None

    def fit(self, stores, splits=None):
        archs = list(self.architectures or stores.keys())
        missing = [a for a in archs if a not in stores]
        if missing:
            raise ConfigError(f"no stores for architectures: {missing}")
        splits = _resolve_splits(stores, splits, self.seed, self.test_fraction)
        self.population_ = PopulationSpec(
            senders=[self._new_sender(a, stores) for a in archs],
            receivers=[self._new_receiver(a, stores) for a in archs],
        )
        self.metrics_ = train_population(
            self.population_, stores, splits, _train_config(self)
        )
        return self

    def score_matrix(self, stores, ids, repeats: int = 10,
                     rng: np.random.Generator | None = None):
        check_fitted(self, "population_")
        rng = rng or rng_for(self.seed, "eval", "matrix")
        self.matrix_ = eval_matrix(
            self.population_, stores, ids, self.batch_size, rng, repeats
        )
        return self.matrix_

    def score(self, stores, ids, repeats: int = 10,
              rng: np.random.Generator | None = None) -> float:
        return float(self.score_matrix(stores, ids, repeats, rng).values.mean())


class LearnerTrainer(_TrainerBase):
    """Train a fresh agent against a frozen, already-trained community."""

    def __init__(self, learner_arch=None, learner_role="receiver", **kwargs):
        super().__init__(**kwargs)
        self.learner_arch = learner_arch
        self.learner_role = learner_role
        self.learner_ = None

    def fit(self, stores, community: PopulationSpec, splits=None):
        if self.learner_role not in ("sender", "receiver"):
            raise ConfigError(f"learner_role must be sender|receiver, got {self.learner_role!r}")
        for agent in list(community.senders) + list(community.receivers):
            set_frozen(agent, True)
        arch = self.learner_arch or next(iter(stores))
        splits = _resolve_splits(stores, splits, self.seed, self.test_fraction)
        if self.learner_role == "sender":
            self.learner_ = self._new_sender(arch, stores)
        else:
            self.learner_ = self._new_receiver(arch, stores)
        self.metrics_ = train_learner(
            self.learner_, community, stores, splits, _train_config(self)
        )
        return self

    def score(self, stores, ids, community: PopulationSpec, repeats: int = 10,
              rng: np.random.Generator | None = None) -> float:
        check_fitted(self, "learner_")
        rng = rng or rng_for(self.seed, "eval", "learner-score")
        if self.learner_role == "sender":
            pairs = [(self.learner_, r) for r in community.receivers]
        else:
            pairs = [(s, self.learner_) for s in community.senders]
        accs = [
            eval_accuracy(s, r, stores, ids, self.batch_size, rng, repeats).mean
            for s, r in pairs
        ]
        return float(np.mean(accs))
