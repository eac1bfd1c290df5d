"""refcomm: referential-communication protocols between frozen embedding modules.

Induce, train, and analyze sender/receiver communication over heterogeneous
embedding datasets: continuous and discrete channels, one-to-one and
population training, learner agents, generalization suites, classifier
transfer, and protocol analyses.
"""

from .agents import (
    ChannelSpec,
    Message,
    ReceiverAgent,
    SenderAgent,
    agent_hash,
    load_agent,
    save_agent,
    set_frozen,
)
from .data import (
    DatasetManifest,
    EmbeddingStore,
    GameBatch,
    SyntheticGenConfig,
    build_batch,
    build_single_class_batch,
    make_splits,
    read_store,
    synth_blobs,
    synth_generate,
    write_store,
)
from .estimators import LearnerTrainer, PairTrainer, PopulationTrainer
from .evaluation import (
    AccuracyMatrix,
    DistanceDistribution,
    LinearProbe,
    blob_test,
    discretize_eval,
    eval_accuracy,
    eval_matrix,
    eval_ood,
    eval_single_class,
    message_distances,
    noise_eval,
    pca_report,
    probe_train,
    probe_transfer,
)
from .game import (
    PopulationSpec,
    RunMetrics,
    TrainConfig,
    play_batch,
    reinforce_step,
    train_learner,
    train_pair,
    train_population,
    vocab_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec", "Message", "SenderAgent", "ReceiverAgent",
    "agent_hash", "save_agent", "load_agent", "set_frozen",
    "EmbeddingStore", "DatasetManifest", "SyntheticGenConfig", "GameBatch",
    "read_store", "write_store", "synth_generate", "synth_blobs",
    "make_splits", "build_batch", "build_single_class_batch",
    "TrainConfig", "RunMetrics", "PopulationSpec",
    "play_batch", "reinforce_step", "train_pair", "train_population",
    "train_learner", "vocab_sweep",
    "PairTrainer", "PopulationTrainer", "LearnerTrainer",
    "eval_accuracy", "eval_matrix", "eval_single_class", "eval_ood",
    "blob_test", "discretize_eval", "noise_eval", "message_distances",
    "pca_report", "LinearProbe", "probe_train", "probe_transfer",
    "AccuracyMatrix", "DistanceDistribution",
]
