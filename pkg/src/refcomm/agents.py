"""Communication agents: sender encoders and receiver mappers/decoders.

Agents are plain parameter stores (dict of float32 arrays) plus forward
helpers. All trainable state lives in `.params`; gradients are computed by
the game module and applied by the optimizer, which skips frozen agents.
No parameters are ever shared between a sender and a receiver.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ConfigError, FormatError, ParameterError, ShapeError
from .seeding import rng_for
from .validation import check_matrix

CONTINUOUS = "continuous"
DISCRETE = "discrete"

CHECKPOINT_MAGIC = b"AGT1"
CHECKPOINT_VERSION = 1


@dataclass
class ChannelSpec:
    """Message-channel configuration shared by a sender/receiver pairing."""

    kind: str = CONTINUOUS
    message_dim: int = 16
    vocab_size: int = 256
    gumbel_tau: float = 5.0
    train_estimator: str = "gumbel"  # "gumbel" | "reinforce"
    straight_through: bool = False

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DISCRETE):
            raise ConfigError(f"channel kind must be continuous|discrete, got {self.kind!r}")
        if self.message_dim < 1:
            raise ConfigError("message_dim must be >= 1")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.gumbel_tau <= 0:
            raise ParameterError(f"gumbel_tau must be > 0, got {self.gumbel_tau}")
        if self.train_estimator not in ("gumbel", "reinforce"):
            raise ConfigError(f"unknown estimator {self.train_estimator!r}")

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE


@dataclass
class Message:
    """One utterance: continuous vector, simplex sample, or one-hot."""

    payload: np.ndarray
    symbol: int | None = None


def _init_linear(rng, out_dim: int, in_dim: int):
    # torch-style uniform fan-in init: U(-1/sqrt(fan_in), +1/sqrt(fan_in))
    bound = 1.0 / np.sqrt(in_dim)
    W = rng.uniform(-bound, bound, size=(out_dim, in_dim)).astype(np.float32)
    b = rng.uniform(-bound, bound, size=out_dim).astype(np.float32)
    return W, b


class SenderAgent:
    """Linear encoder from embedding space to the message channel."""

    role = "sender"

    def __init__(self, architecture_name: str, input_dim: int, channel: ChannelSpec,
                 params: dict, frozen: bool = False):
        self.architecture_name = architecture_name
        self.input_dim = input_dim
        self.channel = channel
        self.params = params
        self.frozen = frozen

    @classmethod
    def create(cls, architecture_name: str, input_dim: int, channel: ChannelSpec,
               seed: int = 0) -> "SenderAgent":
        out_dim = channel.vocab_size if channel.is_discrete else channel.message_dim
        rng = rng_for(seed, f"agent/{architecture_name}/sender")
        W, b = _init_linear(rng, out_dim, input_dim)
        return cls(architecture_name, input_dim, channel, {"W": W, "b": b})

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = check_matrix(X, "embeddings")
        if X.shape[1] != self.input_dim:
            raise ShapeError(
                f"sender {self.architecture_name!r} expects dim {self.input_dim}, "
                f"got {X.shape[1]}"
            )
        return numerics.linear_forward(self.params["W"], self.params["b"], X)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Eval-mode messages for a batch of embeddings (deterministic)."""
        out = self.logits(X)
        if self.channel.is_discrete:
            onehot = np.zeros_like(out)
            onehot[np.arange(out.shape[0]), np.argmax(out, axis=1)] = 1.0
            return onehot
        return out


def sender_encode(sender: SenderAgent, embedding: np.ndarray, mode: str = "eval",
                  rng: np.random.Generator | None = None) -> Message:
    """Encode one embedding into a Message.

    Continuous channels are deterministic in both modes. Discrete training
    samples the Gumbel-Softmax relaxation; discrete eval takes the argmax
    one-hot, so a converged sender is a deterministic policy.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be train|eval, got {mode!r}")
    out = sender.logits(np.asarray(embedding)[None, :])[0]
    ch = sender.channel
    if not ch.is_discrete:
        return Message(payload=out)
    if mode == "eval":
        sym = int(np.argmax(out))
        payload = np.zeros_like(out)
        payload[sym] = 1.0
        return Message(payload=payload, symbol=sym)
    sample, _ = numerics.gumbel_softmax_sample(
        out, ch.gumbel_tau, rng=rng, hard=ch.straight_through
    )
    return Message(payload=sample)


class ReceiverAgent:
    """Two-layer mapper over candidate embeddings plus a message decoder.

    The decoder (an embedding matrix, optionally with one hidden layer) exists
    only for discrete channels; continuous messages are compared as-is.
    """

    role = "receiver"

    def __init__(self, architecture_name: str, input_dim: int, channel: ChannelSpec,
                 params: dict, hidden_dim: int = 256, cosine_temperature: float = 0.1,
                 decoder_hidden: int | None = None, frozen: bool = False):
        if cosine_temperature <= 0:
            raise ParameterError("cosine_temperature must be > 0")
        self.architecture_name = architecture_name
        self.input_dim = input_dim
        self.channel = channel
        self.params = params
        self.hidden_dim = hidden_dim
        self.cosine_temperature = cosine_temperature
        self.decoder_hidden = decoder_hidden
        self.frozen = frozen

    @classmethod
    def create(cls, architecture_name: str, input_dim: int, channel: ChannelSpec,
               hidden_dim: int = 256, cosine_temperature: float = 0.1,
               decoder_hidden: int | None = None, seed: int = 0) -> "ReceiverAgent":
        rng = rng_for(seed, f"agent/{architecture_name}/receiver")
        W1, b1 = _init_linear(rng, hidden_dim, input_dim)
        W2, b2 = _init_linear(rng, channel.message_dim, hidden_dim)
        params = {"W1": W1, "b1": b1, "W2": W2, "b2": b2}
        if channel.is_discrete:
            if decoder_hidden:
                D1, d1 = _init_linear(rng, decoder_hidden, channel.vocab_size)
                D2, d2 = _init_linear(rng, channel.message_dim, decoder_hidden)
                params.update({"D1": D1, "d1": d1, "D2": D2, "d2": d2})
            else:
                bound = 1.0 / np.sqrt(channel.vocab_size)
                params["E"] = rng.uniform(
                    -bound, bound, size=(channel.vocab_size, channel.message_dim)
                ).astype(np.float32)
        return cls(architecture_name, input_dim, channel, params, hidden_dim,
                   cosine_temperature, decoder_hidden)

    def map_candidates(self, X: np.ndarray):
        """Forward pass of the mapper; returns (mapped, cache) for backward."""
        X = check_matrix(X, "candidates")
        if X.shape[1] != self.input_dim:
            raise ShapeError(
                f"receiver {self.architecture_name!r} expects dim {self.input_dim}, "
                f"got {X.shape[1]}"
            )
        pre = numerics.linear_forward(self.params["W1"], self.params["b1"], X)
        h = numerics.relu(pre)
        out = numerics.linear_forward(self.params["W2"], self.params["b2"], h)
        return out, (X, pre, h)

    def map_backward(self, grad_out: np.ndarray, cache):
        X, pre, h = cache
        gW2, gb2, gh = numerics.linear_backward(grad_out, h, self.params["W2"])
        gpre = numerics.relu_backward(gh, pre)
        gW1, gb1, _ = numerics.linear_backward(gpre, X, self.params["W1"])
        return {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}

    def embed_messages(self, payloads: np.ndarray):
        """Map message payloads into comparison space; identity when continuous."""
        payloads = check_matrix(payloads, "messages")
        if not self.channel.is_discrete:
            if payloads.shape[1] != self.channel.message_dim:
                raise ShapeError(
                    f"continuous message dim {payloads.shape[1]} != "
                    f"{self.channel.message_dim}"
                )
            return payloads, None
        if payloads.shape[1] != self.channel.vocab_size:
            raise ShapeError(
                f"discrete message dim {payloads.shape[1]} != vocab "
                f"{self.channel.vocab_size}"
            )
        if self.decoder_hidden:
            pre = numerics.linear_forward(self.params["D1"], self.params["d1"], payloads)
            h = numerics.relu(pre)
            out = numerics.linear_forward(self.params["D2"], self.params["d2"], h)
            return out, (payloads, pre, h)
        return payloads @ self.params["E"], (payloads,)

    def embed_messages_backward(self, grad_out: np.ndarray, cache):
        """Returns (param grads, grad wrt payloads)."""
        if not self.channel.is_discrete:
            return {}, grad_out
        if self.decoder_hidden:
            payloads, pre, h = cache
            gD2, gd2, gh = numerics.linear_backward(grad_out, h, self.params["D2"])
            gpre = numerics.relu_backward(gh, pre)
            gD1, gd1, gpay = numerics.linear_backward(gpre, payloads, self.params["D1"])
            return {"D1": gD1, "d1": gd1, "D2": gD2, "d2": gd2}, gpay
        (payloads,) = cache
        gE = payloads.T @ grad_out
        gpay = grad_out @ self.params["E"].T
        return {"E": gE}, gpay


def receiver_message_embed(receiver: ReceiverAgent, message: Message) -> np.ndarray:
    out, _ = receiver.embed_messages(message.payload[None, :])
    return out[0]


def receiver_map(receiver: ReceiverAgent, candidates: np.ndarray) -> np.ndarray:
    mapped, _ = receiver.map_candidates(candidates)
    return mapped


def select(message_embedding: np.ndarray, mapped: np.ndarray,
           cosine_temperature: float) -> np.ndarray:
    """Probabilities over candidates: softmax of cosine similarities / T."""
    if cosine_temperature <= 0:
        raise ParameterError("cosine_temperature must be > 0")
    sims, _ = numerics.cosine_matrix(np.asarray(message_embedding)[None, :], mapped)
    return numerics.softmax(sims[0] / cosine_temperature)


def set_frozen(agent, flag: bool) -> None:
    """Frozen agents are skipped by optimizer steps; gradients still flow through."""
    agent.frozen = bool(flag)


# ---------------------------------------------------------------------------
# checkpoints: deterministic byte layout so freeze invariance is hash-checkable


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _read_str(buf: io.BytesIO) -> str:
    (n,) = struct.unpack("<H", buf.read(2))
    return buf.read(n).decode("utf-8")


def agent_bytes(agent) -> bytes:
    """Canonical serialized form of an agent (sorted parameter order)."""
    ch = agent.channel
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<H", CHECKPOINT_VERSION)
    out += struct.pack("<B", 0 if agent.role == "sender" else 1)
    out += struct.pack(
        "<BIIdBB",
        1 if ch.is_discrete else 0,
        ch.message_dim,
        ch.vocab_size,
        ch.gumbel_tau,
        {"gumbel": 0, "reinforce": 1}[ch.train_estimator],
        1 if ch.straight_through else 0,
    )
    cosine_t = getattr(agent, "cosine_temperature", 0.0)
    hidden = getattr(agent, "hidden_dim", 0)
    dec_hidden = getattr(agent, "decoder_hidden", None) or 0
    out += struct.pack("<dII", cosine_t, hidden, dec_hidden)
    out += _pack_str(agent.architecture_name)
    out += struct.pack("<IB", agent.input_dim, 1 if agent.frozen else 0)
    names = sorted(agent.params)
    out += struct.pack("<H", len(names))
    for name in names:
        p = agent.params[name]
        out += _pack_str(name)
        if p.ndim == 1:
            out += struct.pack("<II", p.shape[0], 0)
        else:
            out += struct.pack("<II", p.shape[0], p.shape[1])
        out += np.ascontiguousarray(p, dtype="<f4").tobytes()
    return bytes(out)


def agent_hash(agent) -> str:
    return hashlib.sha256(agent_bytes(agent)).hexdigest()


def save_agent(agent, path) -> None:
    from pathlib import Path

    Path(path).write_bytes(agent_bytes(agent))


def load_agent(path):
    from pathlib import Path

    blob = Path(path).read_bytes()
    buf = io.BytesIO(blob)
    magic = buf.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {magic!r}", offset=0)
    (version,) = struct.unpack("<H", buf.read(2))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}", offset=4)
    (role,) = struct.unpack("<B", buf.read(1))
    kind, mdim, vocab, tau, estimator, st = struct.unpack("<BIIdBB", buf.read(19))
    channel = ChannelSpec(
        kind=DISCRETE if kind else CONTINUOUS,
        message_dim=mdim,
        vocab_size=vocab,
        gumbel_tau=tau,
        train_estimator={0: "gumbel", 1: "reinforce"}[estimator],
        straight_through=bool(st),
    )
    cosine_t, hidden, dec_hidden = struct.unpack("<dII", buf.read(16))
    name = _read_str(buf)
    input_dim, frozen = struct.unpack("<IB", buf.read(5))
    (n_params,) = struct.unpack("<H", buf.read(2))
    params = {}
    for _ in range(n_params):
        pname = _read_str(buf)
        rows, cols = struct.unpack("<II", buf.read(8))
        count = rows * (cols or 1)
        data = np.frombuffer(buf.read(4 * count), dtype="<f4").copy()
        params[pname] = data if cols == 0 else data.reshape(rows, cols)
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes after checkpoint", offset=buf.tell())
    if role == 0:
        return SenderAgent(name, input_dim, channel, params, frozen=bool(frozen))
    return ReceiverAgent(
        name, input_dim, channel, params, hidden_dim=hidden,
        cosine_temperature=cosine_t, decoder_hidden=dec_hidden or None,
        frozen=bool(frozen),
    )
