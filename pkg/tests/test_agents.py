import numpy as np
import pytest

from refcomm.agents import (
    ChannelSpec,
    Message,
    ReceiverAgent,
    SenderAgent,
    agent_bytes,
    agent_hash,
    load_agent,
    receiver_map,
    receiver_message_embed,
    save_agent,
    select,
    sender_encode,
    set_frozen,
)
from refcomm.errors import ConfigError, DegenerateInputError, ShapeError


def continuous_channel(dim=16):
    return ChannelSpec(kind="continuous", message_dim=dim)


def discrete_channel(vocab=8, dim=4):
    return ChannelSpec(kind="discrete", vocab_size=vocab, message_dim=dim)


class TestChannelSpec:
    def test_defaults_follow_protocol_sizes(self):
        ch = ChannelSpec()
        assert ch.message_dim == 16
        assert ch.vocab_size == 256
        assert ch.gumbel_tau == 5.0

    def test_validation(self):
        with pytest.raises(ConfigError):
            ChannelSpec(kind="telepathy")
        with pytest.raises(ConfigError):
            ChannelSpec(vocab_size=1)


class TestSenderEncode:
    def test_zero_weights_give_zero_message(self):
        ch = continuous_channel(4)
        s = SenderAgent("a", 6, ch, {"W": np.zeros((4, 6), np.float32),
                                     "b": np.zeros(4, np.float32)})
        msg = sender_encode(s, np.ones(6, dtype=np.float32))
        assert not msg.payload.any()

    def test_discrete_eval_argmax(self):
        ch = discrete_channel(vocab=3)
        W = np.zeros((3, 3), np.float32)
        b = np.array([0.1, 2.0, -1.0], np.float32)
        s = SenderAgent("a", 3, ch, {"W": W, "b": b})
        msg = sender_encode(s, np.zeros(3, dtype=np.float32), mode="eval")
        assert msg.symbol == 1
        np.testing.assert_array_equal(msg.payload, [0.0, 1.0, 0.0])

    def test_discrete_eval_deterministic(self):
        ch = discrete_channel(vocab=16)
        s = SenderAgent.create("a", 5, ch, seed=1)
        x = np.random.default_rng(0).standard_normal(5).astype(np.float32)
        msgs = [sender_encode(s, x, mode="eval") for _ in range(100)]
        first = msgs[0]
        for m in msgs[1:]:
            assert m.symbol == first.symbol
            np.testing.assert_array_equal(m.payload, first.payload)

    def test_train_mode_discrete_is_simplex(self):
        ch = discrete_channel(vocab=8)
        s = SenderAgent.create("a", 5, ch, seed=1)
        rng = np.random.default_rng(2)
        msg = sender_encode(s, np.ones(5, dtype=np.float32), mode="train", rng=rng)
        assert msg.payload.sum() == pytest.approx(1.0, abs=1e-5)
        assert np.all(msg.payload > 0)

    def test_dim_mismatch(self):
        s = SenderAgent.create("a", 5, continuous_channel(), seed=0)
        with pytest.raises(ShapeError):
            sender_encode(s, np.zeros(7, dtype=np.float32))


class TestReceiverMessageEmbed:
    def test_continuous_identity(self):
        r = ReceiverAgent.create("a", 6, continuous_channel(4), hidden_dim=3, seed=0)
        m = Message(payload=np.arange(4, dtype=np.float32))
        np.testing.assert_array_equal(receiver_message_embed(r, m), m.payload)

    def test_one_hot_is_decoder_row_lookup(self):
        ch = discrete_channel(vocab=6, dim=3)
        r = ReceiverAgent.create("a", 5, ch, hidden_dim=3, seed=0)
        onehot = np.zeros(6, dtype=np.float32)
        onehot[4] = 1.0
        out = receiver_message_embed(r, Message(payload=onehot, symbol=4))
        np.testing.assert_allclose(out, r.params["E"][4], atol=1e-7)

    def test_soft_payload_is_convex_combination(self):
        # naive matmul oracle over a simplex payload
        ch = discrete_channel(vocab=5, dim=3)
        r = ReceiverAgent.create("a", 4, ch, hidden_dim=3, seed=1)
        rng = np.random.default_rng(3)
        w = rng.random(5)
        w /= w.sum()
        expected = np.zeros(3)
        for k in range(5):
            expected += w[k] * r.params["E"][k]
        out = receiver_message_embed(r, Message(payload=w.astype(np.float32)))
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_decoder_only_for_discrete(self):
        r_cont = ReceiverAgent.create("a", 5, continuous_channel(), seed=0)
        assert "E" not in r_cont.params
        r_disc = ReceiverAgent.create("a", 5, discrete_channel(), seed=0)
        assert "E" in r_disc.params

    def test_optional_deep_decoder(self):
        ch = discrete_channel(vocab=8, dim=4)
        r = ReceiverAgent.create("a", 5, ch, decoder_hidden=16, seed=0)
        assert {"D1", "d1", "D2", "d2"} <= set(r.params)
        onehot = np.zeros(8, dtype=np.float32)
        onehot[2] = 1.0
        out = receiver_message_embed(r, Message(payload=onehot))
        assert out.shape == (4,)


class TestReceiverMap:
    def test_zero_weights_zero_map(self):
        ch = continuous_channel(4)
        params = {"W1": np.zeros((3, 5), np.float32), "b1": np.zeros(3, np.float32),
                  "W2": np.zeros((4, 3), np.float32), "b2": np.zeros(4, np.float32)}
        r = ReceiverAgent("a", 5, ch, params, hidden_dim=3)
        X = np.random.default_rng(0).standard_normal((7, 5)).astype(np.float32)
        assert not receiver_map(r, X).any()

    def test_single_candidate_matches_batch(self):
        r = ReceiverAgent.create("a", 6, continuous_channel(4), hidden_dim=5, seed=2)
        X = np.random.default_rng(1).standard_normal((3, 6)).astype(np.float32)
        full = receiver_map(r, X)
        for i in range(3):
            np.testing.assert_allclose(
                receiver_map(r, X[i : i + 1])[0], full[i], rtol=1e-6
            )

    def test_matches_composed_numerics_ops(self):
        from refcomm import numerics

        r = ReceiverAgent.create("a", 6, continuous_channel(4), hidden_dim=5, seed=3)
        X = np.random.default_rng(2).standard_normal((8, 6)).astype(np.float32)
        h = numerics.relu(numerics.linear_forward(r.params["W1"], r.params["b1"], X))
        expected = numerics.linear_forward(r.params["W2"], r.params["b2"], h)
        np.testing.assert_allclose(receiver_map(r, X), expected, atol=1e-6)


class TestSelect:
    def test_equal_rows_give_uniform(self):
        mapped = np.tile(np.array([1.0, 2.0, 0.5], np.float32), (10, 1))
        probs = select(np.array([0.3, -1.0, 2.0]), mapped, 0.1)
        np.testing.assert_allclose(probs, np.full(10, 0.1), atol=1e-6)

    def test_collinear_candidate_dominates(self):
        # one candidate collinear, 63 orthogonal: logit gap 1/0.1 = 10
        rng = np.random.default_rng(4)
        msg = np.zeros(8, dtype=np.float32)
        msg[0] = 2.0
        mapped = np.zeros((64, 8), dtype=np.float32)
        mapped[0, 0] = 5.0  # collinear with msg
        mapped[1:, 1] = rng.uniform(0.5, 2.0, size=63)  # orthogonal to msg
        probs = select(msg, mapped, 0.1)
        assert probs[0] > 0.99

    def test_sums_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            probs = select(
                rng.standard_normal(6), rng.standard_normal((17, 6)), 0.1
            )
            assert probs.sum() == pytest.approx(1.0, abs=1e-5)

    def test_scale_invariance_of_argmax(self):
        rng = np.random.default_rng(6)
        msg = rng.standard_normal(5)
        mapped = rng.standard_normal((9, 5))
        base = np.argmax(select(msg, mapped, 0.1))
        for scale in (0.01, 3.0, 1000.0):
            assert np.argmax(select(scale * msg, mapped, 0.1)) == base

    def test_zero_norm_message_raises(self):
        with pytest.raises(DegenerateInputError):
            select(np.zeros(4), np.ones((3, 4)), 0.1)


class TestInitialization:
    def test_equal_seeds_identical_params(self):
        a = SenderAgent.create("arch", 10, continuous_channel(), seed=5)
        b = SenderAgent.create("arch", 10, continuous_channel(), seed=5)
        np.testing.assert_array_equal(a.params["W"], b.params["W"])
        c = SenderAgent.create("arch", 10, continuous_channel(), seed=6)
        assert not np.array_equal(a.params["W"], c.params["W"])

    def test_sender_receiver_share_nothing(self):
        s = SenderAgent.create("arch", 10, continuous_channel(), seed=5)
        r = ReceiverAgent.create("arch", 10, continuous_channel(), seed=5)
        for sp in s.params.values():
            for rp in r.params.values():
                assert sp is not rp

    def test_parameter_count_envelope(self):
        # paper-scale input dims put the sender encoder in the stated range
        small = SenderAgent.create("s", 384, continuous_channel(16), seed=0)
        big = SenderAgent.create("b", 4096, continuous_channel(16), seed=0)
        count = lambda a: sum(p.size for p in a.params.values())
        assert count(small) == 384 * 16 + 16  # 6,160 ~ "6k"
        assert count(big) == 4096 * 16 + 16  # 65,552 ~ "66k"


class TestFreezeAndCheckpoints:
    def test_checkpoint_round_trip_sender(self, tmp_path):
        s = SenderAgent.create("arch", 7, discrete_channel(vocab=12, dim=5), seed=1)
        set_frozen(s, True)
        path = tmp_path / "s.agt"
        save_agent(s, path)
        loaded = load_agent(path)
        assert loaded.role == "sender"
        assert loaded.frozen is True
        assert loaded.channel == s.channel
        np.testing.assert_array_equal(loaded.params["W"], s.params["W"])
        assert agent_hash(loaded) == agent_hash(s)

    def test_checkpoint_round_trip_receiver(self, tmp_path):
        r = ReceiverAgent.create("arch", 9, discrete_channel(vocab=6, dim=4),
                                 hidden_dim=11, cosine_temperature=0.25, seed=2)
        path = tmp_path / "r.agt"
        save_agent(r, path)
        loaded = load_agent(path)
        assert loaded.role == "receiver"
        assert loaded.hidden_dim == 11
        assert loaded.cosine_temperature == 0.25
        for key in r.params:
            np.testing.assert_array_equal(loaded.params[key], r.params[key])

    def test_deterministic_byte_layout(self):
        a = SenderAgent.create("arch", 7, continuous_channel(), seed=3)
        b = SenderAgent.create("arch", 7, continuous_channel(), seed=3)
        assert agent_bytes(a) == agent_bytes(b)

    def test_hash_changes_with_params(self):
        a = SenderAgent.create("arch", 7, continuous_channel(), seed=3)
        h0 = agent_hash(a)
        a.params["W"][0, 0] += 1.0
        assert agent_hash(a) != h0

    def test_freeze_then_unfreeze(self):
        s = SenderAgent.create("arch", 7, continuous_channel(), seed=4)
        set_frozen(s, True)
        assert s.frozen
        set_frozen(s, False)
        assert not s.frozen
