import numpy as np
import pytest

from catalog import ALL_CONFIGS, CANONICAL_CONFIGS
from scourcast.errors import (
    ConfigMismatch,
    ConfigSyntaxError,
    FilterTooLong,
    NonPositiveDimension,
    UnknownFamily,
)
from scourcast.models import (
    ConvForecaster,
    FeedbackLSTM,
    ModelConfig,
    SingleShotLSTM,
    build_model,
    format_config,
    load_state_dict,
    parse_config,
    state_dict,
)
from scourcast.nn import autograd as ag
from scourcast.nn.gradcheck import gradient_check
from scourcast.nn.optim import Adam


class TestNomenclature:
    def test_parse_lstm_example(self):
        cfg = parse_config("ss-(336,168)-128-0")
        assert cfg == ModelConfig(family="ss", w_in=336, w_out=168,
                                  units=128, dropout=0.0)

    def test_parse_cnn_example(self):
        cfg = parse_config("fcn-5-64-7-64-0")
        assert cfg == ModelConfig(family="fcn", k1=5, f1=64, k2=7, f2=64,
                                  dropout=0.0)

    def test_unknown_family(self):
        with pytest.raises(UnknownFamily):
            parse_config("xx-(1,1)-8-0")

    def test_garbled_strings(self):
        for bad in ("ss-336,168-128-0", "fcn-5-64-7-64", "ss-(336,168)-128"):
            with pytest.raises(ConfigSyntaxError):
                parse_config(bad)

    def test_nonpositive_dimension(self):
        with pytest.raises(NonPositiveDimension):
            parse_config("ss-(0,168)-128-0")

    @pytest.mark.parametrize("text", CANONICAL_CONFIGS)
    def test_string_round_trip(self, text):
        assert format_config(parse_config(text)) == text

    @pytest.mark.parametrize("text", ALL_CONFIGS)
    def test_config_round_trip(self, text):
        cfg = parse_config(text)
        assert parse_config(format_config(cfg)) == cfg

    def test_noncanonical_zero_dropout_normalizes(self):
        assert format_config(parse_config("fcn-5-128-5-256-0.0")).endswith("-0")

    def test_window_binding(self):
        cfg = parse_config("fcn-5-64-7-64-0").with_windows(48, 24)
        assert (cfg.w_in, cfg.w_out) == (48, 24)
        assert format_config(cfg) == "fcn-5-64-7-64-0"


def lstm_cfg(family="ss", w_in=4, w_out=2, units=3, drop=0.0):
    return ModelConfig(family=family, w_in=w_in, w_out=w_out, units=units,
                       dropout=drop)


def cnn_cfg(family, k1=3, f1=4, k2=3, f2=4, w_in=9, w_out=2, drop=0.0):
    return ModelConfig(family=family, k1=k1, f1=f1, k2=k2, f2=f2,
                       dropout=drop).with_windows(w_in, w_out)


ALL_FAMILY_CFGS = [
    lstm_cfg("ss"),
    lstm_cfg("ss2"),
    lstm_cfg("fb"),
    cnn_cfg("vcn"),
    cnn_cfg("fcn"),
    cnn_cfg("dcn"),
]


class TestArchitectures:
    @pytest.mark.parametrize("cfg", ALL_FAMILY_CFGS,
                             ids=[c.family for c in ALL_FAMILY_CFGS])
    def test_output_shape_contract(self, cfg):
        model = build_model(cfg, n_in=2, n_target=2, seed=0)
        x = np.random.default_rng(0).normal(size=(5, cfg.w_in, 2))
        out = model.forward(x)
        assert out.shape == (5, cfg.w_out, 2)

    def test_single_shot_shape_example(self):
        model = build_model(lstm_cfg("ss", 4, 2, 3), n_in=2, n_target=2, seed=1)
        out = model.forward(np.zeros((7, 4, 2)))
        assert out.shape == (7, 2, 2)

    def test_stacked_has_more_parameters(self):
        ss = build_model(lstm_cfg("ss", units=8), n_in=2, n_target=1, seed=0)
        ss2 = build_model(lstm_cfg("ss2", units=8), n_in=2, n_target=1, seed=0)
        count = lambda m: sum(p.data.size for p in m.parameters())
        assert count(ss2) > count(ss)

    @pytest.mark.parametrize("cfg", ALL_FAMILY_CFGS,
                             ids=[c.family for c in ALL_FAMILY_CFGS])
    def test_one_step_reduces_loss(self, cfg):
        rng = np.random.default_rng(3)
        model = build_model(cfg, n_in=2, n_target=2, seed=3)
        x = rng.normal(size=(8, cfg.w_in, 2))
        y = rng.normal(size=(8, cfg.w_out, 2))
        opt = Adam(model.parameters(), lr=1e-2)

        def loss_value(train):
            pred = model.forward(x, train=train)
            return ag.mse_loss(pred, ag.constant(y), [0, 1])

        before = float(loss_value(train=False).data)
        opt.zero_grad()
        loss = loss_value(train=True)
        loss.backward()
        opt.step()
        after = float(loss_value(train=False).data)
        assert after < before

    def test_same_seed_same_parameters(self):
        a = build_model(lstm_cfg(), n_in=2, n_target=2, seed=9)
        b = build_model(lstm_cfg(), n_in=2, n_target=2, seed=9)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa.data, pb.data)

    def test_builder_family_mismatch(self):
        with pytest.raises(ConfigMismatch):
            SingleShotLSTM(lstm_cfg("fb"), 2, 1, 0)
        with pytest.raises(ConfigMismatch):
            FeedbackLSTM(lstm_cfg("ss"), 2, 1, 0)
        with pytest.raises(ConfigMismatch):
            ConvForecaster(lstm_cfg("ss"), 2, 1, 0)

    def test_state_dict_round_trip(self):
        a = build_model(cnn_cfg("fcn"), n_in=2, n_target=1, seed=4)
        b = build_model(cnn_cfg("fcn"), n_in=2, n_target=1, seed=5)
        load_state_dict(b, state_dict(a))
        x = np.random.default_rng(6).normal(size=(2, 9, 2))
        assert np.array_equal(a.forward(x).data, b.forward(x).data)


class TestFeedback:
    def test_w_out_one_is_single_step_plus_head(self):
        cfg = lstm_cfg("fb", w_in=3, w_out=1, units=3)
        model = FeedbackLSTM(cfg, n_in=2, n_target=1, seed=7)
        x = np.random.default_rng(8).normal(size=(4, 3, 2))
        out = model.forward(x)
        # reference: run the warm-up by hand and apply the head once
        a = ag.constant(np.zeros((4, 3)))
        c = ag.constant(np.zeros((4, 3)))
        for t in range(3):
            a, c = model.cell.step(ag.constant(x[:, t, :]), a, c)
        want = model.head(a).data.reshape(4, 1, 1)
        np.testing.assert_allclose(out.data, want, atol=1e-12)

    def test_next_input_mixes_prediction_and_last_observed(self):
        cfg = lstm_cfg("fb", w_in=3, w_out=2, units=3)
        model = FeedbackLSTM(cfg, n_in=3, n_target=1, seed=9,
                             target_positions=[0, None, None])
        y = ag.constant(np.array([[42.0]]))
        last = np.array([[1.0, 2.0, 3.0]])
        nxt = model._next_input(y, last)
        np.testing.assert_array_equal(nxt.data, [[42.0, 2.0, 3.0]])

    def test_inference_never_reads_targets(self):
        cfg = lstm_cfg("fb", w_in=3, w_out=3, units=3)
        model = FeedbackLSTM(cfg, n_in=2, n_target=2, seed=10)
        x = np.random.default_rng(11).normal(size=(2, 3, 2))
        out1 = model.forward(x).data
        out2 = model.forward(x).data   # no target anywhere in the call
        assert np.array_equal(out1, out2)

    def test_gradient_check_through_rollout(self):
        cfg = lstm_cfg("fb", w_in=2, w_out=3, units=2)
        model = FeedbackLSTM(cfg, n_in=2, n_target=1, seed=12)
        rng = np.random.default_rng(13)
        x = rng.normal(size=(2, 2, 2))
        y = rng.normal(size=(2, 3, 1))

        def build():
            return ag.mse_loss(model.forward(x), ag.constant(y), [0])

        assert gradient_check(build, model.parameters()) < 1e-4

    def test_needs_a_target_linked_input(self):
        cfg = lstm_cfg("fb")
        with pytest.raises(ConfigMismatch):
            FeedbackLSTM(cfg, n_in=2, n_target=1, seed=0,
                         target_positions=[None, None])


class TestConvNets:
    def test_vcn_length_chain(self):
        # 9 -> 7 -> 3 with k1=3, k2=5
        cfg = cnn_cfg("vcn", k1=3, k2=5, w_in=9)
        model = ConvForecaster(cfg, n_in=2, n_target=1, seed=14)
        assert model.flat_len == 3 * cfg.f2

    def test_vcn_window_too_small(self):
        with pytest.raises(FilterTooLong):
            ConvForecaster(cnn_cfg("vcn", k1=5, k2=5, w_in=8), 2, 1, 0)

    def test_fcn_preserves_length_both_blocks(self):
        cfg = cnn_cfg("fcn", k1=5, k2=7, w_in=12)
        model = ConvForecaster(cfg, n_in=2, n_target=1, seed=15)
        assert model.flat_len == 12 * cfg.f2
        h = model.conv1(ag.constant(np.zeros((1, 12, 2))))
        assert h.shape[1] == 12
        assert model.conv2(h).shape[1] == 12

    def test_dcn_blocks_are_causal_in_infer_mode(self):
        cfg = cnn_cfg("dcn", k1=2, k2=2, w_in=12)
        model = ConvForecaster(cfg, n_in=1, n_target=1, seed=16)
        rng = np.random.default_rng(17)
        x = rng.normal(size=(1, 12, 1))

        def blocks(arr):
            h = model.conv1(ag.constant(arr))
            h = ag.relu(model.norms[0](h, train=False))
            h = model.conv2(h)
            return ag.relu(model.norms[1](h, train=False)).data

        base = blocks(x)
        p = 6
        bumped = x.copy()
        bumped[0, p, 0] += 2.0
        out = blocks(bumped)
        assert np.array_equal(out[0, :p], base[0, :p])

    def test_dropout_config_changes_training_pass_only(self):
        cfg = cnn_cfg("fcn", drop=0.2)
        model = ConvForecaster(cfg, n_in=2, n_target=1, seed=18)
        x = np.random.default_rng(19).normal(size=(2, 9, 2))
        infer1 = model.forward(x, train=False).data
        infer2 = model.forward(x, train=False).data
        assert np.array_equal(infer1, infer2)
        t1 = model.forward(x, train=True, rng=np.random.default_rng(1)).data
        t2 = model.forward(x, train=True, rng=np.random.default_rng(2)).data
        assert not np.array_equal(t1, t2)
