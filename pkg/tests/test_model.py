import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

import psyframe as pf
from psyframe import model as mdl


CFG = mdl.ModelConfig()


def random_batch(rng, size, cfg=CFG):
    return [
        (rng.normal(size=cfg.feature_dim), int(rng.integers(cfg.n_classes)))
        for _ in range(size)
    ]


def finite_difference(weights, batch, name, idx, step=1e-5):
    def loss_at(delta):
        arrays = {k: v.copy() for k, v in weights.arrays.items()}
        arrays[name][idx] += delta
        return mdl.batch_loss(weights.with_arrays(arrays), batch)

    return (loss_at(step) - loss_at(-step)) / (2.0 * step)


class TestConfig:
    def test_defaults(self):
        assert CFG.d_model == 32 and CFG.n_heads == 2 and CFG.n_layers == 2
        assert CFG.n_tokens == 15 and CFG.token_dim == 13
        assert CFG.feature_dim == 182

    def test_head_divisibility_enforced(self):
        with pytest.raises(ValueError):
            mdl.ModelConfig(d_model=33)

    def test_dropout_pinned_to_zero(self):
        with pytest.raises(ValueError):
            mdl.ModelConfig(dropout=0.1)


class TestInit:
    def test_deterministic_per_seed(self):
        a = mdl.init_weights(CFG, seed=4)
        b = mdl.init_weights(CFG, seed=4)
        assert all(a.arrays[k].tobytes() == b.arrays[k].tobytes() for k in a.arrays)

    def test_seeds_differ(self):
        a = mdl.init_weights(CFG, seed=4)
        b = mdl.init_weights(CFG, seed=5)
        assert any(a.arrays[k].tobytes() != b.arrays[k].tobytes() for k in a.arrays)

    def test_glorot_bounds_and_special_arrays(self):
        w = mdl.init_weights(CFG, seed=0)
        for name, a in w.arrays.items():
            assert np.all(np.isfinite(a))
            base = name.split(".")[-1]
            if base.endswith("_g"):
                assert np.all(a == 1.0)
            elif base.startswith("b") or base.endswith("_b"):
                assert np.all(a == 0.0)
            elif base == "summary":
                assert np.abs(a).max() <= mdl.glorot_limit((1, a.shape[0]))
            else:
                assert np.abs(a).max() <= mdl.glorot_limit(a.shape)

    def test_parameter_count_is_stable(self):
        assert mdl.init_weights(CFG, seed=0).n_parameters() == 26565


class TestForward:
    def test_softmax_normalization(self):
        w = mdl.init_weights(CFG, seed=1)
        rng = np.random.default_rng(0)
        for _ in range(5):
            p = mdl.posterior(w, rng.normal(size=182))
            assert p.shape == (5,)
            assert np.all(p >= 0.0) and np.all(p <= 1.0)
            assert abs(p.sum() - 1.0) < 1e-9

    def test_zero_head_gives_uniform_posterior(self):
        w = mdl.init_weights(CFG, seed=1)
        arrays = {k: v.copy() for k, v in w.arrays.items()}
        arrays["head_w"][:] = 0.0
        arrays["head_b"][:] = 0.0
        p = mdl.posterior(w.with_arrays(arrays), np.random.default_rng(0).normal(size=182))
        assert np.allclose(p, 0.2, atol=1e-12)

    def test_channel_permutation_changes_logits(self):
        w = mdl.init_weights(CFG, seed=1)
        f = np.random.default_rng(3).normal(size=182)
        swapped = f.reshape(14, 13).copy()
        swapped[[0, 1]] = swapped[[1, 0]]
        a = mdl.forward(w, f)
        b = mdl.forward(w, swapped.reshape(-1))
        assert np.abs(a - b).max() > 1e-8

    def test_head_scaling_scales_logits(self):
        w = mdl.init_weights(CFG, seed=2)
        f = np.random.default_rng(4).normal(size=182)
        base = mdl.forward(w, f)
        arrays = {k: v.copy() for k, v in w.arrays.items()}
        arrays["head_w"] *= 3.0
        arrays["head_b"] *= 3.0
        scaled = mdl.forward(w.with_arrays(arrays), f)
        assert np.allclose(scaled, 3.0 * base, rtol=1e-12)
        assert scaled.argmax() == base.argmax()

    def test_wrong_width_rejected(self):
        w = mdl.init_weights(CFG, seed=1)
        with pytest.raises(ValueError):
            mdl.forward(w, np.zeros(181))

    def test_batch_matches_single(self):
        w = mdl.init_weights(CFG, seed=1)
        rng = np.random.default_rng(5)
        batch = rng.normal(size=(3, 182))
        stacked = mdl.forward(w, batch)
        singles = np.stack([mdl.forward(w, row) for row in batch])
        assert np.allclose(stacked, singles, atol=1e-12)


class TestLoss:
    def test_uniform_logits(self):
        assert abs(mdl.loss_ce(np.zeros(5), 3) - np.log(5.0)) < 1e-12

    def test_saturated_correct(self):
        logits = np.array([30.0, -30.0, -30.0, -30.0, -30.0])
        assert mdl.loss_ce(logits, 0) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 4))
    def test_nonnegative(self, seed, label):
        logits = np.random.default_rng(seed).normal(scale=5.0, size=5)
        assert mdl.loss_ce(logits, label) >= 0.0


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        w = mdl.init_weights(CFG, seed=1)
        batch = random_batch(rng, 4)
        g = mdl.gradients(w, batch)
        for name in sorted(g):
            a = w.arrays[name]
            for fi in rng.choice(a.size, size=min(3, a.size), replace=False):
                idx = np.unravel_index(fi, a.shape)
                fd = finite_difference(w, batch, name, idx)
                an = g[name][idx]
                rel = abs(fd - an) / max(1e-6, abs(fd) + abs(an))
                assert rel < 1e-4, f"{name}{idx}: fd={fd:.3e} an={an:.3e}"

    def test_duplicated_batch_same_gradient(self):
        rng = np.random.default_rng(8)
        w = mdl.init_weights(CFG, seed=1)
        batch = random_batch(rng, 3)
        g1 = mdl.gradients(w, batch)
        g2 = mdl.gradients(w, batch + batch)
        for k in g1:
            assert np.allclose(g1[k], g2[k], atol=1e-12)

    def test_saturated_prediction_has_tiny_head_gradient(self):
        w = mdl.init_weights(CFG, seed=1)
        f = np.random.default_rng(9).normal(size=182)
        logits = mdl.forward(w, f)
        label = int(logits.argmax())
        # drive the correct logit far above the rest through the head bias
        arrays = {k: v.copy() for k, v in w.arrays.items()}
        arrays["head_b"][label] += 60.0
        saturated = w.with_arrays(arrays)
        g = mdl.gradients(saturated, [(f, label)])
        assert np.linalg.norm(g["head_w"]) < 1e-6
        assert np.linalg.norm(g["head_b"]) < 1e-6

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            mdl.gradients(mdl.init_weights(CFG, seed=0), [])


class TestAdam:
    def test_first_step_magnitude(self):
        w = mdl.init_weights(CFG, seed=1)
        rng = np.random.default_rng(10)
        g = {k: rng.uniform(0.01, 1.0, size=a.shape) * np.sign(rng.normal(size=a.shape))
             for k, a in w.arrays.items()}
        new_w, state = mdl.adam_step(w, g, mdl.AdamState.zeros(w), lr=1e-3)
        assert state.step == 1
        for k in g:
            update = new_w.arrays[k] - w.arrays[k]
            assert np.abs(update + 1e-3 * np.sign(g[k])).max() < 1e-6

    def test_zero_gradient_keeps_weights(self):
        w = mdl.init_weights(CFG, seed=1)
        g = {k: np.zeros_like(a) for k, a in w.arrays.items()}
        new_w, _ = mdl.adam_step(w, g, mdl.AdamState.zeros(w))
        for k in g:
            assert np.array_equal(new_w.arrays[k], w.arrays[k])

    def test_deterministic(self):
        w = mdl.init_weights(CFG, seed=1)
        rng = np.random.default_rng(11)
        g = {k: rng.normal(size=a.shape) for k, a in w.arrays.items()}
        s0 = mdl.AdamState.zeros(w)
        a1, sa = mdl.adam_step(w, g, s0)
        b1, sb = mdl.adam_step(w, g, s0)
        assert all(np.array_equal(a1.arrays[k], b1.arrays[k]) for k in g)
        assert sa.step == sb.step
        assert all(np.array_equal(sa.m[k], sb.m[k]) for k in g)


class TestTrainEvaluate:
    def test_training_improves_and_is_deterministic(self, small_dataset):
        d_train, d_val = pf.split_dataset(small_dataset, 0.8, seed=0)
        w1, r1 = pf.train(d_train, d_val, CFG, epochs=3, batch_size=8, seed=2)
        w2, r2 = pf.train(d_train, d_val, CFG, epochs=3, batch_size=8, seed=2)
        assert r1 == r2
        assert all(np.array_equal(w1.arrays[k], w2.arrays[k]) for k in w1.arrays)
        losses = [e.train_loss for e in r1.epochs]
        assert all(np.isfinite(losses))
        assert min(losses) < losses[0]

    def test_layout_mismatch_rejected(self, small_dataset):
        d_train, d_val = pf.split_dataset(small_dataset, 0.8, seed=0)
        bad = replace(d_val, layout_id="other-layout-v9")
        with pytest.raises(ValueError):
            pf.train(d_train, bad, CFG, epochs=1)

    def test_trained_accuracy_beats_chance(self, trained):
        weights, report, _, d_val = trained
        accuracy, confusion = pf.evaluate(weights, d_val)
        assert accuracy >= 0.8
        assert confusion.sum() == len(d_val)
        assert accuracy == pytest.approx(np.trace(confusion) / confusion.sum())

    def test_untrained_accuracy_near_chance(self, trained):
        _, _, _, d_val = trained
        untrained = mdl.init_weights(CFG, seed=123)
        accuracy, confusion = pf.evaluate(untrained, d_val)
        assert 0.08 <= accuracy <= 0.35
        assert confusion.sum() == len(d_val)

    def test_confusion_row_semantics(self, trained):
        weights, _, _, d_val = trained
        _, confusion = pf.evaluate(weights, d_val)
        # row i sums to the number of true-class-i samples
        assert confusion.sum(axis=1).tolist() == d_val.class_counts()

    def test_empty_dataset_rejected(self, trained):
        weights, _, _, _ = trained
        from psyframe.synth import Dataset

        with pytest.raises(ValueError):
            pf.evaluate(weights, Dataset(windows=(), labels=(), seed=0))


class TestWeightsFile:
    def test_bit_exact_round_trip(self, trained, tmp_path):
        weights, _, _, _ = trained
        path = tmp_path / "w.ndjson"
        mdl.save_weights(path, weights)
        loaded = mdl.load_weights(path)
        assert loaded.config == weights.config
        assert loaded.layout_id == weights.layout_id
        for k in weights.arrays:
            assert loaded.arrays[k].tobytes() == weights.arrays[k].tobytes()
        assert loaded.feat_mu.tobytes() == weights.feat_mu.tobytes()
        assert loaded.feat_sigma.tobytes() == weights.feat_sigma.tobytes()
        path2 = tmp_path / "w2.ndjson"
        mdl.save_weights(path2, loaded)
        assert path.read_bytes() == path2.read_bytes()

    def test_manifest_carries_layout_id(self, trained, tmp_path):
        import json

        weights, _, _, _ = trained
        path = tmp_path / "w.ndjson"
        mdl.save_weights(path, weights)
        manifest = json.loads(path.read_text().splitlines()[0])
        assert manifest["format"] == "psyframe-weights"
        assert manifest["layout_id"] == pf.FEATURE_LAYOUT_ID

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "nope.ndjson"
        path.write_text('{"format":"psyframe-dataset"}\n')
        with pytest.raises(ValueError):
            mdl.load_weights(path)
