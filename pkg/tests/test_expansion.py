"""Width/depth growth: map construction, the two-stage matrix rule against
hand- and brute-force oracles, whole-model preservation, and stacking."""

from dataclasses import replace

import numpy as np
import pytest

from batkit.errors import ContractViolation
from batkit.expansion import (ExpansionMap, SplitMix64, build_mapping,
                              expand_matrix, expand_model, expand_vector,
                              identity_map, plan_maps, progressive_stack,
                              save_maps, stack_layers, verify_preservation)
from batkit.model import Direction, ModelConfig, forward, init_params
from batkit.precision import float64_mode

# Hand application of the two-stage rule to Q=[[1,2],[3,4]] with the cyclic
# 2x maps (rows halved by multiplicity 2, then columns copied).
HAND_Q = np.array([[1.0, 2.0], [3.0, 4.0]])
HAND_EXPECTED = np.array([
    [0.5, 1.0, 0.5, 1.0],
    [1.5, 2.0, 1.5, 2.0],
    [0.5, 1.0, 0.5, 1.0],
    [1.5, 2.0, 1.5, 2.0],
])


class TestBuildMapping:
    def test_no_expansion_is_identity(self):
        m = build_mapping(4, 4, seed=0)
        np.testing.assert_array_equal(m.m, [0, 1, 2, 3])
        np.testing.assert_array_equal(m.multiplicity, [1, 1, 1, 1])

    @pytest.mark.parametrize("seed", range(20))
    def test_identity_prefix_always(self, seed):
        m = build_mapping(5, 13, seed=seed, mode="approx")
        np.testing.assert_array_equal(m.m[:5], np.arange(5))

    def test_exact_cyclic_repetition(self):
        m = build_mapping(2, 4, seed=0, mode="exact")
        np.testing.assert_array_equal(m.m, [0, 1, 0, 1])
        np.testing.assert_array_equal(m.multiplicity, [2, 2])

    def test_exact_requires_integer_multiple(self):
        with pytest.raises(ContractViolation):
            build_mapping(4, 6, seed=0, mode="exact")

    def test_pure_function_of_inputs(self):
        a = build_mapping(6, 17, seed=99, mode="approx")
        b = build_mapping(6, 17, seed=99, mode="approx")
        np.testing.assert_array_equal(a.m, b.m)
        c = build_mapping(6, 17, seed=100, mode="approx")
        assert not np.array_equal(a.m, c.m)

    def test_multiplicity_accounting(self):
        for seed in range(10):
            m = build_mapping(7, 23, seed=seed, mode="approx")
            assert m.multiplicity.sum() == 23
            assert m.multiplicity.min() >= 1
            np.testing.assert_array_equal(np.bincount(m.m, minlength=7),
                                          m.multiplicity)

    def test_head_block_moves_whole_heads(self):
        m = build_mapping(8, 16, seed=0, structure="head_block", d_head=4,
                          mode="exact")
        np.testing.assert_array_equal(m.m[:8], np.arange(8))
        np.testing.assert_array_equal(m.m[8:], np.arange(8))
        with pytest.raises(ContractViolation):
            build_mapping(9, 18, seed=0, structure="head_block", d_head=4)

    def test_shrinking_rejected(self):
        with pytest.raises(ContractViolation):
            build_mapping(8, 4, seed=0)

    def test_splitmix_reference_sequence(self):
        """Reference values for the documented generator (seed 0)."""
        gen = SplitMix64(0)
        assert gen.next_u64() == 0xE220A8397B1DCDAF
        assert gen.next_u64() == 0x6E789E6AA1B965F4


class TestExpandMatrix:
    def test_identity_maps_bitwise(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(5, 7)).astype(np.float32)
        v = expand_matrix(q, identity_map(5), identity_map(7))
        assert v.tobytes() == q.tobytes()

    def test_hand_case(self):
        m = build_mapping(2, 4, seed=0, mode="exact")
        np.testing.assert_array_equal(expand_matrix(HAND_Q, m, m), HAND_EXPECTED)

    def test_linear_map_preservation_brute_force(self):
        """y' = V^T dup(x) reproduces Q^T x on the original coordinates and
        duplicates it on the new ones, checked by plain matrix multiply."""
        m = build_mapping(2, 4, seed=0, mode="exact")
        v = expand_matrix(HAND_Q, m, m)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            x = rng.normal(size=2)
            y = v.T @ np.concatenate([x, x])
            yq = HAND_Q.T @ x
            np.testing.assert_allclose(y[:2], yq, atol=1e-12)
            np.testing.assert_allclose(y[2:], y[:2], atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_rescaling_inverts_duplication(self, seed):
        """Summing multiplicity x intermediate rows over the duplicates of a
        source row recovers that row exactly."""
        rng = np.random.default_rng(seed)
        d_src, d_tgt = 5, 11
        m_in = build_mapping(d_src, d_tgt, seed=seed, mode="approx")
        q = rng.normal(size=(d_src, 6))
        scaled = q[m_in.m, :] / m_in.multiplicity[m_in.m][:, None]
        for i0 in range(d_src):
            rows = scaled[m_in.m == i0]
            np.testing.assert_allclose(rows.sum(axis=0), q[i0], rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            expand_matrix(HAND_Q, build_mapping(3, 6, 0), build_mapping(2, 4, 0))

    def test_expand_vector_copies(self):
        m = build_mapping(3, 6, seed=0, mode="exact")
        np.testing.assert_array_equal(expand_vector(np.array([1.0, 2.0, 3.0]), m),
                                      [1.0, 2.0, 3.0, 1.0, 2.0, 3.0])


SRC_CFG = ModelConfig(d_model=32, n_heads=4, d_head=8, d_ff=128,
                      n_layers=2, max_seq_len=32)
TGT_CFG = replace(SRC_CFG, d_model=64, n_heads=8, d_ff=256)


class TestExpandModel:
    def test_same_config_is_bitwise_identity(self):
        src = init_params(SRC_CFG, seed=0)
        out = expand_model(src, SRC_CFG, seed=5)
        for name in src.tensors:
            assert out.tensors[name].tobytes() == src.tensors[name].tobytes()

    def test_exact_doubling_preserves_function_f64(self, f64):
        src = init_params(SRC_CFG, seed=1)
        tgt = expand_model(src, TGT_CFG, seed=2, mode="exact")
        drift = verify_preservation(src, tgt, n_probes=20, seed=3)
        assert drift <= 1e-5

    def test_exact_doubling_preserves_function_f32(self):
        src = init_params(SRC_CFG, seed=1)
        tgt = expand_model(src, TGT_CFG, seed=2, mode="exact")
        assert verify_preservation(src, tgt, n_probes=20, seed=3) <= 1e-3

    def test_both_directions_preserved(self, f64):
        src = init_params(SRC_CFG, seed=4)
        tgt = expand_model(src, TGT_CFG, seed=5, mode="exact")
        tokens = list(range(10))
        for direction in (Direction.FORWARD, Direction.BACKWARD):
            a = forward(src.astype(np.float64), tokens, direction).data
            b = forward(tgt.astype(np.float64), tokens, direction).data
            assert np.max(np.abs(a - b)) <= 1e-5

    def test_approx_mode_reports_finite_drift(self, f64):
        src = init_params(SRC_CFG, seed=6)
        tgt_cfg = replace(SRC_CFG, d_model=48, n_heads=6, d_ff=160)
        tgt = expand_model(src, tgt_cfg, seed=7, mode="approx")
        drift = verify_preservation(src, tgt, n_probes=10, seed=8)
        assert np.isfinite(drift)

    def test_exact_mode_refuses_non_multiple(self):
        src = init_params(SRC_CFG, seed=0)
        with pytest.raises(ContractViolation):
            expand_model(src, replace(SRC_CFG, d_model=48, n_heads=6, d_ff=160),
                         seed=0, mode="exact")

    def test_reward_stage_expands(self, f64):
        src = init_params(SRC_CFG, seed=9).with_stage("reward")
        rng = np.random.default_rng(0)
        src.tensors["reward_head"][:] = rng.normal(size=(32, 1))
        tgt = expand_model(src, TGT_CFG, seed=10, mode="exact")
        from batkit.model import reward_forward
        ra = reward_forward(src.astype(np.float64), [5, 6], [7, 8]).item()
        rb = reward_forward(tgt.astype(np.float64), [5, 6], [7, 8]).item()
        assert ra == pytest.approx(rb, abs=1e-8)

    def test_maps_export(self, tmp_path):
        maps = plan_maps(SRC_CFG, TGT_CFG, seed=3, mode="exact")
        out = tmp_path / "maps.jsonl"
        save_maps(list(maps.values()), out)
        import json
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 3
        assert all(l["kind"] == "expansion_map" for l in lines)


class TestVerifyPreservation:
    def test_identical_models_zero(self):
        src = init_params(SRC_CFG, seed=0)
        assert verify_preservation(src, src.clone(), n_probes=5, seed=0) == 0.0

    def test_perturbation_detected(self):
        src = init_params(SRC_CFG, seed=0)
        tgt = src.clone()
        tgt.tensors["layers.0.attn.wq"][0, 0] += 1.0
        assert verify_preservation(src, tgt, n_probes=5, seed=0) > 0.0

    def test_vocab_mismatch_rejected(self, tiny_cfg):
        a = init_params(SRC_CFG, seed=0)
        b = init_params(replace(SRC_CFG, n_layers=4), seed=0)
        with pytest.raises(ContractViolation):
            verify_preservation(a, b, n_probes=1, seed=0)


class TestStackLayers:
    def test_single_doubling_duplicates_stack(self, tiny_cfg):
        src = init_params(replace(tiny_cfg, n_layers=2), seed=0)
        out = stack_layers(src, times=1)
        assert out.config.n_layers == 4
        for i in range(2):
            for suffix in ("attn.wq", "attn.wk", "attn.wv", "attn.wo",
                           "ffn.w1", "ffn.w2", "attn_ln.gain", "ffn_ln.bias"):
                a = src.tensors[f"layers.{i}.{suffix}"]
                b = out.tensors[f"layers.{i + 2}.{suffix}"]
                assert a.tobytes() == b.tobytes()

    def test_double_stacking_from_one_layer(self, tiny_cfg):
        src = init_params(replace(tiny_cfg, n_layers=1), seed=1)
        out = stack_layers(src, times=2)
        assert out.config.n_layers == 4
        base = src.tensors["layers.0.ffn.w1"]
        for i in range(4):
            assert out.tensors[f"layers.{i}.ffn.w1"].tobytes() == base.tobytes()

    def test_non_layer_tensors_unchanged(self, tiny_cfg):
        src = init_params(replace(tiny_cfg, n_layers=2), seed=2)
        out = stack_layers(src, times=1)
        for name in ("tok_emb", "pos_emb", "dir_emb", "final_ln.gain", "unembed"):
            assert out.tensors[name].tobytes() == src.tensors[name].tobytes()

    def test_depth_cap(self, tiny_cfg):
        src = init_params(replace(tiny_cfg, n_layers=2), seed=0)
        with pytest.raises(ContractViolation):
            stack_layers(src, times=3, max_layers=8)

    def test_zero_lr_training_keeps_duplication(self, tiny_cfg):
        from batkit.training import TrainConfig, train
        src = init_params(replace(tiny_cfg, n_layers=1), seed=3)
        stacked = stack_layers(src, times=1)
        out, _ = train(stacked, "pretrain", ["abcd"],
                       TrainConfig(learning_rate=0.0, steps=3, batch_size=1, seed=0))
        for suffix in ("attn.wq", "ffn.w2"):
            assert (out.tensors[f"layers.0.{suffix}"].tobytes()
                    == out.tensors[f"layers.1.{suffix}"].tobytes())


class TestProgressiveStack:
    def _stub_train(self, calls):
        def train_fn(params, corpus, steps, stage):
            calls.append((params.config.n_layers, steps, stage))
            return params, [float(steps)]
        return train_fn

    def test_k0_is_plain_training(self, tiny_cfg):
        calls = []
        cfg = replace(tiny_cfg, n_layers=4)
        params, reports = progressive_stack(self._stub_train(calls), cfg, 0,
                                            [17], ["aa"], seed=0)
        assert params.config.n_layers == 4
        assert calls == [(4, 17, 0)]
        assert len(reports) == 1

    def test_k2_stage_depths(self, tiny_cfg):
        calls = []
        cfg = replace(tiny_cfg, n_layers=8)
        params, reports = progressive_stack(self._stub_train(calls), cfg, 2,
                                            [5, 6, 7], ["aa"], seed=0)
        assert [c[0] for c in calls] == [2, 4, 8]
        assert [r.depth for r in reports] == [2, 4, 8]
        assert params.config.n_layers == 8

    def test_divisibility_contract(self, tiny_cfg):
        cfg = replace(tiny_cfg, n_layers=6)
        with pytest.raises(ContractViolation):
            progressive_stack(self._stub_train([]), cfg, 2, [1, 1, 1], ["aa"], seed=0)
        with pytest.raises(ContractViolation):
            progressive_stack(self._stub_train([]), replace(tiny_cfg, n_layers=8),
                              2, [1, 1], ["aa"], seed=0)
