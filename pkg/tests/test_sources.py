"""Tests for coded_gossip.sources module."""

import json

import numpy as np
import pytest

from coded_gossip import sources
from coded_gossip.errors import ConfigError, KTooLarge, TooLarge
from coded_gossip.sources import (
    JointSource,
    binary_entropy,
    build_source,
    cond_entropy,
    decode_threshold,
    deterministic,
    dsbs,
    entropy,
    entropy_pmf,
    independent_uniform,
    joint_entropy,
    load_source,
    sample_iid,
    subset_thresholds,
    sw_sufficient,
    symmetric_bits,
)

H_011 = 0.4999157


# ---------------------------------------------------------------------------
# Entropy helpers
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestEntropyPmf:
    def test_uniform(self):
        assert entropy_pmf(np.full(8, 1 / 8)) == pytest.approx(3.0)

    def test_point_mass(self):
        assert entropy_pmf(np.array([0.0, 1.0, 0.0])) == 0.0

    def test_multi_dimensional(self):
        assert entropy_pmf(np.full((2, 2), 0.25)) == pytest.approx(2.0)

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.11) == pytest.approx(H_011, abs=1e-6)


# ---------------------------------------------------------------------------
# JointSource
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestJointSource:
    def test_factored_properties(self):
        source = independent_uniform(3, 4, alphabet=3)
        assert source.k == 3
        assert source.node_count == 4
        assert source.factored
        assert source.side_alphabets == (1, 1, 1, 1)

    def test_dense_and_factored_agree(self):
        factored = independent_uniform(1, 2, side_info=[0.11, None])
        dense_table = factored.msg_pmf[:, None, None] * factored.channels[0][:, :, None]
        dense = JointSource([2], [2, 1], pmf=dense_table)
        assert not dense.factored
        for v in (None, 0, 1):
            assert joint_entropy(dense, None, v) == pytest.approx(joint_entropy(factored, None, v))
        assert np.allclose(dense.message_pmf(), [0.5, 0.5])

    def test_pmf_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sums to"):
            JointSource([2], [1], pmf=np.array([[0.5], [0.4]]))

    def test_negative_entries(self):
        with pytest.raises(ValueError, match="negative"):
            JointSource([2], [1], pmf=np.array([[1.5], [-0.5]]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            JointSource([3], [1], pmf=np.array([[0.5], [0.5]]))

    def test_dense_guard(self):
        with pytest.raises(TooLarge):
            JointSource([2] * 25, [1], pmf=np.zeros(1))

    def test_factored_needs_channels(self):
        with pytest.raises(ValueError):
            JointSource([2], [1], msg_pmf=np.array([0.5, 0.5]))

    def test_joint_with_unknown_node(self):
        with pytest.raises(ValueError):
            independent_uniform(1, 2).joint_with(5)

    def test_repr(self):
        assert repr(dsbs(0.1, 3)) == "JointSource(dsbs, k=1, n=3, alphabets=(2,))"


# ---------------------------------------------------------------------------
# Entropy queries
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestEntropyQueries:
    def test_independent_uniform(self):
        source = independent_uniform(3, 2, alphabet=4)
        assert entropy(source) == pytest.approx(6.0)
        assert entropy(source, [1]) == pytest.approx(2.0)
        assert cond_entropy(source, [0, 2], 1) == pytest.approx(4.0)

    def test_dsbs_side_information(self):
        source = dsbs(0.11, 2)
        assert cond_entropy(source, None, 0) == pytest.approx(H_011, abs=1e-6)
        assert cond_entropy(source, None, None) == pytest.approx(1.0)

    def test_perfect_side_information(self):
        assert cond_entropy(dsbs(0.0, 1), None, 0) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_bits_extremes(self):
        assert entropy(symmetric_bits(3, 0.0, 1)) == pytest.approx(1.0)
        assert entropy(symmetric_bits(3, 0.5, 1)) == pytest.approx(3.0)
        assert cond_entropy(symmetric_bits(3, 0.0, 1), [0], None) == pytest.approx(0.0, abs=1e-12)

    def test_empty_set(self):
        assert cond_entropy(independent_uniform(2, 1), [], None) == 0.0

    def test_chain_rule(self):
        source = symmetric_bits(3, 0.2, 2, side_info=[0.1])
        total = cond_entropy(source, None, 0)
        h_side = entropy_pmf(source.joint_with(0).sum(axis=(0, 1, 2)))
        h_rest = joint_entropy(source, [1, 2], 0) - h_side
        h_first = cond_entropy(source, [0], 0)
        assert total == pytest.approx(h_first + h_rest)

    def test_conditioning_reduces_entropy(self):
        source = symmetric_bits(3, 0.2, 2, side_info=[0.1, None])
        assert cond_entropy(source, [0], 0) <= cond_entropy(source, [0], 1) + 1e-12

    def test_out_of_range_message(self):
        with pytest.raises(ValueError):
            entropy(independent_uniform(2, 1), [2])


@pytest.mark.unit
class TestSwSufficient:
    def test_independent(self):
        source = independent_uniform(2, 1)
        assert sw_sufficient(source, None, [1, 1])
        assert not sw_sufficient(source, None, [0.9, 1])

    def test_identical_messages_share_rate(self):
        source = symmetric_bits(2, 0.0, 1)
        assert sw_sufficient(source, None, [0.5, 0.5])
        assert sw_sufficient(source, None, [1.0, 0.0])
        assert not sw_sufficient(source, None, [0.4, 0.5])

    def test_side_information_lowers_the_region(self):
        source = dsbs(0.11, 1)
        assert sw_sufficient(source, 0, [0.5])
        assert not sw_sufficient(source, None, [0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sw_sufficient(independent_uniform(2, 1), None, [1])

    def test_negative_capacity(self):
        with pytest.raises(ValueError):
            sw_sufficient(independent_uniform(1, 1), None, [-1])

    def test_k_guard(self):
        source = deterministic(21, 1)
        with pytest.raises(KTooLarge):
            sw_sufficient(source, None, [1] * 21)


@pytest.mark.unit
class TestDecodeThreshold:
    def test_independent_bits(self):
        # (10 / 10) * (3 + 3 * 0.1) = 3.3
        assert decode_threshold(independent_uniform(3, 1), None, 10, 10, 0.1) == 4

    def test_float_tolerance(self):
        # (10 / 1) * (1 + 0.1) = 11 exactly in reals
        assert decode_threshold(independent_uniform(1, 1), None, 10, 1, 0.1) == 11

    def test_dsbs_side_information(self):
        # (100 / 10) * (0.49992 + 0.1) = 5.9992
        assert decode_threshold(dsbs(0.11, 1), 0, 100, 10, 0.1) == 6

    def test_deterministic_source_needs_nothing(self):
        assert decode_threshold(deterministic(4, 2), 1, 50, 4, 0.1) == 0

    def test_max_rank_clamp(self):
        assert decode_threshold(independent_uniform(3, 1), None, 100, 1, 0.5, max_rank=30) == 30

    def test_invalid_s(self):
        with pytest.raises(ValueError):
            decode_threshold(independent_uniform(1, 1), None, 10, 0, 0.1)


@pytest.mark.unit
class TestSubsetThresholds:
    def test_independent_bits(self):
        needs = subset_thresholds(independent_uniform(2, 1), None, 10, 10, 0.1)
        assert list(needs) == [(0, 1), (0,), (1,)]
        assert needs == {(0, 1): 3, (0,): 2, (1,): 2}

    def test_full_set_matches_decode_threshold(self):
        source = symmetric_bits(3, 0.1, 1)
        needs = subset_thresholds(source, None, 100, 10, 0.1)
        assert needs[(0, 1, 2)] == decode_threshold(source, None, 100, 10, 0.1) == 26
        # H(X_2 | X_0, X_1) ~ 0.589
        assert needs[(2,)] == 7

    def test_column_clamp(self):
        needs = subset_thresholds(independent_uniform(2, 1), None, 10, 10, 0.1, [1, 1])
        assert needs == {(0, 1): 2, (0,): 1, (1,): 1}

    def test_identical_messages_need_only_the_sum(self):
        # H(X_0 | X_1) = 0: single messages need nothing once the other is known
        needs = subset_thresholds(symmetric_bits(2, 0.0, 1), None, 10, 10, 0.1)
        assert needs == {(0, 1): 2}

    def test_deterministic_source_needs_nothing(self):
        assert subset_thresholds(deterministic(3, 1), None, 50, 4, 0.1) == {}

    def test_side_information(self):
        assert subset_thresholds(dsbs(0.11, 1), 0, 100, 10, 0.1) == {(0,): 6}

    def test_k_guard(self):
        with pytest.raises(KTooLarge):
            subset_thresholds(deterministic(21, 1), None, 10, 10, 0.1)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestSampleIid:
    def test_shapes(self, rng):
        batch = sample_iid(independent_uniform(3, 5, side_info=[0.2]), 40, rng)
        assert batch.x.shape == (3, 40)
        assert batch.y.shape == (5, 40)

    def test_noiseless_side_information_copies_x0(self, rng):
        batch = sample_iid(dsbs(0.0, 3), 200, rng)
        for v in range(3):
            assert np.array_equal(batch.y[v], batch.x[0])

    def test_crossover_rate(self, rng):
        batch = sample_iid(dsbs(0.25, 1), 20000, rng)
        assert np.mean(batch.y[0] != batch.x[0]) == pytest.approx(0.25, abs=0.015)

    def test_identical_messages(self, rng):
        batch = sample_iid(symmetric_bits(4, 0.0, 1), 100, rng)
        assert np.all(batch.x == batch.x[0])

    def test_deterministic(self, rng):
        batch = sample_iid(deterministic(2, 1, value=1), 30, rng)
        assert np.all(batch.x == 1)
        assert np.all(batch.y == 0)

    def test_dense_sampling_frequencies(self, rng):
        table = np.array([[0.1], [0.9]])
        batch = sample_iid(JointSource([2], [1], pmf=table), 20000, rng)
        assert np.mean(batch.x[0]) == pytest.approx(0.9, abs=0.01)

    def test_reproducible(self):
        source = symmetric_bits(3, 0.2, 2, side_info=[0.1])
        a = sample_iid(source, 50, np.random.default_rng(4))
        b = sample_iid(source, 50, np.random.default_rng(4))
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.y, b.y)

    def test_rejects_empty_block(self, rng):
        with pytest.raises(ValueError):
            sample_iid(independent_uniform(1, 1), 0, rng)


# ---------------------------------------------------------------------------
# Families and loading
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestSideInfo:
    def test_mapping(self):
        source = independent_uniform(1, 3, side_info={2: 0.1})
        assert source.side_alphabets == (1, 1, 2)

    def test_list_is_cyclic(self):
        source = independent_uniform(1, 4, side_info=[0.1, None])
        assert source.side_alphabets == (2, 1, 2, 1)

    def test_dsbs_default_gives_every_node(self):
        assert dsbs(0.1, 3).side_alphabets == (2, 2, 2)

    def test_unknown_node(self):
        with pytest.raises(ValueError):
            independent_uniform(1, 2, side_info={5: 0.1})

    def test_bad_crossover(self):
        with pytest.raises(ValueError):
            independent_uniform(1, 2, side_info=[1.5])


@pytest.mark.unit
class TestLoadSource:
    def test_dense_file(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text(
            json.dumps({"messages": [2], "side": [2, 1], "pmf": [[[0.4], [0.1]], [[0.1], [0.4]]]})
        )
        source = load_source(str(path), 2)
        assert source.name == "dense"
        assert cond_entropy(source, None, 0) == pytest.approx(binary_entropy(0.2))

    def test_dense_without_side(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text(json.dumps({"messages": [2], "pmf": [[[0.5]], [[0.5]]]}))
        assert load_source(str(path), 2).side_alphabets == (1, 1)

    def test_family_file(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text(json.dumps({"family": "dsbs", "params": {"crossover": 0.11}}))
        source = load_source(str(path), 3)
        assert source.name == "dsbs"
        assert source.node_count == 3

    def test_invalid_json_names_position(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text('{"messages": [2],\n  "pmf": oops}')
        with pytest.raises(ConfigError, match=":2:"):
            load_source(str(path), 1)

    def test_side_length_mismatch(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text(json.dumps({"messages": [2], "side": [1], "pmf": [[0.5], [0.5]]}))
        with pytest.raises(ConfigError, match="side"):
            load_source(str(path), 2)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "source.json"
        path.write_text(json.dumps({"messages": [2]}))
        with pytest.raises(ConfigError, match="pmf"):
            load_source(str(path), 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_source(str(tmp_path / "absent.json"), 1)


@pytest.mark.unit
class TestBuildSource:
    @pytest.mark.parametrize(
        "config,k",
        [
            ({"family": "independent_uniform", "k": 3}, 3),
            ({"family": "dsbs", "crossover": 0.2}, 1),
            ({"family": "symmetric_bits", "k": 4, "correlation": 0.1}, 4),
            ({"family": "deterministic", "k": 2}, 2),
        ],
    )
    def test_families(self, config, k):
        source = build_source(config, 3)
        assert source.k == k
        assert source.node_count == 3

    def test_dense_needs_file(self):
        with pytest.raises(ConfigError, match="source.file"):
            build_source({"family": "dense"}, 2)

    def test_unknown_family(self):
        with pytest.raises(ConfigError, match="Unknown source family"):
            build_source({"family": "gaussian"}, 2)

    def test_invalid_parameter(self):
        with pytest.raises(ConfigError):
            build_source({"family": "symmetric_bits", "k": 2, "correlation": 3.0}, 2)

    def test_missing_dense_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            build_source({"family": "dense", "file": str(tmp_path / "x.json")}, 2)

    def test_constants(self):
        assert sources.SUBSET_GUARD_K == 20
