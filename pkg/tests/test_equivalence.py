import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratchetlab import corpus
from ratchetlab.equivalence import (
    Partition,
    StateChannel,
    ergodic_partition,
    forward_epsilon_machine,
    forward_state_channel,
    is_forward_epsilon_machine,
    is_mergeable,
    is_reverse_epsilon_machine,
    merge,
    predictive_partition,
    process_distance,
    retrodictive_partition,
    reverse_epsilon_machine,
)
from ratchetlab.errors import BeliefCapExceeded, InvalidPartition
from ratchetlab.info import shannon_entropy
from ratchetlab.machine import Machine, is_counifilar, is_unifilar, time_reverse, validate, word_probability

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_machine(seed):
    rng = np.random.default_rng(seed)
    return corpus.random_machine(rng, int(rng.integers(2, 5)))


def blocks(p: Partition):
    return p.canonical()


def fs(*bs):
    return frozenset(frozenset(b) for b in bs)


class TestPartition:
    def test_overlapping_blocks(self):
        with pytest.raises(InvalidPartition):
            Partition((("A", "B"), ("B",)))

    def test_from_labels(self):
        p = Partition.from_labels(["A", "B", "C"], [1, 0, 1])
        assert p.blocks == (("A", "C"), ("B",))
        assert p.block_of == {"A": 0, "C": 0, "B": 1}
        assert p.block_labels() == ["A+C", "B"]


class TestPartitions:
    @pytest.mark.parametrize("name", ["golden_mean", "period2", "period3", "even_process"])
    def test_named_singletons(self, named, name):
        m = named[name]
        assert retrodictive_partition(m).is_trivial()
        assert predictive_partition(m).is_trivial()

    def test_duplicate_states_share_block(self):
        m = corpus.duplicate_iid(0.3, 0.4)
        assert blocks(retrodictive_partition(m)) == fs("AB")
        assert blocks(predictive_partition(m)) == fs("AB")

    def test_cloned_state(self, gm):
        # split B into B1, B2 with identical futures and pasts
        m = Machine.from_edges(
            ["A", "B1", "B2"],
            ["0", "1"],
            [("A", "0", "A", 0.5), ("A", "1", "B1", 0.2), ("A", "1", "B2", 0.3), ("B1", "0", "A", 1.0), ("B2", "0", "A", 1.0)],
        )
        assert blocks(retrodictive_partition(m)) == fs("A", ["B1", "B2"])
        assert blocks(predictive_partition(m)) == fs("A", ["B1", "B2"])
        merged = merge(m, predictive_partition(m))
        assert process_distance(merged, gm) < 1e-12

    def test_predictive_only(self):
        # both states predict identically but are reached by different symbols
        m = Machine.from_edges(
            ["A", "B"], ["0", "1"], [("A", "0", "A", 0.25), ("A", "1", "B", 0.75), ("B", "0", "A", 0.25), ("B", "1", "B", 0.75)]
        )
        assert blocks(predictive_partition(m)) == fs("AB")
        assert retrodictive_partition(m).is_trivial()

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_duality(self, seed):
        m = random_machine(seed)
        assert retrodictive_partition(m).same_as(predictive_partition(time_reverse(m)))

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_retrodictive_mergeable(self, seed):
        m = random_machine(seed)
        assert is_mergeable(m, retrodictive_partition(m), 8)
        assert is_mergeable(m, predictive_partition(m), 8)


class TestMerge:
    def test_singletons_identity(self, gm):
        assert merge(gm, Partition.singletons(gm.states)).allclose(gm)

    def test_duplicate_pair(self):
        m = corpus.duplicate_iid(0.3, 0.4)
        merged = merge(m, Partition((("A", "B"),)))
        assert merged.n_states == 1
        assert merged.transitions[:, 0, 0] == pytest.approx([0.3, 0.7])

    def test_golden_mean_coarse(self, gm):
        merged = merge(gm, Partition((("A", "B"),)))
        # pi-weighted average of (1/2, 1/2) and (1, 0)
        np.testing.assert_allclose(merged.transitions[:, 0, 0], [2 / 3, 1 / 3], atol=1e-12)
        assert word_probability(merged, "11") == pytest.approx(1 / 9)
        assert not is_mergeable(gm, Partition((("A", "B"),)), 8)

    @pytest.mark.parametrize("max_len", [1, 4, 8])
    def test_singletons_mergeable(self, gm, max_len):
        assert is_mergeable(gm, Partition.singletons(gm.states), max_len)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_merge_aggregates_stationary(self, seed):
        m = random_machine(seed)
        p = retrodictive_partition(m)
        merged = merge(m, p)
        assert validate(merged).valid
        agg = [sum(m.stationary[m.state_index(s)] for s in b) for b in p.blocks]
        np.testing.assert_allclose(merged.stationary, agg, atol=1e-10)


class TestEpsilonMachines:
    def test_golden_mean_fixed(self, gm):
        assert forward_epsilon_machine(gm).allclose(gm)

    def test_duplicate_iid(self):
        em = forward_epsilon_machine(corpus.duplicate_iid(0.3, 0.4))
        assert em.n_states == 1
        assert em.transitions[:, 0, 0] == pytest.approx([0.3, 0.7])

    def test_reversed_golden_mean(self, gm):
        r = time_reverse(gm)
        assert not is_unifilar(r)
        em = forward_epsilon_machine(r)
        assert em.n_states == 2 and is_unifilar(em)
        assert process_distance(em, r, 8) < 1e-12

    @pytest.mark.parametrize("name", ["period2", "iid_coin"])
    def test_reverse_fixed(self, named, name):
        m = named[name]
        assert reverse_epsilon_machine(m).n_states == m.n_states
        assert process_distance(reverse_epsilon_machine(m), m) < 1e-12

    def test_reverse_golden_mean(self, gm):
        r = reverse_epsilon_machine(gm)
        assert r.n_states == 2
        assert is_counifilar(r) and is_reverse_epsilon_machine(r)
        assert process_distance(r, gm, 8) < 1e-12

    def test_belief_cap(self):
        m = corpus.acceptance_corpus()["random_01"]
        with pytest.raises(BeliefCapExceeded):
            forward_epsilon_machine(m, belief_cap=64)

    @pytest.mark.parametrize("i", range(10, 20))
    def test_unifilar_corpus(self, i):
        m = corpus.acceptance_corpus()[f"random_{i:02d}"]
        em = forward_epsilon_machine(m)
        assert is_forward_epsilon_machine(em)
        assert em.n_states <= m.n_states
        assert shannon_entropy(em.stationary) <= shannon_entropy(m.stationary) + 1e-12
        assert process_distance(em, m, 8) <= 1e-9

    @pytest.mark.parametrize("i", range(10))
    def test_counifilar_corpus(self, i):
        m = corpus.acceptance_corpus()[f"counifilar_{i:02d}"]
        rem = reverse_epsilon_machine(m)
        assert is_counifilar(rem) and retrodictive_partition(rem).is_trivial()
        assert process_distance(rem, m, 8) <= 1e-9


class TestChannel:
    def test_period2(self, p2):
        ch = forward_state_channel(p2, reverse_epsilon_machine(p2))
        assert ch.disagreement == 0
        assert set(np.round(ch.matrix.ravel(), 12)) <= {0.0, 1.0}
        assert ergodic_partition(ch, p2.stationary, p2.stationary).is_trivial()

    def test_iid(self, iid):
        ch = forward_state_channel(iid, iid)
        assert ch.matrix.shape == (1, 1)
        assert ch.matrix[0, 0] == pytest.approx(1)

    def test_golden_mean(self, gm):
        rev = reverse_epsilon_machine(gm)
        ch = forward_state_channel(gm, rev, horizon=12)
        assert ch.disagreement < 1e-6
        np.testing.assert_allclose(ch.matrix.sum(axis=0), 1, atol=1e-10)
        # Pr(S_rev | S_fwd) reproduces the reverse stationary distribution
        np.testing.assert_allclose(ch.matrix @ gm.stationary, rev.stationary, atol=1e-9)
        assert len(ergodic_partition(ch, gm.stationary, rev.stationary)) == 1

    def test_mismatched_processes(self, gm, p2):
        with pytest.raises(ValueError):
            forward_state_channel(gm, p2)

    def test_ergodic_examples(self):
        inj = StateChannel(("p", "q"), ("s1", "s2"), np.eye(2), 0.0, 0.0)
        assert ergodic_partition(inj, [0.5, 0.5], [0.5, 0.5]).is_trivial()
        const = StateChannel(("p", "q"), ("s1", "s2"), np.full((2, 2), 0.5), 0.0, 0.0)
        assert blocks(ergodic_partition(const, [0.5, 0.5], [0.5, 0.5])) == fs(["s1", "s2"])


def test_process_distance_word_oracle(gm):
    r = reverse_epsilon_machine(gm)
    worst = max(abs(word_probability(r, w) - word_probability(gm, w)) for w in itertools.product("01", repeat=6))
    assert worst < 1e-12
