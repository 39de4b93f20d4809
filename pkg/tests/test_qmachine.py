import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ratchetlab import corpus
from ratchetlab import tolerances as tol
from ratchetlab.equivalence import (
    ergodic_partition,
    forward_epsilon_machine,
    forward_state_channel,
    reverse_epsilon_machine,
)
from ratchetlab.errors import InvalidAlpha, NonConvergence, NotEpsilonMachine, NotReverseEpsilonMachine
from ratchetlab.info import classical_dissipation, shannon_entropy
from ratchetlab.machine import time_reverse, word_probability
from ratchetlab.qmachine import (
    InvariantViolation,
    QMachine,
    build_qmachine,
    build_reverse_qmachine,
    check_forward_efficiency,
    check_reverse_efficiency,
    mcp,
    memory_metrics,
    overlap_residual,
    phase_table,
    quantum_dissipation,
    qword_probability,
    solve_overlaps,
    synchronization_stats,
    validate_qmachine,
)
from ratchetlab.quantum import von_neumann_entropy

H_GM = 0.9182958340544896
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def unifilar(seed, n=3):
    return corpus.random_unifilar(np.random.default_rng(seed), n)


def eps_corpus():
    """Named machines plus the unifilar part of the acceptance corpus."""
    c = corpus.acceptance_corpus()
    out = dict(corpus.named_corpus())
    for i in (10, 12, 14, 16, 18):
        out[f"random_{i}"] = forward_epsilon_machine(c[f"random_{i}"])
    return out


class TestOverlaps:
    def test_diagonal(self, named):
        for m in named.values():
            np.testing.assert_allclose(np.diag(solve_overlaps(m)), 1, atol=1e-12)

    def test_golden_mean(self, gm):
        omega = solve_overlaps(gm)
        assert omega[0, 1] == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        assert overlap_residual(omega, gm) <= 1e-12

    def test_period2(self, p2):
        assert abs(solve_overlaps(p2)[0, 1]) < 1e-15

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.booleans())
    def test_linear_oracle(self, seed, with_phases):
        m = unifilar(seed)
        rng = np.random.default_rng(seed)
        phases = rng.uniform(-np.pi, np.pi, (m.n_symbols, m.n_states)) if with_phases else None
        omega = solve_overlaps(m, phases)
        np.testing.assert_allclose(omega, oracles.overlap_linear(m, phases), atol=1e-9)
        assert overlap_residual(omega, m, phases) <= 1e-12
        assert np.max(np.abs(omega - omega.conj().T)) <= 1e-10
        root = np.sqrt(m.stationary)
        assert np.linalg.eigvalsh(root[:, None] * omega * root[None, :]).min() >= -1e-10

    def test_phases_change_overlap(self, gm):
        # only the shared '0' edges into A couple the states
        assert solve_overlaps(gm, {"1": {"A": np.pi / 2}})[0, 1] == pytest.approx(1 / np.sqrt(2))
        assert solve_overlaps(gm, {"0": {"B": np.pi / 2}})[0, 1] == pytest.approx(1j / np.sqrt(2))

    def test_nonunifilar(self, gm):
        with pytest.raises(NotEpsilonMachine):
            solve_overlaps(time_reverse(gm))

    def test_iteration_cap(self, monkeypatch):
        m = forward_epsilon_machine(corpus.acceptance_corpus()["random_12"])
        monkeypatch.setattr(tol, "OVERLAP_MAX_ITER", 3)
        with pytest.raises(NonConvergence) as info:
            solve_overlaps(m)
        assert info.value.iterations == 3
        assert info.value.residual > 1e-12

    def test_phase_table_validation(self, gm):
        with pytest.raises(ValueError):
            phase_table(gm, np.zeros((3, 2)))
        with pytest.raises(ValueError):
            phase_table(gm, [[np.nan, 0], [0, 0]])


class TestBuild:
    def test_period2(self, p2):
        qm = build_qmachine(p2)
        assert qm.dimension == 2
        np.testing.assert_allclose(np.abs(qm.encodings.conj() @ qm.encodings.T), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(qm.rho, np.eye(2) / 2, atol=1e-12)

    def test_iid(self, iid):
        qm = build_qmachine(iid)
        assert qm.dimension == 1
        np.testing.assert_allclose([abs(k[0, 0]) for k in qm.kraus], [np.sqrt(0.5)] * 2)

    def test_golden_mean(self, gm):
        qm = build_qmachine(gm)
        assert qm.dimension == 2
        assert abs(qm.encodings[0].conj() @ qm.encodings[1]) == pytest.approx(1 / np.sqrt(2))
        np.testing.assert_allclose(qm.rho, np.diag(np.diag(qm.rho)), atol=1e-15)
        # weighted Gram matrix [[2/3, 1/3], [1/3, 1/3]] has eigenvalues (3 +- sqrt 5) / 6
        np.testing.assert_allclose(np.sort(np.diag(qm.rho).real), [(3 - np.sqrt(5)) / 6, (3 + np.sqrt(5)) / 6], atol=1e-12)
        assert von_neumann_entropy(qm.rho) < H_GM

    def test_requires_epsilon_machine(self):
        with pytest.raises(NotEpsilonMachine):
            build_qmachine(corpus.duplicate_iid())

    def test_rank_deficient_compression(self):
        # three states whose encodings are linearly dependent
        m = forward_epsilon_machine(corpus.acceptance_corpus()["random_14"])
        qm = build_qmachine(m)
        assert qm.dimension <= m.n_states
        assert not validate_qmachine(qm)

    def test_tampering_detected(self, gm):
        qm = build_qmachine(gm)
        bad = QMachine(qm.source, qm.phases, qm.encodings, [qm.kraus[0], 1.01 * qm.kraus[1]], qm.rho, "forward", qm.overlap)
        assert "Kraus operators are not complete" in validate_qmachine(bad)


class TestWordProbability:
    def test_examples(self, gm, iid, p2):
        assert qword_probability(build_qmachine(gm), "11") == pytest.approx(0, abs=1e-15)
        q = build_qmachine(iid)
        for w in ["0", "01", "0110"]:
            assert qword_probability(q, w) == pytest.approx(2.0 ** -len(w))
        assert qword_probability(build_qmachine(p2), "0101") == pytest.approx(0.5)

    @pytest.mark.parametrize("name", list(eps_corpus()))
    def test_process_equality(self, name):
        m = eps_corpus()[name]
        qm = build_qmachine(m)
        for L in range(1, 7):
            for w in itertools.product(m.alphabet, repeat=L):
                assert abs(qword_probability(qm, w) - word_probability(m, w)) <= 1e-9

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_phase_covariance(self, seed):
        m = unifilar(seed)
        rng = np.random.default_rng(seed)
        phases = rng.uniform(0, 2 * np.pi, (m.n_symbols, m.n_states))
        em = forward_epsilon_machine(m)
        q0 = build_qmachine(em)
        q1 = build_qmachine(em, phases[:, : em.n_states])
        for w in itertools.product(m.alphabet, repeat=4):
            assert abs(qword_probability(q0, w) - qword_probability(q1, w)) <= 1e-10


class TestDissipation:
    def test_iid_zero(self, iid):
        assert np.max(np.abs(quantum_dissipation(build_qmachine(iid), 4).values)) < 1e-10

    def test_period2_matches_classical(self, p2):
        q = quantum_dissipation(build_qmachine(p2), 6)
        np.testing.assert_allclose(q.values, classical_dissipation(p2, 6).values, atol=1e-10)
        assert np.max(np.abs(q.values)) < 1e-10

    def test_golden_mean_positive(self, gm):
        trace = quantum_dissipation(build_qmachine(gm), 4)
        assert trace.values[3] > 1e-3
        # compression lowers, but does not remove, the dissipation
        assert trace.values[3] < classical_dissipation(gm, 4).values[3]

    @pytest.mark.parametrize("name", list(eps_corpus()))
    def test_dpi(self, name):
        assert quantum_dissipation(build_qmachine(eps_corpus()[name]), 4).min >= -1e-10


class TestMCPAndVerdicts:
    @pytest.mark.parametrize(
        "name, sizes, efficient",
        [("period2", [1, 1], True), ("golden_mean", [2], False), ("iid_coin", [1], True), ("even_process", [1, 1], True)],
    )
    def test_forward(self, named, name, sizes, efficient):
        qm = build_qmachine(named[name])
        assert sorted(len(b) for b in mcp(qm).blocks) == sizes
        v = check_forward_efficiency(qm)
        assert v.efficient is efficient
        assert v.consistent
        assert v.to_json()["merged_counifilar"] is v.merged_condition

    @pytest.mark.parametrize("name, efficient", [("period2", True), ("golden_mean", False), ("iid_coin", True)])
    def test_reverse(self, named, name, efficient):
        qm = build_reverse_qmachine(reverse_epsilon_machine(named[name]))
        v = check_reverse_efficiency(qm)
        assert v.efficient is efficient and v.consistent

    def test_kind_checks(self, gm):
        with pytest.raises(ValueError):
            check_reverse_efficiency(build_qmachine(gm))


class TestReverse:
    def test_period2(self, p2):
        qm = build_reverse_qmachine(p2)
        np.testing.assert_allclose(qm.rho, np.eye(2) / 2, atol=1e-12)
        assert np.max(np.abs(quantum_dissipation(qm, 4).values)) < 1e-10

    def test_iid(self, iid):
        assert build_reverse_qmachine(iid).dimension == 1

    def test_golden_mean(self, gm):
        rev = reverse_epsilon_machine(gm)
        qm = build_reverse_qmachine(rev)
        # hand value: the state receiving both '0' edges carries weight 2/3
        order = np.argsort(-rev.stationary)
        np.testing.assert_allclose(qm.rho[np.ix_(order, order)], [[2 / 3, 1 / 3], [1 / 3, 1 / 3]], atol=1e-12)
        assert von_neumann_entropy(qm.rho) < shannon_entropy(rev.stationary)

    def test_requires_reverse_epsilon_machine(self, gm):
        with pytest.raises(NotReverseEpsilonMachine):
            build_reverse_qmachine(gm)

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_process_and_phases(self, seed):
        rng = np.random.default_rng(seed)
        m = reverse_epsilon_machine(corpus.random_counifilar(rng, 3))
        phases = rng.uniform(0, 2 * np.pi, (m.n_symbols, m.n_states))
        for ph in (None, phases):
            qm = build_reverse_qmachine(m, ph)
            for w in itertools.product(m.alphabet, repeat=4):
                assert abs(qword_probability(qm, w) - word_probability(m, w)) <= 1e-9

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_petz_reversal_of_forward(self, seed):
        # the Petz reversal of the reversed process' forward q-machine is
        # unitarily equivalent to the reverse q-machine: same spectrum, same words
        rng = np.random.default_rng(seed)
        m = reverse_epsilon_machine(corpus.random_counifilar(rng, 3))
        phases = rng.uniform(0, 2 * np.pi, (m.n_symbols, m.n_states))
        rqm = build_reverse_qmachine(m, phases)
        fqm = build_qmachine(time_reverse(m), -phases)
        np.testing.assert_allclose(rqm.spectrum()[: fqm.dimension], fqm.spectrum(), atol=1e-10)
        lam = np.diag(fqm.rho).real
        petz = [np.diag(np.sqrt(lam)) @ k.conj().T @ np.diag(1 / np.sqrt(lam)) for k in fqm.kraus]
        for w in itertools.product(m.alphabet, repeat=3):
            K = np.eye(fqm.dimension)
            for x in w:
                K = petz[m.symbol_index(x)] @ K
            p = np.trace(K @ fqm.rho @ K.conj().T).real
            assert abs(p - qword_probability(rqm, w)) <= 1e-10

    @pytest.mark.parametrize("name", ["golden_mean", "period2", "even_process", "period3"])
    def test_blocks_match_ergodic_partition(self, named, name):
        m = named[name]
        fwd, rev = forward_epsilon_machine(m), reverse_epsilon_machine(m)
        qm = build_reverse_qmachine(rev)
        ch = forward_state_channel(fwd, rev)
        assert mcp(qm).same_as(ergodic_partition(ch, fwd.stationary, rev.stationary))


class TestMemory:
    def test_golden_mean(self, gm):
        classical = memory_metrics(gm)
        quantum = memory_metrics(build_qmachine(gm))
        assert classical["entropy"] == pytest.approx(H_GM)
        assert quantum["entropy"] < classical["entropy"]
        assert quantum["renyi"]["0"] == pytest.approx(1.0)
        assert set(quantum["renyi"]) == {"0", "1", "2", "inf"}

    def test_period2(self, p2):
        assert memory_metrics(p2)["entropy"] == pytest.approx(1.0)
        assert memory_metrics(build_qmachine(p2))["entropy"] == pytest.approx(1.0)

    def test_invalid_alpha(self, gm):
        with pytest.raises(InvalidAlpha):
            memory_metrics(gm, alphas=(-0.5,))

    def test_type(self):
        with pytest.raises(TypeError):
            memory_metrics("not a machine")


class TestSynchronization:
    @pytest.mark.parametrize("name", ["period2", "iid_coin", "period3"])
    def test_trivial(self, named, name):
        stats = synchronization_stats(build_qmachine(named[name]), range(1, 8))
        assert max(stats.low_fidelity_mass) == 0

    def test_golden_mean_monotone(self, gm):
        mass = synchronization_stats(build_qmachine(gm), range(1, 11)).low_fidelity_mass
        assert all(b <= a + 1e-12 for a, b in zip(mass, mass[1:]))

    def test_even_process_not_monotone(self, named):
        # 1^7 leaves both states equally likely (F = 1/2 < 1 - 0.9^7) with probability 1/12
        mass = synchronization_stats(build_qmachine(named["even_process"]), range(6, 9)).low_fidelity_mass
        assert mass == pytest.approx([0.0, 1 / 12, 0.0], abs=1e-12)

    @pytest.mark.parametrize("i", [10, 12, 15, 18])
    def test_fidelity_dominates_classical(self, i):
        # F >= 1 - Q, so the quantum low-fidelity mass never exceeds the classical one
        m = forward_epsilon_machine(corpus.acceptance_corpus()[f"random_{i}"])
        q = synchronization_stats(build_qmachine(m), range(1, 8)).low_fidelity_mass
        c = _classical_mass(m, range(1, 8))
        assert all(a <= b + 1e-12 for a, b in zip(q, c))

    def test_sampling_close_to_exact(self, gm):
        qm = build_qmachine(gm)
        exact = synchronization_stats(qm, [3]).low_fidelity_mass[0]
        sampled = synchronization_stats(qm, [3], samples=4000, seed=1)
        assert sampled.method.startswith("sampling")
        assert sampled.low_fidelity_mass[0] == pytest.approx(exact, abs=0.03)

    def test_reverse_rejected(self, p2):
        with pytest.raises(ValueError):
            synchronization_stats(build_reverse_qmachine(p2))


def _classical_mass(m, t_values, alpha=0.9):
    out = []
    for t in t_values:
        mass = 0.0
        for w in itertools.product(range(m.n_symbols), repeat=t):
            v = m.stationary
            for x in w:
                v = m.transitions[x] @ v
            p = v.sum()
            if p > 1e-15 and v.max() / p < 1 - alpha**t - 1e-12:
                mass += p
        out.append(mass)
    return out


def test_invariant_violation_is_raised(gm, monkeypatch):
    import ratchetlab.qmachine as qmod

    monkeypatch.setattr(qmod, "validate_qmachine", lambda qm: ["forced"])
    with pytest.raises(InvariantViolation, match="forced"):
        qmod.build_qmachine(gm)
