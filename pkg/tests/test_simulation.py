import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchsynth.certificates import SubsystemCertificate
from switchsynth.graph import SwitchingSignal, build_graph
from switchsynth.simulation import (
    SimulationDiverged,
    check_convergence,
    product_form,
    simulate,
    verify_envelope,
)
from switchsynth.synthesis import synthesize
from switchsynth.system import SwitchedSystem

FIVE_MODE_SIGNAL = SwitchingSignal(period=(1, 2, 1, 3, 2, 3))


def random_system(seed, n=3, d=3):
    rng = np.random.default_rng(seed)
    mats = {}
    for j in range(n):
        A = rng.normal(size=(d, d))
        mats[j] = A * rng.uniform(0.3, 1.5) / np.max(np.abs(np.linalg.eigvals(A)))
    edges = [(k, l) for k in range(n) for l in range(n)]
    seq = [int(v) for v in rng.integers(0, n, size=40)]
    return SwitchedSystem.from_matrices(mats, edges), seq


class TestSimulate:
    def test_scalar_decay(self):
        s = SwitchedSystem.from_matrices({0: 0.5 * np.eye(2)}, [(0, 0)])
        tr = simulate(s, SwitchingSignal.constant(0), [1.0, 0.0], 10)
        np.testing.assert_allclose(tr.states[:, 0], 0.5 ** np.arange(11))
        np.testing.assert_array_equal(tr.states[:, 1], 0)
        assert tr.T == 10

    def test_eigenvector_growth(self, five_modes):
        tr = simulate(five_modes, SwitchingSignal.constant(5), [1.0, 1.0], 5)
        for t in range(6):
            np.testing.assert_allclose(tr.states[t], 1.1**t * np.ones(2), rtol=1e-14)

    def test_records_bounds(self, five_modes):
        tr = simulate(five_modes, FIVE_MODE_SIGNAL, [1.0, 2.0], 12)
        assert tr.lyap.shape == (13,) and tr.envelope.shape == (13,)
        assert tr.modes == FIVE_MODE_SIGNAL.prefix(12)

    def test_override_has_no_bounds(self, five_modes):
        s = SwitchedSystem(five_modes.graph, five_modes.subsystems, gains_override=five_modes.gains)
        tr = simulate(s, FIVE_MODE_SIGNAL, [1.0, 2.0], 6)
        assert tr.lyap is None and tr.envelope is None

    def test_rejects_unknown_mode(self, five_modes):
        with pytest.raises(ValueError, match="t=3"):
            simulate(five_modes, [1, 2, 1, 9, 1], [1.0, 0.0], 4)

    def test_rejects_bad_input(self, five_modes):
        with pytest.raises(ValueError):
            simulate(five_modes, FIVE_MODE_SIGNAL, [1.0, 0.0, 0.0], 4)
        with pytest.raises(ValueError):
            simulate(five_modes, FIVE_MODE_SIGNAL, [1.0, 0.0], -1)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_guard(self):
        s = SwitchedSystem.from_matrices({0: [[1e100]]}, [(0, 0)])
        with pytest.raises(SimulationDiverged, match="t=4"):
            simulate(s, SwitchingSignal.constant(0), [1.0], 10)

    def test_zero_state(self, five_modes):
        tr = simulate(five_modes, FIVE_MODE_SIGNAL, [0.0, 0.0], 20)
        assert not tr.states.any()
        assert check_convergence(tr, 5, 1e-3)


class TestConvergence:
    def test_synthesized_signal(self, five_modes):
        sig = synthesize(five_modes).signal
        tr = simulate(five_modes, sig, [-1000.0, 1000.0], 120)
        assert check_convergence(tr, 60, 1e-3)

    def test_unstable_mode(self, five_modes):
        tr = simulate(five_modes, SwitchingSignal.constant(4), [0.3, -0.2], 20)
        assert not check_convergence(tr, 10, 1e-3)

    def test_bad_window(self, five_modes):
        tr = simulate(five_modes, FIVE_MODE_SIGNAL, [1.0, 1.0], 3)
        with pytest.raises(ValueError):
            check_convergence(tr, 0, 0.1)


class TestEnvelope:
    @pytest.mark.parametrize("x0", [(-1000.0, 1000.0), (1200.0, -500.0)])
    def test_holds_on_synthesized_signal(self, five_modes, x0):
        sig = synthesize(five_modes).signal
        tr = simulate(five_modes, sig, x0, 120)
        chk = verify_envelope(tr, five_modes.certificates, five_modes.gains)
        assert chk.ok and chk.lyap_ok and chk.norm_ok
        assert chk.max_violation <= 1e-6

    def test_constant_stable_mode(self):
        s = SwitchedSystem.from_matrices({1: [[0.4, 0.8], [-0.7, 0.6]]}, [(1, 1)])
        c = s.certificates[1]
        tr = simulate(s, SwitchingSignal.constant(1), [3.0, -1.0], 40)
        assert verify_envelope(tr, s.certificates, s.gains).ok
        # the bound reduces to V(x(t)) <= lam^t V(x0)
        np.testing.assert_allclose(tr.envelope[-1] / tr.envelope[0], c.lam**20, rtol=1e-9)
        assert np.all(tr.lyap <= c.lam ** np.arange(41) * tr.lyap[0] * (1 + 1e-9))

    def test_corrupted_rate_detected(self, five_modes):
        certs = dict(five_modes.certificates)
        c = certs[4]
        certs[4] = SubsystemCertificate(c.id, c.P, c.lam / 2, c.cls)
        gains = type(five_modes.gains)(
            five_modes.gains.log_mu, {**five_modes.gains.log_lambda, 4: float(np.log(c.lam / 2))}
        )
        tr = simulate(five_modes, SwitchingSignal.constant(4), [0.6, 0.8], 10)
        chk = verify_envelope(tr, certs, gains)
        assert not chk.ok
        assert chk.max_violation > 1e-6


class TestInvariants:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_product_form(self, seed):
        s, seq = random_system(seed)
        x0 = np.random.default_rng(seed).normal(size=3)
        T = len(seq) - 1
        tr = simulate(s, seq, x0, T)
        ref = product_form(s, seq, x0, T)
        scale = max(np.linalg.norm(ref), 1e-300)
        assert np.linalg.norm(tr.states[-1] - ref) <= 1e-10 * scale

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_lyapunov_chain(self, seed):
        s, seq = random_system(seed)
        certs = s.certificates
        mu = s.gains.mu
        x0 = np.random.default_rng(seed).normal(size=3)
        tr = simulate(s, seq, x0, len(seq) - 1)
        for t in range(tr.T):
            k, l = seq[t], seq[t + 1]
            x, y = tr.states[t], tr.states[t + 1]
            # one step inside mode k, then a possible switch to l
            assert certs[k].V(y) <= certs[k].lam * certs[k].V(x) * (1 + 1e-9) + 1e-300
            if k != l:
                assert certs[l].V(y) <= mu[(k, l)] * certs[k].V(y) * (1 + 1e-9) + 1e-300

    @given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-3))
    @settings(max_examples=50, deadline=None)
    def test_scaling_equivariance(self, seed, alpha):
        s, seq = random_system(seed)
        x0 = np.random.default_rng(seed).normal(size=3)
        T = len(seq) - 1
        a = simulate(s, seq, x0, T, with_bounds=False)
        b = simulate(s, seq, alpha * x0, T, with_bounds=False)
        err = np.linalg.norm(b.states - alpha * a.states, axis=1)
        assert np.all(err <= 1e-12 * np.linalg.norm(alpha * a.states, axis=1))

    def test_product_form_groups_runs(self):
        s = SwitchedSystem.from_matrices({0: [[2.0]], 1: [[0.5]]}, [(0, 0), (0, 1), (1, 0), (1, 1)])
        assert product_form(s, [0, 0, 0, 1, 1, 0], [1.0], 5)[0] == pytest.approx(8 * 0.25)


def test_graph_not_consulted_by_simulate():
    # admissibility is the caller's job; simulate only needs matrices
    s = SwitchedSystem(build_graph([0, 1], [(0, 1)]), SwitchedSystem.from_matrices({0: [[1.0]], 1: [[2.0]]}, []).subsystems)
    assert simulate(s, [1, 1, 0], [1.0], 2, with_bounds=False).states[-1][0] == 4.0
