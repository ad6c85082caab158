from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from kgz.coefficients import CoefficientFamily
from kgz.evolution import (NonFiniteStateError, Physics, SchemeConfig, benchmark_physics,
                           benchmark_state, expm_pade13, propagate, propagate_batch,
                           propagate_linear, step)
from kgz.nonlinearity import Nonlinearity
from kgz.operator import mode_block
from kgz.spectral import Domain, State, y0_norm2


def rel_y0(dom, a, b):
    return float(np.sqrt(y0_norm2(dom, a - b) / y0_norm2(dom, b)))


class TestPade:
    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(1e-3, 50))
    def test_against_scipy(self, seed, scale):
        A = np.random.default_rng(seed).standard_normal((4, 4)) * scale / 4
        ref = expm(A)
        got = expm_pade13(A)
        # random non-normal matrices: conditioning limits agreement to ~1e-12 relative
        assert np.max(np.abs(got - ref)) <= 1e-11 * max(1.0, np.max(np.abs(ref)))

    @settings(max_examples=100, deadline=None)
    @given(lam=st.floats(0.5, 4e3), eta=st.floats(0.1, 5), a=st.floats(0, 5), h=st.sampled_from([1e-4, 1e-3, 2.5e-3, 1e-2, 0.1, 1.0]))
    def test_mode_blocks_against_scipy(self, lam, eta, a, h):
        A = -h * mode_block(lam, eta, a)
        ref = expm(A)
        # many squarings at large h * lam cost about a digit
        tol = 1e-12 if h <= 1e-2 else 1e-11
        assert np.max(np.abs(expm_pade13(A) - ref)) <= tol * max(1.0, np.max(np.abs(ref)))

    def test_batched_mixed_scaling(self):
        A = np.stack([np.zeros((4, 4)), -mode_block(1e3, 1.0, 2.0), -0.01 * mode_block(2.0, 1.0, 1.0)])
        got = expm_pade13(A)
        for g, a in zip(got, A):
            np.testing.assert_allclose(g, expm(a), atol=1e-12)


class TestStep:
    def test_zero_is_fixed_point(self):
        dom = Domain(1, 16)
        for f in (Nonlinearity.damped_power(), Nonlinearity.sine(), Nonlinearity.zero()):
            out = step(State.zeros(dom), 0.3, 1e-2, SchemeConfig(1e-2), Physics(1.0, f))
            assert np.all(out.data == 0)

    def test_linear_step_is_exact_exponential(self):
        dom = Domain(1, 1, (np.pi / np.sqrt(3.0),))
        lam = dom.eigenvalues[0]
        ph = Physics(0.7, Nonlinearity.zero(), CoefficientFamily.constant(1.3))
        W = State(dom, [[0.4], [-1.0], [0.2], [0.9]])
        out = step(W, 0.0, 0.05, SchemeConfig(0.05), ph)
        ref = expm(-0.05 * mode_block(lam, 0.7, 1.3)) @ W.data[:, 0]
        np.testing.assert_allclose(out.data[:, 0], ref, atol=1e-12)

    def test_scheme_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(scheme="euler")
        with pytest.raises(ValueError):
            SchemeConfig(dt=0)

    def test_strang_order(self):
        dom = Domain(1, 16)
        W, ph = benchmark_state(dom), benchmark_physics()
        ref = propagate_batch(dom, W.data, 0, 1, SchemeConfig(1e-4, "rk4_monolithic"), ph)
        errs = [rel_y0(dom, propagate_batch(dom, W.data, 0, 1, SchemeConfig(dt), ph), ref)
                for dt in (4e-3, 2e-3, 1e-3)]
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios >= 3.4) & (ratios <= 4.6)), ratios

    def test_overflow_reports_mode(self):
        dom = Domain(1, 4)
        f = Nonlinearity.custom(lambda s: 1e300 * s ** 3, lambda s: 3e300 * s ** 2, lambda s: s ** 4, 2, 1)
        W = State(dom, np.ones((4, 4)))
        with pytest.raises(NonFiniteStateError) as exc:
            with np.errstate(all="ignore"):
                step(W, 0.0, 1.0, SchemeConfig(1.0), Physics(1.0, f))
        assert 1 <= exc.value.mode[0] <= 4


class TestPropagate:
    def test_identity_at_tau(self):
        dom = Domain(1, 8)
        W = benchmark_state(dom)
        tr = propagate(W, 2.0, 2.0, SchemeConfig(), benchmark_physics())
        assert len(tr) == 1 and tr.times[0] == 2.0
        np.testing.assert_array_equal(tr.data[0], W.data)

    def test_sampling_lands_on_t(self):
        dom = Domain(1, 8)
        tr = propagate(benchmark_state(dom), 0.0, 0.0105, SchemeConfig(1e-3), benchmark_physics(), 3)
        assert tr.times[-1] == 0.0105
        assert np.all(np.diff(tr.times) > 0)
        np.testing.assert_allclose(tr.times[:-1], [0, 0.003, 0.006, 0.009], atol=1e-15)
        np.testing.assert_array_equal(tr.data[0], benchmark_state(dom).data)

    def test_exact_multiple_no_duplicate(self):
        dom = Domain(1, 4)
        tr = propagate(benchmark_state(dom), 0.0, 0.01, SchemeConfig(1e-3), benchmark_physics(), 5)
        np.testing.assert_allclose(tr.times, [0, 0.005, 0.01], atol=1e-15)

    @pytest.mark.parametrize("s", [0.4, 0.4375])
    def test_linear_composition(self, s):
        dom = Domain(1, 16)
        W = benchmark_state(dom)
        ph = benchmark_physics().linear()
        cfg = SchemeConfig(1e-3)
        direct = propagate_linear(W, 0.0, 1.0, cfg, ph)
        legs = propagate_linear(propagate_linear(W, 0.0, s, cfg, ph), s, 1.0, cfg, ph)
        assert (legs - direct).y0_norm() <= 5e-10

    def test_nonlinear_composition(self):
        dom = Domain(1, 16)
        W = benchmark_state(dom)
        ph, cfg = benchmark_physics(), SchemeConfig(1e-3)
        direct = propagate_batch(dom, W.data, 0.0, 2.0, cfg, ph)
        mid = propagate_batch(dom, W.data, 0.0, 0.8, cfg, ph)
        legs = propagate_batch(dom, mid, 0.8, 2.0, cfg, ph)
        assert np.sqrt(y0_norm2(dom, legs - direct)) <= 1e-8 * W.y0_norm()

    def test_cross_scheme(self):
        dom = Domain(1, 16)
        W, ph = benchmark_state(dom), benchmark_physics()
        a = propagate_batch(dom, W.data, 0, 1, SchemeConfig(1e-3), ph)
        b = propagate_batch(dom, W.data, 0, 1, SchemeConfig(1e-4, "rk4_monolithic"), ph)
        assert rel_y0(dom, a, b) <= 1e-4

    def test_backwards_rejected(self):
        with pytest.raises(ValueError):
            propagate(benchmark_state(Domain(1, 4)), 1.0, 0.5, SchemeConfig(), benchmark_physics())

    def test_batch_matches_single(self):
        dom = Domain(2, 6)
        rng = np.random.default_rng(3)
        data = rng.standard_normal((3, 4, 6, 6)) * 0.1
        ph = benchmark_physics()
        out = propagate_batch(dom, data, 0, 0.05, SchemeConfig(1e-2), ph)
        one = propagate_batch(dom, data[1], 0, 0.05, SchemeConfig(1e-2), ph)
        np.testing.assert_allclose(out[1], one, atol=1e-14)

    def test_concurrent_calls(self):
        dom = Domain(1, 16)
        ph, cfg = benchmark_physics(), SchemeConfig(1e-3)
        states = [benchmark_state(dom, s) for s in (0.5, 1.0, 1.5, 2.0)]
        seq = [propagate_batch(dom, s.data, 0, 0.3, cfg, ph) for s in states]
        with ThreadPoolExecutor(4) as pool:
            par = list(pool.map(lambda s: propagate_batch(dom, s.data, 0, 0.3, cfg, ph), states))
        for a, b in zip(seq, par):
            np.testing.assert_array_equal(a, b)

    def test_continuity_in_initial_data(self):
        dom = Domain(1, 16)
        W, ph, cfg = benchmark_state(dom), benchmark_physics(), SchemeConfig(1e-3)
        xi = np.random.default_rng(0).standard_normal(W.data.shape)
        xi /= np.sqrt(y0_norm2(dom, xi))
        base = propagate_batch(dom, W.data, 0, 1, cfg, ph)
        kappas = []
        for d in (1e-4, 1e-5, 1e-6):
            pert = propagate_batch(dom, W.data + d * xi, 0, 1, cfg, ph)
            kappas.append(np.sqrt(y0_norm2(dom, pert - base)) / d)
        assert max(kappas) / min(kappas) <= 2.0


class TestLinear:
    def test_zero(self):
        dom = Domain(1, 8)
        out = propagate_linear(State.zeros(dom), 0, 1, SchemeConfig(), benchmark_physics())
        assert np.all(out.data == 0)

    def test_constant_coefficient_exponential(self):
        dom = Domain(1, 1)
        ph = Physics(1.0, Nonlinearity.zero(), CoefficientFamily.constant(2.0))
        W = State(dom, [[1.0], [0.0], [-0.5], [0.3]])
        out = propagate_linear(W, 0.0, 1.0, SchemeConfig(1e-3), ph)
        ref = expm(-mode_block(1.0, 1.0, 2.0)) @ W.data[:, 0]
        np.testing.assert_allclose(out.data[:, 0], ref, atol=1e-10)

    def test_strict_decay(self):
        dom = Domain(1, 16)
        rng = np.random.default_rng(5)
        W = State(dom, rng.standard_normal((4, 16)) * dom.eigenvalues ** -1.5)
        out = propagate_linear(W, 0.0, 20.0, SchemeConfig(1e-2), benchmark_physics())
        assert out.y0_norm2() < W.y0_norm2()
