import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgz.attractor import (Cloud, PullbackSchedule, estimate_attractor, hausdorff_semidistance,
                           pullback_image, regularity_audit, sample_ball, semicontinuity_sweep,
                           worker_count)
from kgz.coefficients import CoefficientFamily
from kgz.energy import fit_exponential
from kgz.evolution import Physics, SchemeConfig
from kgz.nonlinearity import Nonlinearity
from kgz.spectral import Domain, State, y0_weights

DOM = Domain(1, 8)
FAST = SchemeConfig(1e-2)
DECAY = Physics(2.0, Nonlinearity.zero(), CoefficientFamily.sinusoidal(0.5, 0.25), 0.25)


def naive_semidistance(A, B, weights):
    best = 0.0
    for a in A.data:
        near = np.inf
        for b in B.data:
            near = min(near, float(np.sqrt(np.sum(weights * (a - b) ** 2))))
        best = max(best, near)
    return best


class TestSampleBall:
    def test_inside_ball(self):
        c = sample_ball(DOM, 2.5, 200, 1.5, 3)
        assert len(c) == 200
        assert np.all(c.y0_norms() <= 2.5)

    def test_zero_radius(self):
        c = sample_ball(DOM, 0.0, 1)
        assert np.all(c.data == 0)

    def test_deterministic(self):
        a, b = sample_ball(DOM, 1.0, 10, seed=9), sample_ball(DOM, 1.0, 10, seed=9)
        assert a.data.tobytes() == b.data.tobytes()
        assert sample_ball(DOM, 1.0, 10, seed=10).data.tobytes() != a.data.tobytes()

    def test_finite_regular_norm(self):
        assert np.all(np.isfinite(sample_ball(Domain(2, 6), 1.0, 5).reg_norms()))


class TestCloud:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Cloud(DOM, np.zeros((0, 4, 8)))
        with pytest.raises(ValueError):
            Cloud.from_states([])

    def test_mixed_domains(self):
        with pytest.raises(ValueError):
            Cloud.from_states([State.zeros(DOM), State.zeros(Domain(1, 8, (2.0,)))])


class TestHausdorff:
    def test_self(self):
        c = sample_ball(DOM, 1.0, 12)
        assert hausdorff_semidistance(c, c) == 0.0

    def test_asymmetry(self):
        dom = Domain(1, 1)
        e1 = State(dom, [[1.0], [0.0], [0.0], [0.0]])
        A = Cloud.from_states([State.zeros(dom), e1])
        B = Cloud.from_states([State.zeros(dom)])
        assert hausdorff_semidistance(A, B) == pytest.approx(e1.y0_norm())
        assert hausdorff_semidistance(B, A) == 0.0

    @pytest.mark.parametrize("metric", ["y0", "regular"])
    def test_against_naive_loop(self, metric):
        A, B = sample_ball(DOM, 1.0, 17, seed=1), sample_ball(DOM, 1.0, 23, seed=2)
        w = y0_weights(DOM) if metric == "y0" else y0_weights(DOM) * DOM.eigenvalues
        assert hausdorff_semidistance(A, B, metric) == pytest.approx(naive_semidistance(A, B, w), abs=1e-12)

    def test_threaded_matches_serial(self):
        A, B = sample_ball(DOM, 1.0, 70, seed=1), sample_ball(DOM, 1.0, 30, seed=2)
        assert hausdorff_semidistance(A, B, threads=4) == hausdorff_semidistance(A, B, threads=1)

    def test_domain_mismatch(self):
        with pytest.raises(ValueError):
            hausdorff_semidistance(sample_ball(DOM, 1, 2), sample_ball(Domain(1, 4), 1, 2))

    def test_unknown_metric(self):
        c = sample_ball(DOM, 1, 2)
        with pytest.raises(ValueError):
            hausdorff_semidistance(c, c, "sup")

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), shift=st.one_of(st.floats(0, 1e-14), st.floats(1e-10, 1e-6)))
    def test_zero_iff_contained(self, seed, shift):
        B = sample_ball(DOM, 1.0, 6, seed=seed)
        A = Cloud(DOM, B.data[:3] + shift)
        d = hausdorff_semidistance(A, B)
        contained = naive_semidistance(A, B, y0_weights(DOM)) <= 1e-12
        assert (d <= 1e-12) == contained
        assert contained == (shift <= 1e-14)


class TestPullback:
    def test_zero_window_is_identity(self):
        B = sample_ball(DOM, 1.0, 5)
        np.testing.assert_array_equal(pullback_image(B, 3.0, 0.0, DECAY, FAST).data, B.data)

    def test_cardinality_and_shrinking(self):
        B = sample_ball(DOM, 1.0, 9)
        norms = [pullback_image(B, 0.0, T, DECAY, FAST).y0_norms().max() for T in (2, 5, 10)]
        assert len(pullback_image(B, 0.0, 2, DECAY, FAST)) == 9
        assert norms[0] > norms[1] > norms[2]

    def test_half_windows_compose(self):
        ph = Physics(1.0, Nonlinearity.damped_power(), CoefficientFamily.sinusoidal(2.0), 0.5)
        cfg = SchemeConfig(1e-3)
        B = sample_ball(DOM, 1.0, 4)
        full = pullback_image(B, 1.0, 2.0, ph, cfg)
        half = pullback_image(B, 0.0, 1.0, ph, cfg)
        two = pullback_image(half, 1.0, 1.0, ph, cfg)
        assert np.max(np.sqrt(np.sum(y0_weights(DOM) * (two.data - full.data) ** 2, axis=(1, 2)))) <= 1e-8

    def test_decay_rate_matches_linear_fit(self):
        windows = (4.0, 8.0, 12.0, 16.0)
        sch = PullbackSchedule(0.0, windows, samples=6)
        est = estimate_attractor(sch, DECAY, FAST, domain=DOM)
        d0 = [c.y0_norms().max() for c in est.clouds]
        slope = fit_exponential(windows, d0).rate
        B = sample_ball(DOM, 1.0, 6)
        from kgz.evolution import propagate_batch
        from kgz.spectral import y0_norm2
        times, samples = propagate_batch(DOM, B.data, -16.0, 0.0, FAST, DECAY, 10)[1]
        zeta = -min(-fit_exponential(times, y0_norm2(DOM, samples[:, j])).rate for j in range(6))
        ratio = (2 * slope) / zeta
        assert 0.5 <= ratio <= 2.0

    def test_nonconvergence_is_reported(self):
        sch = PullbackSchedule(0.0, (0.5, 1.0), samples=4)
        est = estimate_attractor(sch, DECAY, FAST, domain=DOM)
        assert not est.converged and est.converged_window is None
        assert len(est.dh_forward) == 1

    def test_deterministic_and_thread_independent(self, monkeypatch):
        sch = PullbackSchedule(0.0, (1.0, 2.0), samples=40, seed=4)
        a = estimate_attractor(sch, DECAY, FAST, domain=DOM, threads=1).to_dict()
        monkeypatch.setenv("KGZ_THREADS", "3")
        b = estimate_attractor(sch, DECAY, FAST, domain=DOM, threads=8).to_dict()
        assert a == b

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            PullbackSchedule(windows=(5, 5))
        with pytest.raises(ValueError):
            PullbackSchedule(samples=1)
        with pytest.raises(ValueError):
            PullbackSchedule(radius=0)
        assert PullbackSchedule(radius=3.0).tolerance == pytest.approx(3e-6)


class TestThreads:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("KGZ_THREADS", "2")
        assert worker_count(16) == 2
        monkeypatch.delenv("KGZ_THREADS")
        assert worker_count(5) == 5

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv("KGZ_THREADS", "many")
        with pytest.raises(ValueError):
            worker_count(2)


class TestRegularity:
    def test_zero_cloud(self):
        rep = regularity_audit(Cloud(DOM, np.zeros((3, 4, 8))))
        assert rep["max"] == 0.0 and rep["mean"] == 0.0

    def test_unit_mode(self):
        W = np.zeros((1, 4, 8))
        W[0, 0, 0] = 1.0
        assert regularity_audit(Cloud(DOM, W))["max"] == pytest.approx(1.0)


class TestSemicontinuity:
    def test_reference_and_scaling(self):
        B = sample_ball(DOM, 1.0, 4)
        ph = Physics(1.0, Nonlinearity.damped_power(), CoefficientFamily.sinusoidal(2.0), 0.0)
        rep = semicontinuity_sweep([0.0, 0.2, 0.1], 2.0, 0.0, B, ph, FAST)
        rows = {r["epsilon"]: r for r in rep["rows"]}
        assert rows[0.0]["sup_difference"] == 0.0
        assert rows[0.2]["sup_difference"] > rows[0.1]["sup_difference"] > 0
        assert all(r["within_bound"] for r in rep["rows"])
        assert rep["ratio_spread"] <= 2.0

    def test_time_order(self):
        with pytest.raises(ValueError):
            semicontinuity_sweep([0.1], 0.0, 1.0, sample_ball(DOM, 1, 2), DECAY, FAST)
