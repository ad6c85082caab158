import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgz.coefficients import CoefficientFamily, load_table, validate_bounds


class TestEvaluation:
    def test_sinusoidal(self):
        fam = CoefficientFamily.sinusoidal(2.0)
        assert fam.a_eval(0.5, np.pi / 2) == pytest.approx(2.5)
        assert fam.a_derivative(0.5, 0.0) == pytest.approx(0.5)

    def test_constant(self):
        fam = CoefficientFamily.constant(1.0)
        for eps in (0.0, 0.3, 1.0):
            assert fam(eps, 12.3) == 1.0
            assert fam.a_derivative(eps, 4.0) == 0.0

    def test_vectorized(self):
        t = np.linspace(0, 1, 5)
        out = CoefficientFamily.sinusoidal(2.0, 0.5, 3.0).a_eval(1.0, t)
        np.testing.assert_allclose(out, 2 + 0.5 * np.sin(3 * t))

    @pytest.mark.parametrize("eps", [-0.1, 1.1])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            CoefficientFamily().a_eval(eps, 0.0)

    def test_tabulated_interpolates(self):
        fam = CoefficientFamily.tabulated([0, 1, 2], [1.0, 3.0, 2.0], a_star=2.0)
        assert fam.a_eval(1.0, 0.5) == pytest.approx(2.0)
        assert fam.a_eval(0.5, 1.0) == pytest.approx(2.5)
        assert fam.a_eval(1.0, 10.0) == pytest.approx(2.0)
        assert fam.a_eval(0.0, 0.7) == pytest.approx(2.0)
        assert fam.a_derivative(1.0, 0.5) == pytest.approx(2.0)

    def test_csv_loader(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("t,a\n# comment\n0,1.5\n1,2.5\n2,2.0\n")
        t, a = load_table(p)
        np.testing.assert_array_equal(t, [0, 1, 2])
        fam = CoefficientFamily.from_csv(p)
        assert fam.a_star == pytest.approx(2.0)

    def test_csv_bad_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("0,1\n1,x\n")
        with pytest.raises(ValueError, match="row 2"):
            load_table(p)


class TestSupDeviation:
    @settings(max_examples=50, deadline=None)
    @given(eps=st.floats(0, 1), amp=st.floats(0.0, 1.5), omega=st.floats(0.1, 5))
    def test_sinusoidal_exact(self, eps, amp, omega):
        fam = CoefficientFamily.sinusoidal(2.0, amp, omega)
        assert fam.sup_deviation(eps) == pytest.approx(eps * amp, abs=1e-12)
        t = np.linspace(0, 2 * np.pi / omega, 20001)
        sampled = np.max(np.abs(fam.a_eval(eps, t) - fam.a_eval(0.0, t)))
        assert sampled <= fam.sup_deviation(eps) + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(eps=st.floats(0, 1), t=st.floats(-100, 100))
    def test_positive(self, eps, t):
        assert CoefficientFamily.sinusoidal(2.0).a_eval(eps, t) > 0


class TestValidateBounds:
    def test_sinusoidal_extremes(self):
        rep = validate_bounds(CoefficientFamily.sinusoidal(2.0), samples=2001)
        assert rep.passed
        assert rep.a0 == pytest.approx(1.0, abs=1e-6)
        assert rep.a1 == pytest.approx(3.0, abs=1e-6)
        assert rep.b0 == pytest.approx(1.0, abs=1e-6)
        assert rep.beta == pytest.approx(1.0, abs=0.05)

    def test_constant(self):
        rep = validate_bounds(CoefficientFamily.constant(1.5))
        assert rep.passed and rep.a0 == rep.a1 == 1.5 and rep.b0 == 0.0

    def test_jump_fails(self):
        fam = CoefficientFamily.tabulated([0.0, 1.0, 1.0, 6.0], [1.0, 1.0, 2.0, 2.0], a_star=1.5)
        rep = validate_bounds(fam)
        assert not rep.passed
        assert rep.beta < 0.25
        assert not rep.derivative_checked and rep.b0 is None

    def test_smooth_table_passes(self):
        t = np.linspace(0, 2 * np.pi, 50)
        rep = validate_bounds(CoefficientFamily.tabulated(t, 2 + np.sin(t)))
        assert rep.passed and not rep.derivative_checked

    def test_nonpositive_fails(self):
        assert not validate_bounds(CoefficientFamily.sinusoidal(0.5, 1.0)).passed

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            validate_bounds(CoefficientFamily(), samples=999)
