import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfcsav.model import (
    EnergyError,
    PfcParams,
    e1,
    energy_modified,
    energy_original,
    f_prime,
    r_init,
    resolve_c0,
)
from pfcsav.spectral import inner, interpolate_initial, make_grid, norm_l2

P = PfcParams(eps=0.025, lam=0.01)


class TestParams:
    @pytest.mark.parametrize(
        "changes",
        [dict(eps=0.0), dict(eps=1.0), dict(beta=0.5, eps=0.3), dict(lam=0.0), dict(S=-1.0),
         dict(M=0.0), dict(dt=0.0), dict(C0=-1.0), dict(beta=-1.0)],
    )
    def test_invalid(self, changes):
        with pytest.raises(ValueError):
            PfcParams(**changes)

    def test_replace_revalidates(self):
        assert P.replace(S=2.0).S == 2.0
        with pytest.raises(ValueError):
            P.replace(lam=-1.0)

    def test_default_c0(self):
        g = make_grid(32, 32, 8)
        assert resolve_c0(P, g) == pytest.approx(1024 * 0.035**2 / 4 + 1)
        assert resolve_c0(P.replace(C0=3.0), g) == 3.0


class TestFPrime:
    def test_zero(self):
        assert np.all(f_prime(np.zeros((4, 4)), P) == 0)

    def test_one(self):
        np.testing.assert_allclose(f_prime(np.ones((4, 4)), P), 0.965, rtol=1e-15)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_double_well_roots(self, sign):
        a = sign * math.sqrt(P.eps + P.lam)
        assert abs(f_prime(np.array([a]), P)[0]) < 1e-16

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
    def test_odd(self, values):
        phi = np.array(values)
        assert np.array_equal(f_prime(-phi, P), -f_prime(phi, P))

    def test_gradient_of_e1(self, rng):
        g = make_grid(6.0, 6.0, 16)
        phi = 0.4 * rng.standard_normal(g.shape)
        psi = rng.standard_normal(g.shape)
        exact = inner(g, f_prime(phi, P), psi)
        errs = []
        for h in (1e-2, 5e-3):
            fd = (e1(phi + h * psi, g, P) - e1(phi - h * psi, g, P)) / (2 * h)
            errs.append(abs(fd - exact))
        assert errs[1] < 1e-3 * abs(exact)
        assert errs[1] / errs[0] == pytest.approx(0.25, abs=0.02)


class TestE1:
    def test_zero_field(self):
        g = make_grid(32, 32, 8)
        assert e1(np.zeros(g.shape), g, P) == pytest.approx(resolve_c0(P, g))

    def test_unit_field(self):
        g = make_grid(32, 32, 8)
        p = P.replace(C0=0.0)
        assert e1(np.ones(g.shape), g, p) == pytest.approx(238.08, rel=1e-12)
        assert e1(np.ones(g.shape), g, p.replace(C0=5.0)) == pytest.approx(243.08, rel=1e-12)

    def test_double_loop_oracle(self):
        g = make_grid(7.0, 9.0, 16)
        phi = np.random.default_rng(7).uniform(-1, 1, g.shape)
        total = 0.0
        for i in range(g.N):
            for j in range(g.N):
                v = phi[i, j]
                total += (0.25 * v**4 - 0.5 * (P.eps + P.lam) * v**2) * g.hx * g.hy
        assert e1(phi, g, P) == pytest.approx(total + resolve_c0(P, g), rel=1e-12)

    def test_non_positive_raises(self):
        g = make_grid(32, 32, 8)
        phi = np.full(g.shape, math.sqrt(P.eps + P.lam))
        with pytest.raises(EnergyError):
            e1(phi, g, P.replace(C0=0.0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 5))
    def test_lower_bound(self, seed, scale):
        g = make_grid(4.0, 4.0, 8)
        phi = scale * np.random.default_rng(seed).standard_normal(g.shape)
        c0 = resolve_c0(P, g)
        assert e1(phi, g, P) >= c0 - g.area * (P.eps + P.lam) ** 2 / 4 - 1e-12
        assert e1(phi, g, P) > 0


class TestRInit:
    def test_values(self):
        g = make_grid(32, 32, 8)
        assert r_init(np.zeros(g.shape), g, P.replace(C0=4.0)) == 2.0
        assert r_init(np.ones(g.shape), g, P.replace(C0=1.0)) == pytest.approx(math.sqrt(239.08))
        assert r_init(np.ones(g.shape), g, P.replace(C0=1.0)) == pytest.approx(15.4622, abs=1e-4)

    def test_square_is_e1(self, rng):
        g = make_grid(5.0, 5.0, 8)
        phi = rng.standard_normal(g.shape)
        assert r_init(phi, g, P) ** 2 == pytest.approx(e1(phi, g, P), rel=1e-15)


class TestEnergies:
    def test_zero(self):
        g = make_grid(32, 32, 8)
        assert energy_original(np.zeros(g.shape), g, P) == 0

    @pytest.mark.parametrize("c", [0.3, -1.2, 2.0])
    def test_constant_closed_form(self, c):
        g = make_grid(32, 32, 16)
        exact = g.area * (P.beta**2 * c**2 / 2 + c**4 / 4 - P.eps * c**2 / 2)
        assert energy_original(np.full(g.shape, c), g, P) == pytest.approx(exact, rel=1e-12)

    def test_dense_quadrature_oracle(self):
        # independent evaluation: finite-difference-free, analytic derivatives sampled at N=512
        ref = make_grid(32, 32, 512)
        X, Y = ref.nodes()
        k = math.pi / 16
        phi = np.sin(k * X) * np.cos(k * Y)
        lap = -2 * k * k * phi
        density = 0.5 * (lap + P.beta * phi) ** 2 + 0.25 * phi**4 - 0.5 * P.eps * phi**2
        oracle = ref.hx * ref.hy * density.sum()
        g = make_grid(32, 32, 64)
        phi64 = interpolate_initial(lambda x, y: np.sin(k * x) * np.cos(k * y), g)
        assert energy_original(phi64, g, P) == pytest.approx(oracle, rel=1e-8)

    def test_modified_zero_state(self):
        g = make_grid(32, 32, 8)
        c0 = resolve_c0(P, g)
        assert energy_modified(np.zeros(g.shape), math.sqrt(c0), g, P).modified == pytest.approx(0, abs=1e-12)

    def test_modified_equals_original_when_consistent(self, rng):
        g = make_grid(20.0, 20.0, 32)
        phi = 0.3 * rng.standard_normal(g.shape)
        en = energy_modified(phi, r_init(phi, g, P), g, P)
        assert en.modified == pytest.approx(en.original, rel=1e-10)
        assert en.r_squared == pytest.approx(en.e1, rel=1e-15)
        local = g.hx * g.hy * np.sum(0.25 * phi**4 - 0.5 * P.eps * phi**2)
        assert en.quadratic == pytest.approx(en.original - local + 0.5 * P.lam * norm_l2(g, phi) ** 2, rel=1e-10)

    def test_tilde_with_zero_increment(self, rng):
        g = make_grid(5.0, 5.0, 8)
        phi = rng.standard_normal(g.shape)
        en = energy_modified(phi, 3.0, g, P.replace(S=2.0), increment=np.zeros(g.shape))
        assert en.modified_tilde == en.modified

    def test_tilde_adds_stabilizer(self, rng):
        g = make_grid(2 * math.pi, 2 * math.pi, 16)
        inc = interpolate_initial(lambda x, y: np.sin(x), g)
        en = energy_modified(np.zeros(g.shape), 3.0, g, P.replace(S=2.0), increment=inc)
        assert en.modified_tilde - en.modified == pytest.approx(2.0 * 2 * math.pi**2, rel=1e-12)
