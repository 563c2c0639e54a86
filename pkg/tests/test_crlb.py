import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simosnr import build_constellation, crlb_da, crlb_via_fim
from simosnr.crlb import fim_blocks, snr_gradient
from simosnr.errors import DimensionMismatch, SingularFim, ZeroNoise


def _random_case(seed, n_rx=2, N=8, spec=("psk", 4)):
    rng = np.random.default_rng(seed)
    c = build_constellation(*spec)
    a = c.points[rng.integers(0, c.order, N)]
    h = rng.standard_normal((n_rx, N)) + 1j * rng.standard_normal((n_rx, N))
    return h, a


def _rho(theta, a, n_rx, N, antenna):
    h = theta[:2 * n_rx * N:2] + 1j * theta[1:2 * n_rx * N:2]
    h = h.reshape(n_rx, N)
    return np.sum(np.abs(a) ** 2 * np.abs(h[antenna]) ** 2) / (N * 2 * theta[-1])


class TestClosedForm:
    def test_known_values(self):
        assert crlb_da(1.0, 112, 2).bound == pytest.approx(2.5 / 112)
        assert crlb_da(0.0, 28, 1).bound == 0.0
        assert crlb_da(10.0, 112, 2).bound / crlb_da(10.0, 112, 4).bound == pytest.approx(7 / 4.5)

    @given(rho=st.floats(1e-3, 1e4), N=st.integers(1, 500), n_rx=st.integers(1, 8))
    def test_inverse_in_N(self, rho, N, n_rx):
        assert crlb_da(rho, 2 * N, n_rx).bound == pytest.approx(crlb_da(rho, N, n_rx).bound / 2)

    @pytest.mark.parametrize("args", [(-1.0, 10, 1), (1.0, 0, 1), (1.0, 10, 0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            crlb_da(*args)


class TestFimPath:
    def test_dense_fim_and_numerical_gradient(self):
        """Quadratic form against a dense inverse with a finite-difference gradient on interleaved (Re, Im)."""
        n_rx, N, s2 = 2, 6, 0.7
        h, a = _random_case(1, n_rx, N, ("qam", 16))
        # Fisher information of interleaved [Re h, Im h] and sigma^2, written out entry by entry
        P = 2 * n_rx * N + 1
        fim = np.zeros((P, P))
        for i in range(n_rx):
            for n in range(N):
                for part in range(2):
                    fim[2 * (i * N + n) + part] [2 * (i * N + n) + part] = abs(a[n]) ** 2 / s2
        fim[-1, -1] = N * n_rx / s2 ** 2
        theta = np.concatenate([np.column_stack([h.real.ravel(), h.imag.ravel()]).ravel(), [s2]])
        g = np.zeros(P)
        for p in range(P):
            e = np.zeros(P)
            e[p] = 1e-6
            g[p] = (_rho(theta + e, a, n_rx, N, 1) - _rho(theta - e, a, n_rx, N, 1)) / 2e-6
        ref = g @ np.linalg.solve(fim, g)
        assert crlb_via_fim(h, a, s2, antenna=1).bound == pytest.approx(ref, rel=1e-6)

    def test_blocks_match_dense(self):
        b = fim_blocks(np.array([1, 1j, -1]), 2.0, 2)
        assert b.size == 13
        np.testing.assert_allclose(np.diag(b.dense()), [0.5] * 12 + [1.5])

    @given(seed=st.integers(0, 10 ** 6), scale=st.floats(1e-3, 1e3), s2=st.floats(1e-3, 1e3))
    def test_matches_closed_form_for_unit_modulus(self, seed, scale, s2):
        h, a = _random_case(seed)
        res = crlb_via_fim(scale * h, a, s2)
        assert res.bound == pytest.approx(crlb_da(res.rho, a.size, 2).bound, rel=1e-10)

    def test_zero_symbols_are_dropped(self):
        h, a = _random_case(3, N=10)
        a0 = a.copy()
        a0[[2, 5]] = 0
        res = crlb_via_fim(h, a0, 1.0)
        # reference from the surviving positions only; noise information still counts all N samples
        keep = a0 != 0
        g_re, g_im, g_s2 = snr_gradient(h, a0, 1.0, 0)
        ref = np.sum((g_re[keep] ** 2 + g_im[keep] ** 2) / np.abs(a0[keep]) ** 2) + g_s2 ** 2 / (20.0)
        assert res.bound == pytest.approx(ref)

    def test_errors(self):
        h, a = _random_case(0)
        with pytest.raises(SingularFim):
            crlb_via_fim(h, np.zeros_like(a), 1.0)
        with pytest.raises(ZeroNoise):
            crlb_via_fim(h, a, 0.0)
        with pytest.raises(DimensionMismatch):
            crlb_via_fim(h, a[:-1], 1.0)
        with pytest.raises(DimensionMismatch):
            crlb_via_fim(h, a, 1.0, antenna=2)
