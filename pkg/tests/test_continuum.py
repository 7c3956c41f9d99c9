import numpy as np
import pytest

from latindex.clifford import build_gamma_rep
from latindex.continuum import (continuum_dirac, continuum_index, continuum_space, hermite_functions, landau_levels,
                                _multiplier)
from latindex.errors import AmbiguousKernel, OddDimension, RoughBackground, UnsupportedBackground
from latindex.gauge import ConnectionDescriptor as CD, FourierTerm, discretize, make_generalized_link



def free_oracle(K, m, n=2):
    k = np.stack(np.meshgrid(*([np.arange(-K, K + 1)] * n), indexing="ij"), -1).reshape(-1, n)
    e = np.sqrt(4 * np.pi ** 2 * (k ** 2).sum(1) + m * m)
    return np.sort(np.concatenate([e, -e]))


@pytest.mark.parametrize("m", [0.0, 0.7])
def test_free_spectrum(rep2, m):
    lam = np.linalg.eigvalsh(continuum_dirac(CD.trivial(), rep2, 4, m).dense())
    np.testing.assert_allclose(lam, free_oracle(4, m), atol=1e-9)


def test_free_index_zero(rep2):
    assert continuum_index(CD.trivial(), rep2, 4) == 0


def test_trivial_exact_kernel_is_ambiguous_with_wide_tolerance(rep2):
    # momentum-one levels sit at 2 pi, inside the grey band [1, 10)
    with pytest.raises(AmbiguousKernel):
        continuum_index(CD.trivial(), rep2, 3, zero_tol=1.0)


@pytest.mark.parametrize("Q", [1, -2, 3])
def test_landau_spectrum(rep2, Q):
    K = 4
    lam = np.sort(np.linalg.eigvalsh(continuum_dirac(CD.u1_flux(Q), rep2, K).dense()))
    L = landau_levels(K, Q)
    levels = np.sqrt(4 * np.pi * abs(Q) * np.arange(1, L))
    ref = np.sort(np.concatenate([np.zeros(abs(Q)), np.repeat(levels, abs(Q)), -np.repeat(levels, abs(Q))]))
    np.testing.assert_allclose(lam, ref, atol=1e-8 * ref.max())


@pytest.mark.parametrize("Q", [1, -2, 3])
def test_mass_shift(rep2, Q):
    h0 = continuum_dirac(CD.u1_flux(Q), rep2, 4).dense()
    h = continuum_dirac(CD.u1_flux(Q), rep2, 4, 0.5).dense()
    a = np.sort(np.abs(np.linalg.eigvalsh(h)))
    b = np.sort(np.sqrt(np.linalg.eigvalsh(h0) ** 2 + 0.25))
    np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("Q", [-3, -1, 0, 1, 2, 3])
@pytest.mark.parametrize("K", [6, 8])
def test_flux_index(rep2, Q, K):
    desc = CD.u1_flux(Q) if Q else CD.trivial()
    assert continuum_index(desc, rep2, K) == Q


PERTURBED = [
    (0, [FourierTerm(0, (0, 1), 0.8), FourierTerm(1, (1, 0), 0.5, 0.3)]),
    (1, [FourierTerm(0, (0, 1), 0.6), FourierTerm(1, (1, 1), 0.4, 1.0)]),
    (-2, [FourierTerm(1, (1, 0), 0.7, 0.2)]),
]


@pytest.mark.parametrize("Q,terms", PERTURBED)
def test_perturbed_index(rep2, Q, terms):
    assert continuum_index(CD.u1_flux_plus_smooth(Q, terms), rep2, 6) == Q


@pytest.mark.parametrize("Q,terms", PERTURBED[1:])
def test_low_spectrum_stable_in_K(rep2, Q, terms):
    desc = CD.u1_flux_plus_smooth(Q, terms)
    lo = [np.sort(np.abs(np.linalg.eigvalsh(continuum_dirac(desc, rep2, K).dense())))[:6] for K in (6, 8)]
    np.testing.assert_allclose(lo[0], lo[1], atol=1e-4)


def test_spectral_symmetry_plane(rep2):
    desc = CD.u1_flux_plus_smooth(0, [FourierTerm(0, (0, 1), 0.8)])
    lam = np.linalg.eigvalsh(continuum_dirac(desc, rep2, 4).dense())
    np.testing.assert_allclose(np.sort(lam), np.sort(-lam), atol=1e-9)


def test_hermite_orthonormal():
    u = np.linspace(-8, 8, 8001)
    h = hermite_functions(12, u, 2.0)
    G = h @ h.T * (u[1] - u[0])
    np.testing.assert_allclose(G, np.eye(12), atol=1e-10)


def test_multiplier_against_quadrature(rep2):
    space = continuum_space(CD.u1_flux(2), rep2, 3)
    E = _multiplier(space, (1, 1)).toarray()
    g = (np.arange(96) + 0.5) / 96
    x = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    phi = space.scalar_values(x)
    ref = phi.conj().T @ (np.exp(2j * np.pi * x @ np.array([1, 1]))[:, None] * phi) / len(x)
    sub = slice(0, 6)
    np.testing.assert_allclose(E[sub, sub], ref[sub, sub], atol=1e-8)
    # the same quadrature confirms orthonormality of the Landau basis
    np.testing.assert_allclose(phi.conj().T @ phi / len(x), np.eye(phi.shape[1]), atol=1e-8)


def test_errors(rep2):
    with pytest.raises(RoughBackground):
        continuum_index(CD.u1_flux_plus_smooth(1, [FourierTerm(0, (4, 0), 0.1)]), rep2, 6)
    table = discretize(make_generalized_link(CD.trivial()), 4)
    with pytest.raises(UnsupportedBackground):
        continuum_index(CD.external(table), rep2, 4)
    with pytest.raises(OddDimension):
        continuum_index(CD.trivial(n=1), build_gamma_rep(1), 4)
    with pytest.raises(UnsupportedBackground):
        continuum_index(CD.trivial(n=4), rep2, 2)
