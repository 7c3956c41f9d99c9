import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from latindex.clifford import build_gamma_rep, clifford_residuals
from latindex.errors import EndpointKernel
from latindex.gauge import gauge_transform, random_gauge
from latindex.latops import WilsonFamily
from latindex.spectral import MassGrid, eta, spectral_flow

from conftest import flux_field


def _herm(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(2, 10))
def test_affine_flow_equals_eta_formula(seed, d):
    rng = np.random.default_rng(seed)
    A, B = _herm(rng, d), _herm(rng, d)
    try:
        r = spectral_flow(lambda m: A + m * B, MassGrid.uniform(1.0, 17))
    except EndpointKernel:
        return
    e0, e1 = eta(A - B, 0)[0], eta(A + B, 0)[0]
    assert r.sf == (e1 - e0) // 2


@settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2 ** 32 - 1), Q=st.integers(-2, 2))
def test_random_gauge_invariance(seed, Q):
    rep = build_gamma_rep(2)
    lf = flux_field(Q, 8)
    g = gauge_transform(lf, random_gauge(lf, np.random.default_rng(seed)))
    for m in (-1.0, 0.5):
        a = np.linalg.eigvalsh(WilsonFamily(lf, rep)(m).dense())
        b = np.linalg.eigvalsh(WilsonFamily(g, rep)(m).dense())
        np.testing.assert_allclose(a, b, atol=1e-10)


@given(n=st.integers(1, 4))
def test_clifford_identities(n):
    res = clifford_residuals(build_gamma_rep(n))
    assert max(res.values()) < 1e-12
