import numpy as np
import pytest

from latindex.errors import InvalidDescriptor, NonUnitaryGauge, RoughField, SpacingTooCoarse
from latindex.gauge import (ConnectionDescriptor as CD, FourierTerm, LinkField, curvature_bound, discretize,
                            gauge_transform, make_generalized_link, plaquette_angles, plaquette_charge,
                            random_gauge, read_link_table, write_link_table)

from conftest import flux_field


def test_trivial_links_identity():
    lf = discretize(make_generalized_link(CD.trivial(2)), 4)
    assert lf.links.size == 32
    np.testing.assert_array_equal(lf.links[..., 0, 0], 1)


def test_nonabelian_trivial_links():
    lf = discretize(make_generalized_link(CD.trivial(2, nc=3)), 4)
    np.testing.assert_array_equal(lf.links, np.broadcast_to(np.eye(3), lf.links.shape))


def test_link_at_same_point_is_identity():
    link = make_generalized_link(CD.u1_flux(1))
    assert link(np.zeros(2), np.zeros(2))[0, 0] == 1


def test_inverse_and_unitarity(rng):
    link = make_generalized_link(CD.u1_flux_plus_smooth(2, [FourierTerm(0, (1, 1), 0.3, 0.5)]))
    x = rng.random((200, 2))
    y = x + 0.2 * (rng.random((200, 2)) - 0.5)
    u, v = link(x, y), link(y, x)
    np.testing.assert_allclose(u * v, 1, atol=1e-12)
    np.testing.assert_allclose(np.abs(u), 1, atol=1e-14)


@pytest.mark.parametrize("Q", [1, -2])
def test_phase_matches_line_integral(rng, Q):
    # 1024-point midpoint quadrature of a(x).dx along the straight segment
    desc = CD.u1_flux_plus_smooth(Q, [FourierTerm(1, (1, 0), 0.4, 0.3), FourierTerm(0, (0, 2), 0.2)])
    link = make_generalized_link(desc)
    for _ in range(5):
        x = 0.2 + 0.6 * rng.random(2)
        d = rng.normal(size=2)
        d *= 0.1 / np.linalg.norm(d)
        s = (np.arange(1024) + 0.5) / 1024
        pts = x + s[:, None] * d
        integral = (desc.connection(pts) @ d).mean()
        assert abs(link.phase(x, x + d) - integral) < 1e-6


def test_plaquette_phase_uniform():
    theta = plaquette_angles(flux_field(1, 4))
    np.testing.assert_allclose(theta, 2 * np.pi / 16, atol=1e-12)


@pytest.mark.parametrize("Q,N", [(-2, 8), (3, 12), (0, 6), (1, 4), (-3, 16)])
def test_plaquette_charge(Q, N):
    q, res = plaquette_charge(flux_field(Q, N))
    assert q == Q and res < 1e-9


def test_plaquette_charge_with_perturbation():
    desc = CD.u1_flux_plus_smooth(1, [FourierTerm(0, (0, 1), 0.05), FourierTerm(1, (1, 1), 0.04, 1.0)])
    lf = discretize(make_generalized_link(desc), 16)
    assert np.abs(plaquette_angles(lf) - 2 * np.pi / 256).max() < 0.1
    q, res = plaquette_charge(lf)
    assert q == 1 and res < 1e-9


def test_rough_field():
    links = np.ones((4, 4, 2, 1, 1), complex)
    links[0, 0, 0] = -1
    with pytest.raises(RoughField):
        plaquette_charge(LinkField(4, 2, 1, links))


def test_spacing_too_coarse():
    with pytest.raises(SpacingTooCoarse):
        discretize(make_generalized_link(CD.u1_flux(1)), 2)


def test_invalid_descriptors():
    with pytest.raises(InvalidDescriptor):
        CD("bogus")
    with pytest.raises(InvalidDescriptor):
        CD("u1_flux", n=4, charge=1)
    with pytest.raises(InvalidDescriptor):
        CD("trivial", perturbation=(FourierTerm(0, (1, 0), 0.1),))
    with pytest.raises(InvalidDescriptor):
        make_generalized_link("trivial")


def test_curvature_bound_trivial():
    assert curvature_bound(make_generalized_link(CD.trivial(2)), 200) == 0.0


@pytest.mark.parametrize("Q", [1, 2])
def test_curvature_bound_flux(Q):
    # supremum of |1 - W| / (|x-y||x-z|) over small triangles is |f| / 2 = pi |Q|
    est = curvature_bound(make_generalized_link(CD.u1_flux(Q)), 4000)
    assert abs(est - np.pi * abs(Q)) < 0.2 * np.pi * abs(Q)


def test_curvature_bound_perturbation():
    desc = CD.u1_flux_plus_smooth(0, [FourierTerm(1, (1, 0), 0.3), FourierTerm(0, (0, 1), 0.2, 0.4)])
    est = curvature_bound(make_generalized_link(desc), 4000)
    assert 0 < est <= 1.2 * desc.perturbation_curvature_bound()


def test_gauge_identity_and_invariance(rng):
    lf = flux_field(2, 8)
    same = gauge_transform(lf, np.ones((8, 8, 1, 1)))
    np.testing.assert_array_equal(same.links, lf.links)
    for _ in range(5):
        g = gauge_transform(lf, random_gauge(lf, rng))
        assert plaquette_charge(g)[0] == 2


def test_nonabelian_gauge_covariance(rng):
    lf = discretize(make_generalized_link(CD.trivial(2, nc=2)), 4)
    g1 = gauge_transform(lf, random_gauge(lf, rng))
    assert g1.unitarity_residual() < 1e-12


def test_non_unitary_gauge():
    lf = flux_field(1, 4)
    with pytest.raises(NonUnitaryGauge):
        gauge_transform(lf, 2 * np.ones((4, 4, 1, 1)))
    with pytest.raises(NonUnitaryGauge):
        gauge_transform(lf, np.ones((3, 4, 1, 1)))


def test_link_table_roundtrip(tmp_path, rng):
    lf = gauge_transform(flux_field(1, 6), random_gauge(flux_field(1, 6), rng))
    p = tmp_path / "links.txt"
    write_link_table(lf, p)
    back = read_link_table(p)
    np.testing.assert_array_equal(back.links, lf.links)
    ext = CD.external(back)
    assert discretize(make_generalized_link(ext), 6) is back


def test_link_table_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("not a table\n")
    with pytest.raises(InvalidDescriptor):
        read_link_table(p)
    p.write_text("# latindex link table v1\nn 1\nN 2\nNc 1\ngroup U1\n0 0 2.0 0.0\n1 0 1.0 0.0\n")
    with pytest.raises(InvalidDescriptor):
        read_link_table(p)
