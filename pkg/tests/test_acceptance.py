"""Acceptance criteria 1-10 at their stated tolerances; one PASS/FAIL line each."""

import numpy as np
import pytest

from latindex.clifford import build_gamma_rep
from latindex.continuum import continuum_index
from latindex.gauge import ConnectionDescriptor as CD, gauge_transform, make_generalized_link, random_gauge
from latindex.interp import (CutoffRho, StapleProblem, check_dirac_convergence, check_f_bounds,
                             check_reconstruction, neighbour_overlap_sum, staple_gap_scan, unit_mass_residual)
from latindex.latops import WilsonAssembly, WilsonFamily, a_priori_check
from latindex.overlap import build_overlap, corrupt_sign, gw_residual, overlap_index
from latindex.spectral import eta, wilson_flow, wilson_index

from conftest import ACCEPTANCE_LINES, flux_field

CHARGES = (-3, -2, -1, 0, 1, 2, 3)
SIZES = (12, 16)
SUITE = [(Q, N) for Q in CHARGES for N in SIZES]
M = 1.0
ETA_MASSES = (0.25, 0.5, 1.0, 2.0)
GAUGE_TRIALS = 20
GAUGE_FLOW_TRIALS = 2   # spectral flow is rerun on the first two transforms only (cost)

REP = build_gamma_rep(2)


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def desc_of(Q):
    return CD.u1_flux(Q) if Q else CD.trivial()


def field_etas(lf):
    fam = WilsonFamily(lf, REP)
    return {m: eta(fam(m))[0] for m in (-M,) + ETA_MASSES}


@pytest.fixture(scope="module")
def suite():
    out = {}
    for Q, N in SUITE:
        lf = flux_field(Q, N)
        ov = build_overlap(lf, REP, M)
        flow = wilson_flow(lf, REP, M=M, points=65)
        out[Q, N] = {
            "wilson": wilson_index(lf, REP, M),
            "overlap": overlap_index(ov),
            "sf": flow.sf,
            "sf_eta": flow.sf_eta,
            "continuum": continuum_index(desc_of(Q), REP, 8),
            "gw": gw_residual(ov),
            "gw_corrupt": gw_residual(corrupt_sign(ov)),
            "etas": field_etas(lf),
        }
    return out


def test_criterion_1_index_equality(suite):
    bad = [(Q, N, r["wilson"], r["overlap"], r["sf"], r["continuum"]) for (Q, N), r in suite.items()
           if not r["wilson"] == r["overlap"] == r["sf"] == r["continuum"] == Q]
    report(1, not bad, f"{len(suite)} fields, mismatches (Q, N, wilson, overlap, sf, continuum): {bad}")


def test_criterion_2_eta_positive_mass(suite):
    bad = [(Q, N, m, r["etas"][m]) for (Q, N), r in suite.items() for m in ETA_MASSES if r["etas"][m] != 0]
    report(2, not bad, f"eta(H_W(m)) for m in {ETA_MASSES}, nonzero: {bad}")


def test_criterion_3_wilson_term_positive():
    worst = min(np.linalg.eigvalsh(WilsonAssembly(flux_field(Q, N), REP).wilson.toarray()).min()
                for Q, N in SUITE)
    report(3, worst >= -1e-10, f"min eig W over suite = {worst:.3e}")


def test_criterion_4_a_priori():
    total, worst = 0, 0.0
    for Q in CHARGES:
        for N in (8, 16):
            r = a_priori_check(flux_field(Q, N), REP, trials=1000, seed=(Q + 3) * 100 + N)
            total += r["violations"]
            worst = max(worst, r["max_ratio"])
    report(4, total == 0, f"{len(CHARGES) * 2 * 1000} trials, violations = {total}, max lhs/rhs = {worst:.3f}")


def test_criterion_5_ginsparg_wilson(suite):
    gw = max(r["gw"] for r in suite.values())
    ctrl = min(r["gw_corrupt"] for r in suite.values())
    report(5, gw < 1e-9 and ctrl > 0.1, f"max GW residual = {gw:.2e}, min corrupted-sign residual = {ctrl:.2f}")


def test_criterion_6_interpolation_scaling():
    Ns = (4, 8, 16)
    lines, ok = [], True
    for Q in (0, 1):
        link = make_generalized_link(desc_of(Q))
        fb = check_f_bounds(link, Ns, trials=5)
        rec = check_reconstruction(link, Ns, trials=10)
        dc = check_dirac_convergence(link, Ns, trials=5)
        ok &= fb["min_slope"] >= 0.8 and rec["strictly_decreasing"] and dc["min_order"] >= 0.8
        ok &= max(fb["f_norm"]) <= fb["f_norm_bound"]
        lines.append(f"Q={Q}: f*f slope {fb['min_slope']:.2f}, recon decreasing {rec['strictly_decreasing']}, "
                     f"Dirac order {dc['min_order']:.2f}")
    report(6, ok, "; ".join(lines))


@pytest.mark.slow
def test_criterion_7_staple_gap():
    gaps = {}
    for Q in (0, 1):
        link = make_generalized_link(desc_of(Q))
        prob = StapleProblem(link, 16, 32, REP)
        gaps[Q] = staple_gap_scan(link, 16, 32, M=M, problem=prob).min_gap
        if Q == 1:
            control = prob.min_abs_eig(0.0, 0.0)
    ok = min(gaps.values()) > 0.05 and control < 1e-6
    report(7, ok, f"min gap trivial = {gaps[0]:.3f}, Q=1 = {gaps[1]:.3f}; control (0,0) = {control:.1e}")


def test_criterion_8_two_method_flow(suite):
    bad = [(Q, N) for (Q, N), r in suite.items() if r["sf"] != r["sf_eta"]]
    report(8, not bad, f"tracked sf vs (eta+ - eta-)/2 on {len(suite)} runs, mismatches: {bad}")


def test_criterion_9_gauge_invariance(suite):
    rng = np.random.default_rng(2024)
    bad = []
    for (Q, N), r in suite.items():
        lf = flux_field(Q, N)
        for k in range(GAUGE_TRIALS):
            g = gauge_transform(lf, random_gauge(lf, rng))
            got = {"wilson": wilson_index(g, REP, M), "overlap": overlap_index(build_overlap(g, REP, M)),
                   "etas": field_etas(g)}
            if k < GAUGE_FLOW_TRIALS:
                got["sf"] = wilson_flow(g, REP, M=M, points=65).sf
            diff = [key for key, v in got.items() if v != r[key]]
            if diff:
                bad.append((Q, N, k, diff))
    report(9, not bad, f"{GAUGE_TRIALS} gauges per field (sf on {GAUGE_FLOW_TRIALS}), changes: {bad}")


def test_criterion_10_integral_identities():
    x = np.random.default_rng(7).random((2000, 2))
    pu = max(CutoffRho(1.0 / N).partition_residual(x) for N in (4, 8, 16))
    ident = max(max(abs(neighbour_overlap_sum(N) - 1), unit_mass_residual(N)) for N in (4, 8, 16))
    report(10, pu < 1e-8 and ident < 1e-8, f"partition residual = {pu:.1e}, integral identities = {ident:.1e}")
