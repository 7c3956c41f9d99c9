"""Lattice index theorem toolkit: Wilson and overlap Dirac operators on the
torus, spectral flow, eta invariants, and a truncated continuum reference."""

__version__ = "0.1.0"

from .clifford import GammaRep, build_gamma_rep, clifford_residuals
from .continuum import continuum_dirac, continuum_index
from .errors import *  # noqa: F401,F403
from .gauge import (ConnectionDescriptor, FourierTerm, GeneralizedLink, LinkField, curvature_bound,
                    discretize, gauge_transform, make_generalized_link, plaquette_charge, random_gauge,
                    read_link_table, write_link_table)
from .latops import (LatticeOperator, WilsonFamily, a_priori_check, backward_diff, forward_diff,
                     naive_dirac, wilson_dirac, wilson_term)
from .overlap import build_overlap, gw_residual, gw_unitary_residual, overlap_index
from .spectral import MassGrid, eta, spectral_flow, wilson_flow, wilson_index
