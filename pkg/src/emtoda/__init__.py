"""Numerical laboratory for the extended multicomponent Toda hierarchy.

Matrix-valued shift-operator algebra on a refined lattice, dressing series
and logarithmic flow generators, Lax flows with RK4 integration, Darboux
solution generation, and the bi-Hamiltonian structure with its verification
oracles.
"""

__version__ = "0.1.0"

from .lattice import (DECAYING, PERIODIC, Lattice, MatrixField, derivative_x,
                      shift, sum_inverse)
from .diffop import (BandOperator, SeriesOperator, ShiftOperator, adjoint_star,
                     apply, commutator, mul, residue, split, trace_residue)
from .dressing import (DressingPair, LaxState, LogPair, compute_B,
                       compute_B_plus, compute_C, compute_D, compute_dressing,
                       compute_log, compute_S, compute_Sbar, invert_series,
                       vacuum_state)
from .flows import FlowSpec, Trajectory, integrate, lax_rhs, phi_form, \
    toda_rhs_explicit, verify_s0
from .darboux import (DarbouxResult, DarbouxSolution, WaveFunction,
                      darboux_chain, darboux_nfold, darboux_once, vacuum_wave)
from .hamiltonian import (GradientField, analytic_gradient, apply_P1,
                          apply_P2, density, functional_gradient,
                          tau_log_increment, verify_flow_hamiltonian,
                          verify_recursion, verify_tau_symmetry)

__all__ = [name for name in dir() if not name.startswith("_")]
