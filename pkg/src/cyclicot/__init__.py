"""Discrete multi-marginal optimal transport with the cyclic quadratic cost

    c(x_1, ..., x_m) = sum_k |x_k - x_{k+1}|^2 + |x_m - F(x_1)|^2,

with exact and entropic solvers, duality certificates, Monge diagnostics and
explicit non-Monge constructions.
"""

from .ballantine import (FactorizationError, PDFactorization, factor_pd2, factor_pd3, in_R2,
                         in_R3, lemma41_singular_companion)
from .certify import (certify, check_sets, duality_gap, feasibility_violation,
                      support_equality_residual)
from .construct import (CounterexamplePackage, chain_sup, chain_sup_tolerance, dirac_example,
                        effective_surplus, prop42_package, prop43_package, refined_chain_sup,
                        regular_instance)
from .core import (AffineMap, Box, CapExceededError, Certificate, CyclicOTError,
                   DiscreteMeasure, HypothesisError, InfeasibleError, Instance, Plan,
                   PotentialSet, QuadraticPotential, TabulatedPotential, make_instance,
                   plan_marginal, validate_instance, validate_plan)
from .cost import (CostTensor, build_tensor, cost_surplus_identity, eval_cost, eval_surplus,
                   plan_value)
from .diagnose import (MongeReport, UniquenessReport, monge_test, support_dimension,
                       uniqueness_probe)
from .quadratic import (QuadraticForm, det_sum, grid_sup, grid_sup_error_bound,
                        legendre_quadratic, nested_grid_sup)
from .solve import LPResult, SinkhornResult, exact_lp, round_to_feasible, sinkhorn_mm

__version__ = "0.1.0"
