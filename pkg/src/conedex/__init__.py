"""Weighted Fredholm index of radial Callias-type operators with degenerate potentials."""

from .catalog import CATALOG, get_model, model_a, model_b, model_c, model_d
from .index import (boundary_index_point, callias_index_fullrank, channel_index_sum, deform_family,
                    free_dirac_channel, hybrid_index, indicial_flip_check, tf_model, transition_additivity)
from .indicial import b_spectrum, boundary_pairing, defect, formal_nullspace, relative_index_ledger
from .model import (EndData, ModelError, RadialOperator, Term, conjugate_to_b, formal_adjoint, make_operator,
                    split_blocks, validate_assumptions)
from .phg import IndexSet, extended_union, fit_leading_order, mellin_pole_probe
from .spectral import (IndeterminateIndex, WeightedGrid, alpha_sweep, nullspace_asymptotics, numerical_index,
                       shooting_oracle)

__version__ = "0.1.0"
