"""Integrals of differential forms along Hölder maps into Carnot groups.

Submodules: ``lie`` (graded algebras and group laws), ``chains`` (simplicial
chains, interpolation and telescopes), ``forms`` (left-invariant coframes and
weighted forms), ``integrate`` (quadrature), ``holder`` (dyadic limits, Stokes,
vanishing and Towghi sums), ``cohomology`` (weight-graded cohomology and the
exponent bound), ``heisenberg`` (Rumin complex and horizontal arcs), ``cli``.
"""
from .lie import CarnotGroup, GradedLieAlgebra, group, load_algebra
from .forms import WeightedForm, parse_form
from .maps import SampledHolderMap, parse_map
from .holder import JResult, estimate_J
from .cohomology import cohomology_table, holder_bound

__version__ = "0.1.0"

__all__ = ["CarnotGroup", "GradedLieAlgebra", "JResult", "SampledHolderMap", "WeightedForm", "cohomology_table",
           "estimate_J", "group", "holder_bound", "load_algebra", "parse_form", "parse_map"]
