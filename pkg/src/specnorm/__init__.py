"""Spectral functional calculus, Sobolev/Besov norms and Besov-Sobolev interpolation inequality checks."""
from .spectral import (BumpFunction, SelfAdjointOperator, SpectralExpansion, WeightedMeasureSpace,
                       apply_spectral_function, eigendecompose, from_eigenpairs, make_bump,
                       make_space, spectral_localize)
from .norms import (ExtendedNorm, besov_homogeneous, besov_modified, distribution_function,
                    layer_cake_lp, lp_norm, sobolev_homogeneous, sobolev_inhomogeneous)
from .inequalities import (RefinedReport, StabilityReport, random_instance, refined_constant,
                           refined_exponent, sobolev_exponent, verify_localization_stability,
                           verify_refined_abstract)

__version__ = "0.1.0"
