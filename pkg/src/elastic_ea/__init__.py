"""Sup-constrained elastic (SRVF) alignment of continuous rating data."""
from .align import (AlignmentMethod, AlignmentResult, align, align_fixed_delay,
                    align_identity, align_srvf, sup_deviation)
from .core import (GridMismatchError, NormalizedBound, SampledFunction, UniformGrid,
                   WarpingFunction, apply_warping, compose_warpings, identity_warping,
                   invert_warping, rescale_to_unit)
from .srvf import Srvf, group_action, phase_distance, srvf_l2_distance, to_srvf

__version__ = "0.1.0"

__all__ = [
    "AlignmentMethod", "AlignmentResult", "align", "align_fixed_delay", "align_identity",
    "align_srvf", "sup_deviation", "GridMismatchError", "NormalizedBound", "SampledFunction",
    "UniformGrid", "WarpingFunction", "apply_warping", "compose_warpings", "identity_warping",
    "invert_warping", "rescale_to_unit", "Srvf", "group_action", "phase_distance",
    "srvf_l2_distance", "to_srvf", "__version__",
]
