"""KAZE features on a full-resolution nonlinear scale space."""

from .descriptor import Descriptor, compute_descriptors, describe, dominant_orientation, msurf_descriptor
from .detector import KeyPoint, detect, find_extrema, hessian_response
from .image import BorderPolicy, SeparableKernel, convolve_separable, gaussian_blur, gaussian_kernel, scharr_derivative
from .matcher import Match, match
from .parallel import num_threads, set_num_threads
from .pipeline import Features, StageTimings, extract
from .scale_space import (
    EvolutionLevel,
    FedCycle,
    ScaleSpaceOptions,
    build_scale_space,
    conductivity,
    estimate_contrast_k,
    evolution_schedule,
    fed_cycle,
    fed_step,
    fed_tau_steps,
)

__version__ = "0.1.0"
