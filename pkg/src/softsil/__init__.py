"""Differentiable triangle-mesh silhouette rasterizer.

Pixel coverage is a T-conorm fold of per-face occlusion probabilities
``cdf(signed_distance / tau)``; gradients are exact and flow to mesh
vertices or camera parameters.  See the README for the full tour.
"""

from .distributions import DistributionSpec, parse_distribution
from .errors import (ConfigurationError, NonDifferentiableConfigError,
                     NumericError, SoftsilError)
from .geometry import Camera, Mesh, ScreenMesh, icosphere, load_obj, \
    signed_distance, transform_project
from .gradients import (CheckScene, GradientReport, finite_difference_check,
                        grad_loss_wrt_camera, grad_loss_wrt_vertices)
from .optim import AdamState, Schedule, adam_step, schedule_value
from .raster import Image, RenderConfig, hard_render, \
    render_depth_aggregated, render_silhouette
from .tconorms import TConormSpec, aggregate, parse_tconorm, tconorm, \
    tnorm_dual

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Camera", "CheckScene", "ConfigurationError",
    "DistributionSpec", "GradientReport", "Image", "Mesh",
    "NonDifferentiableConfigError", "NumericError", "RenderConfig",
    "Schedule", "ScreenMesh", "SoftsilError", "TConormSpec", "adam_step",
    "aggregate", "finite_difference_check", "grad_loss_wrt_camera",
    "grad_loss_wrt_vertices", "hard_render", "icosphere", "load_obj",
    "parse_distribution", "parse_tconorm", "render_depth_aggregated",
    "render_silhouette", "schedule_value", "signed_distance", "tconorm",
    "tnorm_dual", "transform_project",
]
