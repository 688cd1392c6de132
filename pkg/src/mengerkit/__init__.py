"""Menger curvature, Jones beta numbers and rectifiability diagnostics for
weighted point clouds."""
from .measure import Ball, DiscreteMeasure, ScaleGrid, load_measure, save_measure
from .simplex import K1, K2, IntegrandKind
from .curvature import (CurvatureReport, integral_curvature_exact, monte_carlo_curvature,
                        pointwise_curvature)
from .beta import beta2, beta_p, centered_beta2, multiscale_beta_sum
from .generators import GeneratorSpec, generate, ground_truth

__version__ = "0.1.0"
