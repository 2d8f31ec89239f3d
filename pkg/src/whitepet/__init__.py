"""White-image compensated MLEM for rotating partial-ring PET scanners."""

__version__ = "0.1.0"

from .geometry import ScannerGeometry, build_scanner, effective_half_length, enumerate_pairs, pair_weight
from .phantom import PhantomSpec, make_phantom, simulate_events
from .projection import EventList, Sinogram, SinogramGeometry, back_project, bin_events, radon
from .recon import ReconConfig, fbp, mlem, mlem_step
from .response import (TentParams, rmse_vs_reference, rotated_dirac, rotated_exact, rotated_numeric,
                       rotated_rect, rotated_triangle, tent_pdf)
from .whiteimage import GridSpec, Image, rasterize_radial, white_image_analytic, white_image_mc

__all__ = [
    "ScannerGeometry", "build_scanner", "effective_half_length", "enumerate_pairs", "pair_weight",
    "PhantomSpec", "make_phantom", "simulate_events",
    "EventList", "Sinogram", "SinogramGeometry", "back_project", "bin_events", "radon",
    "ReconConfig", "fbp", "mlem", "mlem_step",
    "TentParams", "rmse_vs_reference", "rotated_dirac", "rotated_exact", "rotated_numeric",
    "rotated_rect", "rotated_triangle", "tent_pdf",
    "GridSpec", "Image", "rasterize_radial", "white_image_analytic", "white_image_mc",
]
