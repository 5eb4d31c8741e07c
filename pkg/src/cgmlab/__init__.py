"""Conformal Gauss map toolkit for Willmore surfaces in R^3 and S^3."""

__version__ = "0.1.0"

from .surfaces import SurfaceSpec, builtin, load_surface  # noqa: E402
from .umbilic import detect_surface  # noqa: E402
from .gaussbonnet import fit_expansion, gauss_bonnet_sweep  # noqa: E402
from .energies import energy_report, willmore_energies  # noqa: E402

__all__ = [
    "SurfaceSpec",
    "builtin",
    "load_surface",
    "detect_surface",
    "fit_expansion",
    "gauss_bonnet_sweep",
    "energy_report",
    "willmore_energies",
]
