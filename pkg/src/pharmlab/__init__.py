"""Numerical lab for p-harmonic radii, discrete p-modulus and decomposition inequalities."""

from .domains import (Ball, Complement, Cylinder, Everything, HalfSpace, Implicit, Intersection, MoebiusImage,
                      Ring, Rotated, Sector, Side, Union, dp_domain, from_dict)
from .estimator import RadiusEstimate, UnderResolvedError, estimate_radius_modulus, estimate_radius_pde
from .geometry import Hyperplane, Sphere, perpendicular_bisector, reflect, rotate
from .lab import (DecompositionReport, LabOptions, extremal_halfspace_pair, extremal_kufarev_split,
                  extremal_sectors, dp_extremal_domains, verify_corollary3, verify_kufarev, verify_lavrentiev,
                  verify_theorem1, verify_theorem2)
from .modulus import ConnectorFamily, PathFamily, solve_modulus
from .moebius import build_psi, separating_hypersphere
from .radii import PExponent, mu_inv, mu_p

__version__ = "0.1.0"
