"""Homogeneous variational structures on coordinate charts.

Modules:
    scalarcalc: truncated Taylor jets for automatic differentiation.
    lagexpr: parsing and evaluating densities over named chart coordinates.
    exterior: multi-indices, differential forms, pullbacks and rectangle quadrature.
    finsler: first-order mechanics (Finsler densities, Hilbert form, EL, Noether).
    kawamech: second-order mechanics (Finsler-Kawaguchi densities).
    kawafield: first-order k-dimensional fields (k-areal densities).
    kawafield2: second-order k-dimensional fields.
    extremal: gauge-fixed shooting for first-order extremals.
    cli: the ``varik`` command.
"""

from . import exterior, extremal, finsler, kawafield, kawafield2, kawamech, lagexpr, paths, scalarcalc
from .exterior import DifferentialForm, NonConvergent, QuadratureSpec
from .extremal import BvpProblem, GaugeSpec, SingularHessian, solve_bvp
from .finsler import FinslerStructure, NoetherSpec, lift_conventional
from .kawafield import ArealStructure
from .kawafield2 import Areal2Structure
from .kawamech import KawaMechStructure
from .lagexpr import CoordSignature, LagrangianExpr, parse
from .paths import Curve, Patch
from .scalarcalc import Jet

__version__ = "0.1.0"

__all__ = [
    "scalarcalc",
    "lagexpr",
    "exterior",
    "paths",
    "finsler",
    "kawamech",
    "kawafield",
    "kawafield2",
    "extremal",
    "Jet",
    "CoordSignature",
    "LagrangianExpr",
    "parse",
    "DifferentialForm",
    "QuadratureSpec",
    "NonConvergent",
    "Curve",
    "Patch",
    "FinslerStructure",
    "NoetherSpec",
    "lift_conventional",
    "KawaMechStructure",
    "ArealStructure",
    "Areal2Structure",
    "GaugeSpec",
    "BvpProblem",
    "SingularHessian",
    "solve_bvp",
]
