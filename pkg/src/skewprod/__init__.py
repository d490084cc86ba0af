"""Skew-product cocycles over irrational rotations and their crossed products."""

__version__ = "0.1.0"

from .torus import FourierPoly, RotationNumber, UnitaryFn, birkhoff_product  # noqa: E402
from .cocycle import CocycleSpec, CoefficientLaw, cocycle_at, twisted_family  # noqa: E402
from .coboundary import DetectorConfig, Verdict, classify  # noqa: E402
from .crossed import CPElement, GNSVector  # noqa: E402
from .classifier import ClassificationReport, classify_system  # noqa: E402
from .states import MeasureSpec, state_from_measure  # noqa: E402
from .conjugacy import are_cohomologous, build_intertwiner  # noqa: E402

__all__ = [
    "FourierPoly",
    "RotationNumber",
    "UnitaryFn",
    "birkhoff_product",
    "CocycleSpec",
    "CoefficientLaw",
    "cocycle_at",
    "twisted_family",
    "DetectorConfig",
    "Verdict",
    "classify",
    "CPElement",
    "GNSVector",
    "ClassificationReport",
    "classify_system",
    "MeasureSpec",
    "state_from_measure",
    "are_cohomologous",
    "build_intertwiner",
]
