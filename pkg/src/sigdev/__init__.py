"""Path signatures, hyperbolic development and signature inversion."""

from .errors import SigdevError
from .hyperbolic import (
    DevelopmentPoint,
    develop_exact,
    develop_from_signature,
    develop_ode,
    develop_ode_path,
)
from .inversion import (
    InversionConfig,
    InversionReport,
    axis_invert,
    derivative_expansion,
    estimate_last_piece,
    estimate_total_length,
    invert_piecewise_linear,
    recover_endpoint_jet,
)
from .paths import AxisPath, PiecewisePath, concat, reverse
from .signature import signature_bruteforce, signature_of_path, strip_last_segment
from .tensor import TensorSeries, mul_exp, ts_exp_segment, ts_inverse, ts_mul

__all__ = [
    "AxisPath",
    "DevelopmentPoint",
    "InversionConfig",
    "InversionReport",
    "PiecewisePath",
    "SigdevError",
    "TensorSeries",
    "axis_invert",
    "concat",
    "derivative_expansion",
    "develop_exact",
    "develop_from_signature",
    "develop_ode",
    "develop_ode_path",
    "estimate_last_piece",
    "estimate_total_length",
    "invert_piecewise_linear",
    "mul_exp",
    "recover_endpoint_jet",
    "reverse",
    "signature_bruteforce",
    "signature_of_path",
    "strip_last_segment",
    "ts_exp_segment",
    "ts_inverse",
    "ts_mul",
]
