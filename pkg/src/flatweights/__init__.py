"""Muckenhoupt-type weight constants and inequality checks on dyadic grids."""

from .constants import (
    ConstantsReport,
    a_1,
    a_p,
    bmo,
    bmo_w,
    constants_report,
    doubling,
    exp_luxemburg,
    fujii_wilson,
    hruscev,
    jn_sup_r,
    log_ainfty,
)
from .errors import FlatWeightsError
from .families import WeightFamilySpec, generate, parse_spec
from .grid import (
    Cube,
    CubeFamily,
    DoubleMode,
    GridFn,
    GridSpec,
    Weight,
    average,
    double_cube,
    dual_weight,
    enumerate_cubes,
    make_weight,
    weighted_average,
    weighted_measure,
)
from .maximal import local_maximal, reverse_weak_11
from .results import CheckResult, Sup

__version__ = "0.1.0"
