"""Fractional psi-Fueter operators with respect to a vector of weights on 4D boxes."""

from fracfueter.domain import Box4, make_box
from fracfueter.frac1d import SingularQuadSpec, WeightFunction
from fracfueter.frac_fueter import (
    FracQuad,
    WeightVector,
    frac_bp_eval,
    frac_kernel,
    frac_stokes_residual,
    op_C,
    op_D,
    op_I,
    op_P,
    m_term,
    prop1_residual,
)
from fracfueter.fueter import FieldFn, PolynomialField, constant_field, random_polynomial
from fracfueter.quaternion import PSI_STD, ComplexQuaternion, Quaternion, StructuralSet

__version__ = "0.1.0"
