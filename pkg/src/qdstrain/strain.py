"""Emission-shift to biaxial-strain conversion with error propagation.

Sign conventions are fixed globally: tensile strain is positive, a
redshift is a negative energy shift, and gauge factors are signed
(negative when tensile strain redshifts the emission).  A redshift
combined with a negative gauge therefore yields positive (tensile)
strain.
"""

import math
from dataclasses import dataclass, field

from .errors import InvalidInputError


@dataclass(frozen=True)
class GaugeFactor:
    """Strain sensitivity dE/d(epsilon) in meV per % strain, signed."""

    value: float
    error: float = 0.0
    species: str = "X0"
    material: str = ""

    def __post_init__(self):
        if self.value == 0:
            raise InvalidInputError("gauge factor must be nonzero")
        if self.error < 0:
            raise InvalidInputError("gauge error must be >= 0")


@dataclass(frozen=True)
class ShiftMeasurement:
    """An energy shift vs a reference, in meV (redshift negative)."""

    delta_E: float
    delta_E_err: float = 0.0
    weight: float = None
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta_E_err < 0:
            raise InvalidInputError("delta_E_err must be >= 0")
        if self.weight is not None and not self.weight > 0:
            raise InvalidInputError("weight must be > 0 when present")


@dataclass(frozen=True)
class StrainEstimate:
    """Signed biaxial strain in % (tensile positive) with 1-sigma error."""

    epsilon: float
    epsilon_err: float = 0.0
    method: str = "PL"
    temperature: float = None

    def __post_init__(self):
        if self.epsilon_err < 0:
            raise InvalidInputError("epsilon_err must be >= 0")


@dataclass(frozen=True)
class VarshniParams:
    """Parameters of E(T) = E0 - alpha*T^2/(T + beta), in meV, meV/K, K.

    Values are user-supplied; none are shipped as defaults.
    """

    E0_varshni: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError("beta must be > 0")


def strain_error(epsilon, delta_E, delta_E_err, gauge_value, gauge_err):
    """Propagated 1-sigma strain error.

    Computes |epsilon| * sqrt((delta_E_err/delta_E)^2 + (G_err/G)^2).
    A zero shift with a nonzero shift error has no defined relative error
    and raises; a zero shift with zero error contributes nothing.
    """
    if gauge_value == 0:
        raise InvalidInputError("gauge value must be nonzero")
    if delta_E == 0:
        if delta_E_err > 0:
            raise InvalidInputError(
                "relative shift error undefined for zero shift with nonzero error"
            )
        rel_shift = 0.0
    else:
        rel_shift = delta_E_err / delta_E
    rel_gauge = gauge_err / gauge_value
    return abs(epsilon) * math.hypot(rel_shift, rel_gauge)


def strain_from_shift(shift, gauge, temperature=None, method="PL"):
    """Convert an emission shift to a strain estimate.

    epsilon = delta_E / G with the error propagated from the relative
    errors of the shift and the gauge in quadrature.
    """
    eps = shift.delta_E / gauge.value
    err = strain_error(eps, shift.delta_E, shift.delta_E_err, gauge.value, gauge.error)
    return StrainEstimate(eps, err, method=method, temperature=temperature)


def shift_error_subtraction(err_a, err_b):
    """Error of a difference of two energies: sqrt(err_a^2 + err_b^2)."""
    if err_a < 0 or err_b < 0:
        raise InvalidInputError("errors must be >= 0")
    return math.hypot(err_a, err_b)


def varshni_energy(params, temperature):
    """Empirical bandgap temperature dependence E0 - alpha*T^2/(T+beta)."""
    if temperature < 0:
        raise InvalidInputError("temperature must be >= 0")
    t = float(temperature)
    return params.E0_varshni - params.alpha * t * t / (t + params.beta)


def varshni_shift(params, t_from, t_to):
    """Expected emission shift E(t_to) - E(t_from) from the bandgap model."""
    return varshni_energy(params, t_to) - varshni_energy(params, t_from)


def decompose_temperature_shift(measured_shift, varshni_expected, gauge, temperature=4.0):
    """Strain relaxation from the shift in excess of the bandgap baseline.

    The excess of the measured cool-down shift over the expected bandgap
    shift is attributed to a change of the built-in strain and converted
    through the exciton gauge factor.  Negative values mean tensile-strain
    relaxation upon cooling.
    """
    excess = measured_shift.delta_E - varshni_expected
    delta_eps = excess / gauge.value
    err = strain_error(delta_eps, excess, measured_shift.delta_E_err, gauge.value, gauge.error)
    return StrainEstimate(delta_eps, err, method="PL", temperature=temperature)


def apply_relaxation(epsilon_rt, relaxation, temperature=4.0):
    """Shift a room-temperature strain by a fixed relaxation offset.

    The offset is applied as-is and the error is carried unchanged, which
    matches treating the relaxation as a systematic correction.
    """
    return StrainEstimate(
        epsilon_rt.epsilon + relaxation,
        epsilon_rt.epsilon_err,
        method=epsilon_rt.method,
        temperature=temperature,
    )
