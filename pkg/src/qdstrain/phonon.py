"""Exciton-phonon coupling model of the temperature-dependent emission.

The emission energy follows E(T) = E0 - S*<hw>*[coth(<hw>/2kT) - 1],
with E0 the zero-temperature emission energy, S the Huang-Rhys coupling
strength and <hw> the average phonon energy.  The bracket is evaluated
as 2/expm1(<hw>/kT), which is exact and overflow-safe for any T >= 0.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .constants import KB_MEV_PER_K
from .errors import InsufficientDataError, InvalidInputError
from .solver import SolverConfig, nlls_solve, scaled_condition_number

# Below this temperature the phonon occupation underflows anyway; route
# through the T -> 0 limit to avoid dividing by zero.
_T_FLOOR = 1e-3

DEGENERACY_CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class PhononFit:
    """Fitted (E0, S, hw_avg) for one emitter, energies in meV.

    covariance is 3x3 over (E0, S, hw_avg).  Flags: 'degenerate' when the
    scaled normal equations at the optimum exceed a condition number of
    1e8, 'max_iterations' when the fit stopped at the iteration cap.
    """

    E0: float
    S: float
    hw_avg: float
    covariance: np.ndarray = None
    emitter: str = ""
    flags: tuple = ()

    def __post_init__(self):
        if self.S < 0:
            raise InvalidInputError("Huang-Rhys factor must be >= 0")
        if not self.hw_avg > 0:
            raise InvalidInputError("average phonon energy must be > 0")
        cov = self.covariance
        if cov is None:
            cov = np.zeros((3, 3))
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (3, 3):
            raise InvalidInputError("covariance must be 3x3")
        if not np.allclose(cov, cov.T, rtol=1e-8, atol=1e-12):
            raise InvalidInputError("covariance must be symmetric")
        eigmin = float(np.min(np.linalg.eigvalsh(cov)))
        if eigmin < -1e-8 * max(1.0, float(np.max(np.abs(cov)))):
            raise InvalidInputError("covariance must be positive semi-definite")
        object.__setattr__(self, "covariance", cov)

    @property
    def E0_err(self):
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def S_err(self):
        return float(np.sqrt(self.covariance[1, 1]))

    @property
    def hw_avg_err(self):
        return float(np.sqrt(self.covariance[2, 2]))


def _occupation(hw, temperature):
    """coth(hw/2kT) - 1 evaluated overflow-safely; 0 in the T -> 0 limit."""
    t = np.asarray(temperature, dtype=float)
    hot = t >= _T_FLOOR
    u = hw / (KB_MEV_PER_K * np.where(hot, t, 1.0))
    # expm1(700) ~ 1e304; occupancies beyond that are zero anyway.
    occ = np.where(hot, 2.0 / np.expm1(np.minimum(u, 700.0)), 0.0)
    return occ


def _occupation_dhw(hw, temperature):
    """d/d(hw) of the occupation factor, overflow-safe."""
    t = np.asarray(temperature, dtype=float)
    hot = t >= _T_FLOOR
    kt = KB_MEV_PER_K * np.where(hot, t, 1.0)
    u = hw / kt
    # e^u/(e^u-1)^2 written as e^-u/(1-e^-u)^2 so large u underflows to 0.
    emu = np.exp(-u)
    denom = np.square(1.0 - emu)
    d = np.where(hot & (denom > 0), -2.0 * emu / np.where(denom > 0, denom, 1.0) / kt, 0.0)
    return d


def _model(params, temperatures):
    e0, s, hw = params
    return e0 - s * hw * _occupation(hw, temperatures)


def _jacobian_columns(params, temperatures):
    e0, s, hw = params
    occ = _occupation(hw, temperatures)
    docc = _occupation_dhw(hw, temperatures)
    d_e0 = np.ones_like(occ)
    d_s = -hw * occ
    d_hw = -s * occ - s * hw * docc
    return d_e0, d_s, d_hw


def odonnell_energy(fit, temperature):
    """Model emission energy at a temperature (K); accepts arrays.

    Strictly decreasing in T for S > 0 and equal to E0 at T = 0.
    """
    t = np.asarray(temperature, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("temperature must be >= 0")
    out = _model((fit.E0, fit.S, fit.hw_avg), t)
    if np.isscalar(temperature) or t.ndim == 0:
        return float(out)
    return out


def delta_E_at(fit, temperature):
    """Temperature-induced shift E(T) - E0; <= 0 for S > 0."""
    t = np.asarray(temperature, dtype=float)
    out = _model((fit.E0, fit.S, fit.hw_avg), t) - fit.E0
    if np.isscalar(temperature) or t.ndim == 0:
        return float(out)
    return out


def fit_odonnell(series, config=None, emitter=""):
    """Weighted least-squares fit of (E0, S, hw_avg) to an E(T) series.

    Parameters
    ----------
    series : sequence of (T, E, E_err)
        Temperatures in K, energies in meV.  Needs >= 4 distinct
        temperatures spanning >= 20 K; below that span the three
        parameters are practically degenerate.  When every E_err is
        positive the fit is weighted by 1/E_err^2, otherwise unweighted.
    config : SolverConfig, optional
    emitter : str
        Tag copied into the returned PhononFit.

    Returns
    -------
    PhononFit with Gauss-Newton covariance at the optimum.
    """
    arr = np.asarray(list(series), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError("series rows must be (T, E, E_err)")
    t, e, e_err = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.unique(t).size < 4:
        raise InsufficientDataError("need at least 4 distinct temperatures")
    if np.ptp(t) < 20.0:
        raise InsufficientDataError("temperature span must be >= 20 K")
    if np.any(t < 0):
        raise InvalidInputError("temperatures must be >= 0")

    weighted = bool(np.all(e_err > 0))
    sqw = 1.0 / e_err if weighted else np.ones_like(e)

    def residuals(p):
        return sqw * (_model(p, t) - e)

    def jacobian(p):
        d_e0, d_s, d_hw = _jacobian_columns(p, t)
        return np.column_stack((sqw * d_e0, sqw * d_s, sqw * d_hw))

    # Cold-start guesses: E0 from the warmest point of the band edge, the
    # coupling strength from the high-T asymptote dE/dT -> -2*S*k_B.
    e0_guess = float(np.max(e))
    t_max = float(np.max(t))
    e_at_tmax = float(e[np.argmax(t)])
    s_guess = (e0_guess - e_at_tmax) / (2.0 * KB_MEV_PER_K * max(t_max, 1.0))
    s_guess = float(np.clip(s_guess, 1e-3, 100.0))
    p0 = np.array([e0_guess, s_guess, 13.0])

    cfg = config or SolverConfig(max_iterations=500)
    cfg = replace(cfg, parameter_bounds=((None, None), (0.0, None), (1e-2, None)))
    result = nlls_solve(residuals, jacobian, p0, cfg)

    flags = tuple(result.flags)
    if result.condition_number > DEGENERACY_CONDITION_LIMIT:
        flags = flags + ("degenerate",)
    covariance = result.gn_covariance if weighted else result.covariance
    e0, s, hw = result.params
    return PhononFit(
        E0=float(e0),
        S=float(s),
        hw_avg=float(hw),
        covariance=covariance,
        emitter=emitter,
        flags=flags,
    )


@dataclass(frozen=True)
class ConfinementTrend:
    """Trends of coupling strength and redshift against emission energy."""

    slope_s_vs_e0: float
    rank_correlation: float
    slope_shift_vs_e0: float
    t_eval: float = 40.0
    degenerate: bool = False


def confinement_trend(fits, t_eval=40.0):
    """Correlate per-emitter coupling with zero-temperature energy.

    Returns the least-squares slope of S against E0, the Spearman rank
    correlation of the same pair, and the slope of the model shift
    delta_E(t_eval) against E0.  With fewer than 3 fits this is not
    defined and raises; identical inputs yield zero slopes with the
    degenerate flag set and an undefined (NaN) correlation.
    """
    if len(fits) < 3:
        raise InsufficientDataError("need at least 3 fits for a trend")
    e0 = np.array([f.E0 for f in fits], dtype=float)
    s = np.array([f.S for f in fits], dtype=float)
    shifts = np.array([delta_E_at(f, t_eval) for f in fits], dtype=float)
    if np.ptp(e0) == 0.0 or np.ptp(s) == 0.0:
        return ConfinementTrend(0.0, float("nan"), 0.0, t_eval, degenerate=True)
    slope_s = float(np.polyfit(e0, s, 1)[0])
    slope_shift = float(np.polyfit(e0, shifts, 1)[0])
    rho = float(stats.spearmanr(e0, s).statistic)
    return ConfinementTrend(slope_s, rho, slope_shift, t_eval, degenerate=False)
