"""Ensemble histogramming, dual-axis regression, and broadening models.

The regression used for gauge-factor extraction is the classic
iteratively reweighted straight-line solution for data with errors on
both coordinates (York's method with uncorrelated errors).  Reported
parameter errors are inflated by sqrt(max(1, reduced chi-square)), the
usual convention when the stated measurement errors underestimate the
scatter; goodness carries the reduced chi-square itself.
"""

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .constants import GAUSSIAN_FWHM_FACTOR
from .errors import InsufficientDataError, InvalidInputError
from .solver import SolverConfig, nlls_solve

YORK_SLOPE_TOLERANCE = 1e-10
YORK_MAX_ITERATIONS = 100
ERROR_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class EnsembleStats:
    """Histogram of a QD population, optionally with a Gaussian summary.

    counts uses half-open bins [edge_k, edge_{k+1}); an energy exactly on
    an interior edge belongs to the upper bin.  gauss_* fields are None
    until fit_gaussian_histogram fills them.
    """

    bin_size: float
    bin_edges: np.ndarray
    counts: np.ndarray
    n_total: int
    gauss_peak_energy: float = None
    gauss_fwhm: float = None
    gauss_amplitude: float = None
    covariance: np.ndarray = None
    flags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "bin_edges", np.asarray(self.bin_edges, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))
        if self.bin_edges.size != self.counts.size + 1:
            raise InvalidInputError("bin_edges must have one more entry than counts")
        if self.gauss_fwhm is not None and not self.gauss_fwhm > 0:
            raise InvalidInputError("fitted FWHM must be > 0")

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass(frozen=True)
class BroadeningModel:
    """Linear ensemble-linewidth model fwhm = omega0 + rate * strain."""

    rate: float
    omega0: float
    rate_err: float = 0.0
    omega0_err: float = 0.0

    def __post_init__(self):
        if self.rate < 0:
            raise InvalidInputError("broadening rate must be >= 0")
        if not self.omega0 > 0:
            raise InvalidInputError("zero-strain intercept must be > 0")


@dataclass(frozen=True)
class RegressionResult:
    """Straight-line fit y = slope*x + intercept with 1-sigma errors."""

    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    goodness: float
    n_points: int = 0
    flags: tuple = ()

    def __post_init__(self):
        if self.slope_err < 0 or self.intercept_err < 0:
            raise InvalidInputError("errors must be >= 0")


def build_histogram(energies, bin_size, origin=None, sigma_clip=None):
    """Histogram energies into half-open bins of width bin_size.

    origin defaults to min(energies) floored to the nearest bin multiple,
    which makes edge placement deterministic.  sigma_clip, when set,
    drops energies more than that many standard deviations from the mean
    before binning (single pass; off by default).
    """
    e = np.asarray(energies, dtype=float)
    if e.size == 0:
        raise InsufficientDataError("no energies to histogram")
    if not bin_size > 0:
        raise InvalidInputError("bin_size must be > 0")
    if sigma_clip is not None:
        mu, sd = float(np.mean(e)), float(np.std(e))
        if sd > 0:
            e = e[np.abs(e - mu) <= sigma_clip * sd]
    if origin is None:
        origin = math.floor(float(np.min(e)) / bin_size) * bin_size
    idx = np.floor((e - origin) / bin_size).astype(int)
    in_range = idx >= 0
    idx = idx[in_range]
    if idx.size == 0:
        raise InvalidInputError("all energies fall below the histogram origin")
    n_bins = int(np.max(idx)) + 1
    counts = np.bincount(idx, minlength=n_bins)
    edges = origin + bin_size * np.arange(n_bins + 1)
    return EnsembleStats(
        bin_size=float(bin_size),
        bin_edges=edges,
        counts=counts,
        n_total=int(idx.size),
    )


def fit_gaussian_histogram(stats, config=None, weighted=True):
    """Fit a Gaussian to histogram counts and extract peak and FWHM.

    Needs at least 4 nonzero bins.  With weighted=True the residuals are
    scaled by 1/sqrt(max(count, 1)), the Poisson-motivated choice that
    keeps empty bins from dominating; weighted=False fits raw counts.
    Returns a new EnsembleStats carrying the fitted peak energy, FWHM
    (2*sqrt(2 ln 2)*sigma) and the 3x3 covariance over (center, sigma,
    amplitude).
    """
    counts = stats.counts.astype(float)
    if int(np.count_nonzero(counts)) < 4:
        raise InsufficientDataError("need at least 4 nonzero bins to fit")
    x = stats.bin_centers
    sigma_w = np.sqrt(np.maximum(counts, 1.0)) if weighted else np.ones_like(counts)

    total = counts.sum()
    mu0 = float((x * counts).sum() / total)
    var0 = float((counts * (x - mu0) ** 2).sum() / total)
    sig0 = max(math.sqrt(max(var0, 0.0)), stats.bin_size / 2.0)
    amp0 = float(counts.max())
    p0 = np.array([mu0, sig0, amp0])

    def residuals(p):
        mu, sig, amp = p
        u = (x - mu) / sig
        return (amp * np.exp(-0.5 * u * u) - counts) / sigma_w

    def jacobian(p):
        mu, sig, amp = p
        u = (x - mu) / sig
        g = np.exp(-0.5 * u * u)
        return np.column_stack(
            (
                amp * g * u / sig / sigma_w,
                amp * g * u * u / sig / sigma_w,
                g / sigma_w,
            )
        )

    cfg = config or SolverConfig(max_iterations=300)
    cfg = dc_replace(
        cfg,
        parameter_bounds=(
            (None, None),
            (stats.bin_size / 10.0, None),
            (1e-12, None),
        ),
    )
    result = nlls_solve(residuals, jacobian, p0, cfg)
    mu, sig, amp = result.params
    return dc_replace(
        stats,
        gauss_peak_energy=float(mu),
        gauss_fwhm=float(GAUSSIAN_FWHM_FACTOR * sig),
        gauss_amplitude=float(amp),
        covariance=result.covariance,
        flags=tuple(result.flags),
    )


def _floored(err, values, floor):
    err = np.asarray(err, dtype=float).copy()
    if floor is None:
        rng = float(np.ptp(values))
        if rng == 0.0:
            rng = max(float(np.max(np.abs(values))), 1.0)
        floor = ERROR_FLOOR_FRACTION * rng
    err[err < floor] = floor
    return err, floor


def weighted_ols(x, y, y_err):
    """Closed-form weighted straight-line fit ignoring x errors.

    Weights are 1/y_err^2.  Used as the initializer of york_fit and as
    the independent limiting-case oracle in the tests.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.square(np.asarray(y_err, dtype=float))
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx == 0.0:
        raise InvalidInputError("x values are degenerate")
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    slope_err = math.sqrt(1.0 / sxx)
    intercept_err = math.sqrt(1.0 / sw + xbar * xbar / sxx)
    dof = max(x.size - 2, 1)
    chi2 = float((w * (y - slope * x - intercept) ** 2).sum()) / dof
    return RegressionResult(slope, intercept, slope_err, intercept_err, chi2, x.size)


def york_fit(points, max_iterations=YORK_MAX_ITERATIONS, slope_tolerance=YORK_SLOPE_TOLERANCE,
             error_floor=None):
    """Straight-line fit with errors on both coordinates.

    Parameters
    ----------
    points : sequence of (x, x_err, y, y_err)
        At least 3 points.  Zero errors are replaced by a floor of 1e-6
        of the data range per axis (or `error_floor` when given).
    max_iterations, slope_tolerance :
        The iteration stops when the slope changes by less than
        slope_tolerance between passes; hitting the cap flags
        'non_convergence' on an otherwise usable result.

    Returns
    -------
    RegressionResult.  With all x errors at the floor the solution
    coincides with weighted ordinary least squares.
    """
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InvalidInputError("points rows must be (x, x_err, y, y_err)")
    if arr.shape[0] < 3:
        raise InsufficientDataError("need at least 3 points")
    x, x_err, y, y_err = arr.T
    x_err, x_floor = _floored(x_err, x, error_floor)
    y_err, _ = _floored(y_err, y, error_floor)
    if np.ptp(x) <= x_floor:
        raise InvalidInputError("x spread below the error floor; line undetermined")

    omega_x = 1.0 / np.square(x_err)
    omega_y = 1.0 / np.square(y_err)

    slope = weighted_ols(x, y, y_err).slope
    flags = ()
    for _ in range(max_iterations):
        w = omega_x * omega_y / (omega_x + slope * slope * omega_y)
        sw = w.sum()
        xbar = (w * x).sum() / sw
        ybar = (w * y).sum() / sw
        u = x - xbar
        v = y - ybar
        beta = w * (u / omega_y + slope * v / omega_x)
        new_slope = (w * beta * v).sum() / (w * beta * u).sum()
        if abs(new_slope - slope) < slope_tolerance:
            slope = new_slope
            break
        slope = new_slope
    else:
        flags = ("non_convergence",)

    w = omega_x * omega_y / (omega_x + slope * slope * omega_y)
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    u = x - xbar
    v = y - ybar
    beta = w * (u / omega_y + slope * v / omega_x)
    intercept = ybar - slope * xbar
    x_adj = xbar + beta
    xbar_adj = (w * x_adj).sum() / sw
    u_adj = x_adj - xbar_adj
    slope_var = 1.0 / (w * u_adj * u_adj).sum()
    intercept_var = 1.0 / sw + xbar_adj * xbar_adj * slope_var

    dof = max(arr.shape[0] - 2, 1)
    chi2 = float((w * (y - slope * x - intercept) ** 2).sum()) / dof
    scale = math.sqrt(max(1.0, chi2))
    return RegressionResult(
        slope=float(slope),
        intercept=float(intercept),
        slope_err=float(math.sqrt(slope_var) * scale),
        intercept_err=float(math.sqrt(intercept_var) * scale),
        goodness=chi2,
        n_points=arr.shape[0],
        flags=flags,
    )


def gauge_factor_fit(samples, material="", species="QD", error_floor=None):
    """Gauge factor from ensemble peak energies against local strain.

    samples are (StrainEstimate, peak_energy, energy_err) triples; the
    slope of the dual-error regression is the signed gauge factor.
    """
    from .strain import GaugeFactor

    if len(samples) < 3:
        raise InsufficientDataError("need at least 3 samples for a gauge fit")
    points = [
        (est.epsilon, est.epsilon_err, energy, err)
        for est, energy, err in samples
    ]
    fit = york_fit(points, error_floor=error_floor)
    return GaugeFactor(value=fit.slope, error=fit.slope_err, species=species,
                       material=material)


def weighted_mean_shift(shifts):
    """Weighted average of signed shifts, sum(dE*w)/sum(w); w = 1 if unset."""
    if not shifts:
        raise InsufficientDataError("no shifts given")
    w = np.array([s.weight if s.weight is not None else 1.0 for s in shifts])
    de = np.array([s.delta_E for s in shifts])
    total = w.sum()
    if total <= 0:
        raise InvalidInputError("total weight must be > 0")
    return float((de * w).sum() / total)


def blueshift_fraction(shifts):
    """Fraction of shifts that are strictly positive.

    Exactly-zero shifts count toward the denominator but not the
    numerator.
    """
    if not shifts:
        raise InsufficientDataError("no shifts given")
    de = np.array([s.delta_E for s in shifts])
    return float(np.count_nonzero(de > 0) / de.size)


def broadening_rate(shifts, reference_strain):
    """Ensemble broadening per % strain from the shift extremes.

    Both the largest blueshift and the largest redshift widen the
    ensemble, so the rate is (max positive shift + |max negative shift|)
    divided by the strain that produced them.  All-zero shifts give 0.
    """
    if not reference_strain > 0:
        raise InvalidInputError("reference_strain must be > 0")
    if not shifts:
        raise InsufficientDataError("no shifts given")
    de = np.array([s.delta_E for s in shifts])
    max_blue = max(float(de.max()), 0.0)
    max_red = min(float(de.min()), 0.0)
    return (max_blue + abs(max_red)) / reference_strain


@dataclass(frozen=True)
class CrossMaterialBroadening:
    """Broadening transferred to another material via gauge ratios."""

    per_mev_shift: float
    per_percent_strain: float


def cross_material_broadening(rate_known, ratio_known, ratio_target, x0_gauge_target):
    """Scale a known per-meV ensemble broadening to another material.

    The broadening per 1 meV of exciton shift scales with the QD/X0
    gauge ratio; dividing by the strain equivalent of 1 meV of exciton
    shift (1/|G_X0|) converts it to meV per % strain.
    """
    if ratio_known <= 0 or ratio_target <= 0:
        raise InvalidInputError("gauge ratios must be > 0")
    if x0_gauge_target == 0:
        raise InvalidInputError("target exciton gauge must be nonzero")
    per_mev = rate_known * ratio_target / ratio_known
    per_percent = per_mev * abs(x0_gauge_target)
    return CrossMaterialBroadening(per_mev, per_percent)


def predict_ensemble_fwhm(model, strain):
    """Ensemble FWHM omega0 + rate*strain at a non-negative strain."""
    if strain < 0:
        raise InvalidInputError("strain must be >= 0")
    return model.omega0 + model.rate * strain


def fit_broadening_intercept(samples, rate):
    """Fit only the zero-strain intercept with the rate held fixed.

    samples are (strain, fwhm, fwhm_err) triples; the intercept is the
    error-weighted mean of fwhm - rate*strain and its error follows the
    same sqrt(max(1, chi2)) inflation convention as york_fit.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError("samples rows must be (strain, fwhm, fwhm_err)")
    if arr.shape[0] < 1:
        raise InsufficientDataError("need at least one sample")
    strain, fwhm, fwhm_err = arr.T
    fwhm_err, _ = _floored(fwhm_err, fwhm, None)
    w = 1.0 / np.square(fwhm_err)
    resid = fwhm - rate * strain
    omega0 = float((w * resid).sum() / w.sum())
    var = 1.0 / w.sum()
    dof = max(arr.shape[0] - 1, 1)
    chi2 = float((w * (resid - omega0) ** 2).sum()) / dof
    err = math.sqrt(var) * math.sqrt(max(1.0, chi2))
    return BroadeningModel(rate=float(rate), omega0=omega0, omega0_err=err)
