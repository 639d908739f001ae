"""Spectrum and peak types, peak detection, and line-shape fitting.

Energies are meV throughout.  Line shapes default to Gaussian; a
Lorentzian option is available for sharp emitter lines.  Every fit
includes an additive constant baseline over the fit window so the
amplitude stays meaningful on offset data.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .constants import GAUSSIAN_FWHM_FACTOR
from .errors import InsufficientDataError, InvalidInputError
from .solver import SolverConfig, nlls_solve

_SHAPES = ("gaussian", "lorentzian")


@dataclass(frozen=True)
class Spectrum:
    """An energy-resolved intensity trace with acquisition metadata.

    energy_meV must be strictly increasing and the same length as
    intensity; intensities are non-negative counts.  Recognized meta keys
    include temperature_K, location_id, sample, material, piezo_field_kV_cm
    and resolution_meV; arbitrary extra keys are preserved.
    """

    energy_meV: np.ndarray
    intensity: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.energy_meV, dtype=float)
        y = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "energy_meV", e)
        object.__setattr__(self, "intensity", y)
        if e.ndim != 1 or y.ndim != 1:
            raise InvalidInputError("energy grid and intensity must be 1-D")
        if e.size != y.size:
            raise InvalidInputError(
                f"grid length {e.size} != intensity length {y.size}"
            )
        if e.size < 2:
            raise InvalidInputError("spectrum needs at least 2 points")
        if not np.all(np.isfinite(e)) or not np.all(np.isfinite(y)):
            raise InvalidInputError("spectrum contains non-finite values")
        steps = np.diff(e)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0))
            raise InvalidInputError(
                f"energy grid not strictly increasing at index {bad + 1}"
            )
        if np.any(y < 0):
            bad = int(np.argmax(y < 0))
            raise InvalidInputError(f"negative intensity at index {bad}")
        resolution = self.meta.get("resolution_meV")
        if resolution is not None:
            if float(np.min(steps)) < float(resolution) * (1.0 - 1e-9):
                raise InvalidInputError(
                    "grid spacing finer than the declared instrument resolution"
                )

    @property
    def grid_step(self):
        """Smallest grid spacing, in meV."""
        return float(np.min(np.diff(self.energy_meV)))

    def window(self, lo, hi):
        """Index mask of grid points with lo <= E <= hi."""
        return (self.energy_meV >= lo) & (self.energy_meV <= hi)


@dataclass(frozen=True)
class PeakFit:
    """Fitted line-shape parameters with covariance.

    covariance is the 3x3 symmetric matrix over (center, sigma,
    amplitude).  For a Gaussian, fwhm() = 2*sqrt(2 ln 2)*sigma; for a
    Lorentzian, sigma is the half-width parameter and fwhm() = 2*sigma.
    """

    center: float
    sigma: float
    amplitude: float
    shape: str = "gaussian"
    covariance: np.ndarray = None
    residual_norm: float = 0.0
    baseline: float = 0.0
    flags: tuple = ()

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise InvalidInputError(f"unknown line shape {self.shape!r}")
        if not self.sigma > 0:
            raise InvalidInputError("sigma must be > 0")
        if not self.amplitude > 0:
            raise InvalidInputError("amplitude must be > 0")
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

    def fwhm(self):
        if self.shape == "gaussian":
            return GAUSSIAN_FWHM_FACTOR * self.sigma
        return 2.0 * self.sigma

    @property
    def center_err(self):
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def sigma_err(self):
        return float(np.sqrt(self.covariance[1, 1]))

    @property
    def amplitude_err(self):
        return float(np.sqrt(self.covariance[2, 2]))


def gaussian_profile(x, center, sigma, amplitude):
    """Gaussian line amplitude*exp(-(x-center)^2 / (2 sigma^2))."""
    u = (x - center) / sigma
    return amplitude * np.exp(-0.5 * u * u)


def lorentzian_profile(x, center, gamma, amplitude):
    """Lorentzian line amplitude / (1 + ((x-center)/gamma)^2)."""
    u = (x - center) / gamma
    return amplitude / (1.0 + u * u)


def median_despike(spectrum, window=5, threshold=6.0):
    """Replace isolated spikes with the running median.

    A point is a spike when its deviation from the size-`window` median
    exceeds `threshold` times the MAD-based noise estimate.  Returns a new
    Spectrum; metadata is preserved and the number of replaced points is
    recorded under meta['despiked_points'].
    """
    if window < 3 or window % 2 == 0:
        raise InvalidInputError("window must be an odd integer >= 3")
    y = spectrum.intensity
    med = signal.medfilt(y, kernel_size=window)
    resid = y - med
    noise = 1.4826 * np.median(np.abs(resid - np.median(resid)))
    if noise == 0:
        noise = np.finfo(float).tiny
    spikes = np.abs(resid) > threshold * noise
    cleaned = np.where(spikes, med, y)
    meta = dict(spectrum.meta)
    meta["despiked_points"] = int(np.count_nonzero(spikes))
    return Spectrum(spectrum.energy_meV, np.maximum(cleaned, 0.0), meta)


def detect_peaks(spectrum, min_prominence, min_separation):
    """Locate candidate peak centers.

    Candidates are local maxima whose prominence over the surrounding
    baseline exceeds min_prominence (counts).  When two candidates fall
    within min_separation (meV) the higher-intensity one is kept; on an
    exact intensity tie the lower-energy one wins.  Returns centers
    sorted ascending, possibly empty.
    """
    if min_prominence <= 0:
        raise InvalidInputError("min_prominence must be > 0")
    if min_separation <= 0:
        raise InvalidInputError("min_separation must be > 0")
    idx, _ = signal.find_peaks(spectrum.intensity, prominence=min_prominence)
    if idx.size == 0:
        return np.empty(0)
    energies = spectrum.energy_meV[idx]
    heights = spectrum.intensity[idx]
    # Greedy suppression: strongest first, lower energy breaking ties.
    order = np.lexsort((energies, -heights))
    kept = []
    for k in order:
        e = energies[k]
        if all(abs(e - other) >= min_separation for other in kept):
            kept.append(e)
    return np.sort(np.asarray(kept))


def _profile_and_jacobian(shape, u, dc, sig, amp):
    """Model values and partials wrt (dc, sigma, amp) on centered grid u."""
    t = (u - dc) / sig
    if shape == "gaussian":
        g = np.exp(-0.5 * t * t)
        f = amp * g
        d_dc = amp * g * t / sig
        d_sig = amp * g * t * t / sig
    else:
        l = 1.0 / (1.0 + t * t)
        f = amp * l
        d_dc = amp * 2.0 * t * l * l / sig
        d_sig = amp * 2.0 * t * t * l * l / sig
        g = l
    return f, d_dc, d_sig, g


def fit_peaks(spectrum, window, initials, config=None):
    """Fit a sum of line shapes plus one constant baseline over a window.

    Parameters
    ----------
    spectrum : Spectrum
    window : (lo, hi)
        Energy interval in meV; must contain at least 5 grid points.
    initials : sequence of PeakFit
        Initial guesses; each center must lie inside the window.  The
        shape of each guess is kept fixed during the fit.
    config : SolverConfig, optional

    Returns
    -------
    list of PeakFit, one per initial guess, ordered as given.  All carry
    the shared residual_norm (total cost over the window) and baseline.
    Flags: 'max_iterations' when the iteration cap was hit (best-so-far
    parameters are still returned) and 'sigma_at_bound' when a width
    collapsed to the grid-spacing floor.
    """
    lo, hi = window
    mask = spectrum.window(lo, hi)
    npts = int(np.count_nonzero(mask))
    if npts < 5:
        raise InsufficientDataError(
            f"window [{lo}, {hi}] contains {npts} grid points, need >= 5"
        )
    for guess in initials:
        if not (lo <= guess.center <= hi):
            raise InvalidInputError(
                f"initial center {guess.center} outside window [{lo}, {hi}]"
            )
    if not initials:
        raise InvalidInputError("need at least one initial guess")

    e = spectrum.energy_meV[mask]
    y = spectrum.intensity[mask]
    sigma_floor = float(np.min(np.diff(e)))

    # Center energies on the first guess and normalize intensities so the
    # fit is translation- and scale-equivariant to rounding.
    e_ref = initials[0].center
    u = e - e_ref
    y_scale = float(np.max(np.abs(y)))
    if y_scale == 0.0:
        y_scale = 1.0
    yn = y / y_scale

    shapes = [g.shape for g in initials]
    k = len(initials)
    p0 = np.empty(3 * k + 1)
    bounds = []
    for i, g in enumerate(initials):
        p0[3 * i] = g.center - e_ref
        p0[3 * i + 1] = max(g.sigma, sigma_floor)
        p0[3 * i + 2] = g.amplitude / y_scale
        span = hi - lo
        bounds.extend(
            [(lo - e_ref - span, hi - e_ref + span), (sigma_floor, None), (1e-12, None)]
        )
    p0[-1] = float(np.min(yn))
    bounds.append((None, None))

    def model_residuals(p):
        f = np.full_like(u, p[-1])
        for i, shape in enumerate(shapes):
            dc, sig, amp = p[3 * i : 3 * i + 3]
            f = f + _profile_and_jacobian(shape, u, dc, sig, amp)[0]
        return f - yn

    def model_jacobian(p):
        jac = np.empty((u.size, p.size))
        jac[:, -1] = 1.0
        for i, shape in enumerate(shapes):
            dc, sig, amp = p[3 * i : 3 * i + 3]
            _, d_dc, d_sig, d_amp = _profile_and_jacobian(shape, u, dc, sig, amp)
            jac[:, 3 * i] = d_dc
            jac[:, 3 * i + 1] = d_sig
            jac[:, 3 * i + 2] = d_amp
        return jac

    cfg = config or SolverConfig()
    cfg = replace(cfg, parameter_bounds=tuple(bounds))
    result = nlls_solve(model_residuals, model_jacobian, p0, cfg)

    baseline = float(result.params[-1]) * y_scale
    cost = result.cost * y_scale * y_scale
    fits = []
    for i, shape in enumerate(shapes):
        dc, sig, amp = result.params[3 * i : 3 * i + 3]
        sub = result.covariance[3 * i : 3 * i + 3, 3 * i : 3 * i + 3].copy()
        # Undo the intensity normalization on the amplitude row/column.
        sub[2, :] *= y_scale
        sub[:, 2] *= y_scale
        flags = tuple(result.flags)
        if sig <= sigma_floor * (1.0 + 1e-9):
            flags = flags + ("sigma_at_bound",)
        fits.append(
            PeakFit(
                center=e_ref + float(dc),
                sigma=float(sig),
                amplitude=float(amp) * y_scale,
                shape=shape,
                covariance=sub,
                residual_norm=cost,
                baseline=baseline,
                flags=flags,
            )
        )
    return fits


def fit_peak(spectrum, window, initial, config=None):
    """Fit a single line shape plus constant baseline over a window.

    Thin wrapper over :func:`fit_peaks` for the one-peak case; see there
    for the contract.
    """
    return fit_peaks(spectrum, window, [initial], config)[0]
