"""Physical constants and unit conversions used across the package.

Internal energy unit is meV everywhere; wavelength input is converted at
ingestion and never stored.
"""

import math

# Boltzmann constant in meV/K.
KB_MEV_PER_K = 0.0861733

# E(meV) = MEV_NM / lambda(nm).
MEV_NM = 1_239_841.98

# FWHM = GAUSSIAN_FWHM_FACTOR * sigma for a Gaussian line.
GAUSSIAN_FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))


def wavelength_nm_to_mev(wavelength_nm):
    """Convert photon wavelength in nm to energy in meV."""
    return MEV_NM / wavelength_nm


def mev_to_wavelength_nm(energy_mev):
    """Convert photon energy in meV to wavelength in nm."""
    return MEV_NM / energy_mev
