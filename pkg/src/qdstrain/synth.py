"""Seeded forward model producing ground-truth synthetic datasets.

Every generator is a pure function of its seed: per-location RNG
sub-streams are spawned from a single SeedSequence, so output is
bitwise reproducible and independent of iteration order.  The generated
datasets feed the analysis side in round-trip tests, which is the whole
reason this module exists.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import GAUSSIAN_FWHM_FACTOR
from .errors import InvalidInputError
from .phonon import PhononFit, odonnell_energy
from .spectral import Spectrum
from .strain import ShiftMeasurement, VarshniParams, varshni_energy


@dataclass(frozen=True)
class PopulationConfig:
    """Parameters of a synthetic strained-QD population.

    Strains are drawn from a normal distribution truncated to
    strain_bounds; emission energies follow e_base + gauge_qd*strain plus
    Gaussian jitter.  Coupling strengths realize the confinement trend
    S = s_ref * (E0/e_ref)**s_exponent.
    """

    n_locations: int
    strain_mean: float
    strain_spread: float
    e_base: float
    gauge_qd: float
    gauge_x0: float
    jitter_sigma: float
    qds_per_location: object = 1
    strain_bounds: tuple = (-2.0, 2.0)
    s_ref: float = 4.0
    e_ref: float = None
    s_exponent: float = 1.0
    hw_avg: float = 13.35
    intensity_range: tuple = (0.5, 1.5)
    sample: str = "synthetic"
    material: str = "WS2"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_locations < 1:
            raise InvalidInputError("n_locations must be >= 1")
        if self.jitter_sigma < 0:
            raise InvalidInputError("jitter_sigma must be >= 0")
        if self.strain_spread < 0:
            raise InvalidInputError("strain_spread must be >= 0")
        lo, hi = self.strain_bounds
        if not lo < hi:
            raise InvalidInputError("strain_bounds must be an increasing pair")
        if self.s_exponent <= 0:
            raise InvalidInputError("s_exponent must be > 0")


@dataclass(frozen=True)
class QDRecord:
    """Ground truth for one synthetic quantum dot."""

    location_id: str
    strain: float
    energy: float
    s: float
    hw_avg: float
    intensity: float = 1.0
    sample: str = "synthetic"
    material: str = "WS2"

    def __post_init__(self):
        if not self.energy > 0:
            raise InvalidInputError("energy must be > 0")
        if self.s < 0:
            raise InvalidInputError("coupling strength must be >= 0")


def _truncated_normal(rng, mean, spread, bounds, max_tries=1000):
    if spread == 0.0:
        return float(np.clip(mean, *bounds))
    for _ in range(max_tries):
        value = rng.normal(mean, spread)
        if bounds[0] <= value <= bounds[1]:
            return float(value)
    return float(np.clip(mean, *bounds))


def _count_for_location(rng, spec):
    if isinstance(spec, int):
        if spec < 1:
            raise InvalidInputError("qds_per_location must be >= 1")
        return spec
    kind, mean = spec
    if kind != "poisson":
        raise InvalidInputError(f"unknown qds_per_location spec {spec!r}")
    return int(max(1, rng.poisson(mean)))


def generate_population(config):
    """Generate the ground-truth QD records of one sample.

    Deterministic per seed; per-location sub-streams keep the draw for
    location i independent of how many QDs earlier locations produced.
    """
    root = np.random.SeedSequence(config.rng_seed)
    children = root.spawn(config.n_locations)
    e_ref = config.e_ref if config.e_ref is not None else config.e_base
    records = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        n_qd = _count_for_location(rng, config.qds_per_location)
        strain = _truncated_normal(
            rng, config.strain_mean, config.strain_spread, config.strain_bounds
        )
        for _ in range(n_qd):
            jitter = rng.normal(0.0, config.jitter_sigma) if config.jitter_sigma else 0.0
            energy = config.e_base + config.gauge_qd * strain + jitter
            s = config.s_ref * (energy / e_ref) ** config.s_exponent
            intensity = rng.uniform(*config.intensity_range)
            records.append(
                QDRecord(
                    location_id=f"NP-{i:03d}",
                    strain=strain,
                    energy=energy,
                    s=max(s, 0.0),
                    hw_avg=config.hw_avg,
                    intensity=intensity,
                    sample=config.sample,
                    material=config.material,
                )
            )
    return records


def generate_spectrum(records, grid, linewidth, noise_sigma=0.0, shot_noise=False,
                      seed=0, meta=None):
    """Render records at one location into a noisy spectrum.

    Each record contributes a Gaussian line of the given FWHM linewidth
    (meV) at its emission energy, with height records[i].intensity.
    Records outside the grid are dropped and listed in
    meta['dropped_records'].  Additive noise is Gaussian with
    noise_sigma counts; shot noise draws Poisson counts from the model.
    Intensities are clipped at zero, counts being non-negative.
    """
    grid = np.asarray(grid, dtype=float)
    if not linewidth > 0:
        raise InvalidInputError("linewidth must be > 0")
    rng = np.random.default_rng(seed)
    sigma = linewidth / GAUSSIAN_FWHM_FACTOR
    lo, hi = float(grid[0]), float(grid[-1])
    y = np.zeros_like(grid)
    dropped = []
    for rec in records:
        if not lo <= rec.energy <= hi:
            dropped.append(rec.location_id)
            continue
        u = (grid - rec.energy) / sigma
        y += rec.intensity * np.exp(-0.5 * u * u)
    if shot_noise:
        y = rng.poisson(np.maximum(y, 0.0)).astype(float)
    if noise_sigma > 0:
        y = y + rng.normal(0.0, noise_sigma, size=y.size)
    out_meta = dict(meta or {})
    if dropped:
        out_meta["dropped_records"] = dropped
    return Spectrum(grid, np.maximum(y, 0.0), out_meta)


def generate_temperature_series(record, temperatures, noise_sigma=0.0, seed=0):
    """Emission energies of one emitter over a temperature ladder.

    The record's (energy, s, hw_avg) act as the true zero-temperature
    model parameters; E_err on every row equals noise_sigma.
    """
    temps = np.asarray(temperatures, dtype=float)
    if temps.size == 0:
        raise InvalidInputError("need at least one temperature")
    truth = PhononFit(E0=record.energy, S=record.s, hw_avg=record.hw_avg)
    rng = np.random.default_rng(seed)
    rows = []
    for t in temps:
        e = odonnell_energy(truth, float(t))
        if noise_sigma > 0:
            e += rng.normal(0.0, noise_sigma)
        rows.append((float(t), float(e), float(noise_sigma)))
    return rows


@dataclass(frozen=True)
class PiezoSweep:
    """Field-dependent shifts of QDs and of the exciton reference."""

    fields: tuple
    qd_shifts: tuple
    x0_shifts: tuple

    def at_field(self, field_value):
        idx = self.fields.index(field_value)
        return self.qd_shifts[idx], self.x0_shifts[idx]


def generate_piezo_sweep(population, fields, blueshift_fraction, shift_scale,
                         seed=0, qd_blue_max=None, qd_red_max=None, n_x0=12,
                         noise_sigma=0.0):
    """Linear-in-field emission shifts for a QD population.

    Signs are assigned deterministically in count: exactly
    round(blueshift_fraction * n) QDs blueshift, the assignment itself is
    a seeded permutation.  Shift magnitudes at the maximum field are
    rescaled so the largest exciton shift equals shift_scale and the
    largest QD blueshift/redshift equal qd_blue_max/qd_red_max (defaults
    1.9x and 0.8x shift_scale).  The QD distribution is therefore wider
    than the exciton one whenever the QD/X0 sensitivity ratio exceeds 1.
    """
    if not 0.0 <= blueshift_fraction <= 1.0:
        raise InvalidInputError("blueshift_fraction must be in [0, 1]")
    if not shift_scale > 0:
        raise InvalidInputError("shift_scale must be > 0")
    fields = tuple(float(f) for f in fields)
    if not fields:
        raise InvalidInputError("need at least one field value")
    if qd_blue_max is None:
        qd_blue_max = 1.9 * shift_scale
    if qd_red_max is None:
        qd_red_max = 0.8 * shift_scale

    n = len(population)
    if n == 0:
        raise InvalidInputError("population is empty")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    f_max = max(abs(f) for f in fields)
    if f_max == 0:
        f_max = 1.0

    n_blue = int(round(blueshift_fraction * n))
    signs = np.concatenate((np.ones(n_blue), -np.ones(n - n_blue)))
    signs = signs[rng.permutation(n)]

    def rescaled(count, target):
        raw = rng.uniform(0.15, 1.0, size=count)
        if count == 0:
            return raw
        return raw * (target / raw.max())

    blue_mag = rescaled(n_blue, qd_blue_max)
    red_mag = rescaled(n - n_blue, qd_red_max)
    magnitudes = np.empty(n)
    magnitudes[signs > 0] = blue_mag
    magnitudes[signs < 0] = red_mag
    qd_full = signs * magnitudes

    n_x0 = min(n_x0, n)
    x0_full = rescaled(n_x0, shift_scale)

    qd_per_field = []
    x0_per_field = []
    for f in fields:
        ratio = f / f_max
        qd_row = []
        for i, rec in enumerate(population):
            de = qd_full[i] * ratio
            if noise_sigma > 0:
                de += rng.normal(0.0, noise_sigma)
            qd_row.append(
                ShiftMeasurement(
                    delta_E=float(de),
                    delta_E_err=float(noise_sigma),
                    context={
                        "field_kV_cm": f,
                        "location_id": rec.location_id,
                        "emitter": f"QD{i:03d}",
                    },
                )
            )
        x0_row = []
        for j in range(n_x0):
            de = x0_full[j] * ratio
            if noise_sigma > 0:
                de += rng.normal(0.0, noise_sigma)
            x0_row.append(
                ShiftMeasurement(
                    delta_E=float(de),
                    delta_E_err=float(noise_sigma),
                    context={
                        "field_kV_cm": f,
                        "location_id": population[j].location_id,
                        "emitter": "X0",
                    },
                )
            )
        qd_per_field.append(tuple(qd_row))
        x0_per_field.append(tuple(x0_row))
    return PiezoSweep(fields=fields, qd_shifts=tuple(qd_per_field),
                      x0_shifts=tuple(x0_per_field))


@dataclass(frozen=True)
class CooldownSurveyConfig:
    """Synthetic exciton survey at warm and cold temperatures.

    Produces per-location exciton peak energies at t_warm and t_cold for
    nanostressor locations (built-in strain that partially relaxes on
    cooling) and flat locations (zero strain), following the bandgap
    baseline plus the gauge response.
    """

    n_locations: int
    n_flat: int
    strain_mean: float
    strain_spread: float
    relaxation: float
    gauge_x0: float
    varshni: VarshniParams
    t_warm: float = 296.0
    t_cold: float = 4.0
    noise_sigma: float = 0.5
    sample: str = "synthetic"
    material: str = "WS2"
    rng_seed: int = 0


def generate_cooldown_survey(config):
    """Exciton peak rows (location, T, E, E_err) for a cool-down survey.

    The unstrained reference energy at each temperature follows the
    bandgap model; strained locations add gauge_x0 * strain(T) where the
    cold strain is the warm strain plus the configured relaxation.  Flat
    locations carry the 'flat-' prefix convention used by the pipeline.
    """
    root = np.random.SeedSequence(config.rng_seed)
    children = root.spawn(config.n_locations + config.n_flat)
    rows = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        flat = i >= config.n_locations
        if flat:
            loc = f"flat-{i - config.n_locations:03d}"
            eps_warm = 0.0
            eps_cold = 0.0
        else:
            loc = f"NP-{i:03d}"
            eps_warm = _truncated_normal(
                rng, config.strain_mean, config.strain_spread, (-2.0, 2.0)
            )
            eps_cold = eps_warm + config.relaxation
        for t, eps in ((config.t_warm, eps_warm), (config.t_cold, eps_cold)):
            e = varshni_energy(config.varshni, t) + config.gauge_x0 * eps
            if config.noise_sigma > 0:
                e += rng.normal(0.0, config.noise_sigma)
            rows.append(
                {
                    "sample": config.sample,
                    "material": config.material,
                    "location_id": loc,
                    "temperature_K": float(t),
                    "energy_meV": float(e),
                    "energy_err_meV": float(config.noise_sigma),
                }
            )
    return rows
