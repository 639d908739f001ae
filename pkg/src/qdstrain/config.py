"""Analysis configuration: gauge tables, model parameters, solver policy.

One versioned JSON file holds every physical constant the pipeline
consumes.  A default is shipped with the package; any field can be
overridden by pointing the CLI at another file.
"""

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError
from .solver import SolverConfig
from .strain import GaugeFactor, VarshniParams


def default_config_text():
    return (resources.files("qdstrain") / "data/default_config.json").read_text()


@dataclass(frozen=True)
class AnalysisConfig:
    """Validated view over the configuration document."""

    raw: dict = field(repr=False)

    def __post_init__(self):
        if "gauge_factors" not in self.raw:
            raise ConfigError("config missing 'gauge_factors'")
        relax = self.raw.get("relaxation_percent")
        if relax is not None and not isinstance(relax, (int, float)):
            raise ConfigError("'relaxation_percent' must be a number")
        hist = self.raw.get("histogram", {})
        for key, value in hist.items():
            if not value > 0:
                raise ConfigError(f"histogram.{key} must be > 0")

    @property
    def config_hash(self):
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def relaxation_percent(self):
        return float(self.raw.get("relaxation_percent", 0.0))

    @property
    def seed(self):
        return int(self.raw.get("seed", 0))

    @property
    def ensemble_bin(self):
        return float(self.raw.get("histogram", {}).get("ensemble_bin_meV", 20.0))

    @property
    def piezo_bin(self):
        return float(self.raw.get("histogram", {}).get("piezo_bin_meV", 0.4))

    @property
    def reference_energy(self):
        value = self.raw.get("reference_energy_meV")
        if value is None:
            return None
        return float(value), float(self.raw.get("reference_energy_err_meV", 0.0))

    def solver_config(self):
        s = self.raw.get("solver", {})
        return SolverConfig(
            max_iterations=int(s.get("max_iterations", 300)),
            convergence_tolerance=float(s.get("convergence_tolerance", 1e-12)),
            initial_damping=float(s.get("initial_damping", 1e-3)),
        )

    def gauge(self, material, species):
        table = self.raw["gauge_factors"]
        try:
            entry = table[material][species]
        except KeyError:
            raise ConfigError(
                f"no gauge factor for material={material!r} species={species!r}"
            ) from None
        return GaugeFactor(
            value=float(entry["value_meV_per_percent"]),
            error=float(entry.get("error_meV_per_percent", 0.0)),
            species=species,
            material=material,
        )

    def varshni(self, material):
        table = self.raw.get("varshni", {})
        if material not in table:
            raise ConfigError(
                f"no Varshni parameters for material={material!r}; they are"
                " user-supplied and have no defaults"
            )
        entry = table[material]
        return VarshniParams(
            E0_varshni=float(entry["E0_meV"]),
            alpha=float(entry["alpha_meV_per_K"]),
            beta=float(entry["beta_K"]),
        )

    def broadening_rate(self, material):
        table = self.raw.get("broadening_rates_meV_per_percent", {})
        if material not in table:
            raise ConfigError(f"no broadening rate for material={material!r}")
        return float(table[material])


def load_config(path=None, overrides=None):
    """Load the analysis configuration, optionally overriding fields.

    overrides is a shallow dict merged on top of the file content; used
    by the CLI for --seed.
    """
    if path is None:
        raw = json.loads(default_config_text())
    else:
        with open(path) as fh:
            raw = json.load(fh)
    if overrides:
        raw = {**raw, **overrides}
    return AnalysisConfig(raw=raw)
