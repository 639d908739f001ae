"""CSV/JSON interchange formats shared by the CLI and the generators.

CSV files carry a declared-unit header row; energies are written with
1e-4 meV precision (below the instrument resolution, above float
noise).  Every writer's output is re-ingestable by the matching reader,
and writing what was read reproduces the file byte for byte.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .constants import wavelength_nm_to_mev
from .errors import SchemaError
from .spectral import Spectrum
from .strain import ShiftMeasurement

ENERGY_FMT = "{:.4f}"
STRAIN_FMT = "{:.6f}"
GENERIC_FMT = "{:.6g}"

SPECTRUM_HEADERS = ("energy_meV", "wavelength_nm")

_META_KEYS = (
    "sample",
    "location_id",
    "material",
    "temperature_K",
    "piezo_field_kV_cm",
    "resolution_meV",
)


def _fmt_energy(x):
    return ENERGY_FMT.format(float(x))


def _fmt_strain(x):
    return STRAIN_FMT.format(float(x))


def _parse_float(text, path, line, column):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise SchemaError(f"column {column!r} is not a number: {text!r}",
                          path=path, line=line) from None


def sidecar_path(path):
    """Metadata sidecar convention: spectrum.csv -> spectrum.meta.json."""
    path = Path(path)
    return path.with_suffix(".meta.json")


def read_spectrum_csv(path):
    """Read a two-column spectrum CSV with a declared-unit header.

    The header must be either 'energy_meV,intensity' or
    'wavelength_nm,intensity'; wavelengths are converted to meV at
    ingestion and the grid is re-sorted ascending.  A sidecar
    '<name>.meta.json', when present, supplies the metadata dict.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file", path=path) from None
        header = [h.strip() for h in header]
        if len(header) != 2 or header[1] != "intensity" or header[0] not in SPECTRUM_HEADERS:
            raise SchemaError(
                f"header must be 'energy_meV,intensity' or 'wavelength_nm,intensity',"
                f" got {','.join(header)!r}",
                path=path, line=1,
            )
        is_wavelength = header[0] == "wavelength_nm"
        xs, ys = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"expected 2 columns, got {len(row)}",
                                  path=path, line=line_no)
            xs.append(_parse_float(row[0], path, line_no, header[0]))
            ys.append(_parse_float(row[1], path, line_no, "intensity"))
    if not xs:
        raise SchemaError("no data rows", path=path)
    x = np.asarray(xs)
    y = np.asarray(ys)
    if is_wavelength:
        x = wavelength_nm_to_mev(x)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    try:
        return Spectrum(x, y, meta)
    except Exception as exc:
        raise SchemaError(str(exc), path=path) from exc


def write_spectrum_csv(spectrum, path, write_sidecar=True):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["energy_meV", "intensity"])
        for e, y in zip(spectrum.energy_meV, spectrum.intensity):
            writer.writerow([_fmt_energy(e), GENERIC_FMT.format(float(y))])
    if write_sidecar and spectrum.meta:
        sidecar_path(path).write_text(
            json.dumps(spectrum.meta, sort_keys=True, indent=1) + "\n"
        )


def read_spectra_json(path):
    """Read one spectrum or a list of spectra from an embedding JSON file.

    Each object holds 'meta' plus either 'energy_meV' or 'wavelength_nm'
    and 'intensity'.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    objects = doc if isinstance(doc, list) else [doc]
    spectra = []
    for i, obj in enumerate(objects):
        if "energy_meV" in obj:
            x = np.asarray(obj["energy_meV"], dtype=float)
        elif "wavelength_nm" in obj:
            x = wavelength_nm_to_mev(np.asarray(obj["wavelength_nm"], dtype=float))
        else:
            raise SchemaError(f"object {i}: missing 'energy_meV' or 'wavelength_nm'",
                              path=path)
        if "intensity" not in obj:
            raise SchemaError(f"object {i}: missing 'intensity'", path=path)
        y = np.asarray(obj["intensity"], dtype=float)
        order = np.argsort(x, kind="stable")
        try:
            spectra.append(Spectrum(x[order], y[order], obj.get("meta", {})))
        except Exception as exc:
            raise SchemaError(f"object {i}: {exc}", path=path) from exc
    return spectra


def _read_table(path, required, numeric):
    """Generic CSV table reader returning row dicts with parsed numbers."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty file", path=path)
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}",
                              path=path, line=1)
        for line_no, row in enumerate(reader, start=2):
            parsed = dict(row)
            for col in numeric:
                if col in parsed and parsed[col] not in (None, ""):
                    parsed[col] = _parse_float(parsed[col], path, line_no, col)
            parsed["_line"] = line_no
            rows.append(parsed)
    if not rows:
        raise SchemaError("no data rows", path=path)
    return rows


PEAKS_COLUMNS = [
    "spectrum", "sample", "location_id", "material", "temperature_K",
    "center_meV", "center_err_meV", "sigma_meV", "sigma_err_meV",
    "amplitude", "amplitude_err", "fwhm_meV", "shape", "baseline",
    "residual_norm", "flags",
]


def write_peaks_csv(rows, path):
    """Write per-spectrum peak-fit rows; see PEAKS_COLUMNS for schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PEAKS_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for col in ("center_meV", "center_err_meV", "sigma_meV",
                        "sigma_err_meV", "fwhm_meV", "baseline"):
                out[col] = _fmt_energy(out[col])
            for col in ("amplitude", "amplitude_err", "residual_norm"):
                out[col] = GENERIC_FMT.format(float(out[col]))
            out["temperature_K"] = GENERIC_FMT.format(float(out["temperature_K"]))
            writer.writerow(out)


def read_peaks_csv(path):
    numeric = ["temperature_K", "center_meV", "center_err_meV", "sigma_meV",
               "sigma_err_meV", "amplitude", "amplitude_err", "fwhm_meV",
               "baseline", "residual_norm"]
    return _read_table(path, required=PEAKS_COLUMNS[:8], numeric=numeric)


TEMPERATURE_SERIES_COLUMNS = ["emitter", "temperature_K", "energy_meV", "energy_err_meV"]


def write_temperature_series_csv(rows, path):
    """rows: dicts with emitter, temperature_K, energy_meV, energy_err_meV."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TEMPERATURE_SERIES_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({
                "emitter": row["emitter"],
                "temperature_K": GENERIC_FMT.format(float(row["temperature_K"])),
                "energy_meV": _fmt_energy(row["energy_meV"]),
                "energy_err_meV": _fmt_energy(row["energy_err_meV"]),
            })


def read_temperature_series_csv(path):
    """Group series rows by emitter tag, each a list of (T, E, E_err)."""
    rows = _read_table(path, required=TEMPERATURE_SERIES_COLUMNS,
                       numeric=TEMPERATURE_SERIES_COLUMNS[1:])
    series = {}
    for row in rows:
        series.setdefault(row["emitter"], []).append(
            (row["temperature_K"], row["energy_meV"], row["energy_err_meV"])
        )
    return {k: sorted(v) for k, v in sorted(series.items())}


ENSEMBLE_COLUMNS = ["sample", "material", "energy_meV"]


def write_ensemble_energies_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ENSEMBLE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({
                "sample": row["sample"],
                "material": row["material"],
                "energy_meV": _fmt_energy(row["energy_meV"]),
            })


def read_ensemble_energies_csv(paths):
    """Merge per-QD energies from one or more CSVs, keyed by sample.

    Returns ({sample: np.ndarray of energies}, {sample: material}).
    """
    energies = {}
    materials = {}
    for path in paths:
        rows = _read_table(path, required=ENSEMBLE_COLUMNS, numeric=["energy_meV"])
        for row in rows:
            energies.setdefault(row["sample"], []).append(row["energy_meV"])
            materials.setdefault(row["sample"], row["material"])
    return ({k: np.asarray(v) for k, v in sorted(energies.items())},
            dict(sorted(materials.items())))


STRAIN_TABLE_COLUMNS = ["sample", "material", "strain_percent", "strain_err_percent"]


def write_strain_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STRAIN_TABLE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({
                "sample": row["sample"],
                "material": row["material"],
                "strain_percent": _fmt_strain(row["strain_percent"]),
                "strain_err_percent": _fmt_strain(row["strain_err_percent"]),
            })


def read_strain_table_csv(path):
    rows = _read_table(path, required=STRAIN_TABLE_COLUMNS,
                       numeric=["strain_percent", "strain_err_percent"])
    return {row["sample"]: row for row in rows}


PIEZO_COLUMNS = ["species", "emitter", "location_id", "field_kV_cm",
                 "delta_E_meV", "delta_E_err_meV", "weight"]


def write_piezo_shifts_csv(sweep, path):
    """Flatten a PiezoSweep into per-row shift records."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PIEZO_COLUMNS)
        writer.writeheader()
        for species, per_field in (("QD", sweep.qd_shifts), ("X0", sweep.x0_shifts)):
            for field_idx, shifts in enumerate(per_field):
                for shift in shifts:
                    writer.writerow({
                        "species": species,
                        "emitter": shift.context.get("emitter", species),
                        "location_id": shift.context.get("location_id", ""),
                        "field_kV_cm": GENERIC_FMT.format(sweep.fields[field_idx]),
                        "delta_E_meV": _fmt_energy(shift.delta_E),
                        "delta_E_err_meV": _fmt_energy(shift.delta_E_err),
                        "weight": "" if shift.weight is None
                                  else GENERIC_FMT.format(shift.weight),
                    })


def read_piezo_shifts_csv(path):
    """Shift measurements grouped by (species, field)."""
    rows = _read_table(path, required=PIEZO_COLUMNS[:6],
                       numeric=["field_kV_cm", "delta_E_meV", "delta_E_err_meV"])
    grouped = {}
    for row in rows:
        weight = row.get("weight")
        weight = float(weight) if weight not in (None, "") else None
        shift = ShiftMeasurement(
            delta_E=row["delta_E_meV"],
            delta_E_err=row["delta_E_err_meV"],
            weight=weight,
            context={
                "field_kV_cm": row["field_kV_cm"],
                "location_id": row.get("location_id", ""),
                "emitter": row.get("emitter", ""),
            },
        )
        grouped.setdefault((row["species"], row["field_kV_cm"]), []).append(shift)
    return dict(sorted(grouped.items()))


POPULATION_COLUMNS = ["sample", "material", "location_id", "strain_percent",
                      "energy_meV", "huang_rhys", "hw_avg_meV", "intensity"]


def write_population_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=POPULATION_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow({
                "sample": rec.sample,
                "material": rec.material,
                "location_id": rec.location_id,
                "strain_percent": _fmt_strain(rec.strain),
                "energy_meV": _fmt_energy(rec.energy),
                "huang_rhys": GENERIC_FMT.format(rec.s),
                "hw_avg_meV": _fmt_energy(rec.hw_avg),
                "intensity": GENERIC_FMT.format(rec.intensity),
            })


def read_population_csv(path):
    return _read_table(path, required=POPULATION_COLUMNS,
                       numeric=["strain_percent", "energy_meV", "huang_rhys",
                                "hw_avg_meV", "intensity"])


SURVEY_COLUMNS = ["sample", "material", "location_id", "temperature_K",
                  "energy_meV", "energy_err_meV"]


def write_survey_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SURVEY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({
                "sample": row["sample"],
                "material": row["material"],
                "location_id": row["location_id"],
                "temperature_K": GENERIC_FMT.format(float(row["temperature_K"])),
                "energy_meV": _fmt_energy(row["energy_meV"]),
                "energy_err_meV": _fmt_energy(row["energy_err_meV"]),
            })


def read_survey_csv(path):
    return _read_table(path, required=SURVEY_COLUMNS,
                       numeric=["temperature_K", "energy_meV", "energy_err_meV"])


def read_references_json(path):
    """Unstrained reference energies keyed by temperature.

    Format: {"references": [{"temperature_K": .., "energy_meV": ..,
    "energy_err_meV": ..}, ...]}.  Lookup tolerance is 0.5 K.
    """
    doc = json.loads(Path(path).read_text())
    refs = doc.get("references")
    if not isinstance(refs, list) or not refs:
        raise SchemaError("expected a non-empty 'references' list", path=path)
    for i, ref in enumerate(refs):
        for key in ("temperature_K", "energy_meV"):
            if key not in ref:
                raise SchemaError(f"reference {i} missing {key!r}", path=path)
    return refs


def lookup_reference(references, temperature, tolerance=0.5):
    for ref in references:
        if abs(float(ref["temperature_K"]) - temperature) <= tolerance:
            return float(ref["energy_meV"]), float(ref.get("energy_err_meV", 0.0))
    raise SchemaError(f"no reference energy within {tolerance} K of {temperature} K")


def write_json(obj, path):
    """Canonical JSON emission: sorted keys, stable float repr, newline EOF."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
