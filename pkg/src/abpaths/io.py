"""Table writers and readers for the pipeline's on-disk artifacts.

All CSV output uses comma separators, LF line endings, and scientific
notation with 17 significant digits (exact float64 round-trip), so a
repeated run with the same inputs produces byte-identical files.
Winding vectors are serialized as semicolon-joined integers, e.g.
``-1;0;2``.
"""

import csv
import json

import numpy as np

from .errors import DomainError, StructuralError
from .homotopy import class_index

__all__ = [
    "format_float",
    "format_winding",
    "parse_winding",
    "write_fig1_csv",
    "write_class_amplitudes_csv",
    "write_intensities_csv",
    "read_intensities_csv",
    "write_recovered_csv",
    "read_recovered_csv",
    "write_scaling_csv",
    "write_fit_json",
    "write_summary_json",
]


def format_float(x):
    """Scientific notation with 17 significant digits."""
    return "%.16e" % float(x)


def format_winding(winding):
    return ";".join(str(int(n)) for n in winding)


def parse_winding(text):
    return tuple(int(part) for part in text.split(";")) if text else ()


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_fig1_csv(path, rows):
    """Rows of (h, alpha, abs_re_diff, abs_im_diff)."""
    _write_rows(path, ("h", "alpha", "abs_re_diff", "abs_im_diff"),
                ([format_float(v) for v in row] for row in rows))


def write_class_amplitudes_csv(path, amplitudes, overflow=None):
    """Per-class amplitude table.

    ``amplitudes`` maps homotopy classes to complex values; when it
    carries a tracking-overflow bucket (or one is passed explicitly)
    the bucket is appended as a final row with ``overflow_flag`` 1,
    ``class_index`` 0 (below the 1-based class range) and an empty
    winding vector, so the re/im columns still sum to the total
    detector amplitude.
    """
    if overflow is None:
        overflow = getattr(amplitudes, "overflow", None)
    rows = []
    for key in amplitudes:
        index, winding = _index_and_winding(key, None)
        value = complex(amplitudes[key])
        rows.append((str(index), format_winding(winding),
                     format_float(value.real), format_float(value.imag),
                     "0"))
    if overflow is not None:
        overflow = complex(overflow)
        rows.append(("0", "", format_float(overflow.real),
                     format_float(overflow.imag), "1"))
    _write_rows(path, ("class_index", "winding_vector", "re", "im",
                       "overflow_flag"), rows)


def write_intensities_csv(path, flux_sets, results):
    """``results`` as produced by run_experiment: (set_id, intensity)
    pairs matching the rows of ``flux_sets``."""
    flux_sets = np.atleast_2d(np.asarray(flux_sets, dtype=float))
    if len(results) != flux_sets.shape[0]:
        raise StructuralError(
            f"{len(results)} results for {flux_sets.shape[0]} flux sets")
    header = ["set_id"] + [f"flux_{i + 1}"
                           for i in range(flux_sets.shape[1])] + ["intensity"]
    rows = []
    for set_id, value in results:
        rows.append([str(int(set_id))]
                    + [format_float(f) for f in flux_sets[set_id]]
                    + [format_float(value)])
    _write_rows(path, header, rows)


def read_intensities_csv(path):
    """Inverse of write_intensities_csv: (flux_sets, intensities)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if (len(header) < 3 or header[0] != "set_id"
                or header[-1] != "intensity"
                or any(name != f"flux_{i + 1}"
                       for i, name in enumerate(header[1:-1]))):
            raise DomainError(f"unrecognized intensity table header "
                              f"{header} in {path}")
        sets, intensities = [], []
        for row in reader:
            if len(row) != len(header):
                raise DomainError(
                    f"row {row} does not match header {header} in {path}")
            sets.append([float(v) for v in row[1:-1]])
            intensities.append(float(row[-1]))
    return np.asarray(sets), np.asarray(intensities)


def _index_and_winding(key, n_cut):
    winding = getattr(key, "winding", None)
    if winding is not None:
        return key.index, winding
    winding = tuple(int(n) for n in key)
    if n_cut is None:
        raise DomainError(
            "bare winding keys need n_cut to recover the class index")
    return class_index(winding, n_cut), winding


def write_recovered_csv(path, amplitudes, n_cut=None):
    """Recovered amplitude table: class_index,winding_vector,re,im.

    Keys may be homotopy classes or bare winding tuples; the latter
    need ``n_cut`` so the 1-based class index can be recomputed.
    """
    rows = []
    for key in amplitudes:
        index, winding = _index_and_winding(key, n_cut)
        value = complex(amplitudes[key])
        rows.append((str(index), format_winding(winding),
                     format_float(value.real), format_float(value.imag)))
    _write_rows(path, ("class_index", "winding_vector", "re", "im"), rows)


def read_recovered_csv(path):
    """Inverse of write_recovered_csv: map winding tuple -> complex."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if list(header) != ["class_index", "winding_vector", "re", "im"]:
            raise DomainError(f"unrecognized amplitude table header "
                              f"{header} in {path}")
        for row in reader:
            out[parse_winding(row[1])] = complex(float(row[2]),
                                                 float(row[3]))
    return out


def write_scaling_csv(path, series):
    """Scaling-series table: delta_x,epsilon,length_re,length_im,
    length_abs."""
    rows = []
    for p in series.points:
        rows.append((format_float(p.delta_x), format_float(p.epsilon),
                     format_float(p.complex_value.real),
                     format_float(p.complex_value.imag),
                     format_float(p.length)))
    _write_rows(path, ("delta_x", "epsilon", "length_re", "length_im",
                       "length_abs"), rows)


def _dump_json(path, payload):
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_fit_json(path, series):
    """Power-law fit summary for a fitted scaling series."""
    if series.fit is None:
        raise DomainError("series has no fit; run fit_power_law first")
    _dump_json(path, {
        "L0": series.fit.L0,
        "alpha": series.fit.exponent_alpha,
        "d_H": series.fit.d_H,
        "r_squared": series.fit.r_squared,
        "n_points": len(series.points),
        "excluded_weight": series.excluded_weight,
    })


def write_summary_json(path, payload):
    _dump_json(path, payload)
