"""Report assembly and CSV plot-data emission for the CLI.

Reports are deterministic JSON documents (sorted keys, repr-exact floats,
no timestamps): identical configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json

from .darboux import RiccatiField, write_braid_csv
from .errors import ParameterError
from .lattice import MatrixField, write_potential_csv
from .spectral import Spectrum, write_spectrum_csv
from .stripping import StrippingTrace, write_trace_csv

SCHEMA_VERSION = 1

PLOT_KINDS = ("spectrum", "braid", "sweep", "trace", "potential")


def build_report(command: str, config: dict, body: dict, passed: bool) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": body,
        "pass": bool(passed),
    }


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(rows: list, path) -> None:
    """Columns (depth, lhs, rhs, ratio), one row per sweep point."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["depth", "lt_moment", "bound", "lt_ratio"])
        for r in rows:
            w.writerow([repr(r["depth"]), repr(r["lhs"]), repr(r["rhs"]), repr(r["ratio"])])


def emit_plot_data(result, kind: str, path) -> None:
    """Write the CSV layout matching `kind`; kinds and layouts are versioned
    with the report schema."""
    if kind == "spectrum":
        if not isinstance(result, Spectrum):
            raise ParameterError("spectrum plot data requires a Spectrum result")
        write_spectrum_csv(result, path)
    elif kind == "braid":
        if not isinstance(result, RiccatiField):
            raise ParameterError("braid plot data requires a RiccatiField result")
        write_braid_csv(result, path)
    elif kind == "trace":
        if not isinstance(result, StrippingTrace):
            raise ParameterError("trace plot data requires a StrippingTrace result")
        write_trace_csv(result, path)
    elif kind == "sweep":
        if not isinstance(result, list):
            raise ParameterError("sweep plot data requires the sweep row list")
        write_sweep_csv(result, path)
    elif kind == "potential":
        if not isinstance(result, MatrixField):
            raise ParameterError("potential plot data requires a field result")
        write_potential_csv(result, path)
    else:
        raise ParameterError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
