"""CSV and JSON emission with byte-stable formatting.

Floats are printed with 12 significant digits everywhere, so identical
inputs serialize identically and region files round-trip through plotting
tools without visible quantization. All writers return complete text;
callers decide where it goes.
"""

import json
import sys

import numpy as np

REGION_HEADER = ("gamma", "rate", "distortion")
NOISY_REGION_HEADER = ("gamma", "rate", "distortion", "sigma_z2")
MAC_REGION_HEADER = ("gamma", "beta", "rho", "r1_max", "r2_max", "rsum_max", "d_min")
TRACE_HEADER = ("t", "X", "Y", "theta_hat", "S", "S_hat")
MAC_TRACE_HEADER = ("t", "X1", "X2", "Y", "theta1_hat", "theta2_hat", "S", "S_hat")


def fmt(value):
    """One value as text: ints verbatim, floats at 12 significant digits."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if value == 0.0:
        value = 0.0  # never print -0
    return format(value, ".12g")


def csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def region_csv(points, sigma_z2=None):
    """`gamma,rate,distortion` rows; noisy-observation rows carry sigma_z2."""
    if sigma_z2 is None:
        return csv_text(REGION_HEADER, ((p.gamma, p.rate, p.distortion) for p in points))
    return csv_text(
        NOISY_REGION_HEADER,
        ((p.gamma, p.rate, p.distortion, sigma_z2) for p in points),
    )


def region_rows(points, sigma_z2=None):
    """The same region content as JSON-ready dicts."""
    out = []
    for p in points:
        row = {"gamma": p.gamma, "rate": p.rate, "distortion": p.distortion}
        if sigma_z2 is not None:
            row["sigma_z2"] = sigma_z2
        out.append(row)
    return out


def mac_region_csv(constraints):
    return csv_text(
        MAC_REGION_HEADER,
        (
            (c.gamma, c.beta, c.rho, c.r1_max, c.r2_max, c.rsum_max, c.d_min)
            for c in constraints
        ),
    )


def mac_region_rows(constraints):
    return [
        {
            "gamma": c.gamma,
            "beta": c.beta,
            "rho": c.rho,
            "r1_max": c.r1_max,
            "r2_max": c.r2_max,
            "rsum_max": c.rsum_max,
            "d_min": c.d_min,
        }
        for c in constraints
    ]


def trace_csv(columns):
    """Per-symbol trace of one trial; the schema follows the key set."""
    header = MAC_TRACE_HEADER if "X1" in columns else TRACE_HEADER
    n = len(columns[header[1]])
    rows = (
        [t + 1] + [columns[name][t] for name in header[1:]]
        for t in range(n)
    )
    return csv_text(header, rows)


def rows_csv(rows):
    """Uniform list of dicts as CSV; the first row fixes the column order."""
    rows = list(rows)
    if not rows:
        return "\n"
    header = list(rows[0].keys())
    return csv_text(header, ([row[name] for name in header] for row in rows))


def json_text(obj):
    """Deterministic JSON: insertion order preserved, trailing newline."""
    return json.dumps(obj, indent=2) + "\n"


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), inner, out)
    elif isinstance(value, (list, tuple)):
        for i, inner in enumerate(value):
            _flatten(f"{prefix}.{i}", inner, out)
    else:
        out.append((prefix, value))


def report_csv(report_dict):
    """Flattened `key,value` view of a report for CSV consumers."""
    pairs = []
    _flatten("", report_dict, pairs)
    return csv_text(("key", "value"), pairs)


def write_text(text, path=None):
    """Write to the path, or stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fp:
        fp.write(text)
