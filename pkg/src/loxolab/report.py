"""CSV tables with a JSON sidecar.

The CSV starts with ``#`` provenance lines (automaton hash, action hash,
seed) followed by a header row; gnuplot reads it with
``set datafile separator ","`` and ``columnheaders``.  Anything that
changes between runs (the timestamp) lives only in the sidecar, so
re-running a configuration gives a byte-identical CSV.
"""

import csv
import io
import json
import os
import time
from fractions import Fraction

from . import __version__


def format_value(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "item"):            # numpy scalar
        return format_value(x.item())
    if isinstance(x, (tuple, list)):
        return " ".join(str(v) for v in x)
    return str(x)


def csv_text(report, seed=None):
    buf = io.StringIO()
    buf.write(f"# experiment={report.name}\n")
    buf.write(f"# automaton={report.automaton_hash or ''}\n")
    buf.write(f"# action={report.action_hash or ''}\n")
    buf.write(f"# seed={'' if seed is None else seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([format_value(x) for x in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x


def sidecar(report, seed=None, command=None, extra=None):
    meta = {
        "experiment": report.name,
        "seed": seed,
        "params": _jsonable(report.params),
        "summary": _jsonable(report.summary),
        "automaton_hash": report.automaton_hash,
        "action_hash": report.action_hash,
        "command": command,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        meta.update(_jsonable(extra))
    return meta


def write_report(report, out_dir, seed=None, command=None, extra=None, stem=None):
    """Write ``<stem>.csv`` and ``<stem>.json``; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or report.name
    csv_path = os.path.join(out_dir, stem + ".csv")
    json_path = os.path.join(out_dir, stem + ".json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(csv_text(report, seed))
    with open(json_path, "w") as fh:
        json.dump(sidecar(report, seed, command, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
