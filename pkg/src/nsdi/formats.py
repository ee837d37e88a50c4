"""JSON, CSV and gnuplot input/output for devices, cc-d states, ensembles and
bound curves."""
from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .devices import Device
from .norms import CcdState

LOAD_TOL = 1e-9
CSV_HEADER = ("param", "I_AB", "I_ABgE_direct", "I_ABgE_channel", "N_C", "nsq_upper", "lch")


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


# --------------------------------------------------------------------------
# numbers


def number_to_json(v):
    """Fractions become strings (decimal when terminating, else "p/q")."""
    if isinstance(v, Fraction):
        d = v.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d != 1:
            return str(v)
        k = 0
        while (v * 10**k).denominator != 1:
            k += 1
        s = str(abs(v.numerator * 10**k // v.denominator)).rjust(k + 1, "0")
        s = s if k == 0 else s[:-k] + "." + s[-k:]
        return ("-" if v < 0 else "") + s
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def number_from_json(v):
    """Strings load exactly, JSON numbers load as floats."""
    if isinstance(v, bool):
        raise FormatError("boolean where a probability was expected")
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as ex:
            raise FormatError(f"bad number {v!r}") from ex
    if isinstance(v, (int, float)):
        return float(v)
    raise FormatError(f"bad number {v!r}")


def _nested(arr):
    if isinstance(arr, np.ndarray):
        return [_nested(a) for a in arr]
    return number_to_json(arr.item() if isinstance(arr, np.generic) else arr)


def _tensor(data, shape: tuple[int, ...], what: str) -> np.ndarray:
    def walk(node, depth):
        if depth == len(shape):
            return [number_from_json(node)]
        if not isinstance(node, list) or len(node) != shape[depth]:
            raise FormatError(f"{what}: expected a list of length {shape[depth]} at depth {depth}")
        return [v for child in node for v in walk(child, depth + 1)]

    flat = walk(data, 0)
    if all(isinstance(v, Fraction) for v in flat):
        return np.array(flat, dtype=object).reshape(shape)
    return np.array([float(v) for v in flat]).reshape(shape)


def _sizes(doc: dict, key: str) -> tuple[int, ...]:
    v = doc.get(key)
    if not isinstance(v, list) or not v or not all(isinstance(s, int) and s > 0 for s in v):
        raise FormatError(f"{key!r} must be a non-empty list of positive integers")
    return tuple(v)


def _read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as ex:
        raise FormatError(f"cannot read {path}: {ex}") from ex
    if not isinstance(doc, dict):
        raise FormatError("top level must be a JSON object")
    return doc


# --------------------------------------------------------------------------
# devices


def device_to_dict(device: Device) -> dict:
    return {"input_sizes": list(device.input_sizes), "output_sizes": list(device.output_sizes),
            "probabilities": _nested(device.probs)}


def device_from_dict(doc: dict, check_norm: bool = True) -> Device:
    ins, outs = _sizes(doc, "input_sizes"), _sizes(doc, "output_sizes")
    if len(ins) != len(outs):
        raise FormatError("input_sizes and output_sizes differ in length")
    if "probabilities" not in doc:
        raise FormatError("missing 'probabilities'")
    p = _tensor(doc["probabilities"], ins + outs, "probabilities")
    if check_norm:
        tot = p.sum(axis=tuple(range(len(ins), 2 * len(ins))))
        if np.abs(np.array([float(t) for t in np.ravel(tot)]) - 1).max() > LOAD_TOL:
            raise FormatError("probabilities are not normalized for every input")
    return Device(ins, outs, p)


def load_device(path, check_norm: bool = True) -> Device:
    return device_from_dict(_read_json(path), check_norm)


def dump_device(device: Device, path) -> None:
    Path(path).write_text(json.dumps(device_to_dict(device), indent=1) + "\n")


# --------------------------------------------------------------------------
# cc-d states


def ccd_to_dict(state: CcdState) -> dict:
    z, sa, sb, q, e = state.probs.shape
    return {"input_sizes": [z], "output_sizes": [e],
            "classical_vars": {"names": ["S_A", "S_B", "Q"], "sizes": [sa, sb, q]},
            "probabilities": _nested(state.probs)}


def ccd_from_dict(doc: dict) -> CcdState:
    ins, outs = _sizes(doc, "input_sizes"), _sizes(doc, "output_sizes")
    if len(ins) != 1 or len(outs) != 1:
        raise FormatError("a cc-d state has one device input and one device output")
    cv = doc.get("classical_vars")
    if not isinstance(cv, dict):
        raise FormatError("missing 'classical_vars' section")
    sizes = _sizes(cv, "sizes")
    if len(sizes) != 3:
        raise FormatError("classical_vars must list sizes of S_A, S_B and Q")
    shape = ins + sizes + outs
    p = _tensor(doc.get("probabilities"), shape, "probabilities")
    tot = p.sum(axis=(1, 2, 3, 4))
    if np.abs(np.array([float(t) for t in tot]) - 1).max() > LOAD_TOL:
        raise FormatError("each device input must carry total mass 1")
    return CcdState(p)


def load_ccd(path) -> CcdState:
    return ccd_from_dict(_read_json(path))


def dump_ccd(state: CcdState, path) -> None:
    Path(path).write_text(json.dumps(ccd_to_dict(state), indent=1) + "\n")


# --------------------------------------------------------------------------
# ensembles


def ce_to_dict(ce, partial: bool = False, note: str | None = None) -> dict:
    summary = {"Z": ce.z_size, "E": ce.e_alphabet, "complete": not partial}
    summary.update({k: v for k, v in ce.meta.items() if isinstance(v, (int, str, float))})
    if note:
        summary["note"] = note
    return {
        "parent": device_to_dict(ce.parent),
        "ensembles": [{"z": z, "weights": [number_to_json(w) for w in e.weights],
                       "support": list(e.labels)} for z, e in enumerate(ce.ensembles)],
        "summary": summary,
    }


# --------------------------------------------------------------------------
# bound curves


def _fmt(v) -> str:
    v = float(v)
    if v == 0:
        return "0"
    return f"{v:.12g}"


def curve_csv(curve, overlay: dict | None = None) -> str:
    """The curve as CSV text; ``overlay`` maps grid values to an extra column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER + (("overlay",) if overlay is not None else ()))
    for i, g in enumerate(curve.grid):
        row = [_fmt(g)] + [_fmt(curve.series[q][i]) for q in CSV_HEADER[1:-1]] + [_fmt(curve.lch[i])]
        if overlay is not None:
            v = overlay.get(_fmt(g))
            row.append("" if v is None else _fmt(v))
        w.writerow(row)
    return buf.getvalue()


def read_overlay(path) -> dict:
    """Two-column CSV (param, value); a non-numeric first row is a header."""
    try:
        text = Path(path).read_text()
    except OSError as ex:
        raise FormatError(f"cannot read {path}: {ex}") from ex
    out = {}
    for k, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or not row[0].strip():
            continue
        if len(row) < 2:
            raise FormatError(f"overlay row {k + 1} needs two columns")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            if k == 0:
                continue
            raise FormatError(f"overlay row {k + 1} is not numeric") from None
        out[_fmt(x)] = y
    return out


def gnuplot_script(csv_path: str, overlay: bool = False, title: str = "") -> str:
    cols = list(CSV_HEADER[1:])
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'epsilon'",
        "set ylabel 'bits'",
        f"set title '{title}'" if title else "unset title",
        "set yrange [0:1.05]",
    ]
    plots = [f"'{csv_path}' using 1:{i + 2} with lines lw {3 if c == 'lch' else 1}"
             for i, c in enumerate(cols)]
    if overlay:
        plots.append(f"'{csv_path}' using 1:{len(cols) + 2} with points pt 7")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def parse_grid(spec: str) -> list[Fraction]:
    """"lo:hi:step" (or a single value) as exact grid points, hi included."""
    try:
        parts = [Fraction(s.strip()) for s in spec.split(":")]
    except (ValueError, ZeroDivisionError) as ex:
        raise FormatError(f"bad grid {spec!r}") from ex
    if len(parts) == 1:
        return parts
    if len(parts) != 3:
        raise FormatError("grid must be lo:hi:step")
    lo, hi, step = parts
    if step <= 0 or hi < lo:
        raise FormatError("grid needs step > 0 and hi >= lo")
    n = int((hi - lo) / step)
    return [lo + k * step for k in range(n + 1)]

