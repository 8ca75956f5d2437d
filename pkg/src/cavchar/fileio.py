"""Touchstone v1 (single port) and schema-tagged CSV readers/writers.

CSV files may start with ``# key: value`` metadata lines (``f_r_hz``,
``temperature_k``, ``drive_power_w``, ``note``), followed by one header row
that selects the schema, then numeric rows.
"""
import csv
import io
import os
import re

import numpy as np

from .errors import ParseError, ValidationError
from .traces import FrequencyTrace, PointSet, Spectrum, TimeTrace

_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_FORMATS = ("RI", "MA", "DB")

# schema -> accepted header tuples (first match wins)
CSV_SCHEMAS = {
    "freq-complex": [("frequency_hz", "s11_re", "s11_im")],
    "freq-magphase": [("frequency_hz", "s11_mag", "s11_phase_deg")],
    "time-amplitude": [("time_s", "amplitude"), ("time_s", "power_w")],
    "qn-points": [("n_bar", "q_int", "q_sigma"), ("n_bar", "q_int")],
    "qt-points": [("temperature_k", "q_int", "q_sigma"), ("temperature_k", "q_int")],
    "ft-points": [("temperature_k", "df_over_f", "sigma"), ("temperature_k", "df_over_f")],
    "xps": [("binding_energy_ev", "counts")],
}

_META_KEYS = {"f_r_hz": float, "temperature_k": float, "drive_power_w": float,
              "amplifier_chain_gain_db": float, "note": str}


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# Touchstone
# ---------------------------------------------------------------------------

def _read_text(source):
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            return fh.read(), str(source)
    if isinstance(source, str) and "\n" in source:
        return source, "<text>"
    try:
        with open(source, encoding="utf-8") as fh:
            return fh.read(), str(source)
    except OSError as exc:
        raise ParseError(f"cannot read {source!r}: {exc}") from exc


def _parse_option_line(line, lineno):
    tokens = line[1:].split()
    unit, param, fmt, ref = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        t = tokens[i].upper()
        if t in _UNITS:
            unit = t
        elif t in ("S", "Y", "Z", "G", "H"):
            param = t
        elif t in _FORMATS:
            fmt = t
        elif t == "R":
            if i + 1 >= len(tokens):
                raise ParseError(f"line {lineno}: option line has R without a value")
            try:
                ref = float(tokens[i + 1])
            except ValueError:
                raise ParseError(f"line {lineno}: bad reference impedance {tokens[i + 1]!r}")
            i += 1
        else:
            raise ParseError(f"line {lineno}: unrecognised option token {tokens[i]!r}")
        i += 1
    if param != "S":
        raise ParseError(f"line {lineno}: only S parameters are supported, got {param}")
    return unit, fmt, ref


def parse_touchstone(source, drive_power=None, temperature=None):
    """Read a version-1 single-port Touchstone file (path or text).

    Returns
    -------
    FrequencyTrace
        Frequencies in Hz; S11 reconstructed from RI, MA or DB pairs
        (angles in degrees).
    """
    text, name = _read_text(source)
    m = re.search(r"\.s(\d+)p$", name.lower())
    if m and m.group(1) != "1":
        raise ParseError(f"{name}: {m.group(1)}-port file; only single-port data is supported")
    option = None
    freqs, s = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if option is not None:
                raise ParseError(f"line {lineno}: second option line")
            option = _parse_option_line(line, lineno)
            continue
        if line.startswith("["):
            raise ParseError(f"line {lineno}: Touchstone v2 keywords are not supported")
        if option is None:
            option = ("GHZ", "MA", 50.0)
        parts = line.split()
        if len(parts) != 3:
            ports = int(round(np.sqrt((len(parts) - 1) / 2))) if len(parts) > 3 else 0
            detail = f" (looks like {ports}-port data)" if ports > 1 else ""
            raise ParseError(
                f"line {lineno}: expected 3 values for single-port data, got {len(parts)}{detail}")
        try:
            f, a, b = (float(p) for p in parts)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric value in {line!r}")
        unit, fmt, _ = option
        f *= _UNITS[unit]
        if freqs and f <= freqs[-1]:
            raise ParseError(f"line {lineno}: frequency {f} Hz is not above the previous one")
        if fmt == "RI":
            z = complex(a, b)
        elif fmt == "MA":
            z = a * np.exp(1j * np.deg2rad(b))
        else:
            z = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
        freqs.append(f)
        s.append(z)
    if not freqs:
        raise ParseError(f"{name}: no data rows")
    return FrequencyTrace(np.array(freqs), np.array(s), drive_power, temperature)


def write_touchstone(trace, path=None, fmt="RI", unit="GHz", reference=50.0):
    """Write ``trace`` as a single-port Touchstone file; returns the text."""
    fmt = fmt.upper()
    if fmt not in _FORMATS:
        raise ValidationError(f"unknown Touchstone format {fmt!r}")
    u = unit.upper()
    if u not in _UNITS:
        raise ValidationError(f"unknown frequency unit {unit!r}")
    out = io.StringIO()
    out.write(f"# {unit} S {fmt} R {reference:g}\n")
    scale = _UNITS[u]
    for f, z in zip(trace.frequencies, trace.s11):
        if fmt == "RI":
            a, b = z.real, z.imag
        elif fmt == "MA":
            a, b = abs(z), np.rad2deg(np.angle(z))
        else:
            a, b = 20.0 * np.log10(abs(z)), np.rad2deg(np.angle(z))
        out.write(f"{_fmt(f / scale)} {_fmt(a)} {_fmt(b)}\n")
    text = out.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _split_meta(text):
    meta = {}
    body = []
    offset = 0
    lines = text.splitlines()
    for i, line in enumerate(lines):
        st = line.strip()
        if st.startswith("#"):
            key, sep, val = st[1:].partition(":")
            key = key.strip()
            if sep and key in _META_KEYS:
                try:
                    meta[key] = _META_KEYS[key](val.strip())
                except ValueError:
                    raise ParseError(f"row {i + 1}: bad metadata value for {key}: {val.strip()!r}")
            offset = i + 1
            continue
        body = lines[i:]
        break
    return meta, body, offset


def detect_schema(header):
    h = tuple(c.strip() for c in header)
    for schema, options in CSV_SCHEMAS.items():
        if h in options:
            return schema
    return None


def parse_csv_trace(source, schema=None):
    """Read a schema-tagged CSV file.

    Parameters
    ----------
    source : path or text
    schema : str, optional
        One of ``CSV_SCHEMAS``; inferred from the header when omitted.

    Returns
    -------
    FrequencyTrace, TimeTrace, PointSet or Spectrum
    """
    text, name = _read_text(source)
    meta, body, offset = _split_meta(text)
    rows = list(csv.reader(body))
    if not rows:
        raise ParseError(f"{name}: missing header row")
    header = tuple(c.strip() for c in rows[0])
    header_row = offset + 1
    found = detect_schema(header)
    if schema is None:
        if found is None:
            raise ParseError(f"{name} row {header_row}: header {','.join(header)!r} matches no schema")
        schema = found
    elif schema not in CSV_SCHEMAS:
        raise ParseError(f"unknown schema {schema!r}; expected one of {sorted(CSV_SCHEMAS)}")
    elif header not in CSV_SCHEMAS[schema]:
        want = " or ".join(",".join(h) for h in CSV_SCHEMAS[schema])
        raise ParseError(
            f"{name} row {header_row}: schema {schema} expects header {want}, got {','.join(header)}")
    data = []
    for r, cells in enumerate(rows[1:], header_row + 1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise ParseError(f"{name} row {r}: expected {len(header)} columns, got {len(cells)}")
        vals = []
        for col, cell in zip(header, cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{name} row {r} column {col!r}: cannot parse {cell.strip()!r}")
            if not np.isfinite(v):
                raise ParseError(f"{name} row {r} column {col!r}: non-finite value")
            vals.append(v)
        data.append((r, vals))
    if not data:
        raise ParseError(f"{name}: no data rows")
    arr = np.array([v for _, v in data])
    rownums = [r for r, _ in data]

    def increasing(col, label):
        d = np.diff(arr[:, col])
        bad = np.nonzero(d <= 0)[0]
        if bad.size:
            r = rownums[bad[0] + 1]
            raise ParseError(f"{name} row {r} column {header[col]!r}: {label} must be strictly increasing")

    try:
        if schema == "freq-complex":
            increasing(0, "frequency")
            return FrequencyTrace(arr[:, 0], arr[:, 1] + 1j * arr[:, 2],
                                  meta.get("drive_power_w"), meta.get("temperature_k"))
        if schema == "freq-magphase":
            increasing(0, "frequency")
            z = arr[:, 1] * np.exp(1j * np.deg2rad(arr[:, 2]))
            return FrequencyTrace(arr[:, 0], z, meta.get("drive_power_w"), meta.get("temperature_k"))
        if schema == "time-amplitude":
            increasing(0, "time")
            kind = "amplitude" if header[1] == "amplitude" else "power"
            return TimeTrace(arr[:, 0], arr[:, 1], kind, meta.get("amplifier_chain_gain_db"))
        if schema == "xps":
            return Spectrum(arr[:, 0], arr[:, 1], meta.get("note", ""))
        kind = {"qn-points": "qn", "qt-points": "qt", "ft-points": "ft"}[schema]
        sigma = arr[:, 2] if arr.shape[1] == 3 else None
        temp = meta.get("temperature_k")
        return PointSet(arr[:, 0], arr[:, 1], kind, sigma=sigma,
                        f_r=meta.get("f_r_hz", 5.5e9),
                        temperature=temp if kind == "qn" else None,
                        meta={k: v for k, v in meta.items() if k == "note"})
    except ValidationError as exc:
        raise ParseError(f"{name}: {exc}") from exc


def write_csv_trace(trace, path=None):
    """Serialise a trace with full float precision; returns the text."""
    out = io.StringIO()
    if isinstance(trace, FrequencyTrace):
        if trace.drive_power is not None:
            out.write(f"# drive_power_w: {_fmt(trace.drive_power)}\n")
        if trace.temperature is not None:
            out.write(f"# temperature_k: {_fmt(trace.temperature)}\n")
        out.write("frequency_hz,s11_re,s11_im\n")
        for f, z in zip(trace.frequencies, trace.s11):
            out.write(f"{_fmt(f)},{_fmt(z.real)},{_fmt(z.imag)}\n")
    elif isinstance(trace, TimeTrace):
        if trace.amplifier_chain_gain_db is not None:
            out.write(f"# amplifier_chain_gain_db: {_fmt(trace.amplifier_chain_gain_db)}\n")
        col = "amplitude" if trace.kind == "amplitude" else "power_w"
        out.write(f"time_s,{col}\n")
        for t, v in zip(trace.times, trace.values):
            out.write(f"{_fmt(t)},{_fmt(v)}\n")
    elif isinstance(trace, Spectrum):
        if trace.meta:
            out.write(f"# note: {trace.meta}\n")
        out.write("binding_energy_ev,counts\n")
        for e, c in zip(trace.binding_energy, trace.counts):
            out.write(f"{_fmt(e)},{_fmt(c)}\n")
    elif isinstance(trace, PointSet):
        out.write(f"# f_r_hz: {_fmt(trace.f_r)}\n")
        if trace.temperature is not None:
            out.write(f"# temperature_k: {_fmt(trace.temperature)}\n")
        xname, yname, sname = {"qn": ("n_bar", "q_int", "q_sigma"),
                               "qt": ("temperature_k", "q_int", "q_sigma"),
                               "ft": ("temperature_k", "df_over_f", "sigma")}[trace.kind]
        if trace.sigma is None:
            out.write(f"{xname},{yname}\n")
            for x, y in zip(trace.x, trace.y):
                out.write(f"{_fmt(x)},{_fmt(y)}\n")
        else:
            out.write(f"{xname},{yname},{sname}\n")
            for x, y, s in zip(trace.x, trace.y, trace.sigma):
                out.write(f"{_fmt(x)},{_fmt(y)},{_fmt(s)}\n")
    else:
        raise ValidationError(f"cannot serialise {type(trace).__name__}")
    text = out.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
