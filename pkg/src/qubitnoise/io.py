"""File formats: CSV tables with unit-bearing headers and JSON sidecars.

Readers validate as they parse and raise :class:`SchemaError` naming the
file and line of the first problem. Writers format floats with ``%.17g``
so a write/read cycle is exact and output bytes are deterministic.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .dephasing import CPMGTrace
from .errors import DomainError, SchemaError
from .loss import ParticipationRow, ParticipationTable

TRACE_COLUMNS = ("tau_s", "signal")
PSD_COLUMNS = ("freq_hz", "s_phi0sq_per_hz", "sigma")
PARTICIPATION_COLUMNS = ("design_id", "p_ms", "p_sa", "p_ma", "p_bulk")
T1_COLUMNS = ("design_id", "t1_s", "f_q_hz")
CURVE_COLUMNS = ("freq_hz", "t1_s")
SIDECAR_KEYS = {"n_pulses", "t1_s", "qubit_id", "flux_phi0", "tau0_s"}


def fmt(x):
    """Shortest exact text form used in every output file."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dump_json(obj, path):
    """Sorted-key JSON with a trailing newline."""
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan; use null so the payload stays valid
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SchemaError("file not found", path) from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path, required, *, numeric=None, optional=()):
    """Parse ``path`` into a dict of columns.

    ``required`` columns must all be present; ``numeric`` names the
    columns converted to finite floats (default: every required column).
    Returns ``(columns, line_numbers)``.
    """
    numeric = set(required if numeric is None else numeric)
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise SchemaError("file not found", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("file is empty", path, 1) from None
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"missing column(s) {missing}; header is {header}", path, 1)
        keep = [c for c in list(required) + list(optional) if c in header]
        idx = {c: header.index(c) for c in keep}
        cols = {c: [] for c in keep}
        lines = []
        for row in reader:
            line = reader.line_num
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(row)}", path, line)
            for c in keep:
                text = row[idx[c]].strip()
                if c in numeric or c in optional:
                    try:
                        v = float(text)
                    except ValueError:
                        raise SchemaError(f"column {c!r}: {text!r} is not a number", path, line) from None
                    if not math.isfinite(v):
                        raise SchemaError(f"column {c!r}: non-finite value {text!r}", path, line)
                    cols[c].append(v)
                else:
                    cols[c].append(text)
            lines.append(line)
    if not lines:
        raise SchemaError("no data rows", path, 2)
    return cols, lines


# --------------------------------------------------------------------------
# traces


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def read_trace(csv_path, sidecar=None):
    """Load a :class:`CPMGTrace` from ``tau_s, signal[, sigma]`` CSV plus JSON sidecar."""
    cols, lines = read_csv(csv_path, TRACE_COLUMNS, optional=("sigma",))
    tau = np.array(cols["tau_s"])
    bad = np.nonzero(np.diff(tau) <= 0)[0]
    if bad.size:
        raise SchemaError("tau_s must be strictly increasing", csv_path, lines[bad[0] + 1])
    if tau[0] <= 0:
        raise SchemaError("tau_s must be positive", csv_path, lines[0])
    sidecar = sidecar_path(csv_path) if sidecar is None else Path(sidecar)
    meta = load_json(sidecar)
    if not isinstance(meta, dict):
        raise SchemaError("sidecar must be a JSON object", sidecar)
    unknown = set(meta) - SIDECAR_KEYS
    if unknown:
        raise SchemaError(f"unknown sidecar key(s) {sorted(unknown)}", sidecar)
    for key in ("n_pulses", "t1_s"):
        if key not in meta:
            raise SchemaError(f"missing sidecar key {key!r}", sidecar)
    sigma = np.array(cols["sigma"]) if "sigma" in cols else None
    try:
        return CPMGTrace(
            n_pulses=meta["n_pulses"],
            tau=tau,
            signal=np.array(cols["signal"]),
            t1=meta["t1_s"],
            qubit_id=str(meta.get("qubit_id", "")),
            flux=None if meta.get("flux_phi0") is None else float(meta["flux_phi0"]),
            sigma=sigma,
            tau0=float(meta.get("tau0_s", 0.0)),
        )
    except (DomainError, TypeError) as exc:
        raise SchemaError(str(exc), csv_path) from None


def write_trace(trace, csv_path):
    """Write ``trace`` as CSV plus sidecar; returns both paths."""
    csv_path = Path(csv_path)
    columns = TRACE_COLUMNS + (("sigma",) if trace.sigma is not None else ())
    arrays = [trace.tau, trace.signal] + ([trace.sigma] if trace.sigma is not None else [])
    write_csv(csv_path, columns, zip(*arrays))
    meta = {"n_pulses": trace.n_pulses, "t1_s": trace.t1, "qubit_id": trace.qubit_id,
            "flux_phi0": trace.flux, "tau0_s": trace.tau0}
    side = sidecar_path(csv_path)
    dump_json(meta, side)
    return csv_path, side


def read_trace_dir(directory):
    """Every ``*.csv`` trace in ``directory``, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SchemaError("not a directory", directory)
    paths = sorted(p for p in directory.glob("*.csv"))
    if not paths:
        raise SchemaError("no trace CSV files found", directory)
    return [read_trace(p) for p in paths]


# --------------------------------------------------------------------------
# PSD estimates


def write_psd(estimate, path):
    write_csv(path, PSD_COLUMNS + ("n_pulses", "tau_s"),
              zip(estimate.freq, estimate.s_phi, estimate.sigma, estimate.n_pulses, estimate.tau))


def read_psd(path, qubit_id="", flux=None):
    from .noise import PSDEstimate

    cols, lines = read_csv(path, PSD_COLUMNS, optional=("n_pulses", "tau_s"))
    freq = np.array(cols["freq_hz"])
    s = np.array(cols["s_phi0sq_per_hz"])
    for name, arr in (("freq_hz", freq), ("s_phi0sq_per_hz", s)):
        bad = np.nonzero(arr <= 0)[0]
        if bad.size:
            raise SchemaError(f"{name} must be positive", path, lines[bad[0]])
    n = len(freq)
    return PSDEstimate(
        freq=freq,
        s_phi=s,
        sigma=np.array(cols["sigma"]),
        qubit_id=qubit_id,
        flux=flux,
        n_pulses=np.array(cols.get("n_pulses", [0] * n), dtype=int),
        tau=np.array(cols.get("tau_s", [math.nan] * n)),
    )


# --------------------------------------------------------------------------
# loss budget


def read_participations(path):
    cols, lines = read_csv(path, PARTICIPATION_COLUMNS, numeric=PARTICIPATION_COLUMNS[1:])
    rows = []
    for i, line in enumerate(lines):
        try:
            rows.append(ParticipationRow(*(cols[c][i] for c in PARTICIPATION_COLUMNS)))
        except DomainError as exc:
            raise SchemaError(str(exc), path, line) from None
    try:
        return ParticipationTable(rows)
    except DomainError as exc:
        raise SchemaError(str(exc), path) from None


def write_participations(table, path):
    write_csv(path, PARTICIPATION_COLUMNS,
              ([r.design_id, r.p_ms, r.p_sa, r.p_ma, r.p_bulk] for r in table))


def read_t1_dataset(path):
    """``{design_id: (t1_s, f_q_hz)}`` in file order."""
    cols, lines = read_csv(path, T1_COLUMNS, numeric=T1_COLUMNS[1:])
    out = {}
    for i, line in enumerate(lines):
        d, t1, fq = cols["design_id"][i], cols["t1_s"][i], cols["f_q_hz"][i]
        if t1 <= 0 or fq <= 0:
            raise SchemaError("t1_s and f_q_hz must be positive", path, line)
        if d in out:
            raise SchemaError(f"duplicate design id {d!r}", path, line)
        out[d] = (t1, fq)
    return out


def write_t1_dataset(data, path):
    write_csv(path, T1_COLUMNS, ([d, t1, fq] for d, (t1, fq) in data.items()))


def write_curve(freq, t1, path):
    write_csv(path, CURVE_COLUMNS, zip(freq, t1))
