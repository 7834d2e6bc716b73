"""
File formats: price CSV ingestion and the pipeline's output tables.

Every writer has a matching reader; JSON is written with sorted keys so that
identical runs produce identical bytes.
"""

import csv
import json
import math
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .series import TimeSeries

SCHEMA_VERSION = "1.0"
GAP_POLICIES = ("error", "forward-fill")


def _parse_timestamp(text, row):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"unparseable timestamp {text!r}", row=row) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.timestamp()


def _resolve_column(header, column, role):
    if isinstance(column, int) or (isinstance(column, str) and column.isdigit()):
        idx = int(column)
        if idx >= len(header):
            raise DataError(f"{role} column index {idx} out of range for header {header}")
        return idx
    if column not in header:
        raise DataError(f"{role} column {column!r} not in header {header}")
    return header.index(column)


def ingest_csv(path, column="price", timestamp_column="timestamp", gap_policy="error", interval=None):
    """Read a ``timestamp,price`` CSV into a log-price series ``Y_t = log(P_t/P_0)``.

    Parameters
    ----------
    path : str or Path
    column, timestamp_column : str or int
        Header name or zero-based index. ``timestamp_column=None`` treats
        rows as consecutive samples.
    gap_policy : {"error", "forward-fill"}
        What to do when consecutive timestamps are more than one sampling
        interval apart. Forward-fill repeats the last price for each missing
        slot.
    interval : float, optional
        Sampling interval in seconds; inferred as the smallest positive
        timestamp difference when omitted.

    Returns
    -------
    TimeSeries, dict
        The log-price series and an ingestion report (rows read, fills).
    """
    if gap_policy not in GAP_POLICIES:
        raise DataError(f"gap policy must be one of {GAP_POLICIES}, got {gap_policy!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file") from None
        pcol = _resolve_column(header, column, "price")
        tcol = None if timestamp_column is None else _resolve_column(header, timestamp_column, "timestamp")
        times, prices = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                price = float(row[pcol])
            except (ValueError, IndexError):
                raise DataError(f"unparseable price {row[pcol] if pcol < len(row) else ''!r}", row=row_no) from None
            if not price > 0 or not math.isfinite(price):
                raise DataError(f"non-positive price {price}", row=row_no)
            if tcol is not None:
                t = _parse_timestamp(row[tcol], row_no)
                if times and t <= times[-1]:
                    raise DataError("timestamps are not strictly increasing", row=row_no)
                times.append(t)
            prices.append(price)
    if not prices:
        raise DataError("no data rows")

    prices = np.array(prices)
    fills = 0
    if tcol is not None and len(times) > 1:
        t = np.array(times)
        steps = np.diff(t)
        if interval is None:
            interval = float(steps.min())
        ratio = steps / interval
        slots = np.rint(ratio).astype(int)
        if np.any(np.abs(ratio - slots) > 1e-6) or np.any(slots < 1):
            bad = int(np.argmax(np.abs(ratio - slots) > 1e-6)) + 2
            raise DataError(f"timestamp step not a multiple of the {interval}s interval", row=bad)
        gaps = np.flatnonzero(slots > 1)
        if gaps.size:
            if gap_policy == "error":
                raise DataError(f"{int(np.sum(slots[gaps] - 1))} missing samples", row=int(gaps[0]) + 2)
            fills = int(np.sum(slots - 1))
            prices = np.repeat(prices, np.append(slots, 1))
    log_path = np.log(prices / prices[0])
    report = {"rows": int(len(times) or len(prices)), "fills": fills, "gap_policy": gap_policy,
              "interval": interval, "samples": int(log_path.size)}
    return TimeSeries(log_path, dt=1.0 if interval is None else float(interval), meta={"source": str(path)}), report


def write_series_csv(path, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            writer.writerow([i, repr(float(v))])


def read_series_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["value"]) for r in rows])


def write_prices_csv(path, prices, interval=60.0, start=0.0):
    """``timestamp,price`` file with epoch-second timestamps."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "price"])
        for i, p in enumerate(np.asarray(prices, dtype=float)):
            writer.writerow([repr(start + i * interval), repr(float(p))])


HURST_FIELDS = ["segment", "start", "length", "H_raw", "H_filtered"]


def write_hurst_csv(path, rows):
    """Rows are dicts with the :data:`HURST_FIELDS` keys; missing filtered values stay empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HURST_FIELDS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r.get(k)) for k in HURST_FIELDS})


def read_hurst_csv(path):
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append({
                "segment": int(r["segment"]), "start": int(r["start"]), "length": int(r["length"]),
                "H_raw": _num(r["H_raw"]), "H_filtered": _num(r["H_filtered"]),
            })
    return out


SPECTRA_FIELDS = ["segment", "j", "N_j", "S_j", "log2_S_j"]


def write_segment_spectra_csv(path, rows):
    """Per-segment spectrum rows ``(segment, j, N_j, S_j, log2_S_j)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SPECTRA_FIELDS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r[k]) for k in SPECTRA_FIELDS})


def read_segment_spectra_csv(path):
    with open(path, newline="") as fh:
        return [
            {"segment": int(r["segment"]), "j": int(r["j"]), "N_j": int(r["N_j"]),
             "S_j": float(r["S_j"]), "log2_S_j": float(r["log2_S_j"])}
            for r in csv.DictReader(fh)
        ]


def write_compare_csv(path, starts, tracks):
    """Aligned multi-resolution table.

    ``tracks`` maps segment length to ``(H_raw, H_filtered)`` arrays sampled
    at ``starts``; columns are ``H_raw_L<L>`` and ``H_filtered_L<L>``.
    """
    lengths = list(tracks)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start"] + [f"{kind}_L{L}" for L in lengths for kind in ("H_raw", "H_filtered")])
        for k, start in enumerate(starts):
            row = [int(start)]
            for L in lengths:
                raw, filt = tracks[L]
                row += [_fmt(float(raw[k])), _fmt(float(filt[k]))]
            writer.writerow(row)


def read_compare_csv(path):
    """Returns ``(starts, {L: (H_raw, H_filtered)})`` with NaN for empty cells."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    starts = np.array([int(r[0]) for r in rows])
    tracks = {}
    for col in range(1, len(header), 2):
        L = int(header[col].rsplit("_L", 1)[1])
        raw = np.array([_num(r[col]) if r[col] else np.nan for r in rows], dtype=float)
        filt = np.array([_num(r[col + 1]) if r[col + 1] else np.nan for r in rows], dtype=float)
        tracks[L] = (raw, filt)
    return starts, tracks


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return v


def _num(text):
    return float(text) if text not in ("", None) else None


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def dumps(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    return obj


def segment_record(index, start, length, estimate=None, error=None):
    """JSON record for one segment."""
    if estimate is None:
        return {"segment_index": index, "start": start, "length": length, "error": error}
    return {
        "segment_index": index, "start": start, "length": length,
        "c": estimate.c, "h": estimate.h, "H": estimate.H, "var_H": estimate.variance,
        "scales_used": list(estimate.scale_range),
    }
