"""
Run configuration and the orchestration behind each CLI subcommand.

Every run writes ``manifest.json`` into the output directory, including on
failure (``status: "error"`` plus a structured error).
"""

import logging
import platform
import warnings
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import io as hio
from .errors import ConfigurationError, DegenerateInputError, HurstScaleError
from .estimator import EstimatorConfig, HurstRangeWarning, estimate_segment, log_spectrum
from .segmentation import (
    SlopeSeries, estimate_segments, filter_slopes, multi_resolution_comparison, segment_series,
)
from .series import TimeSeries
from .spectrum import write_spectrum_csv
from .synth import ENVELOPE_KINDS, FbmSpec, VolatilityEnvelope, generate_fbm, geometric_fbm_path

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "estimate", "spectrum", "filter", "compare")


@dataclass
class RunConfig:
    command: str = "estimate"
    input: str = None
    synth: str = None
    hurst: float = 0.6
    length: int = 2 ** 19
    envelope: str = "constant"
    amplitude: float = 1.0
    mu: float = 0.0
    column: str = "price"
    timestamp_column: str = "timestamp"
    gap_policy: str = "error"
    segment_lengths: list = field(default_factory=lambda: [2 ** 15])
    p: int = 2
    j_min: int = 4
    j_max: int = None
    min_coeffs: int = 8
    covariance: str = "diagonal"
    c_d: float = 2.0
    filter: bool = True
    max_lag: int = None
    output_dir: str = "hurst_out"
    format: str = "csv"
    seed: int = 0
    jobs: int = 1

    @classmethod
    def from_sources(cls, command, file_values=None, flag_values=None):
        """Merge with precedence flags > config file > defaults."""
        known = {f.name for f in fields(cls)}
        merged = {"command": command}
        for source in (file_values or {}, flag_values or {}):
            unknown = set(source) - known
            if unknown:
                raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
            merged.update({k: v for k, v in source.items() if v is not None})
        return cls(**merged).validate()

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"command must be one of {COMMANDS}")
        if isinstance(self.segment_lengths, (int, np.integer)):
            self.segment_lengths = [int(self.segment_lengths)]
        self.segment_lengths = [int(x) for x in self.segment_lengths]
        for L in self.segment_lengths:
            if L < 2 or L & (L - 1):
                raise ConfigurationError(f"segment length {L} is not a power of two")
        if self.command not in ("synth", "filter"):
            if (self.input is None) == (self.synth is None):
                raise ConfigurationError("give exactly one of --input or --synth")
        if self.command == "filter" and self.input is None:
            raise ConfigurationError("filter needs --input (a hurst.csv from estimate)")
        if self.synth not in (None, "fbm", "gfbm"):
            raise ConfigurationError(f"unknown synthetic source {self.synth!r}")
        if self.envelope not in ENVELOPE_KINDS:
            raise ConfigurationError(f"envelope must be one of {ENVELOPE_KINDS}")
        if self.format not in ("csv", "json"):
            raise ConfigurationError("format must be csv or json")
        if self.gap_policy not in hio.GAP_POLICIES:
            raise ConfigurationError(f"gap policy must be one of {hio.GAP_POLICIES}")
        if not 0 < self.hurst < 1:
            raise ConfigurationError("hurst must lie in (0, 1)")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        self.estimator_config().validate()
        return self

    def estimator_config(self):
        return EstimatorConfig(p=self.p, j_min=self.j_min, j_max=self.j_max, min_coeffs=self.min_coeffs,
                               covariance=self.covariance, c_d=self.c_d)

    def to_dict(self):
        return asdict(self)


def _versions():
    return {"hurstscale": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def load_series(config):
    """Input series and an ingestion report for the configured source."""
    if config.input is not None:
        return hio.ingest_csv(config.input, config.column, config.timestamp_column, config.gap_policy)
    spec = FbmSpec(H=config.hurst, N=config.length, seed=config.seed)
    report = {"synthetic": config.synth, "samples": config.length, "H": config.hurst, "seed": config.seed}
    if config.synth == "fbm":
        return generate_fbm(spec), report
    env = VolatilityEnvelope(config.envelope, amplitude=config.amplitude, seed=config.seed + 1)
    path = geometric_fbm_path(spec, env, mu=config.mu)
    report.update(envelope=config.envelope, amplitude=config.amplitude, mu=config.mu)
    return TimeSeries(path.log_path), report


def _hurst_rows(L, starts, H_raw, H_filtered=None):
    rows = []
    for i, (start, raw) in enumerate(zip(starts, H_raw)):
        filt = None if H_filtered is None else H_filtered[i]
        rows.append({"segment": i, "start": int(start), "length": L, "H_raw": raw, "H_filtered": filt})
    return rows


def _run_synth(config, out):
    spec = FbmSpec(H=config.hurst, N=config.length, seed=config.seed)
    env = VolatilityEnvelope(config.envelope, amplitude=config.amplitude, seed=config.seed + 1)
    path = geometric_fbm_path(spec, env, mu=config.mu)
    name = "series.csv" if config.format == "csv" else "series.json"
    if config.format == "csv":
        hio.write_series_csv(out / name, path.log_path)
    else:
        hio.write_json(out / name, {"log_path": path.log_path})
    return {"outputs": [name], "samples": config.length}


def _estimate_one_length(config, series, L, out, suffix=""):
    split = segment_series(series, L)
    est_cfg = config.estimator_config()
    results = estimate_segments(split, est_cfg, jobs=config.jobs)
    records, spectra_rows, ok = [], [], []
    for i, (seg, res) in enumerate(zip(split, results)):
        if isinstance(res, DegenerateInputError):
            records.append(hio.segment_record(i, seg.start, L, error={"type": "DegenerateInputError",
                                                                    "message": str(res)}))
            continue
        records.append(hio.segment_record(i, seg.start, L, res))
        ok.append(res)
        for row in log_spectrum(seg.values, est_cfg).rows():
            spectra_rows.append({"segment": i, **row})
    summary = {"segments": len(split), "remainder": split.remainder,
               "degenerate": len(split) - len(ok)}
    if not ok:
        raise DegenerateInputError("every segment is degenerate (constant or polynomial input)")
    H_raw = np.array([r["H"] if "H" in r else np.nan for r in records])
    H_filt, model = None, None
    if config.filter:
        if len(ok) != len(records):
            raise DegenerateInputError(
                f"{summary['degenerate']} degenerate segment(s); rerun with --no-filter to keep the rest")
        slopes = SlopeSeries(np.array([r.h for r in ok]), L=L, starts=np.array([s.start for s in split]))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            filtered, model = filter_slopes(slopes, config.max_lag)
        H_filt = filtered.H_filtered if model is not None else None
        summary["filter_warnings"] = [str(w.message) for w in caught if not issubclass(w.category, HurstRangeWarning)]
        summary["std_raw"] = float(np.std(filtered.H_raw))
        summary["std_filtered"] = float(np.std(filtered.H_filtered))
    outputs = []
    hurst_name = f"hurst{suffix}.csv"
    hio.write_hurst_csv(out / hurst_name, _hurst_rows(L, [s.start for s in split], H_raw, H_filt))
    outputs.append(hurst_name)
    seg_name = f"segments{suffix}.json"
    hio.write_json(out / seg_name, {"schema_version": hio.SCHEMA_VERSION, "segment_length": L,
                                    "records": records})
    outputs.append(seg_name)
    spec_name = f"spectrum{suffix}.csv"
    hio.write_segment_spectra_csv(out / spec_name, spectra_rows)
    outputs.append(spec_name)
    if model is not None:
        vname = f"variogram{suffix}.json"
        hio.write_json(out / vname, {"schema_version": hio.SCHEMA_VERSION, **model.to_dict(),
                                     "diagnostics": model.diagnostics})
        outputs.append(vname)
        summary["variogram"] = model.to_dict()
    summary["outputs"] = outputs
    return summary


def _run_estimate(config, out):
    series, report = load_series(config)
    result = {"ingestion": report, "per_length": {}}
    multiple = len(config.segment_lengths) > 1
    outputs = []
    for L in config.segment_lengths:
        summary = _estimate_one_length(config, series, L, out, suffix=f"_L{L}" if multiple else "")
        outputs += summary.pop("outputs")
        result["per_length"][str(L)] = summary
    result["outputs"] = outputs
    return result


def _run_spectrum(config, out):
    """One spectrum and fit when the series holds a single segment, else per-segment tables."""
    series, report = load_series(config)
    values = series.values
    est_cfg = config.estimator_config()
    L = config.segment_lengths[0]
    if L > values.size:
        L = 1 << int(np.log2(values.size))
    split = segment_series(values, L)
    if len(split) == 1:
        spectrum = log_spectrum(split[0].values, est_cfg)
        write_spectrum_csv(out / "spectrum.csv", spectrum)
        est = estimate_segment(split[0].values, est_cfg)
        hio.write_json(out / "fit.json", {"schema_version": hio.SCHEMA_VERSION, **est.to_dict()})
        return {"ingestion": report, "outputs": ["spectrum.csv", "fit.json"], "samples_used": L}
    rows, records = [], []
    for i, seg in enumerate(split):
        rows += [{"segment": i, **r} for r in log_spectrum(seg.values, est_cfg).rows()]
        records.append(hio.segment_record(i, seg.start, L, estimate_segment(seg.values, est_cfg)))
    hio.write_segment_spectra_csv(out / "spectrum.csv", rows)
    hio.write_json(out / "fit.json", {"schema_version": hio.SCHEMA_VERSION, "segment_length": L,
                                      "records": records})
    return {"ingestion": report, "outputs": ["spectrum.csv", "fit.json"], "segments": len(split)}


def _run_filter(config, out):
    rows = hio.read_hurst_csv(config.input)
    if not rows:
        raise ConfigurationError("hurst table is empty")
    L = rows[0]["length"]
    h = np.array([2.0 * r["H_raw"] + 1.0 for r in rows])
    slopes = SlopeSeries(h, L=L, starts=np.array([r["start"] for r in rows]))
    filtered, model = filter_slopes(slopes, config.max_lag)
    hio.write_hurst_csv(out / "hurst.csv", _hurst_rows(L, slopes.starts, filtered.H_raw,
                                                      filtered.H_filtered if model else None))
    outputs = ["hurst.csv"]
    result = {"std_raw": filtered.std_before / 2.0, "std_filtered": filtered.std_after / 2.0}
    if model is not None:
        hio.write_json(out / "variogram.json", {"schema_version": hio.SCHEMA_VERSION, **model.to_dict(),
                                                "diagnostics": model.diagnostics})
        outputs.append("variogram.json")
        result["variogram"] = model.to_dict()
    result["outputs"] = outputs
    return result


def _run_compare(config, out):
    series, report = load_series(config)
    values = series.values
    lengths = sorted(config.segment_lengths)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = multi_resolution_comparison(values, lengths, config.estimator_config(), config.max_lag)
    step = lengths[0]
    n = (values.size // step) * step
    grid = np.arange(0, n, step)
    tracks = {L: (res.aligned(values.size, filtered=False)[grid], res.aligned(values.size, filtered=True)[grid])
              for L, res in results.items()}
    hio.write_compare_csv(out / "compare.csv", grid, tracks)
    variograms = {str(L): (res.model.to_dict() if res.model else None) for L, res in results.items()}
    hio.write_json(out / "variogram.json", {"schema_version": hio.SCHEMA_VERSION, "per_length": variograms})
    summary = {str(L): {"segments": res.slopes.J_seg,
                        "mean_H_raw": float(res.filtered.H_raw.mean()),
                        "std_H_raw": float(res.filtered.H_raw.std()),
                        "std_H_filtered": float(res.filtered.H_filtered.std())}
               for L, res in results.items()}
    return {"ingestion": report, "outputs": ["compare.csv", "variogram.json"], "per_length": summary,
            "warnings": [str(w.message) for w in caught if not issubclass(w.category, HurstRangeWarning)]}


RUNNERS = {"synth": _run_synth, "estimate": _run_estimate, "spectrum": _run_spectrum,
           "filter": _run_filter, "compare": _run_compare}


def run_pipeline(config):
    """Execute ``config.command``; always writes ``manifest.json``.

    Returns the manifest dict. ``manifest["status"]`` is ``"ok"`` or
    ``"error"``.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": hio.SCHEMA_VERSION,
        "command": config.command,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": _versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    try:
        manifest["result"] = RUNNERS[config.command](config, out)
        manifest["status"] = "ok"
    except (HurstScaleError, OSError) as exc:
        logger.error("%s failed: %s", config.command, exc)
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc),
                             "row": getattr(exc, "row", None)}
    hio.write_json(out / "manifest.json", manifest)
    return manifest
