import json
import subprocess
import sys

import numpy as np
import pytest

from hurstscale import io as hio
from hurstscale.cli import main
from hurstscale.errors import ConfigurationError, DataError
from hurstscale.pipeline import RunConfig, run_pipeline
from hurstscale.spectrum import read_spectrum_csv
from hurstscale.synth import FbmSpec, geometric_fbm_path


def _write(path, text):
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def price_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "prices.csv"
    prices = geometric_fbm_path(FbmSpec(0.6, 2 ** 16 + 37, seed=11)).prices * 100.0
    hio.write_prices_csv(path, prices, interval=60.0, start=946_684_800.0)
    return path


# --- ingestion -------------------------------------------------------------

def test_two_row_file(tmp_path):
    ts, report = hio.ingest_csv(_write(tmp_path / "p.csv", "timestamp,price\n0,100\n60,101\n"))
    np.testing.assert_allclose(ts.values, [0.0, np.log(1.01)], atol=1e-15)
    assert report["rows"] == 2 and report["fills"] == 0 and ts.dt == 60.0


def test_iso_timestamps_and_column_index(tmp_path):
    text = "when,bid,price\n2000-01-03T09:30:00Z,1,50\n2000-01-03T09:31:00Z,1,55\n2000-01-03T09:32:00+00:00,1,45\n"
    ts, _ = hio.ingest_csv(_write(tmp_path / "p.csv", text), column=2, timestamp_column="when")
    np.testing.assert_allclose(ts.values, np.log([1.0, 1.1, 0.9]))


def test_rows_without_timestamps(tmp_path):
    ts, report = hio.ingest_csv(_write(tmp_path / "p.csv", "price\n2\n4\n\n8\n"), timestamp_column=None)
    np.testing.assert_allclose(ts.values, np.log([1, 2, 4]))
    assert report["rows"] == 3


def test_forward_fill_one_missing_minute(tmp_path):
    path = _write(tmp_path / "p.csv", "timestamp,price\n0,10\n60,11\n180,12\n240,13\n")
    ts, report = hio.ingest_csv(path, gap_policy="forward-fill")
    np.testing.assert_allclose(ts.values, np.log(np.array([10, 11, 11, 12, 13]) / 10))
    assert report["fills"] == 1 and report["samples"] == 5
    with pytest.raises(DataError, match="row 3"):
        hio.ingest_csv(path)


@pytest.mark.parametrize("body, row", [
    ("0,10\n60,-1\n", 2), ("0,10\n60,0\n", 2), ("0,10\n60,11\n60,12\n", 3), ("0,10\n60,11\n30,12\n", 3),
    ("0,10\n60,abc\n", 2), ("0,10\n60,11\n150,12\n", 3), ("0,10\nyesterday,11\n", 2),
])
def test_bad_rows_report_their_number(tmp_path, body, row):
    with pytest.raises(DataError) as info:
        hio.ingest_csv(_write(tmp_path / "p.csv", "timestamp,price\n" + body))
    assert info.value.row == row and str(info.value).startswith(f"row {row}:")


def test_bad_files(tmp_path):
    with pytest.raises(DataError):
        hio.ingest_csv(_write(tmp_path / "a.csv", ""))
    with pytest.raises(DataError):
        hio.ingest_csv(_write(tmp_path / "b.csv", "timestamp,price\n"))
    with pytest.raises(DataError):
        hio.ingest_csv(_write(tmp_path / "c.csv", "timestamp,close\n0,1\n"))
    with pytest.raises(DataError):
        hio.ingest_csv(_write(tmp_path / "d.csv", "timestamp,price\n0,1\n"), gap_policy="interpolate")


# --- table round trips -----------------------------------------------------

def test_table_round_trips(tmp_path):
    rows = [{"segment": 0, "start": 0, "length": 8, "H_raw": 0.61, "H_filtered": 0.6},
            {"segment": 1, "start": 8, "length": 8, "H_raw": 0.57, "H_filtered": None}]
    hio.write_hurst_csv(tmp_path / "h.csv", rows)
    assert hio.read_hurst_csv(tmp_path / "h.csv") == rows

    spectra = [{"segment": 0, "j": 4, "N_j": 16, "S_j": 1.5, "log2_S_j": np.log2(1.5)}]
    hio.write_segment_spectra_csv(tmp_path / "s.csv", spectra)
    assert hio.read_segment_spectra_csv(tmp_path / "s.csv") == spectra

    starts = np.array([0, 4, 8])
    tracks = {4: (np.array([0.6, 0.61, 0.62]), np.array([0.6, 0.6, 0.6])),
              8: (np.array([0.59, 0.59, np.nan]), np.array([0.58, 0.58, np.nan]))}
    hio.write_compare_csv(tmp_path / "c.csv", starts, tracks)
    back_starts, back = hio.read_compare_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back_starts, starts)
    for L in tracks:
        for a, b in zip(tracks[L], back[L]):
            np.testing.assert_array_equal(a, b)

    x = np.random.default_rng(0).standard_normal(20)
    hio.write_series_csv(tmp_path / "x.csv", x)
    np.testing.assert_array_equal(hio.read_series_csv(tmp_path / "x.csv"), x)

    obj = {"b": [1.5, float("nan")], "a": np.int64(3), "c": np.arange(2.0)}
    hio.write_json(tmp_path / "o.json", obj)
    assert hio.read_json(tmp_path / "o.json") == {"a": 3, "b": [1.5, None], "c": [0.0, 1.0]}


# --- configuration ---------------------------------------------------------

def test_config_precedence(tmp_path):
    cfg = RunConfig.from_sources("estimate", {"synth": "fbm", "hurst": 0.7, "seed": 4}, {"seed": 9})
    assert (cfg.hurst, cfg.seed, cfg.p) == (0.7, 9, 2)
    _write(tmp_path / "c.json", json.dumps({"synth": "fbm", "length": 4096, "segment_lengths": [1024], "seed": 4}))
    code = main(["estimate", "--config", str(tmp_path / "c.json"), "--seed", "5", "--no-filter",
                 "-o", str(tmp_path / "out")])
    manifest = hio.read_json(tmp_path / "out" / "manifest.json")
    assert code == 0 and manifest["config"]["seed"] == 5 and manifest["config"]["length"] == 4096


@pytest.mark.parametrize("values", [
    {}, {"synth": "fbm", "input": "x.csv"}, {"synth": "fbm", "segment_lengths": [1000]},
    {"synth": "fbm", "covariance": "full", "c_d": 1.0}, {"synth": "fbm", "hurst": 1.2},
    {"synth": "fbm", "bogus": 1}, {"synth": "fbm", "jobs": 0}, {"synth": "fbm", "envelope": "tophat"},
])
def test_config_rejected_before_running(values):
    with pytest.raises(ConfigurationError):
        RunConfig.from_sources("estimate", values)


def test_cli_configuration_error_exit_code(tmp_path, capsys):
    assert main(["estimate", "--synth", "fbm", "--segment-length", "1000", "-o", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


# --- subcommands -----------------------------------------------------------

def test_estimate_synthetic_example(tmp_path):
    out = tmp_path / "run"
    code = main(["estimate", "--synth", "fbm", "--hurst", "0.6", "--length", "524288",
                 "--segment-length", "32768", "--seed", "1", "-o", str(out)])
    assert code == 0
    rows = hio.read_hurst_csv(out / "hurst.csv")
    assert len(rows) == 16
    assert 0.57 <= np.mean([r["H_raw"] for r in rows]) <= 0.63
    assert all(r["H_filtered"] is not None for r in rows)
    records = hio.read_json(out / "segments.json")["records"]
    assert set(records[0]) == {"segment_index", "start", "length", "c", "h", "H", "var_H", "scales_used"}
    assert [r["H"] for r in records] == [r["H_raw"] for r in rows]
    spectra = hio.read_segment_spectra_csv(out / "spectrum.csv")
    assert {s["segment"] for s in spectra} == set(range(16))
    vario = hio.read_json(out / "variogram.json")
    assert {"sigma_h2", "sigma_zeta2", "l_h", "mean", "L"} <= set(vario)
    manifest = hio.read_json(out / "manifest.json")
    assert manifest["status"] == "ok" and manifest["seed"] == 1
    assert {"hurstscale", "numpy", "scipy", "python"} <= set(manifest["versions"])
    assert manifest["result"]["per_length"]["32768"]["variogram"] == {k: vario[k] for k in manifest["result"]["per_length"]["32768"]["variogram"]}


def test_estimate_from_price_file_without_filter(tmp_path, price_file):
    out = tmp_path / "run"
    assert main(["estimate", "--input", str(price_file), "--segment-length", "4096", "--no-filter",
                 "-o", str(out)]) == 0
    rows = hio.read_hurst_csv(out / "hurst.csv")
    assert len(rows) == 16 and rows[3]["start"] == 3 * 4096
    assert all(r["H_filtered"] is None for r in rows)
    assert not (out / "variogram.json").exists()
    manifest = hio.read_json(out / "manifest.json")
    assert manifest["result"]["per_length"]["4096"]["remainder"] == 37


def test_multiple_segment_lengths_get_suffixed_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["estimate", "--synth", "fbm", "--length", "65536", "--segment-length", "4096,8192",
                 "-o", str(out)]) == 0
    assert len(hio.read_hurst_csv(out / "hurst_L4096.csv")) == 16
    assert len(hio.read_hurst_csv(out / "hurst_L8192.csv")) == 8


def test_compare_produces_aligned_tracks(tmp_path, price_file):
    out = tmp_path / "cmp"
    assert main(["compare", "--input", str(price_file), "--segment-lengths", "4096,8192,16384,32768",
                 "-o", str(out)]) == 0
    starts, tracks = hio.read_compare_csv(out / "compare.csv")
    np.testing.assert_array_equal(starts, np.arange(16) * 4096)
    assert sorted(tracks) == [4096, 8192, 16384, 32768]
    raw_32k = tracks[32768][0]
    np.testing.assert_array_equal(raw_32k[:8], raw_32k[0])
    np.testing.assert_array_equal(raw_32k[8:], raw_32k[8])
    manifest = hio.read_json(out / "manifest.json")
    assert set(manifest["result"]["per_length"]) == {"4096", "8192", "16384", "32768"}
    assert any("too few" in w for w in manifest["result"]["warnings"])
    vario = hio.read_json(out / "variogram.json")["per_length"]
    assert vario["32768"] is None and vario["4096"]["L"] == 4096


def test_spectrum_and_filter_commands(tmp_path):
    spec_out, est_out, filt_out = tmp_path / "s", tmp_path / "e", tmp_path / "f"
    assert main(["spectrum", "--synth", "fbm", "--length", "70000", "--segment-length", "65536",
                 "-o", str(spec_out)]) == 0
    fit = hio.read_json(spec_out / "fit.json")
    sp = read_spectrum_csv(spec_out / "spectrum.csv")
    assert sp.scale_range == tuple(fit["scale_range"]) and abs(fit["H"] - 0.6) < 0.05

    assert main(["spectrum", "--synth", "fbm", "--length", "65536", "--segment-length", "16384",
                 "-o", str(spec_out)]) == 0
    assert {r["segment"] for r in hio.read_segment_spectra_csv(spec_out / "spectrum.csv")} == {0, 1, 2, 3}
    assert len(hio.read_json(spec_out / "fit.json")["records"]) == 4

    assert main(["estimate", "--synth", "fbm", "--length", "131072", "--segment-length", "8192",
                 "--no-filter", "-o", str(est_out)]) == 0
    assert main(["filter", "--input", str(est_out / "hurst.csv"), "-o", str(filt_out)]) == 0
    rows = hio.read_hurst_csv(filt_out / "hurst.csv")
    raw = hio.read_hurst_csv(est_out / "hurst.csv")
    assert [r["H_raw"] for r in rows] == pytest.approx([r["H_raw"] for r in raw], abs=1e-12)
    assert np.std([r["H_filtered"] for r in rows]) <= np.std([r["H_raw"] for r in rows])
    assert (filt_out / "variogram.json").exists()


def test_synth_command(tmp_path):
    assert main(["synth", "--hurst", "0.7", "--length", "1024", "--envelope", "periodic", "--seed", "3",
                 "-o", str(tmp_path)]) == 0
    x = hio.read_series_csv(tmp_path / "series.csv")
    assert x.size == 1024 and x[0] == 0.0
    assert main(["synth", "--length", "64", "--format", "json", "-o", str(tmp_path)]) == 0
    assert len(hio.read_json(tmp_path / "series.json")["log_path"]) == 64


def test_constant_prices_fail_with_structured_error(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    hio.write_prices_csv(path, np.full(8192, 25.0))
    code = main(["estimate", "--input", str(path), "--segment-length", "4096", "-o", str(tmp_path / "o")])
    assert code == 1
    manifest = hio.read_json(tmp_path / "o" / "manifest.json")
    assert manifest["status"] == "error" and manifest["error"]["type"] == "DegenerateInputError"
    assert "DegenerateInputError" in capsys.readouterr().err


def test_bad_row_lands_in_manifest(tmp_path):
    path = _write(tmp_path / "p.csv", "timestamp,price\n0,1\n60,2\n120,-3\n")
    assert main(["estimate", "--input", str(path), "-o", str(tmp_path / "o")]) == 1
    err = hio.read_json(tmp_path / "o" / "manifest.json")["error"]
    assert err["type"] == "DataError" and err["row"] == 3


def test_identical_runs_give_identical_json(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = RunConfig.from_sources("estimate", {"synth": "gfbm", "length": 2 ** 16, "segment_lengths": [4096],
                                                  "envelope": "quadratic", "seed": 12, "output_dir": str(tmp_path / name)})
        run_pipeline(cfg)
        outs.append(tmp_path / name)
    for fname in ("segments.json", "variogram.json", "hurst.csv", "spectrum.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    ma, mb = (hio.read_json(o / "manifest.json") for o in outs)
    ma.pop("created"), mb.pop("created")
    ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
    assert ma == mb


def test_parallel_run_matches_serial(tmp_path):
    base = ["estimate", "--synth", "fbm", "--length", "65536", "--segment-length", "4096", "--seed", "2"]
    assert main(base + ["-o", str(tmp_path / "s")]) == 0
    assert main(base + ["--jobs", "2", "-o", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "segments.json").read_bytes() == (tmp_path / "p" / "segments.json").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hurstscale", "synth", "--length", "32", "-o", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == "ok"


def test_plain_fbm_source_ignores_envelope(tmp_path):
    runs = {}
    for name, synth in (("a", "fbm"), ("b", "gfbm")):
        out = tmp_path / name
        assert main(["estimate", "--synth", synth, "--length", "32768", "--segment-length", "4096",
                     "--envelope", "quadratic", "--no-filter", "-o", str(out)]) == 0
        runs[name] = hio.read_json(out / "segments.json")["records"]
    assert [r["h"] for r in runs["a"]] != [r["h"] for r in runs["b"]]
    assert [r["c"] for r in runs["a"]] != [r["c"] for r in runs["b"]]
