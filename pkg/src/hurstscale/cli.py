"""
Command-line entry point: ``hurstscale {synth,estimate,spectrum,filter,compare}``.

Option values resolve as flags > ``--config`` JSON file > built-in defaults.
"""

import argparse
import json
import logging
import sys

from .errors import HurstScaleError
from .pipeline import RunConfig, run_pipeline

logger = logging.getLogger("hurstscale")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_source(p):
    src = p.add_argument_group("data source")
    src.add_argument("--input", help="CSV of timestamp,price rows")
    src.add_argument("--synth", choices=["fbm", "gfbm"], help="synthetic input: plain fBm, or geometric fBm with --envelope and --mu")
    src.add_argument("--column", help="price column name or index (default: price)")
    src.add_argument("--timestamp-column", help="timestamp column name or index (default: timestamp)")
    src.add_argument("--gap-policy", choices=["error", "forward-fill"])
    _add_synth(p)


def _add_synth(p):
    g = p.add_argument_group("synthetic path")
    g.add_argument("--hurst", type=float)
    g.add_argument("--length", type=int)
    g.add_argument("--envelope", choices=["constant", "periodic", "log_shift", "xlogx", "quadratic", "wiener"])
    g.add_argument("--amplitude", type=float)
    g.add_argument("--mu", type=float, help="drift per sample")


def _add_estimator(p):
    g = p.add_argument_group("estimator")
    g.add_argument("--segment-length", dest="segment_lengths", type=_int_list,
                   help="power-of-two segment length(s), comma-separated")
    g.add_argument("-p", "--vanishing-moments", dest="p", type=int)
    g.add_argument("--j-min", type=int)
    g.add_argument("--j-max", type=int)
    g.add_argument("--min-coeffs", type=int)
    g.add_argument("--covariance", choices=["diagonal", "full"])
    g.add_argument("--c-d", type=float, help="diagonal factor of the full covariance model")
    g.add_argument("--jobs", type=int, help="worker processes for per-segment estimation")


def _add_filter(p):
    g = p.add_argument_group("filter")
    g.add_argument("--no-filter", dest="filter", action="store_false", default=None)
    g.add_argument("--max-lag", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="hurstscale", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig values")
    common.add_argument("-o", "--output-dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("synth", parents=[common], help="write a synthetic (geometric) fBm log-path")
    _add_synth(p)

    p = sub.add_parser("estimate", parents=[common], help="per-segment Hurst estimates, optionally filtered")
    _add_source(p)
    _add_estimator(p)
    _add_filter(p)

    p = sub.add_parser("spectrum", parents=[common], help="log-scale spectra per segment")
    _add_source(p)
    _add_estimator(p)

    p = sub.add_parser("filter", parents=[common], help="filter the H column of an existing hurst.csv")
    p.add_argument("--input", required=True)
    p.add_argument("--max-lag", type=int)

    p = sub.add_parser("compare", parents=[common], help="multi-resolution comparison across segment lengths")
    _add_source(p)
    _add_estimator(p)
    p.add_argument("--max-lag", type=int)
    p.add_argument("--segment-lengths", dest="segment_lengths", type=_int_list)
    return parser


def config_from_args(args):
    values = vars(args).copy()
    command = values.pop("command")
    values.pop("verbose", None)
    config_path = values.pop("config", None)
    file_values = {}
    if config_path:
        with open(config_path) as fh:
            file_values = json.load(fh)
        file_values.pop("command", None)
    flags = {k: v for k, v in values.items() if v is not None}
    return RunConfig.from_sources(command, file_values, flags)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (HurstScaleError, OSError, json.JSONDecodeError) as exc:
        print(f"hurstscale: configuration error: {exc}", file=sys.stderr)
        return 2
    manifest = run_pipeline(config)
    if manifest["status"] != "ok":
        err = manifest["error"]
        print(f"hurstscale: {err['type']}: {err['message']}", file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "output_dir": config.output_dir,
                      "outputs": manifest["result"].get("outputs", [])}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
