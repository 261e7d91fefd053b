"""Command line front end.

Four subcommands:

    law            tabulate the limiting density and its support summary
    simulate-clt   Monte Carlo fluctuation study from a JSON config
    detect-study   frequency table of the signal counter along a ladder
    detect         run the signal counter on record files

All numeric CSV output uses 17 significant digits, '.' decimals, ','
separators, and a header row, so repeated runs with the same config and
seed are byte-identical regardless of thread count.  Timestamps live only
in manifest.json.  Exit codes: 0 success, 2 invalid parameters or config,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detect import (
    DetectorConfig,
    SignalModel,
    block_noise_model,
    equicorrelated_model,
    estimate_count,
    null_model,
    records_spectrum,
)
from .errors import NumericalError, ParameterError
from .experiments import (
    ExperimentConfig,
    kde_1d,
    kde_2d,
    run_clt_study,
    run_detection_study,
    summarize,
)
from .sampling import EntryDistribution, ModelDims
from .spikes import SpikeSpec, critical_interval, projection_variance
from .wachter import FisherParams, density, mass_at_zero, support_edges

__all__ = ["main", "build_parser"]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(
    out_dir: Path, command: str, config: dict, seed, threads: int | None
) -> None:
    _write_json(
        out_dir / "manifest.json",
        {
            "command": command,
            "version": __version__,
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(
                timespec="seconds"
            ),
            "seed": seed,
            "threads": threads,
            "config": config,
        },
    )


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return raw


class _Violations:
    """Collects config violations so one run reports all of them."""

    def __init__(self) -> None:
        self.messages: list[str] = []

    def add(self, message: str) -> None:
        self.messages.append(message)

    def grab(self, builder, field: str):
        """Run a builder, converting its ParameterError into a violation."""
        try:
            return builder()
        except ParameterError as exc:
            self.add(f"{field}: {exc}")
            return None

    def raise_if_any(self) -> None:
        if self.messages:
            raise ParameterError(
                "invalid configuration:\n  - " + "\n  - ".join(self.messages)
            )


def _get_int(raw: dict, key: str, bad: _Violations, default=None, minimum=None):
    if key not in raw:
        if default is not None:
            return default
        bad.add(f"{key}: missing required integer")
        return None
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        bad.add(f"{key}: must be an integer, got {value!r}")
        return None
    if minimum is not None and value < minimum:
        bad.add(f"{key}: must be at least {minimum}, got {value}")
        return None
    return value


def _get_dims(entry, bad: _Violations, field: str):
    if isinstance(entry, dict):
        keys = {"p", "n", "T"}
        if set(entry) != keys:
            bad.add(f"{field}: needs exactly the keys p, n, T, got {sorted(entry)}")
            return None
        return bad.grab(lambda: ModelDims(entry["p"], entry["n"], entry["T"]), field)
    if isinstance(entry, (list, tuple)) and len(entry) == 3:
        return bad.grab(lambda: ModelDims(*entry), field)
    bad.add(f"{field}: must be [p, n, T] or an object with keys p, n, T")
    return None


def _get_dist(raw: dict, bad: _Violations):
    name = raw.get("distribution", "gaussian")
    if not isinstance(name, str):
        bad.add(f"distribution: must be a string, got {name!r}")
        return None
    return bad.grab(lambda: EntryDistribution(name), "distribution")


def _parse_clt_config(raw: dict, seed_override):
    bad = _Violations()
    dims = None
    if "dims" not in raw:
        bad.add("dims: missing required object with keys p, n, T")
    else:
        dims = _get_dims(raw["dims"], bad, "dims")

    spec = None
    spikes_raw = raw.get("spikes")
    if not isinstance(spikes_raw, list) or not spikes_raw:
        bad.add("spikes: must be a nonempty list of [value, multiplicity] pairs")
    else:
        basis = raw.get("basis")
        if basis is not None and not isinstance(basis, list):
            bad.add("basis: must be null or a nested list of rows")
            basis = None
        spec = bad.grab(
            lambda: SpikeSpec(
                spikes=tuple(tuple(entry) for entry in spikes_raw),
                basis=None if basis is None else np.asarray(basis, dtype=float),
            ),
            "spikes/basis",
        )

    dist = _get_dist(raw, bad)
    # Summaries and KDEs need spread, so a study is at least 2 replicates.
    replicates = _get_int(raw, "replicates", bad, minimum=2)
    seed = seed_override if seed_override is not None else _get_int(raw, "seed", bad, minimum=0)
    kde_points = _get_int(raw, "kde_points", bad, default=101, minimum=2)
    outputs = raw.get("outputs", ["summary", "kde"])
    if not (isinstance(outputs, list) and all(isinstance(o, str) for o in outputs)):
        bad.add(f"outputs: must be a list of strings, got {outputs!r}")
        outputs = ["summary", "kde"]

    known = {
        "dims", "spikes", "basis", "distribution", "replicates", "seed",
        "kde_points", "outputs",
    }
    for key in sorted(set(raw) - known):
        bad.add(f"{key}: unknown key")

    config = None
    if not bad.messages:
        config = bad.grab(
            lambda: ExperimentConfig(
                ladder=(dims,),
                target=spec,
                dist=dist,
                replicates=replicates,
                master_seed=seed,
                outputs=tuple(outputs),
            ),
            "config",
        )
    bad.raise_if_any()
    return config, kde_points


_MODEL_KINDS = ("block-noise", "equicorrelated", "null", "custom")


def _parse_detect_config(raw: dict, seed_override, dn_override):
    bad = _Violations()
    ladder_raw = raw.get("ladder")
    ladder = []
    if not isinstance(ladder_raw, list) or not ladder_raw:
        bad.add("ladder: must be a nonempty list of [p, n, T] entries")
    else:
        for pos, entry in enumerate(ladder_raw):
            dims = _get_dims(entry, bad, f"ladder[{pos}]")
            if dims is not None:
                ladder.append(dims)

    model_raw = raw.get("model")
    builder = None
    if not isinstance(model_raw, dict) or "kind" not in model_raw:
        bad.add('model: must be an object with a "kind" key')
    else:
        kind = model_raw["kind"]
        extra = set(model_raw) - {"kind", "rho", "mixing", "noise_cov"}
        for key in sorted(extra):
            bad.add(f"model.{key}: unknown key")
        if kind == "block-noise":
            builder = block_noise_model
        elif kind == "equicorrelated":
            rho = model_raw.get("rho", 0.1)
            if not isinstance(rho, (int, float)) or isinstance(rho, bool):
                bad.add(f"model.rho: must be a number, got {rho!r}")
            else:
                builder = lambda dims, _rho=float(rho): equicorrelated_model(dims, _rho)
        elif kind == "null":
            builder = null_model
        elif kind == "custom":
            mixing = model_raw.get("mixing")
            noise = model_raw.get("noise_cov")
            if not isinstance(mixing, list) or not isinstance(noise, list):
                bad.add("model: custom kind needs nested-list mixing and noise_cov")
            elif len(ladder_raw or []) != 1:
                bad.add("model: a custom model pins p, so the ladder must have one entry")
            else:
                builder = lambda dims, _m=mixing, _n=noise: SignalModel(
                    mixing=np.asarray(_m, dtype=float),
                    noise_cov=np.asarray(_n, dtype=float),
                    dims=dims,
                )
        else:
            bad.add(f"model.kind: unknown kind {kind!r}; choose from {_MODEL_KINDS}")

    dist = _get_dist(raw, bad)
    replicates = _get_int(raw, "replicates", bad, minimum=1)
    seed = seed_override if seed_override is not None else _get_int(raw, "seed", bad, minimum=0)

    shift = dn_override if dn_override is not None else raw.get("dn_override")
    detector = None
    if shift is not None and (isinstance(shift, bool) or not isinstance(shift, (int, float))):
        bad.add(f"dn_override: must be null or a positive number, got {shift!r}")
    else:
        detector = bad.grab(
            lambda: DetectorConfig(shift=None if shift is None else float(shift)),
            "dn_override",
        )

    known = {"ladder", "model", "distribution", "replicates", "seed", "dn_override"}
    for key in sorted(set(raw) - known):
        bad.add(f"{key}: unknown key")

    config = None
    if not bad.messages:
        config = bad.grab(
            lambda: ExperimentConfig(
                ladder=tuple(ladder),
                target=builder,
                dist=dist,
                replicates=replicates,
                master_seed=seed,
                detector=detector,
                outputs=("summary",),
            ),
            "config",
        )
    bad.raise_if_any()
    return config


def cmd_law(args) -> int:
    params = FisherParams(c=args.c, y=args.y)
    edges = support_edges(params)
    if args.points < 0:
        raise ParameterError(f"--points must be nonnegative, got {args.points}")
    x_min = edges.lower if args.x_min is None else args.x_min
    x_max = edges.upper if args.x_max is None else args.x_max
    if args.points > 1 and not x_min < x_max:
        raise ParameterError(f"need --x-min < --x-max, got [{x_min}, {x_max}]")

    out = _out_dir(args)
    grid = np.linspace(x_min, x_max, args.points)
    _write_csv(out / "law.csv", ["x", "density"], zip(grid, density(params, grid)))
    low, high = critical_interval(params)
    _write_json(
        out / "summary.json",
        {
            "b1": edges.lower,
            "b": edges.upper,
            "mass_at_zero": mass_at_zero(params),
            "critical_low": low,
            "critical_high": high,
        },
    )
    _write_manifest(
        out,
        "law",
        {
            "c": args.c,
            "y": args.y,
            "points": args.points,
            "x_min": x_min,
            "x_max": x_max,
        },
        seed=None,
        threads=None,
    )
    print(f"wrote law.csv, summary.json, manifest.json to {out}")
    return 0


def _kde_grid(values: np.ndarray, points: int) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    pad = 0.05 * (hi - lo)
    return np.linspace(lo - pad, hi + pad, points)


def _clt_summary_entry(result, index: int) -> dict:
    spike_value, mult = result.spec.spikes[index]
    consts = result.constants[index]
    emp = result.empirical[index]
    lim = result.limit[index]
    params = result.dims.fisher_params()
    v4 = result.dist.fourth_moment
    members = []
    for j in range(mult):
        stats = summarize(emp[:, j])
        lim_stats = summarize(lim[:, j])
        member = {
            "mean": stats.mean,
            "variance": stats.variance,
            "limit_mean": lim_stats.mean,
            "limit_variance": lim_stats.variance,
        }
        if mult == 1:
            direction = result.spec.block_columns(index)[:, 0]
            ref_var = projection_variance(params, spike_value, direction, v4)
            member["reference_variance"] = ref_var
            member["ks_vs_reference"] = summarize(emp[:, j], 0.0, ref_var).ks_distance
        members.append(member)
    return {
        "value": spike_value,
        "multiplicity": mult,
        "outlier": consts.lam,
        "delta": consts.delta,
        "theta": consts.theta,
        "omega": consts.omega,
        "sigma_sq": consts.sigma_sq,
        "members": members,
    }


def cmd_simulate_clt(args) -> int:
    raw = _load_config(args.config)
    config, kde_points = _parse_clt_config(raw, args.seed)
    result = run_clt_study(config, threads=args.threads)
    out = _out_dir(args)

    spikes = result.spec.spikes
    header = ["replicate"]
    for i, (_, mult) in enumerate(spikes):
        header += [f"stat_{i + 1}_{j + 1}" for j in range(mult)]
    for i, (_, mult) in enumerate(spikes):
        header += [f"limit_{i + 1}_{j + 1}" for j in range(mult)]
    rows = []
    for rep in range(config.replicates):
        row = [rep]
        for i in range(len(spikes)):
            row.extend(result.empirical[i][rep])
        for i in range(len(spikes)):
            row.extend(result.limit[i][rep])
        rows.append(row)
    _write_csv(out / "replicates.csv", header, rows)
    written = ["replicates.csv"]

    if "kde" in config.outputs:
        for i, (_, mult) in enumerate(spikes):
            emp = result.empirical[i]
            lim = result.limit[i]
            if mult == 1:
                grid = _kde_grid(np.concatenate([emp[:, 0], lim[:, 0]]), kde_points)
                name = f"kde_spike{i + 1}.csv"
                _write_csv(
                    out / name,
                    ["value", "empirical_density", "limit_density"],
                    zip(grid, kde_1d(emp[:, 0], grid), kde_1d(lim[:, 0], grid)),
                )
                written.append(name)
            elif mult == 2:
                grid_x = _kde_grid(np.concatenate([emp[:, 0], lim[:, 0]]), kde_points)
                grid_y = _kde_grid(np.concatenate([emp[:, 1], lim[:, 1]]), kde_points)
                emp_surface = kde_2d(emp, grid_x, grid_y)
                lim_surface = kde_2d(lim, grid_x, grid_y)
                name = f"kde2d_spike{i + 1}.csv"
                _write_csv(
                    out / name,
                    ["x1", "x2", "empirical_density", "limit_density"],
                    (
                        (gx, gy, emp_surface[ix, iy], lim_surface[ix, iy])
                        for ix, gx in enumerate(grid_x)
                        for iy, gy in enumerate(grid_y)
                    ),
                )
                written.append(name)
            # Packets of multiplicity > 2 are summarized but not gridded.

    if "summary" in config.outputs:
        summary = {
            "dims": {"p": result.dims.p, "n": result.dims.n, "T": result.dims.T},
            "distribution": result.dist.name,
            "replicates": config.replicates,
            "spikes": [_clt_summary_entry(result, i) for i in range(len(spikes))],
        }
        _write_json(out / "summary.json", summary)
        written.append("summary.json")

    _write_manifest(
        out,
        "simulate-clt",
        {**raw, "seed": config.master_seed},
        seed=config.master_seed,
        threads=args.threads,
    )
    written.append("manifest.json")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


def cmd_detect_study(args) -> int:
    raw = _load_config(args.config)
    config = _parse_detect_config(raw, args.seed, args.dn_override)
    table = run_detection_study(config, threads=args.threads)
    out = _out_dir(args)
    rows = [
        [label, *table.frequencies[r]]
        for r, label in enumerate(table.row_labels)
    ]
    _write_csv(out / "frequency.csv", ["count", *table.column_labels], rows)
    _write_manifest(
        out,
        "detect-study",
        {**raw, "seed": config.master_seed},
        seed=config.master_seed,
        threads=args.threads,
    )
    print(f"wrote frequency.csv, manifest.json to {out}")
    return 0


def _load_matrix(path: str) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    try:
        if suffix == ".npy":
            arr = np.load(path)
        elif suffix in (".csv", ".txt"):
            arr = np.loadtxt(path, delimiter=",", ndmin=2)
        else:
            raise ParameterError(
                f"unsupported records format {suffix!r} for {path}; use .npy or .csv"
            )
    except OSError as exc:
        raise ParameterError(f"cannot read records file {path}: {exc}") from exc
    except ValueError as exc:
        raise ParameterError(f"cannot parse records file {path}: {exc}") from exc
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ParameterError(f"records file {path} must hold a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"records file {path} contains non-finite values")
    return arr


def cmd_detect(args) -> int:
    x = _load_matrix(args.signal)
    z = _load_matrix(args.noise)
    config = DetectorConfig(shift=args.dn_override)
    vals, params = records_spectrum(x, z, center=args.center)
    k_hat = estimate_count(vals, params, config)
    edges = support_edges(params)
    offset = config.offset(vals.size)
    result = {
        "k_hat": k_hat,
        "b": edges.upper,
        "d_n": offset,
        "threshold": edges.upper + offset,
        "p": x.shape[0],
        "T": x.shape[1],
        "n": z.shape[1],
        "top_eigenvalues": [float(v) for v in vals[: args.top]],
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    if args.out_dir is not None:
        out = _out_dir(args)
        _write_json(out / "result.json", result)
        _write_manifest(
            out,
            "detect",
            {
                "signal": args.signal,
                "noise": args.noise,
                "dn_override": args.dn_override,
                "center": args.center,
                "top": args.top,
            },
            seed=None,
            threads=None,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikedfisher",
        description="Spiked Fisher matrices: limiting law, fluctuation studies, signal counting.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_law = sub.add_parser("law", help="tabulate the limiting density and support")
    p_law.add_argument("c", type=float, help="dimension-to-signal-sample ratio p/T")
    p_law.add_argument("y", type=float, help="dimension-to-noise-sample ratio p/n")
    p_law.add_argument("--points", type=int, default=512, help="grid size (0 for header-only CSV)")
    p_law.add_argument("--x-min", type=float, default=None, help="grid start (default: lower edge)")
    p_law.add_argument("--x-max", type=float, default=None, help="grid end (default: upper edge)")
    p_law.add_argument("--out-dir", default=".", help="output directory")
    p_law.set_defaults(func=cmd_law)

    p_clt = sub.add_parser("simulate-clt", help="Monte Carlo fluctuation study")
    p_clt.add_argument("--config", required=True, help="JSON study configuration")
    p_clt.add_argument("--out-dir", default=".", help="output directory")
    p_clt.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_clt.add_argument("--threads", type=int, default=1, help="worker threads (results identical)")
    p_clt.set_defaults(func=cmd_simulate_clt)

    p_study = sub.add_parser("detect-study", help="signal-counter frequencies along a ladder")
    p_study.add_argument("--config", required=True, help="JSON study configuration")
    p_study.add_argument("--out-dir", default=".", help="output directory")
    p_study.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_study.add_argument(
        "--dn-override", type=float, default=None, help="fixed threshold offset replacing the d_n rule"
    )
    p_study.add_argument("--threads", type=int, default=1, help="worker threads (results identical)")
    p_study.set_defaults(func=cmd_detect_study)

    p_det = sub.add_parser("detect", help="count signals in record files")
    p_det.add_argument("--signal", required=True, help="signal-bearing records, p x T (.npy or .csv)")
    p_det.add_argument("--noise", required=True, help="noise-only records, p x n (.npy or .csv)")
    p_det.add_argument(
        "--dn-override", type=float, default=None, help="fixed threshold offset replacing the d_n rule"
    )
    p_det.add_argument("--center", action="store_true", help="subtract row means first")
    p_det.add_argument("--top", type=int, default=10, help="eigenvalues to report")
    p_det.add_argument("--out-dir", default=None, help="also write result.json and manifest.json")
    p_det.set_defaults(func=cmd_detect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
