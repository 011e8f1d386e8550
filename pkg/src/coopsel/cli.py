"""Command-line front end.

Subcommands
-----------
simulate   run a lifetime experiment preset and write CSV + manifest
fit-model  calibrate a bivariate model from a ``D,K,L`` CSV
pair       pair the nodes of one instance with each algorithm
sample     draw ``D,K,L`` rows from a model file

Exit codes: 0 success, 1 I/O error (or failed ``--verify``), 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import pairing as pr
from .channel import DistanceUnit, Scenario, SingularRegressionError, fit_bivariate_model, sample_links
from .config import (
    EXPERIMENT_KEYS,
    ConfigError,
    dump_model,
    dump_sections,
    format_value,
    i2i_from_sections,
    i2o_from_sections,
    load_model,
    model_to_section,
    radio_from_section,
    read_config,
)
from .energy import RadioConfig
from .montecarlo import ExperimentSpec, estimation_error_pdf, ks_distance, run_experiment
from .quality import coding_gain_db

log = logging.getLogger("coopsel")

PRESETS = ("fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "custom")
RESULT_COLUMNS = (
    "experiment",
    "N",
    "algorithm",
    "estimator",
    "sweep",
    "sweep_value",
    "mean_emax",
    "stderr",
    "gain",
    "gain_stderr",
    "n_topologies",
    "seed",
)
PDF_COLUMNS = ("experiment", "model_nodes", "K", "bin_lo", "bin_hi", "pdf", "pl_error", "ks_vs_perfect", "n_errors")
PAIR_COLUMNS = ("algorithm", "pairs", "singles", "e_max", "e_max_db")
SAMPLE_COLUMNS = ("D", "K", "L")
CUSTOM_REQUIRED = ("n_nodes", "algorithms", "reference")

ODD_N = tuple(range(3, 56, 2))
OPTIMAL_MAX_N = 11  # the min-max solver is exact but slow beyond this in presets

EPILOG = f"""
CSV schemas (column order is fixed):
  simulate  : {",".join(RESULT_COLUMNS)}
  simulate fig9 : {",".join(PDF_COLUMNS)}
  fit-model : input {",".join(SAMPLE_COLUMNS)} (header required)
  pair      : input i,j,K,L with nodes 1..N and j = 0 for the AP;
              output {",".join(PAIR_COLUMNS)}
  sample    : {",".join(SAMPLE_COLUMNS)}
Config keys ([section] key = value):
  [experiment] {", ".join(EXPERIMENT_KEYS)}
  [radio] {", ".join(f.name for f in dataclasses.fields(RadioConfig))}
  [i2i] / [i2o_indoor] / [i2o_outdoor] / [model] scenario, muK_intercept, alphaK,
      muL_intercept, alphaL, sigmaK, sigmaL, phi, distance_unit, linear_in_D
  [i2o] wall_loss, outdoor_mode
"""


class UsageError(Exception):
    pass


# --------------------------------------------------------------------- presets


def _run(sweep, value, **fields):
    return sweep, value, fields


def preset_runs(preset: str) -> list[tuple[str, object, dict]]:
    """``(sweep name, sweep value, ExperimentSpec fields)`` for each run."""
    if preset == "fig5":
        base = ("none", "random", "wlf-pl", "wlf-cg")
        runs = []
        for tau in (30.0, 40.0):
            small = tuple(n for n in ODD_N if n <= OPTIMAL_MAX_N)
            large = tuple(n for n in ODD_N if n > OPTIMAL_MAX_N)
            runs.append(_run("tau", tau, n_nodes=small, algorithms=base + ("optimal",), reference="none", tau=tau))
            runs.append(_run("tau", tau, n_nodes=large, algorithms=base, reference="none", tau=tau))
        return runs
    if preset == "fig6":
        algs = ("none", "wlf-pl", "wlf-cg:exact", "wlf-cg:map", "wlf-cg:mmse")
        return [_run("", "", n_nodes=ODD_N, algorithms=algs, reference="none")]
    if preset == "fig7":
        algs = ("wlf-pl", "wlf-cg:exact", "wlf-cg:map", "wlf-cg:mmse")
        phis = [round(-1.0 + 0.1 * k, 1) for k in range(11)]
        return [_run("phi_override", p, n_nodes=(10,), algorithms=algs, reference="wlf-pl", phi_override=p) for p in phis]
    if preset == "fig8":
        algs = ("wlf-pl", "wlf-cg:exact", "wlf-cg:direct")
        return [
            _run("k_noise_db", float(s), n_nodes=(10, 31), algorithms=algs, reference="wlf-pl", k_noise_db=float(s))
            for s in range(0, 11)
        ]
    if preset == "fig9":
        return [_run("n_model_nodes", n1, n_nodes=(10,), n_model_nodes=n1, algorithms=("wlf-pl",), reference="wlf-pl") for n1 in (0, 7)]
    if preset == "fig10":
        algs = ("wlf-pl", "wlf-cg:map", "wlf-cg:mmse")
        return [
            _run("n_model_nodes", n1, n_nodes=(5, 7, 9), algorithms=algs, reference="wlf-pl", n_model_nodes=n1)
            for n1 in (0, 3, 5, 7, 9, 11, 13, 15)
        ]
    if preset == "custom":
        return [_run("", "", )]
    raise UsageError(f"unknown preset {preset!r}")


FIG9_K = (0.0, 5.0, 10.0, 15.0)


def _parse_experiment(sect: dict[str, str]) -> dict:
    out: dict = {}
    for key, raw in sect.items():
        raw = raw.strip()
        try:
            if key in ("n_nodes",):
                out[key] = tuple(int(v) for v in raw.split(",") if v.strip())
            elif key == "algorithms":
                out[key] = tuple(v.strip() for v in raw.split(",") if v.strip())
            elif key in ("n_topologies", "n_model_nodes", "base_seed"):
                out[key] = int(raw)
            elif key in ("tau", "ap_offset"):
                out[key] = float(raw)
            elif key in ("phi_override", "k_noise_db"):
                out[key] = None if raw.lower() in ("", "none") else float(raw)
            elif key == "indoor_rect":
                w, h = (float(v) for v in raw.split(","))
                out[key] = (w, h)
            else:
                out[key] = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for experiment.{key}: {raw!r}", key=f"experiment.{key}") from exc
    return out


def _flag_fields(args) -> dict:
    flags: dict = {}
    if args.seed is not None:
        flags["base_seed"] = args.seed
    if args.topologies is not None:
        flags["n_topologies"] = args.topologies
    if args.estimator is not None:
        flags["estimator"] = args.estimator
    if args.tau is not None:
        flags["tau"] = args.tau
    if args.algorithm is not None:
        flags["algorithms"] = tuple(a.strip() for a in args.algorithm.split(",") if a.strip())
    return flags


def build_specs(preset: str, cfg: dict, args) -> list[tuple[str, object, ExperimentSpec]]:
    exp = _parse_experiment(cfg.get("experiment", {}))
    if preset == "custom":
        missing = [k for k in CUSTOM_REQUIRED if k not in exp]
        if missing:
            raise ConfigError("custom preset is missing keys: " + ", ".join(f"experiment.{k}" for k in missing), key=f"experiment.{missing[0]}")
    common = dict(
        radio=radio_from_section(cfg.get("radio", {})),
        i2i=i2i_from_sections(cfg),
        i2o=i2o_from_sections(cfg),
        name=preset,
    )
    flags = _flag_fields(args)

    specs, seen = [], set()
    for sweep, value, fields in preset_runs(preset):
        merged = {**common, **fields, **exp, **flags}
        if sweep and (sweep in exp or sweep in flags):
            value = merged[sweep]
        if "algorithms" in flags or "algorithms" in exp:
            if merged["reference"] not in merged["algorithms"]:
                merged["algorithms"] = (merged["reference"],) + tuple(merged["algorithms"])
        try:
            spec = ExperimentSpec(**merged)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        key = (sweep, value, spec)
        if key not in seen:
            seen.add(key)
            specs.append((sweep, value, spec))
    return specs


# ------------------------------------------------------------------- simulate


def _spec_sections(spec: ExperimentSpec) -> dict:
    exp = {k: format_value(getattr(spec, k)) for k in EXPERIMENT_KEYS}
    exp = {k: ("none" if v == "None" else v) for k, v in exp.items()}
    return {
        "experiment": exp,
        "radio": {f.name: format_value(getattr(spec.radio, f.name)) for f in dataclasses.fields(RadioConfig)},
        "i2i": model_to_section(spec.i2i),
        "i2o_indoor": model_to_section(spec.i2o.indoor),
        "i2o_outdoor": model_to_section(spec.i2o.outdoor),
        "i2o": {"wall_loss": format_value(spec.i2o.wall_loss), "outdoor_mode": spec.i2o.outdoor_mode.value},
    }


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def _write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def _simulate_lifetime(specs, workers) -> list[tuple]:
    rows = []
    for sweep, value, spec in specs:
        for res in run_experiment(spec, workers=workers, progress=True):
            for k, alg in enumerate(res.algorithms):
                base, _, est = alg.partition(":")
                if base == "wlf-cg" and not est:
                    est = spec.estimator
                rows.append(
                    (
                        spec.name,
                        res.n_nodes,
                        base,
                        est or "",
                        sweep,
                        value,
                        float(res.mean_emax[k]),
                        float(res.stderr[k]),
                        float(res.gain[k]),
                        float(res.gain_stderr[k]),
                        res.n_topologies,
                        spec.base_seed,
                    )
                )
    return rows


def _simulate_pdf(specs) -> list[tuple]:
    per_n1 = {}
    for _, value, spec in specs:
        per_n1[spec.n_model_nodes] = (spec, estimation_error_pdf(spec, FIG9_K))
    perfect = per_n1.get(0, (None, None))[1]
    rows = []
    for n1, (spec, result) in per_n1.items():
        for k, r in result.items():
            ks = ks_distance(r["errors"], perfect[k]["errors"]) if perfect is not None else float("nan")
            for b in range(len(r["pdf"])):
                rows.append(
                    (spec.name, n1, k, float(r["edges"][b]), float(r["edges"][b + 1]), float(r["pdf"][b]), r["pl_error"], ks, len(r["errors"]))
                )
    return rows


def cmd_simulate(args) -> int:
    cfg: dict = {}
    if args.config:
        cfg = read_config(args.config)
    preset = args.preset or cfg.get("run", {}).get("preset", "").strip() or None
    if preset is None:
        raise UsageError("--preset is required (or a [run] preset key in --config)")
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    specs = build_specs(preset, cfg, args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if preset == "fig9":
        name = "error_pdf.csv"
        _write_csv(out_dir / name, PDF_COLUMNS, _simulate_pdf(specs))
    else:
        name = "results.csv"
        _write_csv(out_dir / name, RESULT_COLUMNS, _simulate_lifetime(specs, args.workers))
    finished = datetime.now(timezone.utc).isoformat(timespec="seconds")

    # keys the preset sweeps are left to the preset unless the user pinned them
    user_keys = set(_parse_experiment(cfg.get("experiment", {}))) | set(_flag_fields(args))
    owned = {k for _, _, f in preset_runs(preset) for k in f} - user_keys
    experiment = {k: v for k, v in _spec_sections(specs[0][2]).items()}
    experiment["experiment"] = {k: v for k, v in experiment["experiment"].items() if k not in owned and k != "name"}
    sections = {
        "run": {
            "preset": preset,
            "version": __version__,
            "workers": str(args.workers),
            "started": started,
            "finished": finished,
            "outputs": name,
        },
        **experiment,
    }
    (out_dir / "manifest.txt").write_text(dump_sections(sections))
    print(f"wrote {out_dir / name} and {out_dir / 'manifest.txt'}")
    return 0


# ------------------------------------------------------------------ fit-model


def _read_samples(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(SAMPLE_COLUMNS):
            raise UsageError(f"{path}: line 1: expected header D,K,L")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != 3:
                raise UsageError(f"{path}: line {line}: expected 3 fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise UsageError(f"{path}: line {line}: non-numeric value in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise UsageError(f"{path}: line {line}: non-finite value")
            rows.append(vals)
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def cmd_fit_model(args) -> int:
    D, K, L = _read_samples(Path(args.samples))
    try:
        model = fit_bivariate_model(None, Scenario(args.scenario), D=D, K=K, L=L)
    except SingularRegressionError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = dump_model(model)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(
        f"fitted {len(D)} samples: sigmaK={model.sigmaK:.4g} dB sigmaL={model.sigmaL:.4g} dB phi={model.phi:.4g}",
        file=sys.stderr,
    )
    return 0


# ----------------------------------------------------------------------- pair


def _read_instance(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["i", "j", "K", "L"]:
            raise UsageError(f"{path}: line 1: expected header i,j,K,L")
        links = {}
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            try:
                i, j = int(row[0]), int(row[1])
                k = -math.inf if row[2].strip() == "" else float(row[2])
                l_db = float(row[3])
            except (ValueError, IndexError):
                raise UsageError(f"{path}: line {line}: malformed row {row!r}") from None
            if i < 1 or j < 0 or i == j:
                raise UsageError(f"{path}: line {line}: bad node ids {i},{j}")
            key = (i, j) if j == 0 else (min(i, j), max(i, j))
            if key in links and links[key] != (k, l_db):
                raise UsageError(f"{path}: line {line}: asymmetric internode entry for {key[0]}-{key[1]}")
            links[key] = (k, l_db)
    n = max([max(i, j) for i, j in links] + [0])
    if n < 1:
        raise UsageError(f"{path}: no links")
    kk = np.full((n, n + 1), np.nan)
    ll = np.full((n, n + 1), np.nan)
    for (i, j), (k, l_db) in links.items():
        col = 0 if j == 0 else j
        kk[i - 1, col], ll[i - 1, col] = k, l_db
        if j:
            kk[j - 1, i], ll[j - 1, i] = k, l_db
    for i in range(n):
        kk[i, i + 1] = ll[i, i + 1] = 0.0
    if np.isnan(ll).any():
        r, c = np.argwhere(np.isnan(ll))[0]
        raise UsageError(f"{path}: missing link {r + 1}-{c}")
    return kk, ll


def _fmt_pairs(ps: pr.PairingSet) -> str:
    return ";".join(f"{i + 1}-{j + 1}" for i, j in sorted(ps.pairs))


def _fmt_singles(ps: pr.PairingSet) -> str:
    return ";".join(str(i + 1) for i in sorted(ps.singles))


def cmd_pair(args) -> int:
    kk, ll = _read_instance(Path(args.instance))
    n = kk.shape[0]
    c = coding_gain_db(K=kk, L=ll)
    exact = pr.QualityMatrix(c[:, 0], c[:, 1:])
    pl = pr.QualityMatrix(-ll[:, 0], -ll[:, 1:], "pl")
    cfg = radio_from_section({})
    if args.config:
        cfg = radio_from_section(read_config(args.config).get("radio", {}))
    graph = pr.build_weight_graph(exact, cfg)
    tau = 30.0 if args.tau is None else args.tau
    names = ("none", "optimal", "wlf-cg", "wlf-pl", "random") if args.algorithm in (None, "all") else tuple(args.algorithm.split(","))
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    rows = []
    for name in names:
        if name == "none":
            ps = pr.no_cooperation(n)
        elif name == "optimal":
            ps = pr.optimal_pairing(graph)
        elif name == "wlf-cg":
            ps = pr.wlf_pairing(exact, tau)
        elif name == "wlf-pl":
            ps = pr.wlf_pairing(pl, -math.inf)
        elif name == "random":
            ps = pr.random_pairing(n, rng)
        else:
            raise UsageError(f"unknown algorithm {name!r}")
        edb = pr.e_max_db(ps, graph)
        rows.append((name, _fmt_pairs(ps), _fmt_singles(ps), 10.0 ** (edb / 10.0), edb))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAIR_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    sys.stdout.write(buf.getvalue())
    if args.verify:
        if args.verify != "brute":
            raise UsageError(f"unknown verifier {args.verify!r}")
        if n > 12:
            raise UsageError("brute-force verification is limited to N <= 12")
        _, best = pr.brute_force_pairing(graph)
        status = 0
        for name, *_, edb in rows:
            if name == "optimal":
                ok = edb == best
            else:
                ok = edb >= best
            print(f"verify {name}: {'pass' if ok else 'FAIL'} (E_max_db={edb!r}, brute={best!r})")
            status |= not ok
        return 1 if status else 0
    return 0


# --------------------------------------------------------------------- sample

DEFAULT_RANGES = {
    Scenario.I2I: (1.0, 100.0),
    Scenario.I2O_OUTDOOR: (0.01, 1.0),
    Scenario.I2O_INDOOR: (0.0, 25.0),
}


def cmd_sample(args) -> int:
    if args.n <= 0:
        raise UsageError("n must be positive")
    model = load_model(args.model)
    lo, hi = DEFAULT_RANGES[model.scenario]
    lo = args.dmin if args.dmin is not None else lo
    hi = args.dmax if args.dmax is not None else hi
    if not (lo <= hi) or (not model.linear_in_D and lo <= 0):
        raise UsageError("need dmin <= dmax and dmin > 0 for log-distance models")
    rng = np.random.default_rng(args.seed)
    # log-distance models get a log-uniform design so slopes are well identified
    D = rng.uniform(lo, hi, args.n) if model.linear_in_D else 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), args.n)
    K, L = sample_links(model, D, rng)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for row in zip(D, K, L):
        w.writerow([repr(float(v)) for v in row])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# ----------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coopsel",
        description="Partner selection for cooperative uplinks in Rician indoor networks.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a lifetime experiment", epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--preset", choices=PRESETS)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--topologies", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir", default="results")
    s.add_argument("--algorithm", help="comma list, e.g. wlf-pl,wlf-cg:map")
    s.add_argument("--estimator", choices=("exact", "direct", "map", "mmse", "pl"))
    s.add_argument("--tau", type=float)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit-model", help="fit a bivariate model to D,K,L samples")
    f.add_argument("samples")
    f.add_argument("--scenario", default="I2I", choices=[sc.value for sc in Scenario])
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit_model)

    q = sub.add_parser("pair", help="pair one instance")
    q.add_argument("instance")
    q.add_argument("--algorithm", help="all (default) or comma list of none,optimal,wlf-cg,wlf-pl,random")
    q.add_argument("--tau", type=float)
    q.add_argument("--seed", type=int)
    q.add_argument("--config", help="config with a [radio] section")
    q.add_argument("--verify", choices=("brute",))
    q.set_defaults(func=cmd_pair)

    m = sub.add_parser("sample", help="draw D,K,L rows from a model file")
    m.add_argument("model")
    m.add_argument("-n", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--dmin", type=float)
    m.add_argument("--dmax", type=float)
    m.add_argument("--out")
    m.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
