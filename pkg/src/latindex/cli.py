"""Batch front end: ``latindex CONFIG [--out DIR] [--set key=value ...]``.

The config is a flat ``key = value`` text file; ``#`` starts a comment.
Exit status: 0 if every check of the pipeline passes, 1 if a check fails,
2 on a configuration error.  ``LATINDEX_THREADS`` caps BLAS/LAPACK threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .clifford import build_gamma_rep
from .continuum import continuum_index
from .errors import ConfigError, LatIndexError
from .gauge import ConnectionDescriptor, FourierTerm, discretize, make_generalized_link, \
    plaquette_charge, read_link_table
from .overlap import build_overlap, gw_residual, overlap_index
from .spectral import MassGrid, eta, spectral_flow, wilson_index
from .latops import WilsonFamily

SCHEMA_VERSION = 1
PIPELINES = ("spectrum", "flow", "index", "overlap", "verify", "interp")
CSV_SCHEMA = {
    "spectrum.csv": ["index", "lambda"],
    "flow.csv": ["m", "index", "lambda"],
    "verify.csv": ["charge", "N", "wilson", "overlap", "sf", "continuum", "pass"],
    "staple.csv": ["m", "t", "min_abs_eig"],
}


def _ints(v):
    return [int(s) for s in str(v).replace(",", " ").split()]


def _floats(v):
    return [float(s) for s in str(v).replace(",", " ").split()]


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# key -> (parser, default)
KEYS = {
    "pipeline": (str, None),
    "kind": (str, "trivial"),
    "charge": (int, 0),
    "charges": (_ints, [-2, -1, 0, 1, 2]),
    "perturbation": (str, ""),
    "table": (str, ""),
    "n": (int, 2),
    "nc": (int, 1),
    "N": (_ints, [12]),
    "K": (int, 8),
    "M": (float, 1.0),
    "m": (float, -1.0),
    "points": (int, 65),
    "max_depth": (int, 12),
    "zero_tol": (float, 1e-10),
    "gw_tol": (float, 1e-9),
    "gap_tol": (float, 0.05),
    "interp_N": (_ints, [4, 8, 16]),
    "trials": (int, 10),
    "staple": (_bool, False),
    "staple_N": (int, 16),
    "staple_K": (int, 32),
    "seed": (int, 0),
    "out": (str, "latindex-out"),
}


def parse_config_text(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    return raw


def resolve_config(raw: dict) -> dict:
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (conv, default) in KEYS.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    if cfg["pipeline"] not in PIPELINES:
        raise ConfigError(f"pipeline must be one of {', '.join(PIPELINES)}")
    if cfg["kind"] not in ("trivial", "u1_flux", "u1_flux_plus_smooth", "external"):
        raise ConfigError(f"unknown kind {cfg['kind']!r}")
    if cfg["kind"] == "external" and not cfg["table"]:
        raise ConfigError("kind = external needs table = <path>")
    if not cfg["N"]:
        raise ConfigError("N must list at least one lattice size")
    return cfg


def _perturbation(spec: str):
    """``dir:k1,k2:amplitude[:phase]`` terms separated by ``;``."""
    terms = []
    for part in filter(None, (s.strip() for s in spec.split(";"))):
        fields = part.split(":")
        if len(fields) not in (3, 4):
            raise ConfigError(f"bad perturbation term {part!r}")
        try:
            terms.append(FourierTerm(int(fields[0]), tuple(_ints(fields[1])), float(fields[2]),
                                     float(fields[3]) if len(fields) == 4 else 0.0))
        except ValueError as exc:
            raise ConfigError(f"bad perturbation term {part!r}: {exc}") from None
    return terms


def descriptor(cfg: dict, charge: int | None = None) -> ConnectionDescriptor:
    q = cfg["charge"] if charge is None else charge
    try:
        kind = cfg["kind"]
        if kind == "trivial":
            return ConnectionDescriptor.trivial(cfg["n"], cfg["nc"])
        if kind == "u1_flux":
            return ConnectionDescriptor.u1_flux(q)
        if kind == "u1_flux_plus_smooth":
            return ConnectionDescriptor.u1_flux_plus_smooth(q, _perturbation(cfg["perturbation"]))
        return ConnectionDescriptor.external(read_link_table(cfg["table"]))
    except (OSError, LatIndexError) as exc:
        raise ConfigError(str(exc)) from None


def _field(cfg, N, charge=None):
    desc = descriptor(cfg, charge)
    return desc, discretize(make_generalized_link(desc), N)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ------------------------------------------------------------------ pipelines
# Each returns (summary dict, list of (check name, passed), artifact names).


def run_spectrum(cfg, out):
    rep = build_gamma_rep(cfg["n"])
    summary, checks, files = {"runs": []}, [], []
    for N in cfg["N"]:
        _, lf = _field(cfg, N)
        h = WilsonFamily(lf, rep)(cfg["m"]).dense()
        lam = np.linalg.eigvalsh(h)
        name = f"spectrum_N{N}.csv"
        _write_csv(out / name, CSV_SCHEMA["spectrum.csv"], [(i, repr(float(v))) for i, v in enumerate(lam)])
        files.append(name)
        e = int((lam > 0).sum() - (lam < 0).sum())
        summary["runs"].append({"N": N, "m": cfg["m"], "eta": e, "min_abs_eig": float(np.abs(lam).min()),
                                "dim": int(lam.size)})
        checks.append((f"hermitian_spectrum_N{N}", bool(np.all(np.isfinite(lam)))))
    return summary, checks, files


def run_flow(cfg, out):
    rep = build_gamma_rep(cfg["n"])
    summary, checks, files = {"runs": []}, [], []
    for N in cfg["N"]:
        _, lf = _field(cfg, N)
        grid = MassGrid.uniform(cfg["M"], cfg["points"], cfg["max_depth"])
        res = spectral_flow(WilsonFamily(lf, rep), grid)
        name = f"flow_N{N}.csv"
        res.write_csv(out / name)
        files.append(name)
        s = res.summary()
        s["N"] = N
        summary["runs"].append(s)
        checks.append((f"sf_equals_eta_formula_N{N}", res.sf == res.sf_eta))
    return summary, checks, files


def run_index(cfg, out):
    rep = build_gamma_rep(cfg["n"])
    summary, checks = {"runs": []}, []
    for N in cfg["N"]:
        _, lf = _field(cfg, N)
        e, gap = eta(WilsonFamily(lf, rep)(-cfg["M"]), cfg["zero_tol"])
        idx = wilson_index(lf, rep, cfg["M"])
        run = {"N": N, "index": idx, "eta_minus": e, "method": "wilson", "min_abs_eig": gap}
        if lf.n == 2 and lf.nc == 1:
            run["plaquette_charge"] = plaquette_charge(lf)[0]
        summary["runs"].append(run)
        checks.append((f"index_integer_N{N}", e == -2 * idx))
    if len(summary["runs"]) == 1:
        summary.update({k: summary["runs"][0][k] for k in ("index", "eta_minus", "method")})
    return summary, checks, []


def run_overlap(cfg, out):
    rep = build_gamma_rep(cfg["n"])
    summary, checks = {"runs": []}, []
    for N in cfg["N"]:
        _, lf = _field(cfg, N)
        ov = build_overlap(lf, rep, cfg["M"])
        s = {"N": N, "index": overlap_index(ov), "gw_residual": gw_residual(ov),
             "min_abs_eig_HW": ov.min_abs_eig}
        summary["runs"].append(s)
        checks.append((f"gw_residual_N{N}", s["gw_residual"] < cfg["gw_tol"]))
        checks.append((f"overlap_equals_wilson_N{N}", s["index"] == wilson_index(lf, rep, cfg["M"])))
    return summary, checks, []


def run_verify(cfg, out):
    rep = build_gamma_rep(2)
    rows, checks = [], []
    charges = cfg["charges"] if cfg["kind"] != "trivial" else [0]
    for q in charges:
        for N in cfg["N"]:
            desc, lf = _field(cfg, N, q)
            w = wilson_index(lf, rep, cfg["M"])
            o = overlap_index(build_overlap(lf, rep, cfg["M"]))
            sf = spectral_flow(WilsonFamily(lf, rep),
                               MassGrid.uniform(cfg["M"], cfg["points"], cfg["max_depth"])).sf
            c = continuum_index(desc, rep, cfg["K"])
            ok = w == o == sf == c == desc.flux
            rows.append((q, N, w, o, sf, c, ok))
            checks.append((f"indices_agree_Q{q}_N{N}", ok))
    _write_csv(out / "verify.csv", CSV_SCHEMA["verify.csv"], rows)
    summary = {"rows": [dict(zip(CSV_SCHEMA["verify.csv"], r)) for r in rows]}
    return summary, checks, ["verify.csv"]


def run_interp(cfg, out):
    from . import interp
    rep = build_gamma_rep(2)
    desc = descriptor(cfg)
    link = make_generalized_link(desc)
    rng = np.random.default_rng(cfg["seed"])
    Ns = cfg["interp_N"]
    x = rng.random((1000, 2))
    pu = max(interp.CutoffRho(1.0 / N).partition_residual(x) for N in Ns)
    lemma = max(abs(interp.neighbour_overlap_sum(N) - 1) for N in Ns)
    fb = interp.check_f_bounds(link, Ns, trials=min(cfg["trials"], 5), seed=cfg["seed"], rep=rep)
    rec = interp.check_reconstruction(link, Ns, trials=cfg["trials"], seed=cfg["seed"], rep=rep)
    dc = interp.check_dirac_convergence(link, Ns, trials=min(cfg["trials"], 5), seed=cfg["seed"], rep=rep)
    summary = {"partition_residual": pu, "neighbour_identity_residual": lemma,
               "f_bounds": fb, "reconstruction": rec, "dirac_convergence": dc}
    checks = [("partition_of_unity", pu < 1e-10), ("neighbour_identity", lemma < 1e-8),
              ("f_norm_bounded", max(fb["f_norm"]) <= fb["f_norm_bound"]),
              ("ff_star_slope", fb["min_slope"] >= 0.8),
              ("reconstruction_decreasing", rec["strictly_decreasing"]),
              ("dirac_order", dc["min_order"] >= 0.8)]
    files = []
    if cfg["staple"]:
        rep_ = interp.staple_gap_scan(link, cfg["staple_N"], cfg["staple_K"], cfg["M"],
                                      gap_tol=cfg["gap_tol"])
        rep_.write_csv(out / "staple.csv")
        files.append("staple.csv")
        summary["staple"] = rep_.summary()
        checks.append(("staple_gap", rep_.ok))
    return summary, checks, files


RUNNERS = {"spectrum": run_spectrum, "flow": run_flow, "index": run_index,
           "overlap": run_overlap, "verify": run_verify, "interp": run_interp}


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def run(cfg: dict) -> int:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    t0 = time.perf_counter()
    error = None
    try:
        summary, checks, files = RUNNERS[cfg["pipeline"]](cfg, out)
    except ConfigError:
        raise
    except LatIndexError as exc:
        summary, checks, files = {}, [(type(exc).__name__, False)], []
        error = f"{type(exc).__name__}: {exc}"
    failed = [name for name, ok in checks if not ok]
    summary = {"pipeline": cfg["pipeline"], "result": summary,
               "checks": {name: bool(ok) for name, ok in checks}, "failed": failed}
    if error:
        summary["error"] = error
    _dump(out / "summary.json", summary)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "csv_schema": CSV_SCHEMA,
        "config": cfg,
        "versions": {"latindex": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "kernel_backend": kernels.BACKEND,
        "threads": os.environ.get("LATINDEX_THREADS"),
        "wall_time_s": time.perf_counter() - t0,
        "artifacts": ["summary.json"] + files,
    }
    _dump(out / "manifest.json", manifest)
    for name in failed:
        print(f"FAILED: {name}", file=sys.stderr)
    if error:
        print(error, file=sys.stderr)
    return 1 if failed else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="latindex", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="flat key = value config file ('-' for none)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key; may be repeated")
    args = ap.parse_args(argv)
    try:
        raw = {}
        if args.config != "-":
            try:
                raw = parse_config_text(Path(args.config).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        for item in args.set:
            raw.update(parse_config_text(item))
        if args.out:
            raw["out"] = args.out
        cfg = resolve_config(raw)
        threads = os.environ.get("LATINDEX_THREADS")
        if threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=int(threads)):
                return run(cfg)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
