"""Config-driven experiment runner.

Every subcommand reads an optional YAML file (``--config``) and lets flags
override its keys. The file has at most these top-level keys::

    kind: quotient            # must match the subcommand if present
    seed: 7
    output: report.csv
    geometry: {domain_kind: torus_1d, modes_per_axis: 16, tau_spacing: 1.0}
    params: {case: thm41, s: -0.3, b: 0.55, bprime: -0.46}

``tau_count`` may be omitted from the geometry block; the smallest admissible
value is then used. Output is a CSV report plus a JSON sidecar with the same
stem. Exit codes: 0 on a completed run, 2 on a configuration error (nothing
is written), 3 on a geometry error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bilinear import (
    BilinearSymbol,
    adjoint_check,
    apply_bilinear,
    apply_bilinear_oracle,
    conjugation_identity_check,
    lemma24_identity,
)
from .counterexamples import GrowthReport, fit_growth, get_family
from .estimates import Params, QuotientReport, default_geometry, get_case, maximize_quotient, random_ensemble
from .lattice import FrequencyField, GeometryError, LatticeGeometry, conjugate_field, zero_nyquist
from .norms import WeightSpec, l2_norm, xsb_norm
from .solver import (
    NonlinearitySpec,
    ProbeAborted,
    RoughDataSpec,
    SolveConfig,
    SolveSummary,
    bisect_time,
    lipschitz_probe,
    solve_local,
    summarize,
)

KINDS = ("norm", "bilinear-check", "quotient", "counterexample", "solve")
TOP_KEYS = {"kind", "seed", "output", "geometry", "params"}
GEOMETRY_KEYS = {"domain_kind", "modes_per_axis", "tau_count", "tau_spacing", "xi_spacing"}


class ConfigError(ValueError):
    pass


# -- parameter schemas ------------------------------------------------------------

def _float(x):
    return float(x)


def _opt_float(x):
    return None if x is None or x == "" else float(x)


def _int(x):
    if isinstance(x, bool) or float(x) != int(float(x)):
        raise ValueError(f"not an integer: {x!r}")
    return int(float(x))


def _bool(x):
    if isinstance(x, bool):
        return x
    if str(x).lower() in ("1", "true", "yes", "on"):
        return True
    if str(x).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {x!r}")


def _int_list(x):
    if isinstance(x, str):
        x = [p for p in x.split(",") if p.strip()]
    return [_int(v) for v in x]


def _float_list(x):
    if isinstance(x, str):
        x = [p for p in x.split(",") if p.strip()]
    return [float(v) for v in x]


def _str_list(x):
    if isinstance(x, str):
        x = [p.strip() for p in x.split(",") if p.strip()]
    return [str(v) for v in x]


REQUIRED = object()

SCHEMAS = {
    "norm": {
        "s": (_float, 0.0), "b": (_float, 0.5), "sign": (_int, 1),
        "alpha": (_float, 1.0), "count": (_int, 5),
    },
    "bilinear-check": {
        "s": (_float, 0.5), "count": (_int, 5),
        "checks": (_str_list, ["oracle", "adjoint", "conjugation"]),
        "windows": (_float_list, [1.0, 2.0, 4.0]), "width": (_float, 0.5),
        "centres": (_float_list, [-2.0, 2.0]),
    },
    "quotient": {
        "case": (str, REQUIRED), "s": (_float, REQUIRED), "b": (_float, 0.55),
        "bprime": (_float, 0.0), "b0": (_float, 0.55), "sigma": (_opt_float, None),
        "budget": (_int, 200), "alpha": (_float, 1.0), "refine": (_bool, True),
    },
    "counterexample": {
        "family": (str, REQUIRED), "s": (_float, REQUIRED), "b": (_float, 0.55),
        "bprime": (_float, 0.0), "n": (_int_list, [4, 8, 16, 32]),
    },
    "solve": {
        "nonlinearity": (str, REQUIRED), "coefficient": (_float, 1.0),
        "coefficient_imag": (_float, 0.0), "s": (_float, REQUIRED), "excess": (_float, 0.1),
        "amplitude": (_float, 0.1), "T": (_float, 0.1), "steps": (_int, 128),
        "max_iters": (_int, 50), "tol": (_float, 1e-10), "bisect": (_bool, False),
        "lipschitz_delta": (_opt_float, None), "trials": (_int, 3),
    },
}

GEOMETRY_REQUIRED = {"norm", "bilinear-check", "solve"}


def _validate_params(kind: str, raw: dict) -> dict:
    schema = SCHEMAS[kind]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown params key(s) for {kind}: {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw and raw[key] is not None:
            try:
                out[key] = conv(raw[key])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"params.{key}: {e}") from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key params.{key} for {kind}")
        else:
            out[key] = default
    return out


def _geometry(block) -> LatticeGeometry:
    if not isinstance(block, dict):
        raise ConfigError("geometry must be a mapping")
    unknown = sorted(set(block) - GEOMETRY_KEYS)
    if unknown:
        raise ConfigError(f"unknown geometry key(s): {', '.join(unknown)}")
    for key in ("domain_kind", "modes_per_axis"):
        if key not in block:
            raise ConfigError(f"missing required key geometry.{key}")
    try:
        kind = str(block["domain_kind"])
        M = _int(block["modes_per_axis"])
        dtau = float(block.get("tau_spacing", 1.0))
        dxi = float(block.get("xi_spacing", 1.0))
        K = block.get("tau_count")
        K = None if K is None else _int(K)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"geometry: {e}") from None
    if K is None:
        return LatticeGeometry.fit(kind, M, dtau, dxi)
    return LatticeGeometry(kind, M, K, dtau, dxi)


# -- config assembly ----------------------------------------------------------------

def _load_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from None
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must be a mapping")
    unknown = sorted(set(data) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    for block in ("geometry", "params"):
        if block in data and not isinstance(data[block], dict):
            raise ConfigError(f"{block} must be a mapping")
    return data


GEOMETRY_FLAGS = {"domain": "domain_kind", "modes": "modes_per_axis", "tau_count": "tau_count",
                  "tau_spacing": "tau_spacing", "xi_spacing": "xi_spacing"}


def _assemble(kind: str, args) -> dict:
    data = _load_file(args.config) if args.config else {}
    if "kind" in data and data["kind"] != kind:
        raise ConfigError(f"kind: config file says {data['kind']!r} but the subcommand is {kind!r}")
    params = dict(data.get("params") or {})
    for key in SCHEMAS[kind]:
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    geo = dict(data.get("geometry") or {})
    for flag, key in GEOMETRY_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            geo[key] = v
    seed = args.seed if args.seed is not None else data.get("seed", 0)
    try:
        seed = _int(seed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"seed: {e}") from None
    output = args.output or data.get("output") or f"{kind}.csv"
    cfg = {"kind": kind, "seed": seed, "output": str(output), "params": _validate_params(kind, params)}
    if geo:
        cfg["geometry"] = geo
    elif kind in GEOMETRY_REQUIRED:
        raise ConfigError(f"missing required block geometry for {kind}")
    return cfg


# -- runners ---------------------------------------------------------------------------

def _run_norm(cfg, g):
    p = cfg["params"]
    if p["sign"] not in (1, -1):
        raise ConfigError("params.sign must be +1 or -1")
    w = WeightSpec(p["s"], p["b"], p["sign"])
    fields = random_ensemble(g, p["alpha"], p["count"], cfg["seed"], p["sign"])
    cols = ("index", "s", "b", "sign", "xsb_norm", "l2_norm", "conjugate_dual_norm", "geometry", "seed")
    rows = []
    for i, f in enumerate(fields):
        f = zero_nyquist(f)
        rows.append((i, w.s, w.b, w.sign, xsb_norm(f, w), l2_norm(f),
                     xsb_norm(conjugate_field(f), w.flipped()), g.fingerprint(), cfg["seed"]))
    return cols, rows, [g.fingerprint()]


def _gaussian(g, centre, width):
    xi = g.xi_axis()
    return np.exp(-((xi - centre) ** 2) / (2 * width**2)) + 0j


def _run_bilinear(cfg, g):
    p = cfg["params"]
    cols = ("check", "symbol", "s", "value", "reference", "max_abs_error", "geometry", "seed")
    rows = []
    known = {"oracle", "adjoint", "conjugation", "lemma24"}
    bad = sorted(set(p["checks"]) - known)
    if bad:
        raise ConfigError(f"params.checks: unknown check(s) {', '.join(bad)}")
    rng = np.random.default_rng(cfg["seed"])

    def rand(parity=None):
        c = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        if parity is not None:
            # keep first-axis modes of one parity so a singular abs symbol never meets data
            idx = np.arange(g.modes_per_axis) - g.modes_per_axis // 2
            keep = (idx % 2 == parity).reshape((-1,) + (1,) * g.ndim)
            c = c * keep
        return zero_nyquist(FrequencyField(g, c))

    s = p["s"]
    for check in p["checks"]:
        if check == "oracle":
            for fam in ("minus", "plus"):
                for br in ("japanese", "abs"):
                    sym = BilinearSymbol(fam, br, s)
                    err = 0.0
                    split = br == "abs" and s < 0
                    for _ in range(p["count"]):
                        f, h = (rand(1), rand(0)) if split else (rand(), rand())
                        a = apply_bilinear(sym, f, h).coeffs
                        b = apply_bilinear_oracle(sym, f, h).coeffs
                        err = max(err, float(np.max(np.abs(a - b))))
                    rows.append(("oracle", f"{fam}/{br}", s, "", "", err, g.fingerprint(), cfg["seed"]))
        elif check == "adjoint":
            err = 0.0
            for _ in range(p["count"]):
                lhs, rhs = adjoint_check(s, rand(), rand(), rand())
                err = max(err, abs(lhs - rhs))
            rows.append(("adjoint", "minus-plus/japanese", s, "", "", err, g.fingerprint(), cfg["seed"]))
        elif check == "conjugation":
            err = 0.0
            for _ in range(p["count"]):
                lhs, rhs = conjugation_identity_check(s, rand(), rand())
                # output Nyquist rows have no mirror partner in the band
                lhs, rhs = zero_nyquist(lhs), zero_nyquist(rhs)
                err = max(err, float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
            rows.append(("conjugation", "minus/japanese", s, "", "", err, g.fingerprint(), cfg["seed"]))
        elif check == "lemma24":
            c1, c2 = (p["centres"] + p["centres"])[:2]
            u1, u2 = _gaussian(g, c1, p["width"]), _gaussian(g, c2, p["width"])
            for T in p["windows"]:
                lhs, rhs = lemma24_identity(g, u1, u2, T)
                rows.append(("lemma24", f"window={T!r}", 0.5, lhs, rhs, abs(lhs - rhs), g.fingerprint(), cfg["seed"]))
    return cols, rows, [g.fingerprint()]


def _params(p) -> Params:
    return Params(s=p["s"], b=p["b"], bprime=p["bprime"], b0=p.get("b0", 0.55), sigma=p.get("sigma"))


def _run_quotient(cfg, g):
    p = cfg["params"]
    try:
        case = get_case(p["case"])
    except KeyError as e:
        raise ConfigError(f"params.case: {e.args[0]}") from None
    if g is not None and g.domain_kind != case.domain:
        raise GeometryError(f"case {case.id} lives on {case.domain}, geometry is {g.domain_kind}")
    g = g or default_geometry(case.domain)
    rep = maximize_quotient(case, _params(p), p["budget"], cfg["seed"], g, p["alpha"], refine=p["refine"])
    return QuotientReport.COLUMNS + ("admissible",), [rep.row() + (case.is_admissible(rep.params),)], [rep.geometry]


def _run_counterexample(cfg, g):
    p = cfg["params"]
    try:
        fam = get_family(p["family"])
    except KeyError as e:
        raise ConfigError(f"params.family: {e.args[0]}") from None
    try:
        rep = fit_growth(fam, _params(p), p["n"])
    except ValueError as e:
        if isinstance(e, GeometryError):
            raise
        raise ConfigError(f"params.n: {e}") from None
    cols = GrowthReport.COLUMNS + ("fitted_slope", "predicted_slope", "fit_residual", "seed")
    rows = [r + ("", "", "", cfg["seed"]) for r in rep.rows()]
    pr = rep.params
    rows.append((rep.family_id, pr.s, pr.b, pr.bprime, "summary", "", "", "per-n",
                 rep.fitted_slope, rep.predicted_slope, rep.fit_residual, cfg["seed"]))
    return cols, rows, list(rep.geometries)


def _run_solve(cfg, g):
    p = cfg["params"]
    try:
        N = NonlinearitySpec.parse(p["nonlinearity"], complex(p["coefficient"], p["coefficient_imag"]))
    except ValueError as e:
        raise ConfigError(f"params.nonlinearity: {e}") from None
    try:
        sc = SolveConfig(T=p["T"], time_steps=p["steps"], max_iters=p["max_iters"],
                         residual_tol=p["tol"], geometry=g, s=p["s"])
        data = RoughDataSpec(p["s"], p["excess"], cfg["seed"], p["amplitude"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    u0 = data.generate(g)
    if p["bisect"]:
        try:
            _, res = bisect_time(u0, N, sc)
        except ProbeAborted:
            res = solve_local(u0, N, sc)
    else:
        res = solve_local(u0, N, sc)
    lip = None
    if p["lipschitz_delta"] is not None and res.converged:
        try:
            lip = lipschitz_probe(u0, p["lipschitz_delta"], N, res.config, p["trials"], cfg["seed"]).quotient
        except ProbeAborted:
            lip = None
    summ = summarize(res, N, p["amplitude"], lip)
    return SolveSummary.COLUMNS + ("geometry", "seed"), [summ.row() + (g.fingerprint(), cfg["seed"])], [g.fingerprint()]


RUNNERS = {"norm": _run_norm, "bilinear-check": _run_bilinear, "quotient": _run_quotient,
           "counterexample": _run_counterexample, "solve": _run_solve}


# -- presets ------------------------------------------------------------------------------

def _q(case, **kw):
    return {"case": case, "budget": 40, **kw}


_T1 = {"domain_kind": "torus_1d", "modes_per_axis": 32}
_R1 = {"domain_kind": "line_1d", "modes_per_axis": 64, "xi_spacing": 0.25}

PRESETS = {
    "problem-sec3": ("open: trilinear smoothing estimate for 1/4 < s < 1/2 (trend only)", "quotient", None,
                     [_q("lemma31", s=s) for s in (0.3, 0.4, 0.45)]),
    "open-l4l3-torus3": ("open: X_{eps,b} into L^4_t L^3_x on T^3 (trend only)", "quotient", None,
                         [_q("open-l4l3-torus3", s=s) for s in (0.05, 0.1, 0.2)]),
    "open-thm2-scaling": ("open: cubic line problem between -1/2 and -5/12 (trend only)", "solve", _R1,
                          [{"nonlinearity": "u^3", "s": s, "amplitude": 0.2, "T": 0.05, "steps": 128}
                           for s in (-0.42, -0.45, -0.49)]),
    "thm1": ("Theorem 1: periodic ubar^m, local wellposedness probe (m=3, T^1, s=-0.3)", "solve", _T1,
             [{"nonlinearity": "ubar^3", "s": -0.3, "amplitude": 0.5, "T": 0.1, "steps": 128,
               "lipschitz_delta": 0.01}]),
    "thm2": ("Theorem 2: cubic nonlinearities on the line (u^3, s=-0.4)", "solve", _R1,
             [{"nonlinearity": "u^3", "s": -0.4, "amplitude": 0.2, "T": 0.05, "steps": 128}]),
    "thm3": ("Theorem 3: quartic nonlinearities on the line (ubar^4, s=-0.15)", "solve", _R1,
             [{"nonlinearity": "ubar^4", "s": -0.15, "amplitude": 0.2, "T": 0.05, "steps": 128}]),
    "thm41": ("Theorem 4.1: Let n=1, m=3 or n=2, m=2", "quotient", None,
              [_q("thm41", s=-0.3, b=0.55, bprime=-0.46)]),
    "thm42": ("Theorem 4.2: Let n=3", "quotient", None, [_q("thm42", s=-0.1, b=0.55, bprime=-0.45)]),
    "thm43": ("Theorem 4.3: provided 0>=s>-5/12", "quotient", None,
              [_q("thm43-42", s=-0.2, b=0.55, bprime=-0.3), _q("thm43-43", s=-0.2, b=0.55, bprime=-0.3)]),
    "thm44": ("Theorem 4.4: the strongest restrictions on s occur", "quotient", None,
              [_q("thm44", s=-0.3, b=0.55, bprime=-0.45)]),
    "thm51": ("Theorem 5.1: Assume 0 >= s > -1/6", "quotient", None,
              [_q("thm51", s=-0.1, b=0.55, bprime=-0.41)]),
    "prop51": ("Proposition 5.1: Apply part iii) of Lemma 2.3", "quotient", None,
               [_q("prop51", s=-0.05, b=0.55, bprime=-0.4)]),
    "thm52": ("Theorem 5.2: We begin with the nonlinearity", "quotient", None,
              [_q(c, s=-0.1, b=0.55, bprime=-0.41)
               for c in ("thm52-uuuu", "thm52-uuuubar", "thm52-ubarubarubaru")]),
    "ex41": ("Example 4.1: fails for all s<0 (d >= 2)", "counterexample", None,
             [{"family": "ex41", "s": -0.25, "bprime": -0.4}]),
    "ex42": ("Example 4.2: fails for all s< -1/3", "counterexample", None,
             [{"family": "ex42f", "s": -0.5, "bprime": 0.0}, {"family": "ex42g", "s": -0.5, "b": 0.55}]),
    "ex51": ("Example 5.1: fails for all s<0", "counterexample", None,
             [{"family": "ex51", "s": -0.25}, {"family": "ex51tri", "s": -0.25}]),
    "ex52": ("Example 5.2: fail for all s<0", "counterexample", None,
             [{"family": "ex52", "s": -0.25}, {"family": "ex52tri", "s": -0.25}]),
    "ex53": ("Example 5.3: fails for all s<-1/8", "counterexample", None,
             [{"family": "ex53", "s": -0.25, "bprime": -1.0}]),
    "lemma24": ("Lemma 2.4: free bilinear smoothing identity", "bilinear-check",
                {"domain_kind": "line_1d", "modes_per_axis": 1024, "xi_spacing": 2 * np.pi / 256},
                [{"checks": ["lemma24"]}]),
}


def list_presets() -> str:
    return "".join(f"{k}\t{PRESETS[k][0]}\n" for k in sorted(PRESETS))


# -- output ------------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, complex):
        return "%.17g%+.17gj" % (v.real, v.imag)
    return str(v)


def _csv_text(cols, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _write(output: str, cols, rows, sidecar: dict):
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_csv_text(cols, rows))
    out.with_suffix(".json").write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n")


def _execute(cfg: dict, runs=None):
    """Run one config (or a list of param overrides of it) and return the report pieces."""
    g = _geometry(cfg["geometry"]) if "geometry" in cfg else None
    runner = RUNNERS[cfg["kind"]]
    cols, rows, geos = None, [], []
    for params in runs or [cfg["params"]]:
        c, r, gs = runner({**cfg, "params": params}, g)
        cols = cols or c
        rows.extend(r)
        geos.extend(gs)
    return cols, rows, geos


def run(kind: str, args) -> int:
    try:
        if kind == "preset":
            if args.name not in PRESETS:
                raise ConfigError(f"unknown preset {args.name!r}; see list-presets")
            anchor, pkind, geo, runs = PRESETS[args.name]
            seed = 0 if args.seed is None else _int(args.seed)
            runs = [_validate_params(pkind, r) for r in runs]
            cfg = {"kind": pkind, "seed": seed, "output": args.output or f"{args.name}.csv",
                   "params": runs[0], "preset": args.name}
            if geo:
                cfg["geometry"] = geo
            cols, rows, geos = _execute(cfg, runs)
            echo = {**cfg, "runs": runs}
        else:
            cfg = _assemble(kind, args)
            cols, rows, geos = _execute(cfg)
            echo = cfg
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except GeometryError as e:
        print(f"geometry error: {e}", file=sys.stderr)
        return 3
    sidecar = {"config": echo, "geometry": sorted(set(geos)), "seed": cfg["seed"],
               "version": __version__, "columns": list(cols)}
    _write(cfg["output"], cols, rows, sidecar)
    print(cfg["output"])
    return 0


# -- argument parsing ----------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--output", help="CSV report path (a .json sidecar is written next to it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--domain", help="geometry.domain_kind")
    p.add_argument("--modes", type=int, help="geometry.modes_per_axis")
    p.add_argument("--tau-count", type=int, dest="tau_count")
    p.add_argument("--tau-spacing", type=float, dest="tau_spacing")
    p.add_argument("--xi-spacing", type=float, dest="xi_spacing")


def _add_params(p, kind):
    for key in SCHEMAS[kind]:
        flag = "--" + key.replace("_", "-")
        if key == "n":
            p.add_argument(flag, dest=key, help="comma-separated list")
        else:
            p.add_argument(flag, dest=key)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xsblab", description="Bourgain-space estimate laboratory")
    ap.add_argument("--version", action="version", version=f"xsblab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        _common(p)
        _add_params(p, kind)
    p = sub.add_parser("preset")
    p.add_argument("name")
    p.add_argument("--output")
    p.add_argument("--seed", type=int)
    sub.add_parser("list-presets")
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    if args.command == "list-presets":
        sys.stdout.write(list_presets())
        return 0
    return run(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
