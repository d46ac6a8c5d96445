"""Command-line entry point: each verification is a subcommand emitting a JSON report.

Exit codes: 0 every check passed, 2 a check failed, 3 the coordinate oracle
disagreed with the invariant calculus, 4 the configuration was invalid.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__

SCHEMA = "conformal-bidiff-report/v1"
EXIT_PASS, EXIT_FAIL, EXIT_ORACLE, EXIT_CONFIG = 0, 2, 3, 4

# every default lives here so that a run is reproducible from its config echo
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "verify-bs": {"oracle_cases": 10, "oracle_dims": [2, 3], "seed": 0},
    "compare-symbols": {"k": 1, "d": 2, "convention": None},
    "covariance": {"d": 2, "points": 20, "seed": 0, "tolerance": 1e-6, "ks": [1, 2],
                   "pairs": [[1 / 3, 1 / 5], [-0.3, 0.7], [0.45, -0.15]]},
    "quad-c0": {"d": 2, "beta": "-4/3,-4/3,-4/3", "method": "adaptive", "budget": 1 << 20, "seed": 0,
                "tolerance": 0.005},
    "quad-a1": {"d": 3, "beta": "-8/3,-8/3,-8/3", "budget": 1 << 22, "seed": 20240917, "tolerance": 0.03,
                "sigmas": 3.0, "convention": "display", "workers": 1},
    "ks-check": {"d": 2, "nu": "0.5,1.0", "xi": "0.5,1,2", "tolerance": 1e-4},
    "identities": {"n": 500, "seed": 42, "d": 2, "duality_cases": 20, "tol_cocycle": 1e-10,
                   "tol_distance": 1e-10, "tol_stereographic": 1e-10, "tol_duality": 1e-6},
    "consts": {},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# formatting


def num(x) -> str:
    """Shortest decimal string that round-trips the IEEE double (stable across platforms)."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def check(name: str, passed: Optional[bool], method: str, tolerance=None, **values) -> Dict[str, Any]:
    verdict = "inconclusive" if passed is None else ("pass" if passed else "fail")
    out: Dict[str, Any] = {"name": name, "verdict": verdict, "method": method}
    if tolerance is not None:
        out["tolerance"] = num(tolerance)
    for k, v in values.items():
        if isinstance(v, (int, float, Fraction)) and not isinstance(v, bool):
            out[k] = num(v)
        elif isinstance(v, (list, tuple)):
            out[k] = [num(x) if isinstance(x, (int, float, Fraction)) else x for x in v]
        else:
            out[k] = v
    return out


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a rational number: {text!r}") from exc


def parse_list(text, conv: Callable = float) -> List:
    if isinstance(text, (list, tuple)):
        return [conv(str(x)) if conv is parse_fraction else conv(x) for x in text]
    try:
        return [conv(p) for p in str(text).split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text()
    try:
        if p.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except Exception as exc:  # parse errors of either format
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def resolve(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults, then the config file (top level, then its section), then explicit flags."""
    cfg = dict(DEFAULTS[command])
    file_cfg = load_config(args.config)
    for key, val in file_cfg.items():
        if not isinstance(val, dict) and key in cfg:
            cfg[key] = val
    section = file_cfg.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section [{command}] must be a table")
    for key, val in section.items():
        if key not in cfg:
            raise ConfigError(f"unknown key {key!r} in section [{command}]")
        cfg[key] = val
    for key, val in vars(args).items():
        if key in cfg and val is not None:
            cfg[key] = val
    return cfg


def emit(report: Dict[str, Any], out: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def make_report(command: str, cfg: Dict[str, Any], checks: List[Dict[str, Any]], seconds: float,
                extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    verdicts = {c["verdict"] for c in checks}
    overall = "fail" if "fail" in verdicts else ("inconclusive" if "inconclusive" in verdicts else "pass")
    rep = {"schema": SCHEMA, "version": __version__, "command": command,
           "config": {k: (num(v) if isinstance(v, float) else v) for k, v in cfg.items()},
           "verdict": overall, "checks": checks}
    if extra:
        rep.update(extra)
    rep["timing"] = {"seconds": f"{seconds:.3f}"}
    return rep


def exit_code(report: Dict[str, Any]) -> int:
    return EXIT_FAIL if report["verdict"] == "fail" else EXIT_PASS


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_bs(args, cfg) -> int:
    from .coordinate_oracle import cross_validate
    from .operators import bernstein_sato_residual, verify_bernstein_sato, IdentityFailed

    t0 = time.perf_counter()
    cv = cross_validate(int(cfg["oracle_cases"]), [int(d) for d in cfg["oracle_dims"]], int(cfg["seed"]))
    checks = [check("oracle-cross-validation", cv.passed, "exact", cases=cv.cases,
                    mismatches=len(cv.mismatches))]
    if not cv.passed:
        emit(make_report("verify-bs", cfg, checks, time.perf_counter() - t0), args.out)
        return EXIT_ORACLE
    perturb = parse_fraction(args.perturb) if args.perturb else Fraction(0)
    try:
        rep = verify_bernstein_sato(perturb)
        residual, passed = rep.residual, True
    except IdentityFailed as exc:
        residual, passed = exc.residual, False
    checks.append(check("bernstein-sato", passed, "exact", residual_terms=len(residual.terms)))
    extra = None
    if args.dump is not None:
        text = residual.to_text() or "0"
        if args.dump == "-":
            extra = {"residual": text}
        else:
            Path(args.dump).write_text(text + "\n")
    report = make_report("verify-bs", cfg, checks, time.perf_counter() - t0, extra)
    emit(report, args.out)
    return exit_code(report)


def cmd_compare_symbols(args, cfg) -> int:
    from .operators import CONVENTIONS, compare_symbols

    k, d = int(cfg["k"]), int(cfg["d"])
    if not 0 <= k <= 3 or d not in (2, 3, 4, 5):
        raise ConfigError("compare-symbols needs 0 <= k <= 3 and d in {2,3,4,5}")
    conventions = [cfg["convention"]] if cfg["convention"] else list(CONVENTIONS)
    t0 = time.perf_counter()
    checks, found = [], False
    for conv in conventions:
        if conv not in CONVENTIONS:
            raise ConfigError(f"unknown convention {conv!r}")
        if k == 0:
            checks.append(check(f"proportional-{conv}", True, "exact", ratio="1",
                                symbol_F="1", symbol_D="1"))
            found = True
            continue
        cmp = compare_symbols(k, d, conv)
        ok = cmp.proportional
        found |= ok
        checks.append(check(f"proportional-{conv}", ok, "exact",
                            ratio=cmp.ratio.to_text() if ok else "NOT-PROPORTIONAL",
                            symbol_F=cmp.symbol_F.to_text(), symbol_D=cmp.symbol_D.to_text()))
    report = make_report("compare-symbols", cfg, checks, time.perf_counter() - t0)
    if len(conventions) > 1 and found:
        # with both conventions the gate is that at least one is proportional
        report["verdict"] = "pass"
    emit(report, args.out)
    return exit_code(report)


def cmd_covariance(args, cfg) -> int:
    from .coordinate_oracle import symbol
    from .numerics.covariance import covariance_sweep
    from .operators import build_F_k, or_symbol

    d, tol = int(cfg["d"]), float(cfg["tolerance"])
    pairs = [tuple(float(x) for x in p) for p in cfg["pairs"]]
    t0 = time.perf_counter()
    syms = {f"F{k}": (symbol(build_F_k(int(k)), d), int(k)) for k in cfg["ks"]}
    syms["D1-formula"] = (or_symbol(1, "formula"), 1)
    syms["D1-display"] = (or_symbol(1, "display"), 1)
    rows = covariance_sweep(syms, d, pairs, points=int(cfg["points"]), seed=int(cfg["seed"]))
    checks = []
    worst: Dict[str, float] = {}
    for r in rows:
        worst[r.label] = max(worst.get(r.label, 0.0), r.residual)
    for k in cfg["ks"]:
        label = f"F{k}"
        checks.append(check(f"covariance-{label}", worst[label] <= tol, "fd8", tol, max_residual=worst[label]))
    passing = [c for c in ("formula", "display") if worst[f"D1-{c}"] <= tol]
    checks.append(check("D1-convention-adjudication", len(passing) == 1, "fd8", tol,
                        formula=worst["D1-formula"], display=worst["D1-display"],
                        covariant=",".join(passing) or "none"))
    table = [{"op": r.label, "group": r.group, "lam": num(r.lam), "mu": num(r.mu), "residual": num(r.residual)}
             for r in rows]
    report = make_report("covariance", cfg, checks, time.perf_counter() - t0, {"residuals": table})
    emit(report, args.out)
    return exit_code(report)


def cmd_quad_c0(args, cfg) -> int:
    from .numerics.quadrature import c0_closed_form, sphere_quad

    d = int(cfg["d"])
    beta = parse_list(cfg["beta"], parse_fraction)
    t0 = time.perf_counter()
    closed = c0_closed_form(beta, d)
    rep = sphere_quad([float(b) for b in beta], d, (), int(cfg["budget"]), int(cfg["seed"]), cfg["method"])
    rel = abs(abs(rep.estimate) - abs(closed)) / abs(closed)
    checks = [
        check("positivity", rep.estimate > 0, rep.method, estimate=rep.estimate),
        check("c0-magnitude", rel <= float(cfg["tolerance"]), rep.method, cfg["tolerance"],
              estimate=rep.estimate, error_estimate=rep.error_estimate, closed_form=closed,
              relative_difference=rel, ratio=rep.estimate / closed),
        check("c0-sign", None, "closed-form", closed_form_sign="negative" if closed < 0 else "positive",
              quadrature_sign="positive" if rep.estimate > 0 else "negative"),
    ]
    report = make_report("quad-c0", cfg, checks, time.perf_counter() - t0)
    emit(report, args.out)
    return exit_code(report)


def cmd_quad_a1(args, cfg) -> int:
    from .numerics.quadrature import residue_ratio_check_k1

    beta = parse_list(cfg["beta"], parse_fraction)
    t0 = time.perf_counter()
    rep = residue_ratio_check_k1(beta, int(cfg["d"]), int(cfg["budget"]), int(cfg["seed"]),
                                 float(cfg["tolerance"]), float(cfg["sigmas"]), cfg["convention"],
                                 int(cfg["workers"]))
    checks = [
        check("a1-ratio-triple", rep.max_ratio_deviation <= rep.tolerance, "monte_carlo", rep.tolerance,
              triple=list(rep.triple), target=list(rep.target), max_deviation=rep.max_ratio_deviation,
              lam=rep.lam, mu=rep.mu),
        check("a1-isotropy", rep.isotropic, "monte_carlo", cfg["sigmas"],
              **{f"z_{k}": v for k, v in rep.isotropy_z.items()}),
    ]
    report = make_report("quad-a1", cfg, checks, time.perf_counter() - t0)
    emit(report, args.out)
    return exit_code(report)


def cmd_ks_check(args, cfg) -> int:
    from .numerics.knapp_stein import knapp_stein_check
    from .numerics.quadrature import NotConvergent

    d = int(cfg["d"])
    xi = parse_list(cfg["xi"])
    t0 = time.perf_counter()
    checks = []
    for nu in parse_list(cfg["nu"]):
        try:
            rep = knapp_stein_check(nu, d, xi, float(cfg["tolerance"]))
        except NotConvergent as exc:
            checks.append(check(f"knapp-stein-nu={num(nu)}", False, "radial", reason=str(exc)))
            continue
        checks.append(check(f"knapp-stein-nu={num(nu)}", rep.passed, "radial", rep.tolerance,
                            multiplier=rep.multiplier, xi=list(rep.xi), computed=list(rep.computed),
                            target=list(rep.target), max_relative_error=rep.max_relative_error))
    report = make_report("ks-check", cfg, checks, time.perf_counter() - t0)
    emit(report, args.out)
    return exit_code(report)


def cmd_identities(args, cfg) -> int:
    import numpy as np

    from .numerics.covariance import duality_residual
    from .numerics.group import (SingularPoint, cocycle_residual, distance_identity_residual,
                                 random_element, stereographic_residual)
    from .numerics.testfunc import random_test_function

    n, d, seed = int(cfg["n"]), int(cfg["d"]), int(cfg["seed"])
    t0 = time.perf_counter()

    def draw(rng, fn):
        while True:
            try:
                return fn(rng)
            except SingularPoint:
                continue

    def sweep(stream: int, fn) -> float:
        rng = np.random.default_rng(np.random.SeedSequence([seed, stream]))
        return max(float(draw(rng, fn)) for _ in range(n))

    coc = sweep(0, lambda r: cocycle_residual(random_element(r, d, 4), random_element(r, d, 4),
                                              r.uniform(-2, 2, d)))
    dist = sweep(1, lambda r: distance_identity_residual(random_element(r, d, 4), r.uniform(-2, 2, d),
                                                         r.uniform(-2, 2, d)))
    ster = sweep(2, lambda r: stereographic_residual(r.uniform(-2, 2, d), r.uniform(-2, 2, d)))
    checks = [
        check("cocycle", coc <= cfg["tol_cocycle"], "direct", cfg["tol_cocycle"], max_residual=coc, cases=n),
        check("distance-identity", dist <= cfg["tol_distance"], "direct", cfg["tol_distance"],
              max_residual=dist, cases=n),
        check("stereographic", ster <= cfg["tol_stereographic"], "direct", cfg["tol_stereographic"],
              max_residual=ster, cases=n),
    ]
    if d == 2:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
        worst = 0.0
        for _ in range(int(cfg["duality_cases"])):
            g = random_element(rng, d, 4)
            lam = float(rng.uniform(-1, 1))
            phi, psi = random_test_function(rng, d, 1), random_test_function(rng, d, 1)
            worst = max(worst, duality_residual(g, lam, phi, psi)[0])
        checks.append(check("duality", worst <= cfg["tol_duality"], "trapezoid", cfg["tol_duality"],
                            max_residual=worst, cases=cfg["duality_cases"]))
    report = make_report("identities", cfg, checks, time.perf_counter() - t0)
    emit(report, args.out)
    return exit_code(report)


def cmd_consts(args, cfg) -> int:
    from . import operators as ops

    t0 = time.perf_counter()
    checks = []
    extra: Dict[str, Any] = {}
    if args.bpoly:
        if args.at:
            b = parse_list(args.at, parse_fraction)
            if len(b) != 3:
                raise ConfigError("--at needs three values")
            dval = parse_fraction(args.d) if args.d else None
            p = ops.b_poly(*b, d=dval)
        else:
            p = ops.b_poly(d=parse_fraction(args.d) if args.d else None)
        extra["b"] = p.to_text()
    if args.ck is not None:
        beta1 = parse_fraction(args.beta1) if args.beta1 else None
        extra["c_k_over_c0"] = ops.c_k_over_c0(int(args.ck), beta1).to_text()
        ok = all(ops.recursion_consistency(j) for j in range(int(args.ck)))
        checks.append(check("c_k-recursion", ok, "exact", up_to=int(args.ck)))
    if args.knapp is not None:
        dval = int(args.d or 2)
        extra["c_nu"] = num(ops.knapp_stein_multiplier(parse_fraction(args.knapp), dval))
    if args.nconst is not None:
        lam, mu = parse_list(args.nconst, parse_fraction)
        extra["c_lam_mu"] = num(ops.n_constant(lam, mu, int(args.d or 2)))
    if not extra:
        raise ConfigError("consts needs at least one of --bpoly, --ck, --knapp, --nconst")
    report = make_report("consts", cfg, checks, time.perf_counter() - t0, {"values": extra})
    emit(report, args.out)
    return exit_code(report)


COMMANDS = {
    "verify-bs": cmd_verify_bs,
    "compare-symbols": cmd_compare_symbols,
    "covariance": cmd_covariance,
    "quad-c0": cmd_quad_c0,
    "quad-a1": cmd_quad_a1,
    "ks-check": cmd_ks_check,
    "identities": cmd_identities,
    "consts": cmd_consts,
}


# ---------------------------------------------------------------------------
# argument parsing

# values such as "-4/3,-4/3,-4/3" are arguments, not flags
_NEGATIVE = re.compile(r"^-[\d./,eE+-]+$")


def _sub(subs, name: str, help: str) -> argparse.ArgumentParser:
    p = subs.add_parser(name, help=help)
    p._negative_number_matcher = _NEGATIVE
    p.add_argument("--config", help="TOML or JSON file with defaults for this run")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conformal-bidiff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = _sub(subs, "verify-bs", "oracle cross-validation, then the Bernstein-Sato identity")
    p.add_argument("--dump", nargs="?", const="-", help="write the residual kernel (to the report, or a file)")
    p.add_argument("--oracle-cases", dest="oracle_cases", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--perturb", help=argparse.SUPPRESS)

    p = _sub(subs, "compare-symbols", "exact proportionality of symbol(F^(k)) and symbol(D^(k))")
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--convention", choices=["formula", "display"])

    p = _sub(subs, "covariance", "finite-difference covariance residuals")
    p.add_argument("--d", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float)

    p = _sub(subs, "quad-c0", "sphere quadrature of I(1) against the c0 closed form")
    p.add_argument("--d", type=int)
    p.add_argument("--beta")
    p.add_argument("--method", choices=["adaptive", "monte_carlo"])
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float)

    p = _sub(subs, "quad-a1", "Monte Carlo k=1 residue coefficients against D^(1)")
    p.add_argument("--d", type=int)
    p.add_argument("--beta")
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--convention", choices=["formula", "display"])
    p.add_argument("--workers", type=int)

    p = _sub(subs, "ks-check", "Knapp-Stein multiplier on a Gaussian")
    p.add_argument("--d", type=int)
    p.add_argument("--nu")
    p.add_argument("--xi")
    p.add_argument("--tolerance", type=float)

    p = _sub(subs, "identities", "cocycle, distance, stereographic and duality identities")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--d", type=int)

    p = _sub(subs, "consts", "closed-form constants")
    p.add_argument("--bpoly", action="store_true", help="the Bernstein-Sato polynomial b")
    p.add_argument("--at", help="evaluate b at b1,b2,b3")
    p.add_argument("--d", help="dimension (symbolic when omitted)")
    p.add_argument("--ck", type=int, help="c_k / c_0 and the recursion up to k")
    p.add_argument("--beta1", help="beta1 on the plane, for --ck")
    p.add_argument("--knapp", help="c(nu)")
    p.add_argument("--nconst", help="c(lam, mu) at lam,mu")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
