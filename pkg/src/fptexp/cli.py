"""Command line front end: ``fptexp <command> [flags]``.

Exit codes: 0 success, 1 I/O failure, 2 validation error or bad usage,
3 numerical non-convergence (including censored simulations), 4 statistical
rejection (``test-exp`` only).
"""
from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import branching, chain, exponentiality, lumping, simulation
from .errors import CensoringError, ConvergenceError, ValidationError
from .model_io import (RunReport, birth_death_from_obj, digest_files, emit_report,
                       parse_law, parse_model, parse_partition, two_type_from_obj, _load_json)

EXIT_IO, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_REJECT = 1, 2, 3, 4

_GRID = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*(geom|lin)?\s*$")


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` with optional ``geom`` (default) or ``lin`` suffix on n."""
    m = _GRID.match(text)
    if not m:
        raise ValidationError(f"bad --grid {text!r}; expected a:b:n(geom|lin)")
    a, b, n, kind = m.groups()
    try:
        a, b = float(a), float(b)
    except ValueError:
        raise ValidationError(f"bad --grid bounds in {text!r}") from None
    return chain.time_grid(a, b, int(n), kind or "geom")


def _law(args, kg, doc):
    spec = args.mu
    if spec is None:
        return kg.law(doc.initial) if doc.initial else kg.uniform()
    if spec == "uniform":
        return kg.uniform()
    if spec.startswith("point:"):
        return kg.point_mass(spec[len("point:"):])
    args.inputs.append(spec)
    return kg.law(parse_law(spec, kg.labels))


def _model(args):
    if not args.model:
        raise ValidationError("--model is required")
    args.inputs.append(args.model)
    doc = parse_model(args.model)
    return doc, chain.build_killed(doc.generator)


def _labelled(kg, v):
    return {lab: float(x) for lab, x in zip(kg.labels, v[:-1])}


def _opt(value, default):
    return default if value is None else value


def _tol(args, default):
    return _opt(args.tol, default)


def _alpha_flag(text):
    if text is None or text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"bad --alpha {text!r}") from None


def cmd_check_exp(args):
    doc, kg = _model(args)
    mu = _law(args, kg, doc)
    grid = parse_grid(args.grid) if args.grid else None
    rep = exponentiality.check_exponentiality(kg, mu, grid, _tol(args, 1e-9))
    diff = chain.check_diff_condition(kg, mu)
    warnings = []
    if not rep.high_confidence:
        warnings.append("low confidence: no grid point with alpha*t in [0.5, 3]")
    if "truncation" in doc.metadata:
        warnings.append("differentiability condition not certifiable: truncated model")
    res = rep.to_dict()
    res["diff_condition"] = {"verdict": diff.verdict, "value": diff.value}
    return res, warnings


def cmd_qsd(args):
    doc, kg = _model(args)
    pr = exponentiality.quasi_stationary(kg)
    res = {"decay_rate": pr.alpha, "qsd": _labelled(kg, pr.vector),
           "iterations": pr.iterations, "residual": pr.residual}
    if args.mu is not None or doc.initial:
        chk = exponentiality.is_qsd(kg, _law(args, kg, doc), _tol(args, 1e-10))
        res.update(mu_is_qsd=chk.is_qsd, mu_residual=chk.residual, mu_alpha=chk.alpha)
    return res, []


def cmd_ladder(args):
    doc, kg = _model(args)
    lad = exponentiality.mu_ladder(kg, _law(args, kg, doc), _opt(args.n, 10))
    res = {"alpha": lad.alpha, "levels": [_labelled(kg, v) for v in lad.levels],
           "valid_up_to": lad.valid_up_to, "terminated_reason": lad.terminated_reason}
    return res, []


def cmd_yaglom(args):
    doc, kg = _model(args)
    mu = _law(args, kg, doc)
    pi = exponentiality.yaglom_correction(kg, mu, args.horizon, _tol(args, 1e-9))
    chk = exponentiality.is_qsd(kg, pi, 1e-6)
    return {"alpha": exponentiality.alpha_of(kg, mu), "pi": _labelled(kg, pi),
            "pi_is_qsd": chk.is_qsd, "pi_residual": chk.residual}, []


def cmd_lump(args):
    doc, kg = _model(args)
    if args.partition:
        args.inputs.append(args.partition)
        part = parse_partition(args.partition, doc.generator)
    elif doc.partition is not None:
        part = doc.partition
    else:
        raise ValidationError("--partition is required (or a 'partition' field in the model)")
    lg = lumping.validate_partition(doc.generator, part)
    mu_bar, alpha = lumping.solve_lumped_qsd(lg)
    return {"qbar": lg.qbar, "mu_bar": mu_bar, "alpha": alpha}, []


def cmd_emergence(args):
    vals = [args.q21, args.q31, args.q23, args.q32]
    if any(v is None for v in vals):
        raise ValidationError("--q21 --q31 --q23 --q32 are all required")
    mu2, alpha = lumping.emergence_closed_form(*vals)
    return {"mu2": mu2, "mu3": 1.0 - mu2, "alpha": alpha}, []


def cmd_bounds(args):
    doc, kg = _model(args)
    env = simulation.envelope(kg)
    grid = parse_grid(args.grid) if args.grid else chain.time_grid(0.05, 5.0, 20)
    lo, hi = env.bounds(grid)
    worst = 0.0
    curves = {}
    for lab in kg.labels:
        s = chain.survival_curve(kg, kg.point_mass(lab), grid)
        curves[lab] = s
        worst = max(worst, float((lo - s).max()), float((s - hi).max()))
    res = {"alpha0": env.alpha0, "alpha1": env.alpha1, "grid": grid,
           "max_violation": max(worst, 0.0), "survival": curves}
    return res, []


def _samples(args, kg, doc):
    mu = _law(args, kg, doc)
    scheme = (args.scheme or "direct").replace("-", "_")
    n, seed = _opt(args.n, 1000), _opt(args.seed, 0)
    if scheme == "direct":
        return simulation.simulate_direct(doc.generator, mu, n, seed, workers=args.workers)
    if scheme == "two_clock":
        return simulation.simulate_two_clock(kg, mu, n, seed, workers=args.workers)
    raise ValidationError(f"unknown scheme {args.scheme!r}")


def cmd_simulate(args):
    doc, kg = _model(args)
    s = _samples(args, kg, doc)
    args.sidecar = s.to_csv()
    v = s.values
    return {"scheme": s.scheme, "n": len(s), "seed": s.seed, "mean": float(v.mean()),
            "std": float(v.std(ddof=1)) if len(v) > 1 else 0.0}, []


def cmd_test_exp(args):
    if args.samples:
        args.inputs.append(args.samples)
        lines = Path(args.samples).read_text().split()
        if not lines or lines[0] != "T":
            raise ValidationError("sample CSV must start with header 'T'")
        try:
            values = np.array([float(x) for x in lines[1:]])
        except ValueError as exc:
            raise ValidationError(f"{args.samples}: {exc}") from None
        s = simulation.SampleSet(values, _opt(args.seed, 0), "file")
    else:
        doc, kg = _model(args)
        s = _samples(args, kg, doc)
    alpha = _alpha_flag(args.alpha)
    res = simulation.test_exponential(s, "fit" if alpha == "auto" else alpha)
    out = {"scheme": s.scheme, "n": len(s), "alpha": res.alpha, "ks": res.statistic,
           "p": res.p_value, "verdict": res.verdict}
    if res.verdict != "exponential":
        args.rejected = True
    return out, []


def cmd_bd(args):
    if args.spec:
        args.inputs.append(args.spec)
        spec = birth_death_from_obj(_load_json(args.spec))
    else:
        if args.lam is None or args.nu is None:
            raise ValidationError("--lambda and --nu (or --spec) are required")
        spec = branching.BirthDeathSpec(args.lam, args.nu)
    alpha = _alpha_flag(args.alpha)
    alpha = spec.rho if alpha == "auto" else alpha
    coeffs, cls = branching.bd_mu_alpha_coeffs(spec, alpha, args.kmax)
    return {"lambda": spec.lam, "nu": spec.nu, "rho": spec.rho, "alpha": alpha,
            "coefficients": coeffs, "classification": cls}, []


def cmd_multitype(args):
    if not args.spec:
        raise ValidationError("--spec is required")
    args.inputs.append(args.spec)
    spec = two_type_from_obj(_load_json(args.spec))
    alpha = _alpha_flag(args.alpha)
    if alpha == "auto":
        raise ValidationError("multitype needs an explicit --alpha")
    grid = parse_grid(args.grid) if args.grid else chain.time_grid(0.01, 5.0, 32)
    tab = branching.multitype_mu_alpha_gf(spec, alpha, grid, _opt(args.n, 10_000),
                                          _opt(args.seed, 0),
                                          workers=args.workers)
    args.sidecar = tab.to_csv()
    return {"alpha": alpha, "t": tab.t, "q_hat": tab.q_hat, "u": tab.u, "G": tab.G}, []


COMMANDS = {
    "check-exp": cmd_check_exp, "qsd": cmd_qsd, "ladder": cmd_ladder, "yaglom": cmd_yaglom,
    "lump": cmd_lump, "emergence": cmd_emergence, "bounds": cmd_bounds,
    "simulate": cmd_simulate, "test-exp": cmd_test_exp, "bd": cmd_bd, "multitype": cmd_multitype,
}


HELP = {
    "check-exp": "test exponentiality of T under an initial law on a time grid",
    "qsd": "quasi-stationary law by power iteration",
    "ladder": "iterate the derived-law map from an initial law",
    "yaglom": "quasi-limit of the conditioned law",
    "lump": "validate a partition and solve the lumped QSD",
    "emergence": "closed-form QSD of the 3-block treatment model",
    "bounds": "exponential envelope of the survival function",
    "simulate": "sample first-passage times (CSV sidecar)",
    "test-exp": "KS test of samples against an exponential law",
    "bd": "linear birth-death extinction laws",
    "multitype": "Monte Carlo generating function for two-type emergence",
}


def _version_text():
    return (f"fptexp {__version__}\n"
            f"  structural tolerance  {chain.STRUCT_TOL:g}\n"
            f"  poisson tail          {chain.POISSON_TAIL:g}\n"
            f"  exponentiality tol    1e-09 (check-exp), grid 32 geom, alpha*t in [0.05, 5]\n"
            f"  qsd tol               1e-10\n"
            f"  perron tol            {exponentiality.PERRON_TOL:g}\n"
            f"  ladder slack          {exponentiality.NEG_SLACK:g}\n"
            f"  KS level              {simulation.LEVEL:g}, bootstrap {simulation.BOOTSTRAP}\n"
            f"  event cap             {simulation.MAX_EVENTS}\n")


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, default=argparse.SUPPRESS, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        sys.stdout.write(_version_text())
        parser.exit(0)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fptexp",
                                description="Exponential first-passage analysis of CTMCs")
    p.add_argument("--version", action=_VersionAction, help="print version and tolerance defaults")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--model")
        s.add_argument("--mu", help="PATH | uniform | point:LABEL")
        s.add_argument("--partition")
        s.add_argument("--grid", help="a:b:n(geom|lin)")
        s.add_argument("--tol", type=float)
        s.add_argument("--n", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--scheme", choices=["direct", "two-clock"])
        s.add_argument("--alpha", help="X | auto")
        s.add_argument("--out", help="report path (default: stdout)")
        s.add_argument("--csv", help="CSV sidecar path")
        s.add_argument("--workers", type=int, default=1)
        if name == "yaglom":
            s.add_argument("--horizon", type=float, default=10.0)
        if name == "emergence":
            for q in ("q21", "q31", "q23", "q32"):
                s.add_argument(f"--{q}", type=float)
        if name in ("bd", "multitype"):
            s.add_argument("--spec", help="JSON spec file")
        if name == "bd":
            s.add_argument("--lambda", dest="lam", type=float)
            s.add_argument("--nu", type=float)
            s.add_argument("--kmax", type=int, default=20)
        if name == "test-exp":
            s.add_argument("--samples", help="CSV of first-passage times (header T)")
    return p


def dispatch(argv) -> tuple[int, str]:
    """Run one command; returns ``(exit_code, report_text)``."""
    args = build_parser().parse_args(argv)
    args.inputs, args.sidecar, args.rejected = [], None, False
    try:
        result, warnings = COMMANDS[args.command](args)
        digest = digest_files(args.inputs)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION, ""
    except (ConvergenceError, CensoringError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC, ""
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO, ""
    report = RunReport(args.command, digest, result, warnings)
    try:
        text = emit_report(report, args.out)
        csv_path = args.csv or (Path(args.out).with_suffix(".csv") if args.out else None)
        if args.sidecar is not None and csv_path is not None:
            Path(csv_path).write_text(args.sidecar)
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO, ""
    if args.out is None:
        sys.stdout.write(text)
    return (EXIT_REJECT if args.rejected else 0), text


def main(argv=None) -> int:
    try:
        code, _ = dispatch(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        # argparse: usage errors exit 2, --help and --version exit 0
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    return code


if __name__ == "__main__":
    sys.exit(main())
