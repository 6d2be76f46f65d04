"""Command-line interface.

Exit codes: 0 success, 1 mathematical validation failure, 2 numerical
non-convergence, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import beta as beta_mod
from . import extension, helmholtz, soliton
from .curvature import MetricError, check_metric, ricci_endomorphism
from .lie import (AlgebraError, algebra_to_dict, derivation_space, is_nilpotent, load_algebra,
                  lower_central_series, nice_basis_report, unimodularity, validate_jacobi)

EXIT_OK, EXIT_MATH, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
DIGITS = 12


class InputError(Exception):
    pass


class Outcome(Exception):
    """Carries a non-zero exit code together with a report."""

    def __init__(self, code, result=None, message=""):
        super().__init__(message)
        self.code, self.result, self.message = code, result or {}, message


# --- catalog and inputs -------------------------------------------------------------------

def catalog_dir(flag=None) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get("SOLVGEO_CATALOG")
    if env:
        return Path(env)
    return Path(str(resources.files("solvgeo") / "catalog"))


def resolve_algebra(source: str, catalog=None) -> Path:
    """A file path, or a name looked up in the catalog (``h3``, ``h3.alg``, ``catalog/h3.alg``)."""
    p = Path(source)
    if p.is_file():
        return p
    cat = catalog_dir(catalog)
    name = p.name if p.suffix == ".alg" else p.name + ".alg"
    cand = cat / name
    if cand.is_file():
        return cand
    raise InputError(f"algebra not found: {source} (catalog {cat})")


def read_algebra(source, catalog=None):
    path = resolve_algebra(source, catalog)
    try:
        return load_algebra(path), path.read_bytes()
    except AlgebraError as exc:
        raise InputError(str(exc)) from None


def read_metric(path, dim):
    if path is None:
        return np.eye(dim), b""
    try:
        raw = Path(path).read_bytes()
        data = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read metric file: {exc}") from None
    if isinstance(data, dict):
        key = "matrix" if "matrix" in data else "metric"
        if key not in data:
            raise InputError("metric file needs a 'matrix' entry")
        data = data[key]
    try:
        M = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise InputError("metric matrix is not numeric") from None
    if M.shape != (dim, dim):
        raise InputError(f"metric has shape {M.shape}, expected {(dim, dim)}")
    try:
        return check_metric(M), raw
    except MetricError as exc:
        raise InputError(str(exc)) from None


# --- formatting ---------------------------------------------------------------------------

def _round(x, exact=False):
    if isinstance(x, dict):
        return {k: _round(v, exact) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, exact) for v in x]
    if isinstance(x, np.ndarray):
        return _round(x.tolist(), exact)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            return str(x)
        if exact:
            f = beta_mod.to_fraction(x, max_denominator=1000, tol=1e-12)
            if f is not None:
                return str(f) if f.denominator != 1 else int(f)
        v = float(f"{x:.{DIGITS}g}")
        return 0.0 if v == 0 else v
    return x


def _human(result, indent=""):
    lines = []
    for k, v in result.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.extend(_human(v, indent + "  "))
        else:
            lines.append(f"{indent}{k}: {json.dumps(v)}")
    return lines


def _digest(command, blobs, args) -> str:
    h = hashlib.sha256(command.encode())
    for b in blobs:
        h.update(hashlib.sha256(b).digest())
    for key in ("seed", "tol", "method", "exact"):
        h.update(f"{key}={getattr(args, key, None)}".encode())
    return h.hexdigest()[:16]


# --- commands -----------------------------------------------------------------------------

def cmd_validate(args):
    L, blob = read_algebra(args.algebra, args.catalog)
    rep = validate_jacobi(L, tol=args.tol or 1e-12)
    series, nilp = lower_central_series(L)
    res = {"name": L.name, "dim": L.dim, "jacobi_max_residual": rep.max_residual,
           "lower_central_series": series}
    flags = {"jacobi": rep.passed, "nilpotent": nilp, "unimodular": unimodularity(L)}
    if rep.passed:
        res["derivation_dimension"] = derivation_space(L).dimension
        flags["nice_basis"] = nice_basis_report(L).nice
    else:
        res["failing_triple"] = list(rep.triple)
    code = EXIT_OK if rep.passed else EXIT_MATH
    return [blob], res, flags, code


def cmd_ricci(args):
    L, blob = read_algebra(args.algebra, args.catalog)
    H, mblob = read_metric(args.metric, L.dim)
    if not validate_jacobi(L).passed:
        raise Outcome(EXIT_MATH, message="Jacobi identity fails")
    rep = ricci_endomorphism(L, H)
    eig = np.sort(np.linalg.eigvals(rep.ricci).real)
    res = {"ricci": rep.ricci, "scal": rep.scal, "eigenvalues": eig}
    return [blob, mblob], res, {}, EXIT_OK


def cmd_beta(args):
    L, blob = read_algebra(args.algebra, args.catalog)
    try:
        B = beta_mod.beta_label(L)
    except (beta_mod.NotNiceError, ValueError, NotImplementedError) as exc:
        raise Outcome(EXIT_MATH, message=str(exc)) from None
    chk = beta_mod.beta_properties_check(B, L, seed=args.seed)
    res = {"beta": np.diag(B.beta), "beta_plus": np.diag(B.beta_plus), "eigenvalues": B.eigenvalues,
           "trace_beta": chk.trace_beta, "min_commutator_trace": chk.min_commutator_trace,
           "max_trace_d_beta": chk.max_trace_d_beta}
    flags = {"properties": chk.passed}
    return [blob], res, flags, EXIT_OK if chk.passed else EXIT_MATH


def _soliton_payload(L, H, rep):
    return {"algebra": algebra_to_dict(L), "metric": H, "lambda": rep.lam, "derivation": rep.D,
            "residual": rep.residual, "normalized_residual": rep.normalized_residual}


def find_nilsoliton(L, args, H0=None):
    """Return ``(algebra, metric, report, method)`` for a nilsoliton with ``lam = -1``."""
    tol = args.tol or soliton.SOLITON_TOL
    method = args.method
    if H0 is not None:
        rep = soliton.soliton_residual(L, H0, tol=tol)
        if rep.is_soliton and rep.lam < 0:
            H = soliton.normalize_soliton(L, H0)
            return L, H, soliton.soliton_residual(L, H, tol=tol), "given"
    N = nice_basis_report(L)
    if method in (None, "nice") and N.nice:
        verdict = beta_mod.einstein_nilradical_criterion(N)
        if verdict.verdict:
            ns = soliton.nilsoliton_from_nice(N, verdict.solution)
            return ns.algebra, ns.metric, soliton.soliton_residual(ns.algebra, ns.metric, tol=tol), "nice"
        if method == "nice":
            raise Outcome(EXIT_NUMERIC, {"einstein_nilradical": False},
                          "no positive solution of U x = 1; no nilsoliton")
    elif method == "nice":
        raise Outcome(EXIT_MATH, message=f"basis is not nice: {N.reason}")
    flow = soliton.nilsoliton_flow(L, H0, tol=tol)
    if not flow.converged:
        raise Outcome(EXIT_NUMERIC, {"normalized_residual": flow.report.normalized_residual,
                                     "iterations": flow.iterations}, flow.message)
    H = soliton.normalize_soliton(L, flow.metric)
    return L, H, soliton.soliton_residual(L, H, tol=tol), "flow"


def _nilpotent_input(args):
    L, blob = read_algebra(args.algebra, args.catalog)
    H0, mblob = read_metric(args.metric, L.dim) if args.metric else (None, b"")
    if not validate_jacobi(L).passed:
        raise Outcome(EXIT_MATH, message="Jacobi identity fails")
    if not is_nilpotent(L):
        raise Outcome(EXIT_MATH, message="algebra is not nilpotent")
    return L, H0, [blob, mblob]


def cmd_nilsoliton(args):
    L, H0, blobs = _nilpotent_input(args)
    if L.is_abelian:
        raise Outcome(EXIT_MATH, message="abelian algebras are flat; no soliton constant")
    S, H, rep, how = find_nilsoliton(L, args, H0)
    res = _soliton_payload(S, H, rep)
    res["method"] = how
    N = nice_basis_report(L)
    if N.nice and rep.is_soliton:
        # D and beta+ are conjugate, so compare spectra
        bp = np.sort(np.diag(beta_mod.beta_label(L).beta_plus))
        res["beta_plus"] = bp
        res["beta_plus_spectrum_error"] = float(np.abs(np.sort(np.linalg.eigvals(rep.D).real) - bp).max())
    return blobs, res, {"is_soliton": rep.is_soliton}, EXIT_OK if rep.is_soliton else EXIT_NUMERIC


def cmd_einstein_nilradical(args):
    L, blob = read_algebra(args.algebra, args.catalog)
    N = nice_basis_report(L)
    if not N.nice:
        raise Outcome(EXIT_MATH, message=f"basis is not nice: {N.reason}")
    v = beta_mod.einstein_nilradical_criterion(N)
    res = {"gram": v.gram, "solution": v.solution if v.solution is not None else None,
           "min_coordinate": v.min_coordinate, "degenerate": v.degenerate,
           "consistent": v.consistent}
    return [blob], res, {"einstein_nilradical": v.verdict}, EXIT_OK


def cmd_extend(args):
    L, H0, blobs = _nilpotent_input(args)
    if L.is_abelian:
        S, H, how = L, np.eye(L.dim) if H0 is None else H0, "abelian"
    else:
        S, H, _, how = find_nilsoliton(L, args, H0)
    try:
        X = extension.einstein_extension(S, H)
    except extension.NotANilsolitonError as exc:
        raise Outcome(EXIT_NUMERIC, message=str(exc)) from None
    ein = extension.einstein_residual(X.algebra, X.metric)
    inv = extension.rank_one_invariants(X)
    ext_dict = algebra_to_dict(X.algebra)
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(_round(ext_dict), indent=1) + "\n")
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc}") from None
    res = {"method": how, "base": algebra_to_dict(S), "base_metric": H, "D": X.D, "alpha": X.alpha,
           "extension": ext_dict, "metric": X.metric, "einstein_residual": ein.residual,
           "lambda_star": ein.lam_star, "mean_curvature_norm2": inv.mean_curvature_norm2,
           "trace_beta_plus": inv.trace_beta_plus, "sigma_plus": inv.sigma_plus,
           "fiber_ricci_error": inv.fiber_ricci_error, "shape_operator_error": inv.shape_operator_error}
    flags = dict(inv.checks)
    flags["einstein"] = ein.residual <= extension.EINSTEIN_TOL
    return blobs, res, flags, EXIT_OK if all(flags.values()) else EXIT_MATH


def cmd_helmholtz(args):
    try:
        G = helmholtz.load_graph(args.graph)
        F = helmholtz.load_field(args.field, G)
        blobs = [Path(args.graph).read_bytes(), Path(args.field).read_bytes()]
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read graph/field: {exc}") from None
    try:
        d = helmholtz.helmholtz_decompose(G, F, tol=args.tol or 1e-10)
    except helmholtz.DiscretizationError as exc:
        raise Outcome(EXIT_NUMERIC, message=str(exc)) from None
    res = {"v": d.v, "X0": d.X0.values, "kernel_residual": d.residual, "divergence": d.divergence,
           "second_singular_value": d.second_singular}
    flags = {"positive": bool(np.all(d.v > 0)), "kernel_dimension_one": d.kernel_dimension == 1,
             "divergence_free": d.divergence <= 1e-9}
    return blobs, res, flags, EXIT_OK if all(flags.values()) else EXIT_MATH


def cmd_catalog(args):
    cat = catalog_dir(args.catalog)
    if not cat.is_dir():
        raise InputError(f"catalog directory not found: {cat}")
    entries = {}
    for p in sorted(cat.glob("*.alg")):
        try:
            L = load_algebra(p)
        except AlgebraError as exc:
            entries[p.stem] = {"error": str(exc)}
            continue
        entries[p.stem] = {"dim": L.dim, "brackets": len(L.brackets), "nilpotent": is_nilpotent(L)}
    return [], {"catalog": str(cat) if args.catalog else "default", "algebras": entries}, {}, EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check the Jacobi identity and basic invariants"),
    "ricci": (cmd_ricci, "Ricci endomorphism of a left-invariant metric"),
    "beta": (cmd_beta, "stratum label beta and its certification"),
    "nilsoliton": (cmd_nilsoliton, "find a nilsoliton metric"),
    "einstein-nilradical": (cmd_einstein_nilradical, "positive-solution criterion on a nice basis"),
    "extend": (cmd_extend, "rank-one Einstein extension with invariant report"),
    "helmholtz": (cmd_helmholtz, "modified Helmholtz decomposition on a graph"),
    "catalog": (cmd_catalog, "list catalog algebras"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--metric", default=None, help="JSON metric matrix")
    common.add_argument("--method", choices=["nice", "flow"], default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--exact", action="store_true", help="rational reconstruction of numbers")
    common.add_argument("--catalog", default=None, help="catalog directory")
    common.add_argument("--timing", action="store_true", help="include wall time in the report")

    parser = argparse.ArgumentParser(prog="solvgeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "helmholtz":
            p.add_argument("graph")
            p.add_argument("field")
        elif name != "catalog":
            p.add_argument("algebra")
    return parser


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    func = COMMANDS[args.command][0]
    start = time.perf_counter()
    blobs, flags, message = [], {}, ""
    try:
        blobs, result, flags, code = func(args)
    except InputError as exc:
        code, result, message = EXIT_IO, {}, str(exc)
    except Outcome as exc:
        code, result, message = exc.code, exc.result, exc.message
    report = {"command": args.command, "inputs_digest": _digest(args.command, blobs, args),
              "exit_code": code, "flags": flags, "result": result}
    if message:
        report["message"] = message
    if args.timing:
        report["wall_time"] = time.perf_counter() - start
    report = _round(report, exact=args.exact)
    if args.json:
        stdout.write(json.dumps(report, sort_keys=True) + "\n")
    else:
        stdout.write("\n".join(_human(report)) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
