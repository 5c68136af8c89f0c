"""Command-line front end.

Usage::

    floquet-lap <command> [--config run.json] [--set key.path=value ...] [--out DIR]

Commands: dispersion, multipliers, solve-cell, lap, translation,
verify-residue, verify-all.  Exit status is 0 on success, 2 for invalid
configuration, 3 for a numerical failure and 4 when the requested LAP
solution does not exist because a unit multiplier has zero group velocity.
Every failure writes ``diagnostic.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import ast
import copy
import json
import operator
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .cell import MediumSpec, assemble_operators, build_basis, field_from_json
from .parallel import ENV_VAR

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ASSUMPTION = 0, 2, 3, 4

COMMANDS = ("dispersion", "multipliers", "solve-cell", "lap", "translation", "verify-residue", "verify-all")

DEFAULTS: dict = {
    "medium": {"kind": "constant", "value": 1.0},
    "k2": "3*pi**2",
    "truncation": {"J": 8, "M": 6},
    "tolerances": {"tol_unit": 1e-6, "tol_quad": 1e-10, "tol_flat": 1e-6, "tol_dedup": 1e-7},
    "contour": {"Q": 64, "tau_override": None},
    "source": {"kind": "bump", "power": 4, "profile": [[0, 1.0, 0.0], [1, 0.5, 0.0], [2, 0.0, 0.3], [3, 0.2, 0.0]]},
    "cells": [-3, 5],
    "eps_list": [0.1, 0.05, 0.025, 0.0125],
    "dispersion": {"n_alpha": 64, "n_curves": 12},
    "solve_cell": {"z": [0.2, 0.1]},
    "translation": {"method": "mode_synthesis", "n_sources": 8, "n_cells": 1, "seed": 0},
    "verify_residue": {"n": [1, 2, 3, 4]},
    "verify_all": {"criteria": None},
    "output": "out",
}


class ConfigError(ValueError):
    pass


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def eval_number(value) -> float:
    """A number, or an arithmetic string over numbers and ``pi`` such as "3*pi**2"."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return float(np.pi)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {value!r}")

    try:
        return ev(ast.parse(value, mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {value!r}") from exc


@dataclass
class RunConfig:
    medium: MediumSpec
    k2: float
    J: int
    M: int
    tol_unit: float
    tol_quad: float
    tol_flat: float
    tol_dedup: float
    Q: int
    tau_override: float | None
    source: dict
    n_range: list[int]
    eps_list: list[float]
    output: Path
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            medium = MediumSpec.from_json(d["medium"])
            k2 = eval_number(d["k2"])
            J, M = int(d["truncation"]["J"]), int(d["truncation"]["M"])
            tol = {k: float(v) for k, v in d["tolerances"].items()}
            Q = int(d["contour"]["Q"])
            tau = d["contour"].get("tau_override")
            tau = None if tau is None else eval_number(tau)
            lo, hi = (int(v) for v in d["cells"])
            eps = [float(e) for e in d["eps_list"]]
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        if J < 1 or M < 1:
            raise ConfigError("truncation J and M must be >= 1")
        if any(v <= 0 for v in tol.values()):
            raise ConfigError("tolerances must be positive")
        if lo > hi:
            raise ConfigError("cells must be [lo, hi] with lo <= hi")
        if Q < 16:
            raise ConfigError("contour Q must be >= 16")
        if any(e <= 0 for e in eps) or len(eps) < 2:
            raise ConfigError("eps_list needs at least two positive values")
        if tau is not None and tau <= 0:
            raise ConfigError("tau_override must be positive")
        return cls(
            medium, k2, J, M, tol.get("tol_unit", 1e-6), tol.get("tol_quad", 1e-10), tol.get("tol_flat", 1e-6),
            tol.get("tol_dedup", 1e-7), Q, tau, d["source"], list(range(lo, hi + 1)), eps, Path(d["output"]), d,
        )


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(d: dict, assignment: str) -> None:
    """Apply ``dotted.path=value``; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    path, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    keys = path.split(".")
    cur = d
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def load_config(path: str | None, overrides: list[str]) -> dict:
    d = copy.deepcopy(DEFAULTS)
    if path:
        try:
            d = _merge(d, json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for a in overrides:
        apply_override(d, a)
    return d


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _setup(cfg: RunConfig):
    try:
        ops = assemble_operators(build_basis(cfg.J, cfg.M), cfg.medium)
        f = field_from_json(ops.basis, cfg.source)
    except (ValueError, IndexError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return ops, f


def _mset(cfg: RunConfig, ops):
    from .multipliers import floquet_multipliers

    ms = floquet_multipliers(ops, cfg.k2, tol_unit=cfg.tol_unit, tol_flat=cfg.tol_flat, tol_dedup=cfg.tol_dedup)
    if cfg.tau_override is not None:
        ms.tau = cfg.tau_override
    return ms


def cmd_dispersion(cfg: RunConfig) -> int:
    from .dispersion import classify_crossings, dispersion_diagram

    ops, _ = _setup(cfg)
    opts = cfg.raw.get("dispersion", {})
    na = int(opts.get("n_alpha", 64))
    nc = int(opts.get("n_curves", 12))
    alphas = np.linspace(-np.pi, np.pi, na + 1)[1:]
    curves = dispersion_diagram(ops, alphas, nc)
    rows = []
    for cv in curves:
        for a, mu, dmu in zip(cv.alphas, cv.mus, cv.dmus):
            rows.append([float(a), cv.mode_index, float(mu), float(dmu)])
    io.write_rows_csv(cfg.output / "dispersion.csv", ["alpha", "curve_index", "mu", "dmu"], rows)
    cs = classify_crossings(curves, cfg.k2, cfg.tol_flat)
    io.write_json(cfg.output / "crossings.json", cs.to_json())
    flagged = int(sum(int(cv.flagged.sum()) for cv in curves))
    print(f"wrote {len(curves)} curves x {na} samples; {flagged} flagged samples; P+={len(cs.p_plus)} P-={len(cs.p_minus)} P0={len(cs.p_zero)}")
    return EXIT_OK


def cmd_multipliers(cfg: RunConfig) -> int:
    from .multipliers import reciprocity_check

    ops, _ = _setup(cfg)
    ms = _mset(cfg, ops)
    out = ms.to_json()
    rec = reciprocity_check(ms)
    out["reciprocity"] = {"max_error": rec.max_error, "unpaired": [[z.real, z.imag] for z in rec.unpaired]}
    io.write_json(cfg.output / "multipliers.json", out)
    print(f"{len(ms.items)} multipliers, {len(ms.unit)} on the unit circle, tau={ms.tau:.6g}, assumption1_ok={ms.assumption1_ok}")
    return EXIT_OK


def cmd_solve_cell(cfg: RunConfig) -> int:
    from .cell_solver import solve_cell

    ops, f = _setup(cfg)
    zr = cfg.raw.get("solve_cell", {}).get("z", [0.2, 0.1])
    z = complex(eval_number(zr[0]), eval_number(zr[1]))
    res = solve_cell(ops, z, cfg.k2, f)
    io.write_json(
        cfg.output / "cell_solve.json",
        {
            "z": [z.real, z.imag],
            "k2": cfg.k2,
            "residual": res.residual,
            "condition_estimate": res.condition_estimate,
            "J": ops.basis.J,
            "M": ops.basis.M,
            "v_re": res.v.coeffs.real.tolist(),
            "v_im": res.v.coeffs.imag.tolist(),
        },
    )
    print(f"residual {res.residual:.3e}, condition {res.condition_estimate:.3e}")
    return EXIT_OK


def cmd_lap(cfg: RunConfig) -> int:
    from .lap import lap_solution

    ops, f = _setup(cfg)
    ms = _mset(cfg, ops)
    sol = lap_solution(ops, cfg.k2, f, cfg.n_range, mset=ms, tol_quad=cfg.tol_quad, eps_list=cfg.eps_list)
    sol.export(cfg.output)
    io.write_json(cfg.output / "multipliers.json", ms.to_json())
    for n, h in sol.h1_norms().items():
        print(f"cell {n:+d}: H1 norm {h:.10g}")
    return EXIT_OK


def cmd_translation(cfg: RunConfig) -> int:
    from .lap import lap_solution
    from .translation import build_translation_operator, decompose_trace, operator_spectrum

    ops, f = _setup(cfg)
    ms = _mset(cfg, ops)
    opts = cfg.raw.get("translation", {})
    R = build_translation_operator(
        ms, ops, cfg.k2, opts.get("method", "mode_synthesis"), n_sources=int(opts.get("n_sources", 8)),
        n_cells=int(opts.get("n_cells", 1)), seed=int(opts.get("seed", 0)),
    )
    io.write_matrix_csv(cfg.output / "operator.csv", R.matrix)
    spec = operator_spectrum(R)
    io.write_json(
        cfg.output / "spectrum.json",
        {
            "construction": R.construction,
            "spectral_radius": R.spectral_radius,
            "cross_validation": R.cross_validation,
            "eigenvalues": [{"re": e.eigenvalue.real, "im": e.eigenvalue.imag, "residual": e.residual} for e in spec],
        },
    )
    rows = []
    if f.norm() > 0:
        sol = lap_solution(ops, cfg.k2, f, [1], mset=ms, decompose=False)
        t = sol[1].edge("left")[0]
        for Jt in range(1, len(spec) + 1):
            coef, resid = decompose_trace(t, R, Jt)
            rows.append({"J": Jt, "residual": resid, "coefficients": [[c.real, c.imag] for c in coef]})
    io.write_json(cfg.output / "decomposition.json", {"edge": 1, "rows": rows})
    print(f"spectral radius {R.spectral_radius:.12f}; cross-validation {R.cross_validation:.3e}")
    return EXIT_OK


def cmd_verify_residue(cfg: RunConfig) -> int:
    from .cell import CellField
    from .contour import ContourSpec, contour_integral, residue_at_pole
    from .multipliers import MultiplierClass

    ops, f = _setup(cfg)
    ms = _mset(cfg, ops)
    ns = [int(n) for n in cfg.raw.get("verify_residue", {}).get("n", [1, 2, 3, 4])]
    res = contour_integral(ops, cfg.k2, f, ContourSpec(0.0, float(np.exp(-ms.tau)), cfg.Q), ns, tol_quad=cfg.tol_quad, mset=ms)
    poles = [m for m in ms.items if m.cls == MultiplierClass.EVANESCENT]
    sums = {n: CellField.zeros(ops.basis) for n in ns}
    for m in poles:
        r = residue_at_pole(ops, cfg.k2, f, m.z, n=ns, mset=ms, tol_quad=cfg.tol_quad)
        for n in ns:
            sums[n] = sums[n] + r[n]
    rows = [{"n": n, "contour_norm": res[n].l2_norm(), "discrepancy": (res[n] - sums[n]).l2_norm()} for n in ns]
    io.write_json(cfg.output / "verify_residue.json", {"tau": ms.tau, "poles": len(poles), "contour": res.diagnostics(), "rows": rows})
    for r in rows:
        print(f"n={r['n']}: |contour|={r['contour_norm']:.3e} discrepancy={r['discrepancy']:.3e}")
    return EXIT_OK


def cmd_verify_all(cfg: RunConfig) -> int:
    from .acceptance import run_all

    sel = cfg.raw.get("verify_all", {}).get("criteria")
    results = run_all(sel)
    for r in results:
        print(r.line())
    io.write_json(
        cfg.output / "verify_all.json",
        {"results": [{"criterion": r.number, "name": r.name, "passed": r.passed, "summary": r.summary, "seconds": r.seconds} for r in results]},
    )
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


HANDLERS = {
    "dispersion": cmd_dispersion,
    "multipliers": cmd_multipliers,
    "solve-cell": cmd_solve_cell,
    "lap": cmd_lap,
    "translation": cmd_translation,
    "verify-residue": cmd_verify_residue,
    "verify-all": cmd_verify_all,
}


def _diagnostic(outdir: Path, command: str, code: int, exc: BaseException, message: str | None = None) -> None:
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        io.write_json(
            outdir / "diagnostic.json",
            {"command": command, "exit_code": code, "error": type(exc).__name__, "message": message or str(exc)},
        )
    except OSError:
        pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floquet-lap", description="Floquet-Bloch LAP solver for a periodic strip.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY.PATH=VALUE", help="override a config entry")
    p.add_argument("--out", help="output directory (overrides config 'output')")
    p.add_argument("--threads", type=int, help=f"cap on solver threads (also via {ENV_VAR})")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ[ENV_VAR] = str(max(1, args.threads))
    outdir = Path(args.out) if args.out else Path(DEFAULTS["output"])
    try:
        raw = load_config(args.config, args.overrides)
        if args.out:
            raw["output"] = args.out
        outdir = Path(raw["output"])
        cfg = RunConfig.from_dict(raw)
        cfg.output.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _diagnostic(outdir, args.command, EXIT_VALIDATION, exc)
        return EXIT_VALIDATION

    from .lap import AssumptionViolation

    try:
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _diagnostic(cfg.output, args.command, EXIT_VALIDATION, exc)
        return EXIT_VALIDATION
    except AssumptionViolation as exc:
        print("error: P0 nonempty", file=sys.stderr)
        _diagnostic(cfg.output, args.command, EXIT_ASSUMPTION, exc, "P0 nonempty")
        return EXIT_ASSUMPTION
    except Exception as exc:  # numerical failures of any kind map to one exit code
        print(f"numerical failure: {exc}", file=sys.stderr)
        _diagnostic(cfg.output, args.command, EXIT_NUMERICAL, exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
