"""
Command-line entry point.

    apfix check     [--model FILE | --example N] [--A x]
    apfix solve     [--model FILE | --example N] [--A x] [--out DIR] [--force] [tolerances]
    apfix verify    [--model FILE | --example N] [--solution CSV] [--out DIR]
    apfix reproduce --example {1,2} [--out DIR]

Exit codes: 0 success, 1 hypothesis failure, 2 solve refused, 3 missing
artifact, 4 internal numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import builtin
from . import fixedpoint as fp
from . import model as mdl
from . import verify as vf
from .errors import ApfixError, HypothesisViolation, RegimeUnsupported, SandwichViolation
from .grid import GridFunction

log = logging.getLogger("apfix")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_REFUSED, EXIT_MISSING, EXIT_NUMERIC = 0, 1, 2, 3, 4

# acceptance thresholds for `verify`
ODE_TOL = 1e-3
VOC_TOL = 1e-3


@dataclass
class RunConfig:
    command: str
    model: mdl.ModelParams
    A: float
    source: str
    gap_tol: float = 1e-6
    tail_tol: float = 1e-10
    quad_dt: float | None = None
    dde_step: float | None = None
    window: tuple[float, float] = (0.0, 40.0)
    horizon: float = 20.0
    output_dir: Path | None = None
    force: bool = False
    slack: float = 0.0
    solution: Path | None = None

    def __post_init__(self):
        for name in ("gap_tol", "tail_tol", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("quad_dt", "dde_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def settings(self) -> fp.SolveSettings:
        return fp.SolveSettings(gap_tol=self.gap_tol, tail_tol=self.tail_tol, quad_dt=self.quad_dt,
                                window=self.window)


def _dump(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False, allow_nan=True)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    return text


def _out(cfg: RunConfig, name: str) -> Path | None:
    return None if cfg.output_dir is None else cfg.output_dir / name


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check(cfg: RunConfig) -> tuple[int, mdl.TheoremReport]:
    report = mdl.check(cfg.model, cfg.A, cfg.slack)
    print(_dump(report.to_dict(), _out(cfg, "report.json")))
    if not report.applicable:
        for c in report.failing():
            log.error("failing link: %s (%.10g %s %.10g)", c.name, c.lhs, c.relation, c.rhs)
    return (EXIT_OK if report.applicable else EXIT_HYPOTHESIS), report


def cmd_solve(cfg: RunConfig) -> tuple[int, fp.SolveResult | None]:
    report = mdl.check(cfg.model, cfg.A, cfg.slack)
    if not report.applicable and not cfg.force:
        bad = ", ".join(c.name for c in report.failing())
        log.error("hypotheses fail (%s); refusing to solve without --force", bad)
        return EXIT_REFUSED, None
    try:
        res = fp.solve(cfg.model, cfg.A, cfg.settings(), force=True)
    except SandwichViolation as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC, None
    log.info("solved in %.2f s, %d iterations", res.seconds, res.trace.iterations)
    summary = res.summary()
    summary["residual"] = res.residual()
    if cfg.output_dir is not None:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        res.x.to_csv(cfg.output_dir / "solution.csv")
        res.trace.to_csv(cfg.output_dir / "trace.csv")
        _dump(res.trace.to_dict(), cfg.output_dir / "trace.json")
        _dump(report.to_dict(), cfg.output_dir / "report.json")
    print(_dump(summary, _out(cfg, "summary.json")))
    return (EXIT_OK if res.trace.converged else EXIT_NUMERIC), res


def cmd_verify(cfg: RunConfig, x: GridFunction | None = None) -> tuple[int, vf.ResidualReport | None]:
    if x is None:
        path = cfg.solution or (cfg.output_dir / "solution.csv" if cfg.output_dir else None)
        if path is None or not Path(path).exists():
            log.error("solution file %s not found", path)
            return EXIT_MISSING, None
        x = GridFunction.from_csv(path)
    try:
        rep, traj = vf.verify_solution(cfg.model, x, cfg.horizon, cfg.dde_step)
    except ApfixError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC, None
    d = rep.to_dict()
    d["ode_tol"], d["voc_tol"] = ODE_TOL, VOC_TOL
    if cfg.output_dir is not None:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(cfg.output_dir / "trajectory.csv")
    print(_dump(d, _out(cfg, "residual.json")))
    ok = rep.sup_ode_residual <= ODE_TOL and rep.sup_voc_residual <= VOC_TOL
    return (EXIT_OK if ok else EXIT_NUMERIC), rep


# printed values of the two worked examples and the tolerance each is held to
PRINTED_VALUES = {
    1: [
        ("threshold", 0.0625, 1e-12),
        ("B", 81.14408, 5e-5),
        ("lower ratio (1+A^n)/A^(m-1)", 2.6116, 5e-4),
        ("lower rate sum(lam r-)/b+", 5.75 / 2.2, 1e-12),
        ("upper rate F^s sum(lam r+)/(b*)-", math.exp(1.2 / 200) * 6.4, 1e-12),
        ("upper ratio (1+B^n)/B^(m-1)", 6.4479, 5e-4),
        ("F^s", math.exp(1.2 / 200), 1e-12),
        ("M[b]", 1.0, 1e-12),
        ("b+", 2.2, 1e-12),
        ("(b*)-", 1.0, 1e-12),
    ],
    2: [
        ("threshold", 0.13557, 5e-5),
        ("B", 7.56193, 5e-5),
        ("lower ratio (1+A^n)/A^(m-1)", 2.30866, 5e-5),
        ("sum(lam r-)", 5.75, 1e-12),
        ("upper rate F^s sum(lam r+)/(b*)-", 6.4385, 5e-4),
        ("F^s", math.exp(1.2 / 200), 1e-12),
        ("M[b]", 1.0, 1e-12),
        ("b+", 2.2, 1e-12),
    ],
}


def computed_values(p: mdl.ModelParams, report: mdl.TheoremReport) -> dict[str, float]:
    return {
        "threshold": report.threshold,
        "B": report.B,
        "V": report.V if report.V is not None else math.nan,
        "lower ratio (1+A^n)/A^(m-1)": report.link("lower ratio <= lower rate").lhs,
        "lower rate sum(lam r-)/b+": p.lower_rate,
        "sum(lam r-)": p.lower_rate * p.b_bounds.sup_est,
        "upper rate F^s sum(lam r+)/(b*)-": p.upper_rate,
        "upper ratio (1+B^n)/B^(m-1)": mdl.lower_ratio(report.B, p.m, p.n),
        "F^s": p.osc.F_s,
        "M[b]": p.mean_b,
        "b+": p.b_bounds.sup_est,
        "(b*)-": p.osc.b_star_inf,
    }


def cmd_reproduce(cfg: RunConfig, ex_id: int) -> tuple[int, dict]:
    if ex_id not in PRINTED_VALUES:
        raise ValueError(f"reproduce supports examples 1 and 2, got {ex_id}")
    p, A = builtin.example(ex_id)
    cfg.model, cfg.A = p, A
    report = mdl.check(p, A)
    comp = computed_values(p, report)
    rows = []
    for name, printed, tol in PRINTED_VALUES[ex_id]:
        c = comp[name]
        rows.append({"quantity": name, "printed": printed, "computed": c,
                     "abs_diff": abs(c - printed), "tol": tol, "ok": abs(c - printed) <= tol})

    res = fp.solve(p, A, cfg.settings())
    upper = res.report.V if res.truncated else res.upper
    rows.append({"quantity": "min x >= A", "printed": A, "computed": res.x.inf,
                 "abs_diff": max(0.0, A - res.x.inf), "tol": 1e-6, "ok": res.x.inf >= A - 1e-6})
    rows.append({"quantity": "max x <= " + ("V" if res.truncated else "B"), "printed": upper,
                 "computed": res.x.sup, "abs_diff": max(0.0, res.x.sup - upper), "tol": 1e-5,
                 "ok": res.x.sup <= upper + 1e-5})
    rep, traj = vf.verify_solution(p, res.x, cfg.horizon, cfg.dde_step)

    out = {
        "example": ex_id,
        "theorem": report.theorem,
        "applicable": report.applicable,
        "rows": rows,
        "solve": {k: v for k, v in res.summary().items()},
        "fixed_point_residual": res.residual(),
        "verify": rep.to_dict(),
    }
    if cfg.output_dir is not None:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        res.x.to_csv(cfg.output_dir / f"example{ex_id}_solution.csv")
        res.trace.to_csv(cfg.output_dir / f"example{ex_id}_trace.csv")
        _dump(out, cfg.output_dir / f"example{ex_id}_reproduce.json")

    print(f"Example {ex_id}: theorem {report.theorem}, applicable={report.applicable}")
    print(f"{'quantity':<36}{'printed':>16}{'computed':>20}{'|diff|':>12}  ok")
    for r in rows:
        print(f"{r['quantity']:<36}{r['printed']:>16.8g}{r['computed']:>20.12g}{r['abs_diff']:>12.3e}  "
              f"{'yes' if r['ok'] else 'NO'}")
    print(f"iterations {res.trace.iterations}, final gap {res.trace.final_gap:.3e}, "
          f"|Phi(x)-x| {out['fixed_point_residual']:.3e}")
    print(f"ode residual {rep.sup_ode_residual:.3e}, voc residual {rep.sup_voc_residual:.3e}, "
          f"drift {rep.sup_drift:.3e} over {rep.drift_horizon:g}")

    ok = (report.applicable and all(r["ok"] for r in rows) and res.trace.converged
          and rep.sup_ode_residual <= ODE_TOL and rep.sup_voc_residual <= VOC_TOL)
    if not report.applicable:
        return EXIT_HYPOTHESIS, out
    return (EXIT_OK if ok else EXIT_NUMERIC), out


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apfix", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--model", type=Path, help="model config JSON")
        src.add_argument("--example", type=int, help="built-in example id (0, 1, 2)")
        sp.add_argument("--A", type=float, help="lower end of the bracket (overrides the config)")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--gap-tol", type=float, default=1e-6)
        sp.add_argument("--tail-tol", type=float, default=1e-10)
        sp.add_argument("--quad-dt", type=float, default=None,
                        help="grid step (default: fastest period / 160)")
        sp.add_argument("--dde-step", type=float, default=None, help="RK4 step (default: grid step)")
        sp.add_argument("--window", type=float, nargs=2, default=(0.0, 40.0), metavar=("W0", "W1"))
        sp.add_argument("--horizon", type=float, default=20.0)
        sp.add_argument("--slack", type=float, default=0.0, help="slack on non-strict comparisons")
        sp.add_argument("--force", action="store_true", help="solve even if hypotheses fail")

    common(sub.add_parser("check", help="check the theorem hypotheses"))
    common(sub.add_parser("solve", help="compute the almost-periodic solution"))
    sp = sub.add_parser("verify", help="validate a solution CSV against the ODE")
    common(sp)
    sp.add_argument("--solution", type=Path, help="solution CSV (default: OUT/solution.csv)")
    common(sub.add_parser("reproduce", help="reproduce a worked example end to end"))
    return parser


def config_from_args(args) -> RunConfig:
    if args.model is not None:
        if not args.model.exists():
            raise FileNotFoundError(args.model)
        p, A = mdl.load_config(args.model)
        source = str(args.model)
    else:
        ex = 1 if args.example is None else args.example
        p, A = builtin.example(ex)
        source = f"example {ex}"
    if args.A is not None:
        A = args.A
    if A is None:
        raise ValueError("no A given: set it in the config or pass --A")
    return RunConfig(
        command=args.command, model=p, A=A, source=source, gap_tol=args.gap_tol,
        tail_tol=args.tail_tol, quad_dt=args.quad_dt, dde_step=args.dde_step,
        window=tuple(args.window), horizon=args.horizon, output_dir=args.out, force=args.force,
        slack=args.slack, solution=getattr(args, "solution", None))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "reproduce" and args.example not in PRINTED_VALUES:
        parser.error("reproduce needs --example 1 or --example 2")
    try:
        cfg = config_from_args(args)
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return EXIT_MISSING
    except (KeyError, ValueError) as exc:
        parser.error(str(exc))

    try:
        if args.command == "check":
            return cmd_check(cfg)[0]
        if args.command == "solve":
            return cmd_solve(cfg)[0]
        if args.command == "verify":
            return cmd_verify(cfg)[0]
        return cmd_reproduce(cfg, args.example)[0]
    except (RegimeUnsupported, HypothesisViolation) as exc:
        log.error("%s", exc)
        return EXIT_HYPOTHESIS
    except ApfixError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
