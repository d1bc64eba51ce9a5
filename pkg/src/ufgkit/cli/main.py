"""Command line entry point: ``ufgkit <command> --model FILE [options]``.

Exit codes: 0 success, 2 a verification failed, 1 an error occurred.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import resources

from ..liealg import index_label
from ..rates import RateError, certified_rate, optimize_small_system, recheck_small_system
from ..sdesim.model import SdeError
from ..sdesim.montecarlo import check_reachability_contraction, squared_derivative_decay
from ..ufgcheck import (
    DilationError,
    UfgError,
    check_dilation,
    check_v0_condition,
    solve_certificate,
    verify_certificate,
)
from . import report as rep
from .modelfile import ModelError, grid_times, load_model

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
COMMANDS = ("check-ufg", "rate", "decay", "reach", "all")


def resolve_model_path(name: str) -> str:
    """A path on disk, or the name of a bundled model (``grusin``, ``heisenberg``, ...)."""
    if os.path.exists(name):
        return name
    bundled = resources.files("ufgkit") / "models" / (name if name.endswith(".model") else name + ".model")
    if bundled.is_file():
        return str(bundled)
    raise FileNotFoundError(f"no model file {name!r}")


class Session:
    """Lazily computed pipeline stages shared between commands."""

    def __init__(self, mf, args):
        self.mf = mf
        self.params = dict(mf.parameters)
        run = mf.run
        self.m = args.m if args.m is not None else run.m
        self.paths = args.paths if args.paths is not None else run.paths
        self.dt = args.dt if args.dt is not None else run.dt
        self.seed = args.seed if args.seed is not None else run.seed
        self.tol = args.tol if args.tol is not None else run.tol
        self.times = grid_times(*(args.t_grid or run.t_grid))
        self.report = {"model": {"name": mf.name, "dim": mf.dim, "noises": mf.noises,
                                 "parameters": self.params, "fields": [list(c) for c in mf.fields]},
                       "settings": {"m": self.m, "paths": self.paths, "dt": self.dt, "seed": self.seed,
                                    "tol": self.tol, "t_grid": self.times}}
        self.series = {}
        self._ufg = self._rate = None

    # stages ----------------------------------------------------------------
    def ufg(self):
        """``(hierarchy, certificate or None)``; fills the ufg section once."""
        if self._ufg is None:
            h = self.mf.hierarchy(self.m)
            sec = {"m": h.m, "basis": [rep.field_label(b) for b in h.basis]}
            cert = self.mf.parsed_certificate(h.m)
            sec["source"] = "file" if cert is not None else "solved"
            try:
                cert = verify_certificate(h, cert, self.params) if cert else solve_certificate(h, params=self.params)
                sec["status"] = "verified"
                sec["certificate"] = rep.certificate_rows(cert)
                sec["ansatz"] = {index_label(r): a for r, a in sorted(cert.ansatz.items())}
            except UfgError as exc:
                cert = None
                sec["status"] = "failed"
                sec["error"] = rep.error_entry(exc)
            sec["bracket_table"] = rep.bracket_table(h, cert)
            v0 = check_v0_condition(h)
            sec["v0_condition"] = {"ok": v0.ok, "residual_norm": v0.residual_norm,
                                   "coefficients": {rep.field_label(b): c.to_string() for b, c in v0.coefficients.items()},
                                   "failing_components": list(v0.failing_components)}
            self.report["ufg"] = sec
            try:
                dil = check_dilation(h, self.params)
                self.report["dilation"] = {"status": "ok", "lambda0": dil.lambda0,
                                           "factors": {rep.field_label(b): c.to_string() for b, c in dil.factors.items()}}
            except DilationError as exc:
                dil = None
                self.report["dilation"] = {"status": "failed", "error": rep.error_entry(exc)}
            self._ufg = (h, cert, dil)
        return self._ufg

    def rate(self) -> float | None:
        """Best certified rate, or None; fills the rate section once."""
        if self._rate is None:
            h, cert, dil = self.ufg()
            sec = {}
            best = None
            if cert is None:
                sec["status"] = "no certificate"
            elif dil is None:
                sec["status"] = "no rate: dilation condition fails"
            else:
                try:
                    gen = certified_rate(h, cert, dil, self.params)
                    sec["generic"] = gen.to_dict()
                    best = gen.lam
                except RateError as exc:
                    sec["generic"] = {"error": rep.error_entry(exc)}
                if h.m <= 2:
                    try:
                        opt = optimize_small_system(h, cert, dil, self.params)
                        sec["optimized"] = opt.to_dict()
                        sec["optimized"]["recheck"] = recheck_small_system(opt)
                        if opt.lam is not None and (best is None or opt.lam > best):
                            best = opt.lam
                    except RateError as exc:
                        sec["optimized"] = {"error": rep.error_entry(exc)}
                sec["status"] = "certified" if best is not None else "not certified"
            sec["certified_lambda"] = best
            self.report["rate"] = sec
            self._rate = (best,)
        return self._rate[0]

    def decay(self) -> bool:
        lam = self.rate()
        model, f, x = self.mf.sde_model(), self.mf.test_callable(), self.mf.base_point()
        sec = {"target_lambda": lam, "threshold": None if lam is None else (1.0 - self.tol) * lam,
               "directions": {}}
        ok = lam is not None
        for alpha in self.mf.directions():
            label = index_label(alpha)
            est = squared_derivative_decay(model, f, x, alpha, self.times, self.mf.run.fd_step,
                                           self.paths, self.dt, self.seed)
            entry = est.to_dict()
            passed = lam is not None and est.fitted_exponent >= (1.0 - self.tol) * lam
            entry["verdict"] = "PASS" if passed else "FAIL"
            ok = ok and passed
            sec["directions"][label] = entry
            self.series[label] = est
        sec["verdict"] = "PASS" if ok else "FAIL"
        if lam is None:
            sec["reason"] = "no certified rate"
        self.report["decay"] = sec
        return ok

    def reach(self) -> bool:
        if not self.mf.run.chain:
            raise ModelError("reach needs a [run] chain")
        lam = self.rate()
        model, f, x = self.mf.sde_model(), self.mf.test_callable(), self.mf.base_point()
        est = check_reachability_contraction(model, f, x, list(self.mf.run.chain), self.times,
                                             self.paths, self.dt, self.seed)
        # the difference is first order in the gradient, so it decays at half the rate
        threshold = None if lam is None else (1.0 - self.tol) * lam / 2.0
        ok = threshold is not None and est.fitted_exponent >= threshold
        sec = est.to_dict()
        sec.update({"chain": [[index_label(a), s] for a, s in self.mf.run.chain],
                    "target": est.extra["target"], "threshold": threshold,
                    "verdict": "PASS" if ok else "FAIL"})
        if lam is None:
            sec["reason"] = "no certified rate"
        self.report["reach"] = sec
        self.series["reach"] = est
        return ok


def run_command(command: str, sess: Session) -> bool:
    if command == "check-ufg":
        return sess.ufg()[1] is not None
    if command == "rate":
        return sess.rate() is not None
    if command == "decay":
        return sess.decay()
    if command == "reach":
        return sess.reach()
    ok = sess.ufg()[1] is not None
    ok = (sess.rate() is not None) and ok
    ok = sess.decay() and ok
    if sess.mf.run.chain:
        ok = sess.reach() and ok
    return ok


def _t_grid(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected start,stop,step")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ufgkit", description="Bracket certificates, decay rates and Monte Carlo checks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True, help="model file or bundled model name")
    p.add_argument("--m", type=int, help="bracket order")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--t-grid", type=_t_grid, help="start,stop,step")
    p.add_argument("--out", help="directory for report.json and decay CSVs (default: JSON to stdout)")
    p.add_argument("--tol", type=float, help="relative tolerance on fitted rates")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = {"command": args.command}
    sess = None
    try:
        mf = load_model(resolve_model_path(args.model))
        sess = Session(mf, args)
        sess.report["command"] = args.command
        ok = run_command(args.command, sess)
        report = sess.report
        report["verdict"] = "PASS" if ok else "FAIL"
        code = EXIT_OK if ok else EXIT_FAIL
    except (ModelError, UfgError, DilationError, RateError, SdeError, ValueError, OSError) as exc:
        if sess is not None:
            report = sess.report
        report["verdict"] = "ERROR"
        report["error"] = rep.error_entry(exc)
        print(f"error [{report['error']['module']}] {exc}", file=sys.stderr)
        code = EXIT_ERROR
    if args.out:
        series = sess.series if sess is not None else {}
        for path in rep.write_outputs(report, args.out, series):
            print(path)
        print(f"verdict: {report['verdict']}")
    else:
        sys.stdout.write(rep.dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
