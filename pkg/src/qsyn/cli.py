"""Command-line front end.

::

    qsyn check-pr <config>
    qsyn synth-h2 <config> --out <dir>
    qsyn eval <config> --controller <file>

Exit codes: 0 success (verdict true), 1 verdict false, 2 usage or config
error, 3 numerical failure.  ``QSYN_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, QsynError
from .lti import FrequencyGrid, PartitionedPlant, StateSpace, freqresp, lft_lower, static
from .oqho import OqhoParams, check_ito_feedthrough, check_physical_realizability, realize
from .synth import (
    PgdOptions,
    build_problem,
    certify_admissible,
    closed_loop_costs,
    fit_rational_q,
    init_q_static,
    pgd_run,
    unstabilizability_check,
)
from .youla import check_bezout, check_internal_stability, coprime_factorize, repair_general_bezout

log = logging.getLogger("qsyn")

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


# -- configuration ------------------------------------------------------------


@dataclass
class ProblemConfig:
    plant: PartitionedPlant
    oqho: OqhoParams | None
    W_in: StateSpace
    W_out: StateSpace
    grid: FrequencyGrid
    pgd: PgdOptions
    fit_order: int = 4
    fit_poles: list | None = None
    tolerances: dict = field(default_factory=dict)
    name: str = ""


_DEFAULT_TOLS = {"pr": 1e-8, "bezout": 1e-7, "init": 1e-8, "certify": 1e-6, "no_go": 1e-8}
_PGD_KEYS = ("alpha", "max_iters", "tol", "seed", "passband_fraction", "residual_tol", "max_halvings", "precondition")


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"missing field '{where}{key}'")
    return d[key]


def _matrix(value, where: str) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{where}' is not a numeric matrix") from exc
    return a


def _state_space(d: dict, where: str) -> StateSpace:
    mats = [_matrix(_require(d, k, where + "."), f"{where}.{k}") for k in "ABCD"]
    try:
        return StateSpace(*mats)
    except QsynError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _weight(spec, size: int, where: str) -> StateSpace:
    if spec is None:
        spec = "identity"
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"field '{where}' must be a preset name or an object")
    if "preset" in spec:
        name = spec["preset"]
        wc = float(spec.get("bandwidth", 1.0))
        eye = np.eye(size)
        if name == "identity":
            return static(eye)
        if name == "lowpass1":
            return StateSpace(-wc * eye, wc * eye, eye, np.zeros((size, size)))
        if name == "lowpass2":
            a = np.kron(eye, np.array([[-wc, 0.0], [wc, -wc]]))
            b = np.kron(eye, np.array([[wc], [0.0]]))
            c = np.kron(eye, np.array([[0.0, 1.0]]))
            return StateSpace(a, b, c, np.zeros((size, size)))
        raise ConfigError(f"unknown weight preset '{name}' in '{where}'")
    w = _state_space(spec, where)
    if w.shape != (size, size):
        raise ConfigError(f"'{where}' must be {size}x{size}")
    return w


def parse_config(doc: dict, name: str = "") -> ProblemConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    plant_doc = _require(doc, "plant", "")
    part = _require(plant_doc, "partition", "plant.")
    dims = [int(_require(part, k, "plant.partition.")) for k in ("m_r", "m_u", "p_z", "p_y")]
    if any(x % 2 for x in dims):
        raise ConfigError("partition sizes must be even")
    forms = [k for k in ("oqho", "state_space") if k in plant_doc]
    if len(forms) != 1:
        raise ConfigError("plant needs exactly one of 'oqho' or 'state_space'")
    oq = None
    try:
        if forms[0] == "oqho":
            o = plant_doc["oqho"]
            oq = OqhoParams(*(_matrix(_require(o, k, "plant.oqho."), f"plant.oqho.{k}") for k in ("theta", "D", "M", "R")))
            sys_ = realize(oq)
        else:
            sys_ = _state_space(plant_doc["state_space"], "plant.state_space")
        plant = PartitionedPlant(sys_, *dims)
    except ConfigError:
        raise
    except (QsynError, ValueError) as exc:
        raise ConfigError(f"plant: {exc}") from exc

    w = doc.get("weights", {}) or {}
    w_in = _weight(w.get("W_in"), plant.m_r, "weights.W_in")
    w_out = _weight(w.get("W_out"), plant.p_z, "weights.W_out")

    g = doc.get("grid", {}) or {}
    grid = FrequencyGrid.logspace(
        float(g.get("wmin", 1e-2)), float(g.get("wmax", 1e3)), int(g.get("points", 200)), True, True
    )
    p = doc.get("pgd", {}) or {}
    unknown = set(p) - set(_PGD_KEYS)
    if unknown:
        raise ConfigError(f"unknown pgd option(s): {sorted(unknown)}")
    pgd = PgdOptions(**{k: p[k] for k in _PGD_KEYS if k in p})
    fit = doc.get("fit", {}) or {}
    tols = dict(_DEFAULT_TOLS)
    tols.update(doc.get("tolerances", {}) or {})
    return ProblemConfig(plant, oq, w_in, w_out, grid, pgd, int(fit.get("order", 4)), fit.get("poles"), tols, name)


def load_config(path: str, args=None) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if args is not None:
        doc.setdefault("pgd", {})
        doc.setdefault("grid", {})
        for flag, key in (("seed", "seed"), ("alpha", "alpha"), ("max_iters", "max_iters"), ("tol", "tol")):
            val = getattr(args, flag, None)
            if val is not None:
                doc["pgd"][key] = val
        if getattr(args, "grid_points", None) is not None:
            doc["grid"]["points"] = args.grid_points
    return parse_config(doc, Path(path).name)


# -- reporting ----------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def write_freq_csv(path: Path, sys_: StateSpace, grid: FrequencyGrid) -> None:
    vals = freqresp(sys_, grid.omegas)
    p, m = sys_.shape
    header = ["omega"]
    for i in range(p):
        for j in range(m):
            header += [f"re_{i}_{j}", f"im_{i}_{j}"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for w, v in zip(grid.omegas, vals):
            row = [repr(float(w))]
            for i in range(p):
                for j in range(m):
                    row += [repr(float(v[i, j].real)), repr(float(v[i, j].imag))]
            wr.writerow(row)


def _pr_section(sys_: StateSpace, grid, tol) -> dict:
    if sys_.inputs != sys_.outputs or sys_.inputs % 2:
        return {"verdict": False, "reason": "not square with an even number of channels"}
    return check_physical_realizability(sys_, grid, tol).as_dict()


# -- commands -----------------------------------------------------------------


def cmd_check_pr(cfg: ProblemConfig) -> tuple[dict, int]:
    sys_ = cfg.plant.sys
    tol = cfg.tolerances["pr"]
    pr = _pr_section(sys_, cfg.grid, tol)
    pz = cfg.plant.p_z
    ito = {
        "z_rows": check_ito_feedthrough(sys_.D[:pz], tol),
        "y_rows": check_ito_feedthrough(sys_.D[pz:], tol),
    }
    report = {"command": "check-pr", "config": cfg.name, "pr": pr, "ito_feedthrough": ito}
    return report, EXIT_OK if pr["verdict"] else EXIT_FALSE


def cmd_synth_h2(cfg: ProblemConfig, out: Path) -> tuple[dict, int]:
    timing = {}
    t0 = time.perf_counter()
    tols = cfg.tolerances
    plant = cfg.plant
    report = {"command": "synth-h2", "config": cfg.name, "seed": cfg.pgd.seed}
    report["plant_pr"] = _pr_section(plant.sys, cfg.grid, tols["pr"])

    nogo = unstabilizability_check(plant.P22, cfg.grid, tols["no_go"])
    report["no_go"] = {"positive": nogo.positive, "residual": nogo.residual, "tol": nogo.tol, "explanation": nogo.explanation}
    if nogo.positive:
        report["status"] = "aborted: " + nogo.explanation
        return report, EXIT_FALSE

    rng = np.random.default_rng(cfg.pgd.seed)
    f = coprime_factorize(plant.P22, rng=rng)
    bez = check_bezout(f, cfg.grid, tols["bezout"])
    repaired = False
    if not bez.ok:
        f = repair_general_bezout(f)
        bez = check_bezout(f, cfg.grid, tols["bezout"])
        repaired = True
    report["bezout"] = {"residual": bez.residual, "factorization_residual": bez.factorization_residual,
                        "tol": bez.tol, "ok": bez.ok, "repaired": repaired}
    problem = build_problem(plant, f, cfg.W_in, cfg.W_out, cfg.grid)
    timing["setup"] = time.perf_counter() - t0

    init = init_q_static(f, problem.cd, cfg.pgd.seed, cfg.pgd.init_attempts, tols["init"])
    report["init"] = {"ok": init.ok, "residual": init.residual, "message": init.message,
                      "K_inf": init.K_inf if init.K_inf is not None else None}
    if not init.ok:
        report["status"] = "initialization failed"
        return report, EXIT_NUMERIC

    t1 = time.perf_counter()
    res = pgd_run(problem, init.Q, cfg.pgd)
    timing["pgd"] = time.perf_counter() - t1
    st = res.state
    report["pgd"] = {
        "converged": res.converged,
        "message": res.message,
        "iterations": st.iteration,
        "cost": st.cost,
        "constraint_residual": st.constraint_residual,
        "skipped_frequencies": res.skipped_frequencies,
        "passband_points": int(np.sum(st.mask)),
        "history": res.history,
    }

    fit = fit_rational_q(st.Q, cfg.fit_poles, cfg.fit_order, mask=st.mask)
    report["fit"] = {"residual": fit.residual, "condition": fit.condition, "states": fit.sys.n}
    cert = certify_admissible(fit.sys, f, cfg.grid, tols["certify"], problem.cd)
    report["certificate"] = cert.as_dict()

    out.mkdir(parents=True, exist_ok=True)
    (out / "q.json").write_text(dump_report(fit.sys.to_dict()))
    status = EXIT_OK if cert.admissible else EXIT_FALSE
    if cert.controller is not None:
        k = cert.controller
        (out / "controller.json").write_text(dump_report(k.to_dict()))
        costs = closed_loop_costs(plant, k, cfg.W_in, cfg.W_out, cfg.grid)
        report["costs"] = {"h2": costs["h2"], "hinf": costs["hinf"]}
        report["controller"] = k.to_dict()
        write_freq_csv(out / "K_freq.csv", k, cfg.grid)
        write_freq_csv(out / "G_freq.csv", lft_lower(plant, k), cfg.grid)
    report["status"] = "certified" if cert.admissible else "certificate failed"
    timing["total"] = time.perf_counter() - t0
    report["timing"] = timing
    (out / "report.json").write_text(dump_report(report))
    return report, status


def cmd_eval(cfg: ProblemConfig, controller_path: str) -> tuple[dict, int]:
    try:
        doc = json.loads(Path(controller_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read controller: {exc}") from exc
    k = _state_space(doc, "controller")
    plant = cfg.plant
    if k.shape != (plant.m_u, plant.p_y):
        raise ConfigError(f"controller must be {plant.m_u}x{plant.p_y}")
    stab = check_internal_stability(plant.P22, k)
    costs = closed_loop_costs(plant, k, cfg.W_in, cfg.W_out, cfg.grid)
    report = {
        "command": "eval",
        "config": cfg.name,
        "internally_stable": stab.stable,
        "closed_loop_abscissa": stab.abscissa,
        "controller_pr": _pr_section(k, cfg.grid, cfg.tolerances["pr"]),
        "costs": {"h2": costs["h2"], "hinf": costs["hinf"]},
    }
    if not stab.stable:
        report["warning"] = "closed loop is unstable; costs are grid values of a divergent system"
    return report, EXIT_OK if stab.stable else EXIT_FALSE


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsyn", description="Coherent quantum controller synthesis")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--grid-points", type=int, dest="grid_points")
        p.add_argument("--alpha", type=float)
        p.add_argument("--max-iters", type=int, dest="max_iters")
        p.add_argument("--tol", type=float)

    common(sub.add_parser("check-pr", help="physical realizability of the plant"))
    p = sub.add_parser("synth-h2", help="weighted H2 coherent synthesis")
    common(p)
    p.add_argument("--out", required=True)
    p = sub.add_parser("eval", help="closed-loop evaluation of a controller")
    common(p)
    p.add_argument("--controller", required=True)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("QSYN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args)
        if args.command == "check-pr":
            report, code = cmd_check_pr(cfg)
        elif args.command == "synth-h2":
            report, code = cmd_synth_h2(cfg, Path(args.out))
        else:
            report, code = cmd_eval(cfg, args.controller)
    except ConfigError as exc:
        print(f"qsyn: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QsynError, np.linalg.LinAlgError) as exc:
        print(f"qsyn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(dump_report(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
