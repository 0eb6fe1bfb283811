"""Command-line front end: ``clusterldp <command> --model model.json ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import branching, flory, graphsim, rates, solvers, trees, verify
from .config import ModelConfig, load_model
from .measures import MacroMeasure, MicroMeasure, ModelError, irreducible_classes

log = logging.getLogger("clusterldp")

STOCHASTIC = {"simulate", "verify"}
SUITES = ("giant-lln", "micro-lln", "connectivity-rate", "macro-connection")


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _num(x):
    """JSON-safe scalar or list."""
    return verify._jsonable(x)


def _dump_json(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=False) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _type_index(model: ModelConfig, label: str) -> int:
    if label in model.types.labels:
        return model.types.labels.index(label)
    try:
        r = int(label)
    except ValueError:
        raise UsageError(f"unknown type {label!r}; known: {list(model.types.labels)}") from None
    if not 0 <= r < model.ntypes:
        raise UsageError(f"type index {r} out of range")
    return r


def _parse_k(model: ModelConfig, text: str) -> tuple:
    k = tuple(_ints(text))
    if len(k) != model.ntypes or any(v < 0 for v in k):
        raise UsageError(f"--k needs {model.ntypes} nonnegative counts, got {text!r}")
    return k


def cmd_simulate(model: ModelConfig, args) -> tuple:
    N = args.N or 1000
    kappa_N = model.kappa_N(N)
    counts = graphsim.type_counts_for(model.mu, N)
    kmax = args.kmax or 10
    rho = solvers.solve_survival(model.kappa_limit(), model.mu).solution
    theory_giant = float((rho * model.mu).sum())
    cstar = solvers.solve_characteristic(model.kappa_limit(), model.mu).solution
    lam = rates.lambda_c(cstar, model.kappa_limit(), 1).measure
    theory_iso = sum(lam.atoms.values())

    def run(i, rng):
        g = graphsim.sample_graph(N, counts, kappa_N, rng=rng)
        st = graphsim.component_stats(g, args.epsilon, ntypes=model.ntypes)
        sizes = st.configs.sum(axis=1)
        hist = np.bincount(np.minimum(sizes, kmax + 1), minlength=kmax + 2)[1:]
        iso = float(np.sum(sizes == 1)) / N
        giant = st.largest() / N
        return [i, N, len(g.edges), len(sizes), float(giant.sum()), theory_giant, iso, theory_iso,
                *[float(v) for v in giant], len(st.macro), *[int(v) for v in hist]]

    rows = graphsim.map_replicas(run, args.seed, args.replicas or 10, args.threads)
    header = ["replica", "N", "edges", "components", "giant_fraction", "theory_giant_fraction",
              "isolated_fraction", "theory_isolated_fraction",
              *[f"giant_{t}" for t in model.types.labels], "macro_components",
              *[f"size_{s}" for s in range(1, kmax + 1)], f"size_gt_{kmax}"]
    return "simulate.csv", _dump_csv(header, rows), 0


def cmd_exact_dist(model: ModelConfig, args) -> tuple:
    N = args.N or 4
    counts = graphsim.type_counts_for(model.mu, N)
    dist = graphsim.exact_micro_distribution(N, counts, model.kappa_N(N))
    out = {graphsim.profile_key(dict(prof)): p for prof, p in
           sorted(dist.items(), key=lambda kv: -kv[1])}
    return "exact-dist.json", _dump_json(out), 0


def cmd_tau(model: ModelConfig, args) -> tuple:
    if not args.k:
        raise UsageError("tau needs --k, e.g. --k 2,1")
    k = _parse_k(model, args.k)
    out = {"k": list(k)}
    routes = (("enumeration", trees.tau_enumerate), ("matrix_tree", trees.tau_matrix_tree),
              ("closed_form", trees.tau_closed_form))
    for name, fn in routes:
        try:
            out[name] = fn(k, model.kappa).value
        except trees.BudgetExceeded as exc:
            out[name] = None
            out[f"{name}_skipped"] = str(exc)
    out["log_tau"] = trees.log_tau_closed_form(k, model.kappa)
    return "tau.json", _dump_json(out), 0


def cmd_solve(model: ModelConfig, args) -> tuple:
    kappa = model.kappa_limit()
    tol = args.tol or solvers.DEFAULT_TOL
    c = np.array(_floats(args.c)) if args.c else model.mu
    if c.size != model.ntypes:
        raise UsageError(f"--c needs {model.ntypes} entries")
    surv = solvers.solve_survival(kappa, model.mu, tol)
    char = solvers.solve_characteristic(kappa, model.mu, tol)
    bstar = solvers.solve_b_star(kappa, c, tol)
    out = {
        "types": list(model.types.labels),
        "sigma": surv.sigma,
        "regime": surv.regime,
        "rho": surv.solution,
        "c_star": char.solution,
        "sigma_c_star": solvers.sigma(kappa, char.solution),
        "c": c,
        "b_star": bstar.solution,
        "sigma_b_star": bstar.extra["sigma_b"],
        "residuals": {"survival": surv.residual, "characteristic": char.residual,
                      "b_star": bstar.residual},
        "iterations": {"survival": surv.iterations, "b_star": bstar.iterations},
        "gelation_time": flory.gelation_time(model.mu, kappa),
        "classes": [[model.types.labels[i] for i in cls]
                    for cls in irreducible_classes(kappa, model.mu)],
    }
    return "solve.json", _dump_json(out), 0


def _rate_json(rv: rates.RateValue) -> dict:
    return {"value": rv.value, "reason": rv.reason, "breakdown": rv.breakdown}


def cmd_rate(model: ModelConfig, args) -> tuple:
    if not args.input:
        raise UsageError("rate needs --input with {\"lambda\": [...], \"alpha\": [...]}")
    try:
        data = json.loads(Path(args.input).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{args.input}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        lam = MicroMeasure({tuple(a["k"]): float(a["weight"]) for a in data.get("lambda", [])},
                           model.ntypes)
        alpha = MacroMeasure(tuple(np.asarray(y, dtype=float) for y in data.get("alpha", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.input}: malformed lambda/alpha entry: {exc}") from None
    kappa = model.kappa_limit()
    mu = model.mu
    nu = (np.asarray(data["nu"], dtype=float) if "nu" in data
          else np.maximum(mu - rates.integrated_config(lam) - rates.integrated_config(alpha, mu.size), 0))
    out = {
        "I_Mi": _rate_json(rates.rate_micro(lam, mu, kappa)),
        "I_Ma": _rate_json(rates.rate_macro(alpha, mu, kappa)),
        "I_Me": _rate_json(rates.rate_meso(nu, mu, kappa)),
        "I": _rate_json(rates.rate_total(lam, alpha, mu, kappa, reducible=args.reducible)),
        "contracted_micro": _rate_json(rates.contracted_micro(lam, mu, kappa)),
        "contracted_macro": _rate_json(rates.contracted_macro(alpha, mu, kappa)),
    }
    return "rate.json", _dump_json(out), 0


def cmd_minimize(model: ModelConfig, args) -> tuple:
    kappa = model.kappa_limit()
    m = rates.minimize_rate(model.mu, kappa, args.kmax or rates.DEFAULT_KMAX)
    atoms = sorted(m.micro.measure.atoms.items(), key=lambda kv: (sum(kv[0]), kv[0]))
    out = {
        "regime": m.regime,
        "sigma": solvers.sigma(kappa, model.mu),
        "c_star": m.c_star,
        "macro": [y for y in m.macro.atoms],
        "value": m.value.value,
        "breakdown": m.value.breakdown,
        "reducible": m.reducible,
        "kmax": m.micro.kmax,
        "micro_partial_mass": m.micro.partial_mass,
        "micro_total_mass": m.micro.total_mass,
        "micro_tail_bound": m.micro.tail_bound,
        "tail_flag": m.micro.flag,
        "micro": [{"k": list(k), "weight": w} for k, w in atoms],
    }
    return "minimize.json", _dump_json(out), 0


def cmd_borel(model: ModelConfig, args) -> tuple:
    r = _type_index(model, args.r) if args.r else 0
    params = branching.BorelParams(model.kappa_limit(), model.mu)
    rows, partial, tail, flag = branching.borel_table(params, r, args.kmax or 20)
    rho = solvers.solve_survival(params.kappa, params.nu).solution[r]
    cum = 0.0
    table = []
    for k, p in sorted(rows, key=lambda kv: (sum(kv[0]), kv[0])):
        cum += p
        table.append([".".join(map(str, k)), sum(k), p, cum, 1 - rho, tail])
    header = ["k", "size", "pmf", "partial_sum", "theory_extinction", "tail_bound"]
    return "borel.csv", _dump_csv(header, table), 0


def cmd_flory(model: ModelConfig, args) -> tuple:
    times = _floats(args.times) if args.times else list(np.linspace(0, 2, 9))
    kmax = args.kmax or 12
    traj = flory.flory_trajectory(model.mu, model.kappa, times, kmax)
    tc = flory.gelation_time(model.mu, model.kappa)
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([float(t), *traj.gel[i].tolist(), float(traj.gel[i].sum()),
                     float(traj.micro_mass[i]), float(traj.max_residual[i]), tc])
    header = ["t", *[f"gel_{lab}" for lab in model.types.labels], "gel_total",
              "micro_mass", "max_residual", "t_c"]
    return "flory.csv", _dump_csv(header, rows), 0


def cmd_verify(model: ModelConfig, args) -> tuple:
    suite = args.suite
    kappa = model.kappa_limit()
    if suite == "giant-lln":
        rep = verify.verify_giant_lln(model.mu, kappa, args.N or 100_000, args.replicas or 20,
                                      args.seed, args.threads, args.tol or 0.01)
    elif suite == "micro-lln":
        rep = verify.verify_micro_lln(model.mu, kappa, args.N or 100_000, args.replicas or 20,
                                      args.seed, args.kmax or 10, args.threads, args.tol or 0.01,
                                      args.epsilon)
    elif suite == "connectivity-rate":
        Ns = _ints(args.Ns) if args.Ns else [100, 150, 200, 250]
        rep = verify.verify_connectivity_rate(model.mu, kappa, Ns, args.samples or 200_000,
                                              args.seed, args.threads, args.tol or 0.15)
    elif suite == "macro-connection":
        if not args.y:
            raise UsageError("macro-connection needs --y")
        y = np.array(_floats(args.y))
        Ns = _ints(args.Ns) if args.Ns else [100, 200, 300, 400]
        rep = verify.verify_macro_connection(y, kappa, Ns, args.samples or 200_000, args.seed,
                                             args.threads, args.tol or 0.2)
    else:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return f"verify-{suite}.json", _dump_json(rep.to_dict()), 0 if rep.passed else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "exact-dist": cmd_exact_dist,
    "tau": cmd_tau,
    "solve": cmd_solve,
    "rate": cmd_rate,
    "minimize": cmd_minimize,
    "borel": cmd_borel,
    "flory": cmd_flory,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file")
    common.add_argument("--seed", type=int, help="RNG seed (required for simulate and verify)")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--N", type=int)
    common.add_argument("--replicas", type=int)
    common.add_argument("--kmax", type=int)
    common.add_argument("--epsilon", type=float, default=0.05)
    common.add_argument("--tol", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="clusterldp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("simulate", parents=[common], help="sample graphs; CSV per replica")
    sub.add_parser("exact-dist", parents=[common], help="exact law of N Mi_N (small N)")
    t = sub.add_parser("tau", parents=[common], help="spanning-tree weight by every method")
    t.add_argument("--k", help="type counts, comma separated")
    s = sub.add_parser("solve", parents=[common], help="Sigma, rho, c*, b*")
    s.add_argument("--c", help="measure for b* (default mu)")
    r = sub.add_parser("rate", parents=[common], help="evaluate rate functions")
    r.add_argument("--input", help="JSON with lambda atoms and alpha atoms")
    r.add_argument("--reducible", action="store_true", help="apply the connectability condition")
    sub.add_parser("minimize", parents=[common], help="zero of the rate function")
    b = sub.add_parser("borel", parents=[common], help="multi-type Borel pmf table")
    b.add_argument("--r", help="starting type (label or index)")
    f = sub.add_parser("flory", parents=[common], help="Flory solution, gel mass, residuals")
    f.add_argument("--times", help="comma separated times")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--samples", type=int)
    v.add_argument("--Ns", help="comma separated N grid")
    v.add_argument("--y", help="macroscopic profile for macro-connection")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        model = load_model(args.model)
        if args.command in STOCHASTIC:
            if args.seed is None:
                args.seed = model.seed
            if args.seed is None:
                raise UsageError(f"{args.command} is stochastic and needs --seed")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        name, text, code = COMMANDS[args.command](model, args)
    except (ModelError, UsageError) as exc:
        print(f"clusterldp: error: {exc}", file=sys.stderr)
        return 2
    out = args.out or model.output
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
        log.info("wrote %s", path / name)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
