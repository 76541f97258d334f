# scripts/pipeline.py
"""
Command-line harness.

    python scripts/pipeline.py groups --name -Z3t
    python scripts/pipeline.py char --group +Z3t --a 0.2 --b 1 --alpha 0.4 --T 6.2831853
    python scripts/pipeline.py stabilize --group -Z4c --a 0.5 --b 1 --alpha 0.55
    python scripts/pipeline.py domain --group +Z3t --amax 2 --bmax 6 --n 100
    python scripts/pipeline.py supercritical --group -Z3t --a 0.5
    python scripts/pipeline.py verify --quick

Exit codes: 0 ok, 2 usage, 3 scientific negative, 4 numerical failure.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np
import yaml

from symgroup import GroupError, kernel, level_set, named_group, t_zero
from model import ControlLaw, ModelError, Params, branch, control_matrix
from spectral import (
    DELAYED_ROW_GROUPS, SpectralError, center_fixed_report, char_system, char_system_eq2, count_system,
    factorization_error, root_report_frame,
)
from ddesolve import IntegrationError, Outcome, SolverSettings, amplitude_slope_fit, scan_alpha_star, stabilization_run
from domains import DomainError, sample_domain
from reports import DIR_DATA, DIR_DOCS, append_jsonl, dumps, export_json, group_payload, save_csv
from render import render_report

log = logging.getLogger("equistab")

CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "equistab.yml")
DEFAULT_SEED = 42

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_NUMERIC = 0, 2, 3, 4


def read_yaml(path):
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def setup_logging(verbose=False):
    logging.addLevelName(logging.WARNING, "WARN")
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)


def resolve_seed(flag, run_cfg, cfg):
    if flag is not None:
        return int(flag)
    if run_cfg.get("seed") is not None:
        return int(run_cfg["seed"])
    env = os.environ.get("EQUISTAB_SEED")
    if env:
        return int(env)
    return int(cfg.get("run", {}).get("seed", DEFAULT_SEED))


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _emit(payload, out):
    if out:
        export_json(payload, out)
        log.info(f"wrote {out}")
    else:
        print(dumps(payload))


def build_parser():
    ap = argparse.ArgumentParser(prog="equistab", description="Equivariant delayed-feedback control of the cube Van der Pol network")
    ap.add_argument("--config", help="JSON or YAML run config; flags override it")
    ap.add_argument("--settings", default=CONFIG_PATH, help="defaults file (config/equistab.yml)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("groups", help="print a symmetry group and its kernel, t0 and level set")
    g.add_argument("--name")
    g.add_argument("--json", action="store_true")

    c = sub.add_parser("char", help="characteristic rows and right half-plane root counts")
    c.add_argument("--group")
    c.add_argument("--a", type=float)
    c.add_argument("--b", type=float)
    c.add_argument("--alpha", type=float)
    c.add_argument("--T", type=float, default=None)
    c.add_argument("--check-det", action="store_true", help="compare the row product with the full determinant")
    c.add_argument("--out")
    c.add_argument("--roots-csv")

    s = sub.add_parser("stabilize", help="run a stabilization experiment")
    s.add_argument("--group")
    s.add_argument("--law", choices=[x.value for x in ControlLaw])
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--alpha-scan", help="comma-separated alphas; reports the largest stabilized one")
    s.add_argument("--out")
    s.add_argument("--traj-csv")
    s.add_argument("--log", help="append the verdict to this JSON-lines file")

    d = sub.add_parser("domain", help="sample a stability domain against the spectrum")
    d.add_argument("--group")
    d.add_argument("--amax", type=float)
    d.add_argument("--bmax", type=float)
    d.add_argument("--n", type=int)
    d.add_argument("--out")

    p = sub.add_parser("supercritical", help="fit r^2 against alpha - alpha0 along a branch")
    p.add_argument("--group")
    p.add_argument("--a", type=float)
    p.add_argument("--offsets", help="comma-separated alpha - alpha0 values")
    p.add_argument("--out")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true", help="skip the long simulations")
    v.add_argument("--outdir")
    v.add_argument("--docs", default=DIR_DOCS)
    return ap


def merge(args, run_cfg, keys):
    """Flags win over the run config; returns a dict of the requested keys."""
    out = {}
    for k in keys:
        val = getattr(args, k, None)
        out[k] = val if val is not None else run_cfg.get(k)
    return out


def require(parser, vals, keys, cmd):
    missing = [k for k in keys if vals.get(k) is None]
    if missing:
        parser.error(f"{cmd}: missing required " + ", ".join(f"--{k.replace('_', '-')}" for k in missing))


# 1) groups
def cmd_groups(args, parser, run_cfg, cfg, seed):
    vals = merge(args, run_cfg, ["name"])
    require(parser, vals, ["name"], "groups")
    H = named_group(vals["name"])
    try:
        t0, lvl = t_zero(H), level_set(H)
    except GroupError:
        t0, lvl = None, ()
    ker = kernel(H)
    if args.json:
        print(dumps(group_payload(H, ker, t0, lvl)))
        return EXIT_OK
    print(f"{H.label}: {len(H)} elements")
    for g in H:
        print(f"  {g}")
    print(f"kernel: {len(ker)} elements")
    for g in ker:
        print(f"  {g}")
    print(f"t0: {t0 if t0 is not None else 'none (temporal part trivial)'}")
    print(f"level set: {len(lvl)} elements")
    for g in lvl:
        print(f"  {g}")
    return EXIT_OK


# 2) characteristic rows
def cmd_char(args, parser, run_cfg, cfg, seed):
    vals = merge(args, run_cfg, ["group", "a", "b", "alpha", "T", "out", "roots_csv"])
    require(parser, vals, ["group", "a", "b"], "char")
    H = named_group(vals["group"])
    br = branch(H.label)
    alpha = vals["alpha"] if vals["alpha"] is not None else br.shift * vals["a"]
    T = vals["T"] if vals["T"] is not None else 2 * math.pi
    p = Params(alpha, vals["a"], vals["b"])
    if H.label in DELAYED_ROW_GROUPS:
        cs = char_system_eq2(p, H, T)
    elif br.law is ControlLaw.KERNEL_AVERAGE:
        cs = char_system(p, control_matrix(br.law, H), T)
    else:
        parser.error(f"char: {H.label} has no characteristic table")
    sp = cfg.get("spectral", {})
    reports = count_system(cs, margin=float(sp.get("margin", 1e-9)), neutral_tol=float(sp.get("neutral_tol", 1e-8)))
    payload = cs.to_dict()
    for row, rep in zip(payload["rows"], reports):
        row.update(count=rep.winding, unstable=rep.unstable, neutral=rep.neutral, agreement=rep.agreement)
    payload["unstable_total"] = sum(r.unstable for r in reports)
    if args.check_det:
        spec = control_matrix(br.law if H.label not in DELAYED_ROW_GROUPS else ControlLaw.LEVEL_SET_AVERAGE, H)
        rng = np.random.default_rng(seed)
        lams = rng.uniform(-1, 1, 20) + 1j * rng.uniform(-3, 3, 20)
        errs = [factorization_error(p, spec, T, complex(lam)) for lam in lams]
        payload["det_check_max_rel_error"] = max(errs)
        log.info(f"determinant cross-check: max relative error {max(errs):.2e}")
    payload["center_fixed_dim"] = center_fixed_report(H, br.shift * p.a, p.a)
    _emit(payload, vals["out"])
    if vals["roots_csv"]:
        save_csv(root_report_frame(reports), vals["roots_csv"])
    return EXIT_OK


# 3) stabilization
def cmd_stabilize(args, parser, run_cfg, cfg, seed):
    vals = merge(args, run_cfg, ["group", "law", "a", "b", "alpha", "alpha_scan", "out", "traj_csv", "log"])
    require(parser, vals, ["group", "a", "b"], "stabilize")
    H = named_group(vals["group"])
    br = branch(H.label)
    settings = SolverSettings.from_config(cfg)
    alpha = vals["alpha"]
    if alpha is None:
        alpha = br.shift * vals["a"] + float(cfg.get("run", {}).get("alpha_offset", 0.05))
    if vals["alpha_scan"]:
        best, verdicts = scan_alpha_star(H, vals["law"], vals["a"], vals["b"], _floats(vals["alpha_scan"]), seed, settings)
        payload = {"group": H.label, "a": vals["a"], "b": vals["b"], "seed": seed, "alpha_star": best,
                   "verdicts": [v.to_dict() for v in verdicts]}
        if vals["log"]:
            for v in verdicts:
                append_jsonl(v.to_dict(), vals["log"])
        _emit(payload, vals["out"])
        return EXIT_OK if best is not None else EXIT_NEGATIVE
    verdict, traj = stabilization_run(H, vals["law"], vals["a"], vals["b"], alpha, seed, settings)
    record = verdict.to_dict()
    if vals["log"]:
        append_jsonl(record, vals["log"])
    _emit(record, vals["out"])
    if vals["traj_csv"] and traj is not None:
        traj.to_csv(vals["traj_csv"], t_from=0.0)
    log.info(f"{H.label}: {verdict.outcome.value}")
    return EXIT_OK if verdict.outcome is Outcome.STABILIZED_TARGET else EXIT_NEGATIVE


# 4) domain sweep
def cmd_domain(args, parser, run_cfg, cfg, seed):
    vals = merge(args, run_cfg, ["group", "amax", "bmax", "n", "out"])
    require(parser, vals, ["group"], "domain")
    dc = cfg.get("domain", {})
    amax = vals["amax"] if vals["amax"] is not None else float(dc.get("amax", 2.0))
    bmax = vals["bmax"] if vals["bmax"] is not None else float(dc.get("bmax", 6.0))
    n = vals["n"] if vals["n"] is not None else int(dc.get("n", 50))
    if n < 0:
        parser.error("domain: --n must be non-negative")
    df = sample_domain(vals["group"], amax=amax, bmax=bmax, n=n,
                       boundary_margin=float(dc.get("boundary_margin", 0.02)),
                       neutral_tol=float(cfg.get("spectral", {}).get("neutral_tol", 1e-8)),
                       jobs=args.jobs or os.cpu_count())
    out = vals["out"] or os.path.join(cfg.get("run", {}).get("outdir", DIR_DATA), f"domain_{vals['group']}.csv")
    save_csv(df, out)
    log.info(f"wrote {out} ({len(df)} rows)")
    if len(df) and not df["agree"].all():
        log.warning(f"{int((~df['agree']).sum())} grid points disagree away from the boundary")
        return EXIT_NEGATIVE
    return EXIT_OK


# 5) supercriticality
def cmd_supercritical(args, parser, run_cfg, cfg, seed):
    vals = merge(args, run_cfg, ["group", "a", "offsets", "out"])
    require(parser, vals, ["group", "a"], "supercritical")
    sc = cfg.get("supercritical", {})
    try:
        offsets = _floats(vals["offsets"]) if vals["offsets"] is not None else _floats(sc.get("offsets", [0.01, 0.02, 0.03, 0.04, 0.05]))
    except ValueError as e:
        parser.error(f"supercritical: bad --offsets: {e}")
    if len(offsets) < 3:
        parser.error(f"supercritical: need at least 3 offsets, got {len(offsets)}")
    if min(offsets) <= 0:
        parser.error(f"supercritical: offsets are alpha - alpha0 and must be positive, got {min(offsets):g}")
    fit = amplitude_slope_fit(vals["group"], vals["a"], offsets, SolverSettings.from_config(cfg))
    expected = float(sc.get("expected_slope", 4.0))
    rel = float(sc.get("rel_tol", 0.15))
    payload = {
        "group": vals["group"], "a": vals["a"], "seed": seed,
        "slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr, "rvalue": fit.rvalue,
        "band95": [fit.slope - 1.96 * fit.stderr, fit.slope + 1.96 * fit.stderr],
        "expected": expected, "points": fit.points.to_dict(orient="records"),
    }
    _emit(payload, vals["out"])
    return EXIT_OK if abs(fit.slope - expected) <= rel * expected else EXIT_NEGATIVE


# 6) acceptance
def cmd_verify(args, parser, run_cfg, cfg, seed):
    from acceptance import run_acceptance
    outdir = args.outdir or cfg.get("run", {}).get("outdir", DIR_DATA)
    df, skipped = run_acceptance(quick=args.quick, seed=seed, jobs=args.jobs or os.cpu_count(),
                                 settings=SolverSettings.from_config(cfg))
    save_csv(df, os.path.join(outdir, "acceptance.csv"))
    export_json({"seed": seed, "quick": args.quick, "skipped": skipped,
                 "checks": df.drop(columns=["seconds"]).to_dict(orient="records")},
                os.path.join(outdir, "acceptance.json"))
    render_report(args.docs, {
        "seed": seed, "mode": "quick" if args.quick else "full", "rows": df.to_dict(orient="records"),
        "passed": int(df["passed"].sum()), "total": len(df), "skipped": skipped,
    })
    return EXIT_OK if df["passed"].all() else EXIT_NEGATIVE


COMMANDS = {
    "groups": cmd_groups, "char": cmd_char, "stabilize": cmd_stabilize,
    "domain": cmd_domain, "supercritical": cmd_supercritical, "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    setup_logging(args.verbose)
    cfg = read_yaml(args.settings) if os.path.exists(args.settings) else {}
    try:
        run_cfg = read_yaml(args.config) if args.config else {}
    except (OSError, yaml.YAMLError) as e:
        log.error(f"config {args.config}: {e}")
        return EXIT_USAGE
    seed = resolve_seed(args.seed, run_cfg, cfg)
    log.debug(f"seed {seed}")
    try:
        return COMMANDS[args.cmd](args, parser, run_cfg, cfg, seed)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    except (GroupError, DomainError, ModelError) as e:
        log.error(str(e))
        return EXIT_USAGE
    except (SpectralError, IntegrationError) as e:
        log.error(f"numerical failure: {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
