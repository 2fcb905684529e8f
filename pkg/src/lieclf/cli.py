"""Command-line interface: ``lieclf <subcommand> CONFIG [options]``.

Exit status is 0 on success, 1 when a verification, synthesis or envelope
check fails and 2 on usage or configuration errors. Every subcommand prints
a JSON document (keys sorted) and, with ``--out DIR``, writes its files there.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import certify, clf, steering
from .config import SystemConfig, load_config
from .errors import ConfigError, DegreeError, LieCLFError, ParseError
from .hamiltonian import SET_BRACKET, _smooth_field, directions, support_values
from .lie import bracket_field, enumerate_brackets

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _clean(obj):
    """Replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(out, name, text):
    if out is None:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(header, rows, int_cols=()) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(int(v)) if j in int_cols else "%.17g" % v
                              for j, v in enumerate(row)))
    return "\n".join(lines) + "\n"


def _point(text, n, what):
    try:
        v = [float(a) for a in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(v) != n:
        raise UsageError(f"{what}: expected {n} numbers, got {len(v)}")
    return np.array(v)


def _system(cfg: SystemConfig, args):
    sysd = cfg.system
    if args.k is not None:
        sysd = sysd.with_k(args.k)
    return sysd


def _samples(cfg, args):
    return args.samples if args.samples is not None else cfg.numerics["samples"]


def _seed(cfg, args):
    return args.seed if args.seed is not None else cfg.numerics["seed"]


def _probe(cfg, args, n):
    if getattr(args, "x", None):
        return _point(args.x, n, "--x")
    if cfg.synthesis["probe"] is not None:
        return np.array(cfg.synthesis["probe"])
    raise UsageError("no evaluation point: pass --x or set 'probe' in the config")


# subcommands ---------------------------------------------------------------------------


def cmd_brackets(cfg, args):
    sysd = _system(cfg, args)
    fields = [sysd.drift, *sysd.generators]
    rows = []
    if sysd.has_drift:
        for d in directions(sysd, sysd.k):
            w = steering.word_for_direction(sysd, d)
            rows.append({"label": d.label, "degree": d.degree, "kind": d.kind, "r": len(w.segments),
                         "field": _smooth_field(sysd, d).text()})
    else:
        for B in enumerate_brackets(sysd.m, sysd.k):
            row = {"label": str(B), "degree": B.degree, "r": B.r}
            plain = sysd.smoothness != "lipschitz" and not any(
                hasattr(f, "pieces") for f in sysd.generators)
            if plain:
                row["field"] = bracket_field(B, fields, sysd._cache).text()
            else:
                row["set_valued"] = B.degree > 1
            rows.append(row)
    doc = {"config": cfg.name, "k": sysd.k, "brackets": rows}
    _write(args.out, "brackets.json", dumps(doc))
    return doc, EXIT_OK


def cmd_ham(cfg, args):
    sysd = _system(cfg, args)
    x = _probe(cfg, args, sysd.dim)
    if args.p:
        P = _point(args.p, sysd.dim, "--p")[None, :]
    else:
        P = cfg.clf.limiting_gradients(x)
    chain = []
    for h in range(1, sysd.k + 1):
        vals = support_values(sysd, h, x, P)
        chain.append(min(v for _, v in vals))
    vals = support_values(sysd, sysd.k, x, P)
    doc = {"config": cfg.name, "x": x, "p": P, "chain": chain,
           "directions": [{"label": d.label, "degree": d.degree, "value": v} for d, v in vals]}
    _write(args.out, "ham.json", dumps(doc))
    return doc, EXIT_OK


def cmd_verify(cfg, args):
    sysd = _system(cfg, args)
    rep = clf.verify(sysd, cfg.clf, cfg.region, _samples(cfg, args), _seed(cfg, args),
                     cfg.numerics["levels"])
    doc = rep.to_dict()
    doc["config"] = cfg.name
    doc["ok"] = rep.ok
    _write(args.out, "verify.json", dumps(doc))
    return doc, EXIT_OK if rep.ok else EXIT_FAIL


def _run_synthesis(cfg, args):
    sysd = _system(cfg, args)
    target, U = cfg.synthesis_setup()
    x0 = _point(args.x0, sysd.dim, "--x0") if args.x0 else cfg.synthesis["x0"]
    if x0 is None:
        raise UsageError("no start point: pass --x0 or set synthesis.x0 in the config")
    eps_d = args.eps_d if args.eps_d is not None else cfg.synthesis["eps_d"]
    num = cfg.numerics
    gamma = clf.estimate_gamma(sysd, U, cfg.region, num["levels"], _samples(cfg, args),
                               _seed(cfg, args))
    opts = steering.StepOptions(field_bound=num["field_bound"], substeps=num["substeps"],
                                max_halvings=num["max_halvings"], record_every=num["record_every"])
    traj = steering.synthesize(sysd, U, np.asarray(x0, float), target, gamma, eps_d,
                               num["max_steps"], opts)
    return sysd, U, target, gamma, traj


def _trajectory_files(traj, n, out):
    header = ["s"] + [f"x{i + 1}" for i in range(n)] + ["ctrl", "seg", "step"]
    _write(out, "trajectory.csv", csv_text(header, traj.dense, int_cols=(n + 1, n + 2, n + 3)))
    _write(out, "checkpoints.json", dumps(traj.to_dict()))


def cmd_synthesize(cfg, args):
    sysd, U, target, gamma, traj = _run_synthesis(cfg, args)
    _trajectory_files(traj, sysd.dim, args.out)
    last = traj.checkpoints[-1] if traj.checkpoints else None
    doc = {"config": cfg.name, "reason": traj.reason, "steps": traj.steps,
           "final": last.x if last else None,
           "final_distance": target.distance(np.asarray(last.x)) if last else None,
           "gamma": gamma.table()}
    return doc, EXIT_OK


def cmd_asymptotic(cfg, args):
    sysd = _system(cfg, args)
    x = _probe(cfg, args, sysd.dim)
    rows = []
    for d in directions(sysd, sysd.k):
        if d.kind == SET_BRACKET:
            rows.append({"label": d.label, "degree": d.degree, "skipped": "set-valued"})
            continue
        res = steering.asymptotic_order(sysd, d, x)
        row = res.to_dict()
        row.update(label=d.label, degree=d.degree,
                   in_band=bool(res.exact or abs(res.slope - res.order) <= 0.4))
        rows.append(row)
    doc = {"config": cfg.name, "x": x, "results": rows}
    _write(args.out, "asymptotic.json", dumps(doc))
    return doc, EXIT_OK


def cmd_certify(cfg, args):
    sysd, U, target, gamma, traj = _run_synthesis(cfg, args)
    _trajectory_files(traj, sysd.dim, args.out)
    if traj.steps == 0:
        doc = {"config": cfg.name, "violation": 0.0, "certified": True, "steps": 0,
               "note": "start point already within tolerance of the target"}
        _write(args.out, "certificate.json", dumps(doc))
        return doc, EXIT_OK
    kl = certify.build_kl(gamma, traj, sysd, U, target, cfg.numerics["field_bound"],
                          cfg.region, _seed(cfg, args))
    d0 = target.distance(np.asarray(traj.checkpoints[0].x))
    s_end = traj.checkpoints[-1].s
    deltas = np.linspace(0.0, d0, 9)
    ss = np.linspace(0.0, 2.0 * s_end, 41)
    violation = certify.check_envelope(traj, kl, target)
    doc = {"config": cfg.name, "steps": traj.steps, "violation": violation,
           "checkpoint_violation": certify.check_checkpoints(traj, kl, target),
           "certified": violation <= 1e-9, "R": kl.R, "field_bound": kl.M,
           "shape_violations": kl.shape_violations(deltas, ss), "flags": kl.flags}
    _write(args.out, "beta.csv", csv_text(["delta", "s", "beta"], kl.table(deltas, ss)))
    _write(args.out, "certificate.json", dumps(doc))
    return doc, EXIT_OK if doc["certified"] and not doc["shape_violations"] else EXIT_FAIL


COMMANDS = {
    "brackets": (cmd_brackets, "list formal brackets up to degree k"),
    "ham": (cmd_ham, "evaluate the Hamiltonian chain at a point"),
    "verify": (cmd_verify, "sampled check of the degree-k CLF inequality"),
    "synthesize": (cmd_synthesize, "run the descent loop from a start point"),
    "asymptotic": (cmd_asymptotic, "empirical error orders of the control words"),
    "certify": (cmd_certify, "synthesize, build the KL bound and check the envelope"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lieclf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON config path or bundled fixture name")
        p.add_argument("--out", metavar="DIR", help="directory for output files")
        p.add_argument("--k", type=int, help="override the bracket degree")
        p.add_argument("--samples", type=int, help="number of region samples")
        p.add_argument("--seed", type=int, help="sampler seed")
        if name in ("ham", "asymptotic"):
            p.add_argument("--x", help="evaluation point, comma separated")
        if name == "ham":
            p.add_argument("--p", help="covector, comma separated (default: limiting gradients)")
        if name in ("synthesize", "certify"):
            p.add_argument("--x0", help="start point, comma separated")
            p.add_argument("--eps-d", type=float, dest="eps_d", help="distance tolerance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config)
        doc, code = func(cfg, args)
    except (ConfigError, ParseError, DegreeError, UsageError) as exc:
        print(f"lieclf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LieCLFError as exc:
        print(f"lieclf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sys.stdout.write(dumps(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
