"""Command-line entry points: ``forbidlab <command>`` and the ``lab`` shortcut."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateCluster, ForbidLabError
from .harness import EXIT_ACCEPT, EXIT_CONFIG, EXIT_OK, records_csv, run_experiment

log = logging.getLogger("forbidlab")


def _write_csv(path, header, rows):
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    finally:
        if out is not sys.stdout:
            out.close()


# ---------------------------------------------------------------- commands


def cmd_run(a):
    _, stages, code = run_experiment(a.config, a.out, jobs=a.jobs)
    for s in stages:
        if s.acceptance and not s.ok:
            print(f"FAILED {s.name}: {s.error or s.detail}", file=sys.stderr)
    return code


def cmd_accept(a):
    from .acceptance import CRITERIA, run_all

    if a.suite == "all":
        numbers = sorted(CRITERIA)
    else:
        try:
            numbers = [int(v) for v in a.suite.split(",")]
        except ValueError:
            raise ConfigError(f"bad suite {a.suite!r}") from None
        if any(n not in CRITERIA for n in numbers):
            raise ConfigError(f"unknown criterion in {a.suite!r}")
    results = run_all(numbers, echo=print)
    if a.json:
        Path(a.json).write_text(json.dumps([r.__dict__ for r in results], indent=2, default=str) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPT


def cmd_eigen(a):
    from .eigensolve import assemble, eigenpairs_near
    from .fieldio import load_scene, save_pair
    from .geometry import TorusDomain

    sc = load_scene(a.scene)
    dom = TorusDomain(sc.domain.L, a.n or sc.domain.n)
    op = assemble(dom, sc.potential, a.h, sc.energy, a.scheme)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCluster)
        pairs = eigenpairs_near(op, sc.energy if a.E is None else a.E, a.k, a.tol)
    out = Path(a.out)
    for i, p in enumerate(pairs):
        path = out if i == 0 else out.with_name(f"{out.stem}_{i}{out.suffix}")
        save_pair(path, p)
        print(f"{path}: E(h)={p.E_h!r} residual={p.residual:.2e}{' degenerate' if p.degenerate else ''}")
    return EXIT_OK


def cmd_agmon(a):
    from .agmon import curve_agmon_distance, solve_agmon
    from .eigensolve import EigenPair
    from .fieldio import load_scene, save_pair
    from .geometry import TorusDomain, forbidden_mask

    sc = load_scene(a.scene)
    dom = TorusDomain(sc.domain.L, a.n or sc.domain.n)
    fld = solve_agmon(forbidden_mask(sc.potential, sc.energy, dom), sc.potential, dom)
    save_pair(a.out, EigenPair(0.0, sc.energy, fld.values, 0.0, dom, sc.energy))
    for name, c in sc.curves.items():
        try:
            print(f"d_E({name}) = {curve_agmon_distance(fld, c)!r}")
        except ForbidLabError as exc:
            print(f"d_E({name}): {type(exc).__name__}: {exc}")
    return EXIT_OK


def cmd_nodal(a):
    from .fieldio import load_pair, load_scene
    from .geometry import Region
    from .nodal import count_sign_changes, green_identity_check, restrict_to_curve, restriction_norms

    sc = load_scene(a.scene)
    pair = load_pair(a.pair)
    curve = sc.curve(a.curve)
    s = restrict_to_curve(pair, curve)
    row = [pair.h, pair.E_h, "", "", "", "", "", "", ""]
    if a.norms or not (a.count or a.green_check):
        n0, n1 = restriction_norms(s)
        row[2], row[3] = n0, n1
    if a.count or not (a.norms or a.green_check):
        c = count_sign_changes(s)
        row[4], row[5] = c.count, int(c.uncertain)
    if a.green_check:
        rep = green_identity_check(pair, sc.potential, Region.inside(curve, pair.domain.L), curve)
        row[6], row[7], row[8] = rep.lhs_energy, rep.boundary_term, rep.mismatch
    _write_csv(a.out, ["h", "E", "norm_H", "norm_dn_H", "count", "uncertain", "lhs", "rhs", "mismatch"], [row])
    return EXIT_OK


def cmd_trace(a):
    from .fieldio import load_pair, load_scene
    from .nodal import count_sign_changes, restrict_to_curve
    from .trace import build_trace, jensen_report

    sc = load_scene(a.scene)
    pair = load_pair(a.pair)
    s = restrict_to_curve(pair, sc.curve(a.curve))
    tr = build_trace(s)
    tau = None if a.tau == "auto" else float(a.tau)
    row = jensen_report([tr], tau, [count_sign_changes(s).count])[0]
    if row.note:
        print(row.note, file=sys.stderr)
    _write_csv(a.out, ["h", "tau", "zeros", "real_zeros", "log_max", "ratio"],
               [[row.h, row.tau, row.zeros, row.real_zeros, row.log_max, row.ratio]])
    return EXIT_OK


def cmd_greens(a):
    from . import greens as g
    from .fieldio import load_scene
    from .geometry import Region, TorusDomain, build_conformal_factor

    h = a.h
    dom = TorusDomain(2.0 if a.scene is None else load_scene(a.scene).domain.L, a.n)
    y = np.zeros(2)
    ds = np.round(np.arange(0.2, 0.9001, 0.05), 10)
    if a.mode == "oracle":
        rows = [[float(d), float(g.bessel_oracle(np.array([d, 0.0]), y, h, dom.L))] for d in ds]
        _write_csv(a.out, ["d", "G"], rows)
    elif a.mode == "solve":
        col = g.resolvent_column(dom, h, y)
        rows = []
        for d in ds:
            x = np.array([d, 0.0])
            v, o = float(col.value(x[None])[0]), float(g.bessel_oracle(x, y, h, dom.L))
            rows.append([float(d), v, o, abs(v - o) / o])
        _write_csv(a.out, ["d", "G_column", "G_oracle", "rel_error"], rows)
    elif a.mode == "parametrix":
        rows = []
        for d in ds[ds <= dom.L / 4]:
            x = np.array([d, 0.0])
            A, G = g.parametrix_leading(x, y, h, dom.L), float(g.bessel_oracle(x, y, h, dom.L))
            rows.append([h, float(d), A, G, h * abs(math.log(abs(A)) - math.log(G))])
        _write_csv(a.out, ["h", "d", "A_G", "G", "h_log_gap"], rows)
    elif a.mode == "complex":
        x = np.array([0.5, 0.0])
        rows = []
        for ang in np.linspace(0, np.pi, 9):
            z = 0.0625 * np.array([math.cos(ang), math.sin(ang)])
            v = complex(g.complexified_kernel(x, z, y, h, L=dom.L))
            rows.append([float(z[0]), float(z[1]), v.real, v.imag, abs(v)])
        _write_csv(a.out, ["zeta_x", "zeta_y", "re", "im", "abs"], rows)
    elif a.mode in ("layer", "maxprinciple"):
        from .eigensolve import assemble, eigenpairs_near

        sc = load_scene(a.scene)
        dom = TorusDomain(sc.domain.L, a.n)
        if a.mode == "maxprinciple":
            cols = [g.resolvent_column(dom, h, y)]
            if "gamma" in sc.curves:
                lam = build_conformal_factor(sc.potential, sc.energy, dom, Region.inside(sc.curve("gamma"), dom.L))
                center = sc.curve("gamma").sample(64)[1].mean(axis=0)
                cols.append(g.resolvent_column(dom, h, center, lam))
            rows = []
            for c in cols:
                for R in (0.2, 0.5):
                    r = g.maximum_principle_check(c, R)
                    rows.append([c.metric, R, int(r.holds), r.outer_max, r.circle_max])
            _write_csv(a.out, ["metric", "R", "holds", "outer_max", "circle_max"], rows)
        else:
            op = assemble(dom, sc.potential, h, sc.energy)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateCluster)
                pair = eigenpairs_near(op, sc.energy, 1)[0]
            gam = sc.curve("gamma")
            lam = build_conformal_factor(sc.potential, pair.E_h, dom, Region.inside(gam, dom.L), energy=sc.energy)
            rep = g.layer_reproduce(pair, gam, lam, sc.curve("H"), a.nodes)
            print(f"residual = {rep.residual:.3e}", file=sys.stderr)
            _write_csv(a.out, ["t", "reproduced", "exact"],
                       [[float(t), float(r), float(e)] for t, r, e in zip(rep.t, rep.reproduced, rep.exact)])
    return EXIT_OK


def cmd_revolution(a):
    from .harness import REVOLUTION_FIELDS
    from .revolution import profile_from_spec, revolution_sweep

    prof = profile_from_spec(a.profile, a.delta, a.amp)
    ms = [int(v) for v in a.m.split(",")]
    rows = revolution_sweep(prof, a.V, a.E0, ms, a.r0, a.convention, a.tau)
    text = records_csv(rows, REVOLUTION_FIELDS)
    if a.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(a.out).write_text(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser(prog="forbidlab"):
    p = argparse.ArgumentParser(prog=prog, description="Forbidden-region eigenfunction laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    lab = sub.add_parser("lab", help="experiments and acceptance")
    labsub = lab.add_subparsers(dest="lab_command", required=True)
    r = labsub.add_parser("run")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)
    ac = labsub.add_parser("accept")
    ac.add_argument("--suite", default="all", help="'all' or comma-separated criterion numbers")
    ac.add_argument("--json", default=None)
    ac.set_defaults(func=cmd_accept)

    e = sub.add_parser("eigen")
    e.add_argument("--scene", default=None)
    e.add_argument("--h", type=float, required=True)
    e.add_argument("--k", type=int, default=1)
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--n", type=int, default=None)
    e.add_argument("--E", type=float, default=None)
    e.add_argument("--scheme", choices=["spectral", "fd"], default="spectral")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eigen)

    ag = sub.add_parser("agmon")
    ag.add_argument("--scene", default=None)
    ag.add_argument("--n", type=int, default=None)
    ag.add_argument("--out", required=True)
    ag.set_defaults(func=cmd_agmon)

    nd = sub.add_parser("nodal")
    nd.add_argument("--pair", required=True)
    nd.add_argument("--scene", default=None)
    nd.add_argument("--curve", default="H")
    nd.add_argument("--count", action="store_true")
    nd.add_argument("--norms", action="store_true")
    nd.add_argument("--green-check", action="store_true")
    nd.add_argument("--out", default="-")
    nd.set_defaults(func=cmd_nodal)

    tr = sub.add_parser("trace")
    tr.add_argument("--pair", required=True)
    tr.add_argument("--scene", default=None)
    tr.add_argument("--curve", default="H")
    tr.add_argument("--tau", default="auto")
    tr.add_argument("--out", default="-")
    tr.set_defaults(func=cmd_trace)

    gr = sub.add_parser("greens")
    gr.add_argument("--scene", default=None)
    gr.add_argument("--mode", choices=["oracle", "solve", "parametrix", "complex", "layer", "maxprinciple"],
                    required=True)
    gr.add_argument("--h", type=float, default=0.05)
    gr.add_argument("--n", type=int, default=256)
    gr.add_argument("--nodes", type=int, default=128)
    gr.add_argument("--out", default="-")
    gr.set_defaults(func=cmd_greens)

    rv = sub.add_parser("revolution")
    rv.add_argument("--profile", default="cos")
    rv.add_argument("--amp", type=float, default=0.6)
    rv.add_argument("--delta", type=float, default=0.05)
    rv.add_argument("--V", default="gauss:10,0,40")
    rv.add_argument("--E0", type=float, default=5.0)
    rv.add_argument("--m", default="10,20,40")
    rv.add_argument("--r0", type=float, default=0.1)
    rv.add_argument("--convention", choices=["1", "w2"], default="1")
    rv.add_argument("--tau", type=float, default=0.2)
    rv.add_argument("--out", default="-")
    rv.set_defaults(func=cmd_revolution)
    return p


def main(argv=None, prog="forbidlab"):
    parser = build_parser(prog)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ForbidLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ACCEPT


def lab_main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    return main(["lab", *argv], prog="forbidlab")


if __name__ == "__main__":
    sys.exit(main())
