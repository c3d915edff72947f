"""Command-line front door.

    frontal-lab catalog [NAME-or-GENERATOR] [--json] [generator params]
    frontal-lab analyze     --entry NAME | --input FILE [--grid NxM] [--out DIR]
    frontal-lab blaschke    --entry NAME | --input FILE [--grid NxM] [--out DIR]
    frontal-lab reconstruct --entry NAME | --input structure.json [--out DIR]
    frontal-lab check       --entry NAME [--grid NxM]
    frontal-lab export      --entry NAME --what surface|field|structure --out PATH

Exit codes: 0 success, 2 input error, 3 mathematical precondition failed,
4 verification failed.  All tolerances accept overrides through --config
FILE (key = value lines) and repeated --set key=value flags; grid sweeps
split across threads when threads > 1 (capped by FRONTAL_LAB_THREADS).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from . import catalog as catalog_mod
from . import structio
from .blaschke import blaschke_field, blaschke_verify
from .config import Config, load_config
from .equiaffine import TransversalField, structure_from_field
from .errors import (DomainError, ExprSyntaxError, FrontalLabError,
                     InputError, UnknownIdentifier, VerificationError)
from .frame import (frame_data, nonparabolic_test, singular_scan,
                    wavefront_test)
from .reconstruct import (affine_align, compat_residual, extract_structure,
                          integrability_residual, integrate_frame,
                          integrate_position, lattice_nodes)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_VERIFICATION = 4


def _parse_grid(text):
    try:
        nx, ny = text.lower().split("x")
        return int(nx), int(ny)
    except ValueError:
        raise InputError(f"bad grid spec {text!r}; expected NxM")


def _parse_domain(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise InputError("domain must be a1,b1,a2,b2")
    return tuple(parts)


def _build_config(args) -> Config:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    return load_config(args.config, overrides)


def _load_frontal(args, config):
    if args.entry:
        params = {}
        for key in ("h", "c", "b", "l", "r", "a"):
            val = getattr(args, f"p_{key}", None)
            if val is not None:
                params[key] = val
        if args.domain:
            params["domain"] = _parse_domain(args.domain)
        entry = catalog_mod.get_entry(args.entry, params or None)
        return entry.build(config), entry
    if args.input:
        return structio.read_frontal_file(args.input, config), None
    raise InputError("provide --entry NAME or --input FILE")


def _chunked_frame_data(f, u1, u2, config):
    """Frame data over a grid, split across threads when configured."""
    threads = max(1, config.threads)
    if threads == 1 or u1.shape[0] < 2 * threads:
        return frame_data(f, u1, u2, config=config)
    blocks = np.array_split(np.arange(u1.shape[0]), threads)
    with concurrent.futures.ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(
            lambda ix: frame_data(f, u1[ix], u2[ix], config=config), blocks))
    merged = {}
    for name in ("I_omega", "II_omega", "mu", "T1", "T2", "lam", "lam_det",
                 "K_omega", "n", "I_classical", "II_classical",
                 "rank_deficient"):
        merged[name] = np.concatenate([getattr(p, name) for p in parts],
                                      axis=0)
    from .frame import FrameData
    return FrameData(**merged)


# --- subcommands --------------------------------------------------------------------


def cmd_catalog(args):
    config = _build_config(args)
    if args.name:
        params = {}
        for key in ("h", "c", "b", "l", "r", "a"):
            val = getattr(args, f"p_{key}", None)
            if val is not None:
                params[key] = val
        if args.domain:
            params["domain"] = _parse_domain(args.domain)
        entry = catalog_mod.get_entry(args.name, params or None)
        entry.build(config)   # load-time validation
        payload = entry.summary()
        if args.save:
            doc = {"name": entry.name, "domain": list(entry.domain),
                   "x": entry.x, "omega": [list(entry.omega[0]),
                                           list(entry.omega[1])]
                   if entry.omega else None,
                   "lambda": entry.lam,
                   "open_domain": entry.open_domain}
            structio.write_report(args.save, doc)
            payload["saved"] = args.save
        if args.json:
            sys.stdout.write(structio.report_json(payload))
        else:
            print(f"{entry.name}: {entry.description}")
            print(f"  domain {entry.domain}")
            for key, val in payload["known"].items():
                print(f"  known {key}: {val}")
        return EXIT_OK
    entries = catalog_mod.list_entries()
    if args.json:
        sys.stdout.write(structio.report_json(
            {"entries": entries,
             "generators": sorted(catalog_mod.GENERATORS)}))
    else:
        for e in entries:
            print(f"{e['name']:12s} {e['description']}  domain={e['domain']}")
        print("generators: " + ", ".join(sorted(catalog_mod.GENERATORS)))
    return EXIT_OK


def cmd_analyze(args):
    config = _build_config(args)
    f, entry = _load_frontal(args, config)
    shape = _parse_grid(args.grid)
    u1, u2 = f.grid(shape)
    data = _chunked_frame_data(f, u1, u2, config)
    scan = singular_scan(f, shape, config=config)
    wf, witnesses = wavefront_test(f, shape, config=config)
    nonpar = nonparabolic_test(f, shape, config=config)
    report = {
        "schema_version": structio.SCHEMA_VERSION,
        "command": "analyze",
        "entry": f.name,
        "grid": list(shape),
        "domain": list(f.domain),
        "wavefront": {"verdict": bool(wf), "tolerance": config.eps_rank,
                      "witnesses": witnesses[:20]},
        "nonparabolic": {"verdict": bool(nonpar),
                         "tolerance": config.eps_k},
        "singular": {
            "cells": [[int(i), int(j)] for i, j in scan.cells[:2000]],
            "n_cells": len(scan.cells),
            "regular_dense": bool(scan.regular_dense),
            "tolerance": config.eps_sing,
        },
        "lambda_det": {"min_abs": float(np.min(np.abs(data.lam_det))),
                       "max_abs": float(np.max(np.abs(data.lam_det)))},
        "K_omega": {"min": float(np.min(data.K_omega)),
                    "max": float(np.max(data.K_omega))},
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        structio.write_report(os.path.join(args.out, "analyze.json"), report)
        cols = {
            "lam_det": data.lam_det, "K_omega": data.K_omega,
            "E_omega": data.I_omega[..., 0, 0],
            "F_omega": data.I_omega[..., 0, 1],
            "G_omega": data.I_omega[..., 1, 1],
            "e_omega": data.II_omega[..., 0, 0],
            "f1_omega": data.II_omega[..., 0, 1],
            "f2_omega": data.II_omega[..., 1, 0],
            "g_omega": data.II_omega[..., 1, 1],
            "n1": data.n[..., 0], "n2": data.n[..., 1], "n3": data.n[..., 2],
        }
        structio.export_frame_csv(os.path.join(args.out, "frame.csv"),
                                  u1, u2, cols)
    sys.stdout.write(structio.report_json(report) if args.json else
                     f"{f.name}: wavefront={wf} nonparabolic={nonpar} "
                     f"singular-cells={len(scan.cells)} "
                     f"regular-dense={scan.regular_dense}\n")
    return EXIT_OK


def cmd_blaschke(args):
    config = _build_config(args)
    f, entry = _load_frontal(args, config)
    shape = _parse_grid(args.grid)
    bf = blaschke_field(f, shape, config=config)
    verify = blaschke_verify(f, bf, shape=(min(41, shape[0]),
                                           min(41, shape[1])), config=config)
    report = {
        "schema_version": structio.SCHEMA_VERSION,
        "command": "blaschke",
        "entry": f.name,
        "grid": list(shape),
        "diagnostics": _clean(bf.diagnostics),
        "verify": verify,
        "improper_sphere": {
            "verdict": bool(bf.diagnostics["improper_sphere"]),
            "deviation": bf.diagnostics["constancy_deviation"],
            "tolerance": bf.diagnostics["constancy_tolerance"],
        },
    }
    if f.blaschke_known is not None:
        known = f.blaschke_known(bf.u1, bf.u2, 0).values_stacked()
        err = float(np.max(np.abs(bf.xi - known)))
        report["known_answer"] = {"max_abs_error": err, "tolerance": 1e-6}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        structio.write_report(os.path.join(args.out, "blaschke.json"), report)
        x = f.x(bf.u1, bf.u2, 0).values_stacked()
        x = np.broadcast_to(x, bf.u1.shape + (3,))
        structio.export_obj(os.path.join(args.out, "surface.obj"), x)
        structio.export_field_csv(os.path.join(args.out, "field.csv"),
                                  bf.u1, bf.u2, x, bf.xi)
    sys.stdout.write(structio.report_json(report) if args.json else
                     f"{f.name}: max|tau|={report['diagnostics'].get('max_tau')}"
                     f" volume={report['diagnostics'].get('volume_residual')}"
                     f" improper={report['improper_sphere']['verdict']}\n")
    return EXIT_OK


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_reconstruct(args):
    config = _build_config(args)
    shape = _parse_grid(args.grid)
    align = None
    if args.input:
        sd = structio.read_structure_file(args.input, config)
        f = None
    else:
        f, entry = _load_frontal(args, config)
        if args.field == "blaschke":
            bf = blaschke_field(f, (33, 33), config=config)
            field = bf
        elif args.field == "normal":
            field = TransversalField.unit_normal()
        else:
            field = TransversalField.constant(
                tuple(float(v) for v in args.field.split(",")))
        sd = extract_structure(f, field, config=config)

    step = args.step or config.rk4_step
    g1, g2 = np.meshgrid(*lattice_nodes(sd, shape), indexing="ij")
    lam_det = sd.lam_det_values(g1.ravel(), g2.ravel())
    reg = np.abs(lam_det) > config.eps_sing
    compat = compat_residual(sd, g1.ravel()[reg], g2.ravel()[reg])
    sym, row = integrability_residual(sd, g1.ravel()[reg], g2.ravel()[reg])

    ff = integrate_frame(sd, shape, step=step, config=config)
    x = integrate_position(ff, sd, config=config)
    report = {
        "schema_version": structio.SCHEMA_VERSION,
        "command": "reconstruct",
        "grid": list(shape),
        "step": step,
        "compatibility": {"residual": compat, "tolerance": config.tol_compat},
        "integrability": {"symmetry": sym, "row_identity": row,
                          "tolerance": config.tol_compat},
        "path_audit": {"frame": ff.discrepancy, "position": ff.x_discrepancy,
                       "tolerance": config.tol_path},
        "min_abs_det_frame": ff.min_det,
    }
    if f is not None:
        U1, U2 = np.meshgrid(ff.u1_nodes, ff.u2_nodes, indexing="ij")
        x_true = np.broadcast_to(f.x(U1, U2, 0).values_stacked(),
                                 U1.shape + (3,))
        L, a, sup = affine_align(x, x_true)
        report["alignment"] = {"sup_error": sup, "tolerance": 1e-4,
                               "L": L.tolist(), "a": a.tolist()}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        structio.write_report(os.path.join(args.out, "reconstruct.json"),
                              report)
        structio.export_obj(os.path.join(args.out, "reconstructed.obj"), x)
    sys.stdout.write(structio.report_json(report) if args.json else
                     f"reconstructed: audit={ff.discrepancy:.3e} "
                     + (f"aligned sup={report['alignment']['sup_error']:.3e}\n"
                        if "alignment" in report else "\n"))
    return EXIT_OK


def cmd_check(args):
    config = _build_config(args)
    f, entry = _load_frontal(args, config)
    shape = _parse_grid(args.grid)
    checks = run_property_suite(f, shape, config)
    report = {
        "schema_version": structio.SCHEMA_VERSION,
        "command": "check",
        "entry": f.name,
        "checks": checks,
        "passed": all(c["ok"] for c in checks),
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        structio.write_report(os.path.join(args.out, "check.json"), report)
    if args.json:
        sys.stdout.write(structio.report_json(report))
    else:
        for c in checks:
            status = "ok" if c["ok"] else "FAIL"
            print(f"[{status:4s}] {c['name']}: residual {c['residual']:.3e} "
                  f"(tol {c['tolerance']:.1e})")
    if not report["passed"]:
        raise VerificationError("property suite failed")
    return EXIT_OK


def run_property_suite(f, shape, config):
    """Cross-path invariants on one frontal; returns a list of named checks.

    Everything here re-derives a quantity along two independent routes or
    asserts a structural identity; checks that need preconditions the
    surface does not meet (a transversal constant field, non-vanishing
    curvature) are skipped rather than failed.
    """
    checks = []

    def add(name, residual, tol):
        checks.append({"name": name, "residual": float(residual),
                       "tolerance": float(tol),
                       "ok": bool(residual <= tol)})

    from .blaschke import blaschke_field, conormal_verify
    from .equiaffine import (check_tau_formula, d_from_gamma,
                             parallel_volume_check)
    from .errors import KVanishes
    from .frame import affine_image, frame_bundle, ii_omega_normal_route, \
        mat2_values
    from .jets import Jet, triple_product_jet
    rng = np.random.default_rng(20240814)
    a1, b1, a2, b2 = f.domain
    u1 = rng.uniform(a1 + 0.05 * (b1 - a1), b1 - 0.05 * (b1 - a1), 120)
    u2 = rng.uniform(a2 + 0.05 * (b2 - a2), b2 - 0.05 * (b2 - a2), 120)
    data = frame_data(f, u1, u2, config=config)
    scale_lam = max(1e-3, 0.01 * float(np.max(np.abs(data.lam_det))))
    reg = ~data.rank_deficient & (np.abs(data.lam_det) > scale_lam)
    u1r, u2r = u1[reg], u2[reg]

    lam = data.lam
    I_pred = lam @ data.I_omega @ np.swapaxes(lam, -1, -2)
    add("first-form factorization", np.max(np.abs(I_pred - data.I_classical)),
        1e-9 * max(1.0, float(np.max(np.abs(data.I_classical)))))
    II_pred = lam @ data.II_omega
    add("second-form factorization",
        np.max(np.abs(II_pred - data.II_classical)),
        1e-9 * max(1.0, float(np.max(np.abs(data.II_classical)))))

    b = frame_bundle(f, u1, u2, config=config)
    alt = ii_omega_normal_route(b)
    add("second-form route agreement",
        np.max(np.abs(mat2_values(alt) - data.II_omega)), 1e-10)

    ortho = max(float(np.max(np.abs(np.asarray(b.w1.dot(b.n).value)))),
                float(np.max(np.abs(np.asarray(b.w2.dot(b.n).value)))))
    add("normal orthogonality", ortho, 1e-12)

    with np.errstate(divide="ignore", invalid="ignore"):
        k_ratio = data.K_omega[reg] / data.lam_det[reg]
        det_ii = np.linalg.det(data.II_classical[reg])
        det_i = np.linalg.det(data.I_classical[reg])
        add("curvature ratio vs classical",
            np.max(np.abs(k_ratio - det_ii / det_i))
            / max(1.0, float(np.max(np.abs(k_ratio)))), 1e-8)

    # split-field identities with the unit normal: h = p, tau = 0
    def const_jet(val):
        return lambda a, c, order: Jet.constant(
            np.full(np.shape(np.asarray(a, dtype=float)), val), order)

    h_res, tau_res = check_tau_formula(f, const_jet(1.0), const_jet(0.0),
                                       const_jet(0.0), u1r, u2r,
                                       config=config)
    add("split-field form identity", h_res, 1e-9)
    add("split-field connection identity", tau_res, 1e-9)

    const = TransversalField.constant((0.0, 0.0, 1.0))
    br = frame_bundle(f, u1r, u2r, config=config)
    theta = np.abs(np.broadcast_to(np.asarray(triple_product_jet(
        br.w1, br.w2, const.jets(f, u1r, u2r, 1)).value), u1r.shape))
    tv = theta > 0.1
    if np.any(tv):
        u1t, u2t = u1r[tv], u2r[tv]
        s1 = structure_from_field(f, const, u1t, u2t, config=config)
        add("constant field equiaffine", np.max(np.abs(s1.tau)), 1e-9)
        s2 = structure_from_field(
            f, TransversalField.constant((0.0, 0.0, 2.0)), u1t, u2t,
            config=config)
        add("relative-form scaling", np.max(np.abs(s2.h - s1.h / 2.0)),
            1e-12 * max(1.0, float(np.max(np.abs(s1.h)))))

        vol_res, _ = parallel_volume_check(f, const, u1t, u2t, config=config)
        add("parallel volume identity", vol_res,
            1e-8 * max(1.0, float(np.max(theta[tv]))))

        D1g, D2g = d_from_gamma(f, const, u1t, u2t, config=config)
        route = max(float(np.max(np.abs(D1g - s1.D1))),
                    float(np.max(np.abs(D2g - s1.D2))))
        add("connection-block route agreement", route, 1e-8)

        rep = conormal_verify(f, const, u1t, u2t, config=config)
        add("conormal identities",
            max(rep["pairing_xi"], rep["pairing_w"], rep["derivative_xi"],
                rep["derivative_w"]), 1e-8)

    # affine equivariance of the normal field, one random unimodular map
    try:
        grid = f.interior_grid((9, 9), margin=0.05)
        base = blaschke_field(f, grid=grid, config=config)
        A = rng.uniform(-1.0, 1.0, (3, 3))
        while abs(np.linalg.det(A)) < 0.2:
            A = rng.uniform(-1.0, 1.0, (3, 3))
        A = A * np.sign(np.linalg.det(A))
        A /= abs(np.linalg.det(A)) ** (1.0 / 3.0)
        image = affine_image(f, A, rng.uniform(-0.5, 0.5, 3))
        bf = blaschke_field(image, grid=grid, config=config)
        add("affine-normal equivariance",
            np.max(np.abs(bf.xi - base.xi @ A.T)), 1e-6)
    except KVanishes:
        pass
    return checks


def cmd_export(args):
    config = _build_config(args)
    f, entry = _load_frontal(args, config)
    shape = _parse_grid(args.grid)
    if args.what == "surface":
        u1, u2 = f.grid(shape)
        x = np.broadcast_to(f.x(u1, u2, 0).values_stacked(), u1.shape + (3,))
        structio.export_obj(args.out, x)
    elif args.what == "field":
        bf = blaschke_field(f, shape, config=config)
        x = np.broadcast_to(f.x(bf.u1, bf.u2, 0).values_stacked(),
                            bf.u1.shape + (3,))
        structio.export_field_csv(args.out, bf.u1, bf.u2, x, bf.xi)
    elif args.what == "structure":
        if args.field == "blaschke":
            field = blaschke_field(f, (33, 33), config=config)
        elif args.field == "normal":
            field = TransversalField.unit_normal()
        else:
            field = TransversalField.constant(
                tuple(float(v) for v in args.field.split(",")))
        sd = extract_structure(f, field, config=config)
        structio.write_structure_file(args.out, sd, shape=shape)
    else:
        raise InputError(f"unknown export kind {args.what!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


# --- argument plumbing ---------------------------------------------------------------


def _add_common(sp, grid_default="101x101"):
    sp.add_argument("--entry")
    sp.add_argument("--input")
    sp.add_argument("--grid", default=grid_default)
    sp.add_argument("--out")
    sp.add_argument("--config")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--domain")
    for key in ("h", "c", "b", "l", "r", "a"):
        sp.add_argument(f"--{key}", dest=f"p_{key}")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="frontal-lab",
        description="equiaffine invariants of frontals: analysis, affine "
                    "normals, and structure-data reconstruction")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("catalog", help="list entries or build a generator")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--save")
    sp.add_argument("--config")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--domain")
    for key in ("h", "c", "b", "l", "r", "a"):
        sp.add_argument(f"--{key}", dest=f"p_{key}")
    sp.set_defaults(fn=cmd_catalog)

    sp = sub.add_parser("analyze", help="frame data, singular scan, verdicts")
    _add_common(sp)
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("blaschke", help="affine-normal field + verification")
    _add_common(sp)
    sp.set_defaults(fn=cmd_blaschke)

    sp = sub.add_parser("reconstruct", help="integrate structure data")
    _add_common(sp, grid_default="21x21")
    sp.add_argument("--step", type=float)
    sp.add_argument("--field", default="blaschke",
                    help="blaschke | normal | cx,cy,cz (with --entry)")
    sp.set_defaults(fn=cmd_reconstruct)

    sp = sub.add_parser("check", help="property suite on one entry")
    _add_common(sp, grid_default="41x41")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("export", help="OBJ surface, CSV field, or structure")
    _add_common(sp, grid_default="41x41")
    sp.add_argument("--what", required=True,
                    choices=("surface", "field", "structure"))
    sp.add_argument("--field", default="blaschke")
    sp.set_defaults(fn=cmd_export)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except VerificationError as err:
        print(f"verification failed: {err}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (InputError, ExprSyntaxError, UnknownIdentifier, DomainError,
            OSError, ValueError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FrontalLabError as err:
        print(f"precondition failed: {err.__class__.__name__}: {err}",
              file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
