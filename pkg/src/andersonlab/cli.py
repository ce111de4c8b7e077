"""Command-line entry point: reproducible noise/operator/evolution runs.

Every command resolves its configuration (JSON file overridden by flags),
writes a manifest echoing it, and emits machine-readable CSV/JSON artifacts
whose bytes depend only on the configuration.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import anderson2d as a2
from . import anderson3d as a3
from . import fields as fl
from . import nls
from . import noise as ns
from . import propagator as pr
from . import runio
from . import strichartz as st
from . import verify as vf
from .fields import TorusField

MOLLIFIERS = {"sharp-cutoff": ns.SHARP, "smooth-bump": ns.SMOOTH}


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args, defaults):
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _enhancement(cfg):
    moll = MOLLIFIERS[cfg["mollifier"]]
    sample = ns.sample_white_noise(cfg["dim"], cfg["M"], cfg["seed"])
    if cfg["dim"] == 2:
        return ns.enhance_2d(sample, cfg["eps"], moll, amplitude=cfg["amplitude"])
    return ns.enhance_3d(sample, cfg["eps"], moll, amplitude=cfg["amplitude"])


def _operator(cfg):
    enh = _enhancement(cfg)
    if cfg["dim"] == 2:
        return a2.assemble_operator_2d(enh, K=cfg["K"], cutoff_N=cfg.get("N"))
    return a3.assemble_operator_3d(enh, K=cfg["K"], cutoff_N=cfg.get("N"))


NOISE_DEFAULTS = {"dim": 2, "M": 128, "seed": 0, "eps": 0.125,
                  "mollifier": "sharp-cutoff", "amplitude": 1.0}


def cmd_sample(args):
    cfg = _load_config(args, {"dim": 2, "M": 128, "seed": 0})
    out = _outdir(args)
    sample = ns.sample_white_noise(cfg["dim"], cfg["M"], cfg["seed"])
    fl.write_field(sample.field, out / "xi.torf")
    runio.write_json(fl.norms_summary(sample.field), out / "norms.json")
    runio.write_manifest("sample", cfg, out)
    return 0


def cmd_enhance(args):
    cfg = _load_config(args, NOISE_DEFAULTS)
    out = _outdir(args)
    enh = _enhancement(cfg)
    if cfg["dim"] == 2:
        fields = {"xi": enh.xi, "x": enh.x, "xi2": enh.xi2}
        consts = {"c_eps": enh.c_eps}
    else:
        fields = {"xi": enh.xi, "x": enh.x, "x1": enh.x1, "x2": enh.x2, "x3": enh.x3,
                  "x4": enh.x4, "x5": enh.x5, "w": enh.w, "z": enh.z}
        consts = {"c1": enh.c1_eps, "c2": enh.c2_eps}
    for name, field in fields.items():
        fl.write_field(field, out / f"{name}.torf")
    runio.write_json({**cfg, **consts, "norms": enh.norms}, out / "noise.json")
    runio.write_manifest("enhance", cfg, out)
    return 0


OPERATOR_DEFAULTS = {**NOISE_DEFAULTS, "K": None, "N": None}


def cmd_operator(args):
    cfg = _load_config(args, OPERATOR_DEFAULTS)
    if cfg["K"] is None:
        cfg["K"] = cfg["M"] // 4 if cfg["dim"] == 2 else 10
    out = _outdir(args)
    op = _operator(cfg)
    runio.write_json(op.manifest(), out / "operator.json")
    if getattr(args, "export_matrix", False):
        A = op.matrix()
        np.save(out / "matrix.npy", A)
    runio.write_manifest("operator", cfg, out)
    return 0


def cmd_spectrum(args):
    cfg = _load_config(args, OPERATOR_DEFAULTS)
    if cfg["K"] is None:
        cfg["K"] = cfg["M"] // 4 if cfg["dim"] == 2 else 10
    out = _outdir(args)
    op = _operator(cfg)
    w, _ = op.eigensystem()
    lam = np.sort(-w)  # spectrum of the positive side
    rows = [{"index": i, "lambda": float(v)} for i, v in enumerate(lam)]
    runio.write_csv(rows, ["index", "lambda"], out / "eigenvalues.csv")
    runio.write_json({"lambda_min": float(lam[0]), "lambda_max": float(lam[-1]),
                      **op.manifest()}, out / "spectrum.json")
    runio.write_manifest("spectrum", cfg, out)
    if lam[0] < 0:
        print("spectrum check failed: lambda_min %.6f < 0" % lam[0])
        return 1
    return 0


PROPAGATE_DEFAULTS = {**OPERATOR_DEFAULTS, "T": 1.0, "dt": 0.01, "data_seed": 100,
                      "stride": 25}


def cmd_propagate(args):
    cfg = _load_config(args, PROPAGATE_DEFAULTS)
    if cfg["K"] is None:
        cfg["K"] = cfg["M"] // 4 if cfg["dim"] == 2 else 10
    out = _outdir(args)
    op = _operator(cfg)
    rng = np.random.default_rng(cfg["data_seed"])
    c = rng.standard_normal((cfg["M"],) * cfg["dim"]) + 1j * rng.standard_normal((cfg["M"],) * cfg["dim"])
    u = fl.low_pass(TorusField(c), op.K // 2)
    u = (1.0 / fl.l2_norm(u)) * u
    if cfg["dim"] == 3:
        u = fl.low_pass(u, op.K)
    rows = []
    n = int(round(cfg["T"] / cfg["dt"]))
    cur = u
    for j in range(n + 1):
        t = j * cfg["dt"]
        if j > 0:
            cur = pr.anderson_propagate(cur, cfg["dt"], op)
        rows.append({"t": t, "mass": fl.l2_norm(cur) ** 2,
                     "energy": op.energy_form(cur, cur),
                     "h1": fl.sobolev_norm(cur, 1.0)})
        if j % cfg["stride"] == 0:
            fl.write_field(cur, out / ("snapshot_%06d.torf" % j))
    runio.write_csv(rows, ["t", "mass", "energy", "h1"], out / "trajectory.csv")
    runio.write_manifest("propagate", cfg, out)
    return 0


NLS_DEFAULTS = {"M": 64, "seed": 11, "eps": 0.25, "mollifier": "sharp-cutoff",
                "amplitude": 1.0, "K": 16, "N": None, "dim": 2,
                "T": 0.5, "dt": 1e-3, "s": 0.6, "sigma": 0.55, "scheme": "split",
                "data_seed": 5}


def cmd_nls(args):
    cfg = _load_config(args, NLS_DEFAULTS)
    out = _outdir(args)
    op = _operator(cfg)
    rng = np.random.default_rng(cfg["data_seed"])
    c = rng.standard_normal((cfg["M"],) * 2) + 1j * rng.standard_normal((cfg["M"],) * 2)
    us0 = fl.low_pass(TorusField(c), op.K // 2)
    us0 = (1.0 / fl.sobolev_norm(us0, cfg["s"])) * us0
    if cfg["scheme"] == "split":
        u0 = op.from_remainder(us0)
        state = nls.evolve(u0, cfg["T"], cfg["dt"], op, s=cfg["s"], sigma=cfg["sigma"],
                           record_every=max(1, int(round(cfg["T"] / cfg["dt"])) // 100))
        led = state.ledger
        rows = [{"t": led["t"][i], "mass": led["mass"][i], "energy": led["energy"][i],
                 "hs": led["hs"][i], "l4w_accum": led["l4w_accum"][i]}
                for i in range(len(led["t"]))]
        summary = nls.conserved_report(state, op)
    elif cfg["scheme"] == "picard":
        res = nls.picard(us0, cfg["T"], op, n_iter=12, n_nodes=64, s=cfg["s"])
        rows = [{"t": t, "mass": fl.l2_norm(u) ** 2,
                 "energy": nls.energy(u, op),
                 "hs": fl.sobolev_norm(us, cfg["s"]), "l4w_accum": 0.0}
                for t, u, us in zip(res["t"], res["u"], res["u_sharp"])]
        summary = {"diffs": res["diffs"]}
    else:
        print(f"unknown scheme {cfg['scheme']!r}", file=sys.stderr)
        return 2
    runio.write_csv(rows, ["t", "mass", "energy", "hs", "l4w_accum"], out / "ledger.csv")
    runio.write_json(summary, out / "summary.json")
    runio.write_manifest("nls", cfg, out)
    return 0


PRESETS = {
    "laplacian-d2-p4": {"kind": "laplacian", "d": 2, "p": 4.0, "M": 256,
                        "N_list": [8, 16, 32, 64, 128], "seeds": 20, "n_t": 128,
                        "tol": 0.2},
    "short-time-d2-p4": {"kind": "short-time", "d": 2, "p": 4.0, "M": 256,
                         "N_list": [8, 16, 32, 64, 128], "seeds": 20, "n_t": 128,
                         "tol": 0.2},
    "anderson2d-r4": {"kind": "anderson2d", "r": 4.0, "M": 256, "eps": 0.125,
                      "noise_seed": 7, "K": 32, "N_list": [6, 10, 16, 24],
                      "seeds": 20, "n_t": 128, "tol": 0.25},
    "anderson3d-p10-3": {"kind": "anderson3d", "p": 10.0 / 3.0, "M": 64, "eps": 0.5,
                         "noise_seed": 3, "K": 10, "N_list": [2, 3, 4, 5],
                         "seeds": 20, "n_t": 48, "tol": 0.35},
}


def run_preset(name: str, fast: bool = False):
    cfg = dict(PRESETS[name])
    if fast:
        cfg["seeds"] = min(cfg["seeds"], 4)
        cfg["n_t"] = max(32, cfg["n_t"] // 2)
        cfg["N_list"] = cfg["N_list"][:3]
        if cfg["kind"] in ("laplacian", "short-time"):
            cfg["M"] = 128
        if cfg["kind"] == "anderson2d":
            cfg["M"], cfg["K"], cfg["eps"] = 64, 16, 0.25
            cfg["N_list"] = [3, 4, 6]
    seeds = range(cfg["seeds"])
    if cfg["kind"] == "laplacian":
        return st.laplacian_scaling(cfg["d"], cfg["p"], cfg["N_list"], seeds,
                                    M=cfg["M"], n_t=cfg["n_t"], tol=cfg["tol"]), cfg
    if cfg["kind"] == "short-time":
        return st.short_time_scaling(cfg["d"], cfg["p"], cfg["N_list"], seeds,
                                     M=cfg["M"], n_t=cfg["n_t"], tol=cfg["tol"]), cfg
    dim = 2 if cfg["kind"] == "anderson2d" else 3
    sample = ns.sample_white_noise(dim, cfg["M"], cfg["noise_seed"])
    if dim == 2:
        enh = ns.enhance_2d(sample, cfg["eps"])
        op = a2.assemble_operator_2d(enh, K=cfg["K"])
        return st.anderson_scaling_2d(cfg["r"], cfg["N_list"], seeds, op,
                                      n_t=cfg["n_t"], tol=cfg["tol"]), cfg
    enh = ns.enhance_3d(sample, cfg["eps"])
    op = a3.assemble_operator_3d(enh, K=cfg["K"])
    return st.anderson_scaling_3d(cfg["p"], cfg["N_list"], seeds, op,
                                  n_t=cfg["n_t"], tol=cfg["tol"]), cfg


def cmd_strichartz(args):
    out = _outdir(args)
    if args.preset not in PRESETS:
        print(f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}", file=sys.stderr)
        return 2
    report, cfg = run_preset(args.preset, fast=args.fast)
    runio.write_csv(list(report.rows()),
                    ["generator", "d", "p", "sigma", "N", "seed", "norm", "data_norm"],
                    out / "cells.csv")
    runio.write_json(report.summary(), out / "summary.json")
    runio.write_manifest("strichartz", {"preset": args.preset, "fast": args.fast, **cfg}, out)
    print("%s: slope %.4f (theory %.4f, tol %.2f) -> %s"
          % (args.preset, report.slope, report.theory_slope, report.tol,
             "pass" if report.passed else "FAIL"))
    return 0 if report.passed else 1


def cmd_verify(args):
    out = _outdir(args)
    results = vf.run_suite(args.profile)
    width = max(len(r["check"]) for r in results)
    for r in results:
        print("%-*s  %s  %s" % (width, r["check"], "PASS" if r["pass"] else "FAIL", r["detail"]))
    report = {"profile": args.profile, "results": results,
              "all_pass": all(r["pass"] for r in results)}
    runio.write_json(report, out / "verify.json")
    runio.write_manifest("verify", {"profile": args.profile}, out)
    if not report["all_pass"]:
        failing = [r["check"] for r in results if not r["pass"]]
        print("failing checks: %s" % ", ".join(failing), file=sys.stderr)
        return 1
    return 0


def _add_common(p, defaults):
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--out", default="runs/latest", help="output directory")
    for key, val in defaults.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            p.add_argument(flag, action="store_true")
        elif isinstance(val, int) or val is None:
            p.add_argument(flag, type=int)
        elif isinstance(val, float):
            p.add_argument(flag, type=float)
        else:
            p.add_argument(flag, type=type(val))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="andersonlab",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a white-noise sample")
    _add_common(p, {"dim": 2, "M": 128, "seed": 0})
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("enhance", help="build the renormalized enhancement")
    _add_common(p, NOISE_DEFAULTS)
    p.set_defaults(fn=cmd_enhance)

    p = sub.add_parser("operator", help="assemble the renormalized operator")
    _add_common(p, OPERATOR_DEFAULTS)
    p.add_argument("--export-matrix", action="store_true")
    p.set_defaults(fn=cmd_operator)

    p = sub.add_parser("spectrum", help="eigenvalues of the positive side")
    _add_common(p, OPERATOR_DEFAULTS)
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("propagate", help="unitary evolution with ledger")
    _add_common(p, PROPAGATE_DEFAULTS)
    p.set_defaults(fn=cmd_propagate)

    p = sub.add_parser("nls", help="cubic defocusing evolution")
    _add_common(p, NLS_DEFAULTS)
    p.set_defaults(fn=cmd_nls)

    p = sub.add_parser("strichartz", help="frequency-scaling measurement")
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--fast", action="store_true", help="reduced smoke-test configuration")
    p.add_argument("--out", default="runs/latest")
    p.set_defaults(fn=cmd_strichartz)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--profile", default="standard", choices=["quick", "standard"])
    p.add_argument("--out", default="runs/latest")
    p.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
