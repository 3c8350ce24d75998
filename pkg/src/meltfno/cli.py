"""Command-line entry points for the whole pipeline.

Subcommands: plan, gen, prep, train, kfold, eval, superres, infer, serve,
bench. Every command exits 0 on success and nonzero with a diagnostic on
stderr otherwise; --json prints a machine-readable result to stdout.
Dataset-producing commands write into a temporary sibling directory and
rename on completion, so a failed run never leaves a partial dataset.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time

import numpy as np

from .enthalpy import TI64, SamplingPlan, build_plan, make_params
from .fields import Dataset, Grid3, subsample_bundle
from .metrics import bundle_metrics, rel_rmse, write_process_map_csv
from .model import (ModelConfig, build_model, default_grid, infer,
                    infer_superresolved, load_checkpoint, model_info,
                    save_checkpoint)
from .oracle import OracleConfig, generate_dataset, transient_sequence
from .preprocess import load_sequence, quasi_steady_sample
from .training import RunConfig, entry_params, evaluate, kfold, train


def _range_spec(text: str):
    """START:STOP:COUNT -> (start, stop, count)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected START:STOP:COUNT, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _bounds_spec(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _modes_spec(text: str):
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected m1,m2,m3, got {text!r}")
    return tuple(parts)


def _grid_spec(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected nx,ny,nz,dx, got {text!r}")
    return Grid3(int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3]))


def _emit(obj, args, human: str | None = None):
    if getattr(args, "json", False):
        json.dump(obj, sys.stdout, indent=2, default=float)
        sys.stdout.write("\n")
    elif human:
        print(human)


def _fresh_dir(path: str) -> str:
    if os.path.exists(path):
        raise FileExistsError(f"refusing to overwrite existing {path}")
    return path + ".tmp"


def _commit_dir(tmp: str, path: str) -> None:
    os.replace(tmp, path)


def _model_config_from_args(args, grid: Grid3) -> ModelConfig:
    return ModelConfig(modes=args.modes, padding=args.padding,
                       latent_width=args.width, dtype=args.dtype,
                       h_star_channel=args.h_star_channel,
                       reference_dx=grid.dx)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_plan(args) -> int:
    p0, p1, n_p = args.p
    h0, h1, n_h = args.h
    plan = build_plan((p0, p1), (h0, h1), n_p, n_h, v_bounds=args.v_bounds,
                      seed=args.seed)
    if args.out:
        plan.save(args.out)
    _emit(plan.to_json(), args,
          f"plan: {len(plan.points)} points ({len(plan.excluded)} excluded)"
          + (f" -> {args.out}" if args.out else ""))
    return 0


def cmd_gen(args) -> int:
    plan = SamplingPlan.load(args.plan)
    cfg = OracleConfig(grid=args.grid, r_min=args.r_min,
                       laser_x_fraction=args.laser_frac,
                       depression=not args.no_depression)
    tmp = _fresh_dir(args.out)
    try:
        manifest = generate_dataset(plan, cfg, tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit_dir(tmp, args.out)
    _emit({"samples": len(manifest.samples), "out": args.out}, args,
          f"gen: wrote {len(manifest.samples)} samples to {args.out}")
    return 0


def cmd_prep(args) -> int:
    seq = load_sequence(args.seq)
    bundle, steady = quasi_steady_sample(seq, args.v, n=args.window,
                                         steady_tol_k=args.steady_tol)
    from .fields import DatasetManifest, save_manifest, write_bundle
    params = make_params(args.power, args.v, TI64)
    tmp = _fresh_dir(args.out)
    try:
        manifest = DatasetManifest(grid=seq.grid, material=TI64.to_json(),
                                   provenance="external-simulation")
        entry = write_bundle(bundle, tmp, args.sample_id, power_w=args.power,
                             v_scan_m_s=args.v, h_star=params.h_star,
                             split=args.split)
        manifest.samples.append(entry)
        save_manifest(manifest, tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit_dir(tmp, args.out)
    _emit({"sample": args.sample_id, "steady": steady, "out": args.out}, args,
          f"prep: wrote {args.sample_id} (steady={steady}) to {args.out}")
    if not steady:
        print("warning: temperature difference curve never fell below "
              f"{args.steady_tol} K; sample flagged unsteady", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    dataset = Dataset(args.data)
    cfg = _model_config_from_args(args, dataset.grid)
    model = build_model(cfg, seed=args.seed, grid=dataset.grid)
    run = RunConfig(steps=args.steps, base_lr=args.lr, seed=args.seed,
                    eval_interval=args.eval_interval)
    trained, history = train(model, dataset, run)
    save_checkpoint(trained, args.out)
    if args.history:
        with open(args.history, "w") as fh:
            for row in history:
                fh.write(json.dumps(row) + "\n")
    final = history[-1] if history else {}
    _emit({"checkpoint": args.out, "steps": len(history),
           "final": {k: final.get(k) for k in ("loss_T", "loss_alpha",
                                               "loss_fl", "total")}},
          args, f"train: {len(history)} steps -> {args.out}")
    return 0


def cmd_kfold(args) -> int:
    dataset = Dataset(args.data)
    cfg = _model_config_from_args(args, dataset.grid)
    model = build_model(cfg, seed=args.seed, grid=dataset.grid)
    run = RunConfig(steps=args.steps, base_lr=args.lr, seed=args.seed,
                    eval_interval=0)
    report = kfold(model, dataset, run, k=args.k, seed=args.seed)
    out = {"k": report["k"], "aggregate": report["aggregate"],
           "folds": [{"fold": f["fold"], "test_ids": f["test_ids"],
                      "metrics": f["metrics"]} for f in report["folds"]]}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)
    _emit(out, args, f"kfold: {report['k']} folds, "
          f"rel_rmse(T) mean {report['aggregate']['T']['rel_rmse']['mean']:.4f}")
    return 0


def cmd_eval(args) -> int:
    dataset = Dataset(args.data)
    model = load_checkpoint(args.ckpt)
    ids = dataset.ids(args.split) if args.split != "all" else dataset.ids()
    report = evaluate(model, dataset, ids)
    if args.csv:
        write_process_map_csv(report["rows"], args.csv)
    if args.rows_json:
        with open(args.rows_json, "w") as fh:
            json.dump(report["rows"], fh, indent=2)
    _emit({"metrics": report["metrics"], "n_samples": len(ids)}, args,
          f"eval: {len(ids)} samples, rel_rmse(T) "
          f"{report['metrics']['T']['rel_rmse']:.4f}, "
          f"IoU(fl) {report['metrics']['fl']['iou']:.4f}")
    return 0


def cmd_superres(args) -> int:
    dataset = Dataset(args.data)
    model = load_checkpoint(args.ckpt)
    coarse = dataset.grid
    f = args.factor
    fine = Grid3(coarse.nx * f, coarse.ny * f, coarse.nz * f, coarse.dx / f,
                 coarse.origin)
    rows = []
    for sid in dataset.ids(args.split):
        entry = dataset.manifest.entry(sid)
        params = entry_params(entry)
        pred_coarse = infer(model, params, coarse)
        pred_fine = infer_superresolved(model, params, fine)
        sub = subsample_bundle(pred_fine, f)
        consistency = rel_rmse([sub.T.values], [pred_coarse.T.values])
        row = {"id": sid, "power_w": entry.power_w,
               "v_scan_m_s": entry.v_scan_m_s, "h_star": entry.h_star,
               "rel_rmse_T_fine_vs_coarse": consistency}
        target = dataset.load(sid)
        row["rel_rmse_T_coarse_vs_reference"] = rel_rmse(
            [pred_coarse.T.values], [target.T.values])
        rows.append(row)
    _emit({"factor": f, "rows": rows}, args,
          "superres: " + ", ".join(
              f"{r['id']}={r['rel_rmse_T_fine_vs_coarse']:.4f}" for r in rows))
    return 0


def cmd_infer(args) -> int:
    model = load_checkpoint(args.ckpt)
    grid = args.grid if args.grid else None
    if grid is None:
        prov = model.provenance or {}
        grid = (Grid3.from_json(prov["grid"]) if isinstance(prov.get("grid"), dict)
                else default_grid(model.cfg.reference_dx))
    params = make_params(args.power, args.v, model.cfg.material)
    bundle = infer(model, params, grid)
    from .service import meltpool_summary
    out = {
        "grid": grid.to_json(),
        "power_w": args.power, "v_scan_m_s": args.v, "h_star": params.h_star,
        "meltpool": meltpool_summary(bundle, grid),
        "stats": {name: {"min": float(getattr(bundle, name).values.min()),
                         "max": float(getattr(bundle, name).values.max())}
                  for name in ("T", "alpha", "fl")},
    }
    if args.out:
        np.savez(args.out, T=bundle.T.as_3d(), alpha=bundle.alpha.as_3d(),
                 fl=bundle.fl.as_3d())
        out["arrays"] = args.out
    _emit(out, args, f"infer: max T {out['stats']['T']['max']:.1f} K, "
          f"melt pool {out['meltpool']['cells']} cells")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    bind = os.environ.get("MELTFNO_BIND")
    host, port = args.host, args.port
    if bind:
        host, _, port_s = bind.partition(":")
        port = int(port_s or port)
    app = create_app(checkpoint_dir=args.ckpt,
                     process_map_path=args.process_map)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def _time_call(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(args) -> int:
    if args.ckpt:
        model = load_checkpoint(args.ckpt)
        prov = model.provenance or {}
        grid = (Grid3.from_json(prov["grid"]) if isinstance(prov.get("grid"), dict)
                else default_grid(model.cfg.reference_dx))
    else:
        grid = args.grid if args.grid else default_grid()
        cfg = _model_config_from_args(args, grid)
        model = build_model(cfg, seed=args.seed, grid=grid)
    params = make_params(args.power, args.v, model.cfg.material)
    fine = Grid3(grid.nx * 2, grid.ny * 2, grid.nz * 2, grid.dx / 2,
                 grid.origin)

    oc = OracleConfig(grid=grid, r_min=args.r_min)

    def regenerate():
        seq = transient_sequence(params, oc)
        quasi_steady_sample(seq, params.v_scan_m_s)

    from .oracle import generate_sample
    t_regen = _time_call(regenerate, repeats=args.repeats)
    t_direct = _time_call(lambda: generate_sample(params, oc),
                          repeats=args.repeats)
    t_coarse = _time_call(lambda: infer(model, params, grid),
                          repeats=args.repeats)
    t_fine = _time_call(lambda: infer_superresolved(model, params, fine),
                        repeats=args.repeats)
    out = {
        "grid": grid.to_json(),
        "power_w": params.power_w, "v_scan_m_s": params.v_scan_m_s,
        "oracle_transient_regen_s": t_regen,
        "oracle_direct_s": t_direct,
        "infer_coarse_s": t_coarse,
        "infer_fine_2x_s": t_fine,
        "regen_over_coarse": t_regen / t_coarse,
        "fine_over_coarse": t_fine / t_coarse,
    }
    _emit(out, args,
          f"bench: regen {t_regen:.3f}s, coarse {t_coarse:.3f}s "
          f"({out['regen_over_coarse']:.1f}x), fine/coarse "
          f"{out['fine_over_coarse']:.2f}x")
    return 0


# ---------------------------------------------------------------------------

def _add_model_args(p):
    p.add_argument("--width", type=int, default=24)
    p.add_argument("--modes", type=_modes_spec, default=(12, 10, 8))
    p.add_argument("--padding", type=int, default=9)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--h-star-channel", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meltfno")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable JSON on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build a process-window sampling plan")
    p.add_argument("--p", type=_range_spec, required=True,
                   help="power START:STOP:COUNT (watts)")
    p.add_argument("--h", type=_range_spec, required=True,
                   help="normalized enthalpy START:STOP:COUNT")
    p.add_argument("--v-bounds", type=_bounds_spec, default=(0.1, 1.0))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("gen", help="generate an oracle dataset from a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=_grid_spec, default=Grid3(45, 20, 15, 2e-5))
    p.add_argument("--r-min", type=float, default=TI64.sigma_beam,
                   help="source clamp radius in meters")
    p.add_argument("--laser-frac", type=float, default=2.0 / 3.0)
    p.add_argument("--no-depression", action="store_true")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("prep", help="reduce a transient sequence to one sample")
    p.add_argument("--seq", required=True)
    p.add_argument("--power", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sample-id", default="prep0")
    p.add_argument("--split", default="train",
                   choices=("train", "validation", "test"))
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--steady-tol", type=float, default=1.0)
    p.set_defaults(fn=cmd_prep)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=6e-5)
    p.add_argument("--eval-interval", type=int, default=500)
    p.add_argument("--history")
    _add_model_args(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("kfold", help="k-fold cross validation")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=6e-5)
    p.add_argument("--out")
    _add_model_args(p)
    p.set_defaults(fn=cmd_kfold)

    p = sub.add_parser("eval", help="metrics and process-map export")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default="test",
                   choices=("train", "validation", "test", "all"))
    p.add_argument("--csv")
    p.add_argument("--rows-json")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("superres", help="fine-grid inference consistency")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--factor", type=int, default=2)
    p.add_argument("--split", default="test",
                   choices=("train", "validation", "test"))
    p.set_defaults(fn=cmd_superres)

    p = sub.add_parser("infer", help="one prediction from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--power", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--grid", type=_grid_spec)
    p.add_argument("--out", help="write arrays to an .npz file")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("serve", help="HTTP inference service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--process-map", help="JSON rows for /v1/process-map")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="runtime comparison table")
    p.add_argument("--ckpt")
    p.add_argument("--grid", type=_grid_spec)
    p.add_argument("--power", type=float, default=50.0)
    p.add_argument("--v", type=float, default=0.26)
    p.add_argument("--r-min", type=float, default=TI64.sigma_beam)
    p.add_argument("--repeats", type=int, default=3)
    _add_model_args(p)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
