"""Command-line front end.

Exit codes: 0 ok, 1 verification failed, 2 usage error, 3 solver limit
without a feasible solution, 4 unsupported combination.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .classify import (SolverLimitError, accuracy, binaries_of, load_model, predict_batch, save_model,
                       train)
from .core import Dataset, DegenerateModelError, Hyperparameters
from .data import generate_clouds, grid_search_cv, load_csv, read_table, save_csv
from .duality import verify_strong_duality
from .formulation import build_model, export_json, export_mps
from .solver import SolveOptions

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_LIMIT, EXIT_UNSUPPORTED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _label_col(text):
    return int(text) if text.lstrip("-").isdigit() else text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyparc", description="Multiclass classification with hyperplane arrangements")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic Gaussian clouds to CSV")
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--clouds", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--separation", type=float, default=6.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="fit a model and write it as JSON")
    t.add_argument("--data", required=True)
    t.add_argument("--label-col", type=_label_col, default=-1)
    t.add_argument("--m", type=int, default=2)
    t.add_argument("--c1", type=float, default=1.0)
    t.add_argument("--c2", type=float, default=None)
    t.add_argument("--norm", choices=("l1", "l2"), default="l2")
    t.add_argument("--loss", choices=("hinge", "ramp"), default="hinge")
    t.add_argument("--heuristic", choices=("on", "off", "auto"), default="auto")
    t.add_argument("--tau", type=float, default=None)
    t.add_argument("--theta", type=float, default=None)
    t.add_argument("--time-limit", type=float, default=300.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--model-out", default=None)
    t.add_argument("--export-mps", default=None, metavar="PATH")

    p = sub.add_parser("predict", help="write predicted labels to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", type=_label_col, default=None,
                   help="column to ignore when the file carries labels")
    p.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="print the accuracy on labelled data")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--label-col", type=_label_col, default=-1)

    c = sub.add_parser("cv", help="nested cross-validated grid search")
    c.add_argument("--data", required=True)
    c.add_argument("--label-col", type=_label_col, default=-1)
    c.add_argument("--m-grid", type=_ints, default=None)
    c.add_argument("--c-grid", type=_floats, default=None)
    c.add_argument("--norm", choices=("l1", "l2"), default="l2")
    c.add_argument("--loss", choices=("hinge", "ramp"), default="hinge")
    c.add_argument("--outer-folds", type=int, default=5)
    c.add_argument("--inner-folds", type=int, default=4)
    c.add_argument("--heuristic", choices=("on", "off", "auto"), default="auto")
    c.add_argument("--time-limit", type=float, default=300.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--metadata-out", default=None)

    d = sub.add_parser("verify-duality", help="strong-duality check of a trained l2 model")
    d.add_argument("--data", required=True)
    d.add_argument("--model", required=True)
    d.add_argument("--label-col", type=_label_col, default=-1)
    d.add_argument("--tol", type=float, default=1e-6)

    v = sub.add_parser("plot-data", help="points and cell boundaries of a 2-D instance as JSON")
    v.add_argument("--data", required=True)
    v.add_argument("--label-col", type=_label_col, default=-1)
    v.add_argument("--model", default=None)
    v.add_argument("--out", default=None)
    return ap


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands
def cmd_generate(a):
    try:
        data = generate_clouds(a.classes, a.clouds, a.n, a.dim, a.separation, a.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_csv(data, a.out)
    print(f"wrote {data.n} rows to {a.out}")
    return EXIT_OK


def _params(a) -> Hyperparameters:
    if a.m < 1:
        raise UsageError("--m must be >= 1")
    if a.c1 < 0 or (a.c2 is not None and a.c2 < 0):
        raise UsageError("costs must be nonnegative")
    hp = Hyperparameters(m=a.m, C1=a.c1, C2=a.c2, norm=a.norm, loss=a.loss)
    if a.c2 is None:
        print(f"C2 = m*C1 = {hp.C2:g}")
    return hp


def cmd_train(a):
    data = _load(a.data, a.label_col)
    hp = _params(a)
    if 2 ** hp.m < data.k:
        raise UsageError(f"--m {hp.m} gives at most {2 ** hp.m} cells for {data.k} classes")
    if a.export_mps:
        model = build_model(data, hp)
        if model.is_linear:
            _write(a.export_mps, export_mps(model))
        else:
            print("warning: quadratic terms exported only in JSON form", file=sys.stderr)
            _write(a.export_mps, export_json(model))
        print(f"exported model to {a.export_mps}")
        if a.model_out is None:
            return EXIT_OK
    opts = SolveOptions(time_limit=a.time_limit, seed=a.seed)
    try:
        tm = train(data, hp, heuristic=a.heuristic, tau=a.tau, theta=a.theta, options=opts, seed=a.seed)
    except SolverLimitError as exc:
        print(f"status limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    gap = tm.extra.get("gap")
    print(f"objective {tm.objective:.6f}")
    print(f"gap {'n/a' if gap is None else f'{gap:.6g}'}")
    print(f"status {tm.status}")
    if a.model_out:
        save_model(tm, a.model_out)
        print(f"model written to {a.model_out}")
    return EXIT_OK


def _load(path, label_col) -> Dataset:
    try:
        return load_csv(path, label_col)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _raw(path, label_col):
    try:
        return read_table(path, label_col)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _names(model, ids):
    if model.label_names is None:
        return [str(int(i)) for i in ids]
    return [str(model.label_names[int(i) - 1]) for i in ids]


def cmd_predict(a):
    model = load_model(a.model)
    X, _, _ = _raw(a.data, a.label_col)
    if X.shape[1] != model.arrangement.p:
        raise UsageError(f"model expects {model.arrangement.p} features, data has {X.shape[1]}")
    names = _names(model, predict_batch(model, X))
    _write(a.out, "prediction\n" + "".join(f"{s}\n" for s in names))
    print(f"wrote {len(names)} predictions to {a.out}")
    return EXIT_OK


def cmd_evaluate(a):
    model = load_model(a.model)
    X, labels, _ = _raw(a.data, a.label_col)
    if labels is None:
        raise UsageError("evaluate needs a label column")
    if X.shape[1] != model.arrangement.p:
        raise UsageError(f"model expects {model.arrangement.p} features, data has {X.shape[1]}")
    names = _names(model, predict_batch(model, X))
    print(f"ACC {accuracy(names, labels):.2f}")
    return EXIT_OK


def cmd_cv(a):
    data = _load(a.data, a.label_col)
    if a.outer_folds < 2 or a.inner_folds < 2:
        raise UsageError("folds must be >= 2")
    from .classify import default_trainer
    opts = SolveOptions(time_limit=a.time_limit, seed=a.seed)
    trainer = default_trainer(opts, a.seed, a.heuristic)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = grid_search_cv(data, a.m_grid, a.c_grid, a.outer_folds, a.inner_folds, opts, a.loss, a.norm,
                             a.seed, trainer)
    print("m\tC1\tC2\tinner ACC")
    for (m, c1, c2), acc in res.table.items():
        print(f"{m}\t{c1:g}\t{c2:g}\t{acc:.2f}")
    print(f"best m={res.best.m} C1={res.best.C1:g} C2={res.best.C2:g}")
    print(f"outer ACC {res.mean_acc:.2f}")
    if a.metadata_out:
        meta = {"seed": a.seed, "outer_folds": a.outer_folds, "inner_folds": a.inner_folds,
                "stratified": True, "m_grid": list(a.m_grid) if a.m_grid else None,
                "c_grid": list(a.c_grid) if a.c_grid else None, "norm": a.norm, "loss": a.loss,
                "normalization": {"means": data.means.tolist(), "scales": data.scales.tolist()},
                "table": [[m, c1, c2, acc] for (m, c1, c2), acc in res.table.items()],
                "best": res.best.as_dict(), "outer_acc": res.outer_acc,
                "failures": [list(f) for f in res.failures]}
        _write(a.metadata_out, _dump(meta))
    return EXIT_OK


def cmd_verify(a):
    model = load_model(a.model)
    if model.hyperparams.norm != "l2":
        print("unsupported norm: the strong-duality check covers the l2 margin only", file=sys.stderr)
        return EXIT_UNSUPPORTED
    X, labels, _ = _raw(a.data, a.label_col)
    if labels is None:
        raise UsageError("verify-duality needs the labelled training data")
    names = list(model.label_names) if model.label_names is not None else sorted(set(labels))
    try:
        y = np.array([names.index(s) + 1 for s in labels])
    except ValueError:
        raise UsageError("data labels do not match the model") from None
    Xn = (X - model.means) / model.scales if model.means is not None else X
    data = Dataset(Xn, y, len(names))
    b = binaries_of(model, data)
    report = verify_strong_duality(data, model.hyperparams, b, a.tol, T=model.extra.get("T"))
    sys.stdout.write(_dump(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_FAIL


def _clip_line(w, w0, box):
    """Segment of {x : w.x + w0 = 0} inside the box (xmin, xmax, ymin, ymax)."""
    xmin, xmax, ymin, ymax = box
    pts = []
    if abs(w[1]) > 1e-15:
        for x in (xmin, xmax):
            y = -(w0 + w[0] * x) / w[1]
            if ymin - 1e-12 <= y <= ymax + 1e-12:
                pts.append((x, y))
    if abs(w[0]) > 1e-15:
        for y in (ymin, ymax):
            x = -(w0 + w[1] * y) / w[0]
            if xmin - 1e-12 <= x <= xmax + 1e-12:
                pts.append((x, y))
    pts = sorted(set((round(x, 12), round(y, 12)) for x, y in pts))
    return [list(pts[0]), list(pts[-1])] if len(pts) >= 2 else []


def cmd_plot(a):
    X, labels, names = _raw(a.data, a.label_col)
    if X.shape[1] != 2:
        print("plot-data supports 2-D only", file=sys.stderr)
        return EXIT_USAGE
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    box = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
    out = {"features": names, "box": [float(v) for v in box],
           "points": [{"x": [float(v) for v in x], "label": lab}
                      for x, lab in zip(X, labels if labels is not None else [None] * len(X))],
           "boundaries": []}
    if a.model:
        model = load_model(a.model)
        if model.arrangement.p != 2:
            print("plot-data supports 2-D only", file=sys.stderr)
            return EXIT_USAGE
        means = model.means if model.means is not None else np.zeros(2)
        scales = model.scales if model.scales is not None else np.ones(2)
        for r, (w, w0) in enumerate(zip(model.arrangement.omega, model.arrangement.omega0)):
            wr = w / scales
            seg = _clip_line(wr, w0 - wr @ means, box)
            out["boundaries"].append({"hyperplane": r, "polyline": seg})
        out["cells"] = {"".join("+" if s > 0 else "-" for s in k): v for k, v in sorted(model.cell_table.items())}
    _write(a.out, _dump(out))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "cv": cmd_cv, "verify-duality": cmd_verify, "plot-data": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except DegenerateModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
