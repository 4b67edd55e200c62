"""Command line front end.

Every subcommand reads one JSON experiment document (``--config``), writes
its outputs under ``--out`` and prints a short report. Errors end with a
nonzero exit and a line ``error: <category>: <message>`` on stderr, where
the category comes from the exception class.

Config layout (all sections optional except those a command needs)::

    {
      "seed": 0,
      "pde": {"kind": "diffusion", "dim": 1},
      "data": {"points": [[-1.0], [1.0]], "weights": [0.3, 0.7]},
      "field": {"x": [-3, 3, 121], "t": [0.05, 2, 80]},
      "sample": {"T": 100, "t_min": 0.001, "steps": 200, "particles": 10000},
      "overlap": {"x1": [0.0], "x2": [1.0], "T": [0.1, 1, 10]},
      "residual": {"points": [[0.5], [1.5]], "times": [0.5, 1.0]}
    }
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import dispersion, metrics, sampler
from .density_flow import DeltaMixture, default_T, fields
from .errors import ConfigError, GenPhysError, RenderDimensionError
from .pde_catalog import Kind, PdeSpec, matching_for

_TOP_KEYS = {"name", "description", "seed", "pde", "data", "field", "sample",
             "overlap", "residual"}
_SECTION_KEYS = {
    "data": {"points", "weights"},
    "field": {"x", "y", "t", "png"},
    "sample": {"T", "t_min", "steps", "spacing", "particles", "branching",
               "bounds", "bins"},
    "overlap": {"x1", "x2", "T", "k_max", "nodes"},
    "residual": {"points", "times", "h", "richardson"},
}


def _fmt(v) -> str:
    return format(float(v), ".17g")


def load_config(path) -> dict:
    """Read and shape-check an experiment document.

    Raises
    ------
    ConfigError
        Unreadable JSON, or an unknown key (named in the message).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", key=str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}", key=str(path)) from None
    return check_config(cfg)


def check_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", key="<root>")
    for key in cfg:
        if key not in _TOP_KEYS:
            raise ConfigError("unknown key", key=key)
    for section, allowed in _SECTION_KEYS.items():
        body = cfg.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError("section must be an object", key=section)
        for key in body:
            if key not in allowed:
                raise ConfigError("unknown key", key=f"{section}.{key}")
    if "pde" in cfg:
        PdeSpec.from_dict(cfg["pde"])
    return cfg


def _need(cfg, section):
    if section not in cfg:
        raise ConfigError("missing section", key=section)
    return cfg[section]


def _pde(cfg) -> PdeSpec:
    return PdeSpec.from_dict(_need(cfg, "pde"))


def _data(cfg, pde: PdeSpec) -> DeltaMixture:
    body = _need(cfg, "data")
    if "points" not in body:
        raise ConfigError("missing key", key="data.points")
    pts = np.asarray(body["points"], dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None] if pde.dim_n == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != pde.dim_n:
        raise ConfigError(f"points must have {pde.dim_n} coordinates each", key="data.points")
    return DeltaMixture(pts, body.get("weights"))


def _axis(spec, key):
    try:
        lo, hi, n = spec
        n = int(n)
    except (TypeError, ValueError):
        raise ConfigError("expected [lo, hi, count]", key=key) from None
    if n < 2 or not hi > lo:
        raise ConfigError("need hi > lo and count >= 2", key=key)
    return np.linspace(float(lo), float(hi), n)


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _render(path, img, extent, xlabel, ylabel, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    finite = np.abs(img[np.isfinite(img)])
    lim = float(np.percentile(finite, 99.5)) if finite.size else 1.0
    lim = lim if lim > 0 else 1.0
    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(img, origin="lower", aspect="auto", extent=extent, cmap="RdBu_r",
                   vmin=-lim, vmax=lim)
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_field(args, cfg) -> int:
    pde = _pde(cfg)
    data = _data(cfg, pde)
    body = _need(cfg, "field")
    n = pde.dim_n
    if n > 2:
        raise RenderDimensionError(f"field grids are rendered for N <= 2 (got N = {n})")
    out = _out_dir(args)
    xs = _axis(body.get("x"), "field.x")
    if n == 1:
        ts = _axis(body.get("t"), "field.t")
        pts = xs[:, None]
    else:
        ys = _axis(body.get("y"), "field.y")
        t = body.get("t")
        if not isinstance(t, (int, float)) or not t > 0:
            raise ConfigError("N = 2 fields use a single positive time", key="field.t")
        ts = np.array([float(t)])
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
    complex_phi = pde.kind is Kind.SCHROEDINGER
    header = [f"x{j + 1}" for j in range(n)] + ["t"]
    header += ["phi_re", "phi_im"] if complex_phi else ["phi"]
    header += ["p"] + [f"v{j + 1}" for j in range(n)] + ["R"]
    rows = []
    image = []
    for t in ts:
        fb = fields(pde, data, pts, float(t), on_singular="nan")
        image.append(np.real(fb.phi))
        for i in range(pts.shape[0]):
            row = [_fmt(c) for c in pts[i]] + [_fmt(t)]
            if complex_phi:
                row += [_fmt(fb.phi[i].real), _fmt(fb.phi[i].imag)]
            else:
                row.append(_fmt(fb.phi[i]))
            row += [_fmt(fb.p[i])] + [_fmt(c) for c in fb.v[i]] + [_fmt(fb.r_term[i])]
            rows.append(row)
    csv_path = os.path.join(out, "field.csv")
    _write_csv(csv_path, header, rows)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    if body.get("png", True):
        png = os.path.join(out, "field.png")
        label = "Re phi" if pde.kind in (Kind.SCHROEDINGER, Kind.HELMHOLTZ) else "phi"
        if n == 1:
            img = np.array(image)
            _render(png, img, (xs[0], xs[-1], ts[0], ts[-1]), "x", "t",
                     f"{label}: {pde.label()}")
        else:
            img = image[0].reshape(ys.size, xs.size)
            _render(png, img, (xs[0], xs[-1], ys[0], ys[-1]), "x", "y",
                    f"{label} at t={ts[0]:g}: {pde.label()}")
        print(f"wrote {png}")
    return 0


def _pde_from_flags(args) -> PdeSpec:
    body = {"kind": args.pde, "dim": args.dim}
    for name in ("eps", "k0", "m", "a", "b", "beta"):
        value = getattr(args, name)
        if value is not None:
            body[name] = value
    return PdeSpec.from_dict(body)


def cmd_classify(args, cfg) -> int:
    if args.pde is not None:
        pde = _pde_from_flags(args)
    else:
        pde = _pde(cfg)
    report = dispersion.classify(pde)
    print(report.summary())
    out = _out_dir(args)
    path = os.path.join(out, "branches.csv")
    dispersion.write_branches_csv(report, path)
    print(f"wrote {path}")
    return 0


def _density_at(pde, data, t):
    def density(x):
        return fields(pde, data, x, t).p
    return density


def cmd_sample(args, cfg) -> int:
    pde = _pde(cfg)
    data = _data(cfg, pde)
    body = dict(cfg.get("sample", {}))
    seed = _seed(args, cfg)
    T = float(body.get("T", default_T(pde, data)))
    sched = sampler.Schedule(T, float(body.get("t_min", 1e-3)), int(body.get("steps", 200)),
                             body.get("spacing", "geometric"))
    n = int(body.get("particles", 10000))
    ens = sampler.sample_prior(pde, data, T, n, seed)
    ens = sampler.integrate_backward(pde, data, ens, sched,
                                     branching=bool(body.get("branching", True)))
    out = _out_dir(args)
    path = os.path.join(out, "samples.csv")
    meta = {"pde": pde.label(), "T": _fmt(T), "t_min": _fmt(sched.t_min),
            "steps": sched.steps, "spacing": sched.spacing, "seed": seed}
    sampler.write_csv(ens, path, meta)

    summary = {"pde": pde.label(), "seed": seed, "T": T, "t_min": sched.t_min,
               "steps": sched.steps, "particles": ens.n}
    fr = sampler.mode_fractions(pde, data, ens)
    summary["mode_fractions"] = [float(f) for f in fr]
    w = ens.normalized_weights()
    if pde.dim_n == 1:
        summary["positive_fraction"] = float(np.sum(w[ens.x[:, 0] > 0]))
        lo = float(data.points.min()) - 3.0
        hi = float(data.points.max()) + 3.0
        bounds = tuple(body.get("bounds", (lo, hi)))
        w1, l1 = metrics.sample_distance(ens, _density_at(pde, data, sched.t_min),
                                         bounds=bounds, bins=int(body.get("bins", 100)))
        summary["wasserstein1"] = w1
        summary["l1_hist"] = l1
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    print(f"wrote {path}")
    return 0


def cmd_overlap(args, cfg) -> int:
    pde = _pde(cfg)
    body = _need(cfg, "overlap")
    for key in ("x1", "x2", "T"):
        if key not in body:
            raise ConfigError("missing key", key=f"overlap.{key}")
    x1 = np.atleast_1d(np.asarray(body["x1"], dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(body["x2"], dtype=np.float64))
    Ts = [float(v) for v in np.atleast_1d(body["T"])]
    kg = metrics.KGrid(k_max=float(body.get("k_max", 50.0)), nodes=int(body.get("nodes", 4096)))
    rows = []
    header = ["T", "kspace", "bhattacharyya", "closed_form"]
    for T in Ts:
        ks = metrics.overlap_kspace(pde, x1, x2, T, kg).value
        bh = cf = math.nan
        if pde.kind in (Kind.DIFFUSION, Kind.POISSON, Kind.SCREENED_POISSON) and pde.dim_n <= 2:
            bh = metrics.overlap_bhattacharyya(pde, x1, x2, T).value
        if pde.kind is Kind.DIFFUSION:
            cf = metrics.overlap_closed_form(pde, x1, x2, T).value
        rows.append([_fmt(T), _fmt(ks), _fmt(bh), _fmt(cf)])
        print(f"T={T:g} kspace={ks:.6g} bhattacharyya={bh:.6g} closed_form={cf:.6g}")
    out = _out_dir(args)
    path = os.path.join(out, "overlap.csv")
    _write_csv(path, header, rows)
    print(f"wrote {path}")
    return 0


def cmd_residual(args, cfg) -> int:
    pde = _pde(cfg)
    data = _data(cfg, pde)
    body = _need(cfg, "residual")
    for key in ("points", "times"):
        if key not in body:
            raise ConfigError("missing key", key=f"residual.{key}")
    pts = np.asarray(body["points"], dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    h = float(body.get("h", 1e-3))
    rich = bool(body.get("richardson", True))
    has_r = matching_for(pde).has_birth_death
    header = ["t", "residual"] + (["residual_without_R"] if has_r else [])
    rows = []
    worst = 0.0
    for t in np.atleast_1d(np.asarray(body["times"], dtype=np.float64)):
        grid = metrics.ResidualGrid(pts, np.array([t]), h=h, richardson=rich)
        res = metrics.flow_residual(pde, data, grid)
        worst = max(worst, res)
        row = [_fmt(t), _fmt(res)]
        if has_r:
            row.append(_fmt(metrics.flow_residual(pde, data, grid, include_r=False)))
        rows.append(row)
    out = _out_dir(args)
    path = os.path.join(out, "residual.csv")
    _write_csv(path, header, rows)
    print(f"max_residual: {worst:.6g}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genphys", description="Green's-function samplers and dispersion checks")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment document")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("field", parents=[common], help="evaluate phi, p, v, R on a grid")
    cls = sub.add_parser("classify", parents=[common], help="dispersion branches and verdict")
    cls.add_argument("--pde", help="PDE kind (instead of --config)")
    cls.add_argument("--dim", type=int, default=1)
    for name in ("eps", "k0", "m", "a", "b", "beta"):
        cls.add_argument(f"--{name}", type=float, default=None)
    sub.add_parser("sample", parents=[common], help="prior draw plus backward integration")
    sub.add_parser("overlap", parents=[common], help="prior overlap sweep over T")
    sub.add_parser("residual", parents=[common], help="continuity-equation residual")
    return parser


_COMMANDS = {
    "field": cmd_field,
    "classify": cmd_classify,
    "sample": cmd_sample,
    "overlap": cmd_overlap,
    "residual": cmd_residual,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command == "classify" and args.pde is not None:
            cfg = {}
        else:
            raise ConfigError("--config is required", key="--config")
        return _COMMANDS[args.command](args, cfg)
    except GenPhysError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
