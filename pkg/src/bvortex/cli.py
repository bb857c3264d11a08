"""Command-line harness: reproducible runs writing CSV tables and a JSON manifest."""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_env():
    n = os.environ.get("BVORTEX_THREADS")
    if n:
        for v in THREAD_VARS:
            os.environ[v] = n


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        from .errors import ConfigError
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _ints(text):
    return [int(round(v)) for v in _floats(text)]


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, experiment, args):
        self.experiment = experiment
        self.args = {k: v for k, v in vars(args).items() if k != "func"}
        self.t0 = time.perf_counter()
        self.outputs = []
        self.summary = {}

    def write_table(self, path, header, rows):
        from .io import write_csv

        if path:
            write_csv(path, header, rows)
            self.outputs.append(path)
        else:
            import csv
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(header)
            from .io import _fmt
            for r in rows:
                w.writerow([_fmt(v) for v in r])

    def finish(self, out):
        import numpy
        import scipy

        from . import __version__
        manifest = {
            "experiment": self.experiment,
            "inputs": self.args,
            "seed": self.args.get("seed"),
            "versions": {"bvortex": __version__, "numpy": numpy.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "threads": os.environ.get("BVORTEX_THREADS"),
            "wall_time_s": time.perf_counter() - self.t0,
            "outputs": self.outputs,
            "summary": self.summary,
        }
        if out:
            with open(out + ".manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=2, default=str)
                fh.write("\n")
        return 0


def _domain(args):
    from .geometry import ConformalDomain
    from .io import read_domain

    return read_domain(args.domain) if getattr(args, "domain", None) else ConformalDomain.disk()


def _config(args, default=None):
    import numpy as np

    from .canonical import BoundaryVortexConfig
    from .io import read_config

    if getattr(args, "config", None):
        return read_config(args.config)
    return default or BoundaryVortexConfig([0.0, np.pi], [1, 1])


# ---------------------------------------------------------------- commands

def cmd_renorm_eval(args):
    from .renorm import w_disk, w_domain, w_neumann_repr, w_truncated_oracle

    run = Run("renorm", args)
    dom, cfg = _domain(args), _config(args)
    rows = []
    methods = ["closed_form", "neumann_repr", "truncated_oracle"] if args.method == "all" else [args.method]
    for m in methods:
        if m == "closed_form":
            if dom.is_identity:
                val, err = w_disk(cfg), 0.0
            else:
                val, err = w_domain(dom, cfg, tol=args.tol or 1e-9, return_error=True)
        elif m == "neumann_repr":
            val, err = w_neumann_repr(dom, cfg), float("nan")
        else:
            r = w_truncated_oracle(dom, cfg)
            val, err = r.value, r.error
        rows.append([m, val, err])
    run.write_table(args.out, ["method", "W", "error"], rows)
    run.summary = {"W": {r[0]: r[1] for r in rows}}
    return run.finish(args.out)


def cmd_renorm_minimize(args):
    import numpy as np

    from .renorm import gamma0, minimize_positions

    run = Run("renorm-minimize", args)
    dom = _domain(args)
    degrees = tuple(_ints(args.degrees))
    cfg, val = minimize_positions(dom, N=len(degrees), degrees=degrees, n_grid=args.grid)
    th = np.mod(np.array(cfg.thetas), 2 * np.pi)
    header = [f"theta_{j + 1}" for j in range(len(th))] + ["W", "W_plus_N_gamma0"]
    run.write_table(args.out, header, [list(th) + [val, val + len(th) * gamma0()]])
    run.summary = {"thetas": list(th), "W": val}
    return run.finish(args.out)


def cmd_canonical(args):
    import numpy as np

    from .canonical import CanonicalMap, boundary_lifting, phase_preimage
    from .geometry import frame_arrays

    run = Run("canonical", args)
    dom, cfg = _domain(args), _config(args)
    cmap = CanonicalMap.build(dom, cfg, sign=args.sign)
    th = 2 * np.pi * (np.arange(args.samples) + 0.5) / args.samples
    gap = np.min(np.abs(np.angle(np.exp(1j * np.subtract.outer(th, cfg.thetas)))), axis=1)
    th = th[gap > 1e-9]
    z = (1 - 1e-12) * np.exp(1j * th)
    ph = phase_preimage(cmap, z)
    lift = boundary_lifting(cfg, dom, th)
    _, tau, nu, _, _ = frame_arrays(dom, th)
    val = np.exp(1j * ph)
    s = dom.arclength(th)
    rows = [[a, b, c, d, abs((v * np.conj(n)).real)]
            for a, b, c, d, v, n in zip(th, s, ph, lift, val, nu)]
    run.write_table(args.out, ["theta", "s", "phase", "lifting", "abs_m_dot_nu"], rows)
    return run.finish(args.out)


def cmd_minimize(args):
    import numpy as np

    from .canonical import BoundaryVortexConfig, CanonicalMap, sample_on_mesh
    from .errors import DetectionError, TraceVanishingError
    from .fields import VectorField, detect_boundary_vortices
    from .geometry import build_mesh
    from .io import write_field
    from .minimize import MinimizeOptions, continuation, fit_expansion
    from .renorm import gamma0, w_disk, w_domain

    run = Run("minimize", args)
    dom = _domain(args)
    sched = _floats(args.schedule)
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    th = np.array(cfg.thetas) + (rng.normal(0, args.perturb, cfg.n) if args.perturb > 0 else 0)
    cfg0 = BoundaryVortexConfig(th, cfg.degrees)
    mesh_h = _floats(args.mesh) if args.mesh else [0.05, min(sched) / 4]
    mesh = build_mesh(dom, mesh_h[0], mesh_h[1], 0.25)
    cmap = CanonicalMap.build(dom, cfg0)
    init = VectorField.from_complex(mesh, sample_on_mesh(cmap, mesh, core=sched[0]))
    opts = MinimizeOptions(grad_tol=args.tol, max_iters=args.max_iters)
    trace = continuation(mesh, sched, lambda e: (e, None), opts, init=init)
    rows = []
    for eps, f, br in trace:
        try:
            atoms = detect_boundary_vortices(f, args.window_factor * eps).atoms
        except (DetectionError, TraceVanishingError, ValueError):  # diffuse states at large eps
            atoms = []
        rows.append([eps, br.total, br.dirichlet, br.boundary_penalty,
                     ";".join(repr(a) for a, _ in atoms), ";".join(repr(w) for _, w in atoms)])
    run.write_table(args.out, ["eps", "E", "dirichlet", "boundary", "atom_s", "atom_weight"], rows)
    if args.field_out:
        write_field(trace[-1][1], args.field_out)
        run.outputs.append(args.field_out)
    if len(trace) >= 3:
        w = w_disk(cfg) if dom.is_identity else w_domain(dom, cfg)
        target = w + cfg.n * gamma0()
        fit = fit_expansion(trace, target)
        run.summary = {"slope": fit.slope, "intercept": fit.intercept, "N_est": fit.N_est,
                       "target_W_plus_N_gamma0": target, "residual": fit.residual}
    return run.finish(args.out)


def cmd_kernels_check(args):
    from .geometry import ConformalDomain
    from .strayfield import kernel_trace, kh_boundary_check

    run = Run("kernels", args)
    rows = []
    for h in _floats(args.h):
        tr = kernel_trace(h)
        rows += [[h, kind, a, v, c, g] for kind, a, v, c, g in tr.samples]
        gap, scaled = kh_boundary_check(ConformalDomain.disk() if not args.domain else _domain(args), h)
        rows.append([h, "kh_boundary_gap", 0.0, gap, scaled, 0.0])
    run.write_table(args.out, ["h", "kind", "arg", "value", "check", "gap"], rows)
    return run.finish(args.out)


def cmd_strayfield_compare(args):
    from .canonical import CanonicalMap, sample_on_mesh
    from .fields import VectorField
    from .geometry import build_mesh, regime_from
    from .io import read_field
    from .strayfield import lemma_claim_check

    run = Run("strayfield", args)
    dom = _domain(args)
    mh = _floats(args.mesh)
    mesh = build_mesh(dom, mh[0], mh[1] if len(mh) > 1 else 0.0)
    if args.field:
        f = read_field(args.field, mesh)
    else:
        cmap = CanonicalMap.build(dom, _config(args))
        f = VectorField.from_complex(mesh, sample_on_mesh(cmap, mesh, core=args.core))
    rows = []
    for h in _floats(args.h):
        rp = regime_from(h, args.beta, args.C)
        c = lemma_claim_check(f, mesh, rp)
        t = c.terms
        rows.append([h, rp.eta, rp.eps, rp.lambda_h, t.A, t.B, t.C1, t.C2,
                     c.lhs, c.rhs, c.ratio, c.E_h, c.E_bar])
    run.write_table(args.out, ["h", "eta", "eps", "lambda_h", "A", "B", "C1", "C2",
                               "lhs", "rhs", "ratio", "E_h", "E_bar_h"], rows)
    return run.finish(args.out)


def cmd_regime_table(args):
    from .geometry import regime_from

    run = Run("regime-table", args)
    rows = []
    for h in _floats(args.h):
        rp = regime_from(h, args.beta, args.C, args.margin)
        import math
        ident = rp.eps * h * abs(math.log(h)) - rp.eta2
        rows.append([h, rp.eta, rp.eps, rp.lambda_h, int(rp.regime), int(rp.regime2), ident])
    run.write_table(args.out, ["h", "eta", "eps", "lambda_h", "regime", "regime2",
                               "eps_h_logh_minus_eta2"], rows)
    return run.finish(args.out)


EXPERIMENTS = {"renorm": "renorm eval", "minimize": "minimize", "kernels": "kernels check",
               "strayfield": "strayfield compare", "regime-table": "regime-table",
               "canonical": "canonical"}


def cmd_run(args):
    """Run an experiment described by a JSON config file."""
    from .errors import ConfigError
    from .io import load_json

    cfg = load_json(args.experiment_config)
    kind = cfg.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {sorted(EXPERIMENTS)}")
    argv = EXPERIMENTS[kind].split()
    for key in ("domain", "config", "field"):
        if key in cfg:
            if not os.path.exists(cfg[key]):
                raise ConfigError(f"referenced file does not exist: {cfg[key]}")
            argv += [f"--{key}", cfg[key]]
    for key in ("schedule", "h", "mesh", "degrees"):
        if key in cfg:
            v = cfg[key]
            argv += [f"--{key}", ",".join(str(x) for x in v) if isinstance(v, list) else str(v)]
    if "schedule" in cfg:
        s = _floats(",".join(str(x) for x in cfg["schedule"]))
        if any(b >= a for a, b in zip(s, s[1:])):
            raise ConfigError("schedule must be strictly decreasing")
    for key in ("seed", "tol", "beta", "out", "method"):
        if key in cfg:
            argv += [f"--{key}", str(cfg[key])]
    return main(argv)


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="bvortex", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--domain", help="domain JSON (default: unit disk)")
        sp.add_argument("--config", help="vortex config JSON (default: antipodal, d = 1, 1)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=None)
        if out:
            sp.add_argument("--out", help="output CSV (stdout if omitted)")

    rn = sub.add_parser("renorm", help="renormalized energy").add_subparsers(dest="action", required=True)
    ev = rn.add_parser("eval")
    common(ev)
    ev.add_argument("--method", default="closed_form", choices=["closed_form", "neumann_repr", "truncated_oracle", "all"])
    ev.set_defaults(func=cmd_renorm_eval)
    mn = rn.add_parser("minimize")
    common(mn)
    mn.add_argument("--degrees", default="1,1")
    mn.add_argument("--grid", type=int, default=256)
    mn.set_defaults(func=cmd_renorm_minimize)

    cn = sub.add_parser("canonical", help="sample the canonical map along the boundary")
    common(cn)
    cn.add_argument("--samples", type=int, default=256)
    cn.add_argument("--sign", type=int, default=1, choices=[1, -1])
    cn.set_defaults(func=cmd_canonical)

    mz = sub.add_parser("minimize", help="eps-continuation of discrete minimizers")
    common(mz)
    mz.add_argument("--schedule", default="0.2,0.1,0.05,0.025")
    mz.add_argument("--mesh", help="interior_h,boundary_h (default 0.05, min eps / 4)")
    mz.add_argument("--perturb", type=float, default=0.0, help="random angle perturbation (rad)")
    mz.add_argument("--max-iters", type=int, default=20000)
    mz.add_argument("--window-factor", type=float, default=16.0)
    mz.add_argument("--field-out")
    mz.set_defaults(func=cmd_minimize)

    kn = sub.add_parser("kernels", help="kernel identities").add_subparsers(dest="action", required=True)
    kc = kn.add_parser("check")
    common(kc)
    kc.add_argument("--h", default="1e-3")
    kc.set_defaults(func=cmd_kernels_check)

    sf = sub.add_parser("strayfield", help="stray-field reduction").add_subparsers(dest="action", required=True)
    sc = sf.add_parser("compare")
    common(sc)
    sc.add_argument("--field", help="field CSV on the mesh given by --mesh")
    sc.add_argument("--mesh", default="0.08,0.02")
    sc.add_argument("--h", default="1e-2,1e-3")
    sc.add_argument("--beta", type=float, default=0.5)
    sc.add_argument("--C", type=float, default=1.0)
    sc.add_argument("--core", type=float, default=0.1)
    sc.set_defaults(func=cmd_strayfield_compare)

    rt = sub.add_parser("regime-table", help="regime parameters along a beta path")
    common(rt)
    rt.add_argument("--h", default="1e-2,1e-3,1e-4,1e-5,1e-6")
    rt.add_argument("--beta", type=float, default=0.5)
    rt.add_argument("--C", type=float, default=1.0)
    rt.add_argument("--margin", type=float, default=1.0)
    rt.set_defaults(func=cmd_regime_table)

    rr = sub.add_parser("run", help="run an experiment from a JSON config")
    rr.add_argument("experiment_config")
    rr.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    _apply_thread_env()
    from .errors import LabError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LabError as exc:
        json.dump({"error": exc.category, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
