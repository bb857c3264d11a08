"""Energy descent with eps-continuation and the two-term expansion fit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ArityError, ConfigError, MeshError, StallError
from .fields import VectorField, assembly, energy, energy_and_gradient

TWO_PI = 2 * np.pi


@dataclass
class MinimizeOptions:
    max_iters: int = 20000
    grad_tol: float | None = None  # None: 1e-6 * boundary length
    armijo: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 60
    mode: str = "projected_S1"  # or "relaxed_eta"
    memory: int = 12
    max_phase_step: float = 0.2

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ConfigError("grad_tol must be positive")
        if not 0 < self.shrink < 1:
            raise ConfigError("backtracking factor must lie in (0, 1)")
        if self.mode not in ("projected_S1", "relaxed_eta"):
            raise ConfigError(f"unknown mode {self.mode!r}")


def _boundary_length(mesh):
    if mesh.domain is not None:
        return mesh.domain.perimeter()
    return float(np.sum(mesh.boundary_edge_lengths()))


class _Problem:
    """Energy in descent variables: vertex phases (S1) or raw vectors (relaxed)."""

    def __init__(self, mesh, params, s1):
        self.mesh, self.params, self.s1 = mesh, params, s1
        self.mass = assembly(mesh).mass
        self.w = self.mass if s1 else np.repeat(self.mass, 2)
        # Sobolev preconditioner: stiffness + boundary diagonal + mass (+ bulk)
        asm = assembly(mesh)
        eps = params.eps if hasattr(params, "eps") else params[0]
        bd = np.zeros(mesh.n_vertices)
        c = asm.edge_w / (TWO_PI * eps)
        np.add.at(bd, asm.edges[:, 0], c)
        np.add.at(bd, asm.edges[:, 1], c)
        diag = bd + self.mass
        if not s1:
            eta = math.sqrt(params.eta2) if hasattr(params, "eta2") else params[1]
            diag = diag + 8 * self.mass / eta**2  # bulk curvature at |u| = 1
        P = (asm.K + sp.diags(diag)).tocsc()
        if not s1:
            P = sp.kron(P, sp.eye(2)).tocsc()
        self._lu = splu(P)

    def precondition(self, q):
        return self._lu.solve(q)

    def values(self, x):
        if self.s1:
            return np.column_stack([np.cos(x), np.sin(x)])
        return x.reshape(-1, 2)

    def __call__(self, x):
        u = self.values(x)
        E, dE = energy_and_gradient(self.mesh, u, self.params, s1=self.s1)
        if self.s1:
            g = -dE[:, 0] * u[:, 1] + dE[:, 1] * u[:, 0]
        else:
            g = dE.ravel()
        return E, g

    def l2_grad_norm(self, g):
        return float(math.sqrt(np.sum(g * g / self.w)))


def _two_loop(g, S, Y, prec, gamma):
    q = g.copy()
    alpha = []
    for s, y in reversed(list(zip(S, Y))):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alpha.append(a)
        q -= a * y
    r = gamma * prec(q)
    for (s, y), a in zip(zip(S, Y), reversed(alpha)):
        rho = 1.0 / (y @ s)
        b = rho * (y @ r)
        r += s * (a - b)
    return -r


def minimize_field(mesh, params, init: VectorField, opts: MinimizeOptions | None = None):
    """Descent on E_{eps,eta} from init; returns (field, EnergyBreakdown, iterations).

    Directions come from a limited-memory quasi-Newton recursion preconditioned
    by stiffness + boundary diagonal + lumped mass; every step is accepted by Armijo backtracking.
    """
    opts = opts or MinimizeOptions()
    s1 = opts.mode == "projected_S1"
    tol = opts.grad_tol if opts.grad_tol is not None else 1e-6 * _boundary_length(mesh)
    prob = _Problem(mesh, params, s1)
    if s1:
        x = np.angle(init.complex)
    else:
        x = init.values.ravel().copy()
    E, g = prob(x)
    S, Y = [], []
    gamma = 1.0
    it = 0

    def result(xv):
        if s1:
            f = VectorField(mesh, prob.values(xv), None, "s1")
        else:
            f = VectorField(mesh, prob.values(xv).copy(), init.third, "relaxed")
        return f

    while True:
        gn = prob.l2_grad_norm(g)
        if gn <= tol:
            break
        if it >= opts.max_iters:
            f = result(x)
            raise StallError(f"max_iters reached with |grad| = {gn:.3e} > {tol:.3e}",
                             best=(f, energy(f, params), it))
        p = _two_loop(g, S, Y, prob.precondition, gamma) if S else -prob.precondition(g)
        slope = g @ p
        if not slope < 0:
            S, Y = [], []
            p = -prob.precondition(g)
            slope = g @ p
        t = 1.0
        pmax = np.max(np.abs(p))
        if s1 and pmax * t > opts.max_phase_step:
            t = opts.max_phase_step / pmax
        for _ in range(opts.max_halvings + 1):
            xn = x + t * p
            En, gn_vec = prob(xn)
            if En <= E + opts.armijo * t * slope:
                break
            t *= opts.shrink
        else:
            f = result(x)
            raise StallError("line search failed after the maximum number of halvings",
                             best=(f, energy(f, params), it))
        assert En <= E, "accepted step increased the energy"
        s, y = xn - x, gn_vec - g
        sy = s @ y
        if sy > 1e-16 * math.sqrt((s @ s) * (y @ y)) and sy > 0:
            S.append(s)
            Y.append(y)
            if len(S) > opts.memory:
                S.pop(0)
                Y.pop(0)
            gamma = sy / (y @ prob.precondition(y))
        x, E, g = xn, En, gn_vec
        it += 1
    f = init if it == 0 else result(x)
    br = energy(f, params)
    return f, br, it


def mesh_boundary_resolution(mesh):
    return float(np.max(mesh.boundary_edge_lengths()))


def continuation(mesh, eps_schedule, params_fn, opts: MinimizeOptions | None = None,
                 init: VectorField | None = None, check_resolution=True):
    """Warm-started minimizers along a strictly decreasing eps schedule."""
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 1 or np.any(np.diff(eps_schedule) >= 0):
        raise ConfigError("eps schedule must be strictly decreasing")
    if check_resolution and mesh_boundary_resolution(mesh) > min(eps_schedule) / 4 * (1 + 1e-9):
        raise MeshError("boundary resolution coarser than min eps / 4")
    if init is None:
        raise ConfigError("an initial field is required")
    trace = []
    cur = init
    for eps in eps_schedule:
        try:
            cur, br, _ = minimize_field(mesh, params_fn(eps), cur, opts)
        except StallError as exc:
            exc.eps = eps
            raise
        trace.append((eps, cur, br))
    return trace


@dataclass
class ExpansionFit:
    samples: list
    slope: float
    intercept: float
    N_est: float
    residual: float
    target: float | None = None
    intercept_gap: float | None = None
    gaps: list = field(default_factory=list)


def fit_expansion(trace, target: float | None = None) -> ExpansionFit:
    """Least squares E = slope |log eps| + intercept.

    trace entries are (eps, E) pairs or (eps, field, EnergyBreakdown) triples.
    With a target value for W + N gamma0, per-sample gaps
    |E - slope_ref |log eps| - target| are reported with slope_ref = slope.
    """
    samples = []
    for item in trace:
        if len(item) == 2:
            samples.append((float(item[0]), float(item[1])))
        else:
            samples.append((float(item[0]), float(item[2].total)))
    if len(samples) < 3:
        raise ArityError("fit_expansion needs at least 3 samples")
    eps = np.array([s[0] for s in samples])
    E = np.array([s[1] for s in samples])
    L = np.abs(np.log(eps))
    A = np.column_stack([L, np.ones_like(L)])
    coef, *_ = np.linalg.lstsq(A, E, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    residual = float(np.linalg.norm(A @ coef - E))
    fit = ExpansionFit(samples, slope, intercept, slope / np.pi, residual)
    if target is not None:
        fit.target = float(target)
        fit.intercept_gap = abs(intercept - target)
        fit.gaps = [float(abs(e - slope * l - target)) for e, l in zip(E, L)]
    return fit


def first_order_gaps(samples, n, target):
    """|E(eps) - pi N |log eps| - target| per sample, with the exact leading slope."""
    return [float(abs(E - np.pi * n * abs(math.log(e)) - target)) for e, E in samples]


def match_atoms(prev, cur, perimeter):
    """Nearest-arclength matching of atom lists; returns cur reordered like prev."""
    out = []
    used = set()
    for s0, _ in prev:
        best, bd = None, np.inf
        for k, (s1, w1) in enumerate(cur):
            if k in used:
                continue
            d = abs((s1 - s0 + perimeter / 2) % perimeter - perimeter / 2)
            if d < bd:
                best, bd = k, d
        if best is not None:
            used.add(best)
            out.append(cur[best])
    out += [a for k, a in enumerate(cur) if k not in used]
    return out


def antipodal_defect(atoms, perimeter):
    """|arc distance between the two atoms - perimeter/2| (requires 2 atoms)."""
    if len(atoms) != 2:
        return float("inf")
    d = abs(atoms[0][0] - atoms[1][0]) % perimeter
    d = min(d, perimeter - d)
    return abs(d - perimeter / 2)
