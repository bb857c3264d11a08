"""P1 vector fields, energy functionals, Jacobians and boundary-vortex detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DetectionError, InfiniteEnergy, TraceVanishingError
from .geometry import Mesh, RegimeParams, frame_arrays, tangent_angle

TWO_PI = 2 * np.pi


@dataclass
class VectorField:
    mesh: Mesh
    values: np.ndarray  # (n, 2)
    third: np.ndarray | None = None  # optional out-of-plane component
    mode: str = "s1"  # "s1" or "relaxed"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, 2)
        if self.values.shape[0] != self.mesh.n_vertices:
            raise ValueError("field and mesh sizes differ")
        if self.third is not None:
            self.third = np.asarray(self.third, dtype=float).ravel()
        if self.mode == "s1":
            if np.max(np.abs(np.hypot(self.values[:, 0], self.values[:, 1]) - 1)) > 1e-12:
                raise ValueError("S1 field must have unit length at every vertex")
        elif self.mode != "relaxed":
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_complex(cls, mesh, u, third=None, mode="s1"):
        u = np.asarray(u, dtype=complex)
        if mode == "s1":
            u = u / np.abs(u)
        return cls(mesh, np.column_stack([u.real, u.imag]), third, mode)

    @property
    def complex(self):
        return self.values[:, 0] + 1j * self.values[:, 1]

    def norm2(self):
        n2 = np.sum(self.values**2, axis=1)
        if self.third is not None:
            n2 = n2 + self.third**2
        return n2


class Assembly:
    """Per-mesh P1 operators and boundary-edge data."""

    def __init__(self, mesh: Mesh):
        v = mesh.vertices
        t = mesh.triangles
        p = v[t]
        area = mesh.triangle_areas()
        # gradient of barycentric basis: grad(lambda_i) = i * (edge opposite i) / (2 area)
        opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        g = -1j * opp / (2 * area[:, None])  # complex encoding of (d/dx, d/dy)
        m = t.shape[0]
        rows = np.repeat(np.arange(m), 3)
        n = mesh.n_vertices
        self.Gx = sp.csr_matrix((g.real.ravel(), (rows, t.ravel())), shape=(m, n))
        self.Gy = sp.csr_matrix((g.imag.ravel(), (rows, t.ravel())), shape=(m, n))
        self.area = area
        A = sp.diags(area)
        self.K = (self.Gx.T @ A @ self.Gx + self.Gy.T @ A @ self.Gy).tocsr()
        mass = np.zeros(n)
        np.add.at(mass, t.ravel(), np.repeat(area / 3, 3))
        self.mass = mass
        self.mean = sp.csr_matrix((np.full(3 * m, 1 / 3), (rows, t.ravel())), shape=(m, n))
        # boundary edges with the analytic normal at the midpoint angle
        e = mesh.boundary_edges()
        th = mesh.boundary_theta
        th_next = np.roll(th, -1)
        th_next[-1] += TWO_PI
        mid = 0.5 * (th + th_next)
        self.edges = e
        if mesh.domain is not None:
            _, _, nu, _, _ = frame_arrays(mesh.domain, mid)
            s = mesh.domain.arclength(np.concatenate([th, [th[0] + TWO_PI]]))
            self.edge_w = np.diff(s)
        else:
            d = v[e[:, 1]] - v[e[:, 0]]
            nu = -1j * d / np.abs(d)
            self.edge_w = np.abs(d)
        self.edge_nu = np.column_stack([nu.real, nu.imag])
        self.edge_len = np.abs(v[e[:, 1]] - v[e[:, 0]])


def assembly(mesh: Mesh) -> Assembly:
    asm = getattr(mesh, "_asm", None)
    if asm is None:
        asm = Assembly(mesh)
        mesh._asm = asm
    return asm


@dataclass
class EnergyBreakdown:
    dirichlet: float
    bulk_penalty: float
    boundary_penalty: float
    total: float
    functional: str
    params: tuple = field(default=())


def _unpack(params):
    if isinstance(params, RegimeParams):
        return params.eps, math.sqrt(params.eta2)
    eps, eta = params
    return float(eps), (None if eta is None else float(eta))


def _boundary_sum(asm, values, eps):
    e = asm.edges
    un = (values[e[:, 0]] * asm.edge_nu).sum(1), (values[e[:, 1]] * asm.edge_nu).sum(1)
    return float(np.sum(asm.edge_w * 0.5 * (un[0] ** 2 + un[1] ** 2))) / (TWO_PI * eps)


def boundary_normal_sq(field: VectorField) -> float:
    """Integral of (u . nu)^2 over the boundary, same rule as the penalty."""
    return _boundary_sum(assembly(field.mesh), field.values, 1.0 / TWO_PI)


def _dirichlet(asm, c):
    # per-triangle sum keeps the value nonnegative under rounding
    return float(np.sum(asm.area * ((asm.Gx @ c) ** 2 + (asm.Gy @ c) ** 2)))


def energy(field: VectorField, params, functional: str = "E_eps_eta") -> EnergyBreakdown:
    """E_{eps,eta} or the reduced energy E_bar_h of a P1 field."""
    asm = assembly(field.mesh)
    eps, eta = _unpack(params)
    u = field.values
    dirichlet = _dirichlet(asm, u[:, 0]) + _dirichlet(asm, u[:, 1])
    bnd = _boundary_sum(asm, u, eps)
    n2 = np.sum(u**2, axis=1)
    if functional == "E_eps_eta":
        if field.mode == "s1":
            bulk = 0.0
        else:
            bulk = float(np.sum(asm.mass * (1 - n2) ** 2)) / eta**2
        parts = (dirichlet, bulk, bnd)
    elif functional == "E_bar_h":
        full = field.norm2()
        if np.any(full > 1 + 1e-9):
            raise InfiniteEnergy("|m| > 1 somewhere: reduced energy is infinite")
        if field.third is not None:
            m3 = field.third
            dirichlet += _dirichlet(asm, m3)
        if field.mode == "s1":
            bulk = 0.0
        else:
            bulk = float(np.sum(asm.mass * (1 - n2))) / eta**2
        f = 1.0 / abs(math.log(eps))
        parts = (f * dirichlet, f * bulk, f * bnd)
    else:
        raise ValueError(f"unknown functional {functional!r}")
    return EnergyBreakdown(parts[0], parts[1], parts[2], parts[0] + parts[1] + parts[2],
                           functional, (eps, eta))


def energy_and_gradient(mesh, values, params, functional="E_eps_eta", s1=True):
    """Energy and its raw (non-Riesz) derivative with respect to vertex values."""
    asm = assembly(mesh)
    eps, eta = _unpack(params)
    u = values
    Ku = np.column_stack([asm.K @ u[:, 0], asm.K @ u[:, 1]])
    E = float(np.sum(u * Ku))
    dE = 2 * Ku
    e = asm.edges
    un0 = (u[e[:, 0]] * asm.edge_nu).sum(1)
    un1 = (u[e[:, 1]] * asm.edge_nu).sum(1)
    c = 1.0 / (TWO_PI * eps)
    E += c * float(np.sum(asm.edge_w * 0.5 * (un0**2 + un1**2)))
    np.add.at(dE, e[:, 0], (c * asm.edge_w * un0)[:, None] * asm.edge_nu)
    np.add.at(dE, e[:, 1], (c * asm.edge_w * un1)[:, None] * asm.edge_nu)
    if not s1:
        n2 = np.sum(u**2, axis=1)
        if functional == "E_eps_eta":
            E += float(np.sum(asm.mass * (1 - n2) ** 2)) / eta**2
            dE += (-4 * asm.mass * (1 - n2) / eta**2)[:, None] * u
        else:
            E += float(np.sum(asm.mass * (1 - n2))) / eta**2
            dE += (-2 * asm.mass / eta**2)[:, None] * u
    if functional == "E_bar_h":
        f = 1.0 / abs(math.log(eps))
        E, dE = f * E, f * dE
    return E, dE


def l2_gradient(field: VectorField, params, functional: str = "E_eps_eta") -> np.ndarray:
    """Riesz representative of dE for the lumped-mass inner product."""
    asm = assembly(field.mesh)
    _, dE = energy_and_gradient(field.mesh, field.values, params, functional,
                                s1=field.mode == "s1")
    g = dE / asm.mass[:, None]
    if field.mode == "s1":
        u = field.values
        g = g - np.sum(g * u, axis=1)[:, None] * u
    return g


def l2_norm(mesh, g):
    return float(math.sqrt(np.sum(assembly(mesh).mass[:, None] * g**2)))


def jacobian(field: VectorField, zeta, kind: str = "global") -> float:
    """<J(u), zeta>, <jac(u), zeta> or <J(u) - 2 jac(u), zeta> for P1 u and zeta."""
    asm = assembly(field.mesh)
    u = field.values
    zeta = np.asarray(zeta, dtype=float)
    ux = np.column_stack([asm.Gx @ u[:, 0], asm.Gx @ u[:, 1]])
    uy = np.column_stack([asm.Gy @ u[:, 0], asm.Gy @ u[:, 1]])
    zx, zy = asm.Gx @ zeta, asm.Gy @ zeta
    jac = ux[:, 0] * uy[:, 1] - ux[:, 1] * uy[:, 0]
    jac_val = float(np.sum(asm.area * jac * (asm.mean @ zeta)))
    if kind == "interior":
        return jac_val
    # u x du/dx_k is linear on each triangle: exact integral is area * centroid value
    ub = np.column_stack([asm.mean @ u[:, 0], asm.mean @ u[:, 1]])
    c1 = ub[:, 0] * ux[:, 1] - ub[:, 1] * ux[:, 0]
    c2 = ub[:, 0] * uy[:, 1] - ub[:, 1] * uy[:, 0]
    J = -float(np.sum(asm.area * (c1 * (-zy) + c2 * zx)))
    if kind == "global":
        return J
    if kind == "boundary":
        return J - 2 * jac_val
    raise ValueError(f"unknown kind {kind!r}")


def boundary_line_jacobian(field: VectorField, zeta) -> float:
    """-sum over boundary chords of the exact integral of (u x d_tau u) zeta."""
    m = field.mesh
    e = m.boundary_edges()
    u = field.values
    zeta = np.asarray(zeta, dtype=float)
    p, q = u[e[:, 0]], u[e[:, 1]]
    du = q - p
    cross = lambda a: a[:, 0] * du[:, 1] - a[:, 1] * du[:, 0]  # noqa: E731
    # u x du is linear along the edge, zeta linear: Simpson is exact
    zp, zq = zeta[e[:, 0]], zeta[e[:, 1]]
    fp, fq = cross(p) * zp, cross(q) * zq
    fm = cross(0.5 * (p + q)) * 0.5 * (zp + zq)
    return -float(np.sum((fp + 4 * fm + fq) / 6.0))


@dataclass
class JacobianMeasure:
    regular_density: np.ndarray  # (n, 2): arclength, -kappa
    atoms: list  # (arclength, weight)
    perimeter: float = float("nan")

    def total_mass(self):
        s, g = self.regular_density[:, 0], self.regular_density[:, 1]
        per = self.perimeter
        ds = np.diff(np.concatenate([s, [s[0] + per]]))
        return float(np.sum(g * ds) + sum(w for _, w in self.atoms))


def detect_boundary_vortices(field: VectorField, window: float) -> JacobianMeasure:
    """Locate boundary atoms from the phase of u relative to the tangent.

    The residual phase r = arg u - arg tau is piecewise constant in pi Z away
    from vortices and drops by pi d_j across the vortex a_j.
    """
    m = field.mesh
    u = field.complex[m.boundary]
    if np.any(np.abs(u) < 0.5):
        raise TraceVanishingError("|u| < 1/2 at a boundary vertex")
    s = m.boundary_s
    per = m.domain.perimeter() if m.domain is not None else float(s[-1] + abs(
        m.vertices[m.boundary[0]] - m.vertices[m.boundary[-1]]))
    th = m.boundary_theta
    steps = np.angle(np.roll(u, -1) / u)
    phase = np.angle(u[0]) + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    total_phase = float(np.sum(steps))
    tang = tangent_angle(m.domain, th) if m.domain is not None else np.unwrap(
        np.angle(np.roll(m.vertices[m.boundary], -1) - m.vertices[m.boundary]))
    r = phase - tang
    r_total = total_phase - TWO_PI  # change of r over one loop
    edge = np.diff(np.concatenate([s, [s[0] + per]]))
    if window < 3 * np.max(edge) * 0.999:
        raise ValueError("window must cover at least 3 boundary edges")
    n = s.size
    s3 = np.concatenate([s - per, s, s + per])
    r3 = np.concatenate([r - r_total, r, r + r_total])
    delta = np.interp(s + window / 2, s3, r3) - np.interp(s - window / 2, s3, r3)
    mark = np.abs(delta) > np.pi / 2
    atoms = []
    if np.any(mark) and not np.all(mark):
        start = int(np.argmin(mark))  # an unmarked index to cut the cycle
        order = (start + np.arange(n)) % n
        runs, cur = [], []
        for i in order:
            if mark[i]:
                cur.append(i)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        # each cluster owns the arc between the midpoints of the gaps to its
        # neighbours, so slowly decaying core tails are not lost
        spans = []
        for run in runs:
            a0, a1 = s[run[0]], s[run[-1]]
            if a1 < a0:
                a1 += per
            spans.append((a0, a1))
        spans.sort()
        nr = len(spans)
        for k, (a0, a1) in enumerate(spans):
            if nr == 1:
                lo = 0.5 * (a1 - per + a0)
                hi = lo + per
            else:
                p0 = spans[k - 1][1] - (per if k == 0 else 0.0)
                n0 = spans[(k + 1) % nr][0] + (per if k == nr - 1 else 0.0)
                lo, hi = 0.5 * (p0 + a0), 0.5 * (a1 + n0)
            r0 = np.interp(lo, s3, r3)
            r1 = np.interp(hi, s3, r3)
            raw = -(r1 - r0)
            kk = round(raw / np.pi)
            if abs(raw - kk * np.pi) > np.pi / 4:
                raise DetectionError(f"residual phase {raw - kk * np.pi:.3f} is not near pi Z")
            if kk == 0:
                continue
            xs = np.linspace(a0 - window / 2, a1 + window / 2, 2001)
            rs = np.interp(xs, s3, r3)
            idx = int(np.argmin(np.abs(rs - 0.5 * (r0 + r1))))
            atoms.append((float(np.mod(xs[idx], per)), float(kk * np.pi)))
    elif np.all(mark):
        raise DetectionError("window too large: every position is marked")
    wsum = sum(w for _, w in atoms)
    if abs(wsum - TWO_PI) > np.pi / 4:
        raise DetectionError(f"atom weights sum to {wsum:.3f}, expected 2 pi")
    kappa = frame_arrays(m.domain, th)[3] if m.domain is not None else np.zeros(n)
    atoms.sort()
    return JacobianMeasure(np.column_stack([s, -kappa]), atoms, per)
