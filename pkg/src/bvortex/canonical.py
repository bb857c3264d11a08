"""Canonical harmonic maps with prescribed boundary vortices.

Vortices are stored as preimage angles theta_j, so the vortex points in the
unit disk are exactly a_j = e^{i theta_j}; the physical points are Phi(a_j).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularityError, UndersamplingError
from .geometry import ConformalDomain, frame_arrays, tangent_angle

TWO_PI = 2 * np.pi


def _angle_gap(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class BoundaryVortexConfig:
    thetas: tuple
    degrees: tuple

    def __init__(self, thetas, degrees):
        th = tuple(float(t) for t in np.atleast_1d(thetas))
        dg = tuple(int(d) for d in np.atleast_1d(degrees))
        if len(th) < 1 or len(th) != len(dg):
            raise ConfigError("need N >= 1 angles and matching degrees")
        if any(d == 0 for d in dg):
            raise ConfigError("degrees must be nonzero")
        if any(int(d) != float(d) for d in np.atleast_1d(degrees)):
            raise ConfigError("degrees must be integers")
        if sum(dg) != 2:
            raise ConfigError(f"degrees must sum to 2, got {sum(dg)}")
        for i in range(len(th)):
            for j in range(i):
                if _angle_gap(th[i], th[j]) < 1e-9:
                    raise ConfigError("vortex angles must be distinct modulo 2pi")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "degrees", dg)

    @property
    def n(self):
        return len(self.thetas)

    @property
    def points(self):
        """Vortex positions on the unit circle (preimage)."""
        return np.exp(1j * np.array(self.thetas))

    @property
    def d(self):
        return np.array(self.degrees, dtype=float)

    def rotated(self, alpha):
        return BoundaryVortexConfig([t + alpha for t in self.thetas], self.degrees)


def default_base_point(config: BoundaryVortexConfig) -> float:
    return reference_angle(config)


def reference_angle(config: BoundaryVortexConfig) -> float:
    """Midpoint of the longest vortex-free arc (lowest start angle on ties)."""
    t = np.sort(np.mod(config.thetas, TWO_PI))
    gaps = np.diff(np.concatenate([t, [t[0] + TWO_PI]]))
    k = int(np.argmax(gaps))
    return float(np.mod(t[k] + gaps[k] / 2, TWO_PI))


@dataclass(frozen=True)
class CanonicalMap:
    domain: ConformalDomain
    config: BoundaryVortexConfig
    b: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ConfigError("sign must be +1 or -1")
        if np.min(_angle_gap(self.b, self.config.thetas)) < 1e-9:
            raise ConfigError("base point must differ from every vortex angle")

    @classmethod
    def build(cls, domain, config, b=None, sign=1):
        return cls(domain, config, reference_angle(config) if b is None else float(b), sign)

    def unit_constant(self):
        """Unit constant c with m(z) = c prod((1 - z conj(a_j))/|.|)^{d_j}."""
        a = self.config.points
        bb = np.exp(1j * self.b)
        f = -a * np.abs(bb - a) / (bb - a)
        return self.sign * 1j * bb * np.prod(f ** np.array(self.config.degrees))


def disk_map(cmap: CanonicalMap, z):
    """Product formula on the disk, usable at any z away from the vortices."""
    z = np.asarray(z, dtype=complex)
    a = cmap.config.points
    bb = np.exp(1j * cmap.b)
    out = cmap.sign * 1j * bb * np.ones_like(z)
    for aj, dj in zip(a, cmap.config.degrees):
        q = (z - aj) / np.abs(z - aj) * (np.abs(bb - aj) / (bb - aj))
        out = out * q**dj
    return out


def eval_preimage(cmap: CanonicalMap, z):
    """M_* expressed at the preimage point z = Psi(w)."""
    z = np.asarray(z, dtype=complex)
    dmin = np.min(np.abs(np.subtract.outer(z, cmap.config.points)), axis=-1) if z.ndim else \
        np.min(np.abs(z - cmap.config.points))
    if np.any(dmin < 1e-12):
        raise SingularityError("evaluation point coincides with a vortex")
    dp = cmap.domain.dphi(z)
    return disk_map(cmap, z) * dp / np.abs(dp)


def canonical_eval(cmap: CanonicalMap, w):
    """Canonical map value at physical point(s) w."""
    z = cmap.domain.psi(np.asarray(w, dtype=complex))
    z = _snap_to_circle(z)
    out = eval_preimage(cmap, z)
    return out[()] if np.ndim(out) == 0 else out


def _snap_to_circle(z, tol=1e-12):
    r = np.abs(z)
    return np.where(np.abs(r - 1) < tol, z / np.where(r == 0, 1, r), z)


def phase_preimage(cmap: CanonicalMap, z):
    """Continuous harmonic phase of M_* on the closed disk minus the vortices.

    Uses Arg(1 - z conj(a_j)), which stays in [-pi/2, pi/2] on the closed disk,
    and Arg(Phi'/c_1), which is continuous since Re(Phi'/c_1) > 0.
    """
    z = np.asarray(z, dtype=complex)
    dom = cmap.domain
    c1 = dom.coeffs[0]
    ph = np.angle(cmap.unit_constant()) + np.angle(c1) + np.angle(dom.dphi(z) / c1)
    for aj, dj in zip(cmap.config.points, cmap.config.degrees):
        ph = ph + dj * np.angle(1 - z * np.conj(aj))
    return ph


def canonical_phase(cmap: CanonicalMap, w):
    z = cmap.domain.psi(np.asarray(w, dtype=complex))
    out = phase_preimage(cmap, z)
    return out[()] if np.ndim(out) == 0 else out


def boundary_lifting(config: BoundaryVortexConfig, domain: ConformalDomain, theta):
    """BV lifting on the boundary: tangent between vortices, jump -pi d_j at theta_j.

    Right-continuous at vortices, normalized so phi(theta_ref) = arg tau(theta_ref)
    at the midpoint of the longest vortex-free arc.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.min(_angle_gap(np.multiply.outer(theta, np.ones(config.n)), config.thetas), axis=-1) < 1e-12):
        raise SingularityError("lifting evaluated at a vortex angle")
    ref = reference_angle(config)
    u = np.mod(theta - ref, TWO_PI)
    tj = np.mod(np.array(config.thetas) - ref, TWO_PI)
    crossed = (np.multiply.outer(u, np.ones(config.n)) >= tj) @ config.d
    t_ref = tangent_angle(domain, ref)
    _, tau, _, _, _ = frame_arrays(domain, ref)
    out = np.angle(tau) + (tangent_angle(domain, ref + u) - t_ref) - np.pi * crossed
    return out[()] if out.ndim == 0 else out


def conjugate_psi(config: BoundaryVortexConfig, domain: ConformalDomain, w):
    """Harmonic conjugate -sum d_j log|Psi(w) - a_j| + log|Psi'(w)|."""
    z = domain.psi(np.asarray(w, dtype=complex))
    return conjugate_psi_preimage(config, domain, z)


def conjugate_psi_preimage(config, domain, z):
    z = np.asarray(z, dtype=complex)
    diff = np.subtract.outer(z, config.points)
    if np.any(np.abs(diff) < 1e-14):
        raise SingularityError("conjugate evaluated at a vortex")
    out = -(np.log(np.abs(diff)) @ config.d) - np.log(np.abs(domain.dphi(z)))
    return out[()] if np.ndim(out) == 0 else out


def grad_psi_preimage(config, domain, z):
    """Complex gradient of psi in physical coordinates at preimage point z.

    With F(z) = -sum d_j log(z - a_j) - log Phi'(z), psi o Phi = Re F and
    |grad psi|(w) = |F'(z)| / |Phi'(z)|.
    """
    z = np.asarray(z, dtype=complex)
    fp = -(1.0 / np.subtract.outer(z, config.points)) @ config.d
    dp = domain.dphi(z)
    fp = fp - domain.d2phi(z) / dp
    return np.conj(fp / dp)


def _sample_angles(thetas, theta_a, theta_b, n_samples, delta):
    base = np.linspace(theta_a, theta_b, n_samples + 1)
    extra = [base]
    offs = delta * np.geomspace(1e-3, 1e4, 120)
    for t in thetas:
        k = np.ceil((theta_a - t) / TWO_PI)
        tt = t + k * TWO_PI
        while tt < theta_b:
            if tt > theta_a:
                c = np.concatenate([tt - offs, [tt], tt + offs])
                extra.append(c[(c > theta_a) & (c < theta_b)])
            tt += TWO_PI
    return np.unique(np.concatenate(extra))


def winding_increment(cmap: CanonicalMap, theta_a, theta_b, n_samples=2048, side="inner",
                      delta=1e-6):
    """Continuous phase increment of M_* along a boundary arc.

    The path runs at preimage radius 1 - delta ("inner") or 1 + delta ("outer").
    Near each vortex the samples are refined geometrically on the delta scale.
    """
    if theta_b <= theta_a:
        raise ValueError("need theta_b > theta_a")
    r = 1 - delta if side == "inner" else 1 + delta
    t = _sample_angles(cmap.config.thetas, theta_a, theta_b, n_samples, delta)
    v = eval_preimage(cmap, r * np.exp(1j * t))
    steps = np.angle(v[1:] / v[:-1])
    if np.max(np.abs(steps)) >= np.pi / 2:
        raise UndersamplingError("phase step >= pi/2 between consecutive samples")
    return float(np.sum(steps))


def sample_on_mesh(cmap: CanonicalMap, mesh, core=0.0):
    """Canonical values at mesh vertices, optionally pulled in by a core width.

    With core > 0 the vertex with preimage z gets the value M_*((1 - core) z),
    a smooth unit field whose vortices are spread over a width ~ core.
    """
    z = mesh.preimage if mesh.preimage is not None else cmap.domain.psi(mesh.vertices)
    z = np.array(z, dtype=complex)
    if mesh.preimage is not None:
        z[mesh.boundary] = np.exp(1j * mesh.boundary_theta)
    zz = (1 - core) * z
    vals = disk_map(cmap, zz)
    dp = cmap.domain.dphi(z)
    return vals * dp / np.abs(dp)
