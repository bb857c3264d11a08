"""Conformal domains, boundary frames, regime bookkeeping and meshes.

A domain is the image of the closed unit disk under a polynomial
Phi(z) = sum_k c_k z^k with sum_{k>=2} k|c_k| < |c_1|.  That condition keeps
Re(Phi'/c_1) > 0 on the disk, so Phi is univalent and Phi' never vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .errors import DomainError, InversionError, MeshError, RegimeError


class ConformalDomain:
    """Polynomial conformal image of the unit disk."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size == 0 or c[0] == 0:
            raise DomainError("leading coefficient c_1 must be nonzero")
        k = np.arange(1, c.size + 1)
        floor = abs(c[0]) - float(np.sum(k[1:] * np.abs(c[1:])))
        if floor <= 0:
            raise DomainError("coefficients violate sum k|c_k| < |c_1|; map may fold")
        self.coeffs = c
        self.derivative_floor = floor
        # polyval wants highest degree first, constant term included
        self._p = np.concatenate([c[::-1], [0.0]])
        self._dp = np.polyder(self._p)
        self._d2p = np.polyder(self._dp)
        self._d3p = np.polyder(self._d2p)
        t = np.linspace(0.0, 2 * np.pi, 2048, endpoint=False)
        if np.min((self.dphi(np.exp(1j * t)) / c[0]).real) <= 0:
            raise DomainError("sampled injectivity check failed on the boundary")
        self._speed_fourier = None

    @classmethod
    def disk(cls, radius=1.0):
        return cls([radius])

    @property
    def is_identity(self):
        return self.coeffs.size == 1 and self.coeffs[0] == 1

    def to_json(self):
        return {"coeffs": [[float(v.real), float(v.imag)] for v in self.coeffs]}

    @classmethod
    def from_json(cls, obj):
        try:
            raw = obj["coeffs"]
            # each coefficient is a real number or a [re, im] pair
            coeffs = [complex(float(c[0]), float(c[1])) if isinstance(c, (list, tuple))
                      else complex(float(c), 0.0) for c in raw]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed domain description: {exc}") from exc
        return cls(coeffs)

    # raw polynomial evaluations, no range checks
    def phi(self, z):
        return np.polyval(self._p, z)

    def dphi(self, z):
        return np.polyval(self._dp, z)

    def d2phi(self, z):
        return np.polyval(self._d2p, z)

    def d3phi(self, z):
        return np.polyval(self._d3p, z)

    def psi(self, w, tol=1e-12, max_iter=80, z0=None):
        """Inverse map by Newton iteration, vectorized."""
        w = np.asarray(w, dtype=complex)
        if self.coeffs.size == 1:
            return w / self.coeffs[0]
        z = w / self.coeffs[0] if z0 is None else np.asarray(z0, dtype=complex).copy()
        for _ in range(max_iter):
            r = self.phi(z) - w
            z = z - r / self.dphi(z)
            if np.all(np.abs(r) <= 0.1 * tol):
                break
        res = np.abs(self.phi(z) - w)
        bad = ~(res <= tol)
        if np.any(bad):
            z = np.where(bad, self._psi_continuation(w, tol), z)
            res = np.abs(self.phi(z) - w)
            if np.any(~(res <= tol)):
                raise InversionError(f"inverse map did not converge (residual {np.max(res):.3e})")
        return z

    def _psi_continuation(self, w, tol):
        # follow Phi(z) = t w from t=0, where z=0 is the exact root
        z = np.zeros_like(w)
        for t in np.linspace(0.05, 1.0, 20):
            for _ in range(30):
                z = z - (self.phi(z) - t * w) / self.dphi(z)
        for _ in range(20):
            z = z - (self.phi(z) - w) / self.dphi(z)
        return z

    def speed_max(self, r=1.0, n=1024):
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return float(np.max(np.abs(self.dphi(r * np.exp(1j * t)))))

    def area(self):
        """Exact area: integral of |Phi'|^2 over the disk."""
        k = np.arange(1, self.coeffs.size + 1)
        return float(np.pi * np.sum(k * np.abs(self.coeffs) ** 2))

    def arclength(self, theta):
        """Arclength of Phi(e^{it}) for t in [0, theta], spectrally accurate."""
        if self._speed_fourier is None:
            n = 1024
            t = 2 * np.pi * np.arange(n) / n
            self._speed_fourier = np.fft.rfft(np.abs(self.dphi(np.exp(1j * t)))) / n
        a = self._speed_fourier
        theta = np.asarray(theta, dtype=float)
        s = a[0].real * theta
        k = np.arange(1, a.size)
        # 2 Re(a_k (e^{ik t} - 1)/(ik)) summed over k
        ph = np.exp(1j * np.multiply.outer(theta, k)) - 1.0
        s = s + 2.0 * np.real(ph @ (a[1:] / (1j * k)))
        return s

    def perimeter(self):
        return float(self.arclength(2 * np.pi))


def map_eval(domain: ConformalDomain, z, direction="forward"):
    """Phi(z) for |z| <= 1, or Psi(w) for w in the closed domain."""
    z = np.asarray(z, dtype=complex)
    if direction == "forward":
        if np.any(np.abs(z) > 1 + 1e-12):
            raise DomainError("forward map requires |z| <= 1")
        out = domain.phi(z)
    elif direction == "inverse":
        out = domain.psi(z)
        if np.any(np.abs(out) > 1 + 1e-9):
            raise DomainError("point lies outside the closed domain")
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return out[()] if out.ndim == 0 else out


@dataclass
class BoundaryFrame:
    point: complex
    tangent: complex
    normal: complex
    curvature: float
    speed: float


def frame_arrays(domain: ConformalDomain, theta):
    """Vectorized frame: point, tau, nu, kappa, speed at preimage angles."""
    theta = np.asarray(theta, dtype=float)
    z = np.exp(1j * theta)
    d1 = domain.dphi(z)
    d2 = domain.d2phi(z)
    gp = 1j * z * d1
    speed = np.abs(d1)
    tau = gp / speed
    nu = -1j * tau
    kappa = (1.0 + np.real(z * d2 / d1)) / speed
    return domain.phi(z), tau, nu, kappa, speed


def boundary_frame(domain: ConformalDomain, theta: float) -> BoundaryFrame:
    p, tau, nu, kappa, speed = frame_arrays(domain, float(theta))
    return BoundaryFrame(complex(p), complex(tau), complex(nu), float(kappa), float(speed))


def tangent_angle(domain: ConformalDomain, theta):
    """Continuous angle of tau along the boundary, equal to arg tau mod 2pi."""
    theta = np.asarray(theta, dtype=float)
    c1 = domain.coeffs[0]
    return theta + np.pi / 2 + np.angle(c1) + np.angle(domain.dphi(np.exp(1j * theta)) / c1)


def gauss_bonnet(domain: ConformalDomain, n_quad: int = 512) -> float:
    """Total boundary curvature by periodic trapezoid in theta."""
    if n_quad < 16:
        raise ValueError("n_quad must be at least 16")
    t = 2 * np.pi * np.arange(n_quad) / n_quad
    _, _, _, kappa, speed = frame_arrays(domain, t)
    return float(np.sum(kappa * speed) * 2 * np.pi / n_quad)


@dataclass
class RegimeParams:
    h: float
    eta: float
    eps: float
    lambda_h: float
    beta: float = float("nan")
    C: float = float("nan")
    regime: bool = False
    regime2: bool = False
    margin: float = 1.0
    eta2: float = float("nan")

    def __post_init__(self):
        if math.isnan(self.eta2):
            self.eta2 = self.eta**2


def regime_flags(h, eta, eps, margin=1.0):
    """Thin-film regime tests evaluated as strict inequalities with a margin."""
    L = abs(math.log(h))
    small = margin * h < 1 and margin * eta < 1 and margin * eps < 1
    regime = small and margin / L < eps
    # the narrower regime is intersected with the smallness conditions; the
    # max() keeps it a subset of the first regime when log|log h| < 1
    regime2 = small and margin * max(math.log(L), 1.0) / L < eps
    return regime, regime2


def lambda_of(h, eps):
    L = abs(math.log(h))
    return (1.0 / (eps * abs(math.log(eps)))) * (math.log(L) / L)


def regime_from(h: float, beta: float, C: float = 1.0, margin: float = 1.0) -> RegimeParams:
    """Regime path eta^2 = C h |log h|^beta."""
    if not (0 < h < math.exp(-1)):
        raise RegimeError("h must lie in (0, 1/e)")
    if not (C > 0 and 0 < beta < 1):
        raise RegimeError("need C > 0 and 0 < beta < 1")
    L = abs(math.log(h))
    eta2 = C * h * L**beta
    eps = eta2 / (h * L)
    if eps >= 1:
        raise RegimeError(f"eps = {eps:.4g} >= 1 is outside the thin-film regime")
    eta = math.sqrt(eta2)
    lam = lambda_of(h, eps)
    r1, r2 = regime_flags(h, eta, eps, margin)
    return RegimeParams(h=h, eta=eta, eps=eps, lambda_h=lam, beta=beta, C=C,
                        regime=r1, regime2=r2, margin=margin, eta2=eta2)


@dataclass
class Mesh:
    vertices: np.ndarray  # complex, physical coordinates
    triangles: np.ndarray  # (m, 3) int, counterclockwise
    boundary: np.ndarray  # ordered boundary vertex indices, counterclockwise
    boundary_theta: np.ndarray  # preimage angles of boundary vertices
    boundary_s: np.ndarray  # arclength coordinates of boundary vertices
    layer: float
    preimage: np.ndarray | None = None
    domain: ConformalDomain | None = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return self.vertices.size

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1.real * e2.imag - e1.imag * e2.real)

    def boundary_edges(self):
        b = self.boundary
        return np.stack([b, np.roll(b, -1)], axis=1)

    def boundary_edge_lengths(self):
        e = self.boundary_edges()
        return np.abs(self.vertices[e[:, 1]] - self.vertices[e[:, 0]])


def _ring_layout(domain, interior_h, boundary_layer, grading):
    """Concentric rings in the preimage disk, spaced for the physical targets."""
    rings = []
    r = 1.0
    first = True
    while True:
        target = min(interior_h, boundary_layer + grading * (1.0 - r))
        step = target / domain.speed_max(r, 256)
        n = max(6, int(math.ceil(2 * np.pi * r / step)))
        if first:
            n = 4 * int(math.ceil(n / 4))  # keep quarter angles off the vertex set
            offset = np.pi / n
            first = False
        else:
            offset = (len(rings) % 2) * np.pi / n
        rings.append((r, n, offset))
        r_next = r - step * math.sqrt(3) / 2
        if r_next < 0.6 * step:
            break
        r = r_next
    return rings


def build_mesh(domain: ConformalDomain, interior_h: float, boundary_layer: float = 0.0,
               grading: float = 0.3) -> Mesh:
    """Graded triangulation of the disk mapped through Phi.

    Boundary edges have physical length at most boundary_layer (interior_h when
    boundary_layer is 0); spacing grows linearly with distance to the boundary.
    """
    if interior_h <= 0 or boundary_layer < 0:
        raise MeshError("need interior_h > 0 and boundary_layer >= 0")
    bl = boundary_layer if boundary_layer > 0 else interior_h
    bl = min(bl, interior_h)
    # chord vs arc: shrink slightly so chords stay below the target
    rings = _ring_layout(domain, interior_h, bl * 0.999, grading)
    pts = []
    for r, n, off in rings:
        a = off + 2 * np.pi * np.arange(n) / n
        pts.append(r * np.exp(1j * a))
    pts.append(np.array([0.0 + 0.0j]))
    zeta = np.concatenate(pts)
    n_b = rings[0][1]
    tri = Delaunay(np.column_stack([zeta.real, zeta.imag])).simplices.astype(np.int64)
    verts = domain.phi(zeta)
    # on the unit circle evaluate exactly from the angle to keep |z| = 1
    theta_b = rings[0][2] + 2 * np.pi * np.arange(n_b) / n_b
    verts[:n_b] = domain.phi(np.exp(1j * theta_b))
    mesh = Mesh(verts, tri, np.arange(n_b), theta_b, domain.arclength(theta_b), bl,
                preimage=zeta, domain=domain)
    areas = mesh.triangle_areas()
    flip = areas < 0
    if np.any(flip):
        tri[flip] = tri[flip][:, [0, 2, 1]]
        areas = np.abs(areas)
    if np.any(areas < 1e-14 * interior_h**2):
        raise MeshError("degenerate triangle in mesh")
    mesh.triangles = tri
    return mesh
