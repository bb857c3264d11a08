import math

import numpy as np
import pytest

from bvortex.canonical import BoundaryVortexConfig, CanonicalMap, sample_on_mesh
from bvortex.errors import ArityError, ConfigError, MeshError, StallError
from bvortex.fields import VectorField, detect_boundary_vortices, energy, l2_gradient, l2_norm
from bvortex.geometry import build_mesh
from bvortex.minimize import (MinimizeOptions, antipodal_defect, continuation, fit_expansion,
                              first_order_gaps, match_atoms, minimize_field)
from bvortex.renorm import gamma0

TARGET = -2 * math.pi * math.log(2) + 2 * gamma0()


@pytest.fixture(scope="module")
def mesh(disk):
    return build_mesh(disk, 0.1, 0.025, 0.3)


def _canonical(disk, mesh, shift=0.0, core=0.0):
    cm = CanonicalMap.build(disk, BoundaryVortexConfig([shift, math.pi + shift], [1, 1]))
    return VectorField.from_complex(mesh, sample_on_mesh(cm, mesh, core=core))


def test_options_validation():
    with pytest.raises(ConfigError):
        MinimizeOptions(grad_tol=0.0)
    with pytest.raises(ConfigError):
        MinimizeOptions(shrink=1.5)
    with pytest.raises(ConfigError):
        MinimizeOptions(mode="newton")


def test_descent_from_canonical_map(disk, mesh):
    f0 = _canonical(disk, mesh)
    E0 = energy(f0, (0.1, None)).total
    f, br, it = minimize_field(mesh, (0.1, None), f0)
    assert it > 0 and br.total < E0
    tol = 1e-6 * disk.perimeter()
    assert l2_norm(mesh, l2_gradient(f, (0.1, None))) <= tol
    assert np.max(np.abs(np.hypot(f.values[:, 0], f.values[:, 1]) - 1)) <= 1e-12
    meas = detect_boundary_vortices(f, 16 * 0.1)
    per = disk.perimeter()
    assert antipodal_defect(meas.atoms, per) <= math.radians(5)


def test_constant_start_develops_two_atoms(mesh):
    f0 = VectorField(mesh, np.tile([1.0, 0.0], (mesh.n_vertices, 1)))
    f, br, _ = minimize_field(mesh, (0.1, None), f0)
    meas = detect_boundary_vortices(f, 1.6)
    assert len(meas.atoms) == 2
    assert sum(w for _, w in meas.atoms) == pytest.approx(2 * math.pi, abs=1e-12)


def test_infinite_tolerance_returns_init(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.1)
    f, br, it = minimize_field(mesh, (0.1, None), f0, MinimizeOptions(grad_tol=math.inf))
    assert it == 0 and f is f0
    assert br.total == energy(f0, (0.1, None)).total


def test_stall_reports_best_iterate(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.1)
    with pytest.raises(StallError) as exc:
        minimize_field(mesh, (0.1, None), f0, MinimizeOptions(max_iters=2))
    best, br, it = exc.value.best
    assert it == 2 and br.total <= energy(f0, (0.1, None)).total


def test_relaxed_mode_descends(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.1)
    r0 = VectorField(mesh, f0.values, None, "relaxed")
    f, br, _ = minimize_field(mesh, (0.1, 0.1), r0, MinimizeOptions(mode="relaxed_eta"))
    assert br.total < energy(r0, (0.1, 0.1)).total
    assert br.bulk_penalty > 0


def test_single_entry_schedule_matches_minimize_field(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.1)
    tr = continuation(mesh, [0.1], lambda e: (e, None), init=f0)
    f, br, _ = minimize_field(mesh, (0.1, None), f0)
    assert len(tr) == 1
    assert tr[0][2].total == br.total
    assert np.array_equal(tr[0][1].values, f.values)


def test_continuation_checks(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.1)
    with pytest.raises(ConfigError):
        continuation(mesh, [0.1, 0.2], lambda e: (e, None), init=f0)
    with pytest.raises(MeshError):
        continuation(mesh, [0.2, 0.05], lambda e: (e, None), init=f0)
    with pytest.raises(ConfigError):
        continuation(mesh, [0.2, 0.1], lambda e: (e, None))


def test_stall_carries_eps(disk, mesh):
    f0 = _canonical(disk, mesh, core=0.2)
    with pytest.raises(StallError) as exc:
        continuation(mesh, [0.2, 0.1], lambda e: (e, None), MinimizeOptions(max_iters=1), init=f0)
    assert exc.value.eps == 0.2


def test_continuation_trace_on_small_mesh(disk, mesh):
    f0 = _canonical(disk, mesh, shift=0.2, core=0.2)
    tr = continuation(mesh, [0.2, 0.15, 0.1], lambda e: (e, None), init=f0)
    E = [b.total for _, _, b in tr]
    assert np.all(np.diff(E) > 0)


def test_fit_exact_linear_data():
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    E = 2 * math.pi * np.abs(np.log(eps)) + TARGET
    fit = fit_expansion(list(zip(eps, E)), target=TARGET)
    assert fit.slope == pytest.approx(2 * math.pi, abs=1e-12)
    assert fit.intercept == pytest.approx(-13.9749, abs=1e-4)
    assert fit.intercept == pytest.approx(TARGET, abs=1e-12)
    assert fit.N_est == pytest.approx(2.0, abs=1e-12)
    assert fit.residual < 1e-12 and max(fit.gaps) < 1e-12


def test_fit_single_double_vortex_slope():
    # one vortex of multiplicity 2: first-order law pi |d| |log eps| = 2 pi |log eps|
    eps = np.geomspace(0.3, 0.01, 6)
    E = math.pi * 2 * np.abs(np.log(eps)) + 1.7
    assert fit_expansion(list(zip(eps, E))).slope == pytest.approx(2 * math.pi, abs=1e-12)


def test_fit_arity():
    with pytest.raises(ArityError):
        fit_expansion([(0.1, 1.0), (0.05, 2.0)])


def test_first_order_gaps_exact():
    samples = [(e, 2 * math.pi * abs(math.log(e)) + TARGET) for e in (0.2, 0.1)]
    assert max(first_order_gaps(samples, 2, TARGET)) < 1e-12


def test_match_atoms_and_defect():
    per = 2 * math.pi
    prev = [(0.1, math.pi), (3.2, math.pi)]
    cur = [(3.25, math.pi), (6.27, math.pi)]
    assert match_atoms(prev, cur, per) == [(6.27, math.pi), (3.25, math.pi)]
    assert antipodal_defect([(0.0, 1), (math.pi, 1)], per) == pytest.approx(0.0)
    assert antipodal_defect([(0.0, 1)], per) == math.inf
