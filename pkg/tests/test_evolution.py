import io

import numpy as np
import pytest

from shearpump.berry import transport_cycle
from shearpump.errors import GapClosureError, UnitarityError
from shearpump.evolution import (
    AdiabaticityWarning,
    Schedule,
    _expm_herm,
    _min_gap,
    _prefix_products,
    adiabatic_generator,
    evolve,
    operator_identity_residual,
    transported_charge_dynamical,
)
from shearpump.loop import DeformationLoop
from shearpump.model import HoppingLaw, NecklaceModel, NecklaceSpec, TrimerModel
from shearpump.spectral import Projection
from shearpump.twolevel import CrossingCoefficients, TwoLevelModel

HOP = HoppingLaw.from_values(1.0, -1.0)
MODEL = TrimerModel(HOP)


def test_schedule_circle():
    sch = Schedule.circle(0.1, 50.0)
    np.testing.assert_allclose(sch.position([0.0, 0.5, 1.0]), [0.1, -0.1, 0.1], atol=1e-15)
    np.testing.assert_allclose(sch.velocity([0.0, 1.0]), 0, atol=1e-15)
    s = np.linspace(0.1, 0.9, 5)
    fd = (sch.position(s + 1e-6) - sch.position(s - 1e-6)) / 2e-6
    np.testing.assert_allclose(sch.velocity(s), fd, atol=1e-7)
    assert sch.with_tau(10.0).tau == 10.0


def test_schedule_rejects_abrupt_start():
    with pytest.raises(ValueError):
        Schedule(1.0, lambda s: 0.1 * s + 0j)
    with pytest.raises(ValueError):
        Schedule.circle(0.1, 0.0)


def test_expm_and_prefix():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 3, 3)) + 1j * rng.normal(size=(4, 3, 3))
    K = A + np.conj(np.swapaxes(A, -1, -2))
    U = _expm_herm(K)
    for k in range(4):
        w, V = np.linalg.eigh(K[k])
        np.testing.assert_allclose(U[k], V @ np.diag(np.exp(-1j * w)) @ V.conj().T, atol=1e-12)
    P = _prefix_products(U)
    np.testing.assert_allclose(P[3], U[3] @ U[2] @ U[1] @ U[0], atol=1e-12)


def test_static_path_stays_put():
    out = evolve(MODEL, Schedule.static(0.05, 20.0), 0.0, [0])
    w, V = np.linalg.eigh(MODEL.hamiltonian(0.05, 0.0))
    P = np.outer(V[:, 0], V[:, 0].conj())
    assert np.linalg.norm(out.rho.matrix - P) < 1e-9
    assert out.unitarity_defect < 1e-8
    np.testing.assert_allclose(out.current, out.current[0], atol=1e-9)


def test_evolution_accepts_projection_and_snapshots():
    sch = Schedule.circle(0.1, 20.0, n_steps=400)
    w, V = np.linalg.eigh(MODEL.hamiltonian(0.1, 0.0))
    P0 = Projection(np.outer(V[:, 0], V[:, 0].conj()), 1)
    a = evolve(MODEL, sch, 0.0, P0, snapshots=[0, 200, 400])
    b = evolve(MODEL, sch, 0.0, [0])
    np.testing.assert_allclose(a.U, b.U)
    assert sorted(a.snapshots) == [0, 200, 400]
    np.testing.assert_allclose(a.snapshots[400], a.rho.matrix, atol=1e-14)
    with pytest.raises(ValueError):
        evolve(MODEL, sch, order=3)


def test_unitary_even_with_coarse_steps():
    assert evolve(MODEL, Schedule.circle(0.1, 1e3, n_steps=2), 0.0, [0]).unitarity_defect < 1e-12


def test_unitarity_guard(monkeypatch):
    import shearpump.evolution as ev

    exact = ev._expm_herm
    monkeypatch.setattr(ev, "_expm_herm", lambda K: 1.001 * exact(K))
    with pytest.raises(UnitarityError):
        evolve(MODEL, Schedule.circle(0.1, 5.0, n_steps=20), 0.0, [0])


def test_integrator_orders():
    sch = Schedule.circle(0.1, 30.0)
    ref = evolve(MODEL, sch.with_tau(30.0, 8000), order=4).U
    for order, expect in ((2, 2.0), (4, 4.0)):
        err = [np.linalg.norm(evolve(MODEL, sch.with_tau(30.0, n), order=order).U - ref) for n in (200, 400)]
        assert np.log2(err[0] / err[1]) == pytest.approx(expect, abs=0.3)


def test_csv_output():
    out = evolve(MODEL, Schedule.circle(0.1, 5.0, n_steps=50))
    buf = io.StringIO()
    text = out.to_csv(fh=buf)
    lines = text.splitlines()
    assert lines[0] == "s,current,residual" and len(lines) == 52
    assert lines[1].endswith(",nan")
    assert buf.getvalue() == text


def test_adiabatic_generator_is_hermitian_and_exact():
    sch = Schedule.circle(0.1, 200.0)
    s = np.array([0.2, 0.6])
    HA = adiabatic_generator(MODEL, sch.position(s), sch.velocity(s), 0.0, [0], sch.tau)
    np.testing.assert_allclose(HA, np.conj(np.swapaxes(HA, -1, -2)), atol=1e-14)
    gap = _min_gap(MODEL, sch, 0.0, [0])
    out = evolve(MODEL, sch.with_tau(500 / gap), 0.0, [0], adiabatic_band=[0])
    w, V = np.linalg.eigh(MODEL.hamiltonian(sch.position(1.0), 0.0))
    P1 = np.outer(V[:, 0], V[:, 0].conj())
    assert np.linalg.norm(out.rho.matrix - P1) < 1e-6


def test_adiabatic_distance_halves_with_tau():
    sch = Schedule.circle(0.1, 1.0)
    gap = _min_gap(MODEL, sch, 0.0, [0])
    peaks = []
    for tau in (200 / gap, 400 / gap):
        rep = operator_identity_residual(MODEL, sch, 0.0, [0], taus=np.array([tau]), n_samples=9)
        peaks.append(rep.max_residual[0])
    assert peaks[0] / peaks[1] == pytest.approx(2.0, rel=0.1)


def test_identity_slope_and_annotations():
    sch = Schedule.circle(0.1, 1.0)
    gap = _min_gap(MODEL, sch, 0.0, [0])
    rep = operator_identity_residual(MODEL, sch, 0.0, [0], taus=np.array([250, 500, 1000]) / gap, n_samples=9)
    assert rep.slope == pytest.approx(-1.0, abs=0.1)
    assert rep.slope_halfwidth is not None and rep.slope_halfwidth >= 0
    assert rep.residuals.shape == (3, 9)
    low = operator_identity_residual(MODEL, sch, 0.0, [0], taus=np.array([5 / gap]), n_samples=5)
    assert low.annotations


def test_identity_gap_closure():
    with pytest.raises(GapClosureError):
        operator_identity_residual(MODEL, Schedule.circle(0.1, 1.0, center=0.1), 0.0, [0], taus=np.array([10.0]))


def test_dynamical_charge_two_level():
    c = CrossingCoefficients(0.5, 1.0, 1, 1)
    model = TwoLevelModel(c)
    sch = Schedule.circle(0.3, 1.0)
    gap = _min_gap(model, sch, 0.0, [1])
    q = transported_charge_dynamical(model, sch.with_tau(4000 / gap), 0.0, [1], order=4)
    geo = transport_cycle(model, DeformationLoop.circle(0.3, 128), 0.0, [1]).charge_e
    assert q == pytest.approx(geo, rel=1e-3)


def test_dynamical_charge_orientation_and_filled_ring():
    sch = Schedule.circle(0.1, 1.0)
    gap = _min_gap(MODEL, sch, 0.0, [0])
    fwd = transported_charge_dynamical(MODEL, sch.with_tau(2000 / gap), 0.0, [0], order=4)
    rev = transported_charge_dynamical(MODEL, Schedule.circle(0.1, 2000 / gap, orientation=-1), 0.0, [0], order=4)
    assert rev == pytest.approx(-fwd, rel=1e-3)
    full = transported_charge_dynamical(MODEL, sch.with_tau(200 / gap), 0.0, [0, 1, 2])
    assert abs(full) < 1e-8


def test_dynamical_charge_warns_when_fast():
    sch = Schedule.circle(0.1, 1.0)
    with pytest.warns(AdiabaticityWarning):
        transported_charge_dynamical(MODEL, sch, 0.0, [0])


def test_dynamical_charge_necklace_band_pair():
    spec = NecklaceSpec(5, HOP)
    model = NecklaceModel(spec)
    sch = Schedule.circle(0.1, 1.0)
    gap = _min_gap(model, sch, 0.0, [0, 1])
    q = transported_charge_dynamical(model, sch.with_tau(2000 / gap), 0.0, [0, 1], order=4)
    geo = transport_cycle(model, DeformationLoop.circle(0.1, 256), 0.0, [0, 1]).charge_e
    assert q == pytest.approx(geo, rel=2e-3)
