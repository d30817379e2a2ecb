import numpy as np
import pytest

from shearpump.errors import ModelError
from shearpump.model import (
    OMEGA3,
    HoppingLaw,
    NecklaceModel,
    NecklaceSpec,
    TrimerModel,
    TrimerShape,
    bond_vectors,
    jacobi_from_sides,
    linearized_necklace,
    necklace_hamiltonian,
    sheared_length_sq,
    sheared_triangle_sides,
    sides_from_jacobi,
    trimer_hamiltonian,
    trimer_shear_cycle,
)


def test_hopping_law_values():
    h = HoppingLaw(1.0, 2.0)
    assert h.h1 == 1.0 and h.dh1 == -1.0
    g = HoppingLaw.from_values(1.5, -0.4)
    assert g.h1 == pytest.approx(1.5) and g.dh1 == pytest.approx(-0.4)
    for d in (1e-2, 5e-3):
        fd = (h.evaluate(1.3 + d) - h.evaluate(1.3 - d)) / (2 * d)
        assert abs(fd - h.derivative(1.3)) < 0.1 * d
    with pytest.raises(ModelError):
        HoppingLaw(0.0, 1.0)


def test_bond_vectors():
    d = bond_vectors(NecklaceSpec(3))
    assert d[0] == pytest.approx(np.exp(1j * (np.pi / 2 + np.pi / 3)))
    for p in (3, 5, 7, 9):
        d = bond_vectors(NecklaceSpec(p))
        assert abs(d.sum()) < 1e-14
        np.testing.assert_allclose(np.abs(d) ** 2, 1, atol=1e-15)


def test_even_and_small_rings_rejected():
    for p in (2, 4, 6):
        with pytest.raises(ModelError):
            NecklaceSpec(p)


def test_sheared_length_examples():
    assert sheared_length_sq(1, 0) == 1
    assert sheared_length_sq(1, 0.1) == pytest.approx(1.21)
    assert sheared_length_sq(1j, 0.1) == pytest.approx(0.81)


def test_trimer_necklace_unstrained():
    H = necklace_hamiltonian(NecklaceSpec(3))
    np.testing.assert_allclose(H, np.ones((3, 3)) - np.eye(3), atol=1e-15)


def test_p5_spectrum():
    w = np.linalg.eigvalsh(necklace_hamiltonian(NecklaceSpec(5)))
    np.testing.assert_allclose(w, [-1.6180339887, -1.6180339887, 0.6180339887, 0.6180339887, 2.0], atol=1e-9)


def test_flux_on_closing_bond():
    H = necklace_hamiltonian(NecklaceSpec(5), 0.0, 0.7)
    assert H[0, 4] == pytest.approx(np.exp(-0.7j))
    assert H[4, 0] == pytest.approx(np.exp(0.7j))


def test_flux_gauge_covariance(rng):
    spec = NecklaceSpec(7)
    x, theta = 0.08 * np.exp(1.1j), 0.9
    ref = np.linalg.eigvalsh(NecklaceModel(spec).hamiltonian(x, theta))
    for bond in range(0, 8):
        w = np.linalg.eigvalsh(NecklaceModel(spec, flux_bond=bond).hamiltonian(x, theta))
        np.testing.assert_allclose(w, ref, atol=1e-12)


def test_linearized_retake_matrix():
    spec = NecklaceSpec(3, HoppingLaw(1.0, 2.0))
    H0, dx, dxbar = linearized_necklace(spec)
    d = bond_vectors(spec)
    w = np.exp(2j * np.pi / 3)
    for j in range(1, 4):
        lo, hi = j - 1, j % 3
        # -h'(1) omega^(2j-1) = h'(1) d_j^2 since d_j^2 = -omega^(2j-1)
        expect = -spec.hopping.dh1 * w ** (2 * j - 1)
        assert dxbar[hi, lo] == pytest.approx(expect)
        assert dxbar[hi, lo] == pytest.approx(spec.hopping.dh1 * d[j - 1] ** 2)
    np.testing.assert_allclose(dx, dxbar.conj().T)
    np.testing.assert_allclose(H0, np.ones((3, 3)) - np.eye(3))


def test_linearization_central_difference():
    spec = NecklaceSpec(5)
    H0, dx, dxbar = linearized_necklace(spec)
    m = NecklaceModel(spec)
    for delta in (1e-4,):
        fd1 = (m.hamiltonian(delta) - m.hamiltonian(-delta)) / (2 * delta)
        fd2 = (m.hamiltonian(1j * delta) - m.hamiltonian(-1j * delta)) / (2 * delta)
        np.testing.assert_allclose(fd1, dx + dxbar, atol=1e-7)
        np.testing.assert_allclose(fd2, 1j * (dx - dxbar), atol=1e-7)


def test_zero_derivative_law():
    H0, dx, dxbar = linearized_necklace(NecklaceSpec(5, HoppingLaw(1.0, 0.0)))
    assert np.all(dx == 0) and np.all(dxbar == 0)


def test_linearization_error_is_quadratic():
    spec = NecklaceSpec(5)
    H0, dx, dxbar = linearized_necklace(spec)
    u = np.exp(0.4j)
    rs = np.geomspace(1e-3, 1e-2, 5)
    err = [np.linalg.norm(necklace_hamiltonian(spec, r * u) - (H0 + r * u * dx + r * np.conj(u) * dxbar))
           for r in rs]
    assert np.polyfit(np.log(rs), np.log(err), 1)[0] == pytest.approx(2.0, abs=0.02)


def test_wirtinger_derivative_matches_fd():
    for model in (NecklaceModel(NecklaceSpec(5)), NecklaceModel(NecklaceSpec(5), flux_bond=0),
                  TrimerModel(HoppingLaw(1.0, 2.0))):
        x, th, h = 0.07 - 0.03j, 0.4, 1e-6
        d1 = (model.hamiltonian(x + h, th) - model.hamiltonian(x - h, th)) / (2 * h)
        d2 = (model.hamiltonian(x + 1j * h, th) - model.hamiltonian(x - 1j * h, th)) / (2 * h)
        np.testing.assert_allclose(model.d_x(x, th), 0.5 * (d1 - 1j * d2), atol=1e-8)
        dt = (model.hamiltonian(x, th + h) - model.hamiltonian(x, th - h)) / (2 * h)
        np.testing.assert_allclose(model.d_theta(x, th), dt, atol=1e-8)


def test_trimer_examples():
    np.testing.assert_allclose(np.linalg.eigvalsh(trimer_hamiltonian(1, 1, 1)), [-1, -1, 2], atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(trimer_hamiltonian(1, 1, 1, np.pi)), [-2, 1, 1], atol=1e-12)
    a, b, c, th = 0.9, 1.2, 1.05, 0.7
    for E in np.linalg.eigvalsh(trimer_hamiltonian(a, b, c, th)):
        assert abs(-E**3 + E * (a * a + b * b + c * c) + 2 * a * b * c * np.cos(th)) < 1e-10


def test_trimer_cycle():
    hop = HoppingLaw.from_values(1.0, -1.0)
    cyc = trimer_shear_cycle(0.0, 16, hop)
    np.testing.assert_allclose([cyc.a, cyc.b, cyc.c], 1.0)
    eps = 0.03
    cyc = trimer_shear_cycle(eps, 64, hop)
    assert cyc.b[0] == pytest.approx(1 + 2 * hop.dh1 * eps)
    assert cyc.a[0] == pytest.approx(1 + 2 * hop.dh1 * eps * np.cos(2 * np.pi / 3))
    assert cyc.c[0] == pytest.approx(cyc.a[0])
    np.testing.assert_allclose(cyc.a + cyc.b + cyc.c, 3.0, atol=1e-14)
    cyc.loop.check_closed()
    with pytest.raises(ModelError):
        trimer_shear_cycle(-1.0)


def test_trimer_model_matches_cycle():
    hop = HoppingLaw(1.0, 2.0)
    cyc = trimer_shear_cycle(0.05, 32, hop)
    H = TrimerModel(hop).hamiltonian(cyc.loop.samples, 0.0)
    np.testing.assert_allclose(H, trimer_hamiltonian(cyc.a, cyc.b, cyc.c))


def test_jacobi_examples():
    s = jacobi_from_sides(1, 1, 1)
    assert (s.q, s.X, s.Y) == pytest.approx((3, 0, 0))
    flat = jacobi_from_sides(4.0, 1.0, 1.0)  # sides 2, 1, 1
    assert flat.X**2 + flat.Y**2 == pytest.approx(1, abs=1e-12)
    assert flat.is_linear
    with pytest.raises(ModelError):
        jacobi_from_sides(-1, 1, 1)
    with pytest.raises(ModelError):
        TrimerShape(3.0, 0.9, 0.9)


def test_small_shear_jacobi_coordinates():
    x = 0.004 * np.exp(0.8j)
    s = jacobi_from_sides(*sheared_triangle_sides(x))
    assert abs(s.X - 2 * x.real) < 50 * abs(x) ** 2
    assert abs(s.Y - 2 * x.imag) < 50 * abs(x) ** 2
    assert s.q == pytest.approx(3, abs=50 * abs(x) ** 2)


def test_jacobi_round_trip(rng):
    for _ in range(50):
        shape = TrimerShape.from_angles(rng.uniform(0.5, 5), rng.uniform(0, np.pi / 2), rng.uniform(0, 2 * np.pi))
        back = jacobi_from_sides(*sides_from_jacobi(shape))
        assert (back.q, back.X, back.Y) == pytest.approx((shape.q, shape.X, shape.Y), abs=1e-12)


def test_soft_warning_outside_linear_regime():
    with pytest.warns(RuntimeWarning):
        necklace_hamiltonian(NecklaceSpec(3), 0.6)
