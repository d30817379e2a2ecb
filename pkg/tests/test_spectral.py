import numpy as np
import pytest

from shearpump.errors import NotHermitianError, SplitDegeneracyError
from shearpump.model import NecklaceSpec, necklace_hamiltonian, trimer_hamiltonian
from shearpump.spectral import (
    band_projection,
    eigensystem,
    fix_phases,
    jacobi_eigh,
    spectral_gap,
    trimer_crossing_test,
)


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_trimer_h0_spectrum(method):
    es = eigensystem(necklace_hamiltonian(NecklaceSpec(3)), method)
    np.testing.assert_allclose(es.values, [-1, -1, 2], atol=1e-12)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_p7_cosine_levels(method):
    es = eigensystem(necklace_hamiltonian(NecklaceSpec(7)), method)
    expect = np.sort([2 * np.cos(2 * np.pi * m / 7) for m in range(-3, 4)])
    np.testing.assert_allclose(es.values, expect, atol=1e-12)
    np.testing.assert_allclose(es.values[[0, 2, 4, 6]], [-1.8019, -0.4450, 1.2470, 2.0], atol=1e-4)


def test_diagonal_input_sorted():
    es = eigensystem(np.diag([3.0, -1.0, 2.0]), "jacobi")
    np.testing.assert_array_equal(es.values, [-1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.abs(es.vectors), np.eye(3)[:, [1, 2, 0]])


def test_non_hermitian_rejected():
    with pytest.raises(NotHermitianError):
        eigensystem(np.array([[0, 1], [0, 0]], dtype=complex))


@pytest.mark.parametrize("n", [2, 5, 12, 33, 63])
def test_jacobi_reconstruction(rng, n):
    H = random_hermitian(rng, n)
    w, V = jacobi_eigh(H)
    norm = np.linalg.norm(H)
    assert np.linalg.norm(V @ np.diag(w) @ V.conj().T - H) < 1e-11 * norm
    assert np.linalg.norm(V.conj().T @ V - np.eye(n)) < 1e-11
    np.testing.assert_allclose(w, np.linalg.eigvalsh(H), atol=1e-11 * norm)


def test_jacobi_matches_lapack_frame(rng):
    H = random_hermitian(rng, 9)
    a, b = eigensystem(H, "jacobi"), eigensystem(H, "lapack")
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)
    np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-9)


def test_deterministic_phase_convention(rng):
    H = random_hermitian(rng, 6)
    a, b = eigensystem(H), eigensystem(H.copy())
    np.testing.assert_array_equal(a.vectors, b.vectors)
    top = np.argmax(np.abs(a.vectors), axis=0)
    piv = a.vectors[top, np.arange(6)]
    assert np.all(np.abs(piv.imag) < 1e-15) and np.all(piv.real > 0)


def test_fix_phases_removes_rephasing(rng):
    V = np.linalg.qr(random_hermitian(rng, 5))[0]
    phases = np.exp(2j * np.pi * rng.random(5))
    np.testing.assert_allclose(fix_phases(V * phases), fix_phases(V), atol=1e-14)


def test_projection_full_is_identity():
    es = eigensystem(necklace_hamiltonian(NecklaceSpec(5), 0.1))
    P = band_projection(es, range(5))
    np.testing.assert_allclose(P.matrix, np.eye(5), atol=1e-12)


def test_trimer_doublet_projection():
    es = eigensystem(necklace_hamiltonian(NecklaceSpec(3)))
    P = band_projection(es, [0, 1])
    assert P.rank == 2
    np.testing.assert_allclose(P.matrix @ np.ones(3), 0, atol=1e-12)
    assert abs(np.trace(P.matrix) - 2) < 1e-10
    assert np.linalg.norm(P.matrix @ P.matrix - P.matrix) < 1e-11
    np.testing.assert_allclose(P.complement.matrix, np.ones((3, 3)) / 3, atol=1e-12)


def test_split_degeneracy_error():
    es = eigensystem(necklace_hamiltonian(NecklaceSpec(3)))
    with pytest.raises(SplitDegeneracyError):
        band_projection(es, [0])


def test_spectral_gaps():
    assert spectral_gap(eigensystem(trimer_hamiltonian(1, 1, 1)), 2) == pytest.approx(3.0)
    assert spectral_gap(eigensystem(trimer_hamiltonian(1, 1, 1, np.pi)), 2) == pytest.approx(0.0, abs=1e-12)
    assert spectral_gap(eigensystem(trimer_hamiltonian(1, 1, 1)), 1) == pytest.approx(0.0, abs=1e-12)
    assert spectral_gap(eigensystem(trimer_hamiltonian(1.1, 1, 1)), 1) > 0
    with pytest.raises(IndexError):
        spectral_gap(eigensystem(trimer_hamiltonian(1, 1, 1)), 3)


def test_crossing_test_examples():
    t = trimer_crossing_test(1, 1, 1, 0.0)
    assert t.crossing and abs(t.margin) < 1e-12
    assert not trimer_crossing_test(1, 1, 1, np.pi / 2).crossing
    t = trimer_crossing_test(1.2, 1, 1, 0.0)
    assert not t.crossing and t.margin > 0
    assert trimer_crossing_test(0.7, 0.7, 0.7, np.pi).crossing
