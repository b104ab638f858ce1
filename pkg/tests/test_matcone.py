import numpy as np
import pytest

from ballqcqp.errors import ShapeError, SizeError
from ballqcqp.matcone import (ConeTol, SocConvention, as_sym, kron, min_eig, psd_check,
                              soc_contains, spectral)


def test_spectral_closed_forms():
    lam, _ = spectral([[1, 0.5], [0.5, 1]])
    assert np.allclose(lam, [1.5, 0.5])
    lam, _ = spectral(np.eye(3))
    assert np.allclose(lam, [1, 1, 1])
    lam, _ = spectral([[0, 1], [1, 0]])
    assert np.allclose(lam, [1, -1])


@pytest.mark.parametrize("d", [1, 5, 40, 150])
def test_spectral_reconstruction(d, rng):
    A = rng.normal(size=(d, d))
    A = A + A.T
    lam, V = spectral(A)
    assert np.all(np.diff(lam) <= 0)
    assert np.linalg.norm(V * lam @ V.T - A) <= 1e-10 * (1 + np.linalg.norm(A))
    assert np.allclose(V.T @ V, np.eye(d), atol=1e-12)


def test_psd_check_examples():
    ok, me = psd_check([[1, 0.5], [0.5, 1]])
    assert ok and me == pytest.approx(0.5)
    ok, me = psd_check([[0, 1], [1, 0]])
    assert not ok and me == pytest.approx(-1)
    ok, me = psd_check(np.zeros((3, 3)))
    assert ok and me == 0


def test_psd_check_tolerance_scales_with_norm():
    A = np.diag([1e6, -1e-3])
    assert psd_check(A, ConeTol(abs=0, rel=1e-8))[0]
    assert not psd_check(A, ConeTol(abs=0, rel=1e-10))[0]


def test_as_sym_rejects_bad_input():
    with pytest.raises(ShapeError):
        as_sym(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        as_sym([[np.nan]])
    S = as_sym([[1, 2], [0, 1]])
    assert np.array_equal(S, S.T)


def test_kron_examples():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    K = kron([[1, -0.5], [-0.5, 1]], [[1, 0.5], [0.5, 1]])
    assert K[0, 2] == -0.5 and K[0, 3] == -0.25
    B = np.array([[1.0, 2.0], [2.0, 3.0]])
    assert np.array_equal(kron([[2.0]], B), 2 * B)


def test_kron_size_guard():
    with pytest.raises(SizeError):
        kron(np.eye(101), np.eye(100))


def test_kron_of_psd_is_psd(rng):
    for _ in range(1000):
        p, q = rng.integers(1, 5, size=2)
        L1, L2 = rng.normal(size=(p, p)), rng.normal(size=(q, q))
        A, B = L1 @ L1.T, L2 @ L2.T
        assert psd_check(kron(A, B))[0]


def test_soc_examples():
    inside, margin = soc_contains([2, 1, 3])
    assert inside and margin == pytest.approx(3 - np.sqrt(5))
    inside, margin = soc_contains([2, 0, 2])
    assert inside and margin == 0
    inside, margin = soc_contains([2, 0, 0])
    assert not inside and margin == -2
    inside, margin = soc_contains([3, 2, 1], SocConvention.FIRST)
    assert inside and margin == pytest.approx(3 - np.sqrt(5))


def test_soc_scale_invariance(rng):
    for _ in range(200):
        v = rng.normal(size=4)
        s = rng.uniform(0.1, 10)
        f1, m1 = soc_contains(v)
        f2, m2 = soc_contains(s * v)
        assert f1 == f2
        assert m2 == pytest.approx(s * m1)


def test_min_eig_matches_spectral(rng):
    A = rng.normal(size=(6, 6))
    A += A.T
    assert min_eig(A) == pytest.approx(spectral(A)[0][-1])
