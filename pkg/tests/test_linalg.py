import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import complex_box, unit_vector
from spectral_decay.errors import (
    DegenerateSpectrum,
    Defective,
    NonFinite,
    NotNormalized,
    ParallelStates,
)
from spectral_decay.linalg import (
    cluster_eigenvalues,
    eig_biorthogonal,
    eigenvalues_2x2,
    expm,
    kaon_reciprocal,
)


def test_diagonal_system():
    s = eig_biorthogonal(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(s.eigenvalues, [1, 3])
    np.testing.assert_allclose(np.abs(s.right), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(s.left), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(s.overlaps, [1, 1])


def test_jordan_block_is_defective():
    with pytest.raises(Defective):
        eig_biorthogonal([[2.0, 1.0], [0.0, 2.0]])


def test_nonfinite_rejected():
    with pytest.raises(NonFinite):
        eig_biorthogonal([[np.nan, 0], [0, 1]])


def test_upper_triangular_by_hand():
    # eigenvectors solved by hand: (1,0), (1,1)/sqrt2; covectors (1,-1), (0,1)
    s = eig_biorthogonal([[1.0, 1.0], [0.0, 2.0]])
    np.testing.assert_allclose(s.eigenvalues, [1, 2])

    def parallel(u, w):
        return abs(abs(np.vdot(u, w)) - np.linalg.norm(u) * np.linalg.norm(w)) < 1e-12

    assert parallel(s.right[:, 0], [1, 0])
    assert parallel(s.right[:, 1], np.array([1, 1]) / np.sqrt(2))
    assert parallel(s.left[0].conj(), [1, -1])
    assert parallel(s.left[1].conj(), [0, 1])
    np.testing.assert_allclose(s.overlaps, [1 / np.sqrt(2)] * 2, rtol=1e-14)


def test_overlaps_real_positive(rng):
    s = eig_biorthogonal(complex_box(rng, (4, 4)))
    assert np.all(np.abs(s.overlaps.imag) < 1e-14)
    assert np.all(s.overlaps.real > 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_biorthogonal_invariants(rng, n):
    for _ in range(20):
        a = complex_box(rng, (n, n))
        s = eig_biorthogonal(a)
        pair = s.left @ s.right
        off = pair - np.diag(np.diag(pair))
        assert np.max(np.abs(off)) < 1e-12 * max(1.0, np.max(np.abs(pair)))
        np.testing.assert_allclose(np.linalg.norm(s.right, axis=0), 1, atol=1e-12)
        assert np.max(np.abs(s.unity() - np.eye(n))) < 1e-10
        assert np.max(np.abs(s.reconstruct() - a)) < 1e-10
        assert list(s.eigenvalues) == sorted(s.eigenvalues, key=lambda z: (z.real, z.imag))


def test_system_is_read_only():
    s = eig_biorthogonal(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        s.right[0, 0] = 5


def test_cluster_merging():
    ids, centers = cluster_eigenvalues([1.0, 2.0, 1.0 + 1e-12, 3.0], tol=1e-9)
    assert ids == (0, 1, 0, 2)
    np.testing.assert_allclose(centers, [1.0 + 5e-13, 2.0, 3.0])
    ids, _ = cluster_eigenvalues([1.0, 1.0 + 1e-12], tol=0.0)
    assert ids == (0, 1)


def test_degenerate_but_diagonalizable_clusters():
    s = eig_biorthogonal(np.diag([2.0, 1.0, 2.0]))
    assert s.cluster_ids == (0, 1, 1)
    assert len(s.cluster_centers) == 2


def test_kaon_orthogonal_case():
    kb = kaon_reciprocal([1, 0], [0, 1])
    assert kb.chi == 0
    np.testing.assert_allclose(kb.ks_prime, [1, 0])
    np.testing.assert_allclose(kb.kl_prime, [0, 1])


def test_kaon_hand_example():
    kb = kaon_reciprocal([1, 0], [0.6, 0.8])
    assert kb.chi == pytest.approx(0.6)
    np.testing.assert_allclose(kb.ks_prime, [0.8, -0.6], atol=1e-15)
    np.testing.assert_allclose(kb.kl_prime, [0, 1], atol=1e-15)
    assert np.vdot(kb.kl_prime, kb.ks_prime) == pytest.approx(-0.6)


def test_kaon_errors():
    with pytest.raises(ParallelStates):
        kaon_reciprocal([1, 0], [1, 0])
    with pytest.raises(NotNormalized):
        kaon_reciprocal([1, 0], [1, 1])


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kaon_identities_property(seed):
    rng = np.random.default_rng(seed)
    ks, kl = unit_vector(rng), unit_vector(rng)
    kb = kaon_reciprocal(ks, kl)
    s = kb.norm_factor
    assert abs(np.vdot(kb.ks_prime, kl)) < 1e-12
    assert abs(np.vdot(kb.kl_prime, ks)) < 1e-12
    assert abs(np.vdot(kb.ks_prime, ks) - s) < 1e-12
    assert abs(np.vdot(kb.kl_prime, kl) - s) < 1e-12
    assert abs(np.vdot(kb.kl_prime, kb.ks_prime) + kb.chi) < 1e-12


def test_kaon_basis_matches_left_covectors(rng):
    for _ in range(50):
        s = eig_biorthogonal(complex_box(rng, (2, 2)))
        kb = kaon_reciprocal(s.right[:, 0], s.right[:, 1])
        np.testing.assert_allclose(s.left[0], kb.ks_prime.conj(), atol=1e-9)
        np.testing.assert_allclose(s.left[1], kb.kl_prime.conj(), atol=1e-9)
        np.testing.assert_allclose(s.overlaps, kb.norm_factor, atol=1e-9)
        for form in kb.unity_forms():
            assert np.max(np.abs(form - np.eye(2))) < 1e-10


@pytest.mark.parametrize(
    "h0, expected",
    [
        (np.diag([1.0, 3.0]), (1, 3)),
        ([[0, 1], [1, 0]], (-1, 1)),
        ([[0.5 - 0.1j, 0.1], [0.1, 0.5 - 0.1j]], (0.4 - 0.1j, 0.6 - 0.1j)),
    ],
)
def test_eigenvalues_2x2_examples(h0, expected):
    lam_s, lam_l = eigenvalues_2x2(h0)
    assert lam_s == pytest.approx(expected[0], abs=1e-15)
    assert lam_l == pytest.approx(expected[1], abs=1e-15)


def test_eigenvalues_2x2_degenerate():
    with pytest.raises(DegenerateSpectrum):
        eigenvalues_2x2(np.eye(2))


def test_eigenvalues_2x2_agree_with_eig(rng):
    for _ in range(500):
        h0 = complex_box(rng, (2, 2))
        got = sorted(eigenvalues_2x2(h0), key=lambda z: (z.real, z.imag))
        ref = eig_biorthogonal(h0).eigenvalues
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


def test_minus_branch_is_lambda_s():
    lam_s, lam_l = eigenvalues_2x2([[0, 1], [1, 0]])
    assert lam_s.real < lam_l.real


def test_expm_examples():
    np.testing.assert_allclose(expm(np.diag([1.0, 2.0]), np.pi), np.diag([-1, 1]), atol=1e-15)
    n = np.array([[0, 1], [0, 0]])
    np.testing.assert_allclose(expm(n, 1.0), np.eye(2) - 1j * n, atol=1e-16)


def test_expm_matches_eigendecomposition(rng):
    for _ in range(50):
        m = complex_box(rng, (2, 2))
        s = eig_biorthogonal(m)
        ref = s.apply(lambda lam: np.exp(-1j * 0.7 * lam))
        assert np.max(np.abs(expm(m, 0.7) - ref)) < 1e-10


def test_expm_group_law(rng):
    for _ in range(50):
        m = complex_box(rng, (3, 3))
        m *= 2.0 / np.linalg.norm(m, 2)
        t1, t2 = rng.uniform(-2.5, 2.5, 2)
        assert np.linalg.norm(expm(m, t1 + t2) - expm(m, t1) @ expm(m, t2), 2) < 1e-10


def test_expm_large_norm_accuracy(rng):
    # ||t m|| = 50 with a normal matrix, where the exact answer is known
    q, _ = np.linalg.qr(complex_box(rng, (4, 4)))
    lam = rng.uniform(-1, 1, 4) * 12.5 + 1j * rng.uniform(-0.1, 0, 4)
    m = q @ np.diag(lam) @ q.conj().T
    ref = q @ np.diag(np.exp(-4j * lam)) @ q.conj().T
    err = np.linalg.norm(expm(m, 4.0) - ref, 2) / np.linalg.norm(ref, 2)
    assert err < 1e-12
