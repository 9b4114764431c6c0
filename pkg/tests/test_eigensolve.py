import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from btq.eigensolve import (NoGapDetected, NotConverged, SpectralSubspace, TooLarge, apply_projector,
                            block_lanczos, config_seed, dense_eig, locate_gap, lowest_cluster,
                            principal_angles)
from btq.lattice_bundle import DimensionMismatch, SparseHermitian, build_links, renormalized_laplacian
from btq.model_geometry import SymplecticModel
from oracles import diag_sparse


@pytest.fixture(scope="module")
def lap_p2():
    return renormalized_laplacian(build_links(SymplecticModel.torus(1), 2, 16))


@pytest.fixture(scope="module")
def cluster_p2(lap_p2):
    return lowest_cluster(lap_p2, expected_dim=2, seed=3)


def random_hermitian(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X + X.conj().T


def test_synthetic_cluster():
    S = lowest_cluster(diag_sparse([0.0, 0.1, 50.0, 51.0]), method="dense")
    assert S.dim == 2
    assert S.gap_edge == 50.0
    assert S.eigenvalues[-1] <= S.window < S.gap_edge


def test_synthetic_cluster_lanczos():
    vals = np.concatenate([[0.0, 0.1], np.linspace(50, 80, 60)])
    S = lowest_cluster(diag_sparse(vals), expected_dim=2, seed=0)
    assert S.dim == 2
    assert S.gap_edge == pytest.approx(50.0, abs=1e-8)


def test_landau_degeneracy_p8():
    A = renormalized_laplacian(build_links(SymplecticModel.torus(1), 8, 64))
    S = lowest_cluster(A, expected_dim=8, seed=11)
    assert S.dim == 8
    assert np.all(S.residuals <= 1e-8 * (1 + np.abs(S.eigenvalues)))
    assert np.allclose(S.gram(), np.eye(8), atol=1e-10)


def test_lanczos_matches_dense(lap_p2, cluster_p2):
    D = lowest_cluster(lap_p2, method="dense")
    assert D.dim == cluster_p2.dim == 2
    assert np.max(np.abs(D.eigenvalues - cluster_p2.eigenvalues)) < 1e-8
    assert np.max(principal_angles(D, cluster_p2)) < 1e-7


def test_dense_eig_2x2():
    w, _ = dense_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(w, [-1.0, 1.0])


def test_dense_eig_reconstruction(rng):
    A = random_hermitian(rng, 50)
    w, V = dense_eig(A)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(V @ np.diag(w) @ V.conj().T - A)) < 1e-10


def test_dense_eig_trace(rng):
    for _ in range(20):
        A = random_hermitian(rng, int(rng.integers(2, 40)))
        assert abs(np.trace(A).real - dense_eig(A)[0].sum()) < 1e-10


def test_dense_eig_cap():
    with pytest.raises(TooLarge):
        dense_eig(SparseHermitian(sp.identity(4097, dtype=complex, format="csr")))


def test_projector_on_span_and_complement(cluster_p2, rng):
    V = cluster_p2.basis
    u = V @ (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    assert np.linalg.norm(apply_projector(cluster_p2, u) - u) < 1e-10 * np.linalg.norm(u)
    w = rng.standard_normal(V.shape[0]) + 0j
    w -= apply_projector(cluster_p2, w)
    assert np.linalg.norm(apply_projector(cluster_p2, w)) < 1e-10 * np.linalg.norm(w)


def test_projector_properties(cluster_p2, rng):
    S = cluster_p2
    h2 = S.weight
    for _ in range(100):
        u = rng.standard_normal(S.n) + 1j * rng.standard_normal(S.n)
        v = rng.standard_normal(S.n) + 1j * rng.standard_normal(S.n)
        Pu = apply_projector(S, u)
        assert np.linalg.norm(Pu) <= np.linalg.norm(u) * (1 + 1e-12)
        assert np.linalg.norm(apply_projector(S, Pu) - Pu) <= 1e-9 * np.linalg.norm(u)
        lhs = h2 * np.vdot(v, Pu)
        rhs = h2 * np.vdot(apply_projector(S, v), u)
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v) * h2


def test_projector_dimension_mismatch(cluster_p2):
    with pytest.raises(DimensionMismatch):
        apply_projector(cluster_p2, np.ones(cluster_p2.n + 3))


def test_window_widening_keeps_subspace(lap_p2, cluster_p2):
    wide = 0.5 * (cluster_p2.window + cluster_p2.gap_edge)
    S = lowest_cluster(lap_p2, expected_dim=2, C_L=wide, seed=3)
    assert S.dim == cluster_p2.dim
    assert np.max(principal_angles(S, cluster_p2)) <= 1e-8


def test_same_seed_bitwise_identical(lap_p2):
    a = lowest_cluster(lap_p2, expected_dim=2, seed=42)
    b = lowest_cluster(lap_p2, expected_dim=2, seed=42)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.digest() == b.digest()


def test_no_gap_detected():
    with pytest.raises(NoGapDetected):
        lowest_cluster(diag_sparse(np.linspace(0, 1, 30)), method="dense")
    with pytest.raises(NoGapDetected):
        locate_gap(np.array([1.0]))


def test_not_converged_reports_history(rng):
    A = SparseHermitian(sp.csr_matrix(random_hermitian(rng, 300)))
    with pytest.raises(NotConverged) as exc:
        block_lanczos(A, 20, tol=1e-14, max_basis=40, max_restarts=2)
    assert exc.value.diagnostics["history"]


def test_config_seed_stable():
    assert config_seed("a", 1) == config_seed("a", 1)
    assert config_seed("a", 1) != config_seed("a", 2)
    assert 0 <= config_seed(0) < 2 ** 63


@settings(max_examples=25)
@given(d=st.integers(1, 6), gap=st.floats(20.0, 1e3), width=st.floats(0.0, 1.0))
def test_locate_gap_on_synthetic_clusters(d, gap, width):
    low = np.linspace(0.0, width, d)
    high = gap + np.linspace(0.0, 3.0, 10)
    assert locate_gap(np.concatenate([low, high])) == d


def test_subspace_invariants(cluster_p2):
    S = cluster_p2
    assert isinstance(S, SpectralSubspace)
    assert np.allclose(S.gram(), np.eye(S.dim), atol=1e-10)
    assert np.all(np.diff(S.eigenvalues) >= 0)
    assert S.eigenvalues[-1] <= S.window < S.gap_edge
