import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from btq.eigensolve import dense_eig
from btq.lattice_bundle import (DimensionMismatch, ResolutionTooCoarse, SparseHermitian, build_links,
                                gauge_transform, grid_size, multiply, plaquette_fluxes,
                                plaquette_holonomy, renormalized_laplacian)
from btq.model_geometry import NonIntegralFlux, SymplecticModel, tau_grid

PI = np.pi


def wrapped(a):
    return np.angle(np.exp(1j * a))


def test_constant_field_flux_per_plaquette(torus1):
    b = build_links(torus1, 1, 16)
    assert np.allclose(b.plaquette_flux, 2 * PI / 256, atol=1e-15)


@pytest.mark.parametrize("model, p, M", [(SymplecticModel.torus(1), 1, 16),
                                         (SymplecticModel.torus(2, PI), 2, 32),
                                         (SymplecticModel.torus(3, 2.0), 5, 40)])
def test_holonomy_every_plaquette(model, p, M):
    b = build_links(model, p, M)
    hol = plaquette_holonomy(b.theta_x, b.theta_y)
    assert np.max(np.abs(np.exp(1j * hol) - np.exp(-1j * b.plaquette_flux))) < 1e-12


def test_total_flux_variable_field():
    b = build_links(SymplecticModel.torus(2, PI), 2, 32)
    assert abs(b.plaquette_flux.sum() - 2 * PI * 2 * 2) < 1e-10


def test_flux_matches_quadrature_of_field():
    model = SymplecticModel.torus(2, PI)
    M, p = 24, 3
    phi = plaquette_fluxes(model, p, M)
    for i in (0, 5, 17):
        x = np.linspace(i / M, (i + 1) / M, 2001)
        B = model.field(np.stack([x, np.zeros_like(x)], axis=-1))
        integral = np.trapezoid(B, x) / M
        assert abs(phi[i, 0] - p * integral) < 1e-8


def test_resolution_guard():
    with pytest.raises(ResolutionTooCoarse):
        build_links(SymplecticModel.torus(1), 16, 16)
    M = grid_size(SymplecticModel.torus(1), 16)
    assert M % 8 == 0
    assert np.max(plaquette_fluxes(SymplecticModel.torus(1), 16, M)) <= 0.2
    assert np.max(plaquette_fluxes(SymplecticModel.torus(1), 16, M - 8)) > 0.2


def test_nonintegral_flux_propagates():
    with pytest.raises(NonIntegralFlux):
        build_links(SymplecticModel(kind="torus2", B0=5.0), 1, 16)


def test_p0_graph_laplacian(torus1):
    A = renormalized_laplacian(build_links(torus1, 0, 8), renormalize=False)
    w, v = dense_eig(A)
    assert abs(w[0]) < 1e-10
    c = v[:, 0] / v[0, 0]
    assert np.allclose(c, 1.0, atol=1e-10)


def test_lowest_level_near_zero(torus1):
    from btq.eigensolve import lowest_cluster
    A = renormalized_laplacian(build_links(torus1, 8, 64))
    S = lowest_cluster(A, expected_dim=8, seed=1)
    assert -0.5 <= S.eigenvalues[0] <= 0.5


def test_gauge_invariance_of_spectrum(torus_var, rng):
    b = build_links(torus_var, 2, 16)
    chi = rng.uniform(0, 2 * PI, (16, 16))
    A = renormalized_laplacian(b)
    Ag = renormalized_laplacian(gauge_transform(b, chi))
    assert np.max(np.abs(dense_eig(A)[0] - dense_eig(Ag)[0])) < 1e-9
    D = sp.diags(np.exp(1j * chi.ravel()))
    conj = (D.getH() @ A.matrix @ D).toarray()
    assert np.max(np.abs(conj - Ag.to_dense())) < 1e-12 * np.max(np.abs(conj))


def test_gauge_transform_keeps_holonomy(torus1, rng):
    b = build_links(torus1, 3, 16)
    g = gauge_transform(b, rng.uniform(-5, 5, (16, 16)))
    diff = wrapped(plaquette_holonomy(b.theta_x, b.theta_y) - plaquette_holonomy(g.theta_x, g.theta_y))
    assert np.max(np.abs(diff)) < 1e-12


def test_stencil_structure(torus_var):
    A = renormalized_laplacian(build_links(torus_var, 2, 16))
    counts = np.diff(A.matrix.indptr)
    assert np.all(counts == 5)
    assert (A.matrix - A.matrix.getH()).count_nonzero() == 0


@pytest.mark.parametrize("p", [1, 3])
def test_spectral_floor(torus_var, p):
    b = build_links(torus_var, p, 16)
    A = renormalized_laplacian(b)
    floor = -p * np.max(tau_grid(torus_var, b.coords()))
    assert dense_eig(A)[0][0] >= floor - 1e-9
    # Gershgorin: the hopping part is positive semidefinite
    M = A.to_dense()
    radii = np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    assert np.min(np.diag(M).real + radii) >= floor - 1e-9


def test_rank_r_is_block_replication(torus1):
    b1 = build_links(torus1, 2, 8)
    b3 = build_links(torus1, 2, 8, r=3)
    A1 = renormalized_laplacian(b1).to_dense()
    A3 = renormalized_laplacian(b3).to_dense()
    for a in range(3):
        for c in range(3):
            block = A3[a::3, c::3]
            assert np.array_equal(block, A1 if a == c else np.zeros_like(A1))


def test_multiply_diagonal_only():
    A = SparseHermitian(sp.diags([1.0, 2.0, -3.0]).astype(complex).tocsr())
    u = np.array([1.0, 1j, 2.0])
    assert np.array_equal(multiply(A, u), np.array([1.0, 2j, -6.0]))


def test_multiply_hermitian_pairs(torus_var, rng):
    A = renormalized_laplacian(build_links(torus_var, 2, 16))
    for _ in range(10):
        u = rng.standard_normal(A.n) + 1j * rng.standard_normal(A.n)
        v = rng.standard_normal(A.n) + 1j * rng.standard_normal(A.n)
        lhs, rhs = np.vdot(v, A @ u), np.vdot(A @ v, u)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_multiply_matches_dense(torus1, rng):
    A = renormalized_laplacian(build_links(torus1, 1, 8))
    u = rng.standard_normal((A.n, 3)) + 1j * rng.standard_normal((A.n, 3))
    ref = A.to_dense() @ u
    assert np.max(np.abs(multiply(A, u) - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_multiply_dimension_mismatch(torus1):
    A = renormalized_laplacian(build_links(torus1, 1, 8))
    with pytest.raises(DimensionMismatch):
        multiply(A, np.ones(A.n + 1))


def test_dump_round_trip(tmp_path, torus_var):
    A = renormalized_laplacian(build_links(torus_var, 2, 16))
    path = tmp_path / "lap.txt"
    A.dump(path)
    head = path.read_text().splitlines()[0].split()
    assert head == [str(A.n), str(A.nnz)]
    B = SparseHermitian.load(path, A.weight)
    assert (A.matrix != B.matrix).nnz == 0


@settings(max_examples=10)
@given(N=st.integers(1, 3), B1=st.floats(0.0, 1.0), p=st.integers(1, 4))
def test_flux_quantization_property(N, B1, p):
    model = SymplecticModel.torus(N, B1 * 2 * PI * N * 0.9)
    M = grid_size(model, p)
    b = build_links(model, p, M)
    assert abs(b.plaquette_flux.sum() - 2 * PI * p * N) < 1e-10
    assert np.max(np.abs(b.plaquette_flux)) <= 0.2
    hol = plaquette_holonomy(b.theta_x, b.theta_y)
    assert np.max(np.abs(wrapped(hol + b.plaquette_flux))) < 1e-10
