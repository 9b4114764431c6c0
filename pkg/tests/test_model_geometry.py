import numpy as np
import pytest
from hypothesis import given, strategies as st

from btq import symbols as sy
from btq.model_geometry import (NonIntegralFlux, SymplecticModel, bracket_symbol, check_quantizable,
                                geodesic_distance, mu0, poisson_bracket, poisson_sign, skew_operator,
                                tau, tau_grid)
from oracles import finite_difference_grad

PI = np.pi
unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)
points = st.tuples(unit, unit)


def test_skew_operator_constant_field():
    B = skew_operator(SymplecticModel.torus(1), (0.3, 0.7))
    assert np.allclose(B, [[0, -2 * PI], [2 * PI, 0]])


def test_skew_operator_variable_field_at_origin():
    B = skew_operator(SymplecticModel.torus(2, PI), (0.0, 0.0))
    assert np.allclose(B, [[0, -5 * PI], [5 * PI, 0]])


@given(x=points)
def test_skew_operator_is_skew(x):
    B = skew_operator(SymplecticModel.torus(2, PI), x)
    assert np.array_equal(B + B.T, np.zeros((2, 2)))


def test_tau_values():
    assert tau(SymplecticModel.torus(1), (0.2, 0.9)) == pytest.approx(2 * PI, abs=1e-12)
    assert tau(SymplecticModel.torus(2, PI), (0.5, 0.1)) == pytest.approx(3 * PI, abs=1e-12)


def test_tau_matches_eigenvalue_path(rng):
    model = SymplecticModel.torus(2, PI)
    for x in rng.random((100, 2)):
        B = skew_operator(model, x)
        via_eig = 0.5 * np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(B.T @ B), 0, None)))
        assert abs(tau(model, x) - via_eig) < 1e-12
        assert abs(tau_grid(model, x) - via_eig) < 1e-12


def test_mu0_values():
    assert mu0(SymplecticModel.torus(1)) == pytest.approx(2 * PI)
    assert mu0(SymplecticModel.torus(2, PI)) == pytest.approx(3 * PI)


def test_mu0_grid_minimization_oracle():
    model = SymplecticModel.torus(2, PI)
    xs = np.linspace(0, 1, 1000, endpoint=False)  # contains 0.5
    smallest = min(np.linalg.svd(skew_operator(model, (x, 0.0)), compute_uv=False).min() for x in xs)
    assert mu0(model) <= smallest + 1e-12
    assert abs(mu0(model) - smallest) < 1e-9


@given(x=points)
def test_tau_bounded_below_by_mu0(x):
    model = SymplecticModel.torus(2, PI)
    assert tau(model, x) >= mu0(model) - 1e-12


def test_poisson_sign_is_calibrated_once():
    assert poisson_sign() == -1


def test_bracket_of_canonical_pair():
    model = SymplecticModel.plane(2.0)
    pts = np.random.default_rng(0).standard_normal((20, 2))
    vals = poisson_bracket(model, sy.coord_x(), sy.coord_y(), pts)
    assert np.allclose(np.abs(vals), 0.5)
    assert np.allclose(vals, poisson_sign() / 2.0)


@given(x=points)
def test_bracket_antisymmetric(x):
    model = SymplecticModel.torus(2, PI)
    f, g = sy.cos_x(1), sy.sin_y(2)
    x = np.array(x)
    assert poisson_bracket(model, f, f, x) == 0
    assert np.isclose(poisson_bracket(model, f, g, x), -poisson_bracket(model, g, f, x))


def test_bracket_matches_finite_differences():
    model = SymplecticModel.torus(1)
    f, g = sy.cos_x(1), sy.cos_y(1)
    x = np.array([0.25, 0.25])
    fx, fy = finite_difference_grad(f, 0.25, 0.25)
    gx, gy = finite_difference_grad(g, 0.25, 0.25)
    oracle = poisson_sign() * (fx * gy - fy * gx) / (2 * PI)
    assert abs(poisson_bracket(model, f, g, x) - oracle) < 1e-8


@given(x=points)
def test_bracket_leibniz(x):
    model = SymplecticModel.torus(2, PI)
    f, g, h = sy.cos_x(1), sy.sin_y(1), sy.cos_y(2)
    x = np.array(x)
    lhs = poisson_bracket(model, f, sy.product(g, h), x)
    rhs = poisson_bracket(model, f, g, x) * h(*x) + g(*x) * poisson_bracket(model, f, h, x)
    assert abs(lhs - rhs) < 1e-8


@given(x=points, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_bracket_bilinear(x, a, b):
    model = SymplecticModel.torus(1)
    f, g, h = sy.cos_x(1), sy.sin_y(1), sy.sin_x(2)
    x = np.array(x)
    lhs = poisson_bracket(model, sy.linear_combination([(a, f), (b, h)]), g, x)
    rhs = a * poisson_bracket(model, f, g, x) + b * poisson_bracket(model, h, g, x)
    assert abs(lhs - rhs) < 1e-9


def test_bracket_rejects_underived_symbols():
    bare = sy.Symbol("bare", lambda x, y: x)
    with pytest.raises(sy.MissingDerivative):
        poisson_bracket(SymplecticModel.torus(1), bare, sy.cos_x(1), np.zeros(2))
    with pytest.raises(sy.MissingDerivative):
        bracket_symbol(SymplecticModel.torus(1), bare, sy.cos_x(1))


def test_check_quantizable():
    assert check_quantizable(SymplecticModel(kind="torus2", B0=2 * PI)) == 1
    assert check_quantizable(SymplecticModel(kind="torus2", B0=6 * PI)) == 3
    with pytest.raises(NonIntegralFlux):
        check_quantizable(SymplecticModel(kind="torus2", B0=5.0))


def test_model_validation():
    with pytest.raises(ValueError):
        SymplecticModel.torus(1, B1=7.0)
    with pytest.raises(ValueError):
        SymplecticModel(kind="fock_plane", B0=1.0, B1=0.5)


def test_model_hash_stable_and_distinct():
    assert SymplecticModel.torus(1).hash() == SymplecticModel.torus(1).hash()
    assert SymplecticModel.torus(1).hash() != SymplecticModel.torus(2).hash()


def test_geodesic_wraparound():
    m = SymplecticModel.torus(1)
    assert geodesic_distance(m, (0.1, 0.1), (0.9, 0.1)) == pytest.approx(0.2)
    assert geodesic_distance(SymplecticModel.plane(1.0), (0.1, 0.1), (0.9, 0.1)) == pytest.approx(0.8)


@given(a=points, b=points)
def test_geodesic_metric_axioms(a, b):
    m = SymplecticModel.torus(1)
    assert geodesic_distance(m, a, a) == 0
    assert geodesic_distance(m, a, b) == geodesic_distance(m, b, a)
    assert geodesic_distance(m, a, b) <= np.sqrt(2) / 2 + 1e-15


def test_geodesic_matches_nine_translates_and_triangle(rng):
    m = SymplecticModel.torus(1)
    P = rng.random((1000, 3, 2))
    shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)])
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    brute = np.min(np.linalg.norm(a[:, None] - b[:, None] - shifts[None], axis=-1), axis=1)
    assert np.allclose(geodesic_distance(m, a, b), brute, atol=1e-15)
    dab, dbc, dac = geodesic_distance(m, a, b), geodesic_distance(m, b, c), geodesic_distance(m, a, c)
    assert np.all(dac <= dab + dbc + 1e-12)
