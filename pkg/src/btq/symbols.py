"""Closed-form symbols with registered first derivatives.

A symbol is evaluated on arrays of coordinates ``(x, y)`` and returns either
an array of the broadcast shape (scalar symbols) or an array with two extra
trailing axes ``(..., r, r)`` (matrix symbols). Derivatives are registered by
hand; there is no automatic differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MissingDerivative(ValueError):
    pass


@dataclass(frozen=True)
class Symbol:
    name: str
    func: Fn
    dx: Optional[Fn] = None
    dy: Optional[Fn] = None
    rank: Optional[int] = None  # None for scalar symbols
    periodic: bool = False
    hermitian: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.func(x, y)

    @property
    def is_matrix(self) -> bool:
        return self.rank is not None

    def grad(self, x, y):
        if self.dx is None or self.dy is None:
            raise MissingDerivative(f"symbol {self.name!r} has no registered derivatives")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.dx(x, y), self.dy(x, y)

    @property
    def has_derivatives(self) -> bool:
        return self.dx is not None and self.dy is not None

    def conj(self) -> "Symbol":
        def f(x, y):
            v = self.func(x, y)
            return np.conj(np.swapaxes(v, -1, -2)) if self.is_matrix else np.conj(v)
        return Symbol(f"conj({self.name})", f, rank=self.rank, periodic=self.periodic)

    def __mul__(self, other: "Symbol | float") -> "Symbol":
        if not isinstance(other, Symbol):
            return scale(self, other)
        return product(self, other)

    def __rmul__(self, other: float) -> "Symbol":
        return scale(self, other)

    def __add__(self, other: "Symbol") -> "Symbol":
        return linear_combination([(1.0, self), (1.0, other)])

    def __sub__(self, other: "Symbol") -> "Symbol":
        return linear_combination([(1.0, self), (-1.0, other)])


def _mul_values(a, b, ra, rb):
    if ra is None or rb is None:
        if ra is not None:
            return a * b[..., None, None]
        if rb is not None:
            return a[..., None, None] * b
        return a * b
    return a @ b


def product(f: Symbol, g: Symbol) -> Symbol:
    """Pointwise (matrix) product ``fg`` with Leibniz-rule derivatives."""
    if f.rank is not None and g.rank is not None and f.rank != g.rank:
        raise ValueError(f"rank mismatch: {f.rank} vs {g.rank}")
    rank = f.rank if f.rank is not None else g.rank

    def func(x, y):
        return _mul_values(f(x, y), g(x, y), f.rank, g.rank)

    dx = dy = None
    if f.has_derivatives and g.has_derivatives:
        def dx(x, y):
            return (_mul_values(f.dx(x, y), g(x, y), f.rank, g.rank)
                    + _mul_values(f(x, y), g.dx(x, y), f.rank, g.rank))

        def dy(x, y):
            return (_mul_values(f.dy(x, y), g(x, y), f.rank, g.rank)
                    + _mul_values(f(x, y), g.dy(x, y), f.rank, g.rank))

    return Symbol(f"({f.name})*({g.name})", func, dx, dy, rank=rank,
                  periodic=f.periodic and g.periodic,
                  hermitian=(rank is None and f.hermitian and g.hermitian))


def scale(f: Symbol, c: complex) -> Symbol:
    dx = (lambda x, y: c * f.dx(x, y)) if f.dx is not None else None
    dy = (lambda x, y: c * f.dy(x, y)) if f.dy is not None else None
    return Symbol(f"{c!r}*({f.name})", lambda x, y: c * f(x, y), dx, dy,
                  rank=f.rank, periodic=f.periodic,
                  hermitian=f.hermitian and np.isreal(c))


def linear_combination(terms) -> Symbol:
    terms = [(c, s) for c, s in terms]
    ranks = {s.rank for _, s in terms}
    if len(ranks) != 1:
        raise ValueError("linear combination of symbols with different ranks")
    rank = ranks.pop()
    name = " + ".join(f"{c!r}*{s.name}" for c, s in terms)

    def func(x, y):
        return sum(c * s(x, y) for c, s in terms)

    dx = dy = None
    if all(s.has_derivatives for _, s in terms):
        def dx(x, y):
            return sum(c * s.dx(x, y) for c, s in terms)

        def dy(x, y):
            return sum(c * s.dy(x, y) for c, s in terms)

    return Symbol(name, func, dx, dy, rank=rank,
                  periodic=all(s.periodic for _, s in terms),
                  hermitian=all(s.hermitian and np.isreal(c) for c, s in terms))


def constant(c: float) -> Symbol:
    zero = lambda x, y: np.zeros(np.broadcast(x, y).shape)
    return Symbol(f"const({c!r})", lambda x, y: np.full(np.broadcast(x, y).shape, c),
                  zero, zero, periodic=True, hermitian=bool(np.isreal(c)))


# -- torus library: trigonometric monomials -------------------------------

def cos_x(k: int = 1) -> Symbol:
    w = TWO_PI * k
    return Symbol(f"cos(2pi*{k}x)", lambda x, y: np.cos(w * x) + 0.0 * y,
                  lambda x, y: -w * np.sin(w * x) + 0.0 * y,
                  lambda x, y: np.zeros(np.broadcast(x, y).shape), periodic=True)


def sin_x(k: int = 1) -> Symbol:
    w = TWO_PI * k
    return Symbol(f"sin(2pi*{k}x)", lambda x, y: np.sin(w * x) + 0.0 * y,
                  lambda x, y: w * np.cos(w * x) + 0.0 * y,
                  lambda x, y: np.zeros(np.broadcast(x, y).shape), periodic=True)


def cos_y(k: int = 1) -> Symbol:
    w = TWO_PI * k
    return Symbol(f"cos(2pi*{k}y)", lambda x, y: np.cos(w * y) + 0.0 * x,
                  lambda x, y: np.zeros(np.broadcast(x, y).shape),
                  lambda x, y: -w * np.sin(w * y) + 0.0 * x, periodic=True)


def sin_y(k: int = 1) -> Symbol:
    w = TWO_PI * k
    return Symbol(f"sin(2pi*{k}y)", lambda x, y: np.sin(w * y) + 0.0 * x,
                  lambda x, y: np.zeros(np.broadcast(x, y).shape),
                  lambda x, y: w * np.cos(w * y) + 0.0 * x, periodic=True)


# -- plane library: polynomials in z, zbar, |z|^2 and radial Gaussians -----

def coord_x() -> Symbol:
    return Symbol("x", lambda x, y: x + 0.0 * y,
                  lambda x, y: np.ones(np.broadcast(x, y).shape),
                  lambda x, y: np.zeros(np.broadcast(x, y).shape), meta={"fock": "x", "degree": 1})


def coord_y() -> Symbol:
    return Symbol("y", lambda x, y: y + 0.0 * x,
                  lambda x, y: np.zeros(np.broadcast(x, y).shape),
                  lambda x, y: np.ones(np.broadcast(x, y).shape), meta={"fock": "y", "degree": 1})


def z() -> Symbol:
    return Symbol("z", lambda x, y: x + 1j * y,
                  lambda x, y: np.ones(np.broadcast(x, y).shape, dtype=complex),
                  lambda x, y: np.full(np.broadcast(x, y).shape, 1j), hermitian=False,
                  meta={"fock": "z", "degree": 1})


def zbar() -> Symbol:
    return Symbol("zbar", lambda x, y: x - 1j * y,
                  lambda x, y: np.ones(np.broadcast(x, y).shape, dtype=complex),
                  lambda x, y: np.full(np.broadcast(x, y).shape, -1j), hermitian=False,
                  meta={"fock": "zbar", "degree": 1})


def absz2() -> Symbol:
    return Symbol("|z|^2", lambda x, y: x * x + y * y,
                  lambda x, y: 2 * x + 0.0 * y, lambda x, y: 2 * y + 0.0 * x,
                  meta={"fock": "absz2", "degree": 2})


def gauss(c: float) -> Symbol:
    def f(x, y):
        return np.exp(-c * (x * x + y * y))
    return Symbol(f"gauss({c!r})", f,
                  lambda x, y: -2 * c * x * f(x, y),
                  lambda x, y: -2 * c * y * f(x, y), meta={"fock": "gauss", "c": c, "degree": 0})


# -- matrix symbols --------------------------------------------------------

PAULI = {
    "1": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def matrix_symbol(terms, name: Optional[str] = None) -> Symbol:
    """Sum of scalar symbols times constant ``r x r`` coefficient matrices."""
    terms = [(s, np.asarray(c, dtype=complex)) for s, c in terms]
    r = terms[0][1].shape[0]
    name = name or " + ".join(f"{s.name}*M{k}" for k, (s, _) in enumerate(terms))

    def _sum(part):
        def fn(x, y):
            out = None
            for s, c in terms:
                v = np.asarray(getattr(s, part)(x, y) if part != "func" else s(x, y))
                t = v[..., None, None] * c
                out = t if out is None else out + t
            return out
        return fn

    herm = all(s.hermitian and np.allclose(c, c.conj().T) for s, c in terms)
    return Symbol(name, _sum("func"), _sum("dx"), _sum("dy"), rank=r,
                  periodic=all(s.periodic for s, _ in terms), hermitian=herm)


def sup_norm(f: Symbol, samples: int = 64, box: float = 1.0) -> float:
    """Sup of ``|f|`` (spectral norm for matrix symbols) on a sample grid over
    ``[0, box)^2``."""
    t = np.arange(samples) * (box / samples)
    X, Y = np.meshgrid(t, t, indexing="ij")
    v = f(X, Y)
    if f.is_matrix:
        return float(np.max(np.linalg.norm(v.reshape(-1, f.rank, f.rank), ord=2, axis=(1, 2))))
    return float(np.max(np.abs(v)))


def grad_sup_norm(f: Symbol, samples: int = 64, box: float = 1.0) -> float:
    t = np.arange(samples) * (box / samples)
    X, Y = np.meshgrid(t, t, indexing="ij")
    gx, gy = f.grad(X, Y)
    return float(np.max(np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2)))


_LIBRARY = {
    "one": lambda: constant(1.0),
    "cos_x": cos_x, "sin_x": sin_x, "cos_y": cos_y, "sin_y": sin_y,
    "x": coord_x, "y": coord_y, "z": z, "zbar": zbar, "absz2": absz2,
}


def from_name(text: str) -> Symbol:
    """Build a library symbol from a short text name.

    Accepted forms: ``one``, ``const:c``, ``cos_x``, ``cos_x:k`` (and the
    ``sin``/``y`` variants), ``x``, ``y``, ``z``, ``zbar``, ``absz2``,
    ``gauss:c``, ``mat_f`` and ``mat_g`` (the built-in rank-2 pair).
    """
    head, _, arg = text.strip().partition(":")
    if head == "const":
        return constant(float(arg))
    if head == "gauss":
        return gauss(float(arg))
    if head in ("mat_f", "mat_g"):
        return builtin_matrix_pair()[0 if head == "mat_f" else 1]
    if head in ("cos_x", "sin_x", "cos_y", "sin_y"):
        return _LIBRARY[head](int(arg) if arg else 1)
    if head in _LIBRARY and not arg:
        return _LIBRARY[head]()
    raise KeyError(f"unknown symbol {text!r}")


def builtin_matrix_pair() -> tuple[Symbol, Symbol]:
    """Two noncommuting Hermitian rank-2 trigonometric symbols."""
    f = matrix_symbol([(cos_x(), PAULI["x"]), (sin_y(), PAULI["z"])], name="mat_f")
    g = matrix_symbol([(cos_y(), PAULI["x"]), (sin_x(), PAULI["y"])], name="mat_g")
    return f, g
