"""Model symplectic surfaces: a flat 2-torus and the Bargmann-Fock plane.

Both carry the flat metric ``dx^2 + dy^2`` and the symplectic form
``omega = B(x) dx ^ dy``. On the torus ``B(x) = B0 + B1 cos(2 pi x)`` on
``[0, 1)^2``; on the plane ``B`` is the constant ``B0``.

Orientation convention: ``omega_x(u, v) = <B_x u, v>`` gives
``B_x = [[0, -B], [B, 0]]``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .symbols import Symbol

TWO_PI = 2.0 * np.pi


class NonIntegralFlux(ValueError):
    pass


class Kind(str, Enum):
    TORUS2 = "torus2"
    FOCK_PLANE = "fock_plane"


@dataclass(frozen=True)
class SymplecticModel:
    kind: Kind
    B0: float
    B1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.B0 > 0:
            raise ValueError("B0 must be positive")
        if self.B1 < 0 or self.B1 >= self.B0:
            raise ValueError("need 0 <= B1 < B0 (uniform non-degeneracy)")
        if self.kind is Kind.FOCK_PLANE and self.B1 != 0:
            raise ValueError("the plane model carries a constant field")

    @classmethod
    def torus(cls, N: int = 1, B1: float = 0.0) -> "SymplecticModel":
        return cls(Kind.TORUS2, TWO_PI * N, B1)

    @classmethod
    def plane(cls, B0: float = 1.0) -> "SymplecticModel":
        return cls(Kind.FOCK_PLANE, B0)

    @property
    def is_torus(self) -> bool:
        return self.kind is Kind.TORUS2

    @property
    def N(self) -> int:
        return check_quantizable(self)

    def field(self, x):
        """Magnetic coefficient ``B`` at points ``x`` (last axis = (x, y))."""
        x = np.asarray(x, dtype=float)
        if self.is_torus:
            return self.B0 + self.B1 * np.cos(TWO_PI * x[..., 0])
        return np.full(x.shape[:-1], self.B0)

    def column_flux(self, s):
        """Antiderivative ``F(s) = int_0^s B(t) dt`` of the torus field."""
        s = np.asarray(s, dtype=float)
        return self.B0 * s + self.B1 * np.sin(TWO_PI * s) / TWO_PI

    def max_field(self) -> float:
        return self.B0 + self.B1

    def params(self) -> dict:
        return {"kind": self.kind.value, "B0": repr(float(self.B0)), "B1": repr(float(self.B1))}

    def hash(self) -> str:
        text = ";".join(f"{k}={v}" for k, v in sorted(self.params().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def skew_operator(model: SymplecticModel, x) -> np.ndarray:
    b = float(model.field(np.asarray(x, dtype=float)))
    return np.array([[0.0, -b], [b, 0.0]])


def tau(model: SymplecticModel, x) -> float:
    """Half the trace of ``(B_x^* B_x)^{1/2}``, from the singular values."""
    s = np.linalg.svd(skew_operator(model, x), compute_uv=False)
    return 0.5 * float(np.sum(s))


def tau_grid(model: SymplecticModel, points) -> np.ndarray:
    """Vectorized ``tau``; equals ``|B(x)|`` in two dimensions."""
    return np.abs(model.field(points))


def mu0(model: SymplecticModel) -> float:
    """Infimum over the surface of the smallest singular value of ``B_x``."""
    return float(model.B0 - model.B1)


def check_quantizable(model: SymplecticModel, tol: float = 1e-12) -> int:
    if not model.is_torus:
        raise ValueError("flux quantization applies to the torus model")
    n = model.B0 / TWO_PI  # the cosine modulation integrates to zero
    N = int(round(n))
    if N < 1 or abs(n - N) > tol:
        raise NonIntegralFlux(f"total flux B0/(2pi) = {n!r} is not a positive integer")
    return N


# -- Poisson bracket ---------------------------------------------------------

_POISSON_SIGN: int | None = None


def set_poisson_sign(sign: int | None) -> None:
    global _POISSON_SIGN
    if sign not in (None, 1, -1):
        raise ValueError("sign must be +1 or -1")
    _POISSON_SIGN = sign


def poisson_sign() -> int:
    """Global bracket sign, calibrated once against the Fock oracle."""
    global _POISSON_SIGN
    if _POISSON_SIGN is None:
        from .fock_oracle import FockTruncation, calibrate_poisson_sign
        _POISSON_SIGN = calibrate_poisson_sign(FockTruncation(p=1, B0=1.0, K_max=32))
    return _POISSON_SIGN


def poisson_bracket(model: SymplecticModel, f: Symbol, g: Symbol, x, sign: int | None = None):
    """``{f, g} = sign * (f_x g_y - f_y g_x) / B`` at points ``x``.

    With the calibrated sign (-1) this coincides with
    ``sum_ij (omega^{-1})^{ij} d_i f d_j g`` for the matrix ``omega_ij = omega(e_i, e_j)``.
    """
    if f.is_matrix or g.is_matrix:
        raise ValueError("the Poisson bracket is defined for scalar symbols")
    x = np.asarray(x, dtype=float)
    fx, fy = f.grad(x[..., 0], x[..., 1])
    gx, gy = g.grad(x[..., 0], x[..., 1])
    s = poisson_sign() if sign is None else sign
    return s * (fx * gy - fy * gx) / model.field(x)


def bracket_symbol(model: SymplecticModel, f: Symbol, g: Symbol) -> Symbol:
    """The bracket ``{f, g}`` packaged as a (derivative-free) symbol."""
    if not (f.has_derivatives and g.has_derivatives):
        from .symbols import MissingDerivative
        raise MissingDerivative("bracket needs registered derivatives")
    s = poisson_sign()

    def fn(x, y):
        return poisson_bracket(model, f, g, np.stack(np.broadcast_arrays(x, y), axis=-1), sign=s)

    return Symbol(f"{{{f.name},{g.name}}}", fn, periodic=f.periodic and g.periodic)


# -- distance ----------------------------------------------------------------

def geodesic_distance(model: SymplecticModel, x, xp):
    """Flat geodesic distance; on the torus the minimum over lattice translates."""
    d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
    if model.is_torus:
        d = d - np.round(d)  # nearest of the 9 translates for points in [0,1)^2
    return np.sqrt(np.sum(d * d, axis=-1))


def periodic_offset(model: SymplecticModel, x, xp):
    """Displacement ``x - xp`` reduced to the nearest translate."""
    d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
    return d - np.round(d) if model.is_torus else d
