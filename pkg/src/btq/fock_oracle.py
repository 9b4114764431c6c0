"""Exact Segal-Bargmann computations on the plane.

Convention: ``omega = B0 dx ^ dy`` and ``L^p`` is realized on holomorphic
functions with weight ``exp(-p B0 |z|^2 / 2)``. The basis
``e_k = z^k / sqrt(n_k)`` with ``n_k = pi k! (2/(p B0))^(k+1)`` is orthonormal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .symbols import Symbol


class QuadratureNotConverged(RuntimeError):
    pass


class TruncationInsufficient(ValueError):
    pass


class AmbiguousSign(RuntimeError):
    pass


@dataclass(frozen=True)
class FockTruncation:
    p: int
    B0: float
    K_max: int

    def __post_init__(self):
        if self.p < 1 or self.B0 <= 0 or self.K_max < 1:
            raise ValueError("need p >= 1, B0 > 0, K_max >= 1")

    @property
    def size(self) -> int:
        return self.K_max + 1

    @property
    def scale(self) -> float:
        """``p B0``, the inverse squared magnetic length."""
        return self.p * self.B0

    def require_degree(self, degree: int) -> None:
        if degree > 0 and self.K_max < 8 * degree:
            raise ValueError(f"K_max={self.K_max} below truncation guard 8*{degree}")

    def log_norms(self) -> np.ndarray:
        k = np.arange(self.size)
        return math.log(math.pi) + gammaln(k + 1) + (k + 1) * math.log(2.0 / self.scale)


def _raising(t: FockTruncation) -> np.ndarray:
    k = np.arange(t.K_max)
    T = np.zeros((t.size, t.size), dtype=complex)
    T[k + 1, k] = np.sqrt(2.0 * (k + 1) / t.scale)
    return T


def fock_toeplitz_exact(t: FockTruncation, sym: str, c: float = 0.0) -> np.ndarray:
    """Closed-form Toeplitz matrices ``T[l, k] = <f e_k, e_l>``.

    ``sym`` is one of ``one, z, zbar, absz2, x, y, gauss`` (``gauss`` uses the
    decay rate ``c`` of ``exp(-c |z|^2)``).
    """
    k = np.arange(t.size)
    if sym == "one":
        return np.eye(t.size, dtype=complex)
    if sym == "z":
        return _raising(t)
    if sym == "zbar":
        return _raising(t).conj().T
    if sym == "absz2":
        return np.diag(2.0 * (k + 1) / t.scale).astype(complex)
    if sym == "x":
        Z = _raising(t)
        return 0.5 * (Z + Z.conj().T)
    if sym == "y":
        Z = _raising(t)
        return (Z - Z.conj().T) / 2j
    if sym == "gauss":
        return np.diag((t.scale / (t.scale + 2.0 * c)) ** (k + 1)).astype(complex)
    raise KeyError(f"no closed form for {sym!r}")


SYMBOL_DEGREE = {"one": 0, "z": 1, "zbar": 1, "x": 1, "y": 1, "absz2": 2, "gauss": 0}


def _quadrature(t: FockTruncation, f: Symbol, n_r: int, n_theta: int) -> np.ndarray:
    # z = r e^{i th}, s = p B0 r^2 / 2:
    # T[l,k] = (1/2pi) int dth int ds e^{-s} f s^{(k+l)/2} e^{i(k-l)th} / sqrt(k! l!)
    s, w = np.polynomial.laguerre.laggauss(n_r)
    keep = w > 0
    s, w = s[keep], w[keep]
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    r = np.sqrt(2.0 * s / t.scale)
    F = np.asarray(f(r[:, None] * np.cos(th), r[:, None] * np.sin(th)), dtype=complex)
    K = t.K_max
    k = np.arange(K + 1)
    # A[i, k] = sqrt(w_i) s_i^{k/2} / sqrt(k!)
    A = np.exp(0.5 * np.log(w)[:, None] + 0.5 * np.log(s)[:, None] * k - 0.5 * gammaln(k + 1))
    m = np.arange(-K, K + 1)
    C = F @ np.exp(1j * np.outer(th, m)) / n_theta  # angular Fourier coefficients
    T = np.empty((K + 1, K + 1), dtype=complex)
    for l in range(K + 1):
        T[l] = np.sum(A[:, l][:, None] * A * C[:, k - l + K], axis=0)
    return T


def fock_toeplitz_quadrature(t: FockTruncation, f: Symbol, n_r: int | None = None,
                             n_theta: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Toeplitz matrix of a general symbol by Gauss-Laguerre x uniform angular
    quadrature, checked against the next quadrature order."""
    n_r = n_r or t.K_max + 40
    n_theta = n_theta or 2 * t.K_max + 24
    T1 = _quadrature(t, f, n_r, n_theta)
    T2 = _quadrature(t, f, n_r + 40, n_theta + 16)
    err = float(np.max(np.abs(T1 - T2)))
    if err > tol:
        raise QuadratureNotConverged(f"successive quadrature orders differ by {err:.3g}")
    return T2


def fock_bergman_kernel(t: FockTruncation, z, zp, tol: float = 1e-12):
    """Closed-form and truncated-series Bergman kernels (unitary trivialization).

    Returns ``(closed, series)``; both equal
    ``(p B0 / 2 pi) exp(p B0 (z zbar' / 2 - |z|^2/4 - |z'|^2/4))`` up to truncation.
    """
    z = np.asarray(z, dtype=complex)
    zp = np.asarray(zp, dtype=complex)
    a = t.scale
    gauss = np.exp(-a * (np.abs(z) ** 2 + np.abs(zp) ** 2) / 4)
    closed = (a / (2 * np.pi)) * np.exp(a * z * np.conj(zp) / 2) * gauss
    # tail bound of sum_{k > K} x^k / k! with x = a |z||z'| / 2
    x = float(np.max(a * np.abs(z) * np.abs(zp) / 2, initial=0.0))
    K = t.K_max
    if x > 0:
        ratio = x / (K + 2)
        if ratio >= 1:
            raise TruncationInsufficient(f"K_max={K} too small for |z||z'| scale {x:.3g}")
        log_tail = (K + 1) * math.log(x) - math.lgamma(K + 2) - math.log1p(-ratio)
        g = float(np.max(np.exp(-a * (np.abs(z) ** 2 + np.abs(zp) ** 2) / 4 + x)))
        bound = (a / (2 * np.pi)) * math.exp(log_tail) * g
        if bound > tol:
            raise TruncationInsufficient(f"series tail bound {bound:.3g} exceeds {tol}")
    k = np.arange(K + 1)
    w = z[..., None] * np.conj(zp)[..., None] * (a / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.exp(k * np.log(w + (w == 0)) - gammaln(k + 1))
    terms = np.where(w == 0, (k == 0).astype(float), terms)
    series = (a / (2 * np.pi)) * np.sum(terms, axis=-1) * gauss
    return closed, series


def calibrate_poisson_sign(t: FockTruncation) -> int:
    """Sign ``s`` such that ``[T_x, T_y] = i p^-1 T_{s/B0}`` on interior indices."""
    if t.K_max < 16:
        raise ValueError("calibration needs K_max >= 16")
    Tx = fock_toeplitz_exact(t, "x")
    Ty = fock_toeplitz_exact(t, "y")
    C = (Tx @ Ty - Ty @ Tx)[: t.K_max, : t.K_max]
    I = np.eye(t.K_max)
    defects = {s: float(np.linalg.norm(C - 1j / t.p * (s / t.B0) * I, 2)) for s in (1, -1)}
    lo, hi = sorted(defects.values())
    if hi < 2 * lo:
        raise AmbiguousSign(f"commutator defects {defects} do not separate the signs")
    return min(defects, key=defects.get)


def interior(T: np.ndarray, degree: int) -> np.ndarray:
    """Drop the last ``degree`` indices, where truncation edge effects live."""
    m = T.shape[0] - degree
    return T[:m, :m]
