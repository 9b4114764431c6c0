"""Kernel-level diagnostics for projectors and Toeplitz operators.

Kernel convention: a matrix ``A`` on grid functions represents the integral
kernel ``K(x_i, x_j) = A_ij / h^2`` with respect to the volume ``h^2``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigensolve import SpectralSubspace
from .lattice_bundle import LatticeBundle
from .model_geometry import geodesic_distance, mu0

TWO_PI = 2.0 * np.pi


class RadiusTooLarge(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class ModelKernelParams:
    a: tuple  # a_1..a_n, the eigenvalue pairs of |B_x0|

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if not all(v > 0 for v in self.a):
            raise ValueError("model kernel frequencies must be positive")

    @property
    def n(self) -> int:
        return len(self.a)


def model_kernel(params: ModelKernelParams, Z, Zp) -> np.ndarray:
    """Bergman kernel of the tangent space with frequencies ``a``.

    ``Z`` and ``Zp`` have last axis of length ``2n``; pairs of real
    coordinates form ``z_k = Z_{2k-1} + i Z_{2k}``.
    """
    Z = np.asarray(Z, dtype=float)
    Zp = np.asarray(Zp, dtype=float)
    a = np.asarray(params.a)
    z = Z[..., 0::2] + 1j * Z[..., 1::2]
    zp = Zp[..., 0::2] + 1j * Zp[..., 1::2]
    expo = -0.25 * np.sum(a * (np.abs(z) ** 2 + np.abs(zp) ** 2 - 2 * z * np.conj(zp)), axis=-1)
    return np.prod(a) / TWO_PI ** params.n * np.exp(expo)


@dataclass(eq=False)
class KernelField:
    """Kernel values ``K(Z_i, Z_j)`` at offsets around a base point, in the
    trivialization by radial parallel transport from ``x0``."""
    x0: np.ndarray
    offsets: np.ndarray  # (m, 2)
    values: np.ndarray  # (m, m) complex
    p: int
    h: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Z1", "Z2", "Z1p", "Z2p", "re", "im"])
            for i, Z in enumerate(self.offsets):
                for j, Zp in enumerate(self.offsets):
                    v = self.values[i, j]
                    w.writerow([repr(float(Z[0])), repr(float(Z[1])), repr(float(Zp[0])), repr(float(Zp[1])),
                                repr(float(v.real)), repr(float(v.imag))])


def _triangle_flux(bundle: LatticeBundle, x0: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Signed ``p int omega`` over the triangle (0,0), (Z1,0), (Z1,Z2) at ``x0``.

    Equals ``p (Z2/Z1) int_0^Z1 s B(x0_1 + s) ds`` since ``B`` depends only on x.
    """
    m, p = bundle.model, bundle.p
    c = x0[0]
    Z1, Z2 = Z[:, 0], Z[:, 1]
    w = TWO_PI
    # int_0^Z1 s cos(w(c+s)) ds
    with np.errstate(invalid="ignore", divide="ignore"):
        trig = ((Z1 * np.sin(w * (c + Z1)) / w) + (np.cos(w * (c + Z1)) - np.cos(w * c)) / w ** 2)
        moment = m.B0 * Z1 ** 2 / 2 + m.B1 * trig
        out = np.where(Z1 != 0, p * Z2 / Z1 * moment, 0.0)
    return out


def radial_transport(bundle: LatticeBundle, i0: int, j0: int, steps: np.ndarray) -> np.ndarray:
    """Phases ``W_Z`` mapping values at ``x0 + Z`` to the fiber at ``x0`` by
    radial parallel transport.

    Computed as transport along the grid path (horizontal, then vertical)
    times ``exp(i Phi)`` for the exactly integrated flux ``Phi`` between the
    grid path and the straight segment.
    """
    M = bundle.M
    tx, ty = bundle.theta_x, bundle.theta_y
    out = np.empty(len(steps))
    for k, (di, dj) in enumerate(steps):
        if di >= 0:
            ph = np.sum(tx[(i0 + np.arange(di)) % M, j0])
        else:
            ph = -np.sum(tx[(i0 - 1 - np.arange(-di)) % M, j0])
        i1 = (i0 + di) % M
        if dj >= 0:
            ph += np.sum(ty[i1, (j0 + np.arange(dj)) % M])
        else:
            ph -= np.sum(ty[i1, (j0 - 1 - np.arange(-dj)) % M])
        out[k] = ph
    x0 = np.array([i0, j0]) * bundle.h
    Z = steps * bundle.h
    return np.exp(1j * (out + _triangle_flux(bundle, x0, Z)))


def disk_steps(M: int, radius: float) -> np.ndarray:
    """Integer offsets ``(di, dj)`` with ``|(di, dj)| h <= radius``."""
    R = int(np.floor(radius * M + 1e-12))
    d = np.arange(-R, R + 1)
    DI, DJ = np.meshgrid(d, d, indexing="ij")
    keep = (DI ** 2 + DJ ** 2) <= (radius * M) ** 2 + 1e-9
    return np.stack([DI[keep], DJ[keep]], axis=-1)


def projector_kernel(S: SpectralSubspace, bundle: LatticeBundle, x0_index: int,
                     radius: float) -> KernelField:
    """Local projector kernel ``K(Z, Z') = sum_k psi_k(x0+Z) conj(psi_k(x0+Z'))``
    in the radial-transport trivialization at node ``x0_index`` (rank 1)."""
    if radius > 0.5:
        raise RadiusTooLarge(f"radius {radius} exceeds the injectivity scale 0.5")
    if bundle.r != 1:
        raise ValueError("kernel fields are extracted for rank-1 bundles")
    M = bundle.M
    i0, j0 = divmod(int(x0_index), M)
    steps = disk_steps(M, radius)
    nodes = ((i0 + steps[:, 0]) % M) * M + (j0 + steps[:, 1]) % M
    W = radial_transport(bundle, i0, j0, steps)
    psi = S.basis[nodes] * W[:, None]
    K = psi @ psi.conj().T
    return KernelField(np.array([i0, j0]) * bundle.h, steps * bundle.h, K, bundle.p, bundle.h,
                       meta={"convention": "K = A/h^2", "x0_index": int(x0_index)})


def full_kernel(S: SpectralSubspace, core: np.ndarray | None = None) -> np.ndarray:
    """Full-grid kernel ``V core V^*`` (``core = I`` gives the projector)."""
    V = S.basis
    return V @ V.conj().T if core is None else V @ core @ V.conj().T


def _eval_poly(table: dict, Z, Zp) -> np.ndarray:
    out = np.zeros(np.broadcast(Z[..., 0], Zp[..., 0]).shape, dtype=complex)
    for (a1, a2, b1, b2), c in table.items():
        out = out + c * Z[..., 0] ** a1 * Z[..., 1] ** a2 * Zp[..., 0] ** b1 * Zp[..., 1] ** b2
    return out


def expansion_residual(K: KernelField, Q: Sequence[dict], p: int, k: int, params: ModelKernelParams,
                       C0: float, M_growth: int = 4, diagonal_only: bool = False) -> float:
    """Weighted sup of ``|p^-n K - sum_r (Q_r P)(sqrt(p) Z, sqrt(p) Z') p^(-r/2)|``.

    ``Q[r]`` maps monomial exponents ``(a1, a2, b1, b2)`` of
    ``Z1^a1 Z2^a2 Z1'^b1 Z2'^b2`` to coefficients. The density ratio ``kappa``
    is identically 1 on the flat models. The weight is
    ``(1 + sqrt(p)|Z| + sqrt(p)|Z'|)^M_growth exp(-C0 sqrt(p) |Z - Z'|)``.
    """
    if len(Q) != k + 1:
        raise ValueError("need k+1 coefficient tables")
    Z = K.offsets
    if diagonal_only:
        A, B = Z, Z
        vals = np.diagonal(K.values)
    else:
        A, B = Z[:, None, :], Z[None, :, :]
        vals = K.values
    sp_ = np.sqrt(p)
    P = model_kernel(params, sp_ * A, sp_ * B)
    approx = sum(_eval_poly(Q[r], sp_ * A, sp_ * B) * P * p ** (-r / 2) for r in range(k + 1))
    n = params.n
    diff = np.abs(vals / p ** n - approx)
    nA = np.linalg.norm(A, axis=-1)
    nB = np.linalg.norm(B, axis=-1)
    weight = (1 + sp_ * nA + sp_ * nB) ** M_growth * np.exp(-C0 * sp_ * np.linalg.norm(A - B, axis=-1))
    return float(np.max(diff / weight))


def default_window(p: int, mu: float, cap: float = 0.25) -> float:
    """Sampling radius ``4 / sqrt(p mu0)``, capped so offsets stay unambiguous
    on the torus."""
    return min(4.0 / np.sqrt(p * mu), cap)


def decay_fit(K: np.ndarray, dist: np.ndarray, p: int, eps0: float, d_max: float | None = None,
              noise_floor: float = 1e-13, min_samples: int = 10):
    """Least-squares fit ``log|K| ~ log C - mu sqrt(p) d`` over pairs with ``d > eps0``.

    Returns ``(mu_hat, C_hat, r2)``; ``C_hat`` is the fitted intercept
    ``log C``.
    """
    K = np.abs(np.asarray(K))
    sel = (dist > eps0) & (K > noise_floor)
    if d_max is not None:
        sel &= dist <= d_max
    if np.count_nonzero(sel) < min_samples:
        raise InsufficientSamples(f"only {np.count_nonzero(sel)} pairs beyond eps0={eps0}")
    s = -np.sqrt(p) * dist[sel]
    y = np.log(K[sel])
    X = np.stack([s, np.ones_like(s)], axis=-1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    fit = X @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def distance_matrix(model, coords: np.ndarray) -> np.ndarray:
    return geodesic_distance(model, coords[:, None, :], coords[None, :, :])


def kernel_params_at(model, x0) -> ModelKernelParams:
    """Model-kernel frequencies at ``x0``: ``a_1 = |B(x0)|``."""
    return ModelKernelParams((float(abs(model.field(np.asarray(x0, dtype=float)))),))


__all__ = [
    "ModelKernelParams", "KernelField", "model_kernel", "projector_kernel", "expansion_residual",
    "decay_fit", "RadiusTooLarge", "InsufficientSamples", "radial_transport", "full_kernel",
    "default_window", "distance_matrix", "kernel_params_at", "mu0",
]
