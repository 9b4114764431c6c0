"""U(1) lattice discretization of ``L^p (x) E`` on the torus.

Nodes sit at ``(i/M, j/M)``; node ``(i, j)`` has flat index ``i*M + j`` and
component ``a`` of the rank-``r`` auxiliary bundle sits at ``r*node + a``.
A link phase ``theta`` on the edge ``v -> w`` is the transport
``U = exp(i theta)`` of values at ``w`` back to ``v``; the counter-clockwise
plaquette holonomy is ``exp(-i phi)`` with ``phi = p * int_plaquette omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model_geometry import SymplecticModel, check_quantizable, tau_grid

PHI_MAX = 0.2


class ResolutionTooCoarse(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatticeBundle:
    model: SymplecticModel
    M: int
    p: int
    r: int
    theta_x: np.ndarray
    theta_y: np.ndarray
    plaquette_flux: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def n_nodes(self) -> int:
        return self.M * self.M

    @property
    def n(self) -> int:
        return self.r * self.M * self.M

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(M*M, 2)``, in flat-index order."""
        t = np.arange(self.M) / self.M
        X, Y = np.meshgrid(t, t, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)


def plaquette_fluxes(model: SymplecticModel, p: int, M: int) -> np.ndarray:
    """Exact ``p * int omega`` over each plaquette, from the antiderivative of ``B``."""
    h = 1.0 / M
    F = model.column_flux(np.arange(M + 1) * h)
    col = p * h * np.diff(F)
    return np.repeat(col[:, None], M, axis=1)


def grid_size(model: SymplecticModel, p: int, phi_max: float = PHI_MAX, multiple: int = 8) -> int:
    """Smallest multiple of ``multiple`` (at least 8) whose largest plaquette flux
    is at most ``phi_max``."""
    M = max(8, multiple)
    while np.max(np.abs(plaquette_fluxes(model, p, M))) > phi_max:
        M += multiple
    return M


def build_links(model: SymplecticModel, p: int, M: int, r: int = 1,
                phi_max: float = PHI_MAX) -> LatticeBundle:
    """Link phases realizing curvature ``p * omega``.

    Landau gauge: vertical links carry ``-h p F(x_i)``; horizontal links vanish
    except on the column ``i = M-1`` that wraps in ``x``, where
    ``theta_x = 2 pi p N j / M`` absorbs the total column flux.
    """
    N = check_quantizable(model)
    if M < 8:
        raise ValueError("M must be at least 8")
    if p < 0 or r < 1:
        raise ValueError("need p >= 0 and r >= 1")
    flux = plaquette_fluxes(model, p, M)
    if np.max(np.abs(flux)) > phi_max:
        raise ResolutionTooCoarse(
            f"max plaquette flux {np.max(np.abs(flux)):.4f} exceeds {phi_max} "
            f"(p={p}, M={M}); use M >= {grid_size(model, p, phi_max)}")
    h = 1.0 / M
    x = np.arange(M) * h
    theta_y = np.repeat((-h * p * model.column_flux(x))[:, None], M, axis=1)
    theta_x = np.zeros((M, M))
    theta_x[M - 1, :] = (2 * np.pi * p * N / M) * np.arange(M)
    return LatticeBundle(model, M, p, r, theta_x, theta_y, flux)


def plaquette_holonomy(theta_x: np.ndarray, theta_y: np.ndarray) -> np.ndarray:
    """Counter-clockwise phase sum ``theta_x(i,j) + theta_y(i+1,j) - theta_x(i,j+1) - theta_y(i,j)``."""
    return (theta_x + np.roll(theta_y, -1, axis=0)
            - np.roll(theta_x, -1, axis=1) - theta_y)


def gauge_transform(bundle: LatticeBundle, chi: np.ndarray) -> LatticeBundle:
    """Links of ``D^* Delta D`` for ``D = diag(exp(i chi))`` (``chi`` shape ``(M, M)``)."""
    tx = bundle.theta_x - chi + np.roll(chi, -1, axis=0)
    ty = bundle.theta_y - chi + np.roll(chi, -1, axis=1)
    return LatticeBundle(bundle.model, bundle.M, bundle.p, bundle.r, tx, ty, bundle.plaquette_flux)


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """Hermitian operator on grid functions.

    ``weight`` is the volume element ``h^2`` of the discrete inner product
    ``<u, v> = h^2 sum u conj(v)``.
    """
    matrix: sp.csr_matrix
    weight: float = 1.0
    hermitian: bool = True

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def __matmul__(self, u):
        return multiply(self, u)

    def dump(self, path) -> None:
        """Text dump: header ``n nnz``, then ``row col re im`` per stored entry."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"{self.n} {coo.nnz}\n")
            for k in order:
                v = coo.data[k]
                fh.write(f"{coo.row[k]} {coo.col[k]} {v.real:.17g} {v.imag:.17g}\n")

    @classmethod
    def load(cls, path, weight: float = 1.0) -> "SparseHermitian":
        with open(path) as fh:
            n, nnz = map(int, fh.readline().split())
            data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 4))
        m = sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
                          shape=(n, n))
        return cls(m, weight)


def multiply(A: SparseHermitian, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    if u.shape[0] != A.n:
        raise DimensionMismatch(f"operator has dimension {A.n}, vector has {u.shape[0]}")
    return A.matrix @ u


def renormalized_laplacian(bundle: LatticeBundle, renormalize: bool = True) -> SparseHermitian:
    """Assemble ``Delta_p = h^-2 sum_e (u(v) - U_e u(w)) - p tau(x_v) u(v)``."""
    M, r, h = bundle.M, bundle.r, bundle.h
    idx = np.arange(M * M).reshape(M, M)
    inv_h2 = 1.0 / (h * h)
    # forward edges in x and y; the Hermitian partners are added by transposition
    right = np.roll(idx, -1, axis=0)
    up = np.roll(idx, -1, axis=1)
    rows = np.concatenate([idx.ravel(), idx.ravel()])
    cols = np.concatenate([right.ravel(), up.ravel()])
    vals = -inv_h2 * np.exp(1j * np.concatenate([bundle.theta_x.ravel(), bundle.theta_y.ravel()]))
    off = sp.coo_matrix((vals, (rows, cols)), shape=(M * M, M * M))
    diag = np.full(M * M, 4.0 * inv_h2)
    if renormalize:
        diag = diag - bundle.p * tau_grid(bundle.model, bundle.coords())
    base = (off + off.getH() + sp.diags(diag)).tocsr()
    if r > 1:
        base = sp.kron(base, sp.identity(r, format="csr"), format="csr")
    base.sort_indices()
    return SparseHermitian(base, weight=h * h)
