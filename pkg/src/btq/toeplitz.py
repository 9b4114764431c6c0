"""Toeplitz operators ``P f P`` on a computed quantum space, and their norms.

With ``V`` the weighted-orthonormal basis of ``H_p`` (``h^2 V^* V = I``),
the compression of multiplication by ``f`` is the ``d x d`` matrix
``T = h^2 V^* F V`` and the operator itself is ``h^2 V T V^*`` on grid
coefficient vectors.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .eigensolve import SpectralSubspace
from .model_geometry import SymplecticModel, geodesic_distance, mu0
from .symbols import Symbol, linear_combination, product

EXP_GUARD = 700.0


class RankMismatch(ValueError):
    pass


class WeightOverflow(OverflowError):
    pass


class DegenerateDiagonal(ZeroDivisionError):
    pass


class AlphaAboveCap(ValueError):
    pass


@dataclass(eq=False)
class ToeplitzMatrix:
    matrix: np.ndarray
    symbol: str
    p: int
    source: str  # digest of the subspace it was compressed to

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path) -> None:
        write_matrix_csv(self.matrix, path)


def write_matrix_csv(A, path) -> None:
    """Dense complex matrix as ``row, col, re, im`` lines."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for (i, j), v in np.ndenumerate(np.asarray(A, dtype=complex)):
            w.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])


def _p_of(S: SpectralSubspace) -> int:
    return int(S.meta.get("p", 0))


def _node_values(S: SpectralSubspace, f: Symbol) -> np.ndarray:
    if S.coords is None:
        raise ValueError("subspace carries no node coordinates")
    return np.asarray(f(S.coords[:, 0], S.coords[:, 1]))


def multiplication_apply(S: SpectralSubspace, f: Symbol, U: np.ndarray) -> np.ndarray:
    """Pointwise multiplication of the columns of ``U`` (full-grid vectors) by ``f``."""
    vals = _node_values(S, f)
    r = S.rank
    if f.is_matrix:
        if f.rank != r:
            raise RankMismatch(f"symbol rank {f.rank} vs bundle rank {r}")
        Ur = U.reshape(-1, r, U.shape[1])
        return np.einsum("nab,nbk->nak", vals, Ur).reshape(U.shape)
    return np.repeat(vals, r)[:, None] * U


def toeplitz_assemble(S: SpectralSubspace, f: Symbol) -> ToeplitzMatrix:
    """Compression ``T = h^2 V^* F V`` of multiplication by ``f`` to ``H_p``."""
    V = S.basis
    T = S.weight * (V.conj().T @ multiplication_apply(S, f, V))
    return ToeplitzMatrix(T, f.name, _p_of(S), S.digest())


def _as_array(T) -> np.ndarray:
    return T.matrix if isinstance(T, ToeplitzMatrix) else np.asarray(T)


def op_norm(T, tol: float = 1e-10, max_dim: int = 400) -> float:
    """Largest singular value.

    Lanczos on ``T^* T`` from a fixed start vector with full
    reorthogonalization; stops when the top Ritz pair has residual below
    ``tol`` relative to the Ritz value.
    """
    A = _as_array(T)
    if A.size == 0:
        return 0.0
    n = A.shape[1]
    v = np.cos(np.arange(n) + 1.0) + 1j * np.sin(0.5 * np.arange(n) + 0.3)
    Q = np.empty((n, 0), dtype=complex)
    W = np.empty((n, 0), dtype=complex)
    q = v / np.linalg.norm(v)
    top = 0.0
    for _ in range(min(n, max_dim)):
        w = A.conj().T @ (A @ q)
        Q = np.hstack([Q, q[:, None]])
        W = np.hstack([W, w[:, None]])
        H = Q.conj().T @ W
        H = 0.5 * (H + H.conj().T)
        theta, Y = np.linalg.eigh(H)
        top = max(float(theta[-1]), 0.0)
        y = Q @ Y[:, -1]
        res = np.linalg.norm(W @ Y[:, -1] - theta[-1] * y)
        if res <= tol * max(top, 1e-300) or Q.shape[1] == n:
            return float(np.sqrt(top))
        for _ in range(2):
            w = w - Q @ (Q.conj().T @ w)
        nw = np.linalg.norm(w)
        if nw <= 1e-14 * max(top, 1.0):
            # invariant subspace; restart from a direction orthogonal to it
            w = np.random.default_rng(Q.shape[1]).standard_normal(n).astype(complex)
            w -= Q @ (Q.conj().T @ w)
            nw = np.linalg.norm(w)
            if nw == 0:
                return float(np.sqrt(top))
        q = w / nw
    return float(np.sqrt(top))


@dataclass(eq=False)
class FactoredOperator:
    """The full-grid operator ``weight * V core V^*``."""
    basis: np.ndarray
    core: np.ndarray
    weight: float

    @classmethod
    def from_toeplitz(cls, S: SpectralSubspace, T) -> "FactoredOperator":
        return cls(S.basis, _as_array(T), S.weight)


def _weights(model: SymplecticModel, coords, y, alpha, rank):
    d = geodesic_distance(model, coords, np.asarray(y, dtype=float))
    expo = alpha * d
    if np.max(np.abs(expo), initial=0.0) > EXP_GUARD:
        raise WeightOverflow(f"weight exponent {np.max(np.abs(expo)):.1f} exceeds {EXP_GUARD}")
    return np.repeat(np.exp(expo), rank)


def weighted_norm(A: Union[np.ndarray, FactoredOperator], alpha: float, y, model: SymplecticModel,
                  coords: np.ndarray, rank: int = 1, p: int | None = None,
                  mu_cap: float | None = None) -> float:
    """``|| D A D^-1 ||`` with ``D = diag(exp(alpha d(x_i, y)))``.

    ``A`` is an ``n x n`` matrix acting on grid coefficient vectors or a
    :class:`FactoredOperator`. For the latter ``D V = Qa Ra`` and
    ``D^-1 V = Qb Rb`` reduce the norm to that of ``weight * Ra core Rb^*``.
    With ``p`` given, ``|alpha|`` must not exceed ``mu_cap sqrt(p)``
    (default cap ``0.5 sqrt(mu0)``).
    """
    if p is not None:
        cap = (0.5 * np.sqrt(mu0(model)) if mu_cap is None else mu_cap) * np.sqrt(p)
        if abs(alpha) > cap * (1 + 1e-12):
            raise AlphaAboveCap(f"|alpha|={abs(alpha):.4g} exceeds cap {cap:.4g}")
    D = _weights(model, coords, y, alpha, rank)
    if isinstance(A, FactoredOperator):
        _, Ra = np.linalg.qr(D[:, None] * A.basis)
        _, Rb = np.linalg.qr(A.basis / D[:, None])
        return op_norm(A.weight * (Ra @ A.core @ Rb.conj().T))
    A = np.asarray(A)
    return op_norm(D[:, None] * A / D[None, :])


def schur_bound(K: np.ndarray, h: float) -> float:
    """Schur-test bound ``max(sup_x h^2 sum_x' |K|, sup_x' h^2 sum_x |K|)``."""
    aK = np.abs(np.asarray(K))
    return float(h * h * max(aK.sum(axis=1).max(), aK.sum(axis=0).max()))


def product_defect(S: SpectralSubspace, f: Symbol, g: Symbol) -> float:
    Tf = toeplitz_assemble(S, f).matrix
    Tg = toeplitz_assemble(S, g).matrix
    Tfg = toeplitz_assemble(S, product(f, g)).matrix
    return op_norm(Tf @ Tg - Tfg)


def commutator_defect(S: SpectralSubspace, f: Symbol, g: Symbol, bracket: Symbol,
                      p: int | None = None) -> float:
    """``|| [T_f, T_g] - i p^-1 T_{f,g} ||``."""
    if f.is_matrix or g.is_matrix:
        raise ValueError("commutator law is stated for scalar symbols")
    p = p or _p_of(S)
    Tf = toeplitz_assemble(S, f).matrix
    Tg = toeplitz_assemble(S, g).matrix
    Tb = toeplitz_assemble(S, bracket).matrix
    return op_norm(Tf @ Tg - Tg @ Tf - 1j / p * Tb)


def symbol_recover(T, S: SpectralSubspace, floor: float = 1e-12) -> np.ndarray:
    """Leading-symbol estimate ``K_T(x, x) / K_P(x, x)`` at every node.

    For rank ``r > 1`` returns the ``r x r`` blocks ``K_T(x,x) K_P(x,x)^-1``.
    """
    V = S.basis
    r = S.rank
    C = _as_array(T)
    VT = V @ C
    if r == 1:
        kp = np.sum(np.abs(V) ** 2, axis=1)
        if np.min(kp) < floor:
            raise DegenerateDiagonal(f"projector diagonal {np.min(kp):.3g} below {floor}")
        return np.sum(VT * V.conj(), axis=1) / kp
    Vr = V.reshape(-1, r, V.shape[1])
    VTr = VT.reshape(-1, r, V.shape[1])
    KP = np.einsum("nak,nbk->nab", Vr, Vr.conj())
    KT = np.einsum("nak,nbk->nab", VTr, Vr.conj())
    if np.min(np.linalg.eigvalsh(KP)) < floor:
        raise DegenerateDiagonal("projector diagonal block is singular")
    return KT @ np.linalg.inv(KP)


def series_defect(family: dict, g: Sequence[Symbol], alpha_grid: Sequence[float], y_set,
                  model: SymplecticModel, mu_cap: float | None = None) -> dict:
    """Per ``p``: ``max_{alpha, y} || p^(K+1) (T_p - T_{sum_l p^-l g_l}) ||_alpha,y``.

    ``family`` maps ``p`` to ``(S, T_p)`` with ``T_p`` a ``d x d`` core on
    ``H_p``.
    """
    K = len(g) - 1
    out = {}
    for p, (S, Tp) in sorted(family.items()):
        target = linear_combination([(float(p) ** (-l), gl) for l, gl in enumerate(g)])
        R = (float(p) ** (K + 1)) * (_as_array(Tp) - toeplitz_assemble(S, target).matrix)
        F = FactoredOperator(S.basis, R, S.weight)
        out[p] = max(weighted_norm(F, a, y, model, S.coords, S.rank, p=p, mu_cap=mu_cap)
                     for a in alpha_grid for y in y_set)
    return out
