"""Low-lying spectral cluster of a Hermitian operator and its projector.

The iterative path is a thick-restarted block Lanczos method with full
reorthogonalization. ``dense_eig`` is the cross-validation oracle.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .lattice_bundle import DimensionMismatch, SparseHermitian

logger = logging.getLogger(__name__)

DENSE_CAP = 4096
GAP_FACTOR = 10.0


class NoGapDetected(RuntimeError):
    pass


class NotConverged(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class TooLarge(ValueError):
    pass


@dataclass(eq=False)
class SpectralSubspace:
    """Eigenpairs of the low window; ``basis`` is orthonormal for ``weight * <.,.>``."""
    eigenvalues: np.ndarray
    basis: np.ndarray
    residuals: np.ndarray
    gap_edge: float
    window: float
    weight: float = 1.0
    coords: Optional[np.ndarray] = None  # node coordinates, when built on a grid
    rank: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def cluster_width(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.eigenvalues).tobytes())
        h.update(np.ascontiguousarray(self.basis).tobytes())
        return h.hexdigest()[:16]

    def gram(self) -> np.ndarray:
        return self.weight * (self.basis.conj().T @ self.basis)

    def projector_matrix(self) -> np.ndarray:
        """Dense matrix of ``P`` acting on grid-function coefficient vectors."""
        return self.weight * (self.basis @ self.basis.conj().T)


def apply_projector(S: SpectralSubspace, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    if u.shape[0] != S.n:
        raise DimensionMismatch(f"subspace lives in dimension {S.n}, vector has {u.shape[0]}")
    return S.basis @ (S.weight * (S.basis.conj().T @ u))


def dense_eig(A) -> tuple[np.ndarray, np.ndarray]:
    """Full Hermitian eigendecomposition, eigenvalues ascending (LAPACK ``heevd``)."""
    if isinstance(A, SparseHermitian):
        A = A.to_dense()
    A = np.asarray(A)
    if A.shape[0] > DENSE_CAP:
        raise TooLarge(f"dense eigensolver capped at n={DENSE_CAP}, got {A.shape[0]}")
    return np.linalg.eigh(A)


def locate_gap(values: np.ndarray, factor: float = GAP_FACTOR) -> int:
    """Number of values below the spectral gap.

    The relative gap after index ``j`` is ``g_j / s_j`` with ``g_j = v[j+1] - v[j]``
    and ``s_j = max(v[j] - v[0], min(g[j+1:]))``: the gap measured against
    both the spread below it and the finest spacing above it. Among gaps whose
    relative size reaches ``factor`` the widest one wins.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size < 2:
        raise NoGapDetected("need at least two candidate values")
    gaps = np.diff(v)
    above = np.array([np.min(gaps[j + 1:]) if j + 1 < gaps.size else 0.0 for j in range(gaps.size)])
    denom = np.maximum(np.maximum(v[:-1] - v[0], above), max(1e-12 * float(v[-1] - v[0]), 1e-300))
    rel = gaps / denom
    ok = np.flatnonzero(rel >= factor)
    if ok.size == 0:
        raise NoGapDetected(f"largest relative gap {rel.max():.3g} < {factor} among {v.size} values")
    return int(ok[np.argmax(gaps[ok])]) + 1


def _window(values: np.ndarray, d: int, gap_edge: float) -> float:
    lo, hi = float(values[0]), float(values[d - 1])
    C_L = max(abs(lo), abs(hi), 0.5 * (hi + gap_edge))
    if not C_L < gap_edge:
        raise NoGapDetected(f"symmetric window [-{C_L:.4g}, {C_L:.4g}] reaches the gap edge {gap_edge:.4g}")
    return C_L


def _orthonormalize(W: np.ndarray, Q: Optional[np.ndarray], rng: np.random.Generator,
                    drop_tol: float = 1e-10) -> np.ndarray:
    """Orthonormalize ``W`` against ``Q`` (twice) and itself; rank-deficient
    directions are replaced by fresh random vectors."""
    for _ in range(2):
        if Q is not None and Q.shape[1]:
            W = W - Q @ (Q.conj().T @ W)
    norms = np.linalg.norm(W, axis=0)
    Qw, R = np.linalg.qr(W)
    bad = np.abs(np.diag(R)) <= drop_tol * max(1.0, float(np.max(norms, initial=0.0)))
    if np.any(bad):
        n = W.shape[0]
        used = 0 if Q is None else Q.shape[1]
        room = n - used - int(np.sum(~bad))
        keep = Qw[:, ~bad]
        k = min(int(np.sum(bad)), max(room, 0))
        if k == 0:
            return keep
        fresh = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        basis = keep if Q is None else np.hstack([Q, keep])
        for _ in range(2):
            fresh = fresh - basis @ (basis.conj().T @ fresh)
        fresh, _ = np.linalg.qr(fresh)
        return np.hstack([keep, fresh])
    return Qw


def block_lanczos(A: SparseHermitian, nev: int, seed: int = 0, tol: float = 1e-8,
                  block_size: Optional[int] = None, max_basis: Optional[int] = None,
                  max_restarts: int = 200, n_strict: Optional[int] = None, loose_tol: float = 1e-4):
    """Lowest ``nev`` eigenpairs (Euclidean-normalized) of ``A``.

    Convergence: the lowest ``n_strict`` (default all) residuals satisfy
    ``||A y - theta y|| <= tol (1 + |theta|)``, the rest ``loose_tol (1 + |theta|)``.
    """
    n = A.n
    nev = min(nev, n)
    n_strict = nev if n_strict is None else min(n_strict, nev)
    bound = np.where(np.arange(nev) < n_strict, tol, max(loose_tol, tol))
    b = min(block_size or nev, n)
    m_max = min(n, max_basis or max(4 * nev + 4 * b, 240))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
    Q = _orthonormalize(X, None, rng)
    AQ = A.matrix @ Q
    history = []
    for restart in range(max_restarts + 1):
        # extend the Krylov basis block by block
        while Q.shape[1] < m_max:
            W = AQ[:, -b:] if AQ.shape[1] >= b else AQ
            W = _orthonormalize(W.copy(), Q, rng)
            W = W[:, : m_max - Q.shape[1]]
            if W.shape[1] == 0:
                break
            Q = np.hstack([Q, W])
            AQ = np.hstack([AQ, A.matrix @ W])
        H = Q.conj().T @ AQ
        H = 0.5 * (H + H.conj().T)
        theta, S = np.linalg.eigh(H)
        theta, S = theta[:nev], S[:, :nev]
        Y = Q @ S
        R = AQ @ S - Y * theta
        res = np.linalg.norm(R, axis=0)
        history.append(float(np.max(res / (1 + np.abs(theta)))))
        done = np.all(res <= bound * (1 + np.abs(theta)))
        if done or Q.shape[1] >= n:
            if not done:
                logger.warning("Krylov space exhausted with residual %.3g", history[-1])
            return theta, Y, res, {"restarts": restart, "basis": Q.shape[1], "history": history}
        # thick restart from the wanted Ritz vectors
        Q, _ = np.linalg.qr(Y)
        AQ = A.matrix @ Q
        b = min(b, Q.shape[1])
    raise NotConverged(f"block Lanczos did not converge after {max_restarts} restarts",
                       {"history": history, "nev": nev, "n": n})


def config_seed(*parts) -> int:
    """Deterministic 63-bit seed from configuration values."""
    text = "|".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def lowest_cluster(A: SparseHermitian, expected_dim: Optional[int] = None,
                   C_L: Union[float, str] = "auto", seed: int = 0, tol: float = 1e-8,
                   method: str = "lanczos", **kw) -> SpectralSubspace:
    """Eigenpairs of ``A`` in the window ``[-C_L, C_L]`` below the spectral gap.

    With ``C_L="auto"`` the window edge is placed at the largest relative gap
    among the lowest ``2*expected_dim + 8`` Ritz values.
    """
    n_cand = 2 * expected_dim + 8 if expected_dim else 24
    n_cand = min(n_cand, A.n)
    # only the cluster and the first value above it need full accuracy
    n_strict = expected_dim + 1 if expected_dim else None
    while True:
        if method == "dense":
            vals, vecs = dense_eig(A)
            vals, vecs = vals[:n_cand], vecs[:, :n_cand]
            res = np.linalg.norm(A.matrix @ vecs - vecs * vals, axis=0)
            info = {"method": "dense"}
        else:
            vals, vecs, res, info = block_lanczos(A, n_cand, seed=seed, tol=tol, n_strict=n_strict, **kw)
            info["method"] = "lanczos"
        if C_L == "auto":
            d = locate_gap(vals)
            if d >= vals.size:
                raise NoGapDetected("no eigenvalue found above the cluster")
            gap_edge = float(vals[d])
            window = _window(vals, d, gap_edge)
            if method != "dense" and n_strict is not None and d + 1 > n_strict:
                n_strict = d + 1  # cluster larger than expected: tighten and redo
                continue
            break
        window = float(C_L)
        if np.any(vals > window) or n_cand >= A.n:
            d = int(np.sum(vals <= window))
            if np.any(vals[:d] < -window):
                raise NoGapDetected("eigenvalues below -C_L")
            gap_edge = float(vals[d]) if d < vals.size else np.inf
            if method != "dense" and n_strict is not None and d + 1 > n_strict:
                n_strict = d + 1
                continue
            break
        n_cand = min(2 * n_cand, A.n)
    w = A.weight
    basis = vecs[:, :d] / np.sqrt(w)
    # residuals of weighted-normalized vectors in the weighted norm equal Euclidean ones
    return SpectralSubspace(vals[:d].copy(), basis, res[:d].copy(), gap_edge, window,
                            weight=w, meta={"n_candidates": int(vals.size), **info})


def principal_angles(S1: SpectralSubspace, S2: SpectralSubspace) -> np.ndarray:
    return sla.subspace_angles(S1.basis, S2.basis)
