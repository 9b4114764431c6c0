"""Independent reference computations used by the tests."""
import math

import numpy as np

from btq.eigensolve import SpectralSubspace


def fock_grid_subspace(p, B0, K, half_width, m):
    """Orthonormal Fock basis ``e_0..e_K`` sampled on an ``m x m`` grid over
    ``[-L, L]^2``, packaged as a subspace with volume weight ``h^2``.

    The trapezoid rule on Gaussian-weighted integrands is spectrally accurate,
    so Toeplitz compressions on this grid reproduce Gaussian moments.
    """
    t = np.linspace(-half_width, half_width, m, endpoint=False) + half_width / m
    h = t[1] - t[0]
    X, Y = np.meshgrid(t, t, indexing="ij")
    z = (X + 1j * Y).ravel()
    a = p * B0
    k = np.arange(K + 1)
    log_norm = 0.5 * (math.log(math.pi) + np.array([math.lgamma(j + 1) for j in k]) + (k + 1) * math.log(2 / a))
    with np.errstate(divide="ignore"):
        logz = np.log(np.abs(z))
    V = np.exp(k[None, :] * logz[:, None] - log_norm[None, :] - a * np.abs(z)[:, None] ** 2 / 4)
    V = V * np.exp(1j * k[None, :] * np.angle(z)[:, None])
    S = SpectralSubspace(np.zeros(K + 1), V, np.zeros(K + 1), np.inf, 0.0, weight=h * h,
                         coords=np.stack([X.ravel(), Y.ravel()], axis=-1))
    S.meta["p"] = p
    return S


def gaussian_moment_absz2(p, B0, k):
    """<|z|^2 z^k, z^k> / <z^k, z^k> under exp(-p B0 |z|^2 / 2)."""
    return 2.0 * (k + 1) / (p * B0)


def finite_difference_grad(f, x, y, eps=1e-6):
    fx = (f(x + eps, y) - f(x - eps, y)) / (2 * eps)
    fy = (f(x, y + eps) - f(x, y - eps)) / (2 * eps)
    return fx, fy


def diag_sparse(values):
    import scipy.sparse as sp
    from btq.lattice_bundle import SparseHermitian
    return SparseHermitian(sp.diags(np.asarray(values, dtype=complex)).tocsr())
