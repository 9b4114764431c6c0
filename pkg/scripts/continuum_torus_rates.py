"""Continuum cross-check of the torus sweeps for a constant field, N = 1.

On the lowest Landau level of the flux-p torus the Toeplitz operator of the
Fourier mode e(m, n) = exp(2 pi i (m x + n y)) is

    T_e(m,n) = exp(-pi (m^2 + n^2) / (2 p)) W(m, n),  W(m, n) = w^(-mn/2) Z^m X^n,

with clock Z = diag(w^k), shift X and w = exp(2 pi i / p). This gives exact
continuum values of the product and commutator defects and of the recovered
symbol, free of lattice error. Run it next to the lattice sweep to separate
discretization error from the finite-p behaviour of the laws themselves.

    python scripts/continuum_torus_rates.py [--p 8,12,16,24,32] [--extended]
"""
import argparse

import numpy as np

B0 = 2 * np.pi
SIGN = -1  # calibrated bracket sign, see btq.model_geometry.poisson_sign


def weyl(m, n, p):
    w = np.exp(2j * np.pi / p)
    Z = np.diag(w ** np.arange(p))
    X = np.roll(np.eye(p), 1, axis=0)
    return w ** (-m * n / 2) * np.linalg.matrix_power(Z, m % p) @ np.linalg.matrix_power(X, n % p)


def toeplitz(coeffs, p):
    return sum(c * np.exp(-np.pi * (m * m + n * n) / (2 * p)) * weyl(m, n, p)
               for (m, n), c in coeffs.items())


def mul(f, g):
    out = {}
    for (a, b), ca in f.items():
        for (c, d), cb in g.items():
            k = (a + c, b + d)
            out[k] = out.get(k, 0) + ca * cb
    return out


def deriv(f, axis):
    return {k: 2j * np.pi * k[axis] * c for k, c in f.items()}


def bracket(f, g):
    t1 = mul(deriv(f, 0), deriv(g, 1))
    t2 = mul(deriv(f, 1), deriv(g, 0))
    keys = set(t1) | set(t2)
    return {k: SIGN * (t1.get(k, 0) - t2.get(k, 0)) / B0 for k in keys}


def fit(ps, vals):
    return np.polyfit(np.log(ps), np.log(vals), 1)[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", default="8,12,16,24,32")
    ap.add_argument("--extended", action="store_true", help="also sweep p = 32..128")
    args = ap.parse_args()
    f = {(1, 0): 0.5, (-1, 0): 0.5}            # cos(2 pi x)
    g = {(0, 1): -0.5j, (0, -1): 0.5j}          # sin(2 pi y)
    sweeps = [[int(s) for s in args.p.split(",")]]
    if args.extended:
        sweeps.append([32, 48, 64, 96, 128])
    for ps in sweeps:
        prod, comm, rec = [], [], []
        for p in ps:
            Tf, Tg = toeplitz(f, p), toeplitz(g, p)
            prod.append(np.linalg.norm(Tf @ Tg - toeplitz(mul(f, g), p), 2))
            C = Tf @ Tg - Tg @ Tf - 1j / p * toeplitz(bracket(f, g), p)
            comm.append(np.linalg.norm(C, 2))
            rec.append(1 - np.exp(-np.pi / p))  # Berezin damping of a unit mode
        print(f"{'p':>5} {'product':>12} {'p*product':>10} {'commutator':>12} {'symbol err':>11}")
        for p, a, b, c in zip(ps, prod, comm, rec):
            print(f"{p:5d} {a:12.6g} {p * a:10.5f} {b:12.6g} {c:11.5f}")
        print(f"slopes: product {fit(ps, prod):.3f}  commutator {fit(ps, comm):.3f}  "
              f"symbol {fit(ps, rec):.3f}\n")


if __name__ == "__main__":
    main()
