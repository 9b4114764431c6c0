"""p-sweeps, rate fits and verdicts for the semiclassical laws."""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import bergman, fock_oracle as fock, symbols as sy, toeplitz as tp
from .eigensolve import SpectralSubspace, config_seed, lowest_cluster
from .lattice_bundle import PHI_MAX, LatticeBundle, build_links, grid_size, renormalized_laplacian
from .model_geometry import SymplecticModel, bracket_symbol, mu0, poisson_sign
from .symbols import Symbol

logger = logging.getLogger(__name__)


class AllZero(ValueError):
    pass


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
    EXACT_VANISHING = "exact_vanishing"
    RECORDED = "recorded"  # descriptive study, no pass/fail

    @property
    def ok(self) -> bool:
        return self in (Verdict.PASS, Verdict.EXACT_VANISHING, Verdict.RECORDED)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    dropped: tuple = ()


def rate_fit(points: Sequence[tuple], zero_tol: float = 1e-14) -> RateFit:
    """OLS of ``log value`` on ``log p``; values below ``zero_tol`` are dropped.

    Raises ``AllZero`` when fewer than two values survive.
    """
    pts = [(float(p), float(v)) for p, v in points]
    keep = [(p, v) for p, v in pts if v >= zero_tol]
    dropped = tuple(p for p, v in pts if v < zero_tol)
    if len(keep) < 2:
        raise AllZero(f"{len(pts) - len(keep)} of {len(pts)} values below {zero_tol}")
    x = np.log([p for p, _ in keep])
    y = np.log([v for _, v in keep])
    slope, intercept = np.polyfit(x, y, 1)
    return RateFit(float(slope), float(intercept), _r2(x, y, slope, intercept), dropped)


def linear_fit(x, y) -> RateFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    return RateFit(float(slope), float(intercept), _r2(x, y, slope, intercept))


def _r2(x, y, slope, intercept) -> float:
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass
class ConvergenceReport:
    study: str
    model_hash: str
    symbols: tuple
    p_list: list
    rows: list  # one dict per p (or per sweep point)
    metric: str
    fit: Optional[RateFit]
    verdict: Verdict
    band: Optional[tuple] = None
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        ps = list(self.p_list)
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p list must be strictly increasing")
        if self.fit is not None and len(ps) < 3:
            raise ValueError("a rate fit needs at least three values of p")

    @property
    def values(self) -> list:
        return [row[self.metric] for row in self.rows]

    def summary(self) -> dict:
        f = self.fit
        return {
            "study": self.study, "model_hash": self.model_hash, "symbols": list(self.symbols),
            "p": list(self.p_list), "metric": self.metric,
            "slope": None if f is None else f.slope,
            "intercept": None if f is None else f.intercept,
            "r2": None if f is None else f.r2,
            "dropped": [] if f is None else list(f.dropped),
            "verdict": self.verdict.value, "band": None if self.band is None else list(self.band),
            "checks": self.checks, "poisson_sign": poisson_sign(),
        }


@dataclass(frozen=True)
class Tolerances:
    r2_min: float = 0.8
    product_slope: tuple = (-1.2, -0.8)
    commutator_slope: tuple = (-2.3, -1.7)
    gap_rel: float = 0.1
    width_slope_max: float = 0.1
    kernel_slope_max: float = -0.4
    kernel_diag_slope_max: float = -0.9
    symbol_slope_max: float = -0.4
    density_rel: float = 0.05
    decay_r2_min: float = 0.9
    decay_stability: float = 0.25
    weighted_ratio: float = 2.0
    ordering_slope: tuple = (-1.3, -0.7)
    ordering_floor: float = 0.05
    refinement_rel: float = 0.1


def _banded(fit: RateFit, band: tuple, tol: Tolerances) -> Verdict:
    if fit.r2 < tol.r2_min:
        return Verdict.INCONCLUSIVE
    lo, hi = band
    inside = (lo is None or lo <= fit.slope) and (hi is None or fit.slope <= hi)
    return Verdict.PASS if inside else Verdict.FAIL


def _fit_or_vanish(points, band, tol, zero_tol=1e-14):
    try:
        fit = rate_fit(points, zero_tol)
    except AllZero:
        return None, Verdict.EXACT_VANISHING
    return fit, _banded(fit, band, tol)


# -- quantum spaces ------------------------------------------------------------

@dataclass(frozen=True)
class GridPolicy:
    phi_max: float = PHI_MAX
    multiple: int = 8

    def size(self, model: SymplecticModel, p: int, min_M: int = 8) -> int:
        M = grid_size(model, p, self.phi_max, self.multiple)
        return max(M, -(-min_M // self.multiple) * self.multiple)


class QuantumSpaceSolver:
    """Builds and memoizes ``(bundle, H_p)`` per ``(model, p, M, r)``.

    An optional cache object with ``get``/``put`` persists subspaces.
    """

    def __init__(self, policy: GridPolicy = GridPolicy(), seed: int = 0, method: str = "lanczos",
                 tol: float = 1e-8, cache=None):
        self.policy = policy
        self.seed = seed
        self.method = method
        self.tol = tol
        self.cache = cache
        self._memo: dict = {}
        self._lock = threading.Lock()

    def solve(self, model: SymplecticModel, p: int, M: int | None = None, r: int = 1):
        M = M or self.policy.size(model, p)
        key = (model.hash(), p, M, r)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        bundle = build_links(model, p, M, r, phi_max=max(self.policy.phi_max, PHI_MAX))
        S = self.cache.get(*key) if self.cache is not None else None
        if S is None:
            logger.info("solving p=%d M=%d r=%d (%s)", p, M, r, self.method)
            A = renormalized_laplacian(bundle)
            S = lowest_cluster(A, expected_dim=p * model.N * r,
                               seed=config_seed(self.seed, *key), tol=self.tol, method=self.method)
            if self.cache is not None:
                self.cache.put(*key, S)
        S.coords = bundle.coords()
        S.rank = r
        S.meta.update(p=p, M=M, r=r, model=model.hash())
        with self._lock:
            self._memo[key] = (bundle, S)
        return bundle, S

    def prefetch(self, model: SymplecticModel, p_list, r: int = 1, jobs: int = 1) -> None:
        if jobs <= 1:
            for p in p_list:
                self.solve(model, p, r=r)
            return
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(lambda p: self.solve(model, p, r=r), p_list))


def _require_torus(model: SymplecticModel, study: str) -> None:
    if not model.is_torus:
        raise ValueError(f"the {study} study runs on the torus model")


def _base_row(S: SpectralSubspace) -> dict:
    return {"p": S.meta["p"], "M": S.meta["M"], "d": S.dim}


# -- gap -------------------------------------------------------------------------

def run_gap_study(model, p_list, solver: QuantumSpaceSolver, tol: Tolerances = Tolerances(),
                  dense_check: bool = True) -> ConvergenceReport:
    """Cluster width, gap edge and dimension per ``p``.

    Constant field: slope of ``gap_edge`` vs ``p`` within ``gap_rel`` of
    ``2 mu0`` and no growth of the cluster width. Variable field:
    ``gap_edge >= 2 p mu0 - C_L`` with ``C_L`` the largest observed width.
    Both require ``dim H_p = p N``.
    """
    _require_torus(model, "gap")
    rows = []
    for p in p_list:
        _, S = solver.solve(model, p)
        rows.append({**_base_row(S), "expected_d": p * model.N, "cluster_width": S.cluster_width,
                     "gap_edge": S.gap_edge, "lowest": float(S.eigenvalues[0])})
    checks = {"dims_ok": all(r["d"] == r["expected_d"] for r in rows)}
    if dense_check:
        p0 = p_list[0]
        M0 = solver.policy.size(model, p0)
        bundle = build_links(model, p0, M0)
        Sd = lowest_cluster(renormalized_laplacian(bundle), expected_dim=p0 * model.N, method="dense")
        checks["dense_dim_smallest_p"] = Sd.dim
        checks["dims_ok"] &= Sd.dim == rows[0]["d"]
    fit = linear_fit(p_list, [r["gap_edge"] for r in rows])
    width = linear_fit(p_list, [r["cluster_width"] for r in rows])
    target = 2 * mu0(model)
    C_L = max(r["cluster_width"] for r in rows)
    checks.update(gap_slope=fit.slope, gap_slope_target=target, width_slope=width.slope, C_L=C_L,
                  lower_bound_ok=all(r["gap_edge"] >= 2 * r["p"] * mu0(model) - C_L for r in rows))
    if model.B1 == 0:
        checks["slope_ok"] = abs(fit.slope / target - 1) <= tol.gap_rel
        checks["width_ok"] = width.slope <= tol.width_slope_max
        ok = checks["slope_ok"] and checks["width_ok"]
        verdict = Verdict.INCONCLUSIVE if fit.r2 < tol.r2_min else (
            Verdict.PASS if ok and checks["dims_ok"] else Verdict.FAIL)
    else:
        verdict = Verdict.PASS if checks["lower_bound_ok"] and checks["dims_ok"] else Verdict.FAIL
    band = (target * (1 - tol.gap_rel), target * (1 + tol.gap_rel))
    return ConvergenceReport("gap", model.hash(), (), list(p_list), rows, "gap_edge", fit, verdict,
                             band, checks)


# -- product / commutator ----------------------------------------------------------

def _fock_truncation(p, B0, degree):
    return fock.FockTruncation(p, B0, max(32, 8 * max(degree, 1)))


def _fock_matrix(t, f: Symbol):
    name = f.meta.get("fock")
    if name is not None:
        return fock.fock_toeplitz_exact(t, name, f.meta.get("c", 0.0))
    return fock.fock_toeplitz_quadrature(t, f)


def _fock_degree(f: Symbol) -> int:
    return int(f.meta.get("degree", 0))


def _refinement(model, p, solver, metric: Callable[[SpectralSubspace], float]) -> float:
    """Relative change of ``metric`` at ``p`` when the grid is doubled."""
    _, S1 = solver.solve(model, p)
    _, S2 = solver.solve(model, p, M=2 * S1.meta["M"])
    a, b = metric(S1), metric(S2)
    return abs(a - b) / max(abs(b), 1e-300)


def run_product_study(model, f: Symbol, g: Symbol, p_list, solver: QuantumSpaceSolver,
                      tol: Tolerances = Tolerances(), refinement: bool = True) -> ConvergenceReport:
    rows = []
    checks = {}
    if model.is_torus:
        for p in p_list:
            _, S = solver.solve(model, p, r=f.rank or g.rank or 1)
            rows.append({**_base_row(S), "defect": tp.product_defect(S, f, g)})
        if refinement:
            rel = _refinement(model, p_list[0], solver, lambda S: tp.product_defect(S, f, g))
            checks.update(refinement_change=rel, refinement_ok=rel < tol.refinement_rel)
    else:
        deg = _fock_degree(f) + _fock_degree(g)
        for p in p_list:
            t = _fock_truncation(p, model.B0, deg)
            Tf, Tg = _fock_matrix(t, f), _fock_matrix(t, g)
            Tfg = fock.fock_toeplitz_quadrature(t, sy.product(f, g))
            D = fock.interior(Tf @ Tg - Tfg, max(_fock_degree(g), 1))
            rows.append({"p": p, "M": 0, "d": t.size, "defect": tp.op_norm(D)})
    fit, verdict = _fit_or_vanish([(r["p"], r["defect"]) for r in rows], tol.product_slope, tol)
    if verdict is Verdict.PASS and checks.get("refinement_ok") is False:
        verdict = Verdict.FAIL
    return ConvergenceReport("product", model.hash(), (f.name, g.name), list(p_list), rows,
                             "defect", fit, verdict, tol.product_slope, checks)


def run_commutator_study(model, f: Symbol, g: Symbol, p_list, solver: QuantumSpaceSolver,
                         tol: Tolerances = Tolerances(), refinement: bool = True) -> ConvergenceReport:
    if f.is_matrix or g.is_matrix:
        raise ValueError("commutator study needs scalar symbols")
    bracket = bracket_symbol(model, f, g)
    rows = []
    checks = {"poisson_sign": poisson_sign()}
    if model.is_torus:
        for p in p_list:
            _, S = solver.solve(model, p)
            rows.append({**_base_row(S), "defect": tp.commutator_defect(S, f, g, bracket, p)})
        if refinement:
            rel = _refinement(model, p_list[0], solver,
                              lambda S: tp.commutator_defect(S, f, g, bracket, S.meta["p"]))
            checks.update(refinement_change=rel, refinement_ok=rel < tol.refinement_rel)
    else:
        deg = max(_fock_degree(f), _fock_degree(g))
        for p in p_list:
            t = _fock_truncation(p, model.B0, deg)
            Tf, Tg = _fock_matrix(t, f), _fock_matrix(t, g)
            Tb = fock.fock_toeplitz_quadrature(t, bracket)
            D = fock.interior(Tf @ Tg - Tg @ Tf - 1j / p * Tb, max(deg, 1))
            rows.append({"p": p, "M": 0, "d": t.size, "defect": tp.op_norm(D)})
    fit, verdict = _fit_or_vanish([(r["p"], r["defect"]) for r in rows], tol.commutator_slope, tol,
                                  zero_tol=1e-14 if model.is_torus else 1e-12)
    if verdict is Verdict.PASS and checks.get("refinement_ok") is False:
        verdict = Verdict.FAIL
    return ConvergenceReport("commutator", model.hash(), (f.name, g.name), list(p_list), rows,
                             "defect", fit, verdict, tol.commutator_slope, checks)


# -- kernel expansion ----------------------------------------------------------------

Q_LEADING = [{(0, 0, 0, 0): 1.0}]


def _plane_kernel_field(model, p) -> bergman.KernelField:
    a = p * model.B0
    radius = bergman.default_window(p, mu0(model), cap=np.inf)
    n = 9
    t = np.linspace(-radius, radius, 2 * n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    keep = X ** 2 + Y ** 2 <= radius ** 2 + 1e-12
    Z = np.stack([X[keep], Y[keep]], axis=-1)
    z = Z[:, 0] + 1j * Z[:, 1]
    K_max = 64
    while True:
        try:
            _, series = fock.fock_bergman_kernel(fock.FockTruncation(p, model.B0, K_max),
                                                 z[:, None], z[None, :])
            break
        except fock.TruncationInsufficient:
            K_max *= 2
    return bergman.KernelField(np.zeros(2), Z, series, p, meta={"convention": "Fock", "scale": a})


def run_kernel_study(model, p_list, solver: QuantumSpaceSolver, tol: Tolerances = Tolerances(),
                     C0: float | None = None, M_growth: int = 4) -> ConvergenceReport:
    if model.is_torus and model.B1 != 0:
        raise ValueError("kernel study needs a constant field")
    C0 = 0.2 * np.sqrt(mu0(model)) if C0 is None else C0
    rows = []
    for p in p_list:
        if model.is_torus:
            bundle, S = solver.solve(model, p)
            K = bergman.projector_kernel(S, bundle, 0, bergman.default_window(p, mu0(model)))
            row = _base_row(S)
        else:
            K = _plane_kernel_field(model, p)
            row = {"p": p, "M": 0, "d": 0}
        par = bergman.kernel_params_at(model, K.x0)
        row["residual"] = bergman.expansion_residual(K, Q_LEADING, p, 0, par, C0, M_growth)
        row["diagonal_residual"] = bergman.expansion_residual(K, Q_LEADING, p, 0, par, C0, M_growth,
                                                              diagonal_only=True)
        row["hermitian_defect"] = float(np.max(np.abs(K.values - K.values.conj().T)))
        rows.append(row)
    zero_tol = 1e-14 if model.is_torus else 1e-10
    band = (None, tol.kernel_slope_max)
    fit, verdict = _fit_or_vanish([(r["p"], r["residual"]) for r in rows], band, tol, zero_tol)
    dfit, dverdict = _fit_or_vanish([(r["p"], r["diagonal_residual"]) for r in rows],
                                    (None, tol.kernel_diag_slope_max), tol, zero_tol)
    checks = {"diagonal_slope": None if dfit is None else dfit.slope,
              "diagonal_r2": None if dfit is None else dfit.r2,
              "diagonal_verdict": dverdict.value, "C0": float(C0), "M_growth": M_growth}
    if verdict.ok and not dverdict.ok:
        verdict = dverdict
    return ConvergenceReport("kernel", model.hash(), (), list(p_list), rows, "residual", fit,
                             verdict, band, checks)


# -- symbol recovery / density ---------------------------------------------------------

def run_symbol_study(model, f: Symbol, p_list, solver: QuantumSpaceSolver,
                     tol: Tolerances = Tolerances()) -> ConvergenceReport:
    _require_torus(model, "symbol")
    if f.is_matrix:
        raise ValueError("symbol study needs a scalar symbol")
    sup_f = sy.sup_norm(f)
    rows = []
    for p in p_list:
        _, S = solver.solve(model, p)
        g0 = tp.symbol_recover(tp.toeplitz_assemble(S, f), S)
        err = float(np.max(np.abs(g0 - f(S.coords[:, 0], S.coords[:, 1]))))
        rows.append({**_base_row(S), "error": err, "relative_error": err / sup_f if sup_f else err})
    band = (None, tol.symbol_slope_max)
    fit, verdict = _fit_or_vanish([(r["p"], r["error"]) for r in rows], band, tol, zero_tol=1e-10)
    return ConvergenceReport("symbol", model.hash(), (f.name,), list(p_list), rows, "error", fit,
                             verdict, band, {"sup_f": sup_f})


def run_density_study(model, p_list, solver: QuantumSpaceSolver,
                      tol: Tolerances = Tolerances()) -> ConvergenceReport:
    """``sup_x |p^-1 P(x, x) - B(x)/2pi|`` relative to ``B0/2pi`` at each ``p``."""
    _require_torus(model, "density")
    rows = []
    for p in p_list:
        _, S = solver.solve(model, p)
        diag = np.sum(np.abs(S.basis) ** 2, axis=1)
        B = model.field(S.coords)
        dev = float(np.max(np.abs(diag / p - B / (2 * np.pi))))
        rows.append({**_base_row(S), "deviation": dev, "relative": dev * 2 * np.pi / model.B0})
    ok = all(r["relative"] <= tol.density_rel for r in rows)
    return ConvergenceReport("density", model.hash(), (), list(p_list), rows, "relative", None,
                             Verdict.PASS if ok else Verdict.FAIL, (0.0, tol.density_rel))


# -- decay ---------------------------------------------------------------------------

DECAY_WINDOW = (0.5, 1.4)  # in units of the magnetic length p^-1/2


def run_decay_study(model, p_list, solver: QuantumSpaceSolver, tol: Tolerances = Tolerances(),
                    window: tuple = DECAY_WINDOW) -> ConvergenceReport:
    """Fit ``log|P(x, x')|`` against ``-sqrt(p) d`` for ``sqrt(p) d`` in ``window``."""
    _require_torus(model, "decay")
    rows = []
    for p in p_list:
        bundle, S = solver.solve(model, p)
        D = bergman.distance_matrix(model, S.coords)
        K = bergman.full_kernel(S)
        eps0 = max(window[0] / np.sqrt(p), 2.0001 * bundle.h)
        mu, c, r2 = bergman.decay_fit(K, D, p, eps0, window[1] / np.sqrt(p))
        rows.append({**_base_row(S), "mu_hat": mu, "log_C": c, "r2": r2})
    mus = [r["mu_hat"] for r in rows]
    spread = (max(mus) - min(mus)) / max(mus)
    checks = {"spread": spread, "window": list(window)}
    ok = (all(m > 0 for m in mus) and all(r["r2"] >= tol.decay_r2_min for r in rows)
          and spread <= tol.decay_stability)
    return ConvergenceReport("decay", model.hash(), (), list(p_list), rows, "mu_hat", None,
                             Verdict.PASS if ok else Verdict.FAIL, (0.0, tol.decay_stability), checks)


# -- weighted boundedness --------------------------------------------------------------

def y_grid(k: int = 3) -> list:
    return [(i / k, j / k) for i in range(k) for j in range(k)]


def run_weighted_study(model, f: Symbol, p_list, solver: QuantumSpaceSolver,
                       tol: Tolerances = Tolerances(), n_alpha: int = 5, y_set=None) -> ConvergenceReport:
    """Largest weighted norm of ``T_f`` over ``|alpha| <= 0.5 sqrt(mu0 p)`` and ``y_set``,
    relative to the unweighted norm."""
    _require_torus(model, "weighted")
    y_set = y_grid() if y_set is None else y_set
    rows = []
    for p in p_list:
        _, S = solver.solve(model, p, r=f.rank or 1)
        T = tp.toeplitz_assemble(S, f)
        F = tp.FactoredOperator.from_toeplitz(S, T)
        amax = 0.5 * np.sqrt(mu0(model) * p)
        wmax = max(tp.weighted_norm(F, a, y, model, S.coords, S.rank, p=p)
                   for a in np.linspace(-amax, amax, n_alpha) for y in y_set)
        n0 = tp.op_norm(T)
        rows.append({**_base_row(S), "norm": n0, "weighted_max": wmax, "ratio": wmax / n0})
    ratios = [r["ratio"] for r in rows]
    spread = max(ratios) / min(ratios)
    ok = spread <= tol.weighted_ratio
    return ConvergenceReport("weighted", model.hash(), (f.name,), list(p_list), rows, "ratio", None,
                             Verdict.PASS if ok else Verdict.FAIL, (0.0, tol.weighted_ratio),
                             {"ratio_spread": spread, "y_points": len(y_set), "n_alpha": n_alpha})


# -- matrix-symbol ordering ---------------------------------------------------------------

def run_ordering_study(model, f: Symbol, g: Symbol, p_list, solver: QuantumSpaceSolver,
                       tol: Tolerances = Tolerances()) -> ConvergenceReport:
    """Product defects in both orders for noncommuting matrix symbols, and the
    separation ``|| T_fg - T_gf ||``."""
    _require_torus(model, "ordering")
    r = f.rank or g.rank
    if not r or (f.rank or r) != (g.rank or r):
        raise ValueError("ordering study needs matrix symbols of a common rank")
    rows = []
    for p in p_list:
        _, S = solver.solve(model, p, r=r)
        Tfg = tp.toeplitz_assemble(S, sy.product(f, g)).matrix
        Tgf = tp.toeplitz_assemble(S, sy.product(g, f)).matrix
        rows.append({**_base_row(S), "defect_fg": tp.product_defect(S, f, g),
                     "defect_gf": tp.product_defect(S, g, f), "separation": tp.op_norm(Tfg - Tgf)})
    fit_fg = rate_fit([(r_["p"], r_["defect_fg"]) for r_ in rows])
    fit_gf = rate_fit([(r_["p"], r_["defect_gf"]) for r_ in rows])
    v1, v2 = _banded(fit_fg, tol.ordering_slope, tol), _banded(fit_gf, tol.ordering_slope, tol)
    floor_ok = rows[-1]["separation"] >= tol.ordering_floor
    checks = {"slope_gf": fit_gf.slope, "r2_gf": fit_gf.r2, "separation_at_max_p": rows[-1]["separation"],
              "floor": tol.ordering_floor, "floor_ok": floor_ok}
    if Verdict.FAIL in (v1, v2) or not floor_ok:
        verdict = Verdict.FAIL
    elif Verdict.INCONCLUSIVE in (v1, v2):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.PASS
    return ConvergenceReport("ordering", model.hash(), (f.name, g.name), list(p_list), rows,
                             "defect_fg", fit_fg, verdict, tol.ordering_slope, checks)


# -- constant tracking ---------------------------------------------------------------------

def run_constant_tracking(model, p_list, solver: QuantumSpaceSolver, g: Symbol | None = None,
                          lambdas=(1, 2, 4, 8), points_per_period: int = 8) -> ConvergenceReport:
    """Product-defect constant ``median_p(p * defect)`` for ``f = cos(2 pi lambda x)``.

    Grids are refined so every oscillation spans at least
    ``points_per_period`` nodes. Descriptive only.
    """
    _require_torus(model, "constants")
    g = sy.sin_y(1) if g is None else g
    rows = []
    c_hat = {}
    slopes = {}
    for lam in lambdas:
        f = sy.cos_x(lam)
        vals = []
        for p in p_list:
            M = solver.policy.size(model, p, min_M=points_per_period * lam)
            _, S = solver.solve(model, p, M=M)
            d = tp.product_defect(S, f, g)
            vals.append((p, d))
            rows.append({**_base_row(S), "lambda": lam, "defect": d, "scaled": p * d})
        c_hat[str(lam)] = float(np.median([p * d for p, d in vals]))
        slopes[str(lam)] = rate_fit(vals).slope
    cs = [c_hat[str(l)] for l in lambdas]
    checks = {"c_hat": c_hat, "slopes": slopes,
              "nondecreasing": all(b >= a for a, b in zip(cs, cs[1:]))}
    return ConvergenceReport("constants", model.hash(), ("cos_x:lambda", g.name), list(p_list), rows,
                             "defect", None, Verdict.RECORDED, None, checks)


# -- Fock identities -----------------------------------------------------------------------

FOCK_SYMBOLS = ("one", "z", "zbar", "x", "y", "absz2", "gauss")


def run_fock_verify(p_list=(1, 2, 4, 8), B0: float = 1.0, K_max: int = 32) -> ConvergenceReport:
    """Closed forms vs quadrature, series vs closed kernel, Fock vs model kernel,
    interior ladder commutator."""
    rows = []
    sign = poisson_sign()
    for p in p_list:
        t = fock.FockTruncation(p, B0, K_max)
        quad = 0.0
        for name in FOCK_SYMBOLS:
            f = sy.from_name("gauss:1" if name == "gauss" else name)
            quad = max(quad, float(np.max(np.abs(fock.fock_toeplitz_quadrature(t, f)
                                                 - fock.fock_toeplitz_exact(t, name, 1.0)))))
        rng = np.random.default_rng(p)
        r = 2.0 / np.sqrt(t.scale)
        z = r * (rng.standard_normal(40) + 1j * rng.standard_normal(40)) / np.sqrt(2)
        zp = r * (rng.standard_normal(40) + 1j * rng.standard_normal(40)) / np.sqrt(2)
        closed, series = fock.fock_bergman_kernel(fock.FockTruncation(p, B0, 96), z, zp)
        ser = float(np.max(np.abs(closed - series)))
        par = bergman.ModelKernelParams((B0,))
        sp_ = np.sqrt(p)
        Z = np.stack([z.real, z.imag], -1)
        Zp = np.stack([zp.real, zp.imag], -1)
        model_dev = float(np.max(np.abs(closed / p - bergman.model_kernel(par, sp_ * Z, sp_ * Zp))))
        Tx = fock.fock_toeplitz_exact(t, "x")
        Ty = fock.fock_toeplitz_exact(t, "y")
        C = fock.interior(Tx @ Ty - Ty @ Tx, 1)
        comm = float(np.max(np.abs(C - 1j / p * (sign / B0) * np.eye(C.shape[0]))))
        rows.append({"p": p, "M": 0, "d": t.size, "quadrature": quad, "kernel_series": ser,
                     "model_kernel": model_dev, "commutator": comm})
    ok = all(r["quadrature"] <= 1e-10 and r["kernel_series"] <= 1e-10 and r["model_kernel"] <= 1e-12
             and r["commutator"] <= 1e-12 for r in rows)
    return ConvergenceReport("fock-verify", "fock_plane", FOCK_SYMBOLS, list(p_list), rows,
                             "quadrature", None, Verdict.PASS if ok else Verdict.FAIL, None,
                             {"poisson_sign": sign})
