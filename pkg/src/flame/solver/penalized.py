"""Penalized FLAME fit: projected subgradient descent with an exact polish.

Objective (``g = (w, beta)``, ``a_i = y_i (x_i, 1)``)::

    F(g) = (1/n) sum_i L(a_i'g) + (lam/2) ||w||^2

The FLAME loss is ``max(l(u), 0)`` where ``l(u) = V(u) - theta sqrt(C)`` is
the shifted DWD loss, which is C^1 and convex.  So the only non-smooth points
are the margins equal to ``k = 1/(theta sqrt C)``.

The main loop is a projected subgradient method with Polyak-type steps.  Every
optimum has ``(lam/2)||w||^2 <= F(0)``, so ``w`` is projected onto the ball
of that radius, and the best iterate seen so far is tracked.  A plain
subgradient method only reaches modest accuracy, so at a few checkpoints the
best iterate is handed to a primal active-set Newton method.  That method
treats samples sitting on the kink as equality constraints ``a_i'g = k`` and
solves the smooth remainder.  A polished point is accepted only if it does not
increase ``F``.  Convergence is certified by the norm of the minimum-norm
element of the epsilon-subdifferential, computed with a bounded least-squares
solve.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import lsq_linear

from ..core import (
    FlameConfig,
    Formulation,
    InvalidArgument,
    LabeledDataset,
    LinearModel,
    zero_branch_start,
)
from ._common import FitDiagnostics, canonical_intercept, row_space_basis

__all__ = ["fit_penalized", "subgradient_certificate"]

_CHECKPOINTS = (20, 100, 500, 2000, 10_000, 30_000)


class _Problem:
    """Vectorised loss pieces for one penalized instance."""

    def __init__(self, A: np.ndarray, C: float, theta: float, lam: float, d: int):
        self.A = A
        self.n = A.shape[0]
        self.d = d
        self.C = C
        self.rc = math.sqrt(C)
        self.knee = 1.0 / self.rc
        self.theta = theta
        self.k = zero_branch_start(C, theta)
        self.lam = lam
        self.ridge = np.zeros(A.shape[1])
        self.ridge[:d] = 1.0

    # shifted DWD loss l(u) and its derivatives (valid on every branch)
    def ell(self, u):
        with np.errstate(divide="ignore"):
            return np.where(u <= self.knee, (2.0 - self.theta) * self.rc - self.C * u,
                            1.0 / np.maximum(u, self.knee) - self.theta * self.rc)

    def ell1(self, u):
        return np.where(u < self.knee, -self.C, -1.0 / np.maximum(u, self.knee) ** 2)

    def ell2(self, u):
        return np.where(u < self.knee, 0.0, 2.0 / np.maximum(u, self.knee) ** 3)

    def loss(self, u):
        return np.maximum(self.ell(u), 0.0) if math.isfinite(self.k) else self.ell(u)

    def objective(self, g, u=None) -> float:
        if u is None:
            u = self.A @ g
        w = g[:self.d]
        return float(np.mean(self.loss(u)) + 0.5 * self.lam * (w @ w))

    def subgradient(self, g, u=None):
        if u is None:
            u = self.A @ g
        slope = np.where(u >= self.k, 0.0, self.ell1(u))
        return self.A.T @ slope / self.n + self.lam * self.ridge * g


def subgradient_certificate(prob: _Problem, g, eps: float | None = None) -> float:
    """Norm of the minimum-norm element of the eps-subdifferential of ``F`` at ``g``."""
    u = prob.A @ g
    fixed = prob.lam * prob.ridge * g
    if not math.isfinite(prob.k):
        return float(np.linalg.norm(fixed + prob.A.T @ prob.ell1(u) / prob.n))
    if eps is None:
        eps = 1e-8 * max(1.0, prob.k)
    near = np.abs(u - prob.k) <= eps
    far = ~near
    slope = np.where(u[far] >= prob.k, 0.0, prob.ell1(u[far]))
    fixed = fixed + prob.A[far].T @ slope / prob.n
    if not np.any(near):
        return float(np.linalg.norm(fixed))
    lo = -1.0 / prob.k ** 2
    B = prob.A[near].T / prob.n
    res = lsq_linear(B, -fixed, bounds=(np.full(B.shape[1], lo), np.zeros(B.shape[1])),
                     method="bvls", lsq_solver="exact")
    return float(np.linalg.norm(B @ res.x + fixed))


def _active_set_newton(prob: _Problem, g0: np.ndarray, max_iter: int = 400):
    """Primal active-set Newton polish starting from ``g0``.

    The working set ``K`` holds samples pinned to the kink (``a_i'g = k``);
    ``Z`` holds samples beyond it (zero loss) and ``P`` the rest (loss ``l``).
    Each step is an equality-constrained Newton step on the smooth part,
    shortened by a ratio test so no sample crosses the kink unnoticed.
    """
    A, n = prob.A, prob.n
    p = A.shape[1]
    kfin = math.isfinite(prob.k)
    g = g0.copy()
    u = A @ g
    state = np.zeros(n, dtype=np.int8)  # 0 = P, 1 = K, 2 = Z
    if kfin:
        state[u >= prob.k] = 2
    lam_ridge = prob.lam * prob.ridge
    iters = 0
    for iters in range(1, max_iter + 1):
        P = state == 0
        K = np.flatnonzero(state == 1)
        uP = u[P]
        grad = A[P].T @ prob.ell1(uP) / n + lam_ridge * g
        H = (A[P].T * (prob.ell2(uP) / n)) @ A[P] + np.diag(lam_ridge)
        H += (1e-12 * (np.trace(H) / p) + 1e-300) * np.eye(p)
        m = K.size
        if m:
            AK = A[K]
            KKT = np.zeros((p + m, p + m))
            KKT[:p, :p] = H
            KKT[:p, p:] = AK.T
            KKT[p:, :p] = AK
            rhs = np.concatenate([-grad, prob.k - AK @ g])
            sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
            step, mult = sol[:p], sol[p:]
        else:
            step = np.linalg.solve(H, -grad)
            mult = np.zeros(0)
        decrement = float(-grad @ step)
        tiny = 1e-13 * (1.0 + float(np.linalg.norm(g)))
        if np.linalg.norm(step) <= tiny or (m == 0 and decrement <= 1e-22):
            if m == 0:
                return g, iters
            t = n * mult
            lo = -1.0 / prob.k ** 2
            viol_hi = t - 0.0
            viol_lo = lo - t
            worst = int(np.argmax(np.maximum(viol_hi, viol_lo)))
            if max(viol_hi[worst], viol_lo[worst]) <= 1e-12 * (1.0 + abs(lo)):
                return g, iters
            # release the most violated kink constraint
            state[K[worst]] = 2 if viol_hi[worst] > 0 else 0
            continue
        du = A @ step
        alpha_block = math.inf
        block = -1
        if kfin:
            P = state == 0
            Z = state == 2
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(P & (du > 0), (prob.k - u) / du,
                                 np.where(Z & (du < 0), (prob.k - u) / du, np.inf))
            ratio = np.maximum(ratio, 0.0)
            block = int(np.argmin(ratio))
            alpha_block = float(ratio[block])
        alpha = min(1.0, alpha_block)
        if alpha_block <= 1e-14:
            # degenerate block: pin the sample to the kink and re-solve
            state[block] = 1
            continue
        # Armijo on the smooth restricted objective (equal to F up to the block)
        Pm = state == 0

        def f_restricted(gg, uu):
            w = gg[:prob.d]
            return float(np.sum(prob.ell(uu[Pm])) / n + 0.5 * prob.lam * (w @ w))

        f0 = f_restricted(g, u)
        slope = float(grad @ step)
        a = alpha
        while True:
            g_new = g + a * step
            u_new = u + a * du
            if f_restricted(g_new, u_new) <= f0 + 1e-4 * a * slope + 1e-15 * abs(f0) or a < 1e-14:
                break
            a *= 0.5
        if a < 1e-14:
            return g, iters
        g, u = g_new, A @ g_new
        if a == alpha_block and block >= 0:
            state[block] = 1
    return g, iters


def fit_penalized(data: LabeledDataset, config: FlameConfig):
    """Minimise mean FLAME loss + (lam/2)||w||^2; returns (LinearModel, FitDiagnostics)."""
    if config.formulation is not Formulation.PENALIZED:
        raise InvalidArgument("fit_penalized requires formulation=penalized")
    data.require_both_classes()
    cfg = config.resolve(data)
    C, theta, lam = cfg.C, cfg.theta, cfg.lam
    tol, max_iter = cfg.resolved_tol, cfg.resolved_max_iter

    basis = row_space_basis(data.features)
    Xr = data.features if basis is None else data.features @ basis
    y = data.labels.astype(float)
    dr = Xr.shape[1]
    A = np.hstack([Xr, np.ones((data.n, 1))]) * y[:, None]
    prob = _Problem(A, C, theta, lam, dr)

    g = np.zeros(dr + 1)
    F0 = prob.objective(g)
    radius = math.sqrt(2.0 * F0 / lam)
    best_g, best_F = g.copy(), F0
    history = [F0]
    certificate = math.inf
    converged = False
    checkpoints = set(c for c in _CHECKPOINTS if c < max_iter) | {max_iter}
    it = 0
    for it in range(1, max_iter + 1):
        u = A @ g
        F = prob.objective(g, u)
        sg = prob.subgradient(g, u)
        norm2 = float(sg @ sg)
        if norm2 == 0.0:
            best_g, best_F = g.copy(), min(best_F, F)
            history.append(best_F)
            certificate = subgradient_certificate(prob, best_g)
            converged = certificate <= tol
            if converged:
                break
        else:
            delta = 0.1 * F0 * 10.0 / (10.0 + it)
            step = (F - best_F + delta) / norm2
            g = g - step * sg
            w = g[:dr]
            wn = float(np.linalg.norm(w))
            if wn > radius:
                g[:dr] = w * (radius / wn)
            Fn = prob.objective(g)
            if Fn < best_F:
                best_g, best_F = g.copy(), Fn
            history.append(best_F)
        if it in checkpoints:
            polished, _ = _active_set_newton(prob, best_g)
            Fp = prob.objective(polished)
            if Fp <= best_F + 1e-15 * max(1.0, abs(best_F)):
                best_g, best_F = polished, min(Fp, best_F)
                g = polished.copy()
                history[-1] = best_F
            certificate = subgradient_certificate(prob, best_g)
            if certificate <= tol:
                converged = True
                break

    if not math.isfinite(certificate):
        certificate = subgradient_certificate(prob, best_g)
        converged = certificate <= tol
    w_r = best_g[:dr]
    direction = w_r if basis is None else basis @ w_r
    z = data.features @ direction
    beta = canonical_intercept(z, y, C, theta, float(best_g[dr]))
    model = LinearModel(direction, beta, cfg)
    diag = FitDiagnostics(
        objective=best_F,
        iterations=it,
        primal_residual=0.0,
        dual_residual=certificate,
        converged=converged,
        status="optimal" if converged else "max_iter",
        history=tuple(history),
    )
    return model, diag
