"""Primal-dual interior-point solver for the norm-ball FLAME cone program.

The problem is written in the standard conic form

    minimise    c'x
    subject to  G x + s = h,   A x = b,   s in K

with ``x = [w (d), beta, xi (n), phi (n), rho (n), sigma (n)]`` and the cone
``K`` made of

* a nonnegative orthant of size ``3n`` holding ``xi``, ``phi`` and
  ``eta = phi - rho + sigma - C xi + theta sqrt(C)``;
* ``n`` three-dimensional Lorentz cones holding ``(rho_i, sigma_i, 1)``;
* one ``(d+1)``-dimensional Lorentz cone holding ``(1, w)``.

The equality rows are ``y_i (x_i'w + beta) + xi_i - rho_i - sigma_i = 0``.
Because ``rho^2 - sigma^2 >= 1`` and ``rho + sigma = r_i``, ``rho - sigma`` is
at least ``1/r_i``, and ``phi_i`` absorbs ``(1/r_i + C xi_i - theta sqrt C)_+``.

The algorithm is a homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector, in the style of CVXOPT's
``conelp``.  The Newton systems are solved by eliminating the per-sample
4x4 blocks, which leaves one dense ``(d+1) x (d+1)`` system per solve, so an
iteration costs ``O(n d^2 + d^3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..core import InvalidArgument, SolverFailure

__all__ = ["SocpProblem", "SocpSolution", "solve_socp"]

# Per-sample inequality rows over (xi, phi, rho, sigma):
#   orthant:  -xi, -phi, C xi - phi + rho - sigma
#   cone:     -rho, -sigma, 0
_P = np.array([1.0, 0.0, -1.0, -1.0])  # equality coefficients over (xi, phi, rho, sigma)


@dataclass(frozen=True, eq=False)
class SocpProblem:
    """Data of one norm-ball FLAME cone program (matrix-free operators)."""

    X: np.ndarray
    y: np.ndarray
    C: float
    theta: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise InvalidArgument("SocpProblem needs X (n x d) and y (n,)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "C", float(self.C))
        object.__setattr__(self, "theta", float(self.theta))
        # rows a_i = y_i (x_i, 1) of the equality constraint restricted to (w, beta)
        object.__setattr__(self, "_Ay", np.hstack([X * y[:, None], y[:, None]]))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def nx(self) -> int:
        return self.d + 1 + 4 * self.n

    @property
    def nz(self) -> int:
        return 6 * self.n + self.d + 1

    @property
    def degree(self) -> int:
        """Barrier degree: one per orthant entry, one per Lorentz cone."""
        return 3 * self.n + self.n + 1

    # slices into x
    def split_x(self, x):
        d, n = self.d, self.n
        o = d + 1
        return x[:d], x[d], x[o:o + n], x[o + n:o + 2 * n], x[o + 2 * n:o + 3 * n], x[o + 3 * n:]

    def split_z(self, z):
        n = self.n
        return z[:3 * n], z[3 * n:6 * n].reshape(n, 3), z[6 * n:]

    @property
    def c(self) -> np.ndarray:
        c = np.zeros(self.nx)
        o = self.d + 1
        c[o + self.n:o + 2 * self.n] = 1.0
        return c

    @property
    def h(self) -> np.ndarray:
        n = self.n
        h = np.zeros(self.nz)
        h[2 * n:3 * n] = self.theta * math.sqrt(self.C)
        h[3 * n + 2:6 * n:3] = 1.0
        h[6 * n] = 1.0
        return h

    @property
    def b(self) -> np.ndarray:
        return np.zeros(self.n)

    def G(self, x) -> np.ndarray:
        w, _, xi, phi, rho, sig = self.split_x(x)
        n = self.n
        out = np.empty(self.nz)
        out[:n] = -xi
        out[n:2 * n] = -phi
        out[2 * n:3 * n] = self.C * xi - phi + rho - sig
        q = out[3 * n:6 * n].reshape(n, 3)
        q[:, 0] = -rho
        q[:, 1] = -sig
        q[:, 2] = 0.0
        out[6 * n] = 0.0
        out[6 * n + 1:] = -w
        return out

    def Gt(self, z) -> np.ndarray:
        orth, q, g = self.split_z(z)
        n, d = self.n, self.d
        zx, zp, ze = orth[:n], orth[n:2 * n], orth[2 * n:]
        out = np.empty(self.nx)
        out[:d] = -g[1:]
        out[d] = 0.0
        o = d + 1
        out[o:o + n] = -zx + self.C * ze
        out[o + n:o + 2 * n] = -zp - ze
        out[o + 2 * n:o + 3 * n] = ze - q[:, 0]
        out[o + 3 * n:] = -ze - q[:, 1]
        return out

    def A(self, x) -> np.ndarray:
        d = self.d
        _, _, xi, _, rho, sig = self.split_x(x)
        return self._Ay @ x[:d + 1] + xi - rho - sig

    def At(self, v) -> np.ndarray:
        d, n = self.d, self.n
        out = np.zeros(self.nx)
        out[:d + 1] = self._Ay.T @ v
        o = d + 1
        out[o:o + n] = v
        out[o + 2 * n:o + 3 * n] = -v
        out[o + 3 * n:] = -v
        return out


@dataclass(frozen=True)
class SocpSolution:
    """Raw output of :func:`solve_socp` (already divided by the embedding tau)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    converged: bool
    status: str
    multiplier: float
    """Dual value on the ``(1, w)`` cone, i.e. the multiplier of ``||w|| <= 1``."""


# --------------------------------------------------------------------------
# cone algebra
# --------------------------------------------------------------------------


class _Cones:
    """Layout helper: orthant of size ``no``, ``nq`` 3-cones, one ``ng``-cone."""

    def __init__(self, no: int, nq: int, ng: int):
        self.no, self.nq, self.ng = no, nq, ng
        self.q0 = no
        self.g0 = no + 3 * nq

    def parts(self, v):
        return v[:self.no], v[self.q0:self.g0].reshape(self.nq, 3), v[self.g0:]

    def join(self, o, q, g):
        return np.concatenate([o, q.reshape(-1), g])

    def identity(self) -> np.ndarray:
        e = np.zeros(self.no + 3 * self.nq + self.ng)
        e[:self.no] = 1.0
        e[self.q0:self.g0:3] = 1.0
        e[self.g0] = 1.0
        return e

    def min_eig(self, v) -> float:
        o, q, g = self.parts(v)
        vals = [np.min(o) if o.size else np.inf]
        if self.nq:
            vals.append(np.min(q[:, 0] - np.linalg.norm(q[:, 1:], axis=1)))
        vals.append(g[0] - np.linalg.norm(g[1:]))
        return float(min(vals))

    def inner(self, u, v) -> float:
        return float(u @ v)

    def prod(self, u, v) -> np.ndarray:
        """Jordan product ``u o v``."""
        uo, uq, ug = self.parts(u)
        vo, vq, vg = self.parts(v)
        oq = np.empty_like(uq)
        oq[:, 0] = np.einsum("ij,ij->i", uq, vq)
        oq[:, 1:] = uq[:, :1] * vq[:, 1:] + vq[:, :1] * uq[:, 1:]
        og = np.empty_like(ug)
        og[0] = ug @ vg
        og[1:] = ug[0] * vg[1:] + vg[0] * ug[1:]
        return self.join(uo * vo, oq, og)

    def div(self, lam, v) -> np.ndarray:
        """Solve ``lam o x = v`` for ``x``."""
        lo, lq, lg = self.parts(lam)
        vo, vq, vg = self.parts(v)
        xq = np.empty_like(vq)
        det = _soc_det(lq)
        xq[:, 0] = (lq[:, 0] * vq[:, 0] - np.einsum("ij,ij->i", lq[:, 1:], vq[:, 1:])) / det
        xq[:, 1:] = (vq[:, 1:] - xq[:, :1] * lq[:, 1:]) / lq[:, :1]
        xg = np.empty_like(vg)
        detg = float(_soc_det(lg[None, :])[0])
        xg[0] = (lg[0] * vg[0] - lg[1:] @ vg[1:]) / detg
        xg[1:] = (vg[1:] - xg[0] * lg[1:]) / lg[0]
        return self.join(vo / lo, xq, xg)

    def max_step(self, v, dv) -> float:
        """Largest ``a`` with ``v + a dv`` in the cone (``inf`` if unbounded)."""
        vo, vq, vg = self.parts(v)
        do, dq, dg = self.parts(dv)
        best = math.inf
        neg = do < 0
        if np.any(neg):
            best = min(best, float(np.min(-vo[neg] / do[neg])))
        if self.nq:
            best = min(best, _soc_steps(vq, dq))
        best = min(best, _soc_steps(vg[None, :], dg[None, :]))
        return best


def _soc_steps(v, dv) -> float:
    """Row-wise largest step keeping ``v + a dv`` in the Lorentz cone.

    With ``q(t) = (v0 + t dv0)^2 - ||v1 + t dv1||^2 = a t^2 + 2 b t + c`` and
    ``c > 0``, the boundary is hit at the smallest positive root of ``q``.
    """
    a = dv[:, 0] ** 2 - np.einsum("ij,ij->i", dv[:, 1:], dv[:, 1:])
    b = v[:, 0] * dv[:, 0] - np.einsum("ij,ij->i", v[:, 1:], dv[:, 1:])
    c = np.maximum(_soc_det(v), 0.0)
    disc = b * b - a * c
    bounded = (a < 0) | ((b < 0) & (disc >= 0))
    if not np.any(bounded):
        return math.inf
    sq = np.sqrt(np.maximum(disc[bounded], 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = c[bounded] / (sq - b[bounded])
    # a row sitting exactly on the boundary (c == 0) allows no step
    return float(np.min(np.where(np.isnan(t), 0.0, t)))


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-1} s = lam``."""

    def __init__(self, cones: _Cones, s, z):
        self.cones = cones
        so, sq, sg = cones.parts(s)
        zo, zq, zg = cones.parts(z)
        self.wo = np.sqrt(so / zo)
        self.q_wbar, self.q_eta = _nt_soc(sq, zq)
        gw, ge = _nt_soc(sg[None, :], zg[None, :])
        self.g_wbar, self.g_eta = gw[0], float(ge[0])
        self.lam = self.apply(z)

    @classmethod
    def identity(cls, cones: _Cones) -> "_Scaling":
        obj = cls.__new__(cls)
        obj.cones = cones
        obj.wo = np.ones(cones.no)
        wq = np.zeros((cones.nq, 3))
        wq[:, 0] = 1.0
        obj.q_wbar, obj.q_eta = wq, np.ones(cones.nq)
        wg = np.zeros(cones.ng)
        wg[0] = 1.0
        obj.g_wbar, obj.g_eta = wg, 1.0
        obj.lam = None
        return obj

    def apply(self, v, inverse=False) -> np.ndarray:
        vo, vq, vg = self.cones.parts(v)
        if inverse:
            oo = vo / self.wo
            oq = _soc_apply(self.q_wbar, self.q_eta, vq, inverse=True)
            og = _soc_apply(self.g_wbar[None, :], np.array([self.g_eta]), vg[None, :], inverse=True)[0]
        else:
            oo = vo * self.wo
            oq = _soc_apply(self.q_wbar, self.q_eta, vq)
            og = _soc_apply(self.g_wbar[None, :], np.array([self.g_eta]), vg[None, :])[0]
        return self.cones.join(oo, oq, og)

    def inverse_blocks(self):
        """Explicit ``W^{-1}`` blocks: orthant diagonal, stacked 3x3, and (ng x ng)."""
        Mq = _soc_matrix(self.q_wbar, self.q_eta, inverse=True)
        Mg = _soc_matrix(self.g_wbar[None, :], np.array([self.g_eta]), inverse=True)[0]
        return 1.0 / self.wo, Mq, Mg


def _soc_det(v):
    """``v0^2 - ||v1||^2`` in the factored form, which cancels less."""
    nrm = np.linalg.norm(v[:, 1:], axis=1)
    return (v[:, 0] - nrm) * (v[:, 0] + nrm)


def _nt_soc(s, z):
    """Row-wise NT scaling point ``wbar`` and scale ``eta`` for Lorentz cones."""
    ss = _soc_det(s)
    zz = _soc_det(z)
    if np.any(ss <= 0) or np.any(zz <= 0):
        raise FloatingPointError("iterate left the cone interior")
    sn = np.sqrt(ss)
    zn = np.sqrt(zz)
    sbar = s / sn[:, None]
    zbar = z / zn[:, None]
    gamma = np.sqrt((1.0 + np.einsum("ij,ij->i", sbar, zbar)) / 2.0)
    wbar = sbar.copy()
    wbar[:, 0] += zbar[:, 0]
    wbar[:, 1:] -= zbar[:, 1:]
    wbar /= 2.0 * gamma[:, None]
    eta = np.sqrt(sn / zn)
    return wbar, eta


def _soc_apply(wbar, eta, v, inverse=False):
    """Apply ``W = eta [[w0, w1'], [w1, I + w1 w1'/(1+w0)]]`` (or its inverse)."""
    w0 = wbar[:, 0]
    w1 = wbar[:, 1:]
    v0 = v[:, 0]
    v1 = v[:, 1:]
    sgn = -1.0 if inverse else 1.0
    w1v1 = np.einsum("ij,ij->i", w1, v1)
    out = np.empty_like(v)
    out[:, 0] = w0 * v0 + sgn * w1v1
    out[:, 1:] = sgn * v0[:, None] * w1 + v1 + (w1v1 / (1.0 + w0))[:, None] * w1
    if inverse:
        out /= eta[:, None]
    else:
        out *= eta[:, None]
    return out


def _soc_matrix(wbar, eta, inverse=False):
    k = wbar.shape[1]
    w0 = wbar[:, 0]
    w1 = wbar[:, 1:]
    sgn = -1.0 if inverse else 1.0
    M = np.zeros((wbar.shape[0], k, k))
    M[:, 0, 0] = w0
    M[:, 0, 1:] = sgn * w1
    M[:, 1:, 0] = sgn * w1
    M[:, 1:, 1:] = np.eye(k - 1)[None] + np.einsum("ni,nj->nij", w1, w1) / (1.0 + w0)[:, None, None]
    scale = (1.0 / eta) if inverse else eta
    return M * scale[:, None, None]


# --------------------------------------------------------------------------
# structured KKT solver
# --------------------------------------------------------------------------


class _KKT:
    """Solves ``[[0, A', G'], [A, 0, 0], [G, 0, -W^2]] u = (px, py, pz)``."""

    def __init__(self, prob: SocpProblem, cones: _Cones, W: _Scaling):
        self.prob, self.cones, self.W = prob, cones, W
        n, d, C = prob.n, prob.d, prob.C
        io, Mq, Mg = W.inverse_blocks()
        # scaled per-sample rows W^{-1} G_i (6 x 4) over (xi, phi, rho, sigma);
        # H_i = (W^{-1}G_i)'(W^{-1}G_i) is handled through its R factor so the
        # condition number is never squared explicitly
        Gs = np.zeros((n, 6, 4))
        Gs[:, 0, 0] = -io[:n]
        Gs[:, 1, 1] = -io[n:2 * n]
        Gs[:, 2, :] = io[2 * n:, None] * np.array([C, -1.0, 1.0, -1.0])[None, :]
        Gs[:, 3:, 2:] = -Mq[:, :, :2]
        R = np.linalg.qr(Gs, mode="r")
        self.R = R
        self.Rt = np.swapaxes(R, 1, 2)
        Hp = self._hinv(np.broadcast_to(_P, (n, 4)))
        self.Hinv_p = Hp
        self.svals = Hp @ _P
        if np.any(~np.isfinite(self.svals)) or np.any(self.svals <= 0):
            raise FloatingPointError("singular per-sample block")
        Ay = prob._Ay
        Bg = Mg[:, 1:]
        M = (Ay.T * (1.0 / self.svals)) @ Ay
        M[:d, :d] += Bg.T @ Bg
        self.M = M
        try:
            self.chol = scipy.linalg.cho_factor(M, check_finite=False)
            self.use_chol = True
        except np.linalg.LinAlgError:
            self.use_chol = False
            self.lu = scipy.linalg.lu_factor(M + 1e-14 * np.trace(M) / (d + 1) * np.eye(d + 1))

    def _hinv(self, v):
        t = np.linalg.solve(self.Rt, v[..., None])
        return np.linalg.solve(self.R, t)[..., 0]

    def _Gs(self, dx):
        """``W^{-1} G dx``."""
        return self.W.apply(self.prob.G(dx), inverse=True)

    def _Gst(self, v):
        """``G' W^{-1} v`` (``W`` is symmetric)."""
        return self.prob.Gt(self.W.apply(v, inverse=True))

    def _solve_once(self, px, py, pzs):
        prob = self.prob
        n, d = prob.n, prob.d
        r = px + self._Gst(pzs)
        ru = r[:d + 1]
        rv = np.stack([r[d + 1 + k * n:d + 1 + (k + 1) * n] for k in range(4)], axis=1)
        Hinv_r = self._hinv(rv)
        pHr = Hinv_r @ _P
        rhs = ru - prob._Ay.T @ ((pHr - py) / self.svals)
        if self.use_chol:
            du = scipy.linalg.cho_solve(self.chol, rhs, check_finite=False)
        else:
            du = scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)
        dy = (prob._Ay @ du + pHr - py) / self.svals
        dv = Hinv_r - self.Hinv_p * dy[:, None]
        dx = np.concatenate([du, dv.T.reshape(-1)])
        uz = self._Gs(dx) - pzs
        return dx, dy, uz

    def solve(self, px, py, pzs, refine: int = 3):
        """Solve the scaled system; ``pzs = W^{-1} pz`` in, ``W dz`` out.

        In the scaled unknowns the system reads
        ``A'dy + G'W^{-1} uz = px``, ``A dx = py``, ``W^{-1}G dx - uz = pzs``,
        whose residuals are measured for iterative refinement.
        """
        prob = self.prob
        dx, dy, uz = self._solve_once(px, py, pzs)
        scale = max(np.abs(px).max(initial=0), np.abs(py).max(initial=0),
                    np.abs(pzs).max(initial=0), 1e-300)
        for _ in range(refine):
            ex = px - prob.At(dy) - self._Gst(uz)
            ey = py - prob.A(dx)
            ez = pzs - self._Gs(dx) + uz
            err = max(np.abs(ex).max(initial=0), np.abs(ey).max(initial=0), np.abs(ez).max(initial=0))
            if err <= 1e-15 * scale:
                break
            cx, cy, cz = self._solve_once(ex, ey, ez)
            dx, dy, uz = dx + cx, dy + cy, uz + cz
        return dx, dy, uz


# --------------------------------------------------------------------------
# main loop
# --------------------------------------------------------------------------


def solve_socp(prob: SocpProblem, tol: float = 1e-8, max_iter: int = 100, step: float = 0.99):
    """Solve the FLAME cone program; returns a :class:`SocpSolution`.

    Stops when the relative primal residual, dual residual and duality gap
    are all at most ``tol``.  Raises :class:`SolverFailure` if the iteration
    breaks down before reaching a reasonable accuracy; if it merely runs out of
    iterations the best point is returned with ``converged=False``.
    """
    cones = _Cones(3 * prob.n, prob.n, prob.d + 1)
    c, h, b = prob.c, prob.h, prob.b
    e = cones.identity()
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, float(np.linalg.norm(h)))

    # starting point: least-squares solves with W = I, then shift into the cone
    kkt = _KKT(prob, cones, _Scaling.identity(cones))
    x, _, uz = kkt.solve(np.zeros(prob.nx), b, h)
    s = -uz
    _, y, z = kkt.solve(-c, np.zeros(prob.n), np.zeros(prob.nz))
    for v in (s, z):
        t = -cones.min_eig(v)
        if t >= -1e-8 * max(float(np.linalg.norm(v)), 1.0):
            v += (1.0 + t) * e
    tau, kappa = 1.0, 1.0

    status = "max_iter"
    converged = False
    best = None
    it = 0
    for it in range(max_iter + 1):
        rx = prob.At(y) + prob.Gt(z) + c * tau
        ry = -prob.A(x) + b * tau
        rz = -prob.G(x) + h * tau - s
        cx, by_hz = float(c @ x), float(b @ y + h @ z)
        rk = -cx - by_hz - kappa
        pcost = cx / tau
        dcost = -by_hz / tau
        gap = float(s @ z) / tau ** 2
        pres = max(float(np.linalg.norm(ry)) / resy0, float(np.linalg.norm(rz)) / resz0) / tau
        dres = float(np.linalg.norm(rx)) / resx0 / tau
        gap_res = gap / max(1.0, min(abs(pcost), abs(dcost)))
        worst = max(pres, dres, gap_res)
        if best is None or worst <= best[-1]:
            best = (x / tau, y / tau, z / tau, s / tau, pcost, dcost, pres, dres, gap_res, it, worst)
        if worst <= tol:
            status, converged = "optimal", True
            break
        if it == max_iter:
            break
        if it - best[9] >= 5 and best[-1] < 1e-6:
            # residuals stopped improving close to the optimum: numerical floor
            status = "stalled"
            break

        mu = (float(s @ z) + tau * kappa) / (prob.degree + 1)
        try:
            W = _Scaling(cones, s, z)
            kkt = _KKT(prob, cones, W)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            status = f"breakdown: {exc}"
            break
        lam = W.lam
        lamsq = cones.prod(lam, lam)

        x1, y1, uz1 = kkt.solve(-c, b, W.apply(h, inverse=True))
        z1 = W.apply(uz1, inverse=True)
        denom = kappa / tau - (c @ x1 + b @ y1 + h @ z1)

        def direction(eta, ds, dk):
            q = cones.div(lam, ds)
            x2, y2, uz2 = kkt.solve(-eta * rx, eta * ry, W.apply(eta * rz, inverse=True) - q)
            z2 = W.apply(uz2, inverse=True)
            dtau = (-eta * rk + dk / tau + c @ x2 + b @ y2 + h @ z2) / denom
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            uz = uz2 + dtau * uz1          # W dz
            us = q - uz                    # W^{-1} ds
            dkap = (dk - kappa * dtau) / tau
            return dx, dy, uz, us, float(dtau), float(dkap)

        def max_alpha(us, uz, dtau, dkap):
            a = min(cones.max_step(lam, us), cones.max_step(lam, uz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        # predictor
        aff = direction(1.0, -lamsq, -tau * kappa)
        a_aff = min(1.0, max_alpha(aff[3], aff[2], aff[4], aff[5]))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        ds_corr = -lamsq - cones.prod(aff[3], aff[2]) + sigma * mu * e
        dk_corr = -tau * kappa - aff[4] * aff[5] + sigma * mu
        dx, dy, uz, us, dtau, dkap = direction(1.0 - sigma, ds_corr, dk_corr)
        alpha = min(1.0, step * max_alpha(us, uz, dtau, dkap))
        if not math.isfinite(alpha) or alpha <= 0:
            status = "breakdown: zero step"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * W.apply(uz, inverse=True)
        s = s + alpha * W.apply(us)
        tau += alpha * dtau
        kappa += alpha * dkap
        if not (tau > 0 and kappa >= 0 and np.all(np.isfinite(x))):
            status = "breakdown: non-finite iterate"
            break

    xs, ys, zs, ss, pcost, dcost, pres, dres, gap_res, best_it, worst = best
    if not converged and worst > 1e-4 and status != "max_iter":
        raise SolverFailure(
            f"interior-point method failed ({status}) at iteration {it}",
            diagnostics={"primal_residual": pres, "dual_residual": dres, "gap": gap_res},
        )
    return SocpSolution(
        x=xs, y=ys, z=zs, s=ss,
        primal_objective=pcost, dual_objective=dcost,
        primal_residual=pres, dual_residual=dres, gap=gap_res,
        iterations=best_it, converged=converged, status=status,
        multiplier=float(zs[6 * prob.n]),
    )
