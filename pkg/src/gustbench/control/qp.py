"""
Dense strictly convex QP solver (dual active-set, Goldfarb-Idnani type).

Solves ``min 0.5 x'Hx + g'x  s.t.  A x <= b`` for positive definite ``H``.
The iteration starts at the unconstrained minimizer and repeatedly adds the
lowest-index violated constraint, dropping active constraints whose
multipliers would turn negative. Every iterate is dual feasible, so the
first primal-feasible iterate is optimal.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from gustbench.errors import InfeasibleQPError


@dataclass
class QpResult:
    x: np.ndarray
    lam: np.ndarray
    active: list
    iterations: int
    status: str  # "optimal" or "suboptimal"
    stationarity: float
    primal_violation: float
    complementarity: float
    objective: float

    @property
    def kkt_residual(self) -> float:
        return max(self.stationarity, self.primal_violation, self.complementarity)


def kkt_residuals(H, g, A, b, x, lam):
    stat = H @ x + g
    if A.shape[0]:
        stat = stat + A.T @ lam
        viol = float(max(0.0, np.max(A @ x - b)))
        comp = float(np.max(np.abs(lam * (A @ x - b))))
    else:
        viol = comp = 0.0
    return float(np.max(np.abs(stat))) if stat.size else 0.0, viol, comp


def solve_dense_qp(H, g, A=None, b=None, max_iter=500, tol=1e-10) -> QpResult:
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m = A.shape[0]

    cf = cho_factor(H, lower=True, check_finite=False)
    x = -cho_solve(cf, g, check_finite=False)
    # constraints as N'x >= c; G = N' H^-1 N is reused by every iteration
    N = -A.T
    c = -b
    HinvN = cho_solve(cf, N, check_finite=False) if m else np.zeros((n, 0))
    G = N.T @ HinvN

    active: list[int] = []
    u = np.zeros(0)
    # Minv[:na, :na] holds the inverse of G restricted to the active set
    cap = min(m, n) + 1
    Minv = np.zeros((cap, cap))
    HNa = np.zeros((n, cap))  # active columns of H^-1 N
    NT = np.ascontiguousarray(N.T)
    na = 0
    it = 0
    changes = 0
    status = "optimal"
    scale = 1.0 + np.abs(b)
    s = N.T @ x - c

    def refactor():
        Gaa = G[np.ix_(active, active)]
        try:
            Minv[:na, :na] = np.linalg.inv(Gaa)
        except np.linalg.LinAlgError:
            Minv[:na, :na] = np.linalg.pinv(Gaa)

    while True:
        viol = np.flatnonzero(s < -tol * scale)
        if viol.size == 0:
            break
        if it >= max_iter:
            status = "suboptimal"
            break
        p = int(viol[0])
        u_p = 0.0
        while True:
            it += 1
            if na:
                gp = G[active, p]
                r = Minv[:na, :na] @ gp
                zn = G[p, p] - gp @ r
                if zn <= 1e-8 * G[p, p] and changes:
                    # near-dependent step: refactor instead of trusting the updates
                    refactor()
                    changes = 0
                    r = Minv[:na, :na] @ gp
                    zn = G[p, p] - gp @ r
            else:
                r = np.zeros(0)
                zn = G[p, p]
            # largest dual step keeping active multipliers non-negative
            t1, k = np.inf, -1
            pos = np.flatnonzero(r > 1e-14)
            if pos.size:
                ratios = u[pos] / r[pos]
                j = int(np.argmin(ratios))
                t1, k = float(ratios[j]), int(pos[j])
            if zn > 1e-10 * max(1.0, G[p, p]):
                t2 = -s[p] / zn
            else:
                t2 = np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                raise InfeasibleQPError(f"constraint {p} cannot be satisfied")
            if np.isfinite(t2):
                # primal step along z = H^-1 (n_p - N_a r)
                if na:
                    x = x + t * (HinvN[:, p] - HNa[:, :na] @ r)
                else:
                    x = x + t * HinvN[:, p]
                s = NT @ x - c
            u = u - t * r
            u_p += t
            if t2 <= t1:
                # add p: bordered inverse update
                if na:
                    M = Minv[:na, :na]
                    M += np.outer(r, r) / zn
                    Minv[:na, na] = -r / zn
                    Minv[na, :na] = -r / zn
                Minv[na, na] = 1.0 / zn
                HNa[:, na] = HinvN[:, p]
                active.append(p)
                na += 1
                u = np.append(u, u_p)
                changes += 1
                if changes >= 10:
                    refactor()
                    changes = 0
                break
            # drop constraint k: Schur-complement downdate
            keep = np.arange(na) != k
            f = Minv[:na, k][keep]
            Mk = Minv[k, k]
            red = Minv[:na, :na][np.ix_(keep, keep)] - np.outer(f, f) / Mk
            del active[k]
            HNa[:, k:na - 1] = HNa[:, k + 1:na]
            na -= 1
            Minv[:na, :na] = red
            u = u[keep]
            changes += 1
            if it >= max_iter:
                status = "suboptimal"
                break
        if status == "suboptimal":
            break

    lam = np.zeros(m)
    if active:
        lam[active] = np.maximum(u, 0.0)
    st, pv, cp = kkt_residuals(H, g, A, b, x, lam)
    obj = float(0.5 * x @ H @ x + g @ x)
    return QpResult(x, lam, list(active), it, status, st, pv, cp, obj)
