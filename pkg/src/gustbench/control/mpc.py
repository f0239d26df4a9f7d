"""
Nonlinear MPC position controller, real-time-iteration flavour.

Prediction model: translational dynamics with a constant disturbance force
and first-order roll/pitch response to the attitude references. State
``x = [p, v, phi, theta, psi]``, input ``u = [T, phi_ref, theta_ref]`` plus
an optional slack ``eps`` for the soft cross-error constraint.

Each control cycle performs one Gauss-Newton SQP iteration: RK4 multiple
shooting around the shifted previous solution, condensing to a dense QP,
and a dual active-set solve.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from gustbench.control.pid import AttitudeThrustCmd
from gustbench.control.qp import QpResult, solve_dense_qp
from gustbench.rotations import euler_to_quat, wrap_angle

NXM = 9


@dataclass
class MpcConfig:
    N: int = 20
    dt: float = 0.1
    Q_x: np.ndarray = field(default_factory=lambda: np.diag([20, 20, 40, 2, 2, 4, 1, 1, 1.0]))
    R_u: np.ndarray = field(default_factory=lambda: np.diag([0.5, 10, 10.0]))
    P_N: np.ndarray | None = None
    T_min: float = 2.0
    T_max: float = 13.0
    phi_max: float = 0.4
    theta_max: float = 0.4
    # first-order fit of the default inner attitude loop
    k_phi: float = 1.0
    tau_phi: float = 0.18
    k_theta: float = 1.0
    tau_theta: float = 0.18
    soft: bool = False
    e_max: float = 0.05
    slack_weight: float = 50.0
    max_qp_iter: int = 400
    # scale on the along-path part of the position error while the reference
    # is moving (1 = plain world-frame weighting)
    along_track: float = 0.0

    def __post_init__(self):
        self.Q_x = np.asarray(self.Q_x, dtype=float)
        self.R_u = np.asarray(self.R_u, dtype=float)
        if self.P_N is None:
            self.P_N = self.Q_x.copy()
        self.P_N = np.asarray(self.P_N, dtype=float)
        if self.Q_x.shape != (9, 9) or self.P_N.shape != (9, 9) or self.R_u.shape != (3, 3):
            raise ValueError("Q_x and P_N must be 9x9, R_u 3x3")
        for name, M in (("Q_x", self.Q_x), ("P_N", self.P_N)):
            if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < -1e-12:
                raise ValueError(f"{name} must be PSD")
        if np.linalg.eigvalsh(0.5 * (self.R_u + self.R_u.T)).min() <= 0:
            raise ValueError("R_u must be positive definite")
        if not self.T_min < self.T_max:
            raise ValueError("T_min must be below T_max")
        for a in (self.phi_max, self.theta_max):
            if not 0 < a < np.pi / 2:
                raise ValueError("tilt limits must lie in (0, pi/2)")
        if self.N < 1 or self.dt <= 0:
            raise ValueError("need N >= 1 and dt > 0")
        if not 0.0 <= self.along_track <= 1.0:
            raise ValueError("along_track must lie in [0, 1]")

    @property
    def horizon(self) -> float:
        return self.N * self.dt

    @property
    def nu(self) -> int:
        return 4 if self.soft else 3

    @property
    def R_full(self) -> np.ndarray:
        if not self.soft:
            return self.R_u
        R = np.zeros((4, 4))
        R[:3, :3] = self.R_u
        R[3, 3] = self.slack_weight
        return R

    def lower(self):
        lb = [self.T_min, -self.phi_max, -self.theta_max]
        return np.array(lb + [0.0] if self.soft else lb)

    def upper(self):
        ub = [self.T_max, self.phi_max, self.theta_max]
        return np.array(ub + [np.inf] if self.soft else ub)


def mpc_model_derivative(x, u, f_ext_hat, cfg: MpcConfig, m: float, g):
    """Prediction-model derivative; batched over leading dimensions."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    phi, theta, psi = x[..., 6], x[..., 7], x[..., 8]
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cs, ss = np.cos(psi), np.sin(psi)
    T = u[..., 0]
    zb = np.stack([cp * st * cs + sp * ss, cp * st * ss - sp * cs, cp * ct], axis=-1)
    xd = np.zeros(np.broadcast_shapes(x.shape, u.shape[:-1] + (NXM,)))
    xd[..., 0:3] = x[..., 3:6]
    xd[..., 3:6] = (T[..., None] * zb + f_ext_hat) / m + g
    xd[..., 6] = (cfg.k_phi * u[..., 1] - phi) / cfg.tau_phi
    xd[..., 7] = (cfg.k_theta * u[..., 2] - theta) / cfg.tau_theta
    return xd


def mpc_model_jacobians(x, u, cfg: MpcConfig, m: float):
    """Continuous-time Jacobians ``(A, B)`` of the prediction model."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    batch = x.shape[:-1]
    nu = u.shape[-1]
    phi, theta, psi = x[..., 6], x[..., 7], x[..., 8]
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cs, ss = np.cos(psi), np.sin(psi)
    Tm = u[..., 0] / m
    A = np.zeros(batch + (NXM, NXM))
    B = np.zeros(batch + (NXM, nu))
    A[..., 0, 3] = A[..., 1, 4] = A[..., 2, 5] = 1.0
    A[..., 3:6, 6] = Tm[..., None] * np.stack([-sp * st * cs + cp * ss, -sp * st * ss - cp * cs, -sp * ct], -1)
    A[..., 3:6, 7] = Tm[..., None] * np.stack([cp * ct * cs, cp * ct * ss, -cp * st], -1)
    A[..., 3:6, 8] = Tm[..., None] * np.stack([-cp * st * ss + sp * cs, cp * st * cs + sp * ss, np.zeros_like(cp)], -1)
    A[..., 6, 6] = -1.0 / cfg.tau_phi
    A[..., 7, 7] = -1.0 / cfg.tau_theta
    B[..., 3:6, 0] = np.stack([cp * st * cs + sp * ss, cp * st * ss - sp * cs, cp * ct], -1) / m
    B[..., 6, 1] = cfg.k_phi / cfg.tau_phi
    B[..., 7, 2] = cfg.k_theta / cfg.tau_theta
    return A, B


def rk4_sensitivities(x, u, f_ext_hat, cfg: MpcConfig, m: float, g, h: float):
    """RK4 step and its exact derivatives, batched over shooting nodes.

    Returns ``(x_next, Ad, Bd)``.
    """
    I = np.eye(NXM)
    f = lambda xx: mpc_model_derivative(xx, u, f_ext_hat, cfg, m, g)
    jac = lambda xx: mpc_model_jacobians(xx, u, cfg, m)
    k1 = f(x)
    A1, B1 = jac(x)
    x2 = x + 0.5 * h * k1
    k2 = f(x2)
    A2, B2 = jac(x2)
    D2x = A2 @ (I + 0.5 * h * A1)
    D2u = A2 @ (0.5 * h * B1) + B2
    x3 = x + 0.5 * h * k2
    k3 = f(x3)
    A3, B3 = jac(x3)
    D3x = A3 @ (I + 0.5 * h * D2x)
    D3u = A3 @ (0.5 * h * D2u) + B3
    x4 = x + h * k3
    k4 = f(x4)
    A4, B4 = jac(x4)
    D4x = A4 @ (I + h * D3x)
    D4u = A4 @ (h * D3u) + B4
    x_next = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    Ad = I + (h / 6.0) * (A1 + 2 * D2x + 2 * D3x + D4x)
    Bd = (h / 6.0) * (B1 + 2 * D2u + 2 * D3u + D4u)
    return x_next, Ad, Bd


@dataclass
class OcpProblem:
    """One instance of the tracking OCP around a guess trajectory."""

    x0: np.ndarray
    x_guess: np.ndarray  # (N+1, 9)
    u_guess: np.ndarray  # (N, nu)
    x_ref: np.ndarray  # (N+1, 9)
    u_ref: np.ndarray  # (N, nu)
    f_ext_hat: np.ndarray
    cfg: MpcConfig
    m: float
    g: np.ndarray
    tangents: np.ndarray | None = None  # (N+1, 3) path tangents for the soft rows


@dataclass
class QpSubproblem:
    """Block-sparse Gauss-Newton QP in the increments ``(dx, du)``.

    Shooting constraints ``dx[k+1] = A[k] dx[k] + B[k] du[k] + gaps[k]`` with
    ``dx[0] = dx0``; box rows on the inputs; optional soft cross-error rows.
    """

    ocp: OcpProblem
    A: np.ndarray  # (N, 9, 9)
    B: np.ndarray  # (N, 9, nu)
    gaps: np.ndarray  # (N, 9)
    dx0: np.ndarray
    stage_Q: np.ndarray  # (N, 9, 9) weights on x_1..x_N
    stage_R: np.ndarray  # (N, nu, nu)

    def condense(self):
        """Eliminate the states. Returns ``(H, g, Aineq, bineq, Sx, Su, x_free)``
        where ``x_free`` is the state prediction for ``du = 0``."""
        ocp = self.ocp
        cfg = ocp.cfg
        N, nu = ocp.u_guess.shape
        n = N * nu
        Su = np.zeros((N, NXM, n))
        c = np.zeros((N, NXM))
        prev_S = np.zeros((NXM, n))
        prev_c = self.dx0
        for k in range(N):
            S = self.A[k] @ prev_S
            S[:, k * nu:(k + 1) * nu] += self.B[k]
            ck = self.A[k] @ prev_c + self.gaps[k]
            Su[k], c[k] = S, ck
            prev_S, prev_c = S, ck
        x_free = ocp.x_guess[1:] + c
        err = x_free - ocp.x_ref[1:]
        err[:, 6:9] = wrap_angle(err[:, 6:9])
        QS = self.stage_Q @ Su
        Su2 = Su.reshape(N * NXM, n)
        QS2 = QS.reshape(N * NXM, n)
        H = 2.0 * (Su2.T @ QS2)
        g = 2.0 * (QS2.T @ err.ravel())
        du_err = (ocp.u_guess - ocp.u_ref)
        Rb = block_diag(*self.stage_R)
        H += 2.0 * Rb
        g += 2.0 * Rb @ du_err.ravel()
        H = 0.5 * (H + H.T)

        lb, ub = cfg.lower(), cfg.upper()
        u_flat = ocp.u_guess.ravel()
        ub_t, lb_t = np.tile(ub, N), np.tile(lb, N)
        hi, lo = np.isfinite(ub_t), np.isfinite(lb_t)
        I = np.eye(n)
        blocks = [I[hi], -I[lo]]
        rhs = [ub_t[hi] - u_flat[hi], u_flat[lo] - lb_t[lo]]
        if cfg.soft:
            t = ocp.tangents[1:]
            Pi = np.eye(3)[None] - t[:, :, None] * t[:, None, :]
            e = x_free[:, 0:3] - ocp.x_ref[1:, 0:3]
            eps = ocp.u_guess[:, 3]
            jeps = np.arange(N) * nu + 3
            for a in (0, 1):
                pa = Pi[:, a, :]
                keep = np.linalg.norm(pa, axis=1) >= 1e-9
                base = np.einsum("ki,kin->kn", pa, Su[:, 0:3, :])
                ea = np.einsum("ki,ki->k", pa, e)
                for sgn in (1.0, -1.0):
                    r = sgn * base
                    r[np.arange(N), jeps] -= 1.0
                    blocks.append(r[keep])
                    rhs.append((cfg.e_max + eps - sgn * ea)[keep])
        Aineq = np.vstack(blocks)
        bineq = np.concatenate(rhs)
        const = float(np.sum(err * (self.stage_Q @ err[:, :, None])[:, :, 0])) + float(
            du_err.ravel() @ Rb @ du_err.ravel()
        )
        return H, g, Aineq, bineq, Su, x_free, const


def transcribe(ocp: OcpProblem) -> QpSubproblem:
    """Multiple-shooting linearization of the OCP at ``(x_guess, u_guess)``."""
    cfg = ocp.cfg
    N = cfg.N
    x_next, A, B = rk4_sensitivities(
        ocp.x_guess[:-1], ocp.u_guess, ocp.f_ext_hat, cfg, ocp.m, ocp.g, cfg.dt
    )
    gaps = x_next - ocp.x_guess[1:]
    dx0 = np.asarray(ocp.x0, dtype=float) - ocp.x_guess[0]
    dx0[6:9] = wrap_angle(dx0[6:9])
    stage_Q = np.repeat((cfg.Q_x * cfg.dt)[None], N, axis=0)
    stage_Q[-1] = cfg.P_N
    if ocp.tangents is not None and cfg.along_track < 1.0:
        # W = (I - t t') + a t t' on moving stages; stationary stages keep W = I
        t = ocp.tangents[1:]
        moving = np.linalg.norm(ocp.x_ref[1:, 3:6], axis=1) > 0
        tt = t[:, :, None] * t[:, None, :] * moving[:, None, None]
        W = np.eye(3)[None] - (1.0 - cfg.along_track) * tt
        stage_Q[:, 0:3, 0:3] = W @ stage_Q[:, 0:3, 0:3] @ W
    stage_R = np.repeat((cfg.R_full * cfg.dt)[None], N, axis=0)
    return QpSubproblem(ocp, A, B, gaps, dx0, stage_Q, stage_R)


@dataclass
class MpcSolution:
    u: np.ndarray  # updated input trajectory (N, nu)
    x: np.ndarray  # updated state trajectory (N+1, 9), linearized prediction
    eps: np.ndarray  # slack per stage (zeros without soft constraints)
    qp: QpResult
    gap_norm: float
    step_norm: float
    objective: float  # full quadratic model cost at the optimum
    objective_at_guess: float  # model cost of du = 0

    @property
    def kkt_residual(self) -> float:
        return self.qp.kkt_residual

    @property
    def sqp_residual(self) -> float:
        return max(self.gap_norm, self.step_norm)


def solve_qp(qp: QpSubproblem, max_iter: int | None = None) -> MpcSolution:
    ocp = qp.ocp
    cfg = ocp.cfg
    H, g, A, b, Su, x_free, const = qp.condense()
    res = solve_dense_qp(H, g, A, b, max_iter=max_iter or cfg.max_qp_iter)
    N, nu = ocp.u_guess.shape
    du = res.x.reshape(N, nu)
    dx = Su @ res.x
    x = np.empty_like(ocp.x_guess)
    x[0] = ocp.x_guess[0] + qp.dx0
    x[1:] = x_free + dx
    u = ocp.u_guess + du
    eps = u[:, 3].copy() if nu == 4 else np.zeros(N)
    return MpcSolution(
        u, x, eps, res,
        gap_norm=float(np.max(np.abs(qp.gaps))),
        step_norm=float(np.max(np.abs(du))),
        objective=const + res.objective,
        objective_at_guess=const,
    )


def equilibrium_input(f_ext_hat, psi, cfg: MpcConfig, m, g):
    """Hover input that balances gravity and the disturbance force."""
    t = -m * np.asarray(g, dtype=float) - np.asarray(f_ext_hat, dtype=float)
    T = float(np.linalg.norm(t))
    zb = t / T
    c, s = np.cos(psi), np.sin(psi)
    zx = c * zb[0] + s * zb[1]
    zy = -s * zb[0] + c * zb[1]
    phi = float(np.arcsin(np.clip(-zy, -1.0, 1.0)))
    theta = float(np.arctan2(zx, zb[2]))
    u = np.array([
        np.clip(T, cfg.T_min, cfg.T_max),
        np.clip(phi, -cfg.phi_max, cfg.phi_max),
        np.clip(theta, -cfg.theta_max, cfg.theta_max),
    ])
    return u


def rk4_model_step(x, u, f_ext_hat, cfg: MpcConfig, m, g, h):
    """Plain RK4 step of the prediction model (no sensitivities)."""
    f = lambda xx: mpc_model_derivative(xx, u, f_ext_hat, cfg, m, g)
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rollout(x0, u_seq, f_ext_hat, cfg: MpcConfig, m, g):
    xs = [np.asarray(x0, dtype=float)]
    for u in u_seq:
        xs.append(rk4_model_step(xs[-1], u, f_ext_hat, cfg, m, g, cfg.dt))
    return np.array(xs)


class MpcController:
    """Real-time-iteration MPC with shift-initialized warm start."""

    def __init__(self, cfg: MpcConfig, m, g, tracker):
        self.cfg = cfg
        self.m = m
        self.g = np.asarray(g, dtype=float)
        self.tracker = tracker
        self.x_guess = None
        self.u_guess = None
        self.name = "mpc-slack" if cfg.soft else "mpc"

    def build_ocp(self, x_now, guidance, f_ext_hat) -> OcpProblem:
        cfg = self.cfg
        N = cfg.N
        psi = float(x_now[8])
        u_eq = equilibrium_input(f_ext_hat, psi, cfg, self.m, self.g)
        u_ref = np.zeros((N, cfg.nu))
        u_ref[:, :3] = u_eq
        predicted = None if self.x_guess is None else self.x_guess[:, 0:3]
        p_ref, v_ref, tangents = self.tracker.horizon(guidance, cfg.dt, N, predicted)
        x_ref = np.zeros((N + 1, NXM))
        x_ref[:, 0:3] = p_ref
        x_ref[:, 3:6] = v_ref
        x_ref[:, 6] = cfg.k_phi * u_eq[1]
        x_ref[:, 7] = cfg.k_theta * u_eq[2]
        x_ref[:, 8] = psi
        if self.u_guess is None:
            self.u_guess = u_ref.copy()
            self.x_guess = rollout(x_now, self.u_guess, f_ext_hat, cfg, self.m, self.g)
        return OcpProblem(
            np.asarray(x_now, dtype=float), self.x_guess, self.u_guess, x_ref, u_ref,
            np.asarray(f_ext_hat, dtype=float), cfg, self.m, self.g, tangents,
        )

    def iterate(self, x_now, guidance, f_ext_hat, shift=True) -> MpcSolution:
        """One SQP iteration; with ``shift=False`` the same OCP is re-solved
        around the updated trajectory (used to check convergence)."""
        ocp = self.build_ocp(x_now, guidance, f_ext_hat)
        sol = solve_qp(transcribe(ocp))
        lb, ub = self.cfg.lower(), self.cfg.upper()
        u_new = np.clip(sol.u, lb, ub)
        if shift:
            xl = rk4_model_step(sol.x[-1], u_new[-1], ocp.f_ext_hat, self.cfg, self.m, self.g, self.cfg.dt)
            self.u_guess = np.vstack([u_new[1:], u_new[-1:]])
            self.x_guess = np.vstack([sol.x[1:], xl[None]])
        else:
            self.u_guess = u_new
            self.x_guess = sol.x
        sol.u = u_new
        return sol

    def step(self, p, v, euler, guidance, f_ext_hat, dt=None):
        x_now = np.concatenate([p, v, euler])
        sol = self.iterate(x_now, guidance, f_ext_hat)
        T, phi, theta = sol.u[0, :3]
        psi = guidance.yaw_ref
        e = np.array([phi, theta, psi])
        cmd = AttitudeThrustCmd(float(T), euler_to_quat(e), e)
        stats = {
            "qp_iter": sol.qp.iterations,
            "kkt": sol.kkt_residual,
            "sqp_res": sol.sqp_residual,
            "suboptimal": sol.qp.status != "optimal",
            "slack_max": float(np.max(sol.eps)),
            "n_active": len(sol.qp.active),
        }
        return cmd, stats
