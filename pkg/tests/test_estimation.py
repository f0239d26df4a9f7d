import numpy as np
import pytest

from gustbench.dynamics import VehicleParams
from gustbench.errors import GimbalLockError, PSDViolationError
from gustbench.estimation import (
    EkfState, FilterInput, Measurement, NoiseConfig, UkfState, ekf_predict, ekf_update, ukf_predict,
    ukf_sigma_points, ukf_update,
)
from gustbench.estimation.common import NX, NZ
from gustbench.estimation.ekf import discrete_jacobian, discrete_step
from gustbench.estimation.ukf import boxminus, psd_sqrt, unscented_mean_cov
from gustbench.rotations import euler_to_quat, quat_normalize

P = VehicleParams()
DT = 0.01


def random_state(rng):
    x = rng.normal(size=NX)
    x[6:9] = rng.uniform([-0.6, -0.6, -3.0], [0.6, 0.6, 3.0])
    return x


def test_ekf_jacobian_matches_central_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = random_state(rng)
        u = FilterInput(rng.uniform(2, 12), rng.normal(size=3) * 0.1)
        F = discrete_jacobian(x, u, DT, P)
        Fd = np.zeros_like(F)
        for j in range(NX):
            h = 1e-6 * max(1.0, abs(x[j]))
            e = np.zeros(NX)
            e[j] = h
            Fd[:, j] = (discrete_step(x + e, u, DT, P) - discrete_step(x - e, u, DT, P)) / (2 * h)
        rel = np.linalg.norm(F - Fd) / np.linalg.norm(Fd)
        assert rel < 1e-5


def random_cov(rng, n=NX, scale=0.1):
    M = rng.normal(size=(n, n)) * scale
    return M @ M.T + 1e-3 * np.eye(n)


def test_unscented_recombination_is_exact():
    rng = np.random.default_rng(2)
    for _ in range(10):
        mean = rng.normal(size=19)
        mean[6:10] = quat_normalize(rng.normal(size=4))
        cov = random_cov(rng)
        pts, wm, wc = ukf_sigma_points(mean, cov)
        m2, c2 = unscented_mean_cov(pts, wm, wc, q_ref=mean[6:10])
        np.testing.assert_allclose(m2[:6], mean[:6], atol=1e-9)
        np.testing.assert_allclose(m2[10:], mean[10:], atol=1e-9)
        assert min(np.abs(m2[6:10] - mean[6:10]).max(), np.abs(m2[6:10] + mean[6:10]).max()) < 1e-9
        np.testing.assert_allclose(c2, cov, atol=1e-9)


def test_unscented_transform_exact_for_linear_maps():
    rng = np.random.default_rng(3)
    mean = np.zeros(19)
    mean[6] = 1.0
    mean[:6] = rng.normal(size=6)
    cov = random_cov(rng)
    pts, wm, wc = ukf_sigma_points(mean, cov)
    e = boxminus(pts, mean[6:10])
    A = rng.normal(size=(5, NX))
    b = rng.normal(size=5)
    y = e @ A.T + b
    ym = wm @ y
    yc = ((y - ym) * wc[:, None]).T @ (y - ym)
    e0 = boxminus(mean, mean[6:10])[0]
    np.testing.assert_allclose(ym, A @ e0 + b, atol=1e-9)
    np.testing.assert_allclose(yc, A @ cov @ A.T, atol=1e-9)


def test_psd_sqrt_and_violation():
    rng = np.random.default_rng(4)
    C = random_cov(rng)
    S = psd_sqrt(C)
    np.testing.assert_allclose(S @ S.T, C, atol=1e-12)
    bad = np.eye(NX)
    bad[0, 0] = -1.0
    with pytest.raises(PSDViolationError):
        psd_sqrt(bad)


# frozen-attitude linear sub-problem -------------------------------------------
# Attitude and body rate have zero covariance and zero process noise, and the
# torque channel is inert, so (p, v, f_ext) evolve linearly and both filters
# must reproduce a textbook Kalman filter on that 9-state system.

LIN = np.r_[0:6, 12:15]


def frozen_noise():
    q = np.zeros(NX)
    q[0:3], q[3:6], q[12:15] = 1e-4, 2e-2, 5e-2
    r = np.concatenate([np.full(3, 1e-3), np.full(3, 1e-2), np.full(3, 1e-2), np.full(3, 1e-2)]) ** 2
    return NoiseConfig(np.diag(q), np.diag(r))


def frozen_cov(rng):
    C = np.zeros((NX, NX))
    C[np.ix_(LIN, LIN)] = random_cov(rng, 9, 0.2)
    return C


def kalman_oracle(x, Pm, zs, T, noise, m, g, dt):
    F = np.eye(9)
    F[0:3, 3:6] = dt * np.eye(3)
    F[3:6, 6:9] = dt / m * np.eye(3)
    bias = np.concatenate([np.zeros(3), dt * (np.array([0, 0, T / m]) + g), np.zeros(3)])
    Q = noise.Q[np.ix_(LIN, LIN)] * dt
    H = np.hstack([np.eye(6), np.zeros((6, 3))])
    R = noise.R[:6, :6]
    out = []
    for z in zs:
        x = F @ x + bias
        Pm = F @ Pm @ F.T + Q
        S = H @ Pm @ H.T + R
        K = Pm @ H.T @ np.linalg.inv(S)
        x = x + K @ (z - H @ x)
        Pm = (np.eye(9) - K @ H) @ Pm
        out.append((x.copy(), Pm.copy()))
    return out


@pytest.mark.parametrize("kind", ["ekf", "ukf"])
def test_frozen_attitude_matches_kalman_oracle(kind):
    rng = np.random.default_rng(5)
    noise = frozen_noise()
    T = P.hover_thrust + 0.3
    u = FilterInput(T)
    x0 = rng.normal(size=9) * 0.1
    C0 = frozen_cov(rng)
    zs = [rng.normal(size=6) * 0.1 for _ in range(60)]
    ref = kalman_oracle(x0, C0[np.ix_(LIN, LIN)], zs, T, noise, P.m, P.g, DT)

    q_id = np.array([1.0, 0.0, 0.0, 0.0])
    if kind == "ekf":
        m0 = np.zeros(NX)
        m0[LIN] = x0
        s = EkfState(m0, C0)
    else:
        m0 = np.zeros(19)
        m0[0:6], m0[13:16], m0[6:10] = x0[0:6], x0[6:9], q_id
        s = UkfState(m0, C0)
    for z, (xr, Pr) in zip(zs, ref):
        meas = Measurement(z[0:3], z[3:6], q_id, np.zeros(3))
        if kind == "ekf":
            s = ekf_update(ekf_predict(s, u, DT, noise, P), meas, noise)
            got = s.mean[LIN]
        else:
            s = ukf_update(ukf_predict(s, u, DT, noise, P), meas, noise)
            got = np.concatenate([s.mean[0:6], s.mean[13:16]])
        np.testing.assert_allclose(got, xr, atol=1e-6)
        np.testing.assert_allclose(s.cov[np.ix_(LIN, LIN)], Pr, atol=1e-6)


def test_ekf_gimbal_guard():
    noise = NoiseConfig.from_intensities()
    m = np.zeros(NX)
    m[7] = np.pi / 2 - 0.01
    with pytest.raises(GimbalLockError):
        ekf_predict(EkfState(m, noise.initial_covariance()), FilterInput(P.hover_thrust), DT, noise, P)


def test_dt_out_of_range_rejected():
    noise = NoiseConfig.from_intensities()
    s = EkfState(np.zeros(NX), noise.initial_covariance())
    with pytest.raises(ValueError):
        ekf_predict(s, FilterInput(P.hover_thrust), 0.5, noise, P)


@pytest.mark.parametrize("kind", ["ekf", "ukf"])
def test_constant_force_is_recovered(kind):
    """Hovering with a constant unmodelled push: the estimate converges."""
    from gustbench.estimation import make_estimator
    rng = np.random.default_rng(6)
    noise = NoiseConfig.from_intensities()
    est = make_estimator(kind, noise, P)
    f_true = np.array([0.3, -0.2, -0.5])
    u = FilterInput(P.hover_thrust)
    p, v = np.zeros(3), np.zeros(3)
    q = euler_to_quat(np.zeros(3))
    for _ in range(800):
        v = v + DT * f_true / P.m
        p = p + DT * v
        z = Measurement(p + 1e-4 * rng.normal(size=3), v + 1e-3 * rng.normal(size=3), q, np.zeros(3))
        w = est.step(u, z, DT)
    np.testing.assert_allclose(w.f_ext_hat, f_true, atol=0.03)
    assert np.linalg.eigvalsh(w.cov_wrench).min() > 0


# spec examples -----------------------------------------------------------------

def hover_state(noise, kind="ekf"):
    if kind == "ekf":
        return EkfState(np.zeros(NX), noise.initial_covariance())
    m = np.zeros(19)
    m[6] = 1.0
    return UkfState(m, noise.initial_covariance())


def test_predict_fixed_point_and_covariance_growth():
    zero_q = NoiseConfig(np.zeros((NX, NX)), NoiseConfig.from_intensities().R)
    s = hover_state(zero_q)
    s2 = ekf_predict(s, FilterInput(P.hover_thrust), DT, zero_q, P)
    np.testing.assert_allclose(s2.mean, s.mean, atol=1e-15)
    # the UKF mean is not a fixed point: attitude spread lowers the mean vertical thrust
    noise = NoiseConfig.from_intensities()
    s = hover_state(noise)
    traces = [np.trace(s.cov)]
    for _ in range(50):
        s = ekf_predict(s, FilterInput(P.hover_thrust), DT, noise, P)
        traces.append(np.trace(s.cov))
    assert np.all(np.diff(traces) > 0)


@pytest.mark.parametrize("kind", ["ekf", "ukf"])
def test_zero_innovation_and_uninformative_update(kind):
    noise = NoiseConfig.from_intensities()
    s = hover_state(noise, kind)
    s.mean[:3] = [0.1, -0.2, 1.0]
    if kind == "ekf":
        s.mean[6:9] = [0.05, -0.02, 0.3]
    else:
        s.mean[6:10] = euler_to_quat(np.array([0.05, -0.02, 0.3]))
    predict, update = (ekf_predict, ekf_update) if kind == "ekf" else (ukf_predict, ukf_update)
    prior = predict(s, FilterInput(P.hover_thrust), DT, noise, P)
    if kind == "ekf":
        z = Measurement(prior.mean[0:3], prior.mean[3:6], euler_to_quat(prior.mean[6:9]), prior.mean[9:12])
    else:
        z = Measurement(prior.mean[0:3], prior.mean[3:6], prior.mean[6:10], prior.mean[10:13])
    post = update(prior, z, noise)
    np.testing.assert_allclose(post.mean, prior.mean, atol=1e-9)
    assert np.trace(post.cov) < np.trace(prior.cov)

    blind = NoiseConfig(noise.Q, noise.R * 1e12)
    z_off = Measurement(z.p + 0.5, z.v - 0.3, euler_to_quat(np.array([0.1, 0.1, 0.5])), z.omega + 0.2)
    post = update(prior, z_off, blind)
    np.testing.assert_allclose(post.mean, prior.mean, atol=1e-6)
    np.testing.assert_allclose(post.cov, prior.cov, atol=1e-6)


def test_sigma_points_with_zero_attitude_covariance():
    noise = NoiseConfig.from_intensities()
    s = hover_state(noise, "ukf")
    C = s.cov.copy()
    C[6:9, :] = C[:, 6:9] = 0.0
    pts, wm, wc = ukf_sigma_points(s.mean, C)
    np.testing.assert_allclose(pts[:, 6:10], np.tile([1.0, 0, 0, 0], (len(pts), 1)), atol=1e-15)
    assert wm.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["ekf", "ukf"])
def test_fresh_filter_wrench(kind):
    from gustbench.estimation import make_estimator
    noise = NoiseConfig.from_intensities()
    est = make_estimator(kind, noise, P)
    z = Measurement(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3))
    w = est.step(FilterInput(P.hover_thrust), z, DT)
    np.testing.assert_allclose(est.state.cov[12:18, 12:18], w.cov_wrench)
    init = noise.initial_covariance()[12:18, 12:18]
    np.testing.assert_allclose(w.f_ext_hat, 0.0, atol=1e-15)
    np.testing.assert_allclose(np.diag(w.cov_wrench)[:3], np.diag(init)[:3])  # first call only initializes


def yaw_rotation(psi):
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


@pytest.mark.parametrize("kind", ["ekf", "ukf"])
def test_estimates_rotate_with_world_yaw(kind):
    from gustbench.estimation import make_estimator
    from gustbench.rotations import quat_mul
    rng = np.random.default_rng(7)
    psi0 = 0.7
    Rz = yaw_rotation(psi0)
    qz = euler_to_quat(np.array([0.0, 0.0, psi0]))
    noise = NoiseConfig.from_intensities()
    a, b = make_estimator(kind, noise, P), make_estimator(kind, noise, P)
    f_true = np.array([0.4, -0.3, -0.2])
    p, v = np.zeros(3), np.zeros(3)
    for k in range(300):
        v = v + DT * f_true / P.m
        p = p + DT * v
        e = np.array([0.05 * np.sin(0.03 * k), -0.04, 0.2])
        q = euler_to_quat(e)
        om = 0.01 * rng.normal(size=3)
        zp, zv = p + 1e-3 * rng.normal(size=3), v + 1e-2 * rng.normal(size=3)
        u = FilterInput(P.hover_thrust, 1e-3 * rng.normal(size=3))
        wa = a.step(u, Measurement(zp, zv, q, om), DT)
        wb = b.step(u, Measurement(Rz @ zp, Rz @ zv, quat_mul(qz, q), om), DT)
    np.testing.assert_allclose(wb.f_ext_hat, Rz @ wa.f_ext_hat, atol=1e-6)
    np.testing.assert_allclose(wb.eta_ext_hat, wa.eta_ext_hat, atol=1e-6)


def force_step_run(q_f, seed, n=600, t_step=1.0):
    from gustbench.cli.metrics import metric_t90
    from gustbench.estimation import make_estimator
    rng = np.random.default_rng(seed)
    est = make_estimator("ekf", NoiseConfig.from_intensities(q_f=q_f), P)
    f_true = np.array([0.0, 0.0, -0.981])
    p, v = np.zeros(3), np.zeros(3)
    q = np.array([1.0, 0, 0, 0])
    t = np.arange(n) * DT
    fz = np.empty(n)
    for k in range(n):
        f = f_true if t[k] >= t_step else np.zeros(3)
        v = v + DT * f / P.m
        p = p + DT * v
        z = Measurement(p + 1e-3 * rng.normal(size=3), v + 1e-2 * rng.normal(size=3), q, 5e-3 * rng.normal(size=3))
        fz[k] = est.step(FilterInput(P.hover_thrust), z, DT).f_ext_hat[2]
    t90 = metric_t90(t, fz, t_step, final=-0.981, initial=0.0)
    return t90, float(np.std(fz[t >= t_step + 3.0]))


def test_random_walk_tuning_monotonicity():
    base = NoiseConfig.from_intensities()
    q_f = base.Q[12, 12]
    runs = {k: [force_step_run(k * q_f, seed) for seed in range(20)] for k in (1, 2)}
    t1 = np.mean([r[0] for r in runs[1]])
    t2 = np.mean([r[0] for r in runs[2]])
    v1 = np.mean([r[1] for r in runs[1]])
    v2 = np.mean([r[1] for r in runs[2]])
    assert t2 < t1
    assert v2 > v1
