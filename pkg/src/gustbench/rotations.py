"""
Rotation algebra.

Quaternions are Hamilton, scalar-first ``[w, x, y, z]`` and describe the
body-to-world rotation. Euler angles follow the Z-Y-X (yaw-pitch-roll)
convention, ``C = Rz(psi) @ Ry(theta) @ Rx(phi)``. Most functions accept
arrays with arbitrary leading batch dimensions.
"""

import numpy as np

from gustbench.errors import GimbalLockError

# |theta| beyond this on an Euler-returning path is treated as gimbal lock
GIMBAL_MARGIN = 1e-3


def quat_mul(a, b):
    """Hamilton product ``a ⊗ b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_rotmat(q):
    """Rotation matrix C_B^W for a (batch of) unit quaternion(s)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def euler_to_quat(euler):
    """Z-Y-X Euler angles ``(phi, theta, psi)`` to a unit quaternion."""
    e = np.asarray(euler, dtype=float)
    hp, ht, hs = e[..., 0] / 2, e[..., 1] / 2, e[..., 2] / 2
    cp, sp = np.cos(hp), np.sin(hp)
    ct, st = np.cos(ht), np.sin(ht)
    cs, ss = np.cos(hs), np.sin(hs)
    return np.stack(
        [
            cs * ct * cp + ss * st * sp,
            cs * ct * sp - ss * st * cp,
            cs * st * cp + ss * ct * sp,
            ss * ct * cp - cs * st * sp,
        ],
        axis=-1,
    )


def quat_to_euler(q, check=True):
    """Unit quaternion to Z-Y-X Euler angles.

    Raises GimbalLockError when ``|theta| > pi/2 - GIMBAL_MARGIN`` and
    ``check`` is set.
    """
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    s = np.clip(2 * (w * y - x * z), -1.0, 1.0)
    theta = np.arcsin(s)
    if check and np.any(np.abs(theta) > np.pi / 2 - GIMBAL_MARGIN):
        raise GimbalLockError(f"pitch {np.max(np.abs(theta)):.6f} rad at gimbal lock")
    phi = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    psi = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return np.stack([phi, theta, psi], axis=-1)


def euler_to_rotmat(euler):
    e = np.asarray(euler, dtype=float)
    cp, sp = np.cos(e[..., 0]), np.sin(e[..., 0])
    ct, st = np.cos(e[..., 1]), np.sin(e[..., 1])
    cs, ss = np.cos(e[..., 2]), np.sin(e[..., 2])
    R = np.empty(e.shape[:-1] + (3, 3))
    R[..., 0, 0] = ct * cs
    R[..., 0, 1] = sp * st * cs - cp * ss
    R[..., 0, 2] = cp * st * cs + sp * ss
    R[..., 1, 0] = ct * ss
    R[..., 1, 1] = sp * st * ss + cp * cs
    R[..., 1, 2] = cp * st * ss - sp * cs
    R[..., 2, 0] = -st
    R[..., 2, 1] = sp * ct
    R[..., 2, 2] = cp * ct
    return R


def quat_to_mrp(q):
    """Modified Rodrigues parameters ``p = q_vec / (1 + q_w)``.

    The shadow set is used when the rotation angle exceeds pi (``q_w < 0``),
    so the result always satisfies ``|p| <= 1``.
    """
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    q = q * sign
    return q[..., 1:] / (1.0 + q[..., :1])


def mrp_to_quat(p):
    p = np.asarray(p, dtype=float)
    n2 = np.sum(p * p, axis=-1, keepdims=True)
    w = (1.0 - n2) / (1.0 + n2)
    v = 2.0 * p / (1.0 + n2)
    return np.concatenate([w, v], axis=-1)


def rotvec_to_quat(r):
    """Axis-angle vector to quaternion (exponential map)."""
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x/2)/x with a series fallback near zero
    small = angle < 1e-8
    k = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(small, 1.0, angle))
    return np.concatenate([np.cos(half), k * r], axis=-1)


def quat_to_rotvec(q):
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    q = q * sign
    vn = np.linalg.norm(q[..., 1:], axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(vn, q[..., :1])
    small = vn < 1e-12
    k = np.where(small, 2.0 / np.maximum(q[..., :1], 1e-300), angle / np.where(small, 1.0, vn))
    return k * q[..., 1:]


def quat_angle(a, b):
    """Geodesic angle between two attitudes, rad."""
    d = abs(float(np.dot(np.asarray(a, float), np.asarray(b, float))))
    return 2.0 * np.arccos(min(1.0, d))


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)
