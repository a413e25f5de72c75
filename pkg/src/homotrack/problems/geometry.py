"""Rotations, essential matrices and synthetic camera rigs."""

from __future__ import annotations

import numpy as np


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion ``(w, x, y, z)``."""
    w, x, y, z = q
    return np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )


def rot_to_quat(R) -> np.ndarray:
    """Unit quaternion with nonnegative scalar part (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    cands = [tr, R[0, 0], R[1, 1], R[2, 2]]
    k = int(np.argmax(cands))
    if k == 0:
        w = 0.5 * np.sqrt(1 + tr)
        q = [w, (R[2, 1] - R[1, 2]) / (4 * w), (R[0, 2] - R[2, 0]) / (4 * w), (R[1, 0] - R[0, 1]) / (4 * w)]
    elif k == 1:
        x = 0.5 * np.sqrt(1 + 2 * R[0, 0] - tr)
        q = [(R[2, 1] - R[1, 2]) / (4 * x), x, (R[0, 1] + R[1, 0]) / (4 * x), (R[0, 2] + R[2, 0]) / (4 * x)]
    elif k == 2:
        y = 0.5 * np.sqrt(1 + 2 * R[1, 1] - tr)
        q = [(R[0, 2] - R[2, 0]) / (4 * y), (R[0, 1] + R[1, 0]) / (4 * y), y, (R[1, 2] + R[2, 1]) / (4 * y)]
    else:
        z = 0.5 * np.sqrt(1 + 2 * R[2, 2] - tr)
        q = [(R[1, 0] - R[0, 1]) / (4 * z), (R[0, 2] + R[2, 0]) / (4 * z), (R[1, 2] + R[2, 1]) / (4 * z), z]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def rot_poly(q):
    """``quat_to_rot`` over polynomial entries (valid for unit ``q``)."""
    w, x, y, z = q
    return [
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ]


def random_rotation(rng, max_angle: float = np.pi) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def perturb_rotation(rng, R, sigma: float) -> np.ndarray:
    """Left-multiply by a rotation about a random axis with angle ~ N(0, sigma) radians."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.normal(scale=sigma)
    K = skew(axis)
    return (np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K) @ R


def essential(R, T) -> np.ndarray:
    """E = [T]x R, so that x2^T E x1 = 0 when X2 = R X1 + T."""
    return skew(T) @ np.asarray(R)


def is_rotation(R, tol: float = 1e-12) -> bool:
    R = np.asarray(R)
    return bool(np.abs(R.T @ R - np.eye(3)).max() < tol and abs(np.linalg.det(R) - 1) < tol)


def look_at_rig(rng, n_views: int, radius: float = 6.0, jitter: float = 0.3):
    """World-to-camera poses (R_k, t_k) on a ring, all facing the origin."""
    poses = []
    base = rng.uniform(0, 2 * np.pi)
    for k in range(n_views):
        theta = base + 2 * np.pi * k / (4 * n_views) + rng.uniform(-0.1, 0.1)
        c = radius * np.array([np.sin(theta), rng.uniform(-0.5, 0.5), -np.cos(theta)])
        fwd = -c / np.linalg.norm(c)
        up = np.array([0.0, 1.0, 0.0]) + rng.normal(scale=jitter, size=3)
        right = np.cross(up, fwd)
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.vstack([right, down, fwd])
        poses.append((R, -R @ c))
    return poses


def project(R, t, X):
    """Normalised image point (xi, eta, 1) and depth of world point X."""
    Xc = R @ X + t
    return Xc / Xc[2], Xc[2]


def relative_pose(Ri, ti, Rj, tj):
    """(R_ij, T_ij) with X_j = R_ij X_i + T_ij in camera coordinates."""
    Rij = Rj @ Ri.T
    return Rij, tj - Rij @ ti
