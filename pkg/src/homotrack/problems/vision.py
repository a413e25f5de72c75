"""Geometric vision problems as polynomial systems, with synthetic instances.

Image points are rows ``(xi, eta, 1)``.  Unknown orderings:

relpose5   q (4), T (3), rho_1..rho_5, rhobar_2..rhobar_5       [rhobar_1 = 1]
trace3     alpha_1, alpha_2, alpha_3                             [alpha_4 = 1]
p3p        rho_1, rho_2, rho_3
tri{N}     u_1, v_1, ..., u_N, v_N, then lambda_ij for i < j lexicographic
trifocalF  f, q12 (4), q13 (4), T12 (3), T13 (3), rho for points 2..4
           [depth of point 1 in view 1 is 1]
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..polysys import Polynomial, PolynomialSystem, variables
from . import geometry as geo

KINDS = ("relpose5", "trace3", "p3p", "tri2", "tri3", "tri4", "trifocalF")
DEFAULT_FOCAL = 500.0


class DegenerateConfiguration(ValueError):
    pass


class DegenerateConfigurationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PoseGT:
    R: np.ndarray
    T: np.ndarray
    f: float | None = None
    depths: np.ndarray | None = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (3, 3) or not geo.is_rotation(R):
            raise ValueError("R is not a rotation matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", np.asarray(self.T, dtype=float).reshape(3))


@dataclass
class Instance:
    """Observations for one problem instance.

    ``points[k]`` is an ``(m, 3)`` array of image points seen in view k.
    ``E`` maps 0-based view pairs ``(i, j)``, i < j, to essential matrices
    with ``x_j^T E x_i = 0``.  ``gt`` holds the ground-truth unknown vector
    under ``"x"`` when it is known, plus kind-specific extras.
    """

    kind: str
    points: list
    E: dict = field(default_factory=dict)
    world: np.ndarray | None = None
    gt: dict | None = None
    focal: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        self.points = [np.asarray(p, dtype=float).reshape(-1, 3) for p in self.points]
        self.E = {tuple(k): np.asarray(v, dtype=float).reshape(3, 3) for k, v in self.E.items()}
        if self.world is not None:
            self.world = np.asarray(self.world, dtype=float).reshape(-1, 3)

    @property
    def views(self) -> int:
        return len(self.points)

    def gt_vector(self) -> np.ndarray | None:
        if not self.gt or "x" not in self.gt:
            return None
        return np.asarray(self.gt["x"], dtype=float)

    def to_json(self) -> str:
        def enc(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: enc(w) for k, w in v.items()}
            if isinstance(v, (list, tuple)):
                return [enc(w) for w in v]
            if isinstance(v, np.generic):
                return v.item()
            return v

        pairs = sorted(self.E)
        doc = {
            "kind": self.kind,
            "focal": self.focal,
            "points": [p.tolist() for p in self.points],
            "pairs": [list(p) for p in pairs],
            "E": [self.E[p].reshape(-1).tolist() for p in pairs],
        }
        if self.world is not None:
            doc["world"] = self.world.tolist()
        if self.gt is not None:
            doc["gt"] = enc(self.gt)
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        doc = json.loads(text)
        pairs = [tuple(p) for p in doc.get("pairs", [])]
        E = {p: np.array(e).reshape(3, 3) for p, e in zip(pairs, doc.get("E", []))}
        return cls(
            kind=doc["kind"],
            points=doc["points"],
            E=E,
            world=doc.get("world"),
            gt=doc.get("gt"),
            focal=doc.get("focal", 1.0),
        )


def write_instance(path, inst: Instance) -> None:
    with open(path, "w") as fh:
        fh.write(inst.to_json())


def read_instance(path) -> Instance:
    with open(path) as fh:
        return Instance.from_json(fh.read())


def _image_points(pts, count: int, what: str) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    if pts.shape[0] != count:
        raise ValueError(f"{what}: expected {count} points, got {pts.shape[0]}")
    if np.any(pts[:, 2] != 1.0):
        raise ValueError(f"{what}: image points need third component 1")
    return pts


def _warn_coincident(*views, tol: float = 1e-9) -> bool:
    for pts in views:
        for a, b in itertools.combinations(range(len(pts)), 2):
            if np.abs(pts[a] - pts[b]).max() < tol:
                warnings.warn(
                    f"coincident image points {a} and {b}", DegenerateConfigurationWarning, stacklevel=3
                )
                return True
    return False


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), start=0)


def _matvec(M, v):
    return [_dot(row, v) for row in M]


# --------------------------------------------------------------- relpose


def build_relpose_depth(gamma, gamma_bar) -> PolynomialSystem:
    """rhobar_i gammabar_i - rho_i R(q) gamma_i - T = 0 for five points, plus |q|^2 = 1."""
    g1 = _image_points(gamma, 5, "gamma")
    g2 = _image_points(gamma_bar, 5, "gamma_bar")
    _warn_coincident(g1, g2)
    x = variables(16)
    q, T, rho = x[0:4], x[4:7], x[7:12]
    rhobar = [1.0] + x[12:16]
    R = geo.rot_poly(q)
    eqs = []
    for i in range(5):
        Rg = _matvec(R, g1[i])
        for r in range(3):
            eqs.append(rhobar[i] * g2[i, r] - rho[i] * Rg[r] - T[r])
    eqs.append(_dot(q, q) - 1)
    return PolynomialSystem(16, eqs, name="relpose5-depth")


# ----------------------------------------------------------------- trace


def epipolar_rows(gamma, gamma_bar) -> np.ndarray:
    """Rows w_i with w_i . vec(E) = gammabar_i^T E gamma_i, E row-major."""
    g1 = np.asarray(gamma, dtype=float)
    g2 = np.asarray(gamma_bar, dtype=float)
    return np.einsum("ia,ib->iab", g2, g1).reshape(len(g1), 9)


def essential_basis(gamma, gamma_bar, rank_tol: float = 1e-10) -> np.ndarray:
    """Four 3x3 matrices spanning the right nullspace of the 5x9 epipolar rows."""
    W = epipolar_rows(gamma, gamma_bar)
    _, s, vt = np.linalg.svd(W)
    if s[-1] <= rank_tol * s[0]:
        raise DegenerateConfiguration("epipolar coefficient matrix is rank deficient")
    return vt[5:].reshape(4, 3, 3)


TRACE_ENTRIES = ((0, 0), (0, 1), (1, 0))


def build_trace_constraint(gamma, gamma_bar, entries=TRACE_ENTRIES) -> PolynomialSystem:
    """Selected entries of 2 E E^T E - tr(E E^T) E with E = a1 E1 + a2 E2 + a3 E3 + E4."""
    g1 = _image_points(gamma, 5, "gamma")
    g2 = _image_points(gamma_bar, 5, "gamma_bar")
    entries = tuple(tuple(e) for e in entries)
    if len(entries) != 3 or len(set(entries)) != 3:
        raise ValueError("need three distinct matrix entries")
    B = essential_basis(g1, g2)
    a = variables(3)
    coef = a + [Polynomial.constant(3, 1.0)]
    E = [[sum((coef[k] * B[k, r, c] for k in range(4)), start=0) for c in range(3)] for r in range(3)]
    EEt = [[_dot(E[r], E[c]) for c in range(3)] for r in range(3)]
    tr = EEt[0][0] + EEt[1][1] + EEt[2][2]
    eqs = []
    for r, c in entries:
        lhs = 2 * sum((EEt[r][k] * E[k][c] for k in range(3)), start=0)
        eqs.append(lhs - tr * E[r][c])
    return PolynomialSystem(3, eqs, name="trace3")


def trace_alpha(gamma, gamma_bar, E) -> np.ndarray:
    """Coordinates (alpha_1..3) of a known essential matrix in the nullspace basis."""
    B = essential_basis(gamma, gamma_bar).reshape(4, 9).T
    beta = np.linalg.lstsq(B, np.asarray(E, dtype=float).reshape(9), rcond=None)[0]
    return beta[:3] / beta[3]


def essential_from_alpha(gamma, gamma_bar, alpha) -> np.ndarray:
    B = essential_basis(gamma, gamma_bar)
    a = list(alpha) + [1.0]
    return sum(a[k] * B[k] for k in range(4))


# ------------------------------------------------------------------- p3p


def build_p3p_depth(world, rays) -> PolynomialSystem:
    """Pairwise distance and angle constraints in the three depths."""
    G = np.asarray(world, dtype=float).reshape(3, 3)
    g = _image_points(rays, 3, "rays")
    d2, d3 = G[1] - G[0], G[2] - G[0]
    area = np.linalg.norm(np.cross(d2, d3))
    if area <= 1e-9 * np.linalg.norm(d2) * np.linalg.norm(d3):
        raise DegenerateConfiguration("world points are collinear")
    rho = variables(3)
    P = [[rho[k] * g[k, r] for r in range(3)] for k in range(3)]
    v2 = [P[1][r] - P[0][r] for r in range(3)]
    v3 = [P[2][r] - P[0][r] for r in range(3)]
    eqs = [
        _dot(v2, v2) - float(d2 @ d2),
        _dot(v3, v3) - float(d3 @ d3),
        _dot(v2, v3) - float(d2 @ d3),
    ]
    return PolynomialSystem(3, eqs, name="p3p-depth")


def p3p_pose(world, rays, rho):
    """Recover (R, T) with world = rho_k R gamma_k + T from three depths."""
    G = np.asarray(world, dtype=float)
    P = np.asarray(rho, dtype=float)[:, None] * np.asarray(rays, dtype=float)
    Gc, Pc = G - G.mean(0), P - P.mean(0)
    U, _, Vt = np.linalg.svd(Gc.T @ Pc)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    R = U @ D @ Vt
    return R, G.mean(0) - R @ P.mean(0)


# --------------------------------------------------------- triangulation


def triangulation_pairs(views: int):
    return list(itertools.combinations(range(views), 2))


def build_triangulation(inst: Instance, views: int | None = None) -> PolynomialSystem:
    """Stationarity conditions of sum |d_k|^2 + sum_{i<j} l_ij (x_j - d_j)^T E_ij (x_i - d_i)."""
    N = inst.views if views is None else int(views)
    if N not in (2, 3, 4):
        raise ValueError("triangulation supports 2, 3 or 4 views")
    if inst.views < N:
        raise ValueError(f"instance has {inst.views} views, {N} requested")
    pairs = triangulation_pairs(N)
    missing = [p for p in pairs if p not in inst.E]
    if missing:
        raise ValueError(f"missing essential matrices for pairs {missing}")
    nv = 2 * N + len(pairs)
    x = variables(nv)
    obs = []
    for k in range(N):
        pt = inst.points[k].reshape(-1, 3)[0]
        obs.append([pt[0] - x[2 * k], pt[1] - x[2 * k + 1], Polynomial.constant(nv, pt[2])])
    lam = x[2 * N :]
    cons = []
    for (i, j) in pairs:
        E = inst.E[(i, j)]
        Ex = [_dot(E[r], obs[i]) for r in range(3)]
        cons.append(_dot(obs[j], Ex))
    L = sum((x[2 * k] ** 2 + x[2 * k + 1] ** 2 for k in range(N)), start=0)
    L = L + sum((l * c for l, c in zip(lam, cons)), start=0)
    eqs = [L.diff(v) for v in range(1, 2 * N + 1)] + cons
    return PolynomialSystem(nv, eqs, name=f"triangulation-{N}")


def triangulation_cost(x, views: int) -> float:
    x = np.asarray(x)
    return float(np.sum(np.abs(x[: 2 * views]) ** 2))


def best_triangulation(points, views: int):
    """Lowest-cost real critical point from a set of real solutions."""
    pts = [np.real(p) for p in points]
    if not pts:
        return None
    return min(pts, key=lambda p: triangulation_cost(p, views))


def hartley_sturm(x1, x2, E):
    """Optimal two-view correction via the degree-6 univariate polynomial.

    ``x2^T E x1 = 0`` convention.  Returns the corrected points (h1, h2)
    as ``(xi, eta, 1)`` vectors.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    T1 = np.array([[1, 0, -x1[0]], [0, 1, -x1[1]], [0, 0, 1.0]])
    T2 = np.array([[1, 0, -x2[0]], [0, 1, -x2[1]], [0, 0, 1.0]])
    F = np.linalg.inv(T2).T @ np.asarray(E, dtype=float) @ np.linalg.inv(T1)
    e1 = np.linalg.svd(F)[2][-1]
    e2 = np.linalg.svd(F.T)[2][-1]
    e1 = e1 / np.hypot(e1[0], e1[1])
    e2 = e2 / np.hypot(e2[0], e2[1])
    R1 = np.array([[e1[0], e1[1], 0], [-e1[1], e1[0], 0], [0, 0, 1.0]])
    R2 = np.array([[e2[0], e2[1], 0], [-e2[1], e2[0], 0], [0, 0, 1.0]])
    F = R2 @ F @ R1.T
    f1, f2 = e1[2], e2[2]
    a, b, c, d = F[1, 1], F[1, 2], F[2, 1], F[2, 2]
    P = np.polynomial.Polynomial
    t = P([0, 1])
    at_b, ct_d = a * t + b, c * t + d
    g = t * (at_b**2 + f2**2 * ct_d**2) ** 2 - (a * d - b * c) * (1 + f1**2 * t**2) ** 2 * at_b * ct_d

    def cost(tt):
        return tt**2 / (1 + f1**2 * tt**2) + (c * tt + d) ** 2 / ((a * tt + b) ** 2 + f2**2 * (c * tt + d) ** 2)

    roots = g.roots()
    cands = [r.real for r in roots if abs(r.imag) < 1e-9 * max(1.0, abs(r))]
    best = min(cands, key=cost, default=None)
    inf_cost = 1 / f1**2 + c**2 / (a**2 + f2**2 * c**2) if f1 != 0 else np.inf
    if best is None or inf_cost < cost(best):
        l1 = np.array([f1, 0.0, -1.0])
        l2 = np.array([-f2 * c, a, c])
    else:
        l1 = np.array([best * f1, 1.0, -best])
        l2 = np.array([-f2 * (c * best + d), a * best + b, c * best + d])

    def foot(l):
        return np.array([-l[0] * l[2], -l[1] * l[2], l[0] ** 2 + l[1] ** 2])

    h1 = np.linalg.inv(T1) @ R1.T @ foot(l1)
    h2 = np.linalg.inv(T2) @ R2.T @ foot(l2)
    return h1 / h1[2], h2 / h2[2]


# -------------------------------------------------------------- trifocal


def build_trifocal_focal(p1, p2, p3) -> PolynomialSystem:
    """Three views, four points, common unknown focal length.

    With g_k = (xi_k, eta_k, f) = f K^{-1} x_k the motion equations read
    rho' g' = rho R g + f T.  The third row gives rho' f, which is
    substituted into the first two rows, leaving two equations per point
    and view pair.
    """
    views = [_image_points(p, 4, f"view {k + 1}") for k, p in enumerate((p1, p2, p3))]
    _warn_coincident(*views)
    x = variables(18)
    f = x[0]
    q12, q13 = x[1:5], x[5:9]
    T12, T13 = x[9:12], x[12:15]
    rho = [1.0] + x[15:18]
    eqs = []
    for p in range(4):
        g1 = [views[0][p, 0], views[0][p, 1], f]
        for q, T, other in ((q12, T12, views[1]), (q13, T13, views[2])):
            Rg = _matvec(geo.rot_poly(q), g1)
            depth3 = rho[p] * Rg[2] + f * T[2]
            for r in range(2):
                eqs.append(other[p, r] * depth3 - f * (rho[p] * Rg[r] + f * T[r]))
    eqs.append(_dot(q12, q12) - 1)
    eqs.append(_dot(q13, q13) - 1)
    return PolynomialSystem(18, eqs, name="trifocal-focal")


# ------------------------------------------------------------- synthesis


def build_system(inst: Instance) -> PolynomialSystem:
    k = inst.kind
    if k == "relpose5":
        return build_relpose_depth(inst.points[0], inst.points[1])
    if k == "trace3":
        return build_trace_constraint(inst.points[0], inst.points[1])
    if k == "p3p":
        return build_p3p_depth(inst.world, inst.points[0])
    if k in ("tri2", "tri3", "tri4"):
        return build_triangulation(inst, int(k[3]))
    return build_trifocal_focal(*inst.points)


_ALIASES = {"triangulation2": "tri2", "triangulation3": "tri3", "triangulation4": "tri4"}


def _noisy(rng, pts, sigma):
    out = np.array(pts, dtype=float)
    if sigma:
        out[..., :2] += rng.normal(scale=sigma, size=out[..., :2].shape)
    return out


def _two_view_scene(rng, n):
    while True:
        R = geo.random_rotation(rng, max_angle=0.6)
        T = rng.normal(size=3)
        T /= np.linalg.norm(T)
        X = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(3, 6, n)])
        Xb = X @ R.T + T
        if np.all(Xb[:, 2] > 0.5):
            return R, T, X, Xb


def synth_instance(kind: str, seed: int = 0, noise: float = 0.0, focal: float = DEFAULT_FOCAL,
                   pose_noise: float = 0.0):
    """Random well-conditioned instance of ``kind`` and its ground truth.

    ``noise`` is the standard deviation of Gaussian image noise in pixels for
    a camera of focal length ``focal``; observations are stored in
    normalized coordinates (pixels / focal).  For ``trifocalF`` the true
    focal length differs from ``focal`` by a random factor in [0.8, 1.2], so
    the unknown f is that factor.  For triangulation kinds ``pose_noise``
    (degrees) perturbs each camera rotation, and the camera centre by the
    same angle times the viewing distance, before the pairwise essential
    matrices are formed.  Returns ``(Instance, PoseGT)``.
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown instance kind {kind!r}")
    rng = np.random.default_rng([seed, 0x5EED, KINDS.index(kind)])
    sigma = noise / focal
    if kind in ("relpose5", "trace3"):
        R, T, X, Xb = _two_view_scene(rng, 5)
        g1 = X / X[:, 2:3]
        g2 = Xb / Xb[:, 2:3]
        pose = PoseGT(R, T, depths=X[:, 2])
        clean = [g1, g2]
        pts = [_noisy(rng, g1, sigma), _noisy(rng, g2, sigma)]
        E = geo.essential(R, T)
        if kind == "relpose5":
            s = 1.0 / Xb[0, 2]
            x = np.concatenate([geo.rot_to_quat(R), T * s, X[:, 2] * s, Xb[1:, 2] * s])
        else:
            x = trace_alpha(g1, g2, E)
        gt = {"x": x, "R": R, "T": T, "E": E, "clean": clean}
        return Instance(kind, pts, gt=gt, focal=focal), pose
    if kind == "p3p":
        Rc = geo.random_rotation(rng)
        Tc = rng.normal(size=3)
        rho = rng.uniform(3, 6, 3)
        g = np.column_stack([rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3), np.ones(3)])
        world = rho[:, None] * g @ Rc.T + Tc
        pose = PoseGT(Rc, Tc, depths=rho)
        gt = {"x": rho, "R": Rc, "T": Tc}
        return Instance(kind, [_noisy(rng, g, sigma)], world=world, gt=gt, focal=focal), pose
    if kind == "trifocalF":
        f = rng.uniform(0.8, 1.2)
        R12, T12, X, _ = _two_view_scene(rng, 4)
        while True:
            R13 = geo.random_rotation(rng, max_angle=0.6)
            T13 = rng.normal(size=3)
            if np.all((X @ R13.T + T13)[:, 2] > 0.5):
                break
        pts = []
        for R, T in ((np.eye(3), np.zeros(3)), (R12, T12), (R13, T13)):
            Y = X @ R.T + T
            img = Y / Y[:, 2:3]
            img[:, :2] *= f
            pts.append(img)
        s = 1.0 / X[0, 2]
        x = np.concatenate([[f], geo.rot_to_quat(R12), geo.rot_to_quat(R13), T12 * s, T13 * s, X[1:, 2] * s])
        clean = [p.copy() for p in pts]
        pts = [_noisy(rng, p, sigma) for p in pts]
        pose = PoseGT(R12, T12, f=f * focal, depths=X[:, 2])
        gt = {"x": x, "R12": R12, "T12": T12, "R13": R13, "T13": T13, "f": f, "clean": clean}
        return Instance(kind, pts, gt=gt, focal=focal), pose
    N = int(kind[3])
    poses = geo.look_at_rig(rng, N)
    Xw = rng.normal(scale=0.5, size=3)
    clean = [geo.project(R, t, Xw)[0] for R, t in poses]
    pts = [_noisy(rng, c[None, :], sigma) for c in clean]
    calib = poses
    if pose_noise:
        sig = np.deg2rad(pose_noise)
        calib = []
        for R, t in poses:
            c = -R.T @ t
            c = c + rng.normal(scale=sig * np.linalg.norm(c), size=3)
            Rp = geo.perturb_rotation(rng, R, sig)
            calib.append((Rp, -Rp @ c))
    E = {}
    for i, j in triangulation_pairs(N):
        Rij, Tij = geo.relative_pose(*calib[i], *calib[j])
        E[(i, j)] = geo.essential(Rij, Tij)
    gt = {"clean": [c[None, :] for c in clean], "X": Xw}
    if not noise and not pose_noise:
        gt["x"] = np.zeros(2 * N + N * (N - 1) // 2)
    R0, t0 = poses[0]
    pose = PoseGT(R0, t0, depths=np.array([geo.project(R, t, Xw)[1] for R, t in poses]))
    return Instance(kind, pts, E=E, gt=gt, focal=focal), pose
