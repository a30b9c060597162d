"""Joint-type and parameter estimation from short probe trajectories.

Pipeline: probe the object with small forces in four directions, then fit
both a line (prismatic) and a spatial circle (revolute) to the recorded
contact-point positions, and pick the joint type by penalized Gaussian
log-likelihood (BIC).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

SIGMA_FLOOR = 1e-6  # meters; keeps the likelihood finite on noiseless data
K_PRISMATIC = 5     # 2 axis d.o.f. + 3 origin
K_REVOLUTE = 7      # 2 axis d.o.f. + 3 point + radius + phase

GN_MAX_ITER = 100
GN_STEP_TOL = 1e-12


class DegenerateTrajectoryError(ValueError):
    """All probe points coincide; nothing can be fitted."""


class IllPosedFitError(ValueError):
    """The requested model cannot be fitted to this trajectory (e.g. a
    circle to exactly collinear points)."""


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray  # (N, 3)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"trajectory must be (N, 3), got {pts.shape}")
        if len(pts) < 4:
            raise ValueError(f"trajectory needs at least 4 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def transformed(self, rotation: np.ndarray, translation) -> "Trajectory":
        return Trajectory(self.points @ np.asarray(rotation, float).T + np.asarray(translation, float))


@dataclass
class ProbeConfig:
    directions: np.ndarray  # (4, 3) unit rows: forward, backward, left, right
    probe_force: float = 0.01
    steps_per_direction: int = 10
    dt: float = 0.05
    rho: float = 2.0  # max plausible revolute radius (m)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (4, 3):
            raise ValueError(f"need 4 probe directions, got shape {d.shape}")
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("probe directions must be unit vectors")
        self.directions = d
        if not self.probe_force > 0:
            raise ValueError("probe_force must be > 0")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")


def default_probe_directions(base_yaw: float = 0.0) -> np.ndarray:
    """Forward/backward/left/right in the object's yaw-rotated nominal frame."""
    c, s = math.cos(base_yaw), math.sin(base_yaw)
    fwd = np.array([c, s, 0.0])
    left = np.array([-s, c, 0.0])
    return np.stack([fwd, -fwd, left, -left])


@dataclass
class PrismaticFit:
    axis: np.ndarray
    origin: np.ndarray
    rss: float
    log_likelihood: float = float("nan")


@dataclass
class RevoluteFit:
    axis: np.ndarray
    point: np.ndarray
    radius: float
    rss: float
    log_likelihood: float = float("nan")


@dataclass
class JointEstimate:
    kind: str  # "prismatic" | "revolute"
    parameters: PrismaticFit | RevoluteFit
    loglik_prismatic: float
    loglik_revolute: float
    prismatic_fit: PrismaticFit | None = None
    revolute_fit: RevoluteFit | None = None


def probe(plant, config: ProbeConfig) -> Trajectory:
    """Apply the four-direction force sequence and record contact positions.

    plant.apply(force) advances one timestep and returns the new world
    contact-point position; object state is not reset between directions.
    """
    points = []
    for direction in config.directions:
        force = config.probe_force * direction
        for _ in range(config.steps_per_direction):
            points.append(np.asarray(plant.apply(force), dtype=float))
    return Trajectory(np.stack(points))


def pca_init(xi: Trajectory):
    """Eigendecomposition of the point covariance.

    Returns (eigvecs, eigvals, centroid) with eigenvalues descending and a
    right-handed eigenbasis (columns of eigvecs).
    """
    pts = xi.points
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    if np.linalg.det(eigvecs) < 0:
        eigvecs[:, 2] = -eigvecs[:, 2]
    if eigvals[0] <= 1e-24:
        raise DegenerateTrajectoryError("all trajectory points coincide")
    return eigvecs, eigvals, centroid


def fit_prismatic(xi: Trajectory) -> PrismaticFit:
    """Closed-form line fit: centroid + dominant principal direction."""
    eigvecs, eigvals, centroid = pca_init(xi)
    axis = eigvecs[:, 0]
    if axis @ (xi.points[-1] - xi.points[0]) < 0:
        axis = -axis
    d = xi.points - centroid
    perp = d - np.outer(d @ axis, axis)
    rss = float(np.sum(perp ** 2))
    return PrismaticFit(axis=axis, origin=centroid, rss=rss)


def _circle_residuals(pts: np.ndarray, center: np.ndarray, axis: np.ndarray, radius: float) -> np.ndarray:
    """Per-point (axial, radial) residuals against a spatial circle; flat (2N,)."""
    d = pts - center
    ax = d @ axis
    rad = np.linalg.norm(d - np.outer(ax, axis), axis=1)
    return np.concatenate([ax, rad - radius])


def _perp_basis(h: np.ndarray):
    ref = np.array([1.0, 0.0, 0.0]) if abs(h[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(h, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(h, e1)
    return e1, e2


def _gauss_newton_circle(pts, center, axis, radius, fix_radius=None):
    """Damped Gauss-Newton on (center, axis, radius); finite-difference Jacobian.

    With fix_radius set, the radius stays pinned and only center/axis move.
    The accepted iterate never increases the residual sum of squares.
    """
    center = center.copy()
    axis = axis / np.linalg.norm(axis)
    radius = float(radius if fix_radius is None else fix_radius)
    n_par = 5 if fix_radius is not None else 6
    lam = 1e-8

    def unpack(theta):
        c = center + theta[:3]
        e1, e2 = _perp_basis(axis)
        h = axis + theta[3] * e1 + theta[4] * e2
        h = h / np.linalg.norm(h)
        r = radius if fix_radius is not None else radius + theta[5]
        return c, h, r

    res = _circle_residuals(pts, center, axis, radius)
    rss = float(res @ res)
    for _ in range(GN_MAX_ITER):
        theta0 = np.zeros(n_par)
        jac = np.empty((len(res), n_par))
        eps = 1e-7
        for j in range(n_par):
            tp = theta0.copy()
            tp[j] = eps
            cp, hp, rp = unpack(tp)
            tm = theta0.copy()
            tm[j] = -eps
            cm, hm, rm = unpack(tm)
            jac[:, j] = (_circle_residuals(pts, cp, hp, rp)
                         - _circle_residuals(pts, cm, hm, rm)) / (2 * eps)
        g = jac.T @ res
        jtj = jac.T @ jac
        step = None
        for _ in range(20):
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(n_par), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            c_new, h_new, r_new = unpack(delta)
            if fix_radius is None and r_new <= 0:
                lam *= 10.0
                continue
            res_new = _circle_residuals(pts, c_new, h_new, r_new)
            rss_new = float(res_new @ res_new)
            if rss_new <= rss:
                step = (delta, c_new, h_new, r_new, res_new, rss_new)
                break
            lam *= 10.0
        if step is None:
            break
        delta, center, axis, radius, res, rss = step
        lam = max(lam * 0.1, 1e-12)
        if np.linalg.norm(delta) < GN_STEP_TOL:
            break
    return center, axis, radius, rss


def _algebraic_circle_seed(xi: Trajectory):
    """PCA plane + linear least-squares (Kasa) circle fit as the GN seed."""
    eigvecs, eigvals, centroid = pca_init(xi)
    if eigvals[1] <= max(eigvals[0] * 1e-12, 1e-24):
        raise IllPosedFitError("trajectory is collinear; circle fit is ill-posed")
    v1, v2, normal = eigvecs[:, 0], eigvecs[:, 1], eigvecs[:, 2]
    d = xi.points - centroid
    x = d @ v1
    y = d @ v2
    a_mat = np.column_stack([2 * x, 2 * y, np.ones(len(x))])
    rhs = x ** 2 + y ** 2
    sol, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    cx, cy, c0 = sol
    r2 = c0 + cx ** 2 + cy ** 2
    radius = math.sqrt(r2) if r2 > 0 else float("inf")
    center = centroid + cx * v1 + cy * v2
    return center, normal, radius


def _orient_axis(pts: np.ndarray, center: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Flip the axis if the observed angular progression is negative."""
    e1, e2 = _perp_basis(axis)
    d = pts - center
    ang = np.unwrap(np.arctan2(d @ e2, d @ e1))
    if ang[-1] - ang[0] < 0:
        return -axis
    return axis


def fit_revolute(xi: Trajectory, rho: float = 2.0) -> RevoluteFit:
    """Spatial-circle fit with algebraic seed, Gauss-Newton refinement, and
    the physical-plausibility clamp radius <= rho."""
    center, axis, radius = _algebraic_circle_seed(xi)
    if not math.isfinite(radius) or radius > 100 * rho:
        radius = rho
    center, axis, radius, rss = _gauss_newton_circle(xi.points, center, axis, radius)
    if radius > rho:
        center, axis, radius, rss = _gauss_newton_circle(
            xi.points, center, axis, radius, fix_radius=rho)
    axis = _orient_axis(xi.points, center, axis)
    return RevoluteFit(axis=axis, point=center, radius=float(radius), rss=float(rss))


def log_likelihood(xi: Trajectory, rss: float, k_params: int) -> float:
    """BIC-penalized Gaussian log-likelihood of the fit residuals."""
    n = len(xi)
    if n < k_params + 1:
        raise ValueError(f"need more than {k_params} points, got {n}")
    sigma2 = max(rss / n, SIGMA_FLOOR ** 2)
    loglik = -0.5 * n * math.log(2 * math.pi * sigma2) - rss / (2 * sigma2)
    return loglik - 0.5 * k_params * math.log(n)


def classify(xi: Trajectory, config: ProbeConfig | None = None) -> JointEstimate:
    """Fit both joint models and select the more likely one.

    Exactly collinear trajectories (where the circle fit is ill-posed) and
    exact score ties both resolve to the simpler prismatic model.
    """
    rho = config.rho if config is not None else 2.0
    pris = fit_prismatic(xi)
    pris.log_likelihood = log_likelihood(xi, pris.rss, K_PRISMATIC)
    try:
        rev = fit_revolute(xi, rho)
    except IllPosedFitError:
        return JointEstimate(kind="prismatic", parameters=pris,
                             loglik_prismatic=pris.log_likelihood,
                             loglik_revolute=float("-inf"),
                             prismatic_fit=pris, revolute_fit=None)
    rev.log_likelihood = log_likelihood(xi, rev.rss, K_REVOLUTE)
    if rev.log_likelihood > pris.log_likelihood:
        kind, params = "revolute", rev
    else:
        kind, params = "prismatic", pris
    return JointEstimate(kind=kind, parameters=params,
                         loglik_prismatic=pris.log_likelihood,
                         loglik_revolute=rev.log_likelihood,
                         prismatic_fit=pris, revolute_fit=rev)


# ---- trajectory I/O ------------------------------------------------------

def save_trajectory_csv(xi: Trajectory, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "x", "y", "z"])
        for i, p in enumerate(xi.points):
            writer.writerow([i, repr(float(p[0])), repr(float(p[1])), repr(float(p[2]))])


def load_trajectory_csv(path) -> Trajectory:
    pts = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["i", "x", "y", "z"]:
            raise ValueError(f"unexpected trajectory header: {header}")
        for row in reader:
            pts.append([float(row[1]), float(row[2]), float(row[3])])
    return Trajectory(np.asarray(pts))
