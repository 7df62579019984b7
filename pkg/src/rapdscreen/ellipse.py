"""Direct least-squares conic fitting with an ellipse constraint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError

__all__ = ["Ellipse", "fit_ellipse_lsq"]


@dataclass(frozen=True)
class Ellipse:
    """Geometric ellipse: center, semi-axes a >= b > 0, rotation in [0, pi)."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation: float

    @property
    def axis_ratio(self) -> float:
        return self.semi_axes[1] / self.semi_axes[0]

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized interior test (boundary counts as inside)."""
        a, b = self.semi_axes
        ct, st = np.cos(self.rotation), np.sin(self.rotation)
        dx = xs - self.center[0]
        dy = ys - self.center[1]
        u = dx * ct + dy * st
        v = -dx * st + dy * ct
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0

    def radial_residuals(self, points: np.ndarray) -> np.ndarray:
        """Distance of each point from the boundary along its radial ray."""
        a, b = self.semi_axes
        ct, st = np.cos(self.rotation), np.sin(self.rotation)
        dx = points[:, 0] - self.center[0]
        dy = points[:, 1] - self.center[1]
        u = dx * ct + dy * st
        v = -dx * st + dy * ct
        r = np.hypot(u, v)
        theta = np.arctan2(v, u)
        denom = np.hypot(b * np.cos(theta), a * np.sin(theta))
        boundary = np.where(denom > 0, a * b / np.maximum(denom, 1e-12), 0.0)
        return np.abs(r - boundary)


def _conic_to_geometric(coeffs: np.ndarray) -> Ellipse:
    A, B, C, D, E, F = coeffs
    disc = B * B - 4 * A * C
    if disc >= 0:
        raise FitError("fitted conic is not an ellipse")
    # center solves the gradient system of the quadratic form
    cx = (2 * C * D - B * E) / disc
    cy = (2 * A * E - B * D) / disc
    f0 = F + (D * cx + E * cy) / 2.0
    quad = np.array([[A, B / 2.0], [B / 2.0, C]])
    eigvals, eigvecs = np.linalg.eigh(quad)
    scale = -f0
    if scale <= 0 or (eigvals <= 0).any():
        # flip overall sign if the fit came out negated
        eigvals, scale = -eigvals, -scale
        if scale <= 0 or (eigvals <= 0).any():
            raise FitError("degenerate conic (no real ellipse)")
    axes = np.sqrt(scale / eigvals)
    order = np.argsort(axes)[::-1]
    a, b = float(axes[order[0]]), float(axes[order[1]])
    major = eigvecs[:, order[0]]
    rotation = float(np.arctan2(major[1], major[0])) % np.pi
    if not (a >= b > 0):
        raise FitError("invalid semi-axes from conic")
    return Ellipse(center=(float(cx), float(cy)), semi_axes=(a, b), rotation=rotation)


def fit_ellipse_lsq(points) -> Ellipse:
    """Fit an ellipse to >= 5 points by the numerically stable direct
    conic least-squares method (quadratic/linear block split).

    Raises FitError on degenerate or collinear configurations.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 5:
        raise FitError(f"need at least 5 (x, y) points, got shape {pts.shape}")
    mean = pts.mean(axis=0)
    x = pts[:, 0] - mean[0]
    y = pts[:, 1] - mean[1]

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise FitError("degenerate point configuration") from exc
    m = s1 + s2 @ t
    # premultiply by inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]]
    reduced = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    eigvals, eigvecs = np.linalg.eig(reduced)
    cond = 4 * eigvecs[0] * eigvecs[2] - eigvecs[1] ** 2
    valid = np.where(np.isreal(eigvals) & (np.real(cond) > 0))[0]
    if valid.size == 0:
        raise FitError("no ellipse solution (points may be collinear)")
    a1 = np.real(eigvecs[:, valid[0]])
    a2 = t @ a1
    A, B, C = a1
    D, E, F = a2
    # undo the centering shift
    D0 = D - 2 * A * mean[0] - B * mean[1]
    E0 = E - 2 * C * mean[1] - B * mean[0]
    F0 = F + A * mean[0] ** 2 + B * mean[0] * mean[1] + C * mean[1] ** 2 - D * mean[0] - E * mean[1]
    return _conic_to_geometric(np.array([A, B, C, D0, E0, F0]))
