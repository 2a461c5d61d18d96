"""Half-domain cell-centered grids and Fermi data for embedded plane curves.

Grids are cell-centered on purpose: no unknown ever sits on the
characteristic hyperplane {y = 0}, so singular weights (a <= -1) stay finite
at every sampled point; the smallest ordinate is h/2.  The half disk is the
staircase subset of the half rectangle whose cell centers satisfy |z| <= 1
(documented first-order boundary error; eigenvalue work uses the conforming
nodal mesh in :mod:`degenlab.spectral` instead).

For an embedded plane curve with unit normal pointing into the positive side,
the parallel-surface volume element is sqrt(det g^y) = |psi'(x)| (1 - y k(x)),
which doubles as the scalar coefficient mu(x, y) of the transformed operator;
the mean curvature of the parallel curve satisfies
H_y = -(d/dy) sqrt(det g^y) / sqrt(det g^y) = k/(1 - y k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np


class ChartError(ValueError):
    """Raised when (x, y) leaves the tubular neighborhood (y * kappa >= 1)."""


class AmbiguousProjectionError(ValueError):
    """Raised when a point has two or more equidistant feet on the curve."""


@dataclass(frozen=True)
class HalfGrid:
    """Cell-centered grid on x in [-1,1]^n, y in (0,1], optionally disk-masked.

    Cells are indexed by integer coordinates (i_1[, i_2], j) with centers
    x_d = -1 + (i_d + 1/2) h and y = (j + 1/2) h.  ``index`` maps lattice
    coords to the dense dof numbering (-1 for masked-out cells).
    """

    n: int
    shape: str                    # 'half_rectangle' | 'half_disk'
    h: float
    nx: int                       # cells per x-axis
    ny: int                       # cells in y
    index: np.ndarray = field(repr=False)     # lattice -> dof, shape (nx,)*n + (ny,)
    centers: np.ndarray = field(repr=False)   # (ncells, n+1)

    @property
    def ncells(self) -> int:
        return self.centers.shape[0]

    @property
    def num_sigma_faces(self) -> int:
        bottom = self.index[..., 0]
        return int(np.count_nonzero(bottom >= 0))

    def sigma_face_midpoints(self) -> np.ndarray:
        """Midpoints (on y = 0) of the faces separating bottom cells from the plane."""
        bottom = self.index[..., 0]
        sel = np.nonzero(bottom >= 0)
        mids = self.centers[bottom[sel]].copy()
        mids[:, -1] = 0.0
        return mids

    def lattice_shape(self) -> Tuple[int, ...]:
        return (self.nx,) * self.n + (self.ny,)

    def describe(self) -> str:
        return (f"n={self.n} shape={self.shape} h={self.h:.12g} "
                f"cells={self.ncells} sigma_faces={self.num_sigma_faces}")


def build_half_grid(n: int, shape: str, h: float) -> HalfGrid:
    """Construct a half-rectangle or half-disk grid of spacing h (h <= 1/8)."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    if shape not in ("half_rectangle", "half_disk"):
        raise ValueError(f"unknown shape {shape!r}")
    if shape == "half_disk" and n != 1:
        raise ValueError("half_disk is implemented for n=1 (plane half disk)")
    if h > 0.25 + 1e-15:
        raise ValueError(f"h must be <= 1/4, got {h}")
    nx = 2.0 / h
    ny = 1.0 / h
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ValueError(f"h={h} does not divide the domain extents")
    nx, ny = int(round(nx)), int(round(ny))
    axes = [(-1.0 + (np.arange(nx) + 0.5) * h) for _ in range(n)]
    ys = (np.arange(ny) + 0.5) * h
    grids = np.meshgrid(*axes, ys, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    if shape == "half_disk":
        mask = (pts ** 2).sum(axis=1) <= 1.0 + 1e-12
    else:
        mask = np.ones(pts.shape[0], dtype=bool)
    index = -np.ones(pts.shape[0], dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    lattice = index.reshape((nx,) * n + (ny,))
    return HalfGrid(n=n, shape=shape, h=h, nx=nx, ny=ny,
                    index=lattice, centers=pts[mask])


# ---------------------------------------------------------------------------
# Embedded curves and Fermi data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddedCurve:
    """Plane curve t in [0, 1] -> psi(t), with signed curvature sampler.

    The unit normal is the +90-degree rotation of the unit tangent,
    nu = rot90(psi'/|psi'|) with rot90(v) = (-v2, v1); curvature is signed so
    that kappa > 0 bends the curve toward the side nu points into (the y > 0
    side of the Fermi chart).
    """

    psi: Callable[[float], np.ndarray]
    dpsi: Callable[[float], np.ndarray]
    curvature: Callable[[float], float]

    def speed(self, t: float) -> float:
        return float(np.linalg.norm(self.dpsi(t)))

    def normal(self, t: float) -> np.ndarray:
        v = self.dpsi(t)
        s = np.linalg.norm(v)
        if s < 1e-14:
            raise ValueError("degenerate parametrization: |psi'| ~ 0")
        return np.array([-v[1], v[0]]) / s

    def point(self, t: float, y: float = 0.0) -> np.ndarray:
        """The Fermi map Z(t, y) = psi(t) + y nu(t)."""
        return np.asarray(self.psi(t), dtype=float) + y * self.normal(t)

    @staticmethod
    def line(origin=(0.0, 0.0), direction=(1.0, 0.0), length: float = 1.0) -> "EmbeddedCurve":
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d) * length
        return EmbeddedCurve(psi=lambda t: o + t * d,
                             dpsi=lambda t: d,
                             curvature=lambda t: 0.0)

    @staticmethod
    def circle(radius: float, center=(0.0, 0.0), arc: float = 1.0,
               theta0: float = 0.0, normal_side: str = "inward") -> "EmbeddedCurve":
        """Arc of a circle, parametrized with constant speed = ``arc`` length.

        normal_side='inward' makes the Fermi ordinate grow toward the center
        (kappa = +1/R); 'outward' grows away from it (kappa = -1/R)."""
        c = np.asarray(center, dtype=float)
        if normal_side == "inward":
            kap, orient = 1.0 / radius, 1.0
        elif normal_side == "outward":
            kap, orient = -1.0 / radius, -1.0
        else:
            raise ValueError("normal_side must be 'inward' or 'outward'")

        def psi(t):
            th = theta0 + orient * arc * t / radius
            return c + radius * np.array([math.cos(th), math.sin(th)])

        def dpsi(t):
            th = theta0 + orient * arc * t / radius
            return orient * arc * np.array([-math.sin(th), math.cos(th)])

        return EmbeddedCurve(psi=psi, dpsi=dpsi, curvature=lambda t: kap)


def fermi_mu(curve: EmbeddedCurve, x: float, y: float) -> float:
    """sqrt(det g^y) = |psi'(x)| (1 - y kappa(x)); the coefficient mu(x, y).

    Raises :class:`ChartError` outside the tubular neighborhood."""
    k = curve.curvature(x)
    if y * k >= 1.0:
        raise ChartError(f"Fermi chart invalid: y*kappa = {y * k:.3g} >= 1")
    return curve.speed(x) * (1.0 - y * k)


def mean_curvature_check(curve: EmbeddedCurve, x: float, y: float,
                         fd_step: float = 1e-4) -> Tuple[float, float]:
    """Mean curvature of the parallel curve two ways: analytic and from mu.

    Returns (H_y, residual) with H_y = kappa/(1 - y kappa) and residual the
    difference against -(d/dy) mu / mu by central differences."""
    k = curve.curvature(x)
    if y * k >= 1.0:
        raise ChartError(f"Fermi chart invalid: y*kappa = {y * k:.3g} >= 1")
    H = k / (1.0 - y * k)
    mu0 = fermi_mu(curve, x, y)
    mup = fermi_mu(curve, x, y + fd_step)
    mum = fermi_mu(curve, x, y - fd_step)
    H_fd = -(mup - mum) / (2.0 * fd_step) / mu0
    return H, abs(H - H_fd)


def signed_distance(curve: EmbeddedCurve, X, n_scan: int = 1024,
                    ambiguity_rtol: float = 1e-6) -> Tuple[float, float]:
    """Signed distance of a plane point to the curve, plus the foot parameter.

    Positive on the side the normal points into.  A dense parameter scan
    brackets the nearest foot and golden-section refinement polishes it;
    if two separated feet are equidistant (within ambiguity_rtol relative)
    an :class:`AmbiguousProjectionError` is raised."""
    X = np.asarray(X, dtype=float)
    ts = np.linspace(0.0, 1.0, n_scan + 1)
    d2 = np.array([np.sum((np.asarray(curve.psi(t)) - X) ** 2) for t in ts])
    k = int(np.argmin(d2))

    # detect a second, separated, equally-near local minimum
    interior = np.r_[False, (d2[1:-1] <= d2[:-2]) & (d2[1:-1] <= d2[2:]), False]
    local = np.nonzero(interior)[0]
    near = [i for i in local if abs(ts[i] - ts[k]) > 10.0 / n_scan]
    if near:
        second = min(d2[i] for i in near)
        best = d2[k]
        if best > 0 and abs(math.sqrt(second) - math.sqrt(best)) <= ambiguity_rtol * math.sqrt(best):
            raise AmbiguousProjectionError(
                f"point {X.tolist()} has equidistant projections on the curve")

    lo = ts[max(k - 1, 0)]
    hi = ts[min(k + 1, n_scan)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - gr * (b - a), a + gr * (b - a)

    def f(t):
        return float(np.sum((np.asarray(curve.psi(t)) - X) ** 2))

    fc, fd = f(c), f(d)
    for _ in range(120):
        if b - a < 1e-14:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    t_star = (a + b) / 2.0
    foot = np.asarray(curve.psi(t_star), dtype=float)
    delta = X - foot
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        return 0.0, float(t_star)
    sign = 1.0 if float(np.dot(delta, curve.normal(t_star))) >= 0 else -1.0
    return sign * dist, float(t_star)
