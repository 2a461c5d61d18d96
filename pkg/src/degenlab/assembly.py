"""Flux-form finite volumes for -div(w A grad u) = w f + div(w F) + w b.grad u.

Unknowns are cell averages at cell centers; the discrete operator is built
from face transmissibilities

    tau_f = (face area) / R_f,      R_f = int_segment ds / (w * A_nn),

so that the bilinear form sum_f tau_f (u_hi - u_lo)(v_hi - v_lo) is symmetric
and positive.  For y-faces the resistance integral R_f is evaluated exactly
through the characteristic antiderivative of the weight family (the odd
comparison solution is literally the resistance function of the operator in
the y-direction); x-faces use the harmonic mean of the adjacent cell weights
with the tensor factor at the face midpoint.  This keeps the scheme exact for
the model odd solution in one dimension and uniformly well behaved across the
degenerate/singular range of exponents.

Boundary handling:
* characteristic plane (y = 0): odd parity imposes u = 0 through the exact
  half-cell resistance; even parity imposes zero weighted flux (no term).
* outer boundary (including the staircase of masked half-disk cells):
  Dirichlet data enter through half-cell transmissibilities, first order.

The drift term is a centered-difference contribution folded into the matrix
(nonsymmetric part); a zero drift sampler produces exactly the drift-free
matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import HalfGrid
from .weights import (
    CharacteristicSolution,
    SingularWeightError,
    WeightFamily,
    chi,
    rho,
)

DIRECT_SOLVE_MAX = 5_000
ITERATION_CAP = 100_000


class ParityError(ValueError):
    """Raised when a sampled exact solution does not respect the stated parity."""


class EllipticityError(ValueError):
    """Raised when the assembled tensor fails the uniform ellipticity check."""


# ---------------------------------------------------------------------------
# Operator coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSpec:
    """Coefficient tensor A = mu * [[B_tilde, T], [T^t, 1]] with metadata.

    ``mu(x, y)`` is scalar with 1/C <= mu <= C; ``b_tilde(x, y)`` returns the
    (n, n) block (scalar for n = 1); ``t_field(x, y)`` returns the coupling
    vector (scalar for n = 1) and must vanish at y = 0.  All default to the
    identity tensor.  x is a scalar for n = 1 and a length-2 tuple for n = 2.
    """

    mu: Optional[Callable] = None
    b_tilde: Optional[Callable] = None
    t_field: Optional[Callable] = None

    def mu_val(self, x, y) -> float:
        return 1.0 if self.mu is None else float(self.mu(x, y))

    def b_tilde_diag(self, x, y, axis: int, n: int) -> float:
        if self.b_tilde is None:
            return 1.0
        v = self.b_tilde(x, y)
        if n == 1:
            return float(v)
        return float(np.asarray(v)[axis, axis])

    def t_val(self, x, y, n: int) -> np.ndarray:
        if self.t_field is None:
            return np.zeros(n)
        return np.atleast_1d(np.asarray(self.t_field(x, y), dtype=float))

    def a_matrix(self, x, y, n: int) -> np.ndarray:
        mu = self.mu_val(x, y)
        if self.b_tilde is None:
            bt = np.eye(n)
        else:
            bt = np.atleast_2d(np.asarray(self.b_tilde(x, y), dtype=float))
        t = self.t_val(x, y, n)
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = bt
        A[:n, n] = t
        A[n, :n] = t
        A[n, n] = 1.0
        return mu * A

    def check_ellipticity(self, n: int = 1, npoints: int = 1000, ndirs: int = 10,
                          tol: float = 1e-12) -> Tuple[float, float]:
        """Sample lambda1, lambda2 on a deterministic point/direction lattice."""
        lam1, lam2 = math.inf, 0.0
        pts = _halton_points(npoints, n + 1)
        dirs = _circle_directions(ndirs, n + 1)
        for p in pts:
            x = p[0] if n == 1 else tuple(p[:n])
            y = p[n]
            A = self.a_matrix(x, y, n)
            for d in dirs:
                q = float(d @ A @ d)
                lam1 = min(lam1, q)
                lam2 = max(lam2, q)
        if lam1 <= tol:
            raise EllipticityError(f"tensor not uniformly elliptic: lambda1={lam1:.3g}")
        return lam1, lam2

    def check_j_symmetry(self, n: int = 1, npoints: int = 200, tol: float = 1e-10) -> float:
        """Max deviation of A(x, y) - J A(x, -y) J over sample points."""
        J = np.eye(n + 1)
        J[n, n] = -1.0
        worst = 0.0
        for p in _halton_points(npoints, n + 1):
            x = p[0] if n == 1 else tuple(p[:n])
            y = p[n]
            A1 = self.a_matrix(x, y, n)
            A2 = J @ self.a_matrix(x, -y, n) @ J
            worst = max(worst, float(np.max(np.abs(A1 - A2))))
        return worst

    def check_sigma_invariance(self, n: int = 1, npoints: int = 200) -> float:
        """Max |T(x, 0)| over sample points (must vanish: A(x,0) e_y = mu e_y)."""
        worst = 0.0
        for p in _halton_points(npoints, n):
            x = p[0] if n == 1 else tuple(p)
            worst = max(worst, float(np.max(np.abs(self.t_val(x, 0.0, n)))))
        return worst


def _halton_points(count: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy points, x-coords in (-1,1), last in (0,1)."""
    primes = [2, 3, 5][:dim]
    out = np.empty((count, dim))
    for d, p in enumerate(primes):
        i = np.arange(1, count + 1)
        f = 1.0 / p
        val = np.zeros(count)
        while np.any(i > 0):
            val += f * (i % p)
            i = i // p
            f /= p
        out[:, d] = 2.0 * val - 1.0 if d < dim - 1 else val
    return out


def _circle_directions(count: int, dim: int) -> np.ndarray:
    if dim == 2:
        ang = np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dirs = []
    golden = (1 + math.sqrt(5)) / 2
    for k in range(count):
        th = 2 * math.pi * k / golden
        z = -1 + 2 * (k + 0.5) / count
        r = math.sqrt(max(0.0, 1 - z * z))
        dirs.append([r * math.cos(th), r * math.sin(th), z])
    return np.asarray(dirs)


# ---------------------------------------------------------------------------
# Weight models
# ---------------------------------------------------------------------------

class WeightModel:
    """Weight sampler with optional exact y-line resistances.

    ``values(xcol, ys)`` evaluates w along one grid column; ``resistance_y``
    returns int_{y0}^{y1} ds/(w(s) mu(x, s)) or None to request the generic
    harmonic-mean fallback.
    """

    weight_id = "generic"

    def values(self, xcol, ys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def resistance_y(self, xcol, y0: float, y1: float) -> Optional[float]:
        return None

    def cell_integral_y(self, xcol, y0: float, y1: float) -> Optional[float]:
        """int_{y0}^{y1} w(x, s) ds, or None for the midpoint fallback.

        Matters near the plane, where the weight's curvature makes the
        midpoint rule O(1) relatively wrong in the bottom cell."""
        return None

    def x_conductivities(self, xcol, ys: np.ndarray) -> np.ndarray:
        """Per-cell conductivity used for x-direction fluxes.

        Default: the midpoint values, exact on the odd characteristic branch
        (w * v is linear in y); the quotient weight overrides with y-averages,
        exact on the even smooth branch."""
        return self.values(xcol, ys)


class ConstantWeight(WeightModel):
    def __init__(self, value: float = 1.0):
        self.value = float(value)
        self.weight_id = f"const[{value:g}]"

    def values(self, xcol, ys):
        return np.full_like(np.asarray(ys, dtype=float), self.value)


class CallableWeight(WeightModel):
    def __init__(self, fn: Callable, weight_id: str = "callable"):
        self.fn = fn
        self.weight_id = weight_id

    def values(self, xcol, ys):
        return np.array([self.fn(xcol, y) for y in np.asarray(ys, dtype=float)])


class RhoWeight(WeightModel):
    """w = rho(y); exact resistances through the characteristic antiderivative.

    With mu present, int ds/(w mu) = int rho^(-a) mu^(-1) ds is the
    characteristic-solution increment divided by (1-a)."""

    def __init__(self, family: WeightFamily, mu_inverse: Optional[Callable] = None,
                 quadrature_tol: float = 1e-10):
        self.family = family
        self.sol = CharacteristicSolution(family, mu_inverse,
                                          quadrature_tol=quadrature_tol)
        self.supersingular = family.a <= -1.0 and family.eps == 0.0
        self.weight_id = f"rho[a={family.a:g},eps={family.eps:g}]"

    def values(self, xcol, ys):
        return rho(self.family, np.asarray(ys, dtype=float))

    def resistance_y(self, xcol, y0, y1):
        if self.sol.mu_inverse is None:
            return float(chi(self.family, y1) - chi(self.family, y0))
        return self.sol.segment_integral(xcol, y0, y1)

    def cell_integral_y(self, xcol, y0, y1):
        a, eps = self.family.a, self.family.eps
        if eps == 0.0:
            if a <= -1.0:
                return None            # non-integrable alone; midpoint pairs with vanishing f
            return (y1 ** (1.0 + a) - y0 ** (1.0 + a)) / (1.0 + a)
        ym = 0.5 * (y0 + y1)
        vals = rho(self.family, np.array([y0, ym, y1]))
        return float((y1 - y0) / 6.0 * (vals[0] + 4.0 * vals[1] + vals[2]))


class AuxiliaryWeight(WeightModel):
    """w = rho (v)^2 with v the characteristic odd solution (quotient weight).

    Values and resistances come from a per-column ladder of v at half-spacing
    resolution, cumulative quadrature when mu varies and closed form when
    mu == 1; the resistance of the first half cell [0, h/2] is infinite
    (super-degenerate weight), which encodes the natural zero-flux closure.
    """

    def __init__(self, sol: CharacteristicSolution):
        self.sol = sol
        fam = sol.family
        self.weight_id = f"rho_v2[a={fam.a:g},eps={fam.eps:g}]"
        self._ladder: dict = {}   # x-key -> {'y': half-spacing grid, 'v': values}

    @staticmethod
    def _xkey(xcol):
        return float(xcol) if np.isscalar(xcol) else tuple(np.atleast_1d(xcol))

    def _column(self, xcol, ys: np.ndarray) -> dict:
        key = self._xkey(xcol)
        got = self._ladder.get(key)
        if got is not None and len(got["y"]) >= 2 * len(ys):
            return got
        h = ys[1] - ys[0] if len(ys) > 1 else 2 * ys[0]
        ladder_y = np.arange(1, 2 * len(ys) + 1) * (h / 2.0)
        fam = self.sol.family
        if self.sol.mu_inverse is None:
            v = (1.0 - fam.a) * chi(fam, ladder_y)
        else:
            from .weights import v_char_profile
            v = v_char_profile(self.sol, xcol, ladder_y)
        col = {"y": ladder_y, "v": v, "h": h}
        self._ladder[key] = col
        return col

    def _v_at(self, col, y: float) -> float:
        ly, lv = col["y"], col["v"]
        i = int(np.searchsorted(ly, y))
        if i < len(ly) and abs(ly[i] - y) < 1e-12:
            return float(lv[i])
        if i >= len(ly):
            return float(lv[-1])
        if i == 0:
            return float(lv[0]) * y / ly[0]
        t = (y - ly[i - 1]) / (ly[i] - ly[i - 1])
        return float((1 - t) * lv[i - 1] + t * lv[i])

    def values(self, xcol, ys):
        ys = np.asarray(ys, dtype=float)
        col = self._column(xcol, ys)
        v = col["v"][::2][: len(ys)]
        return rho(self.sol.family, ys) * v * v

    def resistance_y(self, xcol, y0, y1):
        """Face-midpoint rule R = (y1-y0) / (rho v^2 mu)(face).

        The even quotient problem's smooth branch behaves like c + beta y^2
        at the plane; the face-midpoint flux is exact for that branch, while
        a harmonic or line-resistance rule (exact for the odd problem's
        singular branch) has an O(1) relative flux error at the first face."""
        fam = self.sol.family
        if y0 <= 0.0:
            return math.inf
        ym = 0.5 * (y0 + y1)
        if self.sol.mu_inverse is None:
            v = (1.0 - fam.a) * chi(fam, ym)
            k = float(rho(fam, ym)) * v * v
        else:
            col = self._ladder.get(self._xkey(xcol))
            if col is None:
                raise RuntimeError(
                    "AuxiliaryWeight.resistance_y before values() for this column")
            v = self._v_at(col, ym)
            k = float(rho(fam, ym)) * v * v / self.sol.mu_inverse(xcol, ym)
        return (y1 - y0) / k

    def x_conductivities(self, xcol, ys):
        ys = np.asarray(ys, dtype=float)
        h = ys[1] - ys[0] if len(ys) > 1 else 2 * ys[0]
        self._column(xcol, ys)
        return np.array([self.cell_integral_y(xcol, j * h, (j + 1) * h)
                         for j in range(len(ys))]) / h

    def cell_integral_y(self, xcol, y0, y1):
        fam = self.sol.family
        if self.sol.mu_inverse is None and fam.eps == 0.0:
            p = 3.0 - fam.a          # rho * ((1-a) chi)^2 = y^(2-a) exactly
            return (y1 ** p - y0 ** p) / p
        col = self._ladder.get(self._xkey(xcol))

        def w_at(y):
            if y <= 0.0:
                return 0.0           # super-degenerate: rho v^2 -> 0 at the plane
            v = float((1.0 - fam.a) * chi(fam, y)) if col is None else self._v_at(col, y)
            return float(rho(fam, y)) * v * v

        ym = 0.5 * (y0 + y1)
        return (y1 - y0) / 6.0 * (w_at(y0) + 4.0 * w_at(ym) + w_at(y1))


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass
class DiscreteField:
    """Values at the cell centers of a HalfGrid, with parity metadata."""

    grid: HalfGrid
    values: np.ndarray
    parity: str = "none"          # 'odd' | 'even' | 'none'

    @classmethod
    def sample(cls, grid: HalfGrid, fn: Callable, parity: str = "none") -> "DiscreteField":
        vals = np.array([fn(*_split(p, grid.n)) for p in grid.centers])
        return cls(grid, vals, parity)

    def lattice(self) -> np.ndarray:
        out = np.full(self.grid.lattice_shape(), np.nan)
        out[self.grid.index >= 0] = self.values[self.grid.index[self.grid.index >= 0]]
        return out

    def interpolate(self, points: np.ndarray, trace: Optional[Callable] = None) -> np.ndarray:
        """Bilinear interpolation (n=1 grids) with parity ghosts below y=h/2.

        Points outside the cell-center hull fall back to the trace sampler
        when given, else to the nearest valid cell value."""
        if self.grid.n != 1:
            raise NotImplementedError("interpolation implemented for n=1 grids")
        g = self.grid
        lat = self.lattice()
        h = g.h
        out = np.empty(len(points))
        for k, (xq, yq) in enumerate(points):
            fx = (xq + 1.0) / h - 0.5
            fy = yq / h - 0.5
            i0 = int(math.floor(fx))
            j0 = int(math.floor(fy))
            tx = fx - i0
            ty = fy - j0
            vals = np.empty((2, 2))
            ok = True
            for di in (0, 1):
                for dj in (0, 1):
                    i, j = i0 + di, j0 + dj
                    if 0 <= i < g.nx and 0 <= j < g.ny and np.isfinite(lat[i, j]):
                        vals[di, dj] = lat[i, j]
                    elif j == -1 and 0 <= i < g.nx and np.isfinite(lat[i, 0]) \
                            and self.parity in ("odd", "even"):
                        vals[di, dj] = -lat[i, 0] if self.parity == "odd" else lat[i, 0]
                    elif trace is not None:
                        vals[di, dj] = trace(-1.0 + (i + 0.5) * h, (j + 0.5) * h)
                    else:
                        ok = False
            if ok:
                out[k] = ((1 - tx) * (1 - ty) * vals[0, 0] + (1 - tx) * ty * vals[0, 1]
                          + tx * (1 - ty) * vals[1, 0] + tx * ty * vals[1, 1])
            else:
                d2 = ((g.centers[:, 0] - xq) ** 2 + (g.centers[:, 1] - yq) ** 2)
                out[k] = self.values[int(np.argmin(d2))]
        return out


def _split(p: np.ndarray, n: int):
    if n == 1:
        return p[0], p[1]
    return tuple(p[:n]), p[n]


def _xcol(p, n: int):
    return p[0] if n == 1 else tuple(p[:n])


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class AssembledOperator:
    matrix: sp.csr_matrix
    grid: HalfGrid
    parity: str
    weight: WeightModel
    spec: OperatorSpec
    has_drift: bool
    dirichlet_faces: list = field(repr=False)   # (dof, tau, midpoint)
    face_weights: list = field(repr=False)      # (axis, lo_dof, hi_dof, w_face, midpoint)
    assembly_weight_id: str = ""
    flagged_supersingular: bool = False

    def rhs(self, f: Optional[Callable] = None, F: Optional[Callable] = None,
            trace: Optional[Callable] = None) -> np.ndarray:
        g = self.grid
        voln = g.h ** (g.n + 1)
        out = np.zeros(g.ncells)
        if f is not None:
            fc = np.array([f(*_split(p, g.n)) for p in g.centers])
            wint = _cell_weight_integrals(self.weight, g)
            out += g.h ** g.n * wint * fc
        if F is not None:
            area = g.h ** g.n
            for axis, lo, hi, wf, mid in self.face_weights:
                Fv = np.atleast_1d(np.asarray(F(*_split(mid, g.n)), dtype=float))
                Fn = float(Fv[axis])
                if lo >= 0:
                    out[lo] += area * wf * Fn
                if hi >= 0:
                    out[hi] -= area * wf * Fn
        if trace is not None:
            for dof, tau, mid in self.dirichlet_faces:
                out[dof] += tau * trace(*_split(mid, g.n))
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def residual(self, u: np.ndarray, rhs: np.ndarray) -> float:
        r = self.matrix @ u - rhs
        denom = float(np.linalg.norm(rhs))
        return float(np.linalg.norm(r)) / (denom if denom > 0 else 1.0)


def _cell_weights(weight: WeightModel, g: HalfGrid) -> np.ndarray:
    out = np.empty(g.ncells)
    lat = g.index
    ys = (np.arange(g.ny) + 0.5) * g.h
    it = np.ndindex(*((g.nx,) * g.n))
    for idx in it:
        dofs = lat[idx]
        sel = dofs >= 0
        if not np.any(sel):
            continue
        x = _xcol(g.centers[dofs[sel][0]], g.n)
        out[dofs[sel]] = weight.values(x, ys)[sel]
    return out


def _cell_weight_integrals(weight: WeightModel, g: HalfGrid) -> np.ndarray:
    """Per-cell int_cell w dy (exact/Simpson when available, else midpoint w h)."""
    out = np.empty(g.ncells)
    lat = g.index
    h = g.h
    ys = (np.arange(g.ny) + 0.5) * h
    for idx in np.ndindex(*((g.nx,) * g.n)):
        dofs = lat[idx]
        sel = np.nonzero(dofs >= 0)[0]
        if sel.size == 0:
            continue
        x = _xcol(g.centers[dofs[sel[0]]], g.n)
        wcol = weight.values(x, ys)
        for j in sel:
            ci = weight.cell_integral_y(x, j * h, (j + 1) * h)
            out[dofs[j]] = ci if ci is not None else wcol[j] * h
    return out


def assemble(grid: HalfGrid, weight: WeightModel, spec: Optional[OperatorSpec] = None,
             parity: str = "odd", drift: Optional[Callable] = None,
             outer: str = "dirichlet") -> AssembledOperator:
    """Assemble the flux-form operator; see the module docstring for the scheme.

    outer='neumann' closes the outer boundary with zero weighted flux instead
    of Dirichlet half-cells (with even parity this leaves constants in the
    kernel)."""
    if parity not in ("odd", "even"):
        raise ValueError("assembly parity must be 'odd' or 'even'")
    if outer not in ("dirichlet", "neumann"):
        raise ValueError("outer must be 'dirichlet' or 'neumann'")
    spec = spec or OperatorSpec()
    g = grid
    n, h = g.n, g.h
    area = h ** n
    lat = g.index
    ys = (np.arange(g.ny) + 0.5) * h
    rows: list = []
    cols: list = []
    vals: list = []
    dirichlet_faces: list = []
    face_weights: list = []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    supersingular = bool(getattr(weight, "supersingular", False)) and parity == "odd"

    # column-wise pass: y-direction faces + cache of cell weights
    wcell = np.empty(g.ncells)
    wxcell = np.empty(g.ncells)
    for idx in np.ndindex(*((g.nx,) * n)):
        dofs = lat[idx]
        live = np.nonzero(dofs >= 0)[0]
        if live.size == 0:
            continue
        x = _xcol(g.centers[dofs[live[0]]], n)
        wcol = weight.values(x, ys)
        if not np.all(np.isfinite(wcol[live])) or np.any(wcol[live] <= 0):
            raise ValueError(
                f"weight {weight.weight_id!r} non-finite or non-positive at a cell "
                f"in column x={x}")
        wcell[dofs[live]] = wcol[live]
        wxcol = weight.x_conductivities(x, ys)
        wxcell[dofs[live]] = wxcol[live]
        for j in live:
            dof = dofs[j]
            yc = ys[j]
            # face below
            if j == 0 or dofs[j - 1] < 0:
                y_face = j * h
                if j == 0 and parity == "odd":
                    R = weight.resistance_y(x, 0.0, h / 2.0)
                    if R is None:
                        R = (h / 2.0) / (wcol[0] * spec.mu_val(x, h / 4.0))
                    if math.isfinite(R) and R > 0:
                        tau = area / R
                        add(dof, dof, tau)
                    face_weights.append((n, -1, dof, wcol[0], _mk_point(idx, y_face, h, n)))
                elif j == 0 and parity == "even":
                    face_weights.append((n, -1, dof, wcol[0], _mk_point(idx, y_face, h, n)))
                else:  # staircase face below
                    mid = _mk_point(idx, y_face, h, n)
                    if outer == "dirichlet":
                        R = weight.resistance_y(x, y_face, yc)
                        if R is None:
                            R = (h / 2.0) / (wcol[j] * spec.mu_val(x, y_face))
                        tau = area / R
                        add(dof, dof, tau)
                        dirichlet_faces.append((dof, tau, mid))
                    face_weights.append((n, -1, dof, wcol[j], mid))
            # face above
            if j == g.ny - 1 or dofs[j + 1] < 0:
                y_face = (j + 1) * h
                mid = _mk_point(idx, y_face, h, n)
                if outer == "dirichlet":
                    R = weight.resistance_y(x, yc, y_face)
                    if R is None:
                        R = (h / 2.0) / (wcol[j] * spec.mu_val(x, y_face))
                    tau = area / R
                    add(dof, dof, tau)
                    dirichlet_faces.append((dof, tau, mid))
                face_weights.append((n, dof, -1, wcol[j], mid))
            else:
                up = dofs[j + 1]
                y_face = (j + 1) * h
                R = weight.resistance_y(x, yc, ys[j + 1])
                wh = 2.0 * wcol[j] * wcol[j + 1] / (wcol[j] + wcol[j + 1])
                if R is None:
                    R = h / (wh * spec.mu_val(x, y_face))
                tau = area / R
                add(dof, dof, tau)
                add(up, up, tau)
                add(dof, up, -tau)
                add(up, dof, -tau)
                face_weights.append((n, dof, up, wh, _mk_point(idx, y_face, h, n)))

    # x-direction faces, axis by axis
    for axis in range(n):
        for idx in np.ndindex(*_axis_iter_shape(g, axis)):
            for f in range(g.nx + 1):
                lo_idx = _insert(idx, axis, f - 1)
                hi_idx = _insert(idx, axis, f)
                lo = int(lat[lo_idx]) if f - 1 >= 0 else -2
                hi = int(lat[hi_idx]) if f <= g.nx - 1 else -2
                if lo < 0 and hi < 0:
                    continue
                mid = _face_mid_x(g, idx, axis, f)
                x_mid = _xcol(mid, n)
                y_mid = mid[n]
                afac = spec.mu_val(x_mid, y_mid) * spec.b_tilde_diag(x_mid, y_mid, axis, n)
                if lo >= 0 and hi >= 0:
                    wl, wh_ = wxcell[lo], wxcell[hi]
                    wf = 2.0 * wl * wh_ / (wl + wh_)
                    tau = area * wf * afac / h
                    add(lo, lo, tau)
                    add(hi, hi, tau)
                    add(lo, hi, -tau)
                    add(hi, lo, -tau)
                    face_weights.append((axis, lo, hi, wf, mid))
                else:
                    dof = lo if lo >= 0 else hi
                    wf = wxcell[dof]
                    if outer == "dirichlet":
                        tau = area * wf * afac / (h / 2.0)
                        add(dof, dof, tau)
                        dirichlet_faces.append((dof, tau, mid))
                    if lo >= 0:
                        face_weights.append((axis, dof, -1, wf, mid))
                    else:
                        face_weights.append((axis, -1, dof, wf, mid))

    # symmetric cross terms from T (vanish when t_field is None)
    if spec.t_field is not None:
        _add_cross_terms(g, spec, wcell, parity, add)

    has_drift = drift is not None
    if has_drift:
        _add_drift(g, spec, wcell, parity, drift, add)

    M = sp.coo_matrix((vals, (rows, cols)), shape=(g.ncells, g.ncells)).tocsr()
    return AssembledOperator(
        matrix=M, grid=g, parity=parity, weight=weight, spec=spec,
        has_drift=has_drift, dirichlet_faces=dirichlet_faces,
        face_weights=face_weights, assembly_weight_id=weight.weight_id,
        flagged_supersingular=supersingular)


def _mk_point(idx, y, h, n):
    out = np.empty(n + 1)
    for d in range(n):
        out[d] = -1.0 + (idx[d] + 0.5) * h
    out[n] = y
    return out


def _axis_iter_shape(g: HalfGrid, axis: int):
    dims = [g.nx] * g.n + [g.ny]
    del dims[axis]
    return tuple(dims)


def _insert(idx, axis, v):
    out = list(idx)
    out.insert(axis, v)
    return tuple(out)


def _face_mid_x(g: HalfGrid, idx, axis, f):
    full = _insert(idx, axis, 0)
    out = np.empty(g.n + 1)
    for d in range(g.n):
        out[d] = -1.0 + (full[d] + 0.5) * g.h
    out[axis] = -1.0 + f * g.h
    out[g.n] = (full[g.n] + 0.5) * g.h
    return out


def _neighbors_along(g, lat, idx_full, axis):
    lo = list(idx_full)
    hi = list(idx_full)
    lo[axis] -= 1
    hi[axis] += 1
    nmax = g.nx if axis < g.n else g.ny
    dlo = lat[tuple(lo)] if lo[axis] >= 0 else -1
    dhi = lat[tuple(hi)] if hi[axis] < nmax else -1
    return int(dlo), int(dhi)


def _add_cross_terms(g, spec, wcell, parity, add):
    """Symmetric cell-centered discretization of the T coupling blocks."""
    lat = g.index
    h = g.h
    voln = h ** (g.n + 1)
    for idx_full in np.ndindex(*g.lattice_shape()):
        dof = int(lat[idx_full])
        if dof < 0:
            continue
        p = g.centers[dof]
        x = _xcol(p, g.n)
        y = p[g.n]
        tvec = spec.t_val(x, y, g.n)
        muv = spec.mu_val(x, y)
        if not np.any(tvec):
            continue
        dy_lo, dy_hi = _neighbors_along(g, lat, idx_full, g.n)
        for axis in range(g.n):
            dx_lo, dx_hi = _neighbors_along(g, lat, idx_full, axis)
            coef = voln * wcell[dof] * muv * tvec[axis] / (h * h)
            # centered stencils where both neighbors exist; parity ghost in y
            x_pair = _centered_pair(dx_lo, dx_hi, dof)
            y_pair = _centered_pair(dy_lo, dy_hi, dof, parity=parity, at_bottom=(idx_full[-1] == 0))
            if x_pair is None or y_pair is None:
                continue
            for (di, ci) in x_pair:
                for (dj, cj) in y_pair:
                    # (Dx u)(Dy v) + (Dy u)(Dx v): assemble both products
                    add(dj, di, coef * ci * cj)
                    add(di, dj, coef * ci * cj)


def _centered_pair(d_lo, d_hi, dof, parity=None, at_bottom=False):
    """Return [(dof, coeff)...] realizing a centered difference / (2h) * 2h = +-1/2."""
    if d_lo >= 0 and d_hi >= 0:
        return [(d_hi, 0.5), (d_lo, -0.5)]
    if d_lo < 0 and d_hi >= 0:
        if at_bottom and parity == "odd":
            return [(d_hi, 0.5), (dof, 0.5)]
        if at_bottom and parity == "even":
            return [(d_hi, 0.5), (dof, -0.5)]
        return [(d_hi, 1.0), (dof, -1.0)]
    if d_lo >= 0 and d_hi < 0:
        return [(dof, 1.0), (d_lo, -1.0)]
    return None


def _add_drift(g, spec, wcell, parity, drift, add):
    lat = g.index
    h = g.h
    voln = h ** (g.n + 1)
    for idx_full in np.ndindex(*g.lattice_shape()):
        dof = int(lat[idx_full])
        if dof < 0:
            continue
        p = g.centers[dof]
        x = _xcol(p, g.n)
        y = p[g.n]
        b = np.atleast_1d(np.asarray(drift(x, y), dtype=float))
        if not np.any(b):
            continue
        scale = -voln * wcell[dof] / h
        for axis in range(g.n + 1):
            if b[axis] == 0.0:
                continue
            d_lo, d_hi = _neighbors_along(g, lat, idx_full, axis)
            pair = _centered_pair(d_lo, d_hi, dof,
                                  parity=parity if axis == g.n else None,
                                  at_bottom=(axis == g.n and idx_full[-1] == 0))
            if pair is None:
                continue
            for (dj, cj) in pair:
                add(dof, dj, scale * b[axis] * cj)


# ---------------------------------------------------------------------------
# Solves
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    field: DiscreteField
    relative_residual: float
    iterations: int
    assembly_weight_id: str
    method: str
    converged: bool
    tolerance: float
    iteration_cap: int = ITERATION_CAP


def solve_linear(op: AssembledOperator, rhs: np.ndarray, tol: float = 1e-10,
                 parity: Optional[str] = None) -> SolveReport:
    """Solve op u = rhs: direct for small systems, diagonally preconditioned
    CG for symmetric ones, BiCGSTAB when a drift makes the matrix nonsymmetric."""
    A = op.matrix
    nn = A.shape[0]
    it_count = [0]

    def cb(_):
        it_count[0] += 1

    if nn <= DIRECT_SOLVE_MAX:
        u = spla.spsolve(A.tocsc(), rhs)
        method = "direct-sparse-lu"
    elif not op.has_drift:
        d = A.diagonal()
        M = sp.diags(1.0 / np.where(d > 0, d, 1.0))
        u, info = spla.cg(A, rhs, rtol=tol * 1e-2, atol=0.0,
                          maxiter=ITERATION_CAP, M=M, callback=cb)
        method = "cg-jacobi"
    else:
        d = A.diagonal()
        M = sp.diags(1.0 / np.where(np.abs(d) > 0, d, 1.0))
        u, info = spla.bicgstab(A, rhs, rtol=tol * 1e-2, atol=0.0,
                                maxiter=ITERATION_CAP, M=M, callback=cb)
        method = "bicgstab-jacobi"
    res = op.residual(u, rhs)
    fld = DiscreteField(op.grid, u, op.parity if parity is None else parity)
    return SolveReport(field=fld, relative_residual=res, iterations=it_count[0],
                       assembly_weight_id=op.assembly_weight_id, method=method,
                       converged=res <= tol, tolerance=tol)


def manufactured_problem(u_exact: Callable, op: AssembledOperator, mode: str = "discrete",
                         f: Optional[Callable] = None, F: Optional[Callable] = None
                         ) -> Tuple[np.ndarray, DiscreteField]:
    """Right-hand side + exact field for the method of manufactured solutions.

    mode='discrete': rhs = A u_exact (solver must reproduce u_exact to solver
    tolerance); mode='analytic': rhs from the continuum forcing f (and F) with
    Dirichlet data sampled from u_exact (solver converges at scheme order)."""
    g = op.grid
    exact = DiscreteField.sample(g, u_exact, op.parity)
    _check_parity(u_exact, op.parity, g.n)
    if mode == "discrete":
        return op.matrix @ exact.values, exact
    if mode != "analytic":
        raise ValueError("mode must be 'discrete' or 'analytic'")
    rhs = op.rhs(f=f, F=F, trace=u_exact)
    return rhs, exact


def _check_parity(u_exact, parity, n, tol=1e-9):
    if parity not in ("odd", "even"):
        return
    probes = [(0.3, 0.4), (-0.5, 0.7), (0.1, 0.2)]
    for xx, yy in probes:
        x = xx if n == 1 else (xx, -xx / 2)
        up = u_exact(x, yy)
        um = u_exact(x, -yy)
        want = -up if parity == "odd" else up
        if abs(um - want) > tol * max(1.0, abs(up)):
            raise ParityError(f"u_exact violates parity {parity!r} at {(x, yy)}")


def convergence_study(factory: Callable, h_list: Sequence[float],
                      region: Optional[Callable] = None,
                      tol: float = 1e-10) -> list:
    """Solve factory(h) -> (operator, rhs, exact_field) over decreasing h.

    Returns rows (h, max_error, order_estimate); order is the local log2 slope
    between successive levels, math.nan for the first, and the string flag
    'exact' replaces the order when errors sit at rounding level."""
    if len(h_list) < 3 or np.any(np.diff(h_list) >= 0):
        raise ValueError("h_list must be strictly decreasing with >= 3 entries")
    rows = []
    prev = None
    for h in h_list:
        op, rhs, exact = factory(h)
        rep = solve_linear(op, rhs, tol=tol)
        err = np.abs(rep.field.values - exact.values)
        if region is not None:
            sel = np.array([region(*_split(p, op.grid.n)) for p in op.grid.centers])
            err = err[sel]
        e = float(np.max(err)) if err.size else 0.0
        scale = float(np.max(np.abs(exact.values))) or 1.0
        if prev is None:
            order: object = math.nan
        elif e < 1e-12 * scale and prev[1] < 1e-12 * scale:
            order = "exact"
        else:
            order = math.log(prev[1] / max(e, 1e-300)) / math.log(prev[0] / h)
        rows.append((h, e, order))
        prev = (h, e)
    return rows
