"""Potentials of the flat quadratic forms and the deep-exponent certificate functions.

Conjugating the weighted Dirichlet energy by the square root of the weight
turns int w |grad u|^2 into a flat-gradient quadratic form

    Q(v) = int |grad v|^2 + int V v^2 + int_{arc} W v^2,   v = w^(1/2) u,

with potentials V, W determined by log-derivatives of w.  This module
evaluates those potentials in closed form for the three weight kinds used by
the spectral solvers ('rho', 'omega_inverse', 'omega'), plus the three scalar
functions that certify coercivity of the omega-inverse form:

* ``phi_big``     -- Phi_a(t) with V_omega_inv(y) = Phi_a(y/eps) / y^2;
                     limits 2 at t -> 0+ and (2-a)(4-a)/4 at t -> infinity.
* ``gamma_small`` -- the rescaled positivity certificate for a < 0 built on
                     w_deep; ``gamma_v_bound`` is its pointwise lower bound
                     obtained by replacing w_deep with the limit profile v.
* ``v_limit``     -- v(t) = exp(t^2/2) / (t int_0^t exp(s^2/2) ds), evaluated
                     through the scaled integrand exp((s^2-t^2)/2) so it is
                     overflow-safe up to t = V_LIMIT_T_MAX = 60 (well beyond
                     the t = 40 working range).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .weights import (
    DivergentIntegralError,
    WeightFamily,
    _antiderivative_unit,
    chi,
)

V_LIMIT_T_MAX = 60.0


def potentials(kind: str, a: float, eps: float, y):
    """Return the pair (V(y), W(y)) for the requested weight kind at y > 0.

    kinds:
      'rho'           V = a[(a-2)y^2 + 2 eps^2] / (4 (eps^2+y^2)^2),
                      W = -a y^2 / (2 (eps^2+y^2)).
      'omega_inverse' V = (1/4)[(log w)']^2 - (1/2)(log w)'',
                      W = +(1/2)(log w)' y,     w = omega.
      'omega'         V = same as 'rho' (the two coincide),
                      W = -(1/2)(log w)' y.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("potentials are evaluated at y > 0 only")
    d2 = eps * eps + y * y
    v_rho = a * ((a - 2.0) * y * y + 2.0 * eps * eps) / (4.0 * d2 * d2)
    if kind == "rho":
        V = v_rho
        W = -a * y * y / (2.0 * d2)
    elif kind in ("omega_inverse", "omega"):
        if a >= 1.0:
            raise DivergentIntegralError("omega potentials require a < 1")
        if eps == 0.0:
            logw1 = (2.0 - a) / y
            logw2 = -(2.0 - a) / (y * y)
        else:
            fam = WeightFamily(a, eps)
            c = chi(fam, y)
            rinv = d2 ** (-a / 2.0)            # rho^(-a)(y)
            rinv_p = -a * y * d2 ** (-a / 2.0 - 1.0)
            logw1 = a * y / d2 + 2.0 * rinv / c
            logw2 = (a * (eps * eps - y * y) / (d2 * d2)
                     + 2.0 * (rinv_p * c - rinv * rinv) / (c * c))
        if kind == "omega_inverse":
            V = 0.25 * logw1 * logw1 - 0.5 * logw2
            W = 0.5 * logw1 * y
        else:
            V = v_rho
            W = -0.5 * logw1 * y
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    if V.ndim:
        return V, W
    return float(V), float(W)


def phi_limit_zero() -> float:
    """Phi_a(t) -> 2 as t -> 0+, for every a < 1."""
    return 2.0


def phi_limit_infinity(a: float) -> float:
    """Phi_a(t) -> (2-a)(4-a)/4 as t -> infinity."""
    return (2.0 - a) * (4.0 - a) / 4.0


def phi_big(a: float, t):
    """Phi_a(t) = [sqrt2 psi_1(t) + a t^2/(sqrt2 (1+t^2))]^2
                 + a t^2 [(2-a) t^2 - 2] / (4 (1+t^2)^2).

    Relates to the omega-inverse potential by V(y) = Phi_a(y/eps) / y^2; its
    infimum over t > 0 stays above -1/4 for every a < 1, which is what makes
    the conjugated form an equivalent norm uniformly in eps.
    """
    if a >= 1.0:
        raise DivergentIntegralError("phi_big requires a < 1")
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, 2.0)
    pos = t > 0
    tp = t[pos]
    t2 = tp * tp
    psi1 = tp * (1.0 + t2) ** (-a / 2.0) / _antiderivative_unit(a, tp)
    bracket = math.sqrt(2.0) * psi1 + a * t2 / (math.sqrt(2.0) * (1.0 + t2))
    out[pos] = bracket * bracket + a * t2 * ((2.0 - a) * t2 - 2.0) / (4.0 * (1.0 + t2) ** 2)
    return out if out.ndim else float(out)


def w_deep(a: float, t):
    """w_a(t) = (1 + t^2/(-a))^(1-a/2) / (t int_0^t (1+s^2/(-a))^(-a/2) ds), a < 0.

    Dominates v_limit pointwise and converges to it as a -> -infinity.
    """
    if a >= 0.0:
        raise ValueError("w_deep requires a < 0")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("w_deep requires t > 0")
    r = math.sqrt(-a)
    integ = r * _antiderivative_unit(a, t / r)
    out = (1.0 + t * t / (-a)) ** (1.0 - a / 2.0) / (t * integ)
    return out if out.ndim else float(out)


def gamma_small(a: float, t):
    """The deep-exponent certificate gamma_a(t) built on w_deep (a < 0):

       2 a^2 (w_a(t) - 1/2)^2 + a(2-a)/4 + a^2/(2 t^2) + (0.999/4)(-a+t^2)^2/t^4.

    Positivity of gamma_a is equivalent to Phi_a(t) + 1/4 exceeding the small
    reserved margin (0.001/4)(-a+t^2)^2/t^4 * t^4/(1+t^2)^2 after rescaling
    t -> t/sqrt(-a).
    """
    t = np.asarray(t, dtype=float)
    w = w_deep(a, t)
    out = _gamma_terms(a, t, w)
    return out if out.ndim else float(out)


def gamma_v_bound(a: float, t, v_values=None):
    """Lower bound for gamma_small obtained by replacing w_deep with v_limit.

    Valid because w_a >= v > 1/2; note the bound is strictly weaker than
    gamma_small and is *not* positive on all of the moderate-a range (see the
    certification module).  ``v_values`` allows reusing precomputed v(t).
    """
    t = np.asarray(t, dtype=float)
    if v_values is None:
        v_values = np.vectorize(v_limit)(t)
    out = _gamma_terms(a, t, np.asarray(v_values, dtype=float))
    return out if out.ndim else float(out)


def _gamma_terms(a: float, t, w):
    t2 = t * t
    return (2.0 * a * a * (w - 0.5) ** 2
            + a * (2.0 - a) / 4.0
            + a * a / (2.0 * t2)
            + (0.999 / 4.0) * (-a + t2) ** 2 / (t2 * t2))


class OverflowSignal(OverflowError):
    """Raised when v_limit is requested beyond its documented safe range."""


def v_limit(t: float) -> float:
    """v(t) = exp(t^2/2) / (t int_0^t exp(s^2/2) ds) = 1 / (t int_0^t exp((s^2-t^2)/2) ds).

    The scaled integrand exp((s^2-t^2)/2) <= 1 keeps the evaluation finite for
    t <= V_LIMIT_T_MAX = 60; beyond that an :class:`OverflowSignal` is raised.
    Relative quadrature error <= 1e-9.
    """
    if t <= 0:
        raise ValueError("v_limit requires t > 0")
    if t > V_LIMIT_T_MAX:
        raise OverflowSignal(
            f"v_limit is certified only for t <= {V_LIMIT_T_MAX}, got {t}")
    val, err = quad(lambda s: math.exp((s * s - t * t) / 2.0), 0.0, t,
                    epsabs=0.0, epsrel=1e-12, limit=400)
    return 1.0 / (t * val)


def v_limit_deriv(t: float) -> float:
    """v'(t), through the exact first-order identity v' = ((t^2-1)/t) v - t v^2."""
    v = v_limit(t)
    return (t * t - 1.0) / t * v - t * v * v
