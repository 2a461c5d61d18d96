"""Half grids, Fermi data, signed distance."""

import math

import numpy as np
import pytest

import degenlab as dl


def test_half_rectangle_counts():
    g = dl.build_half_grid(1, "half_rectangle", 0.25)
    assert g.ncells == 8 * 4
    assert g.num_sigma_faces == 8


def test_half_disk_masking():
    g = dl.build_half_grid(1, "half_disk", 0.25)
    assert np.all((g.centers ** 2).sum(axis=1) <= 1.0 + 1e-12)
    full = dl.build_half_grid(1, "half_rectangle", 0.25)
    assert g.ncells < full.ncells


def test_n2_counts():
    g = dl.build_half_grid(2, "half_rectangle", 0.125)
    assert g.ncells == 16 * 16 * 8


def test_grid_validation():
    with pytest.raises(ValueError):
        dl.build_half_grid(1, "half_rectangle", 0.5)      # too coarse
    with pytest.raises(ValueError):
        dl.build_half_grid(1, "half_rectangle", 0.11)     # does not divide
    with pytest.raises(ValueError):
        dl.build_half_grid(2, "half_disk", 0.125)


def test_refinement_quadruples_and_nests():
    g1 = dl.build_half_grid(1, "half_rectangle", 0.125)
    g2 = dl.build_half_grid(1, "half_rectangle", 0.0625)
    assert g2.ncells == 4 * g1.ncells
    # coarse sigma-face midpoints are fine sigma-skeleton nodes
    mids = g1.sigma_face_midpoints()[:, 0]
    fine_nodes = -1.0 + np.arange(2 * g2.nx + 1) * (g2.h / 2)
    for m in mids:
        assert np.min(np.abs(fine_nodes - m)) < 1e-12
    # and the coarse/fine sigma faces cover the same flat segment
    assert g1.num_sigma_faces * g1.h == pytest.approx(g2.num_sigma_faces * g2.h)


def test_no_cell_on_sigma():
    g = dl.build_half_grid(1, "half_disk", 0.0625)
    assert g.centers[:, 1].min() == pytest.approx(g.h / 2)


def test_fermi_mu_line_and_circle():
    line = dl.EmbeddedCurve.line((0.0, 0.0), (1.0, 0.0), length=1.0)
    assert dl.fermi_mu(line, 0.3, 0.7) == pytest.approx(1.0)
    circ = dl.EmbeddedCurve.circle(2.0, arc=1.0)
    assert dl.fermi_mu(circ, 0.2, 0.5) == pytest.approx(0.75)
    assert dl.fermi_mu(circ, 0.2, 0.0) == pytest.approx(circ.speed(0.2))


def test_fermi_mu_matches_chart_jacobian():
    circ = dl.EmbeddedCurve.circle(2.0, arc=2.0, theta0=0.3)
    step = 1e-5
    for t in np.linspace(0.1, 0.9, 5):
        for y in (0.0, 0.3, 0.6):
            mu = dl.fermi_mu(circ, float(t), float(y))
            zp = circ.point(float(t) + step, float(y))
            zm = circ.point(float(t) - step, float(y))
            jac = float(np.linalg.norm(zp - zm) / (2 * step))
            assert mu == pytest.approx(jac, abs=1e-6)


def test_fermi_mu_speed_at_zero_many_params():
    circ = dl.EmbeddedCurve.circle(1.7, arc=1.3, theta0=-0.4)
    for t in np.linspace(0.0, 1.0, 50):
        assert dl.fermi_mu(circ, float(t), 0.0) == pytest.approx(circ.speed(float(t)))


def test_chart_violation():
    circ = dl.EmbeddedCurve.circle(0.5, arc=1.0)
    with pytest.raises(dl.ChartError):
        dl.fermi_mu(circ, 0.5, 0.6)


@pytest.mark.parametrize("R", [1.0, 2.0, 5.0])
def test_mean_curvature_two_ways(R):
    circ = dl.EmbeddedCurve.circle(R, arc=1.0)
    H0, r0 = dl.mean_curvature_check(circ, 0.5, 0.0)
    assert H0 == pytest.approx(1.0 / R)
    assert r0 <= 1e-6
    H, res = dl.mean_curvature_check(circ, 0.5, min(0.5, R / 4))
    y = min(0.5, R / 4)
    assert H == pytest.approx((1.0 / R) / (1.0 - y / R), rel=1e-9)
    assert res <= 1e-6


def test_mean_curvature_line():
    line = dl.EmbeddedCurve.line()
    H, res = dl.mean_curvature_check(line, 0.4, 0.2)
    assert H == 0.0 and res == 0.0


def test_signed_distance_circle_and_line():
    circ = dl.EmbeddedCurve.circle(1.0, arc=2 * math.pi, theta0=0.0)
    d, t = dl.signed_distance(circ, (0.0, 0.5))
    assert d == pytest.approx(0.5, abs=1e-9)        # inward normal side
    d0, _ = dl.signed_distance(circ, (math.cos(1.0), math.sin(1.0)))
    assert abs(d0) < 1e-7
    line = dl.EmbeddedCurve.line((-0.5, 0.0), (1.0, 0.0), length=2.0)
    d2, t2 = dl.signed_distance(line, (0.3, 0.2))
    assert d2 == pytest.approx(0.2, abs=1e-9)
    assert -0.5 + 2.0 * t2 == pytest.approx(0.3, abs=1e-6)


def test_signed_distance_gradient_is_unit():
    circ = dl.EmbeddedCurve.circle(2.0, arc=3.0, theta0=0.2)
    rng_pts = [(0.05 + 0.9 * (k * 0.37 % 1.0), -0.4 + 0.8 * (k * 0.61 % 1.0))
               for k in range(1, 101)]
    step = 1e-5
    for tt, y in rng_pts:
        X = circ.point(tt, y)
        gx = (dl.signed_distance(circ, X + [step, 0.0])[0]
              - dl.signed_distance(circ, X - [step, 0.0])[0]) / (2 * step)
        gy = (dl.signed_distance(circ, X + [0.0, step])[0]
              - dl.signed_distance(circ, X - [0.0, step])[0]) / (2 * step)
        assert math.hypot(gx, gy) == pytest.approx(1.0, abs=1e-4)


def test_ambiguous_projection():
    circ = dl.EmbeddedCurve.circle(1.0, arc=2 * math.pi)
    with pytest.raises(dl.AmbiguousProjectionError):
        dl.signed_distance(circ, (0.0, 0.0))


def test_signed_distance_inverts_fermi_chart():
    # X = Z(t, y) must project back to foot t with signed distance y
    curve = dl.EmbeddedCurve.circle(2.0, arc=2.0, theta0=0.7)
    for t in (0.15, 0.5, 0.85):
        for y in (-0.3, 0.0, 0.4):
            X = curve.point(t, y)
            d, foot = dl.signed_distance(curve, X)
            assert d == pytest.approx(y, abs=1e-7)
            assert foot == pytest.approx(t, abs=1e-6)
