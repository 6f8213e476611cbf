import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ouflow.errors import ValidationError
from ouflow.field_grid import (
    Grid, VectorField, convective, divergence, export_csv, gradient, gradient_of_scalar,
    helmholtz_project, is_truncation_adequate, lp_norm, parseval_energy, read_field,
    truncation_defect, write_field,
)
from ouflow.initial_data import vortex


def periodic_grid(d=2, N=32):
    # L = pi so that sin(x_j) is a resolved box mode
    return Grid(d, math.pi, N)


def field(grid, *comps):
    return VectorField(grid, np.stack(comps))


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid(2, 1.0, 48)
    with pytest.raises(ValidationError):
        Grid(4, 1.0, 16)
    with pytest.raises(ValidationError):
        Grid(2, -1.0, 16)
    g = Grid(2, 4.0, 16)
    assert g.h == 0.5 and g.shape == (16, 16) and g.axis[0] == -4.0


def test_projection_examples():
    g = periodic_grid()
    x1, x2 = g.coords
    grad = field(g, np.cos(x1), 0 * x1)
    assert np.abs(helmholtz_project(grad).data).max() < 1e-13
    sol = field(g, np.sin(x2), 0 * x2)
    assert_allclose(helmholtz_project(sol).data, sol.data, atol=1e-13)
    u = field(g, np.sin(x1), np.sin(x1))
    Pu = helmholtz_project(u)
    assert_allclose(helmholtz_project(Pu).data, Pu.data, atol=1e-13)
    assert np.abs(divergence(Pu)).max() < 1e-13
    assert Pu.solenoidal and Pu.is_solenoidal()


def test_projection_kills_gradients_of_trig_polynomials(rng):
    g = periodic_grid(3, 16)
    x = g.coords
    q = sum(rng.normal() * np.cos(k1 * x[0] + k2 * x[1] + k3 * x[2] + rng.random())
            for k1, k2, k3 in rng.integers(-4, 5, size=(5, 3)))
    gq = gradient_of_scalar(g, q)
    assert np.abs(helmholtz_project(gq).data).max() <= 1e-8 * max(gq.max_norm(), 1.0)


def test_zero_mode_passes_through():
    g = periodic_grid()
    c = field(g, np.full(g.shape, 2.0), np.full(g.shape, -1.0))
    assert_allclose(helmholtz_project(c).data, c.data)


def test_derivatives():
    g = periodic_grid()
    x1, x2 = g.coords
    assert np.abs(divergence(field(g, np.sin(x2), 0 * x2))).max() < 1e-13
    assert_allclose(divergence(field(g, np.sin(x1), 0 * x1)), np.cos(x1), atol=1e-12)
    const = field(g, np.ones(g.shape), 3 * np.ones(g.shape))
    assert np.abs(gradient(const)).max() < 1e-13
    G = gradient(field(g, np.sin(x1) * np.cos(x2), 0 * x1))
    assert_allclose(G[0, 0], np.cos(x1) * np.cos(x2), atol=1e-12)
    assert_allclose(G[0, 1], -np.sin(x1) * np.sin(x2), atol=1e-12)


def test_convective_examples():
    g = periodic_grid(2, 64)
    x1, x2 = g.coords
    c = field(g, np.full(g.shape, 0.3), np.full(g.shape, -2.0))
    assert np.abs(convective(c).data).max() < 1e-13
    shear = field(g, np.sin(x2), 0 * x2)
    assert np.abs(convective(shear).data).max() < 1e-13
    tg = field(g, np.cos(x1) * np.sin(x2), -np.sin(x1) * np.cos(x2))
    nl = convective(tg)
    assert np.abs(nl.data).max() > 0.1
    assert np.abs(helmholtz_project(nl).data).max() < 1e-10


def test_lp_norm_examples():
    g = Grid(2, 8.0, 128)
    r2 = (g.coords ** 2).sum(axis=0)
    u = field(g, np.exp(-r2), 0 * r2)
    assert lp_norm(u, 2) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert lp_norm(u, np.inf) == pytest.approx(1.0)
    assert lp_norm(u * 0.0, 3) == 0.0
    assert lp_norm(u * -2.5, 3) == pytest.approx(2.5 * lp_norm(u, 3))
    with pytest.raises(ValidationError):
        lp_norm(u, 1.0)


def test_lp_norm_converges_with_refinement():
    errs = []
    exact = (math.pi / 2) ** 0.5  # int exp(-2|x|^2) over the plane
    for N in (8, 16, 32):
        g = Grid(2, 6.0, N)
        r2 = (g.coords ** 2).sum(axis=0)
        errs.append(abs(lp_norm(field(g, np.exp(-r2), 0 * r2), 2) - exact))
    # spectral convergence: far better than fourth order
    assert errs[1] < errs[0] / 16 and errs[2] < max(errs[1] / 16, 1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_parseval(seed):
    g = Grid(2, 3.0, 16)
    rng = np.random.default_rng(seed)
    u = VectorField(g, rng.normal(size=(2, 16, 16)))
    assert parseval_energy(u) == pytest.approx(lp_norm(u, 2) ** 2, rel=1e-12)


def test_truncation_predicate():
    g = Grid(2, 12.0, 64)
    assert is_truncation_adequate(vortex(g, 0.5))
    assert not is_truncation_adequate(vortex(g, 2.0))
    assert truncation_defect(vortex(g, 2.0)) > 1e-4


def test_serialization_roundtrip(tmp_path):
    g = Grid(3, 2.5, 8)
    u = VectorField(g, np.random.default_rng(0).normal(size=(3, 8, 8, 8)))
    write_field(tmp_path / "u.bin", u)
    raw = (tmp_path / "u.bin").read_bytes()
    assert np.frombuffer(raw[:16], "<i8").tolist() == [3, 8]
    assert np.frombuffer(raw[16:24], "<f8")[0] == 2.5
    v = read_field(tmp_path / "u.bin")
    assert v.grid == g and np.array_equal(v.data, u.data)
    (tmp_path / "bad.bin").write_bytes(raw[:-8])
    with pytest.raises(ValidationError):
        read_field(tmp_path / "bad.bin")


def test_csv_export(tmp_path):
    g = Grid(2, 1.0, 8)
    u = VectorField(g, np.ones((2, 8, 8)))
    export_csv(tmp_path / "u.csv", u)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,u1,u2" and len(lines) == 65


def test_fields_are_immutable_and_checked():
    g = Grid(2, 1.0, 8)
    u = VectorField(g, np.zeros((2, 8, 8)))
    with pytest.raises(ValueError):
        u.data[0, 0, 0] = 1.0
    with pytest.raises(ValidationError):
        VectorField(g, np.full((2, 8, 8), np.nan))
    with pytest.raises(ValidationError):
        VectorField(g, np.zeros((3, 8, 8)))
