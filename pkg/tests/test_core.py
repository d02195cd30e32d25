import numpy as np
import pytest

from mdrkfr import core, models
from mdrkfr.errors import AdmissibilityError, ConfigurationError
from mdrkfr.operators import make_operators


def make_disc(ncells=10, model=None, **cfg_kw):
    cfg_kw.setdefault("final_time", 1.0)
    cfg = core.RunConfig(**cfg_kw)
    grid = core.make_grid(0.0, 1.0, ncells)
    return core.make_discretization(grid, model or models.LinearAdvection(1.0), cfg)


# ----------------------------------------------------------------------
# elementwise pieces


def test_local_derivative_constant_data():
    disc = make_disc()
    u = np.full((10, 4, 1), 3.0)
    f = disc.model.flux(u, disc.xn)
    u1 = core.local_solution_derivative(u, f, disc.dx, 0.01, disc.ops.D)
    assert np.allclose(u1, 0.0, atol=1e-14)


def test_local_derivative_polynomial_exact():
    # degree-3 data is differentiated exactly by the nodal operator
    disc = make_disc(ncells=1)
    xi = disc.ops.nodes
    u = (xi ** 3 - 0.5 * xi)[None, :, None]
    f = disc.model.flux(u, disc.xn)  # flux = u for unit advection
    dt = 0.02
    u1 = core.local_solution_derivative(u, f, disc.dx, dt, disc.ops.D)
    expected = -dt * (3 * xi ** 2 - 0.5)[None, :, None]  # dx = 1
    assert np.allclose(u1, expected, atol=1e-13)


def test_local_derivative_with_source():
    disc = make_disc()
    u = np.full((10, 4, 1), 3.0)
    f = np.zeros_like(u)
    s = np.ones_like(u)
    u1 = core.local_solution_derivative(u, f, disc.dx, 0.25, disc.ops.D, s)
    assert np.allclose(u1, 0.25, atol=1e-15)


def test_flux_time_derivative_linear_flux():
    a = 2.5
    u = np.random.default_rng(0).normal(size=(5, 4, 1))
    u1 = np.random.default_rng(1).normal(size=(5, 4, 1))
    out = core.flux_time_derivative(lambda v, k: a * v, u, u1)
    assert np.allclose(out, a * u1, atol=1e-13)


def test_flux_time_derivative_exact_on_quartic_paths():
    # the five-point formula differentiates quartic compositions exactly
    u = np.array([[[0.8]]])
    du = np.array([[[0.3]]])
    out = core.flux_time_derivative(lambda v, k: v ** 4, u, du)
    assert out[0, 0, 0] == pytest.approx(4 * 0.8 ** 3 * 0.3, rel=1e-13)


def test_flux_time_derivative_zero_increment():
    u = np.array([[[0.8]]])
    out = core.flux_time_derivative(lambda v, k: v ** 3, u, np.zeros_like(u))
    assert out[0, 0, 0] == pytest.approx(0.0, abs=1e-16)


def test_stage1_constant_state():
    disc = make_disc()
    u = np.full((10, 4, 1), 2.0)
    favg, uavg, savg, cache = core.stage1_time_average(
        disc.model, u, disc.xn, disc.dx, 0.01, disc.ops)
    assert np.allclose(favg, disc.model.flux(u, disc.xn))
    assert np.allclose(uavg, u)
    assert savg is None


def test_stage1_matches_spectral_form():
    # for unit advection the averaged flux is (I - sigma/4 D) u
    disc = make_disc()
    rng = np.random.default_rng(3)
    u = rng.normal(size=(10, 4, 1))
    dt = 0.004
    sigma = dt / disc.dx[0]
    favg, uavg, _, _ = core.stage1_time_average(disc.model, u, disc.xn,
                                                disc.dx, dt, disc.ops)
    t1 = np.eye(4) - sigma / 4 * disc.ops.D
    expected = np.einsum("pq,eqv->epv", t1, u)
    assert np.allclose(favg, expected, atol=1e-13)
    assert np.allclose(uavg, expected, atol=1e-13)


def test_stage2_collapses_for_steady_stage():
    # with u* = u the averaged flux reduces to f + f1/2
    disc = make_disc(model=models.Burgers())
    rng = np.random.default_rng(4)
    u = rng.normal(size=(10, 4, 1)) + 2.0
    dt = 0.003
    _, _, _, cache = core.stage1_time_average(disc.model, u, disc.xn,
                                              disc.dx, dt, disc.ops)
    favg2, _, _, _ = core.stage2_time_average(disc.model, u, u, cache,
                                              disc.xn, disc.dx, dt, disc.ops)
    assert np.allclose(favg2, cache.f + 0.5 * cache.f1, atol=1e-13)


def test_stage1_against_dense_time_integral():
    # one element of the quadratic-flux law: compare the averaged flux
    # with a brute-force quadrature of f along a finely integrated
    # collocation system (oracle independent of the stage formulas)
    model = models.Burgers()
    cfg = core.RunConfig(final_time=1.0)
    grid = core.make_grid(0.0, 1.0, 1)
    disc = core.make_discretization(grid, model, cfg)
    xi = disc.ops.nodes
    u0 = (0.5 + 0.3 * xi)[None, :, None]
    dt = 0.01

    favg, _, _, _ = core.stage1_time_average(model, u0, disc.xn, disc.dx,
                                             dt, disc.ops)

    # oracle: integrate du/dt = -D f(u) (single element, free boundaries)
    def rhs(v):
        return -np.einsum("pq,eqv->epv", disc.ops.D, model.flux(v, disc.xn))

    nsub = 400
    h = (dt / 2) / nsub
    u = u0.copy()
    flux_integral = np.zeros_like(u0)
    for _ in range(nsub):
        # Simpson rule per substep with classical RK4 states
        k1 = rhs(u)
        u_half = u + 0.5 * h * k1
        k2 = rhs(u_half)
        k3 = rhs(u + 0.5 * h * k2)
        u_full = u + h * k3
        k4 = rhs(u_full)
        u_mid = u + h / 2 * k1 + 0.0  # midpoint state via dense output
        u_mid = u + (h / 2) * (k1 + k2 + k3) / 3
        flux_integral += (h / 6) * (model.flux(u, disc.xn)
                                    + 4 * model.flux(u_mid, disc.xn)
                                    + model.flux(u_full, disc.xn))
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    oracle = flux_integral / (dt / 2)
    assert np.allclose(favg, oracle, atol=5e-7 * dt)


# ----------------------------------------------------------------------
# face machinery


def test_face_values_ae_constant():
    disc = make_disc()
    favg = np.full((10, 4, 1), 3.3)
    fl, fr = core.face_values_ae(favg, disc.ops)
    assert np.allclose(fl, 3.3) and np.allclose(fr, 3.3)


def test_face_values_ae_gll_picks_nodes():
    disc = make_disc(points="gll", correction="g2")
    rng = np.random.default_rng(5)
    favg = rng.normal(size=(10, 4, 1))
    fl, fr = core.face_values_ae(favg, disc.ops)
    assert (fl == favg[:, 0]).all() and (fr == favg[:, -1]).all()


def test_face_values_ae_extrapolates_cubic():
    disc = make_disc(ncells=1)
    xi = disc.ops.nodes
    q = np.polynomial.Polynomial([0.2, -1.0, 0.7, 1.5])
    favg = q(xi)[None, :, None]
    fl, fr = core.face_values_ae(favg, disc.ops)
    assert fl[0, 0] == pytest.approx(q(0.0), abs=1e-14)
    assert fr[0, 0] == pytest.approx(q(1.0), abs=1e-14)


def test_numerical_flux_consistency():
    f = np.array([[1.0]])
    out = core.numerical_flux(f, f, np.array([[2.0]]), np.array([[2.0]]),
                              np.array([3.0]))
    assert np.allclose(out, f)


def test_numerical_flux_dissipation_sign():
    f = np.array([[1.0]])
    out = core.numerical_flux(f, f, np.array([[0.0]]), np.array([[0.5]]),
                              np.array([1.0]))
    assert out[0, 0] == pytest.approx(1.0 - 0.25)


def test_fr_flux_derivative_constant():
    disc = make_disc()
    favg = np.full((10, 4, 1), 2.0)
    fnum = np.full((11, 1), 2.0)
    r = core.fr_flux_derivative(favg, fnum[:-1], fnum[1:], disc.ops)
    assert np.allclose(r, 0.0, atol=1e-13)


def test_fr_flux_derivative_telescopes():
    # quadrature-weighted residual equals the face flux difference
    disc = make_disc()
    rng = np.random.default_rng(6)
    favg = rng.normal(size=(10, 4, 1))
    fnum = rng.normal(size=(11, 1))
    r = core.fr_flux_derivative(favg, fnum[:-1], fnum[1:], disc.ops)
    sums = np.einsum("p,epv->ev", disc.ops.weights, r)
    assert np.allclose(sums, fnum[1:] - fnum[:-1], atol=1e-13)


def test_fr_flux_derivative_single_element_exact():
    disc = make_disc(ncells=1)
    xi = disc.ops.nodes
    q = np.polynomial.Polynomial([0.3, 1.1, -0.4, 0.9])
    favg = q(xi)[None, :, None]
    fnum_l = np.array([[q(0.0)]])
    fnum_r = np.array([[q(1.0)]])
    r = core.fr_flux_derivative(favg, fnum_l, fnum_r, disc.ops)
    assert np.allclose(r[0, :, 0], q.deriv()(xi), atol=1e-12)


# ----------------------------------------------------------------------
# boundary closures


def test_face_sides_periodic():
    vals_l = np.arange(5, dtype=float)[:, None]
    vals_r = np.arange(5, dtype=float)[:, None] + 10
    minus, plus = core.face_sides(vals_l, vals_r, "periodic")
    assert minus[0, 0] == 14.0 and plus[-1, 0] == 0.0


def test_face_sides_transmissive():
    vals_l = np.arange(5, dtype=float)[:, None]
    vals_r = np.arange(5, dtype=float)[:, None] + 10
    minus, plus = core.face_sides(vals_l, vals_r, "transmissive")
    assert minus[0, 0] == vals_l[0, 0] and plus[-1, 0] == vals_r[-1, 0]


def test_face_sides_reflective_negates_momentum():
    m = models.Euler()
    vals_l = np.tile(np.array([1.0, 0.4, 2.0]), (5, 1))
    vals_r = np.tile(np.array([1.0, -0.3, 2.0]), (5, 1))
    minus, plus = core.face_sides(vals_l, vals_r, "reflective", m.reflect_state)
    assert np.allclose(minus[0], [1.0, -0.4, 2.0])
    assert np.allclose(plus[-1], [1.0, 0.3, 2.0])


def test_reflective_wall_zero_mass_flux():
    # one step of the blast data must not transport mass through walls
    m = models.Euler()
    cfg = core.RunConfig(boundary="reflective", final_time=1.0, limiter="fo")
    grid = core.make_grid(0.0, 1.0, 8)
    disc = core.make_discretization(grid, m, cfg)
    rho = np.ones((8, 4))
    p = np.where(disc.xn < 0.5, 10.0, 1.0)
    u = m.conserved(rho, np.zeros_like(rho), p)
    _, diag = core.mdrk_step(disc, u, 0.0, 1e-4)
    assert abs(diag.fnum2[0, 0]) < 1e-13 and abs(diag.fnum2[-1, 0]) < 1e-13
    assert abs(diag.fnum2[0, 2]) < 1e-13 and abs(diag.fnum2[-1, 2]) < 1e-13


def test_dirichlet_inflow_uses_exact_state():
    case_exact = lambda x, t: np.array([np.cos(np.pi * x / 2) * np.exp(-t)])
    m = models.VariableAdvection(models.varadv_x2_speed)
    cfg = core.RunConfig(boundary="dirichlet_outflow", final_time=1.0)
    grid = core.make_grid(0.1, 1.0, 8)
    disc = core.make_discretization(grid, m, cfg, bc_state=case_exact)
    u = np.cos(np.pi * disc.xn / 2)[..., None]
    _, diag = core.mdrk_step(disc, u, 0.0, 1e-3)
    expected = 0.1 ** 2 * np.cos(np.pi * 0.05)  # a(x) u at the left face, t ~ 0
    assert diag.fnum2[0, 0] == pytest.approx(expected, rel=1e-3)


def test_dirichlet_requires_state():
    with pytest.raises(ConfigurationError):
        make_disc(boundary="dirichlet_outflow")


def test_reflective_requires_system():
    with pytest.raises(ConfigurationError):
        make_disc(boundary="reflective")


# ----------------------------------------------------------------------
# time step control


def test_compute_dt_euler_formula():
    m = models.Euler()
    cfg = core.RunConfig(final_time=10.0, cfl=0.107, safety=0.98)
    grid = core.make_grid(0.0, 1.0, 100)
    disc = core.make_discretization(grid, m, cfg)
    u = np.tile(m.conserved(1.0, 0.0, 1.0), (100, 4, 1))
    dt = core.compute_dt(disc, u, 0.0)
    assert dt == pytest.approx(0.98 * 0.107 * 0.01 / np.sqrt(1.4), rel=1e-12)


def test_compute_dt_advection_and_clamp():
    disc = make_disc(ncells=10, cfl=0.107, safety=0.98, final_time=1.0)
    u = np.ones((10, 4, 1))
    assert core.compute_dt(disc, u, 0.0) == pytest.approx(0.98 * 0.107 * 0.1)
    assert core.compute_dt(disc, u, 1.0 - 1e-5) == pytest.approx(1e-5, rel=1e-6)


def test_compute_dt_zero_speed_caps_at_horizon():
    disc = make_disc(ncells=10, model=models.Burgers(), final_time=0.7)
    u = np.zeros((10, 4, 1))
    assert core.compute_dt(disc, u, 0.2) == pytest.approx(0.5)


# ----------------------------------------------------------------------
# full steps


def test_step_preserves_constant_state():
    for bc in ("periodic", "transmissive"):
        disc = make_disc(boundary=bc)
        u = np.full((10, 4, 1), 2.5)
        out, _ = core.mdrk_step(disc, u, 0.0, 0.005)
        assert np.allclose(out, 2.5, atol=1e-14)


def test_step_is_linear_for_advection():
    disc = make_disc(ncells=8)
    rng = np.random.default_rng(8)
    u = rng.normal(size=(8, 4, 1))
    w = rng.normal(size=(8, 4, 1))
    a, b = 1.7, -0.6
    dt = 0.004
    s_u, _ = core.mdrk_step(disc, u, 0.0, dt)
    s_w, _ = core.mdrk_step(disc, w, 0.0, dt)
    s_mix, _ = core.mdrk_step(disc, a * u + b * w, 0.0, dt)
    assert np.allclose(s_mix, a * s_u + b * s_w, atol=1e-12)


def test_step_mass_conservation_periodic():
    disc = make_disc(ncells=16, model=models.Burgers())
    u = 0.2 * np.sin(2 * np.pi * disc.xn)[..., None] + 1.0
    w = disc.ops.weights
    mass0 = float(np.einsum("e,p,epv->", disc.dx, w, u))
    for _ in range(20):
        u, _ = core.mdrk_step(disc, u, 0.0, 0.002)
    mass1 = float(np.einsum("e,p,epv->", disc.dx, w, u))
    assert mass1 == pytest.approx(mass0, abs=1e-13)


def test_step_mean_update_identity():
    # per-element mean change equals the face-flux difference, both stages
    disc = make_disc(ncells=12, model=models.Burgers())
    u = (0.3 * np.sin(2 * np.pi * disc.xn) + 1.0)[..., None]
    w = disc.ops.weights
    dt = 0.003
    before = np.einsum("p,epv->ev", w, u)
    out, diag = core.mdrk_step(disc, u, 0.0, dt)
    after = np.einsum("p,epv->ev", w, out)
    expected = before - (dt / disc.dx)[:, None] * (diag.fnum2[1:] - diag.fnum2[:-1])
    assert np.allclose(after, expected, atol=1e-13)


def test_admissibility_abort_carries_location():
    m = models.Euler()
    cfg = core.RunConfig(final_time=1.0, boundary="periodic")
    grid = core.make_grid(0.0, 1.0, 6)
    disc = core.make_discretization(grid, m, cfg)
    u = np.tile(m.conserved(1.0, 0.0, 1.0), (6, 4, 1))
    u[3, 2, 2] = -0.01  # makes pressure negative at one node
    with pytest.raises(AdmissibilityError) as err:
        core.validate_admissible(m, u, time=0.5)
    assert err.value.constraint == "pressure"
    assert err.value.element == 3 and err.value.node == 2


def test_source_constant_in_time_and_space():
    # du/dt = 1 with zero flux advances exactly for polynomial data
    m = models.LinearAdvection(0.0, source=lambda u, x, t: np.ones_like(u))
    cfg = core.RunConfig(final_time=1.0, boundary="periodic")
    grid = core.make_grid(0.0, 1.0, 6)
    disc = core.make_discretization(grid, m, cfg)
    u = np.full((6, 4, 1), 1.5)
    dt = 0.25
    out, _ = core.mdrk_step(disc, u, 0.0, dt)
    assert np.allclose(out, 1.5 + dt, atol=1e-14)


def test_source_linear_increment_identity():
    # for s linear in u the stencil reproduces s_u * u1 exactly
    s = lambda v, k: 3.0 * v
    rng = np.random.default_rng(9)
    u = rng.normal(size=(4, 4, 1))
    u1 = rng.normal(size=(4, 4, 1))
    out = core.flux_time_derivative(s, u, u1)
    assert np.allclose(out, 3.0 * u1, atol=1e-13)


def test_source_with_limiter_rejected():
    m = models.Euler(source=models.manufactured_source)
    cfg = core.RunConfig(final_time=1.0, boundary="periodic", limiter="mh")
    grid = core.make_grid(0.0, 1.0, 6)
    with pytest.raises(ConfigurationError):
        core.make_discretization(grid, m, cfg)


# ----------------------------------------------------------------------
# baseline integrator


def test_rkfr_constant_state():
    disc = make_disc()
    u = np.full((10, 4, 1), 1.1)
    out, _ = core.rkfr_step(disc, u, 0.0, 0.005)
    assert np.allclose(out, 1.1, atol=1e-14)


def test_rkfr_rejects_limiter():
    disc = make_disc(model=models.Euler(), limiter="fo")
    u = np.tile(models.Euler().conserved(1.0, 0.0, 1.0), (10, 4, 1))
    with pytest.raises(ConfigurationError):
        core.rkfr_step(disc, u, 0.0, 1e-3)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        core.RunConfig(dissipation="d3").validate()
    with pytest.raises(ConfigurationError):
        core.RunConfig(safety=1.5).validate()
    with pytest.raises(ConfigurationError):
        core.RunConfig(cfl=-0.1).validate()
    assert core.RunConfig().resolved_cfl() == pytest.approx(0.107)
