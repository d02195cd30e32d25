"""Two-stage, fourth-order time stepping with flux reconstruction in space.

Each stage evolves the nodal solution with a time-averaged flux built by
the Jacobian-free approximate Lax-Wendroff procedure: flux time derivatives
are replaced by a five-point finite-difference stencil along solution
increments.  The stage-averaged flux is made continuous across elements by
correction functions and collocated, so one step needs two residual
assemblies regardless of the order.

Conventions used throughout:
    u        nodal solution, shape (ne, N+1, nvar)
    u1       dt * du/dt approximation at the nodes
    F        time-averaged flux over [t, t + dt/2] (first stage)
    Fs       time-averaged flux over [t, t + dt]   (second stage)
    faces    ne+1 element boundaries; face i sits between elements i-1, i
"""

from dataclasses import dataclass, field

import numpy as np

from . import blending, stability
from .errors import AdmissibilityError, ConfigurationError
from .models import EquationModel
from .operators import ReferenceOperators, gauss_legendre, make_operators

BOUNDARY_KINDS = ("periodic", "transmissive", "reflective", "dirichlet_outflow",
                  "dirichlet")
LIMITER_KINDS = ("none", "fo", "mh")
FACE_SCHEMES = ("ae", "ea")


@dataclass(frozen=True)
class Grid:
    """Element boundaries of a 1-D mesh."""

    faces: np.ndarray

    def __post_init__(self):
        self.faces.setflags(write=False)

    @property
    def ncells(self):
        return len(self.faces) - 1

    @property
    def dx(self):
        return np.diff(self.faces)

    def nodes(self, ops):
        return self.faces[:-1, None] + np.diff(self.faces)[:, None] * ops.nodes[None, :]


def make_grid(xlo, xhi, ncells):
    if ncells < 1 or xhi <= xlo:
        raise ConfigurationError(f"bad mesh request: [{xlo}, {xhi}] with {ncells} cells")
    return Grid(np.linspace(xlo, xhi, ncells + 1))


@dataclass
class SolutionField:
    """Nodal degrees of freedom over a grid at one time level."""

    grid: Grid
    data: np.ndarray
    time: float = 0.0


@dataclass
class RunConfig:
    """All solver knobs; defaults follow the production setup."""

    degree: int = 3
    points: str = "gl"
    correction: str = "radau"
    dissipation: str = "d2"
    face_scheme: str = "ea"
    cfl: float | None = None
    safety: float = 0.98
    limiter: str = "none"
    boundary: str = "periodic"
    final_time: float = 1.0
    # smoothness indicator parameters (recorded here so runs are reproducible)
    alpha_max: float = 0.5
    alpha_min: float = 1e-3
    indicator_sharpness: float = 9.21024
    snapshot_every: int = 0

    def validate(self):
        if self.points not in ("gl", "gll"):
            raise ConfigurationError(f"unknown point kind {self.points!r}")
        if self.correction not in ("radau", "g2"):
            raise ConfigurationError(f"unknown correction {self.correction!r}")
        if self.dissipation not in ("d1", "d2"):
            raise ConfigurationError(f"unknown dissipation {self.dissipation!r}")
        if self.face_scheme not in FACE_SCHEMES:
            raise ConfigurationError(f"unknown face scheme {self.face_scheme!r}")
        if self.limiter not in LIMITER_KINDS:
            raise ConfigurationError(f"unknown limiter {self.limiter!r}")
        if self.boundary not in BOUNDARY_KINDS:
            raise ConfigurationError(f"unknown boundary kind {self.boundary!r}")
        if not 0.0 < self.safety <= 1.0:
            raise ConfigurationError(f"safety factor must lie in (0, 1], got {self.safety}")
        if self.cfl is not None and self.cfl <= 0.0:
            raise ConfigurationError(f"CFL must be positive, got {self.cfl}")
        return self

    def resolved_cfl(self):
        if self.cfl is not None:
            return self.cfl
        return stability.default_cfl(self.correction, self.dissipation)


@dataclass
class Discretization:
    """Immutable per-run bundle: mesh, operators, model, configuration."""

    grid: Grid
    ops: ReferenceOperators
    model: EquationModel
    config: RunConfig
    bc_state: object = None  # callable (x, t) -> state, for Dirichlet inflow
    xn: np.ndarray = field(init=False)
    dx: np.ndarray = field(init=False)

    def __post_init__(self):
        self.xn = self.grid.nodes(self.ops)
        self.dx = self.grid.dx

    @property
    def bc(self):
        return self.config.boundary


def make_discretization(grid, model, config, bc_state=None):
    config.validate()
    ops = make_operators(config.degree, config.points, config.correction)
    if config.boundary.startswith("dirichlet") and bc_state is None:
        raise ConfigurationError("dirichlet boundaries need a boundary-state callable")
    if config.boundary == "reflective" and model.nvar == 1:
        raise ConfigurationError("reflective walls are defined for the gas model only")
    if model.has_source and config.limiter != "none":
        raise ConfigurationError("source terms are supported with limiter='none' only")
    return Discretization(grid, ops, model, config, bc_state)


# ----------------------------------------------------------------------
# elementwise building blocks


def local_solution_derivative(u, f, dx, dt, d_matrix, s=None):
    """u1 = -(dt/dx) D f (+ dt s): the scaled local solution time derivative."""
    u1 = -(dt / dx)[:, None, None] * np.einsum("pq,eqv->epv", d_matrix, f)
    if s is not None:
        u1 = u1 + dt * s
    return u1


def flux_time_derivative(eval_fn, u, u1):
    """Five-point approximation of dt * d/dt of eval_fn along u + tau*u1.

    eval_fn(state, shift) evaluates the flux (or source) at the perturbed
    state; shift in {-2, -1, 1, 2} tells time-dependent integrands which
    sample time to use.  Exact whenever the composition is a polynomial of
    degree <= 4 in the path parameter.
    """
    return (-eval_fn(u + 2.0 * u1, 2) + 8.0 * eval_fn(u + u1, 1)
            - 8.0 * eval_fn(u - u1, -1) + eval_fn(u - 2.0 * u1, -2)) / 12.0


@dataclass
class StageCache:
    """Intermediates of stage one that stage two reuses unchanged."""

    f: np.ndarray
    f1: np.ndarray
    u1: np.ndarray
    s: np.ndarray = None
    s1: np.ndarray = None
    # face quantities for the extrapolate-then-average scheme
    face_f: dict = None
    face_f1: dict = None
    face_bad: dict = None


def stage1_time_average(model, u, xn, dx, dt, ops, t=0.0):
    """First-stage averaged flux F = f + f1/4 and solution u + u1/4."""
    f = model.flux(u, xn)
    s = model.source(u, xn, t) if model.has_source else None
    u1 = local_solution_derivative(u, f, dx, dt, ops.D, s)
    f1 = flux_time_derivative(lambda v, k: model.flux(v, xn), u, u1)
    s1 = None
    if model.has_source:
        s1 = flux_time_derivative(lambda v, k: model.source(v, xn, t + k * dt), u, u1)
    cache = StageCache(f=f, f1=f1, u1=u1, s=s, s1=s1)
    favg = f + 0.25 * f1
    uavg = u + 0.25 * u1
    savg = s + 0.25 * s1 if model.has_source else None
    return favg, uavg, savg, cache


def stage2_time_average(model, u, ustar, cache, xn, dx, dt, ops, t=0.0):
    """Second-stage averages; stage-one f, f1, u1 are reused unchanged."""
    ts = t + 0.5 * dt
    fs = model.flux(ustar, xn)
    ss = model.source(ustar, xn, ts) if model.has_source else None
    us1 = local_solution_derivative(ustar, fs, dx, dt, ops.D, ss)
    fs1 = flux_time_derivative(lambda v, k: model.flux(v, xn), ustar, us1)
    favg = cache.f + (cache.f1 + 2.0 * fs1) / 6.0
    uavg = u + (cache.u1 + 2.0 * us1) / 6.0
    savg = None
    if model.has_source:
        ss1 = flux_time_derivative(lambda v, k: model.source(v, xn, ts + k * dt), ustar, us1)
        savg = cache.s + (cache.s1 + 2.0 * ss1) / 6.0
    return favg, uavg, savg, us1


def _trace(vec, q):
    return np.einsum("p,epv->ev", vec, q)


def face_values_ae(favg, ops):
    """Extrapolate the nodal averaged flux to both faces of every element."""
    return _trace(ops.VL, favg), _trace(ops.VR, favg)


def _evaluable(model, u):
    ok = np.all(np.isfinite(u), axis=-1)
    if model.nvar > 1:
        ok &= np.real(u[..., 0]) > 0.0
    return ok


def _ea_side_states(model, vec, u, u1, safe):
    """Face trace of u and its increment, with a usability mask.

    Wherever any of the five stencil states would not be evaluable (e.g.
    non-positive density after extrapolation), the trace is replaced by the
    admissible adjacent node value with zero increment; callers overwrite
    those rows with the flux-extrapolation value afterwards.
    """
    ua = _trace(vec, u)
    u1a = _trace(vec, u1)
    bad = ~(_evaluable(model, ua) & _evaluable(model, ua + u1a)
            & _evaluable(model, ua - u1a) & _evaluable(model, ua + 2.0 * u1a)
            & _evaluable(model, ua - 2.0 * u1a))
    if np.any(bad):
        ua = np.where(bad[:, None], safe, ua)
        u1a = np.where(bad[:, None], np.zeros_like(u1a), u1a)
    return ua, u1a, bad


def face_values_ea_stage1(model, u, u1, ops, xf_left, xf_right, favg):
    """Stage-one face fluxes built directly at the faces.

    The solution and its increment are extrapolated first; the same
    five-point stencil used at the solution points is then applied at the
    face coordinate.  Faces whose extrapolated states are not evaluable
    fall back to extrapolating the nodal averaged flux instead (the two
    constructions coincide on nodesets that include the endpoints).
    Returns the per-element (left, right) face values and the pieces
    reused by stage two.
    """
    face_f, face_f1, face_bad, out = {}, {}, {}, {}
    for side, vec, xf, safe in (("L", ops.VL, xf_left, u[:, 0]),
                                ("R", ops.VR, xf_right, u[:, -1])):
        ua, u1a, bad = _ea_side_states(model, vec, u, u1, safe)
        fa = model.flux(ua, xf)
        f1a = flux_time_derivative(lambda v, k: model.flux(v, xf), ua, u1a)
        value = fa + 0.25 * f1a
        if np.any(bad):
            value = np.where(bad[:, None], _trace(vec, favg), value)
        face_f[side], face_f1[side], face_bad[side] = fa, f1a, bad
        out[side] = value
    return out["L"], out["R"], face_f, face_f1, face_bad


def face_values_ea_stage2(model, ustar, us1, cache, ops, xf_left, xf_right, favg2):
    """Stage-two face fluxes; stage-one face flux pieces are reused.

    Faces that fell back in stage one, or whose stage-two extrapolated
    states are not evaluable, use the flux extrapolation again.
    """
    out = {}
    for side, vec, xf, safe in (("L", ops.VL, xf_left, ustar[:, 0]),
                                ("R", ops.VR, xf_right, ustar[:, -1])):
        ua, u1a, bad = _ea_side_states(model, vec, ustar, us1, safe)
        fs1a = flux_time_derivative(lambda v, k: model.flux(v, xf), ua, u1a)
        value = cache.face_f[side] + (cache.face_f1[side] + 2.0 * fs1a) / 6.0
        bad = bad | cache.face_bad[side]
        if np.any(bad):
            value = np.where(bad[:, None], _trace(vec, favg2), value)
        out[side] = value
    return out["L"], out["R"]


def numerical_flux(f_minus, f_plus, diss_minus, diss_plus, lam):
    """Central average of the face fluxes plus jump penalty on the traces."""
    return 0.5 * (f_minus + f_plus) - 0.5 * lam[..., None] * (diss_plus - diss_minus)


def fr_flux_derivative(favg, fnum_left, fnum_right, ops):
    """Derivative of the corrected (continuous) flux at the solution points.

    fnum_left/fnum_right are the numerical fluxes at each element's own
    faces, shape (ne, nvar).
    """
    jump_l = fnum_left - _trace(ops.VL, favg)
    jump_r = fnum_right - _trace(ops.VR, favg)
    return (np.einsum("pq,eqv->epv", ops.D, favg)
            + ops.bL[None, :, None] * jump_l[:, None, :]
            + ops.bR[None, :, None] * jump_r[:, None, :])


# ----------------------------------------------------------------------
# faces, ghosts and boundaries


def face_sides(val_left, val_right, bc, reflect=None):
    """Minus/plus values at all ne+1 faces from per-element trace values.

    val_left[e] is the element's trace at its own left face, val_right[e]
    at its right face.  The ghost entries follow the boundary kind:
    periodic wraps, transmissive (and the Dirichlet closure, whose face
    flux is overridden later) copies the interior trace, reflective
    mirrors it.
    """
    if bc == "periodic":
        ghost_minus, ghost_plus = val_right[-1], val_left[0]
    elif bc == "reflective":
        ghost_minus, ghost_plus = reflect(val_left[0]), reflect(val_right[-1])
    else:
        ghost_minus, ghost_plus = val_left[0], val_right[-1]
    minus = np.concatenate([ghost_minus[None], val_right], axis=0)
    plus = np.concatenate([val_left, ghost_plus[None]], axis=0)
    return minus, plus


def face_wave_speeds(disc, u):
    """Dissipation coefficient per face from the element-mean states."""
    means = np.einsum("p,epv->ev", disc.ops.weights, u)
    speeds = disc.model.speed(means[:, None, :], disc.xn).max(axis=1)
    if disc.bc == "periodic":
        ghost_l, ghost_r = speeds[-1], speeds[0]
    else:
        ghost_l, ghost_r = speeds[0], speeds[-1]
    left = np.concatenate([[ghost_l], speeds])
    right = np.concatenate([speeds, [ghost_r]])
    return np.maximum(np.real(left), np.real(right))


_TIME_QUAD = gauss_legendre(3)


def _dirichlet_face_flux(disc, x_b, t0, tau):
    """Time-average of the imposed boundary flux over one stage interval."""
    xq, wq = _TIME_QUAD
    theta = (xq + 1.0) / 2.0
    total = 0.0
    for th, w in zip(theta, wq / 2.0):
        state = np.asarray(disc.bc_state(x_b, t0 + tau * th), dtype=float)
        total = total + w * disc.model.flux(state, x_b)
    return total


def _assemble_face_flux(disc, face_l, face_r, ud, lam, t, tau):
    """Numerical flux at every face for one stage.

    face_l/face_r: per-element central face values; ud: nodal states whose
    traces feed the dissipation (the time-averaged solution for the d2
    variant, the start-of-step solution for d1).
    """
    model = disc.model
    fm, fp = face_sides(face_l, face_r, disc.bc, model.reflect_flux)
    dl, dr = _trace(disc.ops.VL, ud), _trace(disc.ops.VR, ud)
    um, up = face_sides(dl, dr, disc.bc, model.reflect_state)
    fnum = numerical_flux(fm, fp, um, up, lam)
    if disc.bc in ("dirichlet_outflow", "dirichlet"):
        fnum[0] = _dirichlet_face_flux(disc, disc.grid.faces[0], t, tau)
    if disc.bc == "dirichlet":
        fnum[-1] = _dirichlet_face_flux(disc, disc.grid.faces[-1], t, tau)
    return fnum


# ----------------------------------------------------------------------
# admissibility checks and time-step control


def validate_admissible(model, u, time=None, step=None, detail=""):
    """Raise with located diagnostics when a nodal state is inadmissible."""
    if not np.all(np.isfinite(u)):
        e, p = np.unravel_index(int(np.argmin(np.isfinite(u).all(axis=-1))), u.shape[:2])
        raise AdmissibilityError("finite", float("nan"), element=int(e), node=int(p),
                                 time=time, step=step, detail=detail or "non-finite state")
    if model.nconstraints == 0:
        return
    vals = model.constraints(u)
    for k, name in enumerate(model.constraint_names):
        col = vals[..., k]
        if np.any(col <= 0.0):
            e, p = np.unravel_index(int(np.argmin(col)), col.shape)
            raise AdmissibilityError(name, float(col[e, p]), element=int(e),
                                     node=int(p), time=time, step=step, detail=detail)


def compute_dt(disc, u, t):
    """CFL time step from element-mean wave speeds, clamped to the horizon."""
    cfg = disc.config
    means = np.einsum("p,epv->ev", disc.ops.weights, u)
    speeds = np.real(disc.model.speed(means[:, None, :], disc.xn)).max(axis=1)
    remaining = cfg.final_time - t
    smax = float(np.max(speeds))
    if smax <= 0.0:
        return remaining
    dt = cfg.safety * cfg.resolved_cfl() * float(np.min(disc.dx / np.maximum(speeds, 1e-300)))
    return min(dt, remaining)


# ----------------------------------------------------------------------
# the two-stage update


@dataclass
class StepDiagnostics:
    """Per-step record used by conservation and limiter tests."""

    fnum1: np.ndarray = None
    fnum2: np.ndarray = None
    alpha1: np.ndarray = None
    alpha2: np.ndarray = None
    theta1: np.ndarray = None   # per-face, per-constraint flux-limiter factors
    theta2: np.ndarray = None
    theta_min: float = 1.0
    min_constraints: np.ndarray = None
    dt: float = 0.0


def _stage_residuals(disc, u_tn, favg, uavg, stage_u, lam, t, tau, compute_alpha_from):
    """Face fluxes plus high/low residuals for one stage.

    Returns (fnum, r_high, r_low, alpha, theta_min); r_low and alpha are
    None when blending is off.
    """
    cfg = disc.config
    ops = disc.ops
    if cfg.face_scheme == "ae":
        face_l, face_r = face_values_ae(favg, ops)
    else:
        face_l, face_r = stage_u  # precomputed by the caller for EA
    ud = uavg if cfg.dissipation == "d2" else u_tn
    fnum = _assemble_face_flux(disc, face_l, face_r, ud, lam, t, tau)

    alpha = r_low = thetas = None
    if cfg.limiter != "none":
        alpha = blending.smoothness_alpha(disc, compute_alpha_from)
        subface = blending.low_order_subface_fluxes(disc, u_tn, tau,
                                                    use_slopes=(cfg.limiter == "mh"))
        fnum, thetas = blending.blend_and_limit_face_flux(
            disc, fnum, subface, u_tn, tau, alpha)
        r_low = blending.low_order_residual(disc, subface, fnum)
    r_high = fr_flux_derivative(favg, fnum[:-1], fnum[1:], ops)
    return fnum, r_high, r_low, alpha, thetas


def _blend(r_high, r_low, alpha):
    if alpha is None:
        return r_high
    a = alpha[:, None, None]
    return (1.0 - a) * r_high + a * r_low


def mdrk_step(disc, u, t, dt):
    """One full two-stage update from t to t + dt.

    Returns the new nodal array and per-step diagnostics.  Raises
    AdmissibilityError (with location context) if a stage output leaves
    the admissible set, and StencilStateError when intermediate stencil
    states are not evaluable; the caller may retry the latter with a
    smaller step.
    """
    cfg = disc.config
    model = disc.model
    limited = cfg.limiter != "none"
    lam = face_wave_speeds(disc, u)

    # stage 1: averages over [t, t + dt/2]
    favg1, uavg1, savg1, cache = stage1_time_average(model, u, disc.xn, disc.dx,
                                                     dt, disc.ops, t)
    ea_faces = None
    if cfg.face_scheme == "ea":
        fl, fr, face_f, face_f1, face_bad = face_values_ea_stage1(
            model, u, cache.u1, disc.ops, disc.grid.faces[:-1], disc.grid.faces[1:],
            favg1)
        cache.face_f, cache.face_f1, cache.face_bad = face_f, face_f1, face_bad
        ea_faces = (fl, fr)
    fnum1, rh1, rl1, alpha1, th1 = _stage_residuals(
        disc, u, favg1, uavg1, ea_faces, lam, t, 0.5 * dt, compute_alpha_from=u)
    ustar = u - (0.5 * dt / disc.dx)[:, None, None] * _blend(rh1, rl1, alpha1)
    if savg1 is not None:
        ustar = ustar + 0.5 * dt * savg1
    if limited:
        ustar = blending.scaling_limiter(disc, ustar)
    validate_admissible(model, ustar, time=t, detail="after first stage")

    # stage 2: averages over [t, t + dt]
    favg2, uavg2, savg2, us1 = stage2_time_average(model, u, ustar, cache,
                                                   disc.xn, disc.dx, dt, disc.ops, t)
    ea_faces = None
    if cfg.face_scheme == "ea":
        ea_faces = face_values_ea_stage2(model, ustar, us1, cache, disc.ops,
                                         disc.grid.faces[:-1], disc.grid.faces[1:],
                                         favg2)
    fnum2, rh2, rl2, alpha2, th2 = _stage_residuals(
        disc, u, favg2, uavg2, ea_faces, lam, t, dt, compute_alpha_from=ustar)
    unew = u - (dt / disc.dx)[:, None, None] * _blend(rh2, rl2, alpha2)
    if savg2 is not None:
        unew = unew + dt * savg2
    if limited:
        unew = blending.scaling_limiter(disc, unew)
    validate_admissible(model, unew, time=t + dt, detail="after second stage")

    mins = None
    if model.nconstraints:
        mins = model.constraints(unew).reshape(-1, model.nconstraints).min(axis=0)
    theta_min = 1.0
    for th in (th1, th2):
        if th is not None and th.size:
            theta_min = min(theta_min, float(th.min()))
    diag = StepDiagnostics(fnum1=fnum1, fnum2=fnum2, alpha1=alpha1, alpha2=alpha2,
                           theta1=th1, theta2=th2, theta_min=theta_min,
                           min_constraints=mins, dt=dt)
    return unew, diag


# ----------------------------------------------------------------------
# Runge-Kutta reference integrator (comparison baseline)


def rkfr_rhs(disc, u, t):
    """Classical semi-discrete right-hand side with the corrected flux."""
    model, ops = disc.model, disc.ops
    f = model.flux(u, disc.xn)
    lam = face_wave_speeds(disc, u)
    ul, ur = _trace(ops.VL, u), _trace(ops.VR, u)
    um, up = face_sides(ul, ur, disc.bc, model.reflect_state)
    fm = model.flux(um, disc.grid.faces)
    fp = model.flux(up, disc.grid.faces)
    fnum = numerical_flux(fm, fp, um, up, lam)
    if disc.bc in ("dirichlet_outflow", "dirichlet"):
        state = np.asarray(disc.bc_state(disc.grid.faces[0], t), dtype=float)
        fnum[0] = model.flux(state, disc.grid.faces[0])
    if disc.bc == "dirichlet":
        state = np.asarray(disc.bc_state(disc.grid.faces[-1], t), dtype=float)
        fnum[-1] = model.flux(state, disc.grid.faces[-1])
    dudt = -fr_flux_derivative(f, fnum[:-1], fnum[1:], ops) / disc.dx[:, None, None]
    if model.has_source:
        dudt = dudt + model.source(u, disc.xn, t)
    return dudt


def rkfr_step(disc, u, t, dt):
    """Advance the baseline integrator by one step."""
    from . import ssprk

    if disc.config.limiter != "none":
        raise ConfigurationError("the Runge-Kutta baseline runs unlimited")
    unew = ssprk.step(lambda v, tv: rkfr_rhs(disc, v, tv), u, t, dt)
    validate_admissible(disc.model, unew, time=t + dt, detail="baseline step")
    return unew, StepDiagnostics(dt=dt)
