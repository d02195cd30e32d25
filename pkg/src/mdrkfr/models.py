"""Conservation-law models: fluxes, wave speeds, admissibility constraints.

All model functions are vectorised: states have shape (..., nvar) and the
coordinate argument broadcasts against the leading axes.  Scalar models
carry nvar = 1 and no admissibility constraints; the gas-dynamics model has
the usual two (density, then pressure, ordered so the second is concave
once the first is positive).
"""

import numpy as np

from .errors import ConfigurationError, StencilStateError


class EquationModel:
    """Base interface for a 1-D conservation law u_t + f(u, x)_x = s."""

    nvar = 1
    var_names = ("u",)
    constraint_names = ()

    def __init__(self, source=None):
        self.source = source

    @property
    def nconstraints(self):
        return len(self.constraint_names)

    @property
    def has_source(self):
        return self.source is not None

    def flux(self, u, x):
        raise NotImplementedError

    def speed(self, u, x):
        """Bound on the wave speed (spectral radius of the flux Jacobian)."""
        raise NotImplementedError

    def constraints(self, u):
        """Values of the admissibility constraints, shape (..., K)."""
        return np.zeros(u.shape[:-1] + (0,))

    def max_face_speed(self, um, up, x):
        """Dissipation coefficient at a face from the two adjacent states."""
        return np.maximum(self.speed(um, x), self.speed(up, x))

    def indicator_quantity(self, u):
        """Scalar field fed to the smoothness indicator."""
        return u[..., 0]

    def reflect_state(self, u):
        """Mirror a state across a solid wall."""
        return u

    def reflect_flux(self, f):
        """Mirror a flux across a solid wall."""
        return -f


class LinearAdvection(EquationModel):
    """u_t + a u_x = 0 with constant speed a."""

    def __init__(self, a=1.0, source=None):
        super().__init__(source)
        self.a = a

    def flux(self, u, x):
        return self.a * u

    def speed(self, u, x):
        return np.broadcast_to(abs(self.a), np.broadcast_shapes(u.shape[:-1], np.shape(x))).copy()


class VariableAdvection(EquationModel):
    """u_t + (a(x) u)_x = 0; the flux is genuinely x-dependent."""

    def __init__(self, a_of_x, source=None):
        super().__init__(source)
        self.a_of_x = a_of_x

    def flux(self, u, x):
        return np.asarray(self.a_of_x(np.asarray(x)))[..., None] * u

    def speed(self, u, x):
        a = np.abs(np.asarray(self.a_of_x(np.asarray(x))))
        return np.broadcast_to(a, np.broadcast_shapes(u.shape[:-1], np.shape(x))).copy()


class Burgers(EquationModel):
    """u_t + (u^2 / 2)_x = 0."""

    def flux(self, u, x):
        return 0.5 * u * u

    def speed(self, u, x):
        return np.broadcast_to(np.abs(u[..., 0]), np.broadcast_shapes(u.shape[:-1], np.shape(x))).copy()


class Euler(EquationModel):
    """1-D compressible gas dynamics in conserved variables (rho, rho v, E)."""

    nvar = 3
    var_names = ("density", "momentum", "energy")
    constraint_names = ("density", "pressure")

    def __init__(self, gamma=1.4, source=None):
        super().__init__(source)
        if gamma <= 1.0:
            raise ConfigurationError(f"adiabatic constant must exceed 1, got {gamma}")
        self.gamma = gamma

    def primitive(self, u):
        rho = u[..., 0]
        v = u[..., 1] / rho
        p = (self.gamma - 1.0) * (u[..., 2] - 0.5 * u[..., 1] * v)
        return rho, v, p

    def conserved(self, rho, v, p):
        rho, v, p = np.broadcast_arrays(rho, v, p)
        e = p / (self.gamma - 1.0) + 0.5 * rho * v * v
        return np.stack([rho, rho * v, e], axis=-1)

    def pressure(self, u):
        return (self.gamma - 1.0) * (u[..., 2] - 0.5 * u[..., 1] ** 2 / u[..., 0])

    def sound_speed(self, u):
        return np.sqrt(self.gamma * self.pressure(u) / u[..., 0])

    def flux(self, u, x):
        rho = u[..., 0]
        if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
            bad = float(np.min(rho)) if np.all(np.isfinite(rho)) else float("nan")
            raise StencilStateError("density", bad,
                                    detail="primitive recovery needs positive density")
        v = u[..., 1] / rho
        p = (self.gamma - 1.0) * (u[..., 2] - 0.5 * u[..., 1] * v)
        return np.stack([u[..., 1], p + u[..., 1] * v, (u[..., 2] + p) * v], axis=-1)

    def speed(self, u, x):
        rho, v, p = self.primitive(u)
        return np.broadcast_to(np.abs(v) + np.sqrt(self.gamma * p / rho),
                               np.broadcast_shapes(u.shape[:-1], np.shape(x))).copy()

    def constraints(self, u):
        return np.stack([u[..., 0], self.pressure(u)], axis=-1)

    def indicator_quantity(self, u):
        return u[..., 0] * self.pressure(u)

    def reflect_state(self, u):
        return u * np.array([1.0, -1.0, 1.0])

    def reflect_flux(self, f):
        return f * np.array([-1.0, 1.0, -1.0])


def rusanov_flux(model, ul, ur, x):
    """Central flux plus local max-wave-speed penalty on the state jump."""
    lam = model.max_face_speed(ul, ur, x)
    return 0.5 * (model.flux(ul, x) + model.flux(ur, x)) - 0.5 * lam[..., None] * (ur - ul)


def admissibility_values(model, u):
    """Constraint values p_k(u); negative entries are data, not errors."""
    return model.constraints(np.asarray(u))


def varadv_x2_speed(x):
    return np.asarray(x) ** 2


def _varadv_x2_exact(x, t):
    x = np.asarray(x, dtype=float)
    y = x / (1.0 + t * x)
    return np.cos(np.pi * y / 2.0) / (1.0 + t * x) ** 2


def _burgers_sine_exact(x, t, amplitude=0.2, tol=1e-14, maxit=100):
    """Solve u = A sin(x - u t) by Newton along characteristics (pre-shock)."""
    x = np.asarray(x, dtype=float)
    u = amplitude * np.sin(x)
    for _ in range(maxit):
        phase = x - u * t
        g = u - amplitude * np.sin(phase)
        dg = 1.0 + amplitude * t * np.cos(phase)
        du = g / dg
        u = u - du
        if np.max(np.abs(du)) < tol:
            break
    return u


# manufactured gas-dynamics solution: travelling density and pressure waves
# with constant velocity, balanced by momentum and energy forcing
MS_RHO0, MS_RHO_AMP = 2.0, 0.2
MS_P0, MS_P_AMP = 2.0, 0.5
MS_V = 0.5
MS_K = 2.0 * np.pi


def manufactured_state(x, t, gamma=1.4):
    w = MS_K * (np.asarray(x, dtype=float) - MS_V * t)
    rho = MS_RHO0 + MS_RHO_AMP * np.sin(w)
    p = MS_P0 + MS_P_AMP * np.sin(w)
    return Euler(gamma).conserved(rho, np.full_like(rho, MS_V), p)


def manufactured_source(u, x, t):
    w = MS_K * (np.asarray(x, dtype=float) - MS_V * t)
    forcing = MS_K * MS_P_AMP * np.cos(w)
    zeros = np.zeros_like(forcing)
    return np.stack([zeros, forcing, MS_V * forcing], axis=-1)


_EXACT = {
    "linadv_sine": lambda x, t: np.sin(2.0 * np.pi * (np.asarray(x, dtype=float) - t))[..., None],
    "varadv_x2": lambda x, t: _varadv_x2_exact(x, t)[..., None],
    "burgers_sine": lambda x, t: _burgers_sine_exact(x, t)[..., None],
    "source_manufactured": manufactured_state,
}


def exact_solution(case_id, x, t):
    """Exact state for the catalogued cases that have one."""
    try:
        fn = _EXACT[case_id]
    except KeyError:
        raise ConfigurationError(f"no exact solution registered for case {case_id!r}")
    return fn(x, t)


def has_exact_solution(case_id):
    return case_id in _EXACT
