"""Five-stage, fourth-order strong-stability-preserving Runge-Kutta scheme.

Shu-Osher form with the optimal coefficients of Spiteri and Ruuth.  Used by
the Runge-Kutta baseline integrator and by its Fourier stability analysis.
"""

import numpy as np

B01 = 0.391752226571890
A20, A21, B12 = 0.444370493651235, 0.555629506348765, 0.368410593050371
A30, A32, B23 = 0.620101851488403, 0.379898148511597, 0.251891774271694
A40, A43, B34 = 0.178079954393132, 0.821920045606868, 0.544974750228521
A52, A53, B35 = 0.517231671970585, 0.096059710526147, 0.063692468666290
A54, B45 = 0.386708617503269, 0.226007483236906

# stage times follow the same affine recursion as the stage values
C1 = B01
C2 = A21 * C1 + B12
C3 = A32 * C2 + B23
C4 = A43 * C3 + B34


def step(rhs, u, t, dt):
    """Advance u by one step of u' = rhs(u, t).

    The stage-3 right-hand side is evaluated once and reused in the final
    combination.
    """
    u1 = u + B01 * dt * rhs(u, t)
    u2 = A20 * u + A21 * u1 + B12 * dt * rhs(u1, t + C1 * dt)
    u3 = A30 * u + A32 * u2 + B23 * dt * rhs(u2, t + C2 * dt)
    r3 = rhs(u3, t + C3 * dt)
    u4 = A40 * u + A43 * u3 + B34 * dt * r3
    return (A52 * u2 + A53 * u3 + B35 * dt * r3
            + A54 * u4 + B45 * dt * rhs(u4, t + C4 * dt))


def amplification(m):
    """Amplification matrix of one step applied to u' = (m / dt) u.

    m is the (possibly complex) matrix dt * L; broadcasting over leading
    axes is supported so a whole wavenumber batch can be done at once.
    """
    m = np.asarray(m)
    eye = np.broadcast_to(np.eye(m.shape[-1], dtype=m.dtype), m.shape)
    g1 = eye + B01 * m
    g2 = A20 * eye + (A21 * eye + B12 * m) @ g1
    g3 = A30 * eye + (A32 * eye + B23 * m) @ g2
    g4 = A40 * eye + (A43 * eye + B34 * m) @ g3
    return (A52 * g2 + (A53 * eye + B35 * m) @ g3
            + (A54 * eye + B45 * m) @ g4)
