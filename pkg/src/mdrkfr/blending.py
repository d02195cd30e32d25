"""Subcell-based shock capturing and admissibility enforcement.

Each element is split into N+1 subcells whose widths are the quadrature
weights times the element width, so nodal values double as subcell means.
A smoothness coefficient alpha per element blends the high-order residual
with a first-order or MUSCL-Hancock finite-volume update on the subcells;
both schemes share the interface fluxes, which keeps every element mean
identical between the blended and unblended updates.  Interface fluxes are
additionally corrected so the low-order updates next to each face stay
admissible, and a nodal scaling limiter squeezes the solution polynomial
toward the (admissible) element mean afterwards.
"""

from functools import lru_cache

import numpy as np

from .errors import AdmissibilityError, StencilStateError
from .models import rusanov_flux
from .operators import build_nodeset, legendre


# ----------------------------------------------------------------------
# smoothness indicator


@lru_cache(maxsize=None)
def _modal_inverse(degree, kind):
    """Nodal-to-modal transform for orthonormal Legendre on [0, 1]."""
    ns = build_nodeset(degree, kind)
    x = 2.0 * ns.nodes - 1.0
    vand = np.column_stack([np.sqrt(2 * j + 1) * legendre(j, x)[0]
                            for j in range(degree + 1)])
    return np.linalg.inv(vand)


def indicator_threshold(degree):
    return 0.5 * 10.0 ** (-1.8 * (degree + 1) ** 0.25)


def smoothness_alpha(disc, u):
    """Per-element blending coefficient in [0, alpha_max].

    Energy of the two highest Legendre modes of the indicator quantity is
    mapped through a logistic; tiny values floor to zero, saturated values
    cap at alpha_max, and one max-with-half-neighbour pass spreads the
    flag to adjacent elements.
    """
    cfg = disc.config
    degree = disc.ops.degree
    q = np.real(disc.model.indicator_quantity(u))
    modal = q @ _modal_inverse(degree, disc.ops.nodeset.kind).T
    sq = modal * modal
    total = sq.sum(axis=1)
    total_lo = total - sq[:, -1]
    with np.errstate(invalid="ignore", divide="ignore"):
        e_top = np.where(total > 0.0, sq[:, -1] / total, 0.0)
        e_next = np.where(total_lo > 0.0, sq[:, -2] / total_lo, 0.0)
    energy = np.maximum(e_top, e_next)

    thresh = indicator_threshold(degree)
    alpha = 1.0 / (1.0 + np.exp(-cfg.indicator_sharpness / thresh * (energy - thresh)))
    alpha[alpha < cfg.alpha_min] = 0.0
    alpha[alpha > 1.0 - cfg.alpha_min] = 1.0
    alpha = np.minimum(alpha, cfg.alpha_max)

    left, right = _pad_scalar(alpha, disc.bc)
    return np.maximum(alpha, 0.5 * np.maximum(left, right))


def _pad_scalar(a, bc):
    """Left/right neighbour values of a per-element array under the BC."""
    if bc == "periodic":
        return np.roll(a, 1), np.roll(a, -1)
    left = np.concatenate([[a[0]], a[:-1]])
    right = np.concatenate([a[1:], [a[-1]]])
    return left, right


# ----------------------------------------------------------------------
# subcell geometry


class SubcellGeometry:
    """Global line of subcells covering the whole mesh.

    Arrays are flat over (element, node); ``subfaces`` has one more entry
    than there are subcells and its every P-th entry is an element face.
    """

    def __init__(self, grid, ops):
        w = ops.weights
        csum = np.concatenate([[0.0], np.cumsum(w)])
        csum[-1] = 1.0
        dx = grid.dx
        self.psub = len(w)
        sub = grid.faces[:-1, None] + dx[:, None] * csum[None, :]
        self.subfaces = np.concatenate([sub[:, :-1].ravel(), [grid.faces[-1]]])
        self.x = (grid.faces[:-1, None] + dx[:, None] * ops.nodes[None, :]).ravel()
        self.h = (dx[:, None] * w[None, :]).ravel()
        # node offsets to the subcell's own faces (left is negative)
        self.dl = self.subfaces[:-1] - self.x
        self.dr = self.subfaces[1:] - self.x
        self.length = grid.faces[-1] - grid.faces[0]


def subcell_geometry(disc):
    geo = getattr(disc, "_subcells", None)
    if geo is None:
        geo = SubcellGeometry(disc.grid, disc.ops)
        disc._subcells = geo
    return geo


# ----------------------------------------------------------------------
# low-order subcell schemes


def minmod3(a, b, c):
    """Componentwise minmod of three slope candidates."""
    sa = np.sign(a)
    agree = (sa == np.sign(b)) & (sa == np.sign(c))
    mag = np.minimum(np.abs(a), np.minimum(np.abs(b), np.abs(c)))
    return np.where(agree, sa * mag, 0.0)


def _pad_subcells(disc, geo, u_flat):
    """Ghost subcell (value, node position, face offsets) on each side."""
    model, bc = disc.model, disc.bc
    if bc == "periodic":
        gl = (u_flat[-1], geo.x[-1] - geo.length, geo.dl[-1], geo.dr[-1])
        gr = (u_flat[0], geo.x[0] + geo.length, geo.dl[0], geo.dr[0])
    elif bc == "reflective":
        xl, xr = disc.grid.faces[0], disc.grid.faces[-1]
        gl = (model.reflect_state(u_flat[0]), 2 * xl - geo.x[0], -geo.dr[0], -geo.dl[0])
        gr = (model.reflect_state(u_flat[-1]), 2 * xr - geo.x[-1], -geo.dr[-1], -geo.dl[-1])
    else:
        xl, xr = disc.grid.faces[0], disc.grid.faces[-1]
        gl = (u_flat[0], 2 * xl - geo.x[0], -geo.dr[0], -geo.dl[0])
        gr = (u_flat[-1], 2 * xr - geo.x[-1], -geo.dr[-1], -geo.dl[-1])
    return gl, gr


def _zero_bad_slopes(model, slopes, *states):
    """Zero the slope wherever any candidate state leaves the admissible set."""
    if model.nconstraints == 0:
        return slopes
    ok = np.ones(slopes.shape[0], dtype=bool)
    for st in states:
        ok &= np.all(model.constraints(st) > 0.0, axis=-1)
    return np.where(ok[:, None], slopes, 0.0)


def low_order_subface_fluxes(disc, u, tau, use_slopes):
    """Numerical fluxes at every subface of the global subcell line.

    First-order mode uses the nodal values directly; MUSCL-Hancock mode
    reconstructs limited linear profiles, evolves the subface traces half
    an interval, and feeds the evolved traces to the same two-state flux.
    Slopes are dropped wherever reconstruction or prediction would leave
    the admissible set, so the scheme degrades to first order exactly at
    the troubled subcells.
    """
    model = disc.model
    geo = subcell_geometry(disc)
    nv = u.shape[-1]
    uf = u.reshape(-1, nv)
    (ugl, xgl, dll, drl), (ugr, xgr, dlr, drr) = _pad_subcells(disc, geo, uf)

    up = np.concatenate([ugl[None], uf, ugr[None]], axis=0)
    xp = np.concatenate([[xgl], geo.x, [xgr]])
    dlp = np.concatenate([[dll], geo.dl, [dlr]])
    drp = np.concatenate([[drl], geo.dr, [drr]])

    if use_slopes:
        gap_l = (xp[1:-1] - xp[:-2])[:, None]
        gap_r = (xp[2:] - xp[1:-1])[:, None]
        d_left = (uf - up[:-2]) / gap_l
        d_right = (up[2:] - uf) / gap_r
        d_mid = (up[2:] - up[:-2]) / (gap_l + gap_r)
        slopes = minmod3(d_left, d_mid, d_right)
        slopes_pad = np.concatenate([np.zeros((1, nv)), slopes, np.zeros((1, nv))])
    else:
        slopes_pad = np.zeros_like(up)

    ul = up + slopes_pad * dlp[:, None]
    ur = up + slopes_pad * drp[:, None]
    slopes_pad = _zero_bad_slopes(model, slopes_pad, ul, ur)
    ul = up + slopes_pad * dlp[:, None]
    ur = up + slopes_pad * drp[:, None]

    if use_slopes:
        xfl, xfr = xp + dlp, xp + drp
        hp = drp - dlp
        dflux = (model.flux(ur, xfr) - model.flux(ul, xfl)) / hp[:, None]
        ul_ev = ul - 0.5 * tau * dflux
        ur_ev = ur - 0.5 * tau * dflux
        slopes_pad = _zero_bad_slopes(model, slopes_pad, ul_ev, ur_ev)
        ul = up + slopes_pad * dlp[:, None]
        ur = up + slopes_pad * drp[:, None]
        dflux = (model.flux(ur, xfr) - model.flux(ul, xfl)) / hp[:, None]
        ul_ev = ul - 0.5 * tau * dflux
        ur_ev = ur - 0.5 * tau * dflux
    else:
        ul_ev, ur_ev = ul, ur

    return rusanov_flux(model, ur_ev[:-1], ul_ev[1:], geo.subfaces)


def low_order_residual(disc, subface_fluxes, fnum):
    """Nodal low-order residual with the shared element-face fluxes.

    Interior subface fluxes come from the subcell scheme; the first and
    last subcell of each element see the element-face numerical flux, the
    same one the high-order residual uses.  Scaled so the update reads
    u - (tau/dx) * residual.
    """
    ne = disc.grid.ncells
    p = disc.ops.degree + 1
    nv = subface_fluxes.shape[-1]
    g = np.empty((ne, p + 1, nv), dtype=subface_fluxes.dtype)
    g[:, 1:p] = subface_fluxes[: ne * p].reshape(ne, p, nv)[:, 1:]
    g[:, 0] = fnum[:-1]
    g[:, p] = fnum[1:]
    return (g[:, 1:] - g[:, :-1]) / disc.ops.weights[None, :, None]


def blended_update(high, low, alpha):
    """Convex combination of high- and low-order residuals."""
    if np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise ValueError(f"blending coefficient outside [0, 1]: {alpha}")
    a = alpha[:, None, None]
    return (1.0 - a) * high + a * low


# ----------------------------------------------------------------------
# interface flux correction


def _face_alpha(alpha, bc):
    if bc == "periodic":
        edge_l, edge_r = alpha[-1], alpha[0]
    else:
        edge_l, edge_r = alpha[0], alpha[-1]
    a_minus = np.concatenate([[edge_l], alpha])
    a_plus = np.concatenate([alpha, [edge_r]])
    af = 0.5 * (a_minus + a_plus)
    if bc in ("dirichlet_outflow", "dirichlet"):
        af[0] = 0.0  # imposed boundary fluxes are not blended
    if bc == "dirichlet":
        af[-1] = 0.0
    return af


def blend_and_limit_face_flux(disc, fnum_ho, subface_fluxes, u, tau, alpha):
    """Blend the interface flux toward the subcell flux and correct it.

    Starting from the alpha-weighted average of the high-order and subcell
    fluxes, each admissibility constraint is enforced in turn on the two
    tentative low-order updates adjacent to the face by pulling the flux
    toward the subcell flux exactly as far as concavity requires.  Faces
    whose tentative updates already satisfy the constraint (with the
    one-tenth-of-the-low-order-value margin) are left untouched.

    Returns the corrected fluxes and the per-face, per-constraint theta
    factors (all ones where no correction fired).
    """
    model = disc.model
    ne = disc.grid.ncells
    p = disc.ops.degree + 1
    w = disc.ops.weights
    dx = disc.dx
    flow = subface_fluxes[::p]
    af = _face_alpha(alpha, disc.bc)
    fcur = (1.0 - af[:, None]) * fnum_ho + af[:, None] * flow
    if model.nconstraints == 0:
        return fcur, np.ones((ne + 1, 0))

    periodic = disc.bc == "periodic"
    # minus side: last subcell of the left element; plus side: first of the right
    um = np.concatenate([u[-1:, -1], u[:, -1]]) if periodic else \
        np.concatenate([u[:1, -1], u[:, -1]])
    upl = np.concatenate([u[:, 0], u[:1, 0]]) if periodic else \
        np.concatenate([u[:, 0], u[-1:, 0]])
    dx_m = np.concatenate([dx[-1:], dx]) if periodic else np.concatenate([dx[:1], dx])
    dx_p = np.concatenate([dx, dx[:1]]) if periodic else np.concatenate([dx, dx[-1:]])
    cm = (tau / (w[-1] * dx_m))[:, None]
    cp = (tau / (w[0] * dx_p))[:, None]
    f_int_m = np.concatenate([subface_fluxes[-2][None], subface_fluxes[p - 1:: p]]) \
        if periodic else np.concatenate([subface_fluxes[p - 1][None], subface_fluxes[p - 1:: p]])
    f_int_p = np.concatenate([subface_fluxes[1:: p], subface_fluxes[1][None]]) \
        if periodic else np.concatenate([subface_fluxes[1:: p], subface_fluxes[-2][None]])

    mask_m = np.ones(ne + 1, dtype=bool)
    mask_p = np.ones(ne + 1, dtype=bool)
    if not periodic:
        mask_m[0] = False
        mask_p[-1] = False
    if disc.bc in ("dirichlet_outflow", "dirichlet"):
        mask_p[0] = False  # imposed boundary fluxes stay untouched
    if disc.bc == "dirichlet":
        mask_m[-1] = False

    low_m = um - cm * (flow - f_int_m)
    low_p = upl - cp * (f_int_p - flow)
    cons_low_m = model.constraints(low_m)
    cons_low_p = model.constraints(low_p)
    for k, name in enumerate(model.constraint_names):
        bad_m = mask_m & ~(cons_low_m[:, k] > 0.0)
        bad_p = mask_p & ~(cons_low_p[:, k] > 0.0)
        if np.any(bad_m) or np.any(bad_p):
            val = min(cons_low_m[bad_m, k].min(initial=np.inf),
                      cons_low_p[bad_p, k].min(initial=np.inf))
            raise StencilStateError(f"low-order {name}", float(val),
                                    detail="subcell update left the admissible set")

    thetas = np.ones((ne + 1, model.nconstraints))
    for k in range(model.nconstraints):
        eps_m = 0.1 * cons_low_m[:, k]
        eps_p = 0.1 * cons_low_p[:, k]
        tld_m = um - cm * (fcur - f_int_m)
        tld_p = upl - cp * (f_int_p - fcur)
        pk_tm = model.constraints(tld_m)[:, k]
        pk_tp = model.constraints(tld_p)[:, k]
        theta = np.ones(ne + 1)
        need_m = mask_m & ~(pk_tm >= eps_m)
        need_p = mask_p & ~(pk_tp >= eps_p)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio_m = np.abs((eps_m - cons_low_m[:, k]) / (pk_tm - cons_low_m[:, k]))
            ratio_p = np.abs((eps_p - cons_low_p[:, k]) / (pk_tp - cons_low_p[:, k]))
        theta = np.minimum(theta, np.where(need_m, np.clip(ratio_m, 0.0, 1.0), 1.0))
        theta = np.minimum(theta, np.where(need_p, np.clip(ratio_p, 0.0, 1.0), 1.0))
        fcur = theta[:, None] * fcur + (1.0 - theta[:, None]) * flow
        thetas[:, k] = theta
    return fcur, thetas


# ----------------------------------------------------------------------
# nodal scaling limiter


def scaling_limiter(disc, u):
    """Squeeze each solution polynomial toward its element mean until all
    nodal constraint values clear one tenth of the mean's value.

    Constraints are enforced in their stated order so the concavity
    hypothesis of each later constraint holds when it is processed.  The
    element mean is preserved exactly.
    """
    model = disc.model
    if model.nconstraints == 0:
        return u
    w = disc.ops.weights
    mean = np.einsum("p,epv->ev", w, u)
    for k, name in enumerate(model.constraint_names):
        pbar = model.constraints(mean)[:, k]
        if np.any(~(pbar > 0.0)):
            e = int(np.argmin(pbar))
            raise AdmissibilityError(f"mean {name}", float(pbar[e]), element=e,
                                     detail="inadmissible element mean reached the scaling limiter")
        eps = 0.1 * pbar
        pj = model.constraints(u)[..., k]
        need = ~(pj >= eps[:, None])
        if not np.any(need):
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = (pbar[:, None] - eps[:, None]) / (pbar[:, None] - pj)
        theta = np.where(need, np.clip(ratio, 0.0, 1.0), 1.0).min(axis=1)
        u = mean[:, None, :] + theta[:, None, None] * (u - mean[:, None, :])
    return u
