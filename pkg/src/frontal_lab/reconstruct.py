"""Rebuild a frontal from its structure data and audit the rebuild.

The data of the game is (Lambda, I_Omega, h, D1, D2, S, phi) on a
rectangle, together with an initial frame W0 = (v1 v2 v3) and position p
at a base point.  The frame field solves the linear system

    W_u1 = W D1aug^T,   W_u2 = W D2aug^T

with the 3x3 blocks that append the h-column and the (negated) shape
rows to the 2x2 connection symbols, and the position solves
Dx = Omega Lambda^T with Omega the first two frame columns.  Both are
integrated jointly by RK4 (the position block is triangular over the
frame block, so this is frame-then-position in one sweep), first down a
spine and then along rows; the opposite sweep order is always run as a
path-independence audit, which turns compatibility into a measurable.

Structure entries may be expression-backed (evaluated exactly through
jets), grid-backed (bicubic interpolation), or callable-backed (the
extraction route, which closes over a frontal and a transversal field
and solves the frame systems in jet arithmetic at any requested point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import expr as expr_mod
from .blaschke import BlaschkeField, probe_limits
from .config import DEFAULT, Config
from .errors import (CompatibilityViolated, ConditionFailed, DegenerateMetric,
                     FrameDegenerate, InputError, IntegrabilityViolated,
                     RankDeficient)
from .frame import Frontal, frame_bundle
from .jets import Jet, JetVec3, mat2_mul_jet, triple_product_jet


# --- field backends ---------------------------------------------------------------


class ExprField:
    """Scalar or 2x2-matrix field backed by expression ASTs."""

    def __init__(self, sources):
        if isinstance(sources, str):
            sources = [sources]
        self.sources = list(sources)
        self.asts = [expr_mod.parse(s) for s in self.sources]
        if len(self.asts) not in (1, 4):
            raise InputError("expression field needs 1 or 4 components")

    def jet(self, u1, u2, order):
        env = {"u1": Jet.variable(u1, 0, order),
               "u2": Jet.variable(u2, 1, order)}
        vals = [expr_mod.eval_jet(a, env) for a in self.asts]
        if len(vals) == 1:
            return vals[0]
        return [[vals[0], vals[1]], [vals[2], vals[3]]]


class GridField:
    """Field sampled on a rectangular grid, interpolated bicubically."""

    def __init__(self, domain, values):
        # values: (nx, ny) or (4, nx, ny) row-major component grids
        a1, b1, a2, b2 = domain
        values = np.asarray(values, dtype=float)
        self.matrix = values.ndim == 3
        comps = values if self.matrix else values[None, ...]
        nx, ny = comps.shape[1:]
        xs = np.linspace(a1, b1, nx)
        ys = np.linspace(a2, b2, ny)
        self.splines = [RectBivariateSpline(xs, ys, c, kx=3, ky=3)
                        for c in comps]

    def _jet_one(self, sp, u1, u2, order):
        from .jets import INDICES
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        coeffs = [sp.ev(u1, u2, dx=i, dy=j) for (i, j) in INDICES[order]]
        return Jet(order, [np.asarray(c) for c in coeffs])

    def jet(self, u1, u2, order):
        vals = [self._jet_one(sp, u1, u2, order) for sp in self.splines]
        if not self.matrix:
            return vals[0]
        return [[vals[0], vals[1]], [vals[2], vals[3]]]


class FuncField:
    """Field backed by a callable (u1, u2, order) -> jet(s)."""

    def __init__(self, fn):
        self.fn = fn

    def jet(self, u1, u2, order):
        return self.fn(u1, u2, order)


@dataclass
class StructureData:
    """Everything the frame and position systems consume.

    The proper hypothesis (regular set dense) and symmetry of I_Omega are
    the caller's responsibility for grid data; extracted and expression
    data satisfy them by construction.
    """
    domain: tuple
    basepoint: tuple
    W0: np.ndarray            # (3, 3), columns (v1 v2 v3)
    p: np.ndarray             # (3,)
    lam: object               # 2x2 field
    i_omega: object
    h: object
    d1: object
    d2: object
    s_op: object              # rows S_i^j
    phi: object               # scalar field
    meta: dict = field(default_factory=dict)

    # -- evaluation helpers -------------------------------------------------

    def aug_jets(self, u1, u2, order):
        """3x3 augmented blocks (D1aug, D2aug) as jet matrices."""
        d1 = self.d1.jet(u1, u2, order)
        d2 = self.d2.jet(u1, u2, order)
        h = self.h.jet(u1, u2, order)
        s = self.s_op.jet(u1, u2, order)
        zero = h[0][0] * 0.0
        d1aug = [[d1[0][0], d1[0][1], h[0][0]],
                 [d1[1][0], d1[1][1], h[1][0]],
                 [-s[0][0], -s[0][1], zero]]
        d2aug = [[d2[0][0], d2[0][1], h[0][1]],
                 [d2[1][0], d2[1][1], h[1][1]],
                 [-s[1][0], -s[1][1], zero]]
        return d1aug, d2aug

    def aug_values(self, u1, u2):
        """(..., 3, 3) value arrays of both augmented blocks, plus Lambda."""
        shape = np.shape(np.asarray(u1, dtype=float))
        d1aug, d2aug = self.aug_jets(u1, u2, 0)
        lam = self.lam.jet(u1, u2, 0)

        def vals(m, k):
            return np.stack([np.stack(
                [np.broadcast_to(np.asarray(m[i][j].value, dtype=float), shape)
                 for j in range(k)], axis=-1) for i in range(k)], axis=-2)

        return vals(d1aug, 3), vals(d2aug, 3), vals(lam, 2)

    def lam_det_values(self, u1, u2):
        shape = np.shape(np.asarray(u1, dtype=float))
        lam = self.lam.jet(u1, u2, 0)
        det = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0]
        return np.broadcast_to(np.asarray(det.value, dtype=float), shape)


# --- extraction from a frontal + transversal field -----------------------------------


def solve3_jet(c1: JetVec3, c2: JetVec3, c3: JetVec3, rhs: JetVec3):
    """Cramer solve of (c1 c2 c3) y = rhs in jet arithmetic."""
    det = triple_product_jet(c1, c2, c3)
    y1 = triple_product_jet(rhs, c2, c3) / det
    y2 = triple_product_jet(c1, rhs, c3) / det
    y3 = triple_product_jet(c1, c2, rhs) / det
    return y1, y2, y3


def extract_structure(f: Frontal, xi_field, shape=(21, 21), basepoint=None,
                      config: Config = None, offset=None) -> StructureData:
    """Sample-free structure data: every field evaluates jets on demand.

    xi_field: a TransversalField, or a BlaschkeField (whose evaluation is
    nudged transversally off the singular set when a sweep lands on it;
    the structure symbols themselves extend smoothly, so a 1e-7 nudge
    perturbs them by the same order).  The default basepoint is the
    domain's lower-left corner shifted by an irrational multiple of the
    step so integration lattices avoid exact singular hits.
    """
    cfg = config or f.config
    a1, b1, a2, b2 = f.domain
    if offset is None:
        offset = (b1 - a1) * 1e-4 * math.sqrt(2.0)
    margin1 = 0.02 * (b1 - a1)
    margin2 = 0.02 * (b2 - a2)
    lo1, hi1 = a1 + margin1 + offset, b1 - margin1
    lo2, hi2 = a2 + margin2 + offset, b2 - margin2
    if basepoint is None:
        basepoint = (lo1, lo2)

    is_blaschke = isinstance(xi_field, BlaschkeField)

    def xi_jets_at(u1, u2, order):
        if is_blaschke:
            u1n, u2n = xi_field.nudged_points(u1, u2)
            return (u1n, u2n), xi_field.xi_jet(u1n, u2n, order)
        return (u1, u2), xi_field.jets(f, u1, u2, order)

    def structure_jets(u1, u2, order):
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        (u1e, u2e), xj = xi_jets_at(u1, u2, cfg.jet_order)
        b = frame_bundle(f, u1e, u2e, config=cfg)
        w_u = [[b.w1.deriv(0), b.w1.deriv(1)],
               [b.w2.deriv(0), b.w2.deriv(1)]]
        d1 = [[None, None], [None, None]]
        d2 = [[None, None], [None, None]]
        h = [[None, None], [None, None]]
        for i in range(2):
            for j in range(2):
                y1, y2, y3 = solve3_jet(b.w1, b.w2, xj, w_u[i][j])
                (d1 if j == 0 else d2)[i][0] = y1
                (d1 if j == 0 else d2)[i][1] = y2
                h[i][j] = y3
        s = [[None, None], [None, None]]
        for i in range(2):
            y1, y2, _ = solve3_jet(b.w1, b.w2, xj, xj.deriv(i))
            s[i][0] = -y1
            s[i][1] = -y2
        return b, xj, d1, d2, h, s

    cache = {}

    def cached(u1, u2, order):
        key = (np.asarray(u1).tobytes(), np.asarray(u2).tobytes())
        if key not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[key] = structure_jets(u1, u2, order)
        return cache[key]

    def mk(which):
        if which == "lam":
            return FuncField(lambda u1, u2, order: f.lam(u1, u2, order))
        if which == "i_omega":
            def io_fn(u1, u2, order):
                w1, w2 = f.omega(u1, u2, order)
                return [[w1.dot(w1), w1.dot(w2)], [w2.dot(w1), w2.dot(w2)]]
            return FuncField(io_fn)

        def fn(u1, u2, order):
            b, xj, d1, d2, h, s = cached(u1, u2, order)
            if which == "h":
                return h
            if which == "d1":
                return d1
            if which == "d2":
                return d2
            if which == "s":
                return s
            return xj.dot(b.n)          # phi
        return FuncField(fn)

    from .frame import vec3_values_on
    q1 = np.asarray([basepoint[0]])
    q2 = np.asarray([basepoint[1]])
    b0 = frame_bundle(f, q1, q2, config=cfg)
    (q1e, q2e), xj0 = xi_jets_at(q1, q2, 1)
    W0 = np.stack([vec3_values_on(b0.w1, (1,))[:, 0],
                   vec3_values_on(b0.w2, (1,))[:, 0],
                   vec3_values_on(xj0, (1,))[:, 0]], axis=-1)
    p0 = vec3_values_on(f.x(q1, q2, 0), (1,))[:, 0]

    return StructureData(
        domain=(lo1, hi1, lo2, hi2), basepoint=tuple(map(float, basepoint)),
        W0=W0, p=p0,
        lam=mk("lam"), i_omega=mk("i_omega"), h=mk("h"), d1=mk("d1"),
        d2=mk("d2"), s_op=mk("s"), phi=mk("phi"),
        meta={"frontal": f.name, "field": getattr(xi_field, "label", "field")})


# --- compatibility and integrability residuals -----------------------------------------


def _mat3_vals(m, shape):
    return np.stack([np.stack(
        [np.broadcast_to(np.asarray(m[i][j].value, dtype=float), shape)
         for j in range(3)], axis=-1) for i in range(3)], axis=-2)


def _mat3_deriv_vals(m, var, shape):
    return np.stack([np.stack(
        [np.broadcast_to(np.asarray(m[i][j].deriv(var).value, dtype=float),
                         shape) for j in range(3)], axis=-1)
        for i in range(3)], axis=-2)


def compat_residual(sd: StructureData, u1, u2):
    """Max Frobenius norm of the frame-system flatness defect.

    D1_u2 - D2_u1 + [D1, D2] over the sampled points, with the augmented
    3x3 blocks.  Points on the singular set are included in the report;
    gating on the regular part is the caller's choice.
    """
    shape = np.shape(np.asarray(u1, dtype=float))
    d1aug, d2aug = sd.aug_jets(u1, u2, 1)
    D1 = _mat3_vals(d1aug, shape)
    D2 = _mat3_vals(d2aug, shape)
    R = (_mat3_deriv_vals(d1aug, 1, shape) - _mat3_deriv_vals(d2aug, 0, shape)
         + D1 @ D2 - D2 @ D1)
    fro = np.sqrt(np.sum(R * R, axis=(-2, -1)))
    return float(np.max(fro))


def integrability_residual(sd: StructureData, u1, u2):
    """(symmetry residual, row-identity residual) of the position system."""
    shape = np.shape(np.asarray(u1, dtype=float))
    lam_j = sd.lam.jet(u1, u2, 1)
    h_j = sd.h.jet(u1, u2, 0)
    d1_j = sd.d1.jet(u1, u2, 0)
    d2_j = sd.d2.jet(u1, u2, 0)

    def v(jet):
        return np.broadcast_to(np.asarray(jet.value, dtype=float), shape)

    lam_h_01 = lam_j[0][0] * h_j[0][1] + lam_j[0][1] * h_j[1][1]
    lam_h_10 = lam_j[1][0] * h_j[0][0] + lam_j[1][1] * h_j[1][0]
    sym = float(np.max(np.abs(v(lam_h_01) - v(lam_h_10))))

    row = 0.0
    for col in range(2):
        left = (lam_j[1][0] * d1_j[0][col] + lam_j[1][1] * d1_j[1][col]
                + lam_j[1][col].deriv(0))
        right = (lam_j[0][0] * d2_j[0][col] + lam_j[0][1] * d2_j[1][col]
                 + lam_j[0][col].deriv(1))
        row = max(row, float(np.max(np.abs(v(left) - v(right)))))
    return sym, row


# --- constructive extension of the connection blocks ------------------------------------


def _efg_jets(sd, u1, u2, order):
    lam = sd.lam.jet(u1, u2, order)
    io = sd.i_omega.jet(u1, u2, order)
    lio = mat2_mul_jet(lam, io)
    lam_t = [[lam[0][0], lam[1][0]], [lam[0][1], lam[1][1]]]
    I_cl = mat2_mul_jet(lio, lam_t)
    return I_cl[0][0], I_cl[0][1], I_cl[1][1]


def membership_scalar_fn(sd: StructureData, which, config: Config):
    """Certificate ratio G_k / det Lambda as a masked value function."""
    k = 0 if which == 1 else 1

    def fn(u1, u2):
        shape = np.shape(np.asarray(u1, dtype=float))
        lam = sd.lam.jet(u1, u2, 1)
        io = sd.i_omega.jet(u1, u2, 1)
        E, F, G = _efg_jets(sd, u1, u2, 1)
        row1 = [lam[0][0], lam[0][1]]
        row2 = [lam[1][0], lam[1][1]]
        row1_d = [c.deriv(k) for c in row1]
        row2_d = [c.deriv(k) for c in row2]

        def rIr(r, s):
            return (r[0] * (io[0][0] * s[0] + io[0][1] * s[1])
                    + r[1] * (io[1][0] * s[0] + io[1][1] * s[1]))

        skew = (E.deriv(1) - F.deriv(0)) if which == 1 \
            else (F.deriv(1) - G.deriv(0))
        big_g = rIr(row1_d, row2) - rIr(row1, row2_d) + skew
        det = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0]
        lam_v = np.broadcast_to(np.asarray(det.value, dtype=float),
                                shape).copy()
        lam_v[np.abs(lam_v) <= config.eps_sing] = np.nan
        g_v = np.broadcast_to(np.asarray(big_g.value, dtype=float), shape)
        return (g_v / lam_v)[None, ...]
    return fn


def extend_D(sd: StructureData, which, u1, u2, config: Config = DEFAULT):
    """Connection block D_which on all sampled points, plus its certificate.

    Regular points evaluate the constructive formula directly; singular
    points probe the five smooth ingredients (the correction products and
    the skew scalar).  Raises ConditionFailed when a probe fails, which
    is exactly the failure of the membership criterion.
    """
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    shape = u1.shape
    lam_det = sd.lam_det_values(u1, u2)
    regular = np.abs(lam_det) > config.eps_sing

    out = np.empty(shape + (2, 2))
    omega_out = np.empty(shape)

    def ingredients(uu1, uu2):
        """(C_k entries (4), omega_k) as value arrays on regular points."""
        sshape = np.shape(uu1)
        io_j = sd.i_omega.jet(uu1, uu2, 1)
        h_j = sd.h.jet(uu1, uu2, 0)
        phi_j = sd.phi.jet(uu1, uu2, 1)

        def v(jet):
            return np.broadcast_to(np.asarray(jet.value, dtype=float), sshape)

        # tangential coefficients from the transposed relative form:
        # (phi h)^T (a, b)^T = -grad phi
        M = np.stack([
            np.stack([v(phi_j * h_j[0][0]), v(phi_j * h_j[1][0])], axis=-1),
            np.stack([v(phi_j * h_j[0][1]), v(phi_j * h_j[1][1])], axis=-1)],
            axis=-2)
        rhs = -np.stack([v(phi_j.deriv(0)), v(phi_j.deriv(1))], axis=-1)
        ab = np.linalg.solve(M, rhs[..., None])[..., 0]
        h_col = 0 if which == 1 else 1
        c_entries = np.stack([
            2.0 * ab[..., 0] * v(h_j[0][h_col]),
            2.0 * ab[..., 1] * v(h_j[0][h_col]),
            2.0 * ab[..., 0] * v(h_j[1][h_col]),
            2.0 * ab[..., 1] * v(h_j[1][h_col])], axis=0)
        mem = membership_scalar_fn(sd, which, config)
        omega = mem(uu1, uu2)[0]
        return c_entries, omega

    if np.any(regular):
        c_ent, omega = ingredients(u1[regular], u2[regular])
        out[regular], omega_out[regular] = _assemble_extension(
            sd, which, u1[regular], u2[regular], c_ent, omega)

    if np.any(~regular):
        targets = np.stack([u1[~regular], u2[~regular]], axis=-1)

        def probe_fn(p1, p2):
            p1 = np.asarray(p1, dtype=float)
            p2 = np.asarray(p2, dtype=float)
            vals = np.full((5,) + p1.shape, np.nan)
            det = sd.lam_det_values(p1, p2)
            ok = np.abs(det) > config.eps_sing
            if np.any(ok):
                try:
                    c_ent, om = ingredients(p1[ok], p2[ok])
                except Exception:
                    return vals
                for k in range(4):
                    vals[k][ok] = c_ent[k]
                vals[4][ok] = om
            return vals

        results = probe_limits(probe_fn, targets, sd.domain, config,
                               m_components=5)
        c_list, om_list = [], []
        for res in results:
            if not res.ok:
                raise ConditionFailed(
                    f"extension certificate fails at {res.target}: "
                    f"spread {res.spread:.2e}, settled={res.settled}")
            c_list.append(res.value[:4])
            om_list.append(res.value[4])
        c_ent = np.stack(c_list, axis=-1)
        omega = np.asarray(om_list)
        out[~regular], omega_out[~regular] = _assemble_extension(
            sd, which, u1[~regular], u2[~regular], c_ent, omega)
    return out, omega_out


def _assemble_extension(sd, which, u1, u2, c_entries, omega):
    shape = np.shape(u1)
    k = 0 if which == 1 else 1
    io_j = sd.i_omega.jet(u1, u2, 1)

    def v(jet):
        return np.broadcast_to(np.asarray(jet.value, dtype=float), shape)

    I = np.stack([np.stack([v(io_j[0][0]), v(io_j[0][1])], axis=-1),
                  np.stack([v(io_j[1][0]), v(io_j[1][1])], axis=-1)], axis=-2)
    I_k = np.stack([np.stack([v(io_j[0][0].deriv(k)), v(io_j[0][1].deriv(k))],
                             axis=-1),
                    np.stack([v(io_j[1][0].deriv(k)), v(io_j[1][1].deriv(k))],
                             axis=-1)], axis=-2)
    C = np.stack([np.stack([c_entries[0], c_entries[1]], axis=-1),
                  np.stack([c_entries[2], c_entries[3]], axis=-1)], axis=-2)
    skew = np.zeros(shape + (2, 2))
    skew[..., 0, 1] = -omega
    skew[..., 1, 0] = omega
    D = 0.5 * (I_k - C @ I + skew) @ np.linalg.inv(I)
    return D, omega


# --- apolarity ---------------------------------------------------------------------


def apolarity_check(sd: StructureData, u1, u2, config: Config = DEFAULT):
    """Max residual of the parallel-volume condition of the affine metric.

    resid_k = d/du_k sqrt|det c| - trace(Gamma~_k) sqrt|det c| with
    c = Lambda h and Gamma~_k = (Lambda_uk + Lambda D_k) Lambda^{-1},
    sampled on regular points only.
    """
    shape = np.shape(np.asarray(u1, dtype=float))
    lam_j = sd.lam.jet(u1, u2, 1)
    h_j = sd.h.jet(u1, u2, 1)
    c_j = mat2_mul_jet(lam_j, h_j)
    det_c = c_j[0][0] * c_j[1][1] - c_j[0][1] * c_j[1][0]
    det_v = np.broadcast_to(np.asarray(det_c.value, dtype=float), shape)
    if np.any(np.abs(det_v) <= 1e-14):
        raise DegenerateMetric("det of the affine fundamental form vanishes "
                               "on the sample")
    sign = np.sign(det_v)
    s_j = (det_c * sign).powf(0.5)

    lam_det = sd.lam_det_values(u1, u2)
    if np.any(np.abs(lam_det) <= config.eps_sing):
        raise DegenerateMetric("apolarity sampled on the singular set")
    lam_v = np.stack([np.stack(
        [np.broadcast_to(np.asarray(lam_j[i][j].value, dtype=float), shape)
         for j in range(2)], axis=-1) for i in range(2)], axis=-2)
    lam_inv = np.linalg.inv(lam_v)

    worst = 0.0
    for k, dk in ((0, sd.d1), (1, sd.d2)):
        d_j = dk.jet(u1, u2, 0)
        d_v = np.stack([np.stack(
            [np.broadcast_to(np.asarray(d_j[i][j].value, dtype=float), shape)
             for j in range(2)], axis=-1) for i in range(2)], axis=-2)
        lam_uk = np.stack([np.stack(
            [np.broadcast_to(np.asarray(lam_j[i][j].deriv(k).value,
                                        dtype=float), shape)
             for j in range(2)], axis=-1) for i in range(2)], axis=-2)
        gamma = (lam_uk + lam_v @ d_v) @ lam_inv
        trace = gamma[..., 0, 0] + gamma[..., 1, 1]
        ds = np.broadcast_to(np.asarray(s_j.deriv(k).value, dtype=float),
                             shape)
        s_v = np.broadcast_to(np.asarray(s_j.value, dtype=float), shape)
        worst = max(worst, float(np.max(np.abs(ds - trace * s_v))))
    return worst


# --- integration -------------------------------------------------------------------


@dataclass
class FrameField:
    u1_nodes: np.ndarray
    u2_nodes: np.ndarray
    W: np.ndarray             # (n1, n2, 3, 3)
    x: np.ndarray             # (n1, n2, 3)
    discrepancy: float        # path-independence audit, frame part
    x_discrepancy: float      # audit on the position part
    min_det: float
    sd: StructureData = None


def _rk4_sweep(sd, state, fixed, moving_nodes, axis, step):
    """March `state` (m, 3, 4) along `moving_nodes` starting at its first
    entry, with the other coordinate fixed per lane; returns states at
    every node, (n_nodes, m, 3, 4)."""
    m = state.shape[0]
    n = moving_nodes.size
    out = np.empty((n,) + state.shape)
    out[0] = state
    if n == 1:
        return out
    delta = moving_nodes[1] - moving_nodes[0]
    nsub = max(1, int(math.ceil(abs(delta) / step)))
    h = delta / nsub
    for seg in range(n - 1):
        t0 = moving_nodes[seg]
        # abscissae for all substeps of this segment, stepping by h/2
        ts = t0 + 0.5 * h * np.arange(2 * nsub + 1)
        if axis == 0:
            uu1 = np.repeat(ts, m)
            uu2 = np.tile(fixed, ts.size)
        else:
            uu1 = np.tile(fixed, ts.size)
            uu2 = np.repeat(ts, m)
        d1aug, d2aug, lam = sd.aug_values(uu1, uu2)
        daug = d1aug if axis == 0 else d2aug
        A = np.zeros(uu1.shape + (4, 4))
        A[..., :3, :3] = np.swapaxes(daug, -1, -2)
        A[..., 0, 3] = lam[..., axis, 0]
        A[..., 1, 3] = lam[..., axis, 1]
        A = A.reshape(ts.size, m, 4, 4)
        y = out[seg]
        for i in range(nsub):
            a0, a1, a2 = A[2 * i], A[2 * i + 1], A[2 * i + 2]
            k1 = y @ a0
            k2 = (y + 0.5 * h * k1) @ a1
            k3 = (y + 0.5 * h * k2) @ a1
            k4 = (y + h * k3) @ a2
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[seg + 1] = y
    return out


def _integrate_lattice(sd: StructureData, u1_nodes, u2_nodes, step,
                       spine_axis):
    """Spine along `spine_axis` from the basepoint node, then sweeps of
    the whole family of lanes along the other axis, both directions."""
    q1, q2 = sd.basepoint
    i0 = int(np.argmin(np.abs(u1_nodes - q1)))
    j0 = int(np.argmin(np.abs(u2_nodes - q2)))
    state0 = np.concatenate([sd.W0, sd.p[:, None]], axis=1)[None, ...]

    n1, n2 = u1_nodes.size, u2_nodes.size
    Y = np.empty((n1, n2, 3, 4))
    if spine_axis == 1:
        # spine along u2 at u1 = node i0, then rows along u1
        up = _rk4_sweep(sd, state0, np.asarray([u1_nodes[i0]]),
                        u2_nodes[j0:], 1, step)
        down = _rk4_sweep(sd, state0, np.asarray([u1_nodes[i0]]),
                          u2_nodes[j0::-1], 1, step)
        spine = np.empty((n2, 3, 4))
        spine[j0:] = up[:, 0]
        spine[j0::-1] = down[:, 0]
        right = _rk4_sweep(sd, spine, u2_nodes, u1_nodes[i0:], 0, step)
        left = _rk4_sweep(sd, spine, u2_nodes, u1_nodes[i0::-1], 0, step)
        Y[i0:, :] = right
        Y[i0::-1, :] = left
    else:
        up = _rk4_sweep(sd, state0, np.asarray([u2_nodes[j0]]),
                        u1_nodes[i0:], 0, step)
        down = _rk4_sweep(sd, state0, np.asarray([u2_nodes[j0]]),
                          u1_nodes[i0::-1], 0, step)
        spine = np.empty((n1, 3, 4))
        spine[i0:] = up[:, 0]
        spine[i0::-1] = down[:, 0]
        upcols = _rk4_sweep(sd, spine, u1_nodes, u2_nodes[j0:], 1, step)
        dncols = _rk4_sweep(sd, spine, u1_nodes, u2_nodes[j0::-1], 1, step)
        Y[:, j0:] = np.moveaxis(upcols, 0, 1)
        Y[:, j0::-1] = np.moveaxis(dncols, 0, 1)
    return Y


def lattice_nodes(sd: StructureData, shape=(21, 21)):
    a1, b1, a2, b2 = sd.domain
    return (np.linspace(a1, b1, shape[0]), np.linspace(a2, b2, shape[1]))


def integrate_frame(sd: StructureData, shape=(21, 21), step=None,
                    config: Config = DEFAULT, check_compat=True,
                    audit_gate=True) -> FrameField:
    """Integrate the frame (and carried position) over a node lattice.

    Runs the row-major and column-major sweeps and reports their maximum
    disagreement; raises CompatibilityViolated when the audit exceeds the
    path gate (suppressed by audit_gate=False for step-refinement
    probes), FrameDegenerate when det W collapses or flips sign.
    """
    step = step or config.rk4_step
    u1_nodes, u2_nodes = lattice_nodes(sd, shape)
    if check_compat:
        g1, g2 = np.meshgrid(u1_nodes[::4], u2_nodes[::4], indexing="ij")
        lam_det = sd.lam_det_values(g1.ravel(), g2.ravel())
        reg = np.abs(lam_det) > config.eps_sing
        if np.any(reg):
            resid = compat_residual(sd, g1.ravel()[reg], g2.ravel()[reg])
            d1aug, d2aug, _ = sd.aug_values(g1.ravel()[reg], g2.ravel()[reg])
            scale = max(1.0, float(np.max(np.abs(d1aug))),
                        float(np.max(np.abs(d2aug))))
            if resid > config.tol_compat * scale:
                raise CompatibilityViolated(
                    f"compatibility residual {resid:.2e} exceeds "
                    f"{config.tol_compat * scale:.2e} before integration")

    Y_rows = _integrate_lattice(sd, u1_nodes, u2_nodes, step, spine_axis=1)
    Y_cols = _integrate_lattice(sd, u1_nodes, u2_nodes, step, spine_axis=0)
    W = Y_rows[..., :3]
    x = Y_rows[..., 3]
    disc_w = float(np.max(np.abs(Y_rows[..., :3] - Y_cols[..., :3])))
    disc_x = float(np.max(np.abs(Y_rows[..., 3] - Y_cols[..., 3])))
    det = np.linalg.det(W)
    min_det = float(np.min(np.abs(det)))
    if min_det <= 1e-12 or float(np.max(det)) * float(np.min(det)) < 0.0:
        raise FrameDegenerate("integrated frame lost invertibility")
    if audit_gate and disc_w > config.tol_path:
        raise CompatibilityViolated(
            f"path-independence audit {disc_w:.2e} exceeds {config.tol_path}")
    return FrameField(u1_nodes, u2_nodes, W, x, disc_w, disc_x, min_det, sd)


def integrate_position(frame_field: FrameField, sd: StructureData = None,
                       config: Config = DEFAULT):
    """Position grid from an integrated frame, with integrability gates.

    The joint sweep already carried the position block; this validates
    the position-system integrability residuals and the path audit, and
    returns the grid.  Raises IntegrabilityViolated on a gate failure.
    """
    sd = sd or frame_field.sd
    u1_nodes, u2_nodes = frame_field.u1_nodes, frame_field.u2_nodes
    g1, g2 = np.meshgrid(u1_nodes[::4], u2_nodes[::4], indexing="ij")
    lam_det = sd.lam_det_values(g1.ravel(), g2.ravel())
    reg = np.abs(lam_det) > config.eps_sing
    sym, row = integrability_residual(sd, g1.ravel()[reg], g2.ravel()[reg])
    scale = max(1.0, float(np.max(np.abs(lam_det))))
    if max(sym, row) > 10.0 * config.tol_compat * scale:
        raise IntegrabilityViolated(
            f"integrability residuals ({sym:.2e}, {row:.2e}) exceed gate")
    if frame_field.x_discrepancy > config.tol_path:
        raise IntegrabilityViolated(
            f"position path audit {frame_field.x_discrepancy:.2e} exceeds "
            f"{config.tol_path}")
    return frame_field.x


# --- affine alignment ----------------------------------------------------------------


def affine_align(x_grid, y_grid):
    """Least-squares affine map y ~ L x + a over matching grids.

    Returns (L, a, sup_error).  Raises RankDeficient when the source
    points are affinely degenerate (coplanar), in which case no unique
    map exists.
    """
    X = np.asarray(x_grid, dtype=float).reshape(-1, 3)
    Y = np.asarray(y_grid, dtype=float).reshape(-1, 3)
    if X.shape != Y.shape:
        raise InputError("affine_align needs matching grids")
    B = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    if np.linalg.matrix_rank(B) < 4:
        raise RankDeficient("source points are affinely degenerate")
    beta, *_ = np.linalg.lstsq(B, Y, rcond=None)
    L = beta[:3].T
    a = beta[3]
    sup = float(np.max(np.linalg.norm(X @ L.T + a - Y, axis=1)))
    return L, a, sup
