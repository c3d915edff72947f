"""Frontal kernel: decomposition of the differential through a moving basis.

A frontal here is a parametrization x: U -> R^3 on a rectangle together
with a tangent moving basis, a 3x2 field Omega = (w1 w2) of pointwise
independent columns spanning the limiting tangent planes, such that
Dx = Omega Lambda^T for a smooth 2x2 factor Lambda.  The singular set is
exactly the zero set of lambda = det Lambda.

Everything is evaluated through jets so each derived quantity carries
its own derivatives; u1/u2 arguments may be floats or same-shaped numpy
arrays, in which case all per-point work is vectorized elementwise.

Matrix conventions (all row/column choices follow from the two
decompositions and are exercised by the cross-checks in the tests):

    I  = [[E, F], [F, G]],          entries <w_i, w_j>
    II = [[e, f1], [f2, g]],        entries -<w_i, n_uj>  (not symmetric)
    mu = -II^T I^{-1},              rows give n_ui in the basis (w1, w2)
    T_k = (Omega_uk^T Omega) I^{-1} rows give tangential part of w_i,uk
    relative curvature K = det(mu); classical Gauss curvature K/det(Lambda)
    on the regular part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Config
from .errors import DegenerateBasis, NotAFrontal
from .jets import (Jet, JetVec3, det2_jet, inv2_jet, mat2_mul_jet,
                   triple_product_jet)
from . import expr as expr_mod


def _as_jet_env(u1, u2, order):
    return {"u1": Jet.variable(u1, 0, order), "u2": Jet.variable(u2, 1, order)}


def mat2_values(m):
    """(..., 2, 2) value array of a 2x2 jet matrix."""
    rows = [[np.asarray(m[i][j].value, dtype=float) for j in range(2)]
            for i in range(2)]
    shape = np.broadcast_shapes(*(r.shape for row in rows for r in row))
    return np.stack([np.stack([np.broadcast_to(rows[i][j], shape)
                               for j in range(2)], axis=-1)
                     for i in range(2)], axis=-2)


def vec3_values_on(v: "JetVec3", shape):
    """(3,) + shape value array of a jet 3-vector, padding base dims."""
    val = v.value()
    missing = len(shape) - (val.ndim - 1)
    if missing > 0:
        val = val.reshape(val.shape[:1] + (1,) * missing + val.shape[1:])
    return np.broadcast_to(val, (3,) + tuple(shape))


class Frontal:
    """A parametrized frontal with its tangent moving basis.

    x, omega (and optionally lam, gauss, blaschke_known) are callables
    (u1, u2, order) -> jets.  `gauss` is the analytically extended Gauss
    curvature when a closed form is known; `blaschke_known` is a printed
    reference field used only for verification, never by construction.
    """

    def __init__(self, name, x, omega, domain, lam=None, gauss=None,
                 blaschke_known=None, source="user", config: Config = DEFAULT,
                 open_domain=False):
        self.name = name
        self._x = x
        self._omega = omega
        self.domain = tuple(float(v) for v in domain)
        self._lam = lam
        self.gauss = gauss
        self.blaschke_known = blaschke_known
        self.source = source
        self.config = config
        self.open_domain = open_domain

    def stripped(self, keep_lam=True):
        """Copy without analytic shortcuts, forcing the numeric routes."""
        return Frontal(self.name + "~numeric", self._x, self._omega,
                       self.domain, lam=self._lam if keep_lam else None,
                       gauss=None, blaschke_known=None, source=self.source,
                       config=self.config, open_domain=self.open_domain)

    def x(self, u1, u2, order):
        return self._x(u1, u2, order)

    def omega(self, u1, u2, order):
        return self._omega(u1, u2, order)

    def lam(self, u1, u2, order):
        """2x2 jet matrix Lambda; analytic when supplied, factored otherwise."""
        if self._lam is not None:
            return self._lam(u1, u2, order)
        return factor_lambda(self, u1, u2, order, config=self.config)

    def lam_order(self, order):
        """Order actually carried by lam() when asked for `order`."""
        return order if self._lam is not None else order - 1

    def grid(self, shape):
        """Default evaluation grid; open domains are inset slightly so the
        boundary (where catalog data may degenerate) is never sampled."""
        if self.open_domain:
            return self.interior_grid(shape, margin=0.005)
        a1, b1, a2, b2 = self.domain
        nx, ny = shape
        return np.meshgrid(np.linspace(a1, b1, nx), np.linspace(a2, b2, ny),
                           indexing="ij")

    def interior_grid(self, shape, margin=0.0, offset=(0.0, 0.0)):
        a1, b1, a2, b2 = self.domain
        m1 = margin * (b1 - a1)
        m2 = margin * (b2 - a2)
        nx, ny = shape
        return np.meshgrid(
            np.linspace(a1 + m1, b1 - m1, nx) + offset[0],
            np.linspace(a2 + m2, b2 - m2, ny) + offset[1],
            indexing="ij")


def frontal_from_expressions(name, x_srcs, omega_srcs, domain, lam_srcs=None,
                             gauss_src=None, blaschke_srcs=None,
                             source="catalog", config: Config = DEFAULT,
                             validate=True, open_domain=False):
    """Build a Frontal from component expression strings.

    omega_srcs is a pair of 3-component lists (the two basis columns);
    lam_srcs, when given, is a row-major list of 4 strings.  All
    expressions are sign-probed on the domain at load time.
    """
    x_ast = [expr_mod.parse(s) for s in x_srcs]
    om_ast = [[expr_mod.parse(s) for s in col] for col in omega_srcs]
    lam_ast = [expr_mod.parse(s) for s in lam_srcs] if lam_srcs else None
    gauss_ast = expr_mod.parse(gauss_src) if gauss_src else None
    bl_ast = [expr_mod.parse(s) for s in blaschke_srcs] if blaschke_srcs else None
    if validate:
        for ast in (x_ast + om_ast[0] + om_ast[1] + (lam_ast or [])
                    + ([gauss_ast] if gauss_ast else [])
                    + (bl_ast or [])):
            expr_mod.validate_on_domain(ast, domain)

    def x_fn(u1, u2, order):
        env = _as_jet_env(u1, u2, order)
        return JetVec3(*(expr_mod.eval_jet(a, env) for a in x_ast))

    def omega_fn(u1, u2, order):
        env = _as_jet_env(u1, u2, order)
        w1 = JetVec3(*(expr_mod.eval_jet(a, env) for a in om_ast[0]))
        w2 = JetVec3(*(expr_mod.eval_jet(a, env) for a in om_ast[1]))
        return w1, w2

    lam_fn = None
    if lam_ast is not None:
        def lam_fn(u1, u2, order):
            env = _as_jet_env(u1, u2, order)
            vals = [expr_mod.eval_jet(a, env) for a in lam_ast]
            return [[vals[0], vals[1]], [vals[2], vals[3]]]

    gauss_fn = None
    if gauss_ast is not None:
        def gauss_fn(u1, u2, order):
            return expr_mod.eval_jet(gauss_ast, _as_jet_env(u1, u2, order))

    bl_fn = None
    if bl_ast is not None:
        def bl_fn(u1, u2, order):
            env = _as_jet_env(u1, u2, order)
            return JetVec3(*(expr_mod.eval_jet(a, env) for a in bl_ast))

    return Frontal(name, x_fn, omega_fn, domain, lam=lam_fn, gauss=gauss_fn,
                   blaschke_known=bl_fn, source=source, config=config,
                   open_domain=open_domain)


def affine_image(f: Frontal, A, b, name=None):
    """The frontal Phi(x) = A x + b with basis columns mapped through A.

    The analytic curvature shortcut is dropped on purpose: Gauss
    curvature is not an affine invariant, so the image must go through
    the generic numeric route.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)

    def x_fn(u1, u2, order):
        base = f.x(u1, u2, order)
        comps = []
        for i in range(3):
            acc = base.c[0] * A[i, 0] + base.c[1] * A[i, 1] + base.c[2] * A[i, 2]
            comps.append(acc + b[i])
        return JetVec3(*comps)

    def map_vec(v):
        return JetVec3(*(v.c[0] * A[i, 0] + v.c[1] * A[i, 1] + v.c[2] * A[i, 2]
                         for i in range(3)))

    def omega_fn(u1, u2, order):
        w1, w2 = f.omega(u1, u2, order)
        return map_vec(w1), map_vec(w2)

    lam_fn = f._lam
    return Frontal(name or f"{f.name}+affine", x_fn, omega_fn, f.domain,
                   lam=lam_fn, gauss=None, blaschke_known=None,
                   source=f.source, config=f.config,
                   open_domain=f.open_domain)


# --- core per-point computations ------------------------------------------------


def check_basis_rank(w1: JetVec3, w2: JetVec3, eps_rank):
    """Smallest singular value of (w1 w2), scaled by column norms."""
    E = np.asarray((w1.dot(w1)).value, dtype=float)
    F = np.asarray((w1.dot(w2)).value, dtype=float)
    G = np.asarray((w2.dot(w2)).value, dtype=float)
    tr = E + G
    det = E * G - F * F
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    lam_min = 0.5 * (tr - disc)
    scale = np.maximum(E, G)
    if np.any(lam_min <= (eps_rank ** 2) * scale):
        raise DegenerateBasis("moving-basis columns numerically dependent")


def unit_normal(w1: JetVec3, w2: JetVec3, eps_rank=1e-9) -> JetVec3:
    """n = (w1 x w2)/|w1 x w2| with a rank guard."""
    check_basis_rank(w1, w2, eps_rank)
    cr = w1.cross(w2)
    return cr.scale(1.0 / cr.norm())


def factor_lambda(f: Frontal, u1, u2, order, config: Config = DEFAULT):
    """Solve Dx = Omega Lambda^T for Lambda as a 2x2 jet matrix.

    Lambda^T = (Omega^T Omega)^{-1} Omega^T Dx; the residual of the
    reconstruction is checked at value level and NotAFrontal is raised
    when the basis fails to factor the differential.
    """
    xj = f.x(u1, u2, order + 1) if order + 1 <= 3 else f.x(u1, u2, order)
    w1, w2 = f.omega(u1, u2, order)
    check_basis_rank(w1, w2, config.eps_rank)
    x_u = [xj.deriv(0), xj.deriv(1)]
    I = [[w1.dot(w1), w1.dot(w2)], [w2.dot(w1), w2.dot(w2)]]
    B = [[w1.dot(x_u[0]), w1.dot(x_u[1])],
         [w2.dot(x_u[0]), w2.dot(x_u[1])]]
    lam_t = mat2_mul_jet(inv2_jet(I), B)
    lam = [[lam_t[0][0], lam_t[1][0]], [lam_t[0][1], lam_t[1][1]]]

    scale = 1.0
    resid = 0.0
    for j in range(2):
        rec = w1.scale(lam[j][0]) + w2.scale(lam[j][1])
        diff = x_u[j] - rec
        resid = max(resid, float(np.max(np.abs(diff.value()))))
        scale = max(scale, float(np.max(np.abs(x_u[j].value()))))
    if resid > config.eps_dec * scale:
        raise NotAFrontal(
            f"decomposition residual {resid:.3e} exceeds gate "
            f"{config.eps_dec * scale:.3e}; Omega is not a tangent moving "
            f"basis for x")
    return lam


@dataclass
class FrameBundle:
    """Jets of every first-layer quantity at a (possibly array) point."""
    order: int
    w1: JetVec3
    w2: JetVec3
    n: JetVec3
    x_u: list            # [x_u1, x_u2] as JetVec3
    lam: list            # 2x2 jets
    lam_det: Jet
    I: list              # 2x2 jets [[E, F], [F, G]]
    II: list             # 2x2 jets [[e, f1], [f2, g]]
    T: list              # [T1, T2], 2x2 jets each
    mu: list             # 2x2 jets
    K_omega: Jet


def frame_bundle(f: Frontal, u1, u2, order=None, config: Config = None) -> FrameBundle:
    cfg = config or f.config
    order = cfg.jet_order if order is None else order
    w1, w2 = f.omega(u1, u2, order)
    n = unit_normal(w1, w2, cfg.eps_rank)
    xj = f.x(u1, u2, order)
    x_u = [xj.deriv(0), xj.deriv(1)]
    lam = f.lam(u1, u2, order)
    lam_det = det2_jet(lam)

    I = [[w1.dot(w1), w1.dot(w2)], [w2.dot(w1), w2.dot(w2)]]
    n_u = [n.deriv(0), n.deriv(1)]
    II = [[-(w1.dot(n_u[0])), -(w1.dot(n_u[1]))],
          [-(w2.dot(n_u[0])), -(w2.dot(n_u[1]))]]
    I_inv = inv2_jet(I)
    T = []
    for k in range(2):
        wk = [w1.deriv(k), w2.deriv(k)]
        M = [[wk[0].dot(w1), wk[0].dot(w2)], [wk[1].dot(w1), wk[1].dot(w2)]]
        T.append(mat2_mul_jet(M, I_inv))
    II_t = [[II[0][0], II[1][0]], [II[0][1], II[1][1]]]
    mu = [[-x for x in row] for row in mat2_mul_jet(II_t, I_inv)]
    K_omega = det2_jet(mu)
    return FrameBundle(order, w1, w2, n, x_u, lam, lam_det, I, II, T, mu,
                       K_omega)


def ii_omega_normal_route(bundle: FrameBundle):
    """II recomputed as <w_i,uj , n> (independent of the -Omega^T Dn route)."""
    w_u = [[bundle.w1.deriv(0), bundle.w1.deriv(1)],
           [bundle.w2.deriv(0), bundle.w2.deriv(1)]]
    return [[w_u[i][j].dot(bundle.n) for j in range(2)] for i in range(2)]


@dataclass
class FrameData:
    """Per-point values of all first-layer invariants.

    Classical I and II are always filled; at singular points they are
    rank-deficient and `rank_deficient` flags exactly those points, so
    downstream consumers must consult it before inverting anything.
    """
    I_omega: np.ndarray       # (..., 2, 2)
    II_omega: np.ndarray
    mu: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    lam: np.ndarray
    lam_det: np.ndarray
    K_omega: np.ndarray
    n: np.ndarray             # (..., 3)
    I_classical: np.ndarray
    II_classical: np.ndarray
    rank_deficient: np.ndarray

    def gauss_regular(self):
        """K_omega / lam_det, nan where rank-deficient."""
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.K_omega / self.lam_det
        return np.where(self.rank_deficient, np.nan, out)


def frame_data(f: Frontal, u1, u2, config: Config = None) -> FrameData:
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    b = frame_bundle(f, u1, u2, config=cfg)
    lam_det = np.broadcast_to(np.asarray(b.lam_det.value, dtype=float), shape)

    def m22(m):
        return np.broadcast_to(mat2_values(m), shape + (2, 2))

    dx = [b.x_u[0], b.x_u[1]]
    I_cl = np.stack([np.stack([np.broadcast_to(
        np.asarray(dx[i].dot(dx[j]).value, dtype=float), shape)
        for j in range(2)], axis=-1) for i in range(2)], axis=-2)
    n_u = [b.n.deriv(0), b.n.deriv(1)]
    II_cl = np.stack([np.stack([np.broadcast_to(
        np.asarray((-(dx[i].dot(n_u[j]))).value, dtype=float), shape)
        for j in range(2)], axis=-1) for i in range(2)], axis=-2)
    return FrameData(
        I_omega=m22(b.I),
        II_omega=m22(b.II),
        mu=m22(b.mu),
        T1=m22(b.T[0]),
        T2=m22(b.T[1]),
        lam=m22(b.lam),
        lam_det=lam_det,
        K_omega=np.broadcast_to(np.asarray(b.K_omega.value, dtype=float), shape),
        n=np.broadcast_to(b.n.values_stacked(), shape + (3,)),
        I_classical=I_cl,
        II_classical=II_cl,
        rank_deficient=np.abs(lam_det) <= cfg.eps_sing,
    )


# --- grid classification ----------------------------------------------------------


@dataclass
class SingularScan:
    cells: list                      # (i, j) lower-left grid indices
    regular_dense: bool
    lam_det: np.ndarray
    singular_points: list = field(default_factory=list)  # exact grid hits

    @property
    def empty(self):
        return not self.cells


def singular_scan(f: Frontal, shape=(101, 101), config: Config = None) -> SingularScan:
    """Conservative cell cover of the zero set of det Lambda on a grid.

    A cell enters the cover when det Lambda changes sign across its
    corners or some corner is below eps_sing in magnitude.  The scan also
    reports whether the regular set is dense at grid resolution (no cell
    has all four corners singular).
    """
    cfg = config or f.config
    u1, u2 = f.grid(shape)
    lam = frame_data(f, u1, u2, config=cfg).lam_det
    small = np.abs(lam) <= cfg.eps_sing
    cells = []
    dense = True
    sgn = np.sign(lam)
    for i in range(shape[0] - 1):
        for j in range(shape[1] - 1):
            corner_sgn = sgn[i:i + 2, j:j + 2]
            corner_small = small[i:i + 2, j:j + 2]
            if corner_small.all():
                dense = False
            if corner_small.any() or corner_sgn.max() != corner_sgn.min():
                cells.append((i, j))
    pts = [(float(u1[i, j]), float(u2[i, j]))
           for i, j in zip(*np.nonzero(small))]
    return SingularScan(cells=cells, regular_dense=dense, lam_det=lam,
                        singular_points=pts)


def wavefront_test(f: Frontal, shape=(51, 51), config: Config = None):
    """True iff (x, n) is an immersion at every grid point.

    Checks the second singular value of the stacked 6x2 Jacobian
    [Dx; Dn] against eps_rank (scaled by the largest singular value).
    Returns (verdict, witness points where the rank drops).
    """
    cfg = config or f.config
    u1, u2 = f.grid(shape)
    b = frame_bundle(f, u1, u2, config=cfg)
    n_u = [b.n.deriv(0), b.n.deriv(1)]
    cols = []
    for k in range(2):
        col = np.concatenate([vec3_values_on(b.x_u[k], u1.shape),
                              vec3_values_on(n_u[k], u1.shape)], axis=0)
        cols.append(np.moveaxis(col, 0, -1))
    J = np.stack(cols, axis=-1)          # (..., 6, 2)
    s = np.linalg.svd(J, compute_uv=False)
    ok = s[..., 1] > cfg.eps_rank * np.maximum(1.0, s[..., 0])
    witnesses = [(float(u1[idx]), float(u2[idx]))
                 for idx in zip(*np.nonzero(~ok))]
    return bool(np.all(ok)), witnesses


def nonparabolic_test(f: Frontal, shape=(51, 51), config: Config = None):
    """True iff |K_omega| stays above eps_k on the whole grid."""
    cfg = config or f.config
    u1, u2 = f.grid(shape)
    K = frame_data(f, u1, u2, config=cfg).K_omega
    return bool(np.all(np.abs(K) > cfg.eps_k))


def theta_jet(bundle: FrameBundle, xi: JetVec3) -> Jet:
    """Induced volume det(w1 w2 xi) as a jet."""
    return triple_product_jet(bundle.w1, bundle.w2, xi)
