"""Structure symbols induced on a frontal by a transversal vector field.

Writing each basis-column derivative in the frame (w1, w2, xi) gives

    w_i,uj = D^1_ij w1 + D^2_ij w2 + h_ij xi
    xi_ui  = -S_i^1 w1 - S_i^2 w2 + tau_i xi

and everything in this module is a per-point 3x3 linear solve against
the matrix (w1 w2 xi); no formula transcription is used on the primary
path, so the solves stay valid at singular points where routes through
Lambda^{-1} fail.  The classical-symbol and factor-conjugation routes
are provided as independent cross-checks, valid on the regular part.

Layout: D1[i][j] = D^{j+1}_{(i+1)1}, i.e. row i holds the (w1, w2)
coefficients of w_{i+1},u1; likewise D2 for u2-derivatives.  h[i][j] is
the xi-coefficient of w_{i+1},u{j+1}; S[i][j] = S_{i+1}^{j+1}; tau is
indexed by the derivative direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .errors import NotTransversal, SingularPoint, VerificationError
from .frame import FrameBundle, Frontal, frame_bundle, mat2_values
from .jets import Jet, JetVec3, inv2_jet, triple_product_jet


class TransversalField:
    """A candidate transversal field, as component expressions, a callable,
    or the split phi*n + a*w1 + b*w2 against a frontal's own frame."""

    def __init__(self, fn, label="field"):
        self._fn = fn          # (frontal, u1, u2, order) -> JetVec3
        self.label = label

    @staticmethod
    def from_callable(fn, label="field"):
        return TransversalField(lambda f, u1, u2, order: fn(u1, u2, order),
                                label)

    @staticmethod
    def constant(vec, label=None):
        vec = tuple(float(v) for v in vec)

        def fn(f, u1, u2, order):
            shape = np.shape(np.asarray(u1, dtype=float))
            return JetVec3(*(Jet.constant(np.full(shape, v), order)
                             for v in vec))
        return TransversalField(fn, label or f"constant{vec}")

    @staticmethod
    def from_expressions(sources, label=None):
        from . import expr as expr_mod
        asts = [expr_mod.parse(s) for s in sources]

        def fn(f, u1, u2, order):
            env = {"u1": Jet.variable(u1, 0, order),
                   "u2": Jet.variable(u2, 1, order)}
            return JetVec3(*(expr_mod.eval_jet(a, env) for a in asts))
        return TransversalField(fn, label or "expr(" + ", ".join(sources) + ")")

    @staticmethod
    def unit_normal(label="unit normal"):
        def fn(f, u1, u2, order):
            return frame_bundle(f, u1, u2, order=order).n
        return TransversalField(fn, label)

    @staticmethod
    def from_split(phi_fn, a_fn, b_fn, label="split field"):
        """phi, a, b: callables (u1, u2, order) -> Jet; field against the
        frontal's own moving basis and unit normal."""
        def fn(f, u1, u2, order):
            b = frame_bundle(f, u1, u2, order=order)
            return (b.n.scale(phi_fn(u1, u2, order))
                    + b.w1.scale(a_fn(u1, u2, order))
                    + b.w2.scale(b_fn(u1, u2, order)))
        return TransversalField(fn, label)

    def jets(self, f: Frontal, u1, u2, order) -> JetVec3:
        return self._fn(f, u1, u2, order)


@dataclass
class EquiaffineStructure:
    """Per-point structure symbols; all arrays share the base-point shape."""
    h: np.ndarray        # (..., 2, 2)
    D1: np.ndarray
    D2: np.ndarray
    S: np.ndarray
    tau: np.ndarray      # (..., 2)
    theta: np.ndarray    # induced volume det(w1 w2 xi)
    phi: np.ndarray      # <xi, n>

    def max_tau(self):
        return float(np.max(np.abs(self.tau)))


def _stack3(vecs, shape):
    return np.stack([np.broadcast_to(v.values_stacked(), shape + (3,))
                     for v in vecs], axis=-1)


def check_transversal(bundle: FrameBundle, xi: JetVec3, eps_rank):
    theta = triple_product_jet(bundle.w1, bundle.w2, xi).value
    scale = (np.asarray(bundle.w1.norm().value) * np.asarray(bundle.w2.norm().value)
             * np.asarray(xi.norm().value))
    if np.any(np.abs(theta) <= eps_rank * np.maximum(scale, 1e-300)):
        raise NotTransversal("field lies in a limiting tangent plane "
                             "somewhere on the sample")


def structure_from_field(f: Frontal, xi: TransversalField, u1, u2,
                         config: Config = None,
                         bundle: FrameBundle = None,
                         xi_jets: JetVec3 = None) -> EquiaffineStructure:
    """Solve the six 3x3 frame systems for (h, D1, D2, S, tau) pointwise."""
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    b = bundle if bundle is not None else frame_bundle(f, u1, u2)
    xj = xi_jets if xi_jets is not None else xi.jets(f, u1, u2, b.order)
    check_transversal(b, xj, cfg.eps_rank)

    M = _stack3((b.w1, b.w2, xj), shape)
    w_u = [[b.w1.deriv(0), b.w1.deriv(1)], [b.w2.deriv(0), b.w2.deriv(1)]]
    rhs = np.stack(
        [np.broadcast_to(w_u[0][0].values_stacked(), shape + (3,)),
         np.broadcast_to(w_u[1][0].values_stacked(), shape + (3,)),
         np.broadcast_to(w_u[0][1].values_stacked(), shape + (3,)),
         np.broadcast_to(w_u[1][1].values_stacked(), shape + (3,)),
         np.broadcast_to(xj.deriv(0).values_stacked(), shape + (3,)),
         np.broadcast_to(xj.deriv(1).values_stacked(), shape + (3,))],
        axis=-1)
    sol = np.linalg.solve(M, rhs)          # (..., 3, 6)

    resid = M @ sol - rhs
    scale = np.maximum(1.0, np.max(np.abs(rhs)))
    worst = float(np.max(np.abs(resid)))
    if worst > 1e-9 * scale:
        raise VerificationError(
            f"frame-system solve residual {worst:.2e} exceeds gate")

    # columns: w1_u1, w2_u1, w1_u2, w2_u2, xi_u1, xi_u2
    D1 = np.stack([sol[..., :2, 0], sol[..., :2, 1]], axis=-2)
    D2 = np.stack([sol[..., :2, 2], sol[..., :2, 3]], axis=-2)
    h = np.stack([np.stack([sol[..., 2, 0], sol[..., 2, 2]], axis=-1),
                  np.stack([sol[..., 2, 1], sol[..., 2, 3]], axis=-1)],
                 axis=-2)
    S = np.stack([-sol[..., :2, 4], -sol[..., :2, 5]], axis=-2)
    tau = np.stack([sol[..., 2, 4], sol[..., 2, 5]], axis=-1)
    theta = np.broadcast_to(
        np.asarray(triple_product_jet(b.w1, b.w2, xj).value, dtype=float),
        shape)
    phi = np.broadcast_to(np.asarray(xj.dot(b.n).value, dtype=float), shape)
    return EquiaffineStructure(h=h, D1=D1, D2=D2, S=S, tau=tau,
                               theta=theta, phi=phi)


def is_equiaffine(structure: EquiaffineStructure, tol=1e-6):
    """(verdict, max |tau_i|) over the sampled points."""
    worst = structure.max_tau()
    return worst <= tol, worst


def check_tau_formula(f: Frontal, phi_fn, a_fn, b_fn, u1, u2,
                      config: Config = None):
    """Residuals of the split-field identities for h and tau.

    For xi = phi*n + Z with Z = a*w1 + b*w2 and p the normal-component
    form of the basis derivatives, h must equal p/phi and
    tau_i = (p(Z, w_i) + phi_ui)/phi.  Returns (max |h - p/phi|,
    max |tau - predicted|); both vanish for exact data.
    """
    cfg = config or f.config
    b = frame_bundle(f, u1, u2)
    xi = TransversalField.from_split(phi_fn, a_fn, b_fn)
    s = structure_from_field(f, xi, u1, u2, config=cfg, bundle=b)

    shape = np.shape(np.asarray(u1, dtype=float))
    phi = np.broadcast_to(np.asarray(phi_fn(u1, u2, b.order).value,
                                     dtype=float), shape)
    if np.any(phi == 0.0):
        raise NotTransversal("phi vanishes; split field not transversal")
    a_val = np.broadcast_to(np.asarray(a_fn(u1, u2, b.order).value,
                                       dtype=float), shape)
    b_val = np.broadcast_to(np.asarray(b_fn(u1, u2, b.order).value,
                                       dtype=float), shape)

    # p_ij = <w_i,uj , n>, arranged like the second-form matrix
    w_u = [[b.w1.deriv(0), b.w1.deriv(1)], [b.w2.deriv(0), b.w2.deriv(1)]]
    p = np.stack([np.stack([np.broadcast_to(
        np.asarray(w_u[i][j].dot(b.n).value, dtype=float), shape)
        for j in range(2)], axis=-1) for i in range(2)], axis=-2)

    h_resid = float(np.max(np.abs(s.h - p / phi[..., None, None])))

    phi_j = phi_fn(u1, u2, b.order)
    dphi = [np.broadcast_to(np.asarray(phi_j.deriv(k).value, dtype=float),
                            shape) for k in range(2)]
    # p(Z, w_i) = a p_1i + b p_2i
    tau_pred = np.stack(
        [(a_val * p[..., 0, i] + b_val * p[..., 1, i] + dphi[i]) / phi
         for i in range(2)], axis=-1)
    tau_resid = float(np.max(np.abs(s.tau - tau_pred)))
    return h_resid, tau_resid


def parallel_volume_check(f: Frontal, xi: TransversalField, u1, u2,
                          config: Config = None):
    """Residual of the derivative identity for the induced volume.

    d/du_k theta(w1, w2) always equals (trace D_k + tau_k) theta; the
    equiaffine content is that the connection-only part (tau = 0) grabs
    the whole derivative.  Returns (max residual, max |tau|) so callers
    can see the identity holding while tau decides parallelism.
    """
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    b = frame_bundle(f, u1, u2)
    if np.any(np.abs(np.asarray(b.lam_det.value)) <= cfg.eps_sing):
        raise SingularPoint("volume check sampled on the singular set")
    xj = xi.jets(f, u1, u2, b.order)
    s = structure_from_field(f, xi, u1, u2, config=cfg, bundle=b, xi_jets=xj)
    theta_j = triple_product_jet(b.w1, b.w2, xj)
    resid = 0.0
    theta = np.broadcast_to(np.asarray(theta_j.value, dtype=float), shape)
    for k in range(2):
        dtheta = np.broadcast_to(np.asarray(theta_j.deriv(k).value,
                                            dtype=float), shape)
        trek = s.D1 if k == 0 else s.D2
        trace = trek[..., 0, 0] + trek[..., 1, 1]
        resid = max(resid, float(np.max(np.abs(
            dtheta - (trace + s.tau[..., k]) * theta))))
    return resid, s.max_tau()


# --- classical (regular-part) routes ----------------------------------------------


def _gamma_jets(I):
    """Christoffel blocks Gamma_1, Gamma_2 from the first-form jets."""
    E, F, G = I[0][0], I[0][1], I[1][1]
    I_inv = inv2_jet(I)
    out = []
    for k in range(2):
        I_k = [[E.deriv(k), F.deriv(k)], [F.deriv(k), G.deriv(k)]]
        skew = (E.deriv(1) - F.deriv(0)) if k == 0 else (F.deriv(1) - G.deriv(0))
        A = [[skew * 0.0, -skew], [skew, skew * 0.0]]
        half = [[(I_k[i][j] + A[i][j]) * 0.5 for j in range(2)]
                for i in range(2)]
        from .jets import mat2_mul_jet
        out.append(mat2_mul_jet(half, I_inv))
    return out


@dataclass
class ClassicalSymbols:
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma1_t: np.ndarray     # connection blocks of the transversal split
    gamma2_t: np.ndarray
    c: np.ndarray            # affine fundamental form, (..., 2, 2) symmetric
    b_shape: np.ndarray      # shape-operator coefficients against Dx
    split: np.ndarray        # (..., 3): a, b, phi with xi = phi n + a x_u1 + b x_u2


def classical_symbols(f: Frontal, xi: TransversalField, u1, u2,
                      config: Config = None) -> ClassicalSymbols:
    """Regular-part symbols in the basis (x_u1, x_u2, n or xi)."""
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    bnd = frame_bundle(f, u1, u2)
    lam_det = np.asarray(bnd.lam_det.value)
    if np.any(np.abs(lam_det) <= cfg.eps_sing):
        raise SingularPoint("classical symbols need the regular part")

    x1, x2 = bnd.x_u
    I_cl = [[x1.dot(x1), x1.dot(x2)], [x2.dot(x1), x2.dot(x2)]]
    gam = _gamma_jets(I_cl)
    gamma = [np.broadcast_to(mat2_values(g), shape + (2, 2)) for g in gam]

    xj = xi.jets(f, u1, u2, bnd.order)
    M = _stack3((x1, x2, bnd.n), shape)
    rhs = np.broadcast_to(xj.values_stacked(), shape + (3,))
    abphi = np.linalg.solve(M, rhs[..., None])[..., 0]
    a_v, b_v, phi = abphi[..., 0], abphi[..., 1], abphi[..., 2]
    if np.any(phi == 0.0):
        raise NotTransversal("<xi, n> vanishes on the sample")

    n_u = [bnd.n.deriv(0), bnd.n.deriv(1)]
    II_cl = np.stack([np.stack([np.broadcast_to(
        np.asarray((-(bnd.x_u[i].dot(n_u[j]))).value, dtype=float), shape)
        for j in range(2)], axis=-1) for i in range(2)], axis=-2)
    e, fq, g = II_cl[..., 0, 0], II_cl[..., 0, 1], II_cl[..., 1, 1]

    c = II_cl / phi[..., None, None]
    corr1 = np.stack([np.stack([a_v * e, b_v * e], axis=-1),
                      np.stack([a_v * fq, b_v * fq], axis=-1)], axis=-2)
    corr2 = np.stack([np.stack([a_v * fq, b_v * fq], axis=-1),
                      np.stack([a_v * g, b_v * g], axis=-1)], axis=-2)
    gamma1_t = gamma[0] - corr1 / phi[..., None, None]
    gamma2_t = gamma[1] - corr2 / phi[..., None, None]

    # xi_ui = -b_i^1 x_u1 - b_i^2 x_u2 (+ tau xi); coefficients by solve
    rhs_b = np.stack([np.broadcast_to(xj.deriv(k).values_stacked(),
                                      shape + (3,)) for k in range(2)],
                     axis=-1)
    sol = np.linalg.solve(M, rhs_b)
    b_shape = np.stack([-sol[..., :2, 0], -sol[..., :2, 1]], axis=-2)
    return ClassicalSymbols(gamma1=gamma[0], gamma2=gamma[1],
                            gamma1_t=gamma1_t, gamma2_t=gamma2_t, c=c,
                            b_shape=b_shape, split=abphi)


def d_from_gamma(f: Frontal, xi: TransversalField, u1, u2,
                 config: Config = None):
    """(D1, D2) via the factor-conjugated classical route, regular part only.

    D_k = Lambda^{-1} (Gamma~_k Lambda - Lambda_uk); must agree with the
    direct frame solve wherever both are defined.
    """
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    sym = classical_symbols(f, xi, u1, u2, config=cfg)
    lam_j = f.lam(u1, u2, cfg.jet_order)
    lam = np.broadcast_to(mat2_values(lam_j), shape + (2, 2))
    lam_inv = np.linalg.inv(lam)
    out = []
    for k, gt in ((0, sym.gamma1_t), (1, sym.gamma2_t)):
        lam_uk = np.broadcast_to(mat2_values(
            [[lam_j[i][j].deriv(k) for j in range(2)] for i in range(2)]),
            shape + (2, 2))
        out.append(lam_inv @ (gt @ lam - lam_uk))
    return out[0], out[1]
