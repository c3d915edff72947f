"""Extended Gauss curvature, the affine-normal field, and conormals.

On the regular part of a frontal the Gauss curvature is the ratio
K = K_omega / det Lambda; when that ratio extends across the singular set
the extension is certified numerically by a limit probe: radial samples
along several directions, Richardson-extrapolated, accepted only when
every usable direction settles and the directional limits agree.  That
is an agreement certificate, not a smoothness proof.

The affine-normal (Blaschke) field is built from phi = |K|^(1/4): the
tangential coefficients solve the transposed second-form system against
-grad phi on the regular part and are probed in the limit at singular
points.  Construction never consults a printed answer; catalog closed
forms are checked against it, not the other way around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Config
from .equiaffine import TransversalField, structure_from_field
from .errors import (DegenerateBasis, DivisionByZeroValue, DomainError,
                     Indeterminate, InsufficientJetOrder, KVanishes,
                     NotExtendable, NotTransversal, SingularIIOmega)
from .frame import FrameBundle, Frontal, frame_bundle
from .jets import Jet, inv2_jet
from . import expr as expr_mod


# --- limit probes ------------------------------------------------------------------


@dataclass
class ProbeResult:
    target: tuple
    ok: bool
    value: np.ndarray            # (m,) component limits (direction average)
    spread: float                # worst relative disagreement across directions
    settled: bool                # every usable direction Cauchy
    diverging: bool
    n_directions: int
    detail: dict = field(default_factory=dict)

    def require(self, what="limit"):
        if self.ok:
            return self.value
        if self.diverging or (self.settled and not self.ok):
            raise NotExtendable(
                f"{what} at {self.target}: directional limits disagree "
                f"(spread {self.spread:.2e}) or diverge")
        raise Indeterminate(
            f"{what} at {self.target}: probe sequences did not settle")


def _probe_once(fn, targets, domain, config, m_components, ndir):
    npts = targets.shape[0]
    nrad = config.probe_levels
    angles = 2.0 * np.pi * np.arange(ndir) / ndir
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    radii = config.probe_r0 * config.probe_ratio ** np.arange(nrad)

    pts = (targets[:, None, None, :]
           + radii[None, None, :, None] * dirs[None, :, None, :])
    a1, b1, a2, b2 = domain
    inside = ((pts[..., 0] >= a1) & (pts[..., 0] <= b1)
              & (pts[..., 1] >= a2) & (pts[..., 1] <= b2))

    flat = pts.reshape(-1, 2)
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(flat[:, 0], flat[:, 1]), dtype=float)
    vals = vals.reshape(m_components, npts, ndir, nrad)
    usable = inside[None, ...] & np.isfinite(vals)
    dir_ok = usable.all(axis=(0, 3))                 # (npts, ndir)

    # Richardson tableau for a geometric radius sequence; level m removes
    # the r^m error term.  The limit is read off the column where the
    # successive differences bottom out: truncation shrinks them going
    # inward, sample noise (which grows near the singular set) blows them
    # up again, and the turning point is the best available estimate.
    tab = np.where(dir_ok[None, :, :, None], vals, 0.0)
    levels = min(config.probe_richardson, nrad - 3)
    rho = config.probe_ratio
    for m in range(1, levels + 1):
        w = rho ** m
        tab = (tab[..., 1:] - w * tab[..., :-1]) / (1.0 - w)
    gaps = np.abs(np.diff(tab, axis=-1))              # (m, npts, ndir, g)
    pick_score = gaps.sum(axis=0)                     # shared column choice
    k_star = np.argmin(pick_score, axis=-1)           # (npts, ndir)
    limit = np.take_along_axis(
        tab[..., 1:], k_star[None, :, :, None], axis=-1)[..., 0]
    err_est = np.take_along_axis(
        gaps, k_star[None, :, :, None], axis=-1)[..., 0]

    raw_tail = np.abs(vals[..., -3:])
    growing = ((raw_tail[..., 2] > 1.5 * raw_tail[..., 1])
               & (raw_tail[..., 1] > 1.5 * raw_tail[..., 0]))

    results = []
    for p in range(npts):
        sel = dir_ok[p]
        n_ok = int(sel.sum())
        if n_ok < 3:
            results.append(ProbeResult(tuple(targets[p]), False,
                                       np.full(m_components, np.nan),
                                       np.inf, False, False, n_ok,
                                       detail={"starved": True}))
            continue
        lim = limit[:, p, sel]                        # (m, n_ok)
        scale = np.maximum(1.0, np.abs(lim).max())
        settled = bool(np.all(err_est[:, p, sel] <= config.tol_limit * scale))
        diverging = bool(np.any(growing[:, p, sel])) and not settled
        spread = float(np.max(lim.max(axis=1) - lim.min(axis=1)) / scale)
        ok = settled and spread <= config.tol_limit
        results.append(ProbeResult(tuple(targets[p]), ok, lim.mean(axis=1),
                                   spread, settled, diverging, n_ok,
                                   detail={"scale": float(scale)}))
    return results


def probe_limits(fn, targets, domain, config: Config = DEFAULT,
                 m_components=1):
    """Directional Richardson limits of a (possibly vector) function.

    fn(u1_flat, u2_flat) -> (m, N) array with nan marking unusable
    samples (e.g. the function undefined on the singular set).  Radii
    follow a geometric sequence; two Richardson levels remove the linear
    and quadratic error terms of each directional restriction.  A
    direction is culled when any of its samples is unusable or leaves
    the domain; targets starved of directions (domain corners with the
    singular set through them) are retried with denser fans before a
    verdict is given up on.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    results = _probe_once(fn, targets, domain, config, m_components,
                          config.probe_directions)
    for factor in (3, 6):
        starved = [k for k, r in enumerate(results)
                   if r.detail.get("starved")]
        if not starved:
            break
        retry = _probe_once(fn, targets[starved], domain, config,
                            m_components, config.probe_directions * factor)
        for k, res in zip(starved, retry):
            results[k] = res
    return results


def _lam_det_values(f: Frontal, u1, u2, order=0):
    from .jets import det2_jet
    lam = f.lam(u1, u2, order)
    det = det2_jet(lam)
    return np.broadcast_to(np.asarray(det.value, dtype=float), np.shape(u1))


# --- extended Gauss curvature --------------------------------------------------------


def _gauss_ratio_fn(f: Frontal, config: Config):
    """Pointwise K_omega/lambda on the regular set, nan elsewhere.

    Samples are evaluated in extended precision where the platform has
    it: the curvature ratio is a 0/0 cancellation near the singular set
    and the probe quality is set by the arithmetic's epsilon there.
    """
    def fn(u1, u2):
        u1 = np.asarray(u1, dtype=np.longdouble)
        u2 = np.asarray(u2, dtype=np.longdouble)
        try:
            b = frame_bundle(f, u1, u2, order=2, config=config)
        except DegenerateBasis:
            return np.full((1,) + np.shape(u1), np.nan)
        lam = np.broadcast_to(np.asarray(b.lam_det.value, dtype=float),
                              np.shape(u1)).copy()
        K = np.broadcast_to(np.asarray(b.K_omega.value, dtype=float),
                            np.shape(u1))
        lam[np.abs(lam) <= config.eps_sing] = np.nan
        return (K / lam)[None, :]
    return fn


def gauss_extension(f: Frontal, point, config: Config = None):
    """Extended Gauss curvature at one point.

    Regular points evaluate K_omega/det Lambda directly (through the
    analytic closed form when the frontal carries one); singular points
    go through the limit probe and raise NotExtendable/Indeterminate when
    the certificate fails.
    """
    cfg = config or f.config
    u1 = np.asarray([point[0]], dtype=float)
    u2 = np.asarray([point[1]], dtype=float)
    lam = float(np.max(_lam_det_values(f, u1, u2)))
    if abs(lam) > cfg.eps_sing:
        if f.gauss is not None:
            return float(np.asarray(f.gauss(u1, u2, 0).value).ravel()[0])
        b = frame_bundle(f, u1, u2, order=2, config=cfg)
        return float(np.asarray(b.K_omega.value).ravel()[0]) / lam
    return float(gauss_at_singular(f, np.asarray([point], dtype=float),
                                   cfg)[0])


def gauss_at_singular(f: Frontal, targets, config: Config):
    """Extended curvature at a batch of singular points, one probe pass."""
    if f.gauss is not None:
        vals = f.gauss(targets[:, 0], targets[:, 1], 0).value
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (targets.shape[0],)).copy()
    results = probe_limits(_gauss_ratio_fn(f, config), targets, f.domain,
                           config)
    return np.asarray([float(r.require("extended Gauss curvature")[0])
                       for r in results])


# --- the affine-normal construction ---------------------------------------------------


def _phi_jet(f: Frontal, bundle: FrameBundle, u1, u2, config: Config):
    """|K|^(1/4) as a jet on the regular part, and the signed K jet."""
    if f.gauss is not None:
        K = f.gauss(u1, u2, bundle.order)
    else:
        K = bundle.K_omega / bundle.lam_det
    K_val = np.asarray(K.value, dtype=float)
    if np.any(np.abs(K_val) <= config.eps_k):
        raise KVanishes("extended Gauss curvature vanishes on the sample; "
                        "no affine normal exists")
    sign = np.sign(K_val)
    return (K * sign).powf(0.25), K, sign


def _tangent_coeff_jets(bundle: FrameBundle, phi: Jet, config: Config):
    """Solve the transposed second-form system for the tangential part."""
    e, f1 = bundle.II[0][0], bundle.II[0][1]
    f2, g = bundle.II[1][0], bundle.II[1][1]
    det = e * g - f2 * f1
    det_val = np.asarray(det.value, dtype=float)
    if np.any(np.abs(det_val) <= 1e-300):
        raise SingularIIOmega(
            "second-form matrix singular at a point treated as regular; "
            "inconsistent with non-vanishing curvature")
    Minv = inv2_jet([[e, f2], [f1, g]])
    rhs0 = -(phi.deriv(0))
    rhs1 = -(phi.deriv(1))
    a = Minv[0][0] * rhs0 + Minv[0][1] * rhs1
    b = Minv[1][0] * rhs0 + Minv[1][1] * rhs1
    return a, b


class BlaschkeField:
    """Affine-normal field of a frontal, with evaluation machinery.

    Carries the grids it was built on plus diagnostics, and can evaluate
    jets at arbitrary regular points (for structure extraction) and
    values at singular points (via probes).  Near-singular evaluations
    inside smooth-field sweeps are nudged off the zero set transversally
    by ~1e-7, which perturbs the smooth field by the same order.
    """

    def __init__(self, frontal: Frontal, config: Config, grids, diagnostics):
        self.frontal = frontal
        self.config = config
        self.u1 = grids["u1"]
        self.u2 = grids["u2"]
        self.phi = grids["phi"]
        self.a = grids["a"]
        self.b = grids["b"]
        self.xi = grids["xi"]                 # (..., 3)
        self.regular = grids["regular"]
        self.k_sign = grids["k_sign"]
        self.diagnostics = diagnostics

    # -- evaluation --------------------------------------------------------

    def components_jet(self, u1, u2, order=None):
        """(bundle, phi, a, b) jets at regular points (arrays allowed)."""
        cfg = self.config
        b = frame_bundle(self.frontal, u1, u2, order=order, config=cfg)
        lam = np.asarray(b.lam_det.value, dtype=float)
        if np.any(np.abs(lam) <= cfg.eps_sing):
            raise DivisionByZeroValue(
                "affine-normal jets requested on the singular set")
        phi, _, _ = _phi_jet(self.frontal, b, u1, u2, cfg)
        av, bv = _tangent_coeff_jets(b, phi, cfg)
        return b, phi, av, bv

    def xi_jet(self, u1, u2, order=None):
        b, phi, av, bv = self.components_jet(u1, u2, order)
        return b.n.scale(phi) + b.w1.scale(av) + b.w2.scale(bv)

    def nudged_points(self, u1, u2, shift=1e-7):
        """Move points off the singular set along the gradient of det Lambda."""
        from .jets import det2_jet
        u1 = np.array(u1, dtype=float, copy=True)
        u2 = np.array(u2, dtype=float, copy=True)
        lam_det = det2_jet(self.frontal.lam(u1, u2, 1))
        lam = np.broadcast_to(np.asarray(lam_det.value, dtype=float),
                              u1.shape)
        near = np.abs(lam) <= 10.0 * self.config.eps_sing
        if not np.any(near):
            return u1, u2
        g1 = np.broadcast_to(np.asarray(lam_det.partial(1, 0), dtype=float),
                             u1.shape)
        g2 = np.broadcast_to(np.asarray(lam_det.partial(0, 1), dtype=float),
                             u1.shape)
        norm = np.hypot(g1, g2)
        bad = near & (norm <= 1e-12)
        if np.any(bad):
            raise DivisionByZeroValue(
                "singular point with vanishing gradient; cannot nudge")
        u1[near] = u1[near] + shift * g1[near] / norm[near]
        u2[near] = u2[near] + shift * g2[near] / norm[near]
        return u1, u2

    def xi_value(self, u1, u2):
        """Field values anywhere: direct on the regular set, probed on
        the singular set."""
        cfg = self.config
        u1 = np.atleast_1d(np.asarray(u1, dtype=float))
        u2 = np.atleast_1d(np.asarray(u2, dtype=float))
        shape = u1.shape
        lam = _lam_det_values(self.frontal, u1, u2)
        out = np.empty(shape + (3,), dtype=float)
        regular = np.abs(lam) > cfg.eps_sing
        if np.any(regular):
            xi = self.xi_jet(u1[regular], u2[regular])
            out[regular] = xi.values_stacked()
        if np.any(~regular):
            targets = np.stack([u1[~regular], u2[~regular]], axis=-1)
            out[~regular] = self._xi_singular(targets)
        return out.reshape(shape + (3,))

    def _xi_singular(self, targets):
        cfg = self.config
        results = probe_limits(self._ab_fn(), targets, self.frontal.domain,
                               cfg, m_components=2)
        K_vals = gauss_at_singular(self.frontal, targets, cfg)
        if np.any(np.abs(K_vals) <= cfg.eps_k):
            raise KVanishes("extended curvature vanishes at a singular "
                            "point")
        out = np.empty((len(results), 3), dtype=float)
        for k, res in enumerate(results):
            ab = res.require("affine-normal tangential part")
            q1 = np.asarray([targets[k, 0]])
            q2 = np.asarray([targets[k, 1]])
            b = frame_bundle(self.frontal, q1, q2, config=cfg)
            phi = abs(K_vals[k]) ** 0.25
            xi = (b.n.values_stacked() * phi
                  + b.w1.values_stacked() * ab[0]
                  + b.w2.values_stacked() * ab[1])
            out[k] = np.asarray(xi, dtype=float).reshape(-1, 3)[0]
        return out

    def _ab_fn(self):
        return _tangent_value_fn(self.frontal, self.config)

    def as_transversal(self):
        """View as a TransversalField over the regular part (jets)."""
        return TransversalField(
            lambda f, u1, u2, order: self.xi_jet(u1, u2, order),
            label="affine normal")


def _tangent_value_fn(f: Frontal, cfg: Config):
    """(a, b) values on the regular set, nan at singular samples.

    Evaluated in extended precision: near the singular set these values
    come from a near-singular solve fed by a 0/0 curvature quotient, and
    the limit-probe accuracy is set by the epsilon of this arithmetic.
    """
    def fn(u1, u2):
        u1 = np.asarray(u1, dtype=np.longdouble)
        u2 = np.asarray(u2, dtype=np.longdouble)
        out = np.full((2,) + u1.shape, np.nan)
        try:
            lam = _lam_det_values(f, u1, u2)
        except DegenerateBasis:
            return out
        ok = np.abs(lam) > cfg.eps_sing
        if np.any(ok):
            try:
                b = frame_bundle(f, u1[ok], u2[ok], config=cfg)
                phi, _, _ = _phi_jet(f, b, u1[ok], u2[ok], cfg)
                av, bv = _tangent_coeff_jets(b, phi, cfg)
            except (KVanishes, SingularIIOmega, DomainError,
                    DivisionByZeroValue, DegenerateBasis):
                return out
            tgt = u1[ok].shape
            out[0][ok] = np.broadcast_to(np.asarray(av.value, dtype=float),
                                         tgt)
            out[1][ok] = np.broadcast_to(np.asarray(bv.value, dtype=float),
                                         tgt)
        return out
    return fn


def blaschke_field(f: Frontal, shape=(101, 101), config: Config = None,
                   grid=None) -> BlaschkeField:
    """Construct the affine-normal field over a grid.

    Raises KVanishes when |K| drops below the parabolicity gate anywhere,
    NotExtendable/Indeterminate when a singular-point limit certificate
    fails (the field then does not exist in the sense of the existence
    characterization), SingularIIOmega on inconsistent regular data.
    """
    cfg = config or f.config
    u1, u2 = grid if grid is not None else f.grid(shape)
    bundle = frame_bundle(f, u1, u2, config=cfg)
    lam = np.broadcast_to(np.asarray(bundle.lam_det.value, dtype=float),
                          u1.shape)
    regular = np.abs(lam) > cfg.eps_sing

    phi_g = np.empty(u1.shape)
    a_g = np.empty(u1.shape)
    b_g = np.empty(u1.shape)
    xi_g = np.empty(u1.shape + (3,))
    sign_g = np.zeros(u1.shape)

    if np.any(regular):
        br = frame_bundle(f, u1[regular], u2[regular], config=cfg)
        phi, K, sign = _phi_jet(f, br, u1[regular], u2[regular], cfg)
        av, bv = _tangent_coeff_jets(br, phi, cfg)
        xi = br.n.scale(phi) + br.w1.scale(av) + br.w2.scale(bv)
        tgt = u1[regular].shape
        phi_g[regular] = np.broadcast_to(np.asarray(phi.value), tgt)
        a_g[regular] = np.broadcast_to(np.asarray(av.value), tgt)
        b_g[regular] = np.broadcast_to(np.asarray(bv.value), tgt)
        xi_g[regular] = np.broadcast_to(xi.values_stacked(), tgt + (3,))
        sign_g[regular] = np.broadcast_to(sign, tgt)

    probe_report = []
    n_sing = int(np.sum(~regular))
    if n_sing:
        targets = np.stack([u1[~regular], u2[~regular]], axis=-1)
        results = probe_limits(_tangent_value_fn(f, cfg), targets, f.domain,
                               cfg, m_components=2)
        K_vals = gauss_at_singular(f, targets, cfg)
        if np.any(np.abs(K_vals) <= cfg.eps_k):
            raise KVanishes("extended curvature vanishes on the singular set")
        bq = frame_bundle(f, targets[:, 0], targets[:, 1], config=cfg)
        n_at = np.broadcast_to(bq.n.values_stacked(), (n_sing, 3))
        w1_at = np.broadcast_to(bq.w1.values_stacked(), (n_sing, 3))
        w2_at = np.broadcast_to(bq.w2.values_stacked(), (n_sing, 3))
        xis = np.empty((n_sing, 3))
        phis = np.empty(n_sing)
        abv = np.empty((n_sing, 2))
        for k, res in enumerate(results):
            ab = res.require("affine-normal tangential part")
            phis[k] = abs(K_vals[k]) ** 0.25
            abv[k] = ab
            xis[k] = (n_at[k] * phis[k] + w1_at[k] * ab[0]
                      + w2_at[k] * ab[1])
            probe_report.append({
                "point": [float(targets[k, 0]), float(targets[k, 1])],
                "spread": res.spread,
                "directions": res.n_directions,
                "tolerance": cfg.tol_limit,
            })
        phi_g[~regular] = phis
        a_g[~regular] = abv[:, 0]
        b_g[~regular] = abv[:, 1]
        xi_g[~regular] = xis
        sign_g[~regular] = np.sign(K_vals)

    grids = {"u1": u1, "u2": u2, "phi": phi_g, "a": a_g, "b": b_g,
             "xi": xi_g, "regular": regular, "k_sign": sign_g}
    bf = BlaschkeField(f, cfg, grids, {})

    # diagnostics on the regular part: equiaffinity and volume match.
    # Quadrature-backed surfaces carry one jet order less than closed-form
    # ones; when the field's jets cannot support the derivative checks the
    # values (and their probe certificates) stand alone.
    diag = {"n_singular": n_sing, "probes": probe_report}
    if np.any(regular):
        try:
            s = structure_from_field(
                f, bf.as_transversal(), u1[regular], u2[regular], config=cfg)
            lam_reg = lam[regular]
            det_h = (s.h[..., 0, 0] * s.h[..., 1, 1]
                     - s.h[..., 0, 1] * s.h[..., 1, 0])
            vol_ratio = np.sqrt(s.theta ** 2 * np.abs(lam_reg)
                                / np.abs(det_h))
            diag["max_tau"] = float(np.max(np.abs(s.tau)))
            diag["volume_residual"] = float(np.max(np.abs(vol_ratio - 1.0)))
        except InsufficientJetOrder:
            diag["max_tau"] = None
            diag["volume_residual"] = None
            diag["note"] = ("field jets too shallow for derivative "
                            "diagnostics on this surface")
    mean_xi = xi_g.reshape(-1, 3).mean(axis=0)
    dev = float(np.max(np.abs(xi_g - mean_xi)))
    diag["improper_sphere"] = dev <= 1e-6
    diag["constancy_deviation"] = dev
    diag["constancy_tolerance"] = 1e-6
    bf.diagnostics = diag
    return bf


def blaschke_verify(f: Frontal, bf: BlaschkeField, shape=(41, 41),
                    config: Config = None):
    """Check the two defining conditions on the regular part of a grid.

    (i) equiaffinity: max |tau| of the induced structure;
    (ii) volume match: theta(w1,w2)^2 |lambda| must equal |det h|, i.e.
    the induced volume agrees with the volume of the relative form.
    Returns a report dict; nothing raises here.
    """
    cfg = config or f.config
    u1, u2 = f.interior_grid(shape, margin=0.005)
    b = frame_bundle(f, u1, u2, config=cfg)
    lam = np.broadcast_to(np.asarray(b.lam_det.value, dtype=float), u1.shape)
    regular = np.abs(lam) > cfg.eps_sing
    s = structure_from_field(f, bf.as_transversal(), u1[regular], u2[regular],
                             config=cfg)
    det_h = s.h[..., 0, 0] * s.h[..., 1, 1] - s.h[..., 0, 1] * s.h[..., 1, 0]
    vol_ratio = np.sqrt(s.theta ** 2 * np.abs(lam[regular]) / np.abs(det_h))
    return {
        "max_tau": float(np.max(np.abs(s.tau))),
        "tau_tolerance": 1e-6,
        "volume_residual": float(np.max(np.abs(vol_ratio - 1.0))),
        "volume_tolerance": 1e-6,
        "points_checked": int(np.sum(regular)),
    }


# --- extension criteria -------------------------------------------------------------


def membership_certificate_fn(lam_fn, i_omega_fn, efg_fn, which, config):
    """Pointwise value of the extension certificate ratio G_k / lambda.

    lam_fn(u1, u2) -> 2x2 jets, i_omega_fn -> 2x2 jets, efg_fn -> three
    jets (E, F, G).  G_1 uses E_u2 - F_u1, G_2 uses F_u2 - G_u1, matching
    the two criteria; the ratio extends smoothly iff the membership
    condition holds.
    """
    k = 0 if which == 1 else 1

    def fn(u1, u2):
        lam = lam_fn(u1, u2)
        I = i_omega_fn(u1, u2)
        E, F, G = efg_fn(u1, u2)
        row1 = [lam[0][0], lam[0][1]]
        row2 = [lam[1][0], lam[1][1]]
        row1_d = [c.deriv(k) for c in row1]
        row2_d = [c.deriv(k) for c in row2]

        def row_I_row(r, s):
            return (r[0] * (I[0][0] * s[0] + I[0][1] * s[1])
                    + r[1] * (I[1][0] * s[0] + I[1][1] * s[1]))

        skew = (E.deriv(1) - F.deriv(0)) if which == 1 else \
               (F.deriv(1) - G.deriv(0))
        big_g = row_I_row(row1_d, row2) - row_I_row(row1, row2_d) + skew
        lam_det = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0]
        lam_v = np.broadcast_to(np.asarray(lam_det.value, dtype=float),
                                np.shape(u1)).copy()
        lam_v[np.abs(lam_v) <= config.eps_sing] = np.nan
        g_v = np.broadcast_to(np.asarray(big_g.value, dtype=float),
                              np.shape(u1))
        return (g_v / lam_v)[None, :]
    return fn


def extension_condition_fields(lam_fn, i_omega_fn, efg_fn, which, point,
                               domain, config: Config = DEFAULT):
    """Probe verdict for the certificate ratio at a singular point."""
    fn = membership_certificate_fn(lam_fn, i_omega_fn, efg_fn, which, config)
    return probe_limits(fn, [point], domain, config)[0]


def extension_condition(f: Frontal, which, point, config: Config = None):
    """Extension criterion of the factor-conjugated connection blocks.

    which = 1 probes the u1-block certificate, which = 2 the u2-block.
    Returns the ProbeResult; the certified limit is the skew scalar that
    the constructive extension consumes.
    """
    cfg = config or f.config
    order = cfg.jet_order

    def lam_fn(u1, u2):
        return f.lam(u1, u2, order)

    def i_omega_fn(u1, u2):
        w1, w2 = f.omega(u1, u2, order)
        return [[w1.dot(w1), w1.dot(w2)], [w2.dot(w1), w2.dot(w2)]]

    def efg_fn(u1, u2):
        xj = f.x(u1, u2, order)
        xu = [xj.deriv(0), xj.deriv(1)]
        return xu[0].dot(xu[0]), xu[0].dot(xu[1]), xu[1].dot(xu[1])

    return extension_condition_fields(lam_fn, i_omega_fn, efg_fn, which,
                                      point, f.domain, cfg)


# --- closed form for the rank-1 wave-front class --------------------------------------


def rank1_closed_form(h_src, c_src, point):
    """Affine normal of the rank-1 wave-front class, by direct evaluation.

    Valid on the regular part (h_u1u1 nonzero at the point) for positive
    curvature ratio c; for constant c the field degenerates to the
    constant vertical vector (0, 0, c^(1/4)).
    """
    h = expr_mod.parse(h_src) if isinstance(h_src, str) else h_src
    c = expr_mod.parse(c_src) if isinstance(c_src, str) else c_src
    h_u1 = expr_mod.differentiate(h, "u1")
    h_u1u1 = expr_mod.differentiate(h_u1, "u1")
    h_u1u2 = expr_mod.differentiate(h_u1, "u2")
    c_u1 = expr_mod.differentiate(c, "u1")
    c_u2 = expr_mod.differentiate(c, "u2")
    env = {"u1": float(point[0]), "u2": float(point[1])}
    cv = float(expr_mod.eval_num(c, env))
    if cv <= 0.0:
        raise DomainError("curvature ratio must be positive for the "
                          "closed form")
    h11 = float(expr_mod.eval_num(h_u1u1, env))
    c1 = float(expr_mod.eval_num(c_u1, env))
    c2 = float(expr_mod.eval_num(c_u2, env))
    h12 = float(expr_mod.eval_num(h_u1u2, env))
    h1 = float(expr_mod.eval_num(h_u1, env))
    u2 = float(point[1])
    if h11 == 0.0:
        if c1 == 0.0 and c2 == 0.0:
            return np.array([0.0, 0.0, cv ** 0.25])
        raise DivisionByZeroValue(
            "h_u1u1 vanishes at the point with no cancellation")
    c34 = cv ** 0.75
    xi1 = -0.25 * c1 / (c34 * h11)
    xi2 = -0.25 * (c2 * h11 - c1 * h12) / (c34 * h11)
    xi3 = 0.25 * (-u2 * c2 * h11 + u2 * c1 * h12 + 4.0 * cv * h11
                  - c1 * h1) / (c34 * h11)
    return np.array([xi1, xi2, xi3])


# --- conormal field ----------------------------------------------------------------


def conormal(f: Frontal, xi: TransversalField, u1, u2, config: Config = None):
    """nu = n / <n, xi>: the unique covector with <nu, xi> = 1 that kills
    the limiting tangent planes; one jet order lower than its inputs."""
    cfg = config or f.config
    b = frame_bundle(f, u1, u2, config=cfg)
    xj = xi.jets(f, u1, u2, b.order)
    denom = b.n.dot(xj)
    if np.any(np.asarray(denom.value) == 0.0):
        raise NotTransversal("<n, xi> vanishes; conormal undefined")
    return b.n.scale(1.0 / denom)


def conormal_verify(f: Frontal, xi: TransversalField, u1, u2,
                    config: Config = None):
    """Residuals of the defining and derivative identities of the conormal.

    Checks <nu, xi> = 1, <nu, w_i> = 0, <nu_ui, xi> = 0 and the pairing
    <nu_ui, w_j> = -h_ji on the sampled regular points, and reports
    whether D nu has rank 2 everywhere (true on non-parabolic samples).
    """
    cfg = config or f.config
    shape = np.shape(np.asarray(u1, dtype=float))
    b = frame_bundle(f, u1, u2, config=cfg)
    xj = xi.jets(f, u1, u2, b.order)
    s = structure_from_field(f, xi, u1, u2, config=cfg, bundle=b, xi_jets=xj)
    nu = conormal(f, xi, u1, u2, config=cfg)

    def mx(jet):
        return float(np.max(np.abs(np.asarray(jet.value, dtype=float))))

    rep = {
        "pairing_xi": mx(nu.dot(xj) - 1.0),
        "pairing_w": max(mx(nu.dot(b.w1)), mx(nu.dot(b.w2))),
    }
    nu_u = [nu.deriv(0), nu.deriv(1)]
    rep["derivative_xi"] = max(mx(nu_u[0].dot(xj)), mx(nu_u[1].dot(xj)))
    worst = 0.0
    for i in range(2):
        for j in range(2):
            w = (b.w1, b.w2)[j]
            got = np.broadcast_to(
                np.asarray(nu_u[i].dot(w).value, dtype=float), shape)
            worst = max(worst, float(np.max(np.abs(got + s.h[..., j, i]))))
    rep["derivative_w"] = worst

    from .frame import vec3_values_on
    cols = [np.moveaxis(vec3_values_on(nu_u[k], shape), 0, -1)
            for k in range(2)]
    J = np.stack(cols, axis=-1)
    sv = np.linalg.svd(J, compute_uv=False)
    rep["rank2_everywhere"] = bool(
        np.all(sv[..., 1] > cfg.eps_rank * np.maximum(1.0, sv[..., 0])))
    rep["tolerance"] = 1e-8
    return rep
