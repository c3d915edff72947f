"""Built-in frontals with known answers, plus representation-formula generators.

Fixed entries store parametrization, moving basis and factor as expression
text; their known-answer block (factor determinant, extended Gauss
curvature, affine-normal field, improper-sphere flag) is verified at load
and used by the golden tests.  Generator entries assemble a surface whose
third component is an iterated integral, evaluated through integrate_jet,
and derive the moving basis analytically or from the integral jets.

Known-answer curvature carries the honest sign of det II / det I; the
affine-normal closed forms were cross-checked against the defining
conditions (vanishing transversal connection form and volume match) to
machine precision before being frozen here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod
from .config import DEFAULT, Config
from .errors import InputError, NotAFrontal
from .frame import Frontal, frontal_from_expressions
from .jets import Jet, JetVec3, integrate_jet

# Shared polynomial pieces of the cuspidal-cross-cap entry.
_RHO = "54*u1^4*u2^4 + 9*u1^2*u2^5 + 4*u2^6 + 54*u1^2*u2^2 + 12*u2^3 + 9"
_MU = ("2025*u1^4*u2^8 + 720*u1^2*u2^9 + 900*u1^6*u2^4 + 64*u2^10"
       " + 1200*u1^4*u2^5 + 3100*u1^2*u2^6 + 480*u2^7 + 1800*u1^4*u2^2"
       " + 1200*u1^2*u2^3 + 900*u2^4 + 900*u1^2 + 900")
_XI1 = ("216*u1^6*u2^4 - 189*u1^4*u2^5 + 66*u1^2*u2^6 + 16*u2^7"
        " + 324*u1^4*u2^2 + 9*u1^2*u2^3 + 48*u2^4 + 108*u1^2 + 36*u2")
_XI2 = ("(216*u1^4*u2^4 + 87*u1^2*u2^5 - 16*u2^6 + 252*u1^2*u2^2"
        " + 24*u2^3 + 72)*u2^2")
_XI3 = ("145800*u1^8*u2^8 + 35721*u1^6*u2^9 + 25326*u1^4*u2^10"
        " + 4896*u1^2*u2^11 + 277020*u1^6*u2^6 + 896*u2^12"
        " + 114129*u1^4*u2^7 + 39204*u1^2*u2^8 + 5088*u2^9"
        " + 179820*u1^4*u2^4 + 88938*u1^2*u2^5 + 12096*u2^6"
        " + 48600*u1^2*u2^2 + 14040*u2^3 + 6480")


@dataclass
class CatalogEntry:
    name: str
    description: str
    domain: tuple
    x: list | None = None                 # component sources
    omega: tuple | None = None            # (col1 sources, col2 sources)
    lam: list | None = None               # row-major 2x2 sources
    known: dict = field(default_factory=dict)
    open_domain: bool = False
    params: dict = field(default_factory=dict)
    builder: object = None                # callable(entry, config) -> Frontal

    def build(self, config: Config = DEFAULT) -> Frontal:
        if self.builder is not None:
            f = self.builder(self, config)
            f.open_domain = self.open_domain
        else:
            f = frontal_from_expressions(
                self.name, self.x, self.omega, self.domain,
                lam_srcs=self.lam,
                gauss_src=self.known.get("K"),
                blaschke_srcs=self.known.get("xi"),
                source="catalog", config=config,
                open_domain=self.open_domain)
        validate_entry(f, self, config)
        return f

    def summary(self):
        out = {
            "name": self.name,
            "description": self.description,
            "domain": list(self.domain),
            "open_domain": self.open_domain,
        }
        if self.x:
            out["x"] = list(self.x)
        if self.params:
            out["params"] = {k: str(v) for k, v in self.params.items()}
        known = {}
        for key in ("lambda_det", "K", "xi"):
            if key in self.known:
                known[key] = self.known[key]
        if "improper_sphere" in self.known:
            known["improper_sphere"] = self.known["improper_sphere"]
        out["known"] = known
        return out


def validate_entry(f: Frontal, entry: CatalogEntry, config: Config):
    """Load-time checks: basis rank, decomposition residual, known answers."""
    u1, u2 = f.interior_grid((9, 9), margin=0.02 if entry.open_domain else 0.0)
    xj = f.x(u1, u2, 2)
    w1, w2 = f.omega(u1, u2, 1)
    lam = f.lam(u1, u2, 1)
    resid, scale = 0.0, 1.0
    for j in range(2):
        xu = xj.deriv(j)
        rec = w1.scale(lam[j][0]) + w2.scale(lam[j][1])
        resid = max(resid, float(np.max(np.abs((xu - rec).value()))))
        scale = max(scale, float(np.max(np.abs(xu.value()))))
    if resid > config.eps_dec * scale * 10.0:
        raise NotAFrontal(
            f"catalog entry {entry.name}: decomposition residual {resid:.2e}")
    if "lambda_det" in entry.known:
        ref = expr_mod.eval_num(expr_mod.parse(entry.known["lambda_det"]),
                                {"u1": u1, "u2": u2})
        lam_det = (lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0]).value
        if float(np.max(np.abs(lam_det - ref))) > 1e-8 * max(
                1.0, float(np.max(np.abs(ref)))):
            raise InputError(
                f"catalog entry {entry.name}: factor determinant does not "
                f"match its known answer")


ENTRIES = {}


def _register(entry):
    ENTRIES[entry.name] = entry
    return entry


_register(CatalogEntry(
    name="plane",
    description="flat immersed plane; every curvature object vanishes",
    domain=(-1.0, 1.0, -1.0, 1.0),
    x=["u1", "u2", "0"],
    omega=(["1", "0", "0"], ["0", "1", "0"]),
    lam=["1", "0", "0", "1"],
    known={"lambda_det": "1", "K": "0"},
))

_register(CatalogEntry(
    name="paraboloid",
    description="elliptic paraboloid, the model improper affine sphere",
    domain=(-1.0, 1.0, -1.0, 1.0),
    x=["u1", "u2", "(u1^2 + u2^2)/2"],
    omega=(["1", "0", "u1"], ["0", "1", "u2"]),
    lam=["1", "0", "0", "1"],
    known={
        "lambda_det": "1",
        "K": "1/(1 + u1^2 + u2^2)^2",
        "xi": ["0", "0", "1"],
        "improper_sphere": True,
    },
))

_register(CatalogEntry(
    name="ex-5.8",
    description="cuspidal cross-cap from a 5/2-cuspidal edge, singular "
                "along u2 = 0, with a closed-form affine normal",
    domain=(-1.0, 1.0, -4.0, 4.0),
    open_domain=True,
    x=["u1", "u2^2", "4/15*u1*u2^5 + 1/2*u1^3*u2^4 + u1*u2^2"],
    omega=(["1", "0", "u2^2*(4/15*u2^3 + 3/2*u1^2*u2^2 + 1)"],
           ["0", "1", "1/3*u1*(3*u1^2*u2^2 + 2*u2^3 + 3)"]),
    lam=["1", "0", "0", "2*u2"],
    known={
        "lambda_det": "2*u2",
        "K": f"-90000*({_RHO})/({_MU})^2",
        "K_magnitude": f"90000*({_RHO})/({_MU})^2",
        "xi": [f"-3*sqrt(3)/8*({_XI1})/sqrt(sqrt(({_RHO})^7))",
               f"-9*sqrt(3)/8*u1*({_XI2})/sqrt(sqrt(({_RHO})^7))",
               f"sqrt(3)/240*({_XI3})/sqrt(sqrt(({_RHO})^7))"],
        "improper_sphere": False,
    },
))

_register(CatalogEntry(
    name="ex-5.9",
    description="quintic cuspidal-edge frontal, singular along u2 = 0; "
                "its affine normal depends on u2 alone",
    domain=(-1.0, 1.0, -1.0, 1.0),
    open_domain=True,
    x=["u1", "2/5*u2^5 + u2^2", "u1*u2^2"],
    omega=(["1", "0", "u2^2"], ["0", "u2^3 + 1", "u1"]),
    lam=["1", "0", "0", "2*u2"],
    known={
        "lambda_det": "2*u2",
        "K": "-((u2 + 1)^2*(u2^2 - u2 + 1)^2)"
             "/(u2^10 + 2*u2^7 + u2^6 + u2^4 + 2*u2^3 + u1^2 + 1)^2",
        "K_magnitude": "((u2 + 1)^2*(u2^2 - u2 + 1)^2)"
                       "/(u2^10 + 2*u2^7 + u2^6 + u2^4 + 2*u2^3 + u1^2 + 1)^2",
        "xi": ["3*u2/(4*sqrt((u2 + 1)^3)*sqrt((u2^2 - u2 + 1)^3))",
               "0",
               "(7*u2^3 + 4)/(4*sqrt((u2 + 1)^3)*sqrt((u2^2 - u2 + 1)^3))"],
        "improper_sphere": False,
    },
))

_register(CatalogEntry(
    name="ex-5.10",
    description="rank-1 wave front, singular along u2 = +-u1, whose affine "
                "normal is the constant vertical field",
    domain=(-1.0, 1.0, -1.0, 1.0),
    x=["u1", "12*u1^2*u2 - 4*u2^3", "u1^4 + 6*u1^2*u2^2 - 3*u2^4"],
    omega=(["1", "24*u1*u2", "4*u1^3 + 12*u1*u2^2"], ["0", "1", "u2"]),
    lam=["1", "0", "0", "12*u1^2 - 12*u2^2"],
    known={
        "lambda_det": "12*u1^2 - 12*u2^2",
        "K": "1/(16*u1^6 - 96*u1^4*u2^2 + 144*u1^2*u2^4 + u2^2 + 1)^2",
        "K_magnitude": "1/(16*u1^6 - 96*u1^4*u2^2 + 144*u1^2*u2^4"
                       " + u2^2 + 1)^2",
        "xi": ["0", "0", "1"],
        "improper_sphere": True,
    },
))


# --- representation-formula generators --------------------------------------------


def _jet_env(u1, u2, order):
    return {"u1": Jet.variable(u1, 0, order), "u2": Jet.variable(u2, 1, order)}


def gen_rank1_wavefront(h="u1^2 - u2^2", c="1", domain=(-1.0, 1.0, -1.0, 1.0),
                        config: Config = DEFAULT) -> CatalogEntry:
    """Rank-1 wave front built from a potential h(u1, u2).

    y = (u1, -h_u2, int_0^{u1}(h_u1(t,u2) - u2 h_u2u1(t,u2)) dt
                    - int_0^{u2} t h_u2u2(0,t) dt),
    with moving basis columns (1, 0, h_u1) and (0, 1, u2), so the factor
    determinant is -h_u2u2.  When h_u1u1 + c h_u2u2 = 0 for a smooth c the
    Gauss curvature extends as c/(1 + h_u1^2 + u2^2)^2.
    """
    h_ast = expr_mod.parse(h)
    c_ast = expr_mod.parse(c)
    diff = lambda a, v: expr_mod.simplify(expr_mod.differentiate(a, v))
    h_u1 = diff(h_ast, "u1")
    h_u2 = diff(h_ast, "u2")
    h_u2u1 = diff(h_u2, "u1")
    h_u2u2 = diff(h_u2, "u2")

    s = expr_mod.to_source
    x_srcs = None  # third component is an integral; built as a callable

    def x_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)
        comp1 = env["u1"]
        comp2 = -expr_mod.eval_jet(h_u2, env)

        def moving(t):
            local = {"u1": t, "u2": env["u2"]}
            return (expr_mod.eval_jet(h_u1, local)
                    - env["u2"] * expr_mod.eval_jet(h_u2u1, local))

        def fixed_u1(t):
            local = {"u1": Jet.constant(np.zeros(np.shape(np.asarray(t.value))),
                                        order), "u2": t}
            return t * expr_mod.eval_jet(h_u2u2, local)

        first = integrate_jet(moving, 0.0, env["u1"], var=0, order=order,
                              nodes=config.quad_nodes,
                              max_nodes=config.quad_max_nodes)
        second = integrate_jet(fixed_u1, 0.0, env["u2"], var=1, order=order,
                               nodes=config.quad_nodes,
                               max_nodes=config.quad_max_nodes)
        return JetVec3(comp1, comp2, first - second)

    omega_srcs = (["1", "0", s(h_u1)], ["0", "1", "u2"])
    lam_srcs = ["1", s(expr_mod.simplify(Unary_neg(h_u2u1))),
                "0", s(expr_mod.simplify(Unary_neg(h_u2u2)))]

    name = f"gen-rank1-wavefront[h={h};c={c}]"
    k_src = f"({c})/(1 + ({s(h_u1)})^2 + u2^2)^2"
    entry = CatalogEntry(
        name=name,
        description="rank-1 wave front generated from a potential",
        domain=domain,
        omega=omega_srcs,
        lam=lam_srcs,
        known={"lambda_det": s(expr_mod.simplify(Unary_neg(h_u2u2))),
               "K": k_src, "h": h, "c": c},
        params={"h": h, "c": c},
        builder=lambda entry, cfg: _build_generated(entry, cfg, x_fn),
    )
    return entry


def Unary_neg(node):
    return expr_mod.Unary("neg", node)


def _build_generated(entry: CatalogEntry, config: Config, x_fn) -> Frontal:
    om_ast = [[expr_mod.parse(srz) for srz in col] for col in entry.omega]
    lam_ast = [expr_mod.parse(srz) for srz in entry.lam] if entry.lam else None
    gauss_ast = (expr_mod.parse(entry.known["K"])
                 if entry.known.get("K") else None)

    def omega_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)
        w1 = JetVec3(*(expr_mod.eval_jet(a, env) for a in om_ast[0]))
        w2 = JetVec3(*(expr_mod.eval_jet(a, env) for a in om_ast[1]))
        return w1, w2

    lam_fn = None
    if lam_ast is not None:
        def lam_fn(u1, u2, order):
            env = _jet_env(u1, u2, order)
            vals = [expr_mod.eval_jet(a, env) for a in lam_ast]
            return [[vals[0], vals[1]], [vals[2], vals[3]]]

    gauss_fn = None
    if gauss_ast is not None:
        def gauss_fn(u1, u2, order):
            return expr_mod.eval_jet(gauss_ast, _jet_env(u1, u2, order))

    return Frontal(entry.name, x_fn, omega_fn, entry.domain, lam=lam_fn,
                   gauss=gauss_fn, source="generator", config=config)


def gen_extendable_nc(b="u2^2", h="0", l="1", r="0",
                      domain=(-1.0, 1.0, -1.0, 1.0),
                      config: Config = DEFAULT) -> CatalogEntry:
    """Frontal with extendable normal curvature from profile data.

    y = (u1, b(u1,u2), C) where C stacks four iterated integrals of the
    profile functions; l and r are single-variable expressions in u1.
    The second basis column is (0, 1, G) with G the u2-derivative cofactor
    of C, and the first column's third entry is recovered from the jets of
    C, so no closed form of C is ever needed.
    """
    b_ast = expr_mod.parse(b)
    h_ast = expr_mod.parse(h)
    l_ast = expr_mod.parse(l)
    r_ast = expr_mod.parse(r)
    for ast in (l_ast, r_ast):
        names = set()
        _collect_vars(ast, names)
        if "u2" in names or "t" in names:
            raise InputError("profile functions l and r must depend on u1 only")
    b_u1 = expr_mod.simplify(expr_mod.differentiate(b_ast, "u1"))
    b_u2 = expr_mod.simplify(expr_mod.differentiate(b_ast, "u2"))
    s = expr_mod.to_source

    def big_g(env, order):
        # G(u1, u2) = int_0^{u2} h(u1,t) b_u2(u1,t) dt + int_0^{u1} l(t) dt
        def hb(t):
            local = {"u1": env["u1"], "u2": t}
            return (expr_mod.eval_jet(h_ast, local)
                    * expr_mod.eval_jet(b_u2, local))

        def ell(t):
            return expr_mod.eval_jet(l_ast, {"u1": t})

        term_a = integrate_jet(hb, 0.0, env["u2"], var=1, order=order,
                               nodes=config.quad_nodes,
                               max_nodes=config.quad_max_nodes)
        term_b = integrate_jet(ell, 0.0, env["u1"], var=0, order=order,
                               nodes=config.quad_nodes,
                               max_nodes=config.quad_max_nodes)
        return term_a + term_b

    def third_component(env, order):
        # C = int_0^{u2} G(u1, t2)|_{l-part fixed} b_u2(u1,t2) dt2  (terms 1+2)
        #   + int_0^{u1} (int_0^{t2} l) b_u1(t2, 0) dt2 + int_0^{u1} int_0^{t2} r
        def outer_u2(t2):
            local = {"u1": env["u1"], "u2": t2}

            def hb(t1):
                inner = {"u1": env["u1"], "u2": t1}
                return (expr_mod.eval_jet(h_ast, inner)
                        * expr_mod.eval_jet(b_u2, inner))

            def ell(t1):
                return expr_mod.eval_jet(l_ast, {"u1": t1})

            inner_a = integrate_jet(hb, 0.0, t2, var=1, order=t2.order,
                                    nodes=config.quad_nodes,
                                    max_nodes=config.quad_max_nodes)
            inner_b = integrate_jet(ell, 0.0, env["u1"], var=0,
                                    order=t2.order,
                                    nodes=config.quad_nodes,
                                    max_nodes=config.quad_max_nodes)
            return (inner_a + inner_b) * expr_mod.eval_jet(b_u2, local)

        def outer_u1(t2):
            def ell(t1):
                return expr_mod.eval_jet(l_ast, {"u1": t1})

            def arr(t1):
                return expr_mod.eval_jet(r_ast, {"u1": t1})

            inner_l = integrate_jet(ell, 0.0, t2, var=0, order=t2.order,
                                    nodes=config.quad_nodes,
                                    max_nodes=config.quad_max_nodes)
            inner_r = integrate_jet(arr, 0.0, t2, var=0, order=t2.order,
                                    nodes=config.quad_nodes,
                                    max_nodes=config.quad_max_nodes)
            zero2 = Jet.constant(np.zeros(np.shape(np.asarray(t2.value))),
                                 t2.order)
            local0 = {"u1": t2, "u2": zero2}
            return inner_l * expr_mod.eval_jet(b_u1, local0) + inner_r

        t12 = integrate_jet(outer_u2, 0.0, env["u2"], var=1, order=order,
                            nodes=config.quad_nodes,
                            max_nodes=config.quad_max_nodes)
        t34 = integrate_jet(outer_u1, 0.0, env["u1"], var=0, order=order,
                            nodes=config.quad_nodes,
                            max_nodes=config.quad_max_nodes)
        return t12 + t34

    def x_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)
        return JetVec3(env["u1"], expr_mod.eval_jet(b_ast, env),
                       third_component(env, order))

    def omega_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)
        one = Jet.constant(np.ones(np.shape(np.asarray(u1, dtype=float))), order)
        zero = Jet.constant(np.zeros(np.shape(np.asarray(u1, dtype=float))), order)
        g2 = big_g(env, order)
        c3 = third_component(env, order)
        g1 = c3.deriv(0) - expr_mod.eval_jet(b_u1, env) * g2
        w1 = JetVec3(one, zero, g1)
        w2 = JetVec3(zero, one, g2)
        return w1, w2

    def lam_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)
        one = Jet.constant(np.ones(np.shape(np.asarray(u1, dtype=float))), order)
        zero = Jet.constant(np.zeros(np.shape(np.asarray(u1, dtype=float))), order)
        return [[one, expr_mod.eval_jet(b_u1, env)],
                [zero, expr_mod.eval_jet(b_u2, env)]]

    name = f"gen-extendable-nc[b={b};h={h};l={l};r={r}]"
    entry = CatalogEntry(
        name=name,
        description="frontal with extendable normal curvature from profiles",
        domain=domain,
        omega=None,
        lam=None,
        known={"lambda_det": s(b_u2), "b": b, "h": h, "l": l, "r": r},
        params={"b": b, "h": h, "l": l, "r": r},
        builder=lambda entry, cfg: Frontal(entry.name, x_fn, omega_fn,
                                           entry.domain, lam=lam_fn,
                                           source="generator", config=cfg),
    )
    return entry


def gen_nonparabolic(a="u1", b="u2", domain=(-1.0, 1.0, -1.0, 1.0),
                     config: Config = DEFAULT) -> CatalogEntry:
    """Non-parabolic normal form from a pair (a, b) with a_u2 = b_u1.

    y = (a, b, int_0^{u1}(t a_u1(t,u2) + u2 b_u1(t,u2)) dt
             + int_0^{u2} t b_u2(0,t) dt)
    with moving basis ((1,0,u1), (0,1,u2)) and factor equal to the
    Jacobian of (a, b).  The closure condition a_u2 = b_u1 is probed
    numerically at load.
    """
    a_ast = expr_mod.parse(a)
    b_ast = expr_mod.parse(b)
    diff = lambda a, v: expr_mod.simplify(expr_mod.differentiate(a, v))
    a_u1 = diff(a_ast, "u1")
    a_u2 = diff(a_ast, "u2")
    b_u1 = diff(b_ast, "u1")
    b_u2 = diff(b_ast, "u2")

    # closure check on a coarse grid
    g1, g2 = np.meshgrid(np.linspace(domain[0], domain[1], 9),
                         np.linspace(domain[2], domain[3], 9), indexing="ij")
    env_num = {"u1": g1, "u2": g2}
    gap = np.max(np.abs(np.asarray(expr_mod.eval_num(a_u2, env_num))
                        - np.asarray(expr_mod.eval_num(b_u1, env_num))))
    if gap > 1e-9:
        raise InputError(f"profiles violate a_u2 = b_u1 (gap {gap:.2e})")

    def x_fn(u1, u2, order):
        env = _jet_env(u1, u2, order)

        def first(t):
            local = {"u1": t, "u2": env["u2"]}
            return (t * expr_mod.eval_jet(a_u1, local)
                    + env["u2"] * expr_mod.eval_jet(b_u1, local))

        def second(t):
            zero1 = Jet.constant(np.zeros(np.shape(np.asarray(t.value))),
                                 t.order)
            return t * expr_mod.eval_jet(b_u2, {"u1": zero1, "u2": t})

        c3 = (integrate_jet(first, 0.0, env["u1"], var=0, order=order,
                            nodes=config.quad_nodes,
                            max_nodes=config.quad_max_nodes)
              + integrate_jet(second, 0.0, env["u2"], var=1, order=order,
                              nodes=config.quad_nodes,
                              max_nodes=config.quad_max_nodes))
        return JetVec3(expr_mod.eval_jet(a_ast, env),
                       expr_mod.eval_jet(b_ast, env), c3)

    s = expr_mod.to_source
    omega_srcs = (["1", "0", "u1"], ["0", "1", "u2"])
    lam_srcs = [s(a_u1), s(b_u1), s(a_u2), s(b_u2)]
    lam_det = s(expr_mod.simplify(expr_mod.parse(
        f"({s(a_u1)})*({s(b_u2)}) - ({s(b_u1)})*({s(a_u2)})")))
    name = f"gen-nonparabolic[a={a};b={b}]"
    entry = CatalogEntry(
        name=name,
        description="non-parabolic frontal normal form from a closed pair",
        domain=domain,
        omega=omega_srcs,
        lam=lam_srcs,
        known={"lambda_det": lam_det, "a": a, "b": b},
        params={"a": a, "b": b},
        builder=lambda entry, cfg: _build_generated(entry, cfg, x_fn),
    )
    return entry


def _collect_vars(node, out):
    if isinstance(node, expr_mod.Var):
        out.add(node.name)
    elif isinstance(node, expr_mod.Bin):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, expr_mod.Unary):
        _collect_vars(node.arg, out)
    elif isinstance(node, expr_mod.Pow):
        _collect_vars(node.base, out)


GENERATORS = {
    "gen-rank1-wavefront": (gen_rank1_wavefront, ("h", "c", "domain")),
    "gen-extendable-nc": (gen_extendable_nc, ("b", "h", "l", "r", "domain")),
    "gen-nonparabolic": (gen_nonparabolic, ("a", "b", "domain")),
}


def list_entries():
    return [ENTRIES[k].summary() for k in sorted(ENTRIES)]


def get_entry(name, params=None) -> CatalogEntry:
    """Fixed entry by name, or a generator entry with keyword params."""
    if name in ENTRIES:
        return ENTRIES[name]
    if name in GENERATORS:
        fn, allowed = GENERATORS[name]
        params = dict(params or {})
        bad = set(params) - set(allowed)
        if bad:
            raise InputError(f"unknown parameters for {name}: {sorted(bad)}")
        return fn(**params)
    raise InputError(f"no catalog entry or generator named {name!r}")
