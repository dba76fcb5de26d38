"""Derivative jumps across the interface from problem data.

All jumps use one convention: [v] = v_plus - v_minus with the normal
pointing from the minus into the plus region.  The flux datum of the
Poisson problem sums outward normal derivatives from both sides, so it
enters the table as [D_n u] = -beta.

Entries of order ell are produced from order ell-1 by differentiating
g(s) = [D_t^a D_n^b u](X(s)) along the curve.  The fixed direction vectors
rotate with arc length (dt/ds = -kappa n, dn/ds = kappa t), which yields

    g'(s) = [D_t^{a+1} D_n^b u] - a kappa [D_t^{a-1} D_n^{b+1} u]
                                + b kappa [D_t^{a+1} D_n^{b-1} u],

solved for the new entry; pure-normal entries come from the PDE instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DataOrderError

NUMERIC_DIFF_STEP = 1e-5


class ArcFunction:
    """Scalar function of the arc parameter with derivatives on demand.

    Derivatives of sums and products are formed symbolically, so chains
    built from analytic leaves stay analytic; leaves without a supplied
    derivative fall back to fourth-order central differences.
    """

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self):
        return NumericDerivative(self)

    def __add__(self, other):
        return SumArc(self, _as_arc(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SumArc(self, ScaledArc(-1.0, _as_arc(other)))

    def __rsub__(self, other):
        return SumArc(_as_arc(other), ScaledArc(-1.0, self))

    def __neg__(self):
        return ScaledArc(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, ArcFunction):
            return ProductArc(self, other)
        return ScaledArc(float(other), self)

    __rmul__ = __mul__


def _as_arc(obj):
    if isinstance(obj, ArcFunction):
        return obj
    return ConstArc(float(obj))


class ConstArc(ArcFunction):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, s):
        return self.value

    def derivative(self):
        return ConstArc(0.0)


class CallableArc(ArcFunction):
    """Leaf function; `derivatives` is an optional chain of callables for
    successive derivatives, after which numeric differentiation takes over."""

    def __init__(self, fn, derivatives=()):
        self.fn = fn
        self.chain = tuple(derivatives)

    def __call__(self, s):
        return float(self.fn(s))

    def derivative(self):
        if self.chain:
            return CallableArc(self.chain[0], self.chain[1:])
        return NumericDerivative(self)


class HarmonicArc(ArcFunction):
    """amp * cos(omega * s + phase); closed under differentiation."""

    def __init__(self, amp, omega, phase=0.0):
        self.amp, self.omega, self.phase = float(amp), float(omega), float(phase)

    def __call__(self, s):
        return self.amp * np.cos(self.omega * s + self.phase)

    def derivative(self):
        return HarmonicArc(-self.amp * self.omega, self.omega, self.phase + 0.5 * np.pi)


class SumArc(ArcFunction):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, s):
        return self.a(s) + self.b(s)

    def derivative(self):
        return SumArc(self.a.derivative(), self.b.derivative())


class ScaledArc(ArcFunction):
    def __init__(self, c, f):
        self.c, self.f = float(c), f

    def __call__(self, s):
        return self.c * self.f(s)

    def derivative(self):
        return ScaledArc(self.c, self.f.derivative())


class ProductArc(ArcFunction):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, s):
        return self.a(s) * self.b(s)

    def derivative(self):
        return SumArc(ProductArc(self.a.derivative(), self.b),
                      ProductArc(self.a, self.b.derivative()))


class NumericDerivative(ArcFunction):
    """Fourth-order central difference fallback."""

    def __init__(self, f, step=NUMERIC_DIFF_STEP):
        self.f, self.step = f, float(step)

    def __call__(self, s):
        h = self.step
        f = self.f
        return (-f(s + 2 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2 * h)) / (12.0 * h)


@dataclass
class JumpTable:
    """All derivative jumps [D_t^a D_n^b u] with a + b <= degree at one point."""

    degree: int
    s: float
    point: np.ndarray
    entries: dict  # (a, b) -> float

    def entry(self, a, b):
        return self.entries[(a, b)]


def rotate_jumps_to_eta(table, a, b, ell):
    """Jump of the ell-th derivative in the direction eta = a n + b t."""
    if abs(a * a + b * b - 1.0) > 1e-12:
        raise ValueError("eta components must satisfy a^2 + b^2 = 1")
    if ell > table.degree:
        raise DataOrderError(f"table holds orders <= {table.degree}, requested {ell}")
    return sum(comb(ell, j) * a**j * b**(ell - j) * table.entry(ell - j, j)
               for j in range(ell + 1))


@dataclass
class InterfaceData:
    """Data of the scalar interface problem along the curve.

    `beta` is the flux datum in the sum-of-outward-normals convention;
    `f_jumps` maps (a, b) to the jump [D_t^a D_n^b f] for a + b <= k - 2;
    `curvature` is the signed curvature along the parametrization.
    """

    beta: ArcFunction
    curvature: ArcFunction
    f_jumps: dict = field(default_factory=dict)

    def f_jump(self, a, b):
        try:
            return self.f_jumps[(a, b)]
        except KeyError:
            raise DataOrderError(
                f"interface data lacks the jump of D_t^{a} D_n^{b} f") from None


def _extend_entries(entries, kappa, pde_terms, order):
    """Fill order-`order` entries from the previous orders.

    `pde_terms[(0, order)]` must supply the ArcFunction F with
    [D_n^order u] = F - [D_t^2 D_n^{order-2} u].
    """
    for i in range(order, 0, -1):
        j = order - i
        g = entries[(i - 1, j)].derivative()
        val = g
        if i >= 2:
            val = val + (i - 1) * (kappa * entries[(i - 2, j + 1)])
        if j >= 1:
            val = val - j * (kappa * entries[(i, j - 1)])
        entries[(i, j)] = val
    entries[(0, order)] = pde_terms - entries[(2, order - 2)]


def build_jump_entries(data, k):
    """ArcFunctions for every jump entry of the scalar problem up to order k."""
    entries = {(0, 0): ConstArc(0.0)}
    if k >= 1:
        entries[(1, 0)] = ConstArc(0.0)
        entries[(0, 1)] = ScaledArc(-1.0, data.beta)
    for order in range(2, k + 1):
        # -D_n^2 u - D_t^2 u = f on each side, so
        # [D_n^order u] = -[D_t^a D_n^{order-2} f] - [D_t^2 D_n^{order-2} u].
        _extend_entries(entries, data.curvature,
                        ScaledArc(-1.0, data.f_jump(0, order - 2)), order)
    return entries


def evaluate_entries(entries, curve, s, k):
    vals = {key: fn(s) for key, fn in entries.items() if sum(key) <= k}
    return JumpTable(k, float(s), curve.point_at(s), vals)


def build_jump_table(data, curve, s, k):
    """Jump table of the scalar problem at arc parameter s."""
    entries = build_jump_entries(data, k)
    return evaluate_entries(entries, curve, s, k)


@dataclass
class StokesInterfaceData:
    """Traction jump data of the Stokes problem along the curve.

    `beta1`, `beta2` are the Cartesian components of the interface force;
    `normal1`, `normal2` the components of the unit normal along the
    parametrization (the tangent is the normal rotated +90 degrees).
    Jumps of the momentum source enter through `fvec_jumps` (per component)
    and `fdiv_jumps` ([D_t^a D_n^b (div f)]) and are only needed for
    velocity and pressure tables of order >= 2.
    """

    beta1: ArcFunction
    beta2: ArcFunction
    normal1: ArcFunction
    normal2: ArcFunction
    curvature: ArcFunction
    fvec_jumps: dict = field(default_factory=dict)   # (c, a, b) -> ArcFunction
    fdiv_jumps: dict = field(default_factory=dict)   # (a, b) -> ArcFunction

    def beta_normal(self):
        return ProductArc(self.beta1, self.normal1) + ProductArc(self.beta2, self.normal2)

    def beta_tangent(self):
        # t = (-n2, n1)
        return ProductArc(self.beta2, self.normal1) - ProductArc(self.beta1, self.normal2)


def build_pressure_entries(data, k):
    """Pressure jump entries: [p] = beta.n, [D_n p] = d/ds(beta.t) and, for
    higher orders, the recurrence with the PDE  lap p = div f."""
    bn = data.beta_normal()
    bt = data.beta_tangent()
    entries = {(0, 0): bn}
    if k >= 1:
        entries[(1, 0)] = bn.derivative()
        entries[(0, 1)] = bt.derivative()
    for order in range(2, k + 1):
        try:
            fd = data.fdiv_jumps[(0, order - 2)]
        except KeyError:
            raise DataOrderError(
                f"pressure jumps of order {order} need [D_n^{order - 2} div f]"
            ) from None
        _extend_entries(entries, data.curvature, fd, order)
    return entries


def build_velocity_entries(data, k, pressure_entries=None):
    """Velocity-component jump entries.

    Seeds: [u] = 0 and [D_n u] = -beta + (beta.n) n; the PDE for higher
    orders is  lap u_c = (grad p - f)_c, with grad-p jumps rotated back to
    Cartesian components from the pressure table.
    """
    bn = data.beta_normal()
    n = (data.normal1, data.normal2)
    t = (ScaledArc(-1.0, data.normal2), data.normal1)
    beta = (data.beta1, data.beta2)
    per_component = []
    for c in range(2):
        entries = {(0, 0): ConstArc(0.0)}
        if k >= 1:
            entries[(1, 0)] = ConstArc(0.0)
            entries[(0, 1)] = ScaledArc(-1.0, beta[c]) + ProductArc(bn, n[c])
        for order in range(2, k + 1):
            if pressure_entries is None or (c, 0, order - 2) not in data.fvec_jumps:
                raise DataOrderError(
                    f"velocity jumps of order {order} need pressure jumps "
                    f"and momentum-source jumps")
            # [(grad p)_c] = [D_n p] n_c + [D_t p] t_c, differentiated
            # (order - 2) times in the normal direction is not available in
            # closed form; order 2 uses the first-order pressure entries.
            if order > 2:
                raise DataOrderError(
                    "velocity jump recurrence is implemented for orders <= 2")
            grad_p_c = (ProductArc(pressure_entries[(0, 1)], n[c])
                        + ProductArc(pressure_entries[(1, 0)], t[c]))
            rhs = grad_p_c - data.fvec_jumps[(c, 0, 0)]
            _extend_entries(entries, data.curvature, rhs, order)
        per_component.append(entries)
    return per_component


def stokes_jump_tables(data, curve, s, k):
    """(velocity tables per component, pressure table) at arc parameter s."""
    p_entries = build_pressure_entries(data, k)
    u_entries = build_velocity_entries(data, k, p_entries)
    u_tables = tuple(evaluate_entries(e, curve, s, k) for e in u_entries)
    p_table = evaluate_entries(p_entries, curve, s, k)
    return u_tables, p_table
