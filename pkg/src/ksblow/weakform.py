"""Weak-formulation residual of the mass-function equation against smooth
compactly supported space-time test fields.

A trajectory W approximately satisfies, for every smooth zeta(s, t) of
compact support in [0, infinity) x [0, infinity),

    - int int zeta_t W - int zeta(.,0) W0
        = n^2 int int (s^((2n-2)/n) zeta)_ss W
          - 1/2 int int zeta_s W^2
          - n int int (F zeta)_s W .

The residual is the absolute mismatch of the two sides with every integral
evaluated by composite Gauss-Legendre panels over the trajectory's mesh
cells and snapshot intervals, applied to the closed-form field factors times
the bilinear interpolant of W (linear in s on each cell, linear in t between
snapshots).

The library fields are tensor products of polynomial windows: the space
factor is the C^7 bump (1 - x^2)^8 and the time factor either that bump or a
C^3 septic-smoothstep step-down that equals one at t = 0 (so the
initial-data term is exercised).  Polynomial factors are what make the
composite quadrature exact for them (Gauss-Legendre of order 12 integrates
the degree <= 18 products against the piecewise-linear interpolant without
error), so structural cancellations -- a field supported where W sits at its
far-field constant -- survive at roundoff level instead of drowning in
quadrature noise; an exponential-type bump would leak ~1e-6 through its
steep edge layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .signal import SignalProfile
from .solver import Trajectory

_GL_ORDER = 12
_MAX_PANEL_FRACTION = 1.0 / 8.0
_BUMP_POWER = 8


@dataclass(frozen=True)
class BumpFactor:
    """Polynomial bump (1 - x^2)^8 scaled to (lo, hi); zero outside, C^7."""

    lo: float
    hi: float

    def _x(self, v):
        return (2.0 * np.asarray(v, dtype=float) - (self.hi + self.lo)) / (self.hi - self.lo)

    def value(self, v):
        x = self._x(v)
        inside = np.abs(x) < 1.0
        one = np.where(inside, 1.0 - x * x, 0.0)
        return one ** _BUMP_POWER

    def d1(self, v):
        x = self._x(v)
        inside = np.abs(x) < 1.0
        one = np.where(inside, 1.0 - x * x, 0.0)
        m = 2.0 / (self.hi - self.lo)
        return -2.0 * _BUMP_POWER * x * one ** (_BUMP_POWER - 1) * m

    def d2(self, v):
        x = self._x(v)
        inside = np.abs(x) < 1.0
        one = np.where(inside, 1.0 - x * x, 0.0)
        m = 2.0 / (self.hi - self.lo)
        k = _BUMP_POWER
        val = (-2.0 * k * one ** (k - 1)
               + 4.0 * k * (k - 1) * x * x * one ** (k - 2))
        return val * m * m

    @property
    def support(self):
        return (self.lo, self.hi)


def _septic(u):
    """Septic smoothstep: 0 -> 1 on [0, 1] with three vanishing derivatives
    at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))


def _septic_d1(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (140.0 + u * (-420.0 + u * (420.0 - 140.0 * u)))


@dataclass(frozen=True)
class StepDownFactor:
    """Equals 1 on [0, hi - width], descends along a septic smoothstep
    (polynomial, C^3) to 0 at hi."""

    hi: float
    width: float

    def value(self, t):
        t = np.asarray(t, dtype=float)
        u = (self.hi - t) / self.width
        return np.where(t <= self.hi - self.width, 1.0,
                        np.where(t >= self.hi, 0.0, _septic(u)))

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        u = (self.hi - t) / self.width
        ramp = (t > self.hi - self.width) & (t < self.hi)
        return np.where(ramp, -_septic_d1(u) / self.width, 0.0)

    @property
    def support(self):
        return (0.0, self.hi)


@dataclass(frozen=True)
class TestField:
    """Tensor-product field zeta(s, t) = g(s) * sigma(t) with closed-form
    derivatives."""

    __test__ = False  # not a pytest class despite the name

    name: str
    s_factor: BumpFactor
    t_factor: object  # BumpFactor or StepDownFactor

    @property
    def s_support(self):
        return self.s_factor.support

    @property
    def t_support(self):
        return self.t_factor.support


def field_library(s_max: float, t_end: float, epsilon: float = 0.0,
                  constant_window: float = 5e-4) -> dict:
    """The standard four test fields, scaled to the computed domain.

    ``origin_window`` keeps clear of the cutoff region [0, epsilon] so the
    regularized run satisfies the unregularized identity on its support.
    ``constant_state`` sits where W stays at its far-field constant over a
    short initial window, the structural-cancellation case.
    """
    lo_origin = max(4.0 * epsilon, 0.0125 * s_max)
    return {
        "interior": TestField("interior", BumpFactor(0.075 * s_max, 0.45 * s_max),
                              BumpFactor(0.25 * t_end, 0.85 * t_end)),
        "initial": TestField("initial", BumpFactor(0.125 * s_max, 0.625 * s_max),
                             StepDownFactor(hi=0.9 * t_end, width=0.4 * t_end)),
        "origin_window": TestField("origin_window",
                                   BumpFactor(lo_origin, 0.2 * s_max),
                                   StepDownFactor(hi=0.7 * t_end, width=0.3 * t_end)),
        "constant_state": TestField("constant_state",
                                    BumpFactor(0.6 * s_max, 0.9 * s_max),
                                    StepDownFactor(hi=min(constant_window, 0.25 * t_end),
                                                   width=0.5 * min(constant_window,
                                                                   0.25 * t_end))),
    }


def _panels(edges_raw, lo, hi, extra, max_width):
    """Sorted panel edges covering [lo, hi]: domain edges within the window,
    the window ends, ``extra`` internal breakpoints, wide panels subdivided."""
    pts = [lo, hi]
    pts.extend(float(e) for e in edges_raw if lo < e < hi)
    pts.extend(float(e) for e in extra if lo < e < hi)
    pts = np.unique(np.asarray(pts, dtype=float))
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(math.ceil((b - a) / max_width)))
        out.append(np.linspace(a, b, k + 1))
    return np.unique(np.concatenate(out))


@dataclass(frozen=True)
class ResidualReport:
    field: str
    residual: float
    scale: float
    terms: dict

    @property
    def relative(self) -> float:
        return self.residual / self.scale


def weak_residual(traj: Trajectory, zeta: TestField, profile: SignalProfile,
                  gl_order: int = _GL_ORDER) -> ResidualReport:
    """Residual of the weak identity for one test field.

    Raises when the field support exceeds the computed space-time domain.
    """
    s_nodes = traj.mesh.nodes
    times = np.asarray(traj.times, dtype=float)
    s_lo, s_hi = zeta.s_support
    t_lo, t_hi = zeta.t_support
    if s_lo < 0.0 or s_hi > traj.mesh.s_max:
        raise ParameterError(
            f"field {zeta.name!r} s-support ({s_lo}, {s_hi}) exceeds [0, {traj.mesh.s_max}]")
    if t_lo < 0.0 or t_hi > times[-1]:
        raise ParameterError(
            f"field {zeta.name!r} t-support ({t_lo}, {t_hi}) exceeds [0, {times[-1]}]")
    needs_initial = t_lo == 0.0
    if needs_initial and times[0] != 0.0:
        raise ParameterError("field touches t = 0 but the trajectory lacks that snapshot")

    n = _dimension(traj)
    p = (2.0 * n - 2.0) / n

    nodes_gl, weights_gl = np.polynomial.legendre.leggauss(gl_order)

    s_edges = _panels(s_nodes, s_lo, s_hi, extra=(),
                      max_width=(s_hi - s_lo) * _MAX_PANEL_FRACTION)
    t_extra = []
    if isinstance(zeta.t_factor, StepDownFactor):
        t_extra.append(zeta.t_factor.hi - zeta.t_factor.width)
    t_edges = _panels(times, t_lo, t_hi, extra=t_extra,
                      max_width=(t_hi - t_lo) * _MAX_PANEL_FRACTION)

    def gl_points(edges):
        a, b = edges[:-1], edges[1:]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        pts = (mid[:, None] + half[:, None] * nodes_gl[None, :]).ravel()
        wts = (half[:, None] * weights_gl[None, :]).ravel()
        return pts, wts

    sp, sw = gl_points(s_edges)
    tp, tw = gl_points(t_edges)

    # bilinear interpolant of W at all (sp, tp)
    w_rows = np.stack([np.interp(sp, s_nodes, w) for w in traj.snapshots])  # (K, P)
    idx = np.clip(np.searchsorted(times, tp, side="right") - 1, 0, times.size - 2)
    frac = (tp - times[idx]) / (times[idx + 1] - times[idx])
    W = w_rows[idx] * (1.0 - frac[:, None]) + w_rows[idx + 1] * frac[:, None]  # (Q, P)

    g = zeta.s_factor.value(sp)
    g1 = zeta.s_factor.d1(sp)
    g2 = zeta.s_factor.d2(sp)
    sig = np.asarray(zeta.t_factor.value(tp), dtype=float)
    sig1 = np.asarray(zeta.t_factor.d1(tp), dtype=float)
    F = np.asarray(profile.F(sp), dtype=float)
    Fs = np.asarray(profile.F_s(sp), dtype=float)

    diff_kernel = (p * (p - 1.0) * np.power(sp, p - 2.0) * g
                   + 2.0 * p * np.power(sp, p - 1.0) * g1
                   + np.power(sp, p) * g2)
    forcing_kernel = Fs * g + F * g1

    def double(kernel_s, kernel_t, data):
        inner = data @ (sw * kernel_s)          # (Q,)
        return float(np.dot(tw * kernel_t, inner))

    term_time = double(g, sig1, W)              # int int zeta_t W
    term_diff = double(diff_kernel, sig, W)     # int int (s^p zeta)_ss W
    term_adv = double(g1, sig, W * W)           # int int zeta_s W^2
    term_forcing = double(forcing_kernel, sig, W)
    if needs_initial:
        w0 = np.interp(sp, s_nodes, traj.snapshots[0])
        sigma0 = float(np.asarray(zeta.t_factor.value(0.0)))
        term_initial = sigma0 * float(np.dot(sw * g, w0))
    else:
        term_initial = 0.0

    lhs = -term_time - term_initial
    rhs = n * n * term_diff - 0.5 * term_adv - n * term_forcing
    terms = {
        "time": term_time,
        "initial": term_initial,
        "diffusion": n * n * term_diff,
        "advection": 0.5 * term_adv,
        "forcing": n * term_forcing,
    }
    scale = max(max(abs(v) for v in terms.values()), 1e-300)
    return ResidualReport(field=zeta.name, residual=abs(lhs - rhs), scale=scale, terms=terms)


def _dimension(traj: Trajectory) -> int:
    n = traj.metadata.get("n")
    if n is None:
        raise ParameterError("trajectory metadata lacks the dimension n")
    return int(n)
