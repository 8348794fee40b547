"""Positivity certificates for the perturbed fractional heat kernel.

The semigroup symbol is perturbed near zero frequency by eps * phi1(xi)
with phi1 a radial bump equal to 1 on |xi| <= 1/4 and 0 on |xi| >= 1/3.
The perturbation term

    F_eps(t, x) = F^{-1}[ e^{-t(2 pi |xi|)^alpha} (e^{-eps t phi1(xi)} - 1) ]

has an integrand supported in |xi| <= 1/3, so it is a cheap compact
radial transform; k_eps = p + F_eps.  For small eps the perturbed kernel
stays positive, which the certificates here establish pointwise on probe
grids (quadrature errors subtracted) plus an envelope comparison for the
far tail.  A positive kernel's L1 norm is its zero-frequency transform,
giving the decay identity ||k_eps(t, .)||_1 = e^(-eps t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .grid import BumpProfile, make_bump
from .kernel import (
    FractionalParams,
    ValueWithError,
    kernel_table,
    tail_series_mass,
    sphere_area,
)
from .radialquad import (
    QuadratureBudgetError,
    build_edges,
    panel_integral,
    radial_inverse_transform,
)

__all__ = [
    "PerturbedKernelSpec",
    "PositivityCertificate",
    "eval_F_eps",
    "eval_k_eps",
    "find_eps_star",
    "default_eps_grids",
    "banded_kernel_l1",
    "k_eps_l1",
]

# phi1 support: the perturbation integrand vanishes for |xi| >= 1/3.
_PHI1_SUPPORT = 1.0 / 3.0


@dataclass(frozen=True)
class PerturbedKernelSpec:
    """Kernel parameters plus perturbation size eps >= 0 (alpha < 2)."""

    params: FractionalParams
    eps: float
    phi1: BumpProfile = field(default_factory=lambda: make_bump("perturb_phi1"))

    def __post_init__(self):
        if self.params.alpha >= 2.0:
            raise ValueError("perturbation theory requires alpha < 2")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")


@dataclass
class PositivityCertificate:
    """Interval-certified positivity of k_eps on a probe grid.

    min_margin is the minimum over the grid of p - |F_eps| minus the
    accumulated quadrature/table errors; the certificate is positive iff
    min_margin > 0 and the tail comparison beyond the largest probed
    radius held (tail_bound_ok).
    """

    eps: float
    t_grid: tuple
    r_grids: dict
    min_margin: float
    tail_bound_ok: bool
    envelope_const: float
    time_doubling_const: float
    worst_point: tuple = ()

    @property
    def positive(self) -> bool:
        return self.min_margin > 0.0 and self.tail_bound_ok


def _F_envelope(alpha: float, t: float, eps: float, phi1: BumpProfile):
    def env(rho):
        return np.exp(-t * (2.0 * math.pi * rho) ** alpha) * np.expm1(
            -eps * t * phi1(rho)
        )

    return env


def eval_F_eps(
    spec: PerturbedKernelSpec, t: float, r: float, tol: float = 1e-12
) -> ValueWithError:
    """Perturbation term F_eps(t, r) by compact radial quadrature."""
    if not 0.0 < t <= 1.0:
        raise ValueError("the perturbation estimates hold for 0 < t <= 1")
    if spec.eps == 0.0:
        return ValueWithError(0.0, 0.0)
    a, d = spec.params.alpha, spec.params.dim
    env = _F_envelope(a, t, spec.eps, spec.phi1)
    val, err = radial_inverse_transform(env, d, r, _PHI1_SUPPORT, step=0.01)
    if err > tol:
        raise QuadratureBudgetError(
            f"F_eps quadrature err {err:.3g} > tol {tol:.3g} at (t={t}, r={r})"
        )
    return ValueWithError(val, err)


def eval_k_eps(
    spec: PerturbedKernelSpec, t: float, r: float, tol: float = 1e-10
) -> ValueWithError:
    """Perturbed kernel k_eps(t, r) = p(t, r) + F_eps(t, r)."""
    if not 0.0 < t <= 1.0:
        raise ValueError("the perturbation estimates hold for 0 < t <= 1")
    table = kernel_table(spec.params.alpha, spec.params.dim)
    pv, pe = table.eval_at(t, r)
    fv, fe = eval_F_eps(spec, t, r, tol)
    return ValueWithError(float(pv) + fv, float(pe) + fe)


class _CompactTransform:
    """Vectorized inverse transform of a fixed compact radial symbol.

    Precomputes Gauss nodes on [lo, hi] once; evaluating at an array of
    radii is then a single matrix product per Gauss order, and the
    12-vs-24-point difference gives a per-radius error estimate.
    """

    def __init__(self, envelope, dim, lo, hi, step=0.01):
        self.dim = dim
        edges = build_edges(lo, hi, step, grade_start=(lo == 0.0))
        a_, b_ = edges[:-1], edges[1:]
        self._sets = []
        for nodes, weights in (leggauss(12), leggauss(24)):
            mid = 0.5 * (a_ + b_)
            half = 0.5 * (b_ - a_)
            x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
            w = (half[:, None] * weights[None, :]).ravel()
            self._sets.append((x, w * envelope(x)))

    def _angular(self, rho, r):
        # kernel of the d-dimensional radial inverse transform
        two_pi = 2.0 * math.pi
        z = two_pi * np.multiply.outer(r, rho)
        if self.dim == 1:
            return 2.0 * np.cos(z)
        if self.dim == 2:
            from scipy.special import j0

            return two_pi * rho[None, :] * j0(z)
        if self.dim == 3:
            rr = np.asarray(r, dtype=float)[:, None]
            small = rr < 1e-12
            with np.errstate(invalid="ignore", divide="ignore"):
                out = 2.0 * rho[None, :] * np.sin(z) / rr
            out = np.where(small, 4.0 * math.pi * rho[None, :] ** 2, out)
            return out
        raise ValueError("dim must be 1, 2, or 3")

    def eval(self, radii):
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        out = []
        for rho, w in self._sets:
            out.append(self._angular(rho, radii) @ w)
        lo_v, hi_v = out
        return hi_v, np.abs(hi_v - lo_v) + 1e-15 * np.abs(hi_v)


def default_eps_grids(params: FractionalParams, n_r: int = 24):
    """Probe grids: dyadic t in (0, 1], log-spaced radii up to 50 t^(1/alpha)."""
    t_grid = tuple(2.0 ** (-k) for k in range(7))
    r_grids = {}
    for t in t_grid:
        scale = t ** (1.0 / params.alpha)
        radii = [0.0] + list(np.geomspace(1e-3 * scale, 50.0 * scale, n_r))
        r_grids[t] = tuple(radii)
    return t_grid, r_grids


def _certify(params, eps, t_grid, r_grids, tol):
    """Pointwise positivity margins plus the tail envelope comparison."""
    table = kernel_table(params.alpha, params.dim)
    min_margin = math.inf
    worst = ()
    env_const = 0.0
    doubling_const = 0.0
    phi1 = make_bump("perturb_phi1")
    for t in t_grid:
        radii = np.asarray(r_grids[t], dtype=float)
        pv, pe = table.eval_at(t, radii)
        if eps > 0.0:
            tr = _CompactTransform(
                _F_envelope(params.alpha, t, eps, phi1),
                params.dim,
                0.0,
                _PHI1_SUPPORT,
            )
            fv, fe = tr.eval(radii)
        else:
            fv = np.zeros_like(radii)
            fe = np.zeros_like(radii)
        margins = pv - np.abs(fv) - pe - fe
        i = int(np.argmin(margins))
        if margins[i] < min_margin:
            min_margin = float(margins[i])
            worst = (t, float(radii[i]))
        p2v, p2e = table.eval_at(2.0 * t, radii)
        if eps > 0.0:
            ratios = (np.abs(fv) + fe) / (eps * np.maximum(p2v - p2e, 1e-300))
            env_const = max(env_const, float(ratios.max()))
        doubling = (p2v + p2e) / np.maximum(pv - pe, 1e-300)
        doubling_const = max(doubling_const, float(doubling.max()))
    tail_ok = eps == 0.0 or (env_const * doubling_const * eps < 1.0)
    return PositivityCertificate(
        eps=eps,
        t_grid=tuple(t_grid),
        r_grids={t: tuple(r_grids[t]) for t in t_grid},
        min_margin=min_margin,
        tail_bound_ok=bool(tail_ok),
        envelope_const=env_const,
        time_doubling_const=doubling_const,
        worst_point=worst,
    )


def find_eps_star(
    params: FractionalParams,
    t_grid=None,
    r_grids=None,
    tol: float = 1e-12,
    eps_hi: float = 1.0,
    bisect_steps: int = 20,
):
    """Largest certified eps by bisection on [0, eps_hi].

    Returns (eps_star, certificate).  eps_star = 0 with the trivial
    certificate signals a tolerance problem: positivity at some small
    eps > 0 is guaranteed for alpha < 2.
    """
    if params.alpha >= 2.0:
        raise ValueError("perturbation theory requires alpha < 2")
    if t_grid is None or r_grids is None:
        t_grid, r_grids = default_eps_grids(params)
    lo, lo_cert = 0.0, _certify(params, 0.0, t_grid, r_grids, tol)
    hi = eps_hi
    hi_cert = _certify(params, hi, t_grid, r_grids, tol)
    if hi_cert.positive:
        return hi, hi_cert
    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        cert = _certify(params, mid, t_grid, r_grids, tol)
        if cert.positive:
            lo, lo_cert = mid, cert
        else:
            hi = mid
    return lo, lo_cert


def k_eps_l1(spec: PerturbedKernelSpec, t: float) -> ValueWithError:
    """L1 norm of k_eps(t, .) by x-space quadrature plus exact tail algebra.

    Splitting the symbol as e^(-eps t) e^(-t(2 pi rho)^alpha) plus a smooth
    compactly-rooted correction (which integrates to zero over R^d), the
    |k_eps| integral inside radius R is numeric and the tail reduces to the
    kernel power-tail series.  For a certified-positive kernel the result
    equals e^(-eps t) within the returned error bound.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError("the perturbation estimates hold for 0 < t <= 1")
    a, d = spec.params.alpha, spec.params.dim
    eps = spec.eps
    table = kernel_table(a, d)
    radius = 30.0 * t ** (1.0 / a)
    sphere = sphere_area(d)
    tr = (
        _CompactTransform(_F_envelope(a, t, eps, spec.phi1), d, 0.0, _PHI1_SUPPORT)
        if eps > 0.0
        else None
    )
    edges = build_edges(0.0, radius, min(0.25, radius / 64.0), grade_start=True)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * (edges[1:] - edges[:-1])

    def integrals(rule):
        nodes, weights = leggauss(rule)
        r = (mids[:, None] + halves[:, None] * nodes[None, :]).ravel()
        w = (halves[:, None] * weights[None, :]).ravel()
        pv, pe = table.eval_at(t, r)
        if tr is None:
            fv = np.zeros_like(r)
            fe = np.zeros_like(r)
        else:
            fv, fe = tr.eval(r)
        meas = sphere * r ** (d - 1) * w
        return (
            float(np.abs(pv + fv) @ meas),
            float(pv @ meas),
            float(fv @ meas),
            float((pe + fe) @ np.abs(meas)),
        )

    abs_lo, p_lo, f_lo, _ = integrals(12)
    m_abs, m_p, m_f, m_err = integrals(24)
    e_abs = abs(m_abs - abs_lo) + 1e-15 * abs(m_abs)
    e_p = abs(m_p - p_lo) + 1e-15 * abs(m_p)
    e_f = abs(m_f - f_lo) + 1e-15 * abs(m_f)
    # integral_{r>R} k_eps = e^(-eps t) T_t(R) - int_0^R [F - (e^(-eps t)-1) p]
    # because the smooth symbol correction integrates to zero over R^d.
    u_R = radius * t ** (-1.0 / a)
    t_mass, t_err = tail_series_mass(a, d, u_R)
    decay = math.exp(-eps * t)
    tail = decay * t_mass - m_f + (decay - 1.0) * m_p
    value = m_abs + tail
    err = e_abs + e_f + abs(decay - 1.0) * e_p + decay * t_err + 2.0 * m_err
    return ValueWithError(float(value), float(err))


def _fourth_derivative_mass(env, lo, hi, h=4e-3):
    """Bound on int |d^4 env / d rho^4| via a five-point stencil, padded 30%."""
    pad = 4 * h
    x = np.arange(lo - pad, hi + pad + h, h)
    f = env(x)
    d4 = (f[:-4] - 4 * f[1:-3] + 6 * f[2:-2] - 4 * f[3:-1] + f[4:]) / h**4
    return 1.3 * float(np.abs(d4).sum() * h)


def banded_kernel_l1(
    alpha: float, dim: int = 1, t: float = 0.0, tol: float = 1e-9
) -> ValueWithError:
    """L1 norm of the band-restricted semigroup kernel F^{-1}(psi e^{-t .}).

    psi = phi(xi) - phi(2 xi) is the unit-scale Littlewood-Paley window, so
    the symbol lives on 1/2 <= |xi| <= 2 and the kernel is smooth, rapidly
    decaying, signed, and mean-zero: the norm is assembled from integrals
    between consecutive sign changes of the kernel.  t = 0 gives the norm
    of F^{-1} psi.  The tail beyond the scan radius is certified by a
    fourth-order integration-by-parts bound for dim = 1 (estimate only for
    dim 2, 3).
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0, 2]")
    phi = make_bump("lp_phi")

    def env(rho):
        rho = np.asarray(rho, dtype=float)
        psi = phi(rho) - phi(2.0 * rho)
        if t == 0.0:
            return psi
        return psi * np.exp(-t * (2.0 * math.pi * np.abs(rho)) ** alpha)

    # GL24 integrates several oscillation periods per panel; at the largest
    # scanned radius the phase advances 2 pi * 40 * step ~ 5 rad per panel.
    tr = _CompactTransform(env, dim, 0.45, 2.05, step=0.02)
    sphere = sphere_area(dim)
    r_stop = 40.0

    # locate sign changes of g on a fine scan grid, refine by bisection
    scan = np.arange(0.0, r_stop + 0.01, 0.02)
    gv, ge = tr.eval(scan)
    boundaries = [0.0]
    for i in range(1, len(scan)):
        if gv[i - 1] * gv[i] < 0.0:
            lo_r, hi_r = scan[i - 1], scan[i]
            f_lo = gv[i - 1]
            for _ in range(50):
                mid = 0.5 * (lo_r + hi_r)
                fm = float(tr.eval([mid])[0][0])
                if fm == 0.0:
                    lo_r = hi_r = mid
                    break
                if (fm > 0.0) == (f_lo > 0.0):
                    lo_r, f_lo = mid, fm
                else:
                    hi_r = mid
            boundaries.append(0.5 * (lo_r + hi_r))
    boundaries.append(r_stop)
    del ge

    nodes24, weights24 = leggauss(24)
    total = 0.0
    err = 0.0
    for a_, b_ in zip(boundaries[:-1], boundaries[1:]):
        if b_ - a_ < 1e-14:
            continue
        sub = build_edges(a_, b_, 0.1)
        mids = 0.5 * (sub[:-1] + sub[1:])
        halves = 0.5 * (sub[1:] - sub[:-1])
        r_nodes = (mids[:, None] + halves[:, None] * nodes24[None, :]).ravel()
        g_nodes, g_errs = tr.eval(r_nodes)
        dens = g_nodes * sphere * np.maximum(r_nodes, 1e-300) ** (dim - 1)
        w = (halves[:, None] * weights24[None, :]).ravel()
        piece = float(dens @ w)
        total += abs(piece)
        err += float((g_errs * sphere * r_nodes ** (dim - 1)) @ np.abs(w))
    # tail bound: four integrations by parts against the oscillation
    c4 = _fourth_derivative_mass(env, 0.45, 2.05)
    if dim == 1:
        g_bound = 2.0 * c4 / (2.0 * math.pi * r_stop) ** 4
        tail = 2.0 * g_bound * r_stop / 3.0  # = int_R^inf 2 C (R/r)^4 dr
    else:
        # same decay order; the angular factor is bounded by its 1-d mass
        g_bound = sphere * c4 * 2.05 ** (dim - 1) / (2.0 * math.pi * r_stop) ** 4
        tail = sphere * g_bound * r_stop ** (dim - 1) * r_stop / (4.0 - dim)
    return ValueWithError(float(total), float(err + tail))
