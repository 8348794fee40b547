"""Discrete function calculus on a uniform periodic sampling box.

Functions live on a d-dimensional torus of side L sampled at n points per
axis (n a power of two).  All frequency-side objects use the convention
that the lattice mode k (integer vector) represents the physical
frequency xi = k / L, so the fractional Laplacian multiplier is
(2 pi |k| / L)^alpha.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "BumpProfile",
    "make_bump",
    "SpectralMultiplier",
    "FrequencyAnnulus",
    "GridFunction",
    "grid_points",
    "sample_function",
    "lp_project",
    "apply_multiplier",
    "lebesgue_norm",
    "bernstein_pairing",
    "maximal_function",
    "fractional_laplacian_symbol",
    "semigroup_symbol",
    "perturbed_semigroup_symbol",
    "save_grid_function",
    "load_grid_function",
    "grid_function_to_bytes",
    "grid_function_from_bytes",
]

# Imaginary parts of nominally real samples must stay below this times the
# sup norm, per the real-function contract.
REAL_IMAG_TOL = 1e-10


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 for u <= 0, 1 for u >= 1.

    S(u) = B(u) / (B(u) + B(1-u)) with B(u) = exp(-1/u) for u > 0.  The
    plateau values are exact (0.0 and 1.0 in floating point).
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        bu = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        bv = np.where(1.0 - u > 0.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    out = np.empty_like(u)
    hi = bv == 0.0
    lo = bu == 0.0
    mid = ~(hi | lo)
    out[hi] = 1.0
    out[lo] = 0.0
    out[mid] = bu[mid] / (bu[mid] + bv[mid])
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Smooth radial cutoff: 1 on [0, inner], 0 on [outer, inf), monotone.

    The transition is the standard exponential partition-of-unity step
    evaluated on (outer - r) / (outer - inner).
    """

    kind: str
    inner_radius: float
    outer_radius: float

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        u = (self.outer_radius - r) / (self.outer_radius - self.inner_radius)
        return _smoothstep(u)


def make_bump(kind: str) -> BumpProfile:
    """The two radial cutoffs used throughout: lp_phi and perturb_phi1."""
    if kind == "lp_phi":
        return BumpProfile(kind, 1.0, 2.0)
    if kind == "perturb_phi1":
        return BumpProfile(kind, 0.25, 1.0 / 3.0)
    raise ValueError(f"unknown bump kind {kind!r}")


@dataclass(frozen=True)
class FrequencyAnnulus:
    """Closed frequency annulus A1 <= |xi| <= A2."""

    A1: float
    A2: float

    def __post_init__(self):
        if not 0.0 < self.A1 < self.A2:
            raise ValueError(f"need 0 < A1 < A2, got ({self.A1}, {self.A2})")


@dataclass(frozen=True)
class SpectralMultiplier:
    """Radial Fourier multiplier: symbol acts on frequency vectors.

    ``symbol`` receives an array of shape (..., d) of physical frequencies
    and returns the (possibly complex) multiplier values of shape (...).
    Every multiplier used here is radial; ``radial`` exposes the profile.
    """

    radial: Callable[[np.ndarray], np.ndarray]
    label: str

    def symbol(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.radial(np.sqrt((xi * xi).sum(axis=-1)))


def fractional_laplacian_symbol(alpha: float) -> SpectralMultiplier:
    return SpectralMultiplier(
        radial=lambda rho: (2.0 * math.pi * rho) ** alpha,
        label=f"|grad|^{alpha:g}",
    )


def semigroup_symbol(alpha: float, t: float) -> SpectralMultiplier:
    return SpectralMultiplier(
        radial=lambda rho: np.exp(-t * (2.0 * math.pi * rho) ** alpha),
        label=f"exp(-{t:g}|grad|^{alpha:g})",
    )


def perturbed_semigroup_symbol(alpha: float, t: float, eps: float) -> SpectralMultiplier:
    phi1 = make_bump("perturb_phi1")
    return SpectralMultiplier(
        radial=lambda rho: np.exp(
            -t * ((2.0 * math.pi * rho) ** alpha + eps * phi1(rho))
        ),
        label=f"exp(-{t:g}(|grad|^{alpha:g} + {eps:g} phi1))",
    )


@dataclass
class GridFunction:
    """Complex samples of a function on the periodic box [0, L)^d.

    values is an ndarray of shape (n,) * dim in row-major order; is_real
    asserts a Hermitian-symmetric spectrum (real samples).  Values are
    frozen after construction; operations return fresh instances.
    """

    dim: int
    box_len: float
    n: int
    values: np.ndarray
    is_real: bool = True

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.n,) * self.dim:
            raise ValueError(
                f"values shape {vals.shape} != {(self.n,) * self.dim}"
            )
        if self.is_real:
            sup = float(np.abs(vals).max()) or 1.0
            if float(np.abs(vals.imag).max()) > REAL_IMAG_TOL * sup:
                raise ValueError("is_real set but samples carry imaginary mass")
        vals.setflags(write=False)
        self.values = vals

    # -- spectral access -------------------------------------------------

    def spectrum(self) -> np.ndarray:
        """Fourier-series coefficients c_k = DFT / n^d."""
        return np.fft.fftn(self.values) / self.n**self.dim

    @classmethod
    def from_spectrum(cls, dim, box_len, n, coeffs, is_real=True):
        vals = np.fft.ifftn(np.asarray(coeffs, dtype=complex) * n**dim)
        if is_real:
            vals = vals.real.astype(complex)
        return cls(dim=dim, box_len=box_len, n=n, values=vals, is_real=is_real)

    def real_samples(self) -> np.ndarray:
        if not self.is_real:
            raise ValueError("function is not marked real")
        return self.values.real

    def mode_radii(self) -> np.ndarray:
        """|xi| on the frequency lattice, shape (n,)*dim."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.sqrt(sum(m * m for m in mesh)) / self.box_len

    def mode_vectors(self) -> np.ndarray:
        """Physical frequency vectors xi = k / L, shape (n,)*dim + (dim,)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1) / self.box_len

    def cell_volume(self) -> float:
        return (self.box_len / self.n) ** self.dim


def grid_points(box_len: float, n: int, dim: int) -> np.ndarray:
    """Sample coordinates, shape (n,)*dim + (dim,)."""
    x = np.arange(n) * (box_len / n)
    mesh = np.meshgrid(*([x] * dim), indexing="ij")
    return np.stack(mesh, axis=-1)


def sample_function(func, box_len: float, n: int, dim: int) -> GridFunction:
    """Sample a real function of position onto a GridFunction."""
    pts = grid_points(box_len, n, dim)
    vals = np.asarray(func(pts), dtype=float).astype(complex)
    return GridFunction(dim=dim, box_len=box_len, n=n, values=vals, is_real=True)


def _nyquist_guard(f: GridFunction, N: float):
    # band support reaches 2N; it must stay strictly below the lattice Nyquist
    if 2.0 * N * f.box_len > f.n // 2 - 1:
        raise ValueError(
            f"band scale N={N:g} needs frequencies up to 2N={2*N:g} beyond the "
            f"grid Nyquist window (n={f.n}, L={f.box_len:g})"
        )


def lp_project(f: GridFunction, N: float, kind: str = "band") -> GridFunction:
    """Littlewood-Paley projection at dyadic scale N.

    band multiplies the spectrum by psi(|xi|/N) = phi(|xi|/N) - phi(2|xi|/N),
    low by phi(|xi|/N), and high by 1 - phi(|xi|/N).
    """
    _nyquist_guard(f, N)
    phi = make_bump("lp_phi")
    rho = f.mode_radii() / N
    if kind == "band":
        mult = phi(rho) - phi(2.0 * rho)
    elif kind == "low":
        mult = phi(rho)
    elif kind == "high":
        mult = 1.0 - phi(rho)
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    out = np.fft.ifftn(np.fft.fftn(f.values) * mult)
    if f.is_real:
        out = out.real.astype(complex)
    return GridFunction(f.dim, f.box_len, f.n, out, is_real=f.is_real)


def apply_multiplier(f: GridFunction, m: SpectralMultiplier) -> GridFunction:
    """Pointwise spectral multiplication by the multiplier's symbol."""
    mult = np.asarray(m.symbol(f.mode_vectors()))
    out = np.fft.ifftn(np.fft.fftn(f.values) * mult)
    real_out = f.is_real and not np.iscomplexobj(mult)
    if real_out:
        out = out.real.astype(complex)
    return GridFunction(f.dim, f.box_len, f.n, out, is_real=real_out)


def lebesgue_norm(f: GridFunction, q) -> float:
    """Riemann-sum L^q norm; q = inf (math.inf) returns the max modulus."""
    mags = np.abs(f.values)
    if q == math.inf:
        return float(mags.max())
    q = float(q)
    if q < 1.0:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    return float((mags**q).sum() * f.cell_volume()) ** (1.0 / q)


def _signed_power(g: np.ndarray, q: float) -> np.ndarray:
    """|g|^(q-2) g with the convention |0|^(q-2) * 0 = 0 (needed for q < 2)."""
    out = np.zeros_like(g)
    nz = g != 0.0
    out[nz] = np.abs(g[nz]) ** (q - 2.0) * g[nz]
    return out


def bernstein_pairing(f: GridFunction, N: float, alpha, q: float) -> float:
    """The pairing  int (P_N |grad|^alpha f) |P_N f|^(q-2) P_N f dx.

    alpha may be a float or anything with an ``alpha`` attribute.
    """
    alpha = getattr(alpha, "alpha", alpha)
    if not 1.0 < q < math.inf:
        raise ValueError(f"the pairing requires 1 < q < inf, got {q}")
    if not f.is_real:
        raise ValueError("the pairing is defined for real-valued functions")
    g = lp_project(f, N, "band")
    h = apply_multiplier(g, fractional_laplacian_symbol(alpha))
    gr = g.values.real
    hr = h.values.real
    return float((hr * _signed_power(gr, q)).sum() * f.cell_volume())


def torus_pairing(f: GridFunction, alpha, q: float) -> float:
    """int (|grad|^alpha f) |f|^(q-2) f dx  without frequency projection."""
    alpha = getattr(alpha, "alpha", alpha)
    if not 1.0 < q < math.inf:
        raise ValueError(f"the pairing requires 1 < q < inf, got {q}")
    if not f.is_real:
        raise ValueError("the pairing is defined for real-valued functions")
    h = apply_multiplier(f, fractional_laplacian_symbol(alpha))
    return float(
        (h.values.real * _signed_power(f.values.real, q)).sum() * f.cell_volume()
    )


def dyadic_radii(f: GridFunction) -> list:
    """The fixed maximal-function radius set {L 2^-j : j = 1..log2(n)-1}."""
    jmax = int(math.log2(f.n)) - 1
    return [f.box_len * 2.0 ** (-j) for j in range(1, jmax + 1)]


def maximal_function(f: GridFunction, radii=None) -> GridFunction:
    """Discrete Hardy-Littlewood maximal function over periodized balls.

    For each sample the value is the largest average of |f| over lattice
    balls with radii from a dyadic set, including the one-cell ball (so
    Mf >= |f| pointwise).  Ball averages are circular convolutions.
    """
    if not f.is_real:
        raise ValueError("maximal function expects a real-valued function")
    if radii is None:
        radii = dyadic_radii(f)
    mags = np.abs(f.values.real)
    best = mags.copy()
    spec = np.fft.fftn(mags)
    idx = np.arange(f.n)
    wrapped = np.minimum(idx, f.n - idx) * (f.box_len / f.n)
    mesh = np.meshgrid(*([wrapped] * f.dim), indexing="ij")
    dist2 = sum(m * m for m in mesh)
    for r in radii:
        ball = (dist2 <= r * r).astype(float)
        count = ball.sum()
        if count == 0:
            continue
        avg = np.fft.ifftn(spec * np.fft.fftn(ball)).real / count
        np.maximum(best, avg, out=best)
    return GridFunction(f.dim, f.box_len, f.n, best.astype(complex), is_real=True)


# -- binary serialization ------------------------------------------------
# layout: int64 dim, float64 L, int64 n, uint8 is_real, then n^d complex
# values as little-endian float64 (re, im) pairs in row-major order.

_HEADER = struct.Struct("<qdqB")


def grid_function_to_bytes(f: GridFunction) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(f.dim, f.box_len, f.n, 1 if f.is_real else 0))
    buf.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())
    return buf.getvalue()


def grid_function_from_bytes(data: bytes) -> GridFunction:
    dim, box_len, n, is_real = _HEADER.unpack_from(data, 0)
    count = n**dim
    vals = np.frombuffer(data, dtype="<c16", offset=_HEADER.size, count=count)
    vals = vals.astype(complex).reshape((n,) * dim)
    return GridFunction(dim, box_len, n, vals, is_real=bool(is_real))


def save_grid_function(f: GridFunction, path) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_function_to_bytes(f))


def load_grid_function(path) -> GridFunction:
    with open(path, "rb") as fh:
        return grid_function_from_bytes(fh.read())
