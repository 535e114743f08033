"""Planar Gaussian analytic function: sampling, zeros and closed-form statistics.

The planar GAF of parameter ``gamma`` is ``sum_k xi_k sqrt(gamma^k / k!) z^k``
with i.i.d. standard complex Gaussian ``xi_k``; its covariance kernel is
``exp(gamma z conj(w))``. Zeros of the Gaussian spectrogram of white noise
have the law of the zeros of the ``gamma = 1/2`` function (up to a rotation
of the plane), which is why ``gamma = 0.5`` is the default of the
spectrogram-facing helpers below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .patterns import PointPattern, Window
from .rng import SeededStream, as_generator
from .signals import sample_discrete_white_noise

#: Fraction of ``sqrt(n_terms / gamma)`` inside which truncated zeros are trusted.
VALIDITY_FACTOR = 0.8
MAX_JOINT_POINTS = 12
CONDITION_LIMIT = 1e12
HOLE_CONSTANT = 3 * math.e**2 / 4

SPECTROGRAM_GAMMA = 0.5


class DegenerateConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlanarGafSample:
    gamma: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    @classmethod
    def draw(cls, gamma: float, n_terms: int, rng) -> "PlanarGafSample":
        """Coefficients ``xi_0 .. xi_{n_terms}``."""
        return cls(gamma, sample_discrete_white_noise(n_terms + 1, rng))

    @property
    def n_terms(self) -> int:
        return len(self.coeffs) - 1

    @property
    def validity_radius(self) -> float:
        return validity_radius(self.gamma, self.n_terms)


def validity_radius(gamma: float, n_terms: int) -> float:
    return VALIDITY_FACTOR * math.sqrt(n_terms / gamma)


def _horner(coeffs: np.ndarray, w: np.ndarray, derivative: bool):
    """Evaluate ``sum_k c_k w^k / sqrt(k!)`` (and its w-derivative).

    Nested form ``c_0 + w/sqrt(1) (c_1 + w/sqrt(2) (c_2 + ...))`` keeps every
    intermediate at the scale of the result.
    """
    n = len(coeffs) - 1
    val = np.full(w.shape, coeffs[n], dtype=complex)
    der = np.zeros(w.shape, dtype=complex)
    for k in range(n - 1, -1, -1):
        step = 1.0 / math.sqrt(k + 1)
        if derivative:
            der = step * (val + w * der)
        val = coeffs[k] + step * w * val
    return val, der


def _evaluate(sample: PlanarGafSample, z, derivative=False):
    root = math.sqrt(sample.gamma)
    w = root * np.asarray(z, dtype=complex)
    val, der = _horner(sample.coeffs, w, derivative)
    return val, root * der


def gaf_eval(sample: PlanarGafSample, z):
    """Truncated series at ``z``; refuses points outside the validity disk."""
    z_arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(z_arr) > sample.validity_radius):
        raise ValueError(
            f"|z| exceeds the validity radius {sample.validity_radius:.3g} "
            f"for {sample.n_terms} terms"
        )
    val, _ = _evaluate(sample, z_arr)
    return complex(val) if val.ndim == 0 else val


def gaf_derivative(sample: PlanarGafSample, z):
    z_arr = np.asarray(z, dtype=complex)
    _, der = _evaluate(sample, z_arr, derivative=True)
    return complex(der) if der.ndim == 0 else der


def kernel(gamma: float, z, w):
    """Covariance ``E[GAF(z) conj(GAF(w))] = exp(gamma z conj(w))``."""
    return np.exp(gamma * (np.asarray(z, dtype=complex) * np.conj(np.asarray(w, dtype=complex))))


def gaf_zeros(
    gamma: float,
    window: Window,
    n_terms: int,
    rng,
    grid_step: float | None = None,
    newton_steps: int = 10,
) -> PointPattern:
    """Zeros of one truncated planar GAF inside ``window``.

    Grid minima of ``|GAF|`` seed a complex Newton iteration on the series.
    """
    from .zeros import local_minima

    sample = PlanarGafSample.draw(gamma, n_terms, rng)
    radius = sample.validity_radius
    if np.abs(window.corners).max() > radius:
        raise ValueError(
            f"window reaches |z|={np.abs(window.corners).max():.3g}, beyond the "
            f"validity radius {radius:.3g}; use more terms"
        )
    step = grid_step if grid_step is not None else 0.05 / math.sqrt(gamma)
    pad = 3 * step
    xs = np.arange(window.x_min - pad, window.x_max + pad + step / 2, step)
    ys = np.arange(window.y_min - pad, window.y_max + pad + step / 2, step)
    zz = xs[None, :] + 1j * ys[:, None]
    val, _ = _evaluate(sample, zz)
    # |GAF|^2 exp(-gamma |z|^2) removes the deterministic growth of the modulus
    field = np.log(np.abs(val) + 1e-300) - 0.5 * gamma * np.abs(zz) ** 2
    rows, cols = np.nonzero(local_minima(field))
    z = zz[rows, cols]
    for _ in range(newton_steps):
        f, df = _evaluate(sample, z, derivative=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = z - f / df
        z = z[np.isfinite(z)]
    f, _ = _evaluate(sample, z)
    scale = np.exp(0.5 * gamma * np.abs(z) ** 2)
    z = z[np.abs(f) < 1e-8 * scale]
    z = z[window.contains(z, strict=True)]
    return PointPattern(_dedupe(z, 1e-6), window)


def _dedupe(z: np.ndarray, tol: float) -> np.ndarray:
    if len(z) < 2:
        return z
    order = np.lexsort((z.imag, np.round(z.real / tol)))
    z = z[order]
    keep = [0]
    for i in range(1, len(z)):
        if np.min(np.abs(z[keep[-8:]] - z[i])) > tol:
            keep.append(i)
    return z[keep]


def first_intensity(gamma: float) -> float:
    """Expected number of zeros per unit area, ``gamma / pi``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return gamma / math.pi


def edelman_kostlan_intensity(kernel_fn, z: complex, h: float = 1e-3) -> float:
    """``(1 / 4 pi) Laplacian log K(z, z)`` by a five-point finite difference."""
    z = complex(z)

    def f(u):
        return math.log(abs(kernel_fn(u, u)))

    lap = (f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h) - 4 * f(z)) / h**2
    return lap / (4 * math.pi)


def _pcf_of_s(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    small = s < 0.05
    ss = s[small]
    out[small] = ss - 2 * ss**3 / 9 + 2 * ss**5 / 45 - 4 * ss**7 / 525 + 2 * ss**9 / 1701
    sl = s[~small]
    e = np.exp(-sl)
    q = 2 * sl * e / (1 - e * e)  # s / sinh(s), overflow free
    coth = (1 + e * e) / (1 - e * e)
    out[~small] = coth * (1 + q * q) - 2 * q * q / sl
    return out


def pair_correlation_planar(r, gamma: float = SPECTROGRAM_GAMMA):
    """Pair correlation of the zeros of the planar GAF.

    With ``s = gamma r^2 / 2``,
    ``g = ((sinh^2 s + s^2) cosh s - 2 s sinh s) / sinh^3 s``; the default
    ``gamma = 1/2`` is the pair correlation of the zeros of the Gaussian
    spectrogram of white noise in time-frequency units.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("distances must be nonnegative")
    s = 0.5 * gamma * r_arr**2
    out = _pcf_of_s(s.ravel()).reshape(s.shape)
    return float(out) if out.ndim == 0 else out


def ripley_k_planar(r, gamma: float = SPECTROGRAM_GAMMA):
    """``K(r) = 2 pi int_0^r g(u) u du`` for the GAF zeros."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r_arr)
    for i, rr in enumerate(r_arr):
        val, _ = scipy.integrate.quad(
            lambda u: u * pair_correlation_planar(u, gamma), 0.0, rr, limit=200
        )
        out[i] = 2 * math.pi * val
    return float(out[0]) if np.ndim(r) == 0 else out


def l_function_planar(r, gamma: float = SPECTROGRAM_GAMMA):
    return np.sqrt(np.asarray(ripley_k_planar(r, gamma)) / math.pi)


def kernel_matrices(gamma: float, points):
    """Covariance blocks ``A = E[F F*]``, ``B = E[F' F*]``, ``C = E[F' F'*]``."""
    z = np.asarray(points, dtype=complex)
    zw = np.outer(z, np.conj(z))
    A = np.exp(gamma * zw)
    B = gamma * np.conj(z)[None, :] * A
    C = gamma * (1 + gamma * zw) * A
    return A, B, C


def _normalized_kernel_matrices(gamma: float, z: np.ndarray):
    # Rescaling F by exp(-gamma |z|^2 / 2) at each point leaves the
    # per/det ratio unchanged and keeps A well conditioned.
    zw = np.outer(z, np.conj(z))
    mod = np.abs(z) ** 2
    A = np.exp(gamma * (zw - 0.5 * mod[:, None] - 0.5 * mod[None, :]))
    B = gamma * np.conj(z)[None, :] * A
    C = gamma * (1 + gamma * zw) * A
    return A, B, C


def permanent(M) -> complex:
    """Permanent by Ryser's formula, visiting column subsets in Gray-code order."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    in_set = np.zeros(n, dtype=bool)
    total = 0j
    for k in range(1, 2**n):
        j = (k & -k).bit_length() - 1
        if in_set[j]:
            row_sums -= M[:, j]
        else:
            row_sums += M[:, j]
        in_set[j] = not in_set[j]
        size = int(in_set.sum())
        total += (-1) ** size * np.prod(row_sums)
    return (-1) ** n * total


def joint_intensity(gamma: float, points) -> float:
    """n-point intensity of the GAF zeros, ``per(C - B A^-1 B*) / det(pi A)``."""
    z = np.asarray(points, dtype=complex).ravel()
    n = len(z)
    if n == 0:
        raise ValueError("need at least one point")
    if n > MAX_JOINT_POINTS:
        raise ValueError(f"joint intensities are limited to {MAX_JOINT_POINTS} points")
    A, B, C = _normalized_kernel_matrices(gamma, z)
    if np.linalg.cond(A) > CONDITION_LIMIT:
        raise DegenerateConfigurationError("degenerate configuration")
    lu = scipy.linalg.lu_factor(A)
    schur = C - B @ scipy.linalg.lu_solve(lu, np.conj(B).T)
    det = np.prod(np.diag(lu[0])) * (-1) ** int(np.sum(lu[1] != np.arange(n)))
    return float((permanent(schur) / (math.pi**n * det)).real)


def hole_probability_asymptote(r):
    """Large-r approximation ``exp(-(3 e^2 / 4) r^4)`` of the hole probability
    of the gamma = 1 planar GAF zeros."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    out = np.exp(-HOLE_CONSTANT * r_arr**4)
    return float(out) if out.ndim == 0 else out


def sample_poisson(lam: float, window: Window, rng) -> PointPattern:
    if not lam > 0:
        raise ValueError("Poisson intensity must be positive")
    gen = as_generator(rng)
    count = gen.poisson(lam * window.area)
    x = gen.uniform(window.x_min, window.x_max, count)
    y = gen.uniform(window.y_min, window.y_max, count)
    return PointPattern(x + 1j * y, window)


def number_variance_limit() -> float:
    """``lim Var N(D(0, r)) / r`` for the gamma = 1 GAF zeros: zeta(3/2) / (4 pi^1.5)."""
    from scipy.special import zeta

    return float(zeta(1.5) / (4 * math.pi**1.5))
