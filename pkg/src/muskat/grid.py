"""Uniform periodic grid on [-pi, pi) and Fourier-multiplier operators.

Fields are plain 1-D float arrays of even length ``N`` sampled at
``alpha_j = -pi + j*h``, ``h = 2*pi/N``.  Every operator here is a Fourier
multiplier applied through ``numpy.fft`` and is a pure function of its input.
"""
from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi

# half-width of the mollifier symbol support, in units of eps*k
MOLLIFIER_SUPPORT = np.pi


class GridError(ValueError):
    """Raised for malformed or non-finite grid fields."""


def nodes(n: int) -> np.ndarray:
    """Grid nodes ``-pi + j*2pi/n`` for ``j = 0..n-1``."""
    _check_size(n)
    return -np.pi + TWO_PI * np.arange(n) / n


def spacing(n: int) -> float:
    return TWO_PI / n


def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in ``numpy.fft`` order; Nyquist reported as -n/2."""
    return np.fft.fftfreq(n, d=1.0 / n)


def _check_size(n: int) -> None:
    if n < 4 or n % 2:
        raise GridError(f"grid size must be even and >= 4, got {n}")


def as_field(f, name: str = "field") -> np.ndarray:
    """Validate ``f`` as a real periodic grid field and return it as float array."""
    arr = np.asarray(f, dtype=float)
    if arr.ndim != 1:
        raise GridError(f"{name} must be one-dimensional, got shape {arr.shape}")
    _check_size(arr.size)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise GridError(f"{name} has a non-finite value at node {bad}")
    return arr


def modes(f) -> np.ndarray:
    """Fourier coefficients ``fft(f)`` (unnormalized, numpy ordering)."""
    return np.fft.fft(as_field(f))


def from_modes(fhat: np.ndarray) -> np.ndarray:
    return np.fft.ifft(fhat).real


def _apply_symbol(f, symbol: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(f) * symbol).real


def derivative_symbol(n: int, order: int) -> np.ndarray:
    k = wavenumbers(n)
    sym = (1j * k) ** order
    if order % 2:
        sym[n // 2] = 0.0
    return sym


def spectral_derivative(f, order: int = 1) -> np.ndarray:
    """``order``-th derivative by the multiplier ``(ik)**order``.

    The Nyquist mode is dropped for odd orders since its derivative is not
    representable as a real grid field.
    """
    if order < 1 or int(order) != order:
        raise GridError(f"derivative order must be a positive integer, got {order}")
    f = as_field(f)
    return _apply_symbol(f, derivative_symbol(f.size, int(order)))


def hilbert(f) -> np.ndarray:
    """Periodic Hilbert transform, multiplier ``-i sign(k)``.

    Convention: ``H cos = sin``, i.e. ``H u(a) = (1/2pi) PV int u(b) cot((a-b)/2) db``.
    """
    f = as_field(f)
    n = f.size
    sym = -1j * np.sign(wavenumbers(n))
    sym[n // 2] = 0.0
    return _apply_symbol(f, sym)


def lambda_op(f) -> np.ndarray:
    """The operator with symbol ``|k|`` (equal to ``hilbert`` of the derivative)."""
    f = as_field(f)
    return _apply_symbol(f, np.abs(wavenumbers(f.size)))


def sobolev_norm(f, s: float = 0.0) -> float:
    """H^s norm with weight ``(1 + k^2)^s``, normalized so ``s=0`` is L^2(-pi, pi)."""
    if s < 0:
        raise GridError(f"Sobolev index must be nonnegative, got {s}")
    f = as_field(f)
    n = f.size
    c = np.fft.fft(f) / n
    k = wavenumbers(n)
    return float(np.sqrt(TWO_PI * np.sum((1.0 + k * k) ** s * np.abs(c) ** 2)))


def mollifier_symbol(n: int, eps: float) -> np.ndarray:
    """Fourier symbol of the scaled bump, ``exp(1 - 1/(1 - (eps k/K)^2))`` inside ``|eps k| < K``.

    Real, even, equal to 1 at ``k = 0`` and bounded by 1.
    """
    if not eps > 0:
        raise GridError(f"mollifier width must be positive, got {eps}")
    x = eps * np.abs(wavenumbers(n)) / MOLLIFIER_SUPPORT
    sym = np.zeros(n)
    inside = x < 1.0
    sym[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return sym


def mollify(f, eps: float) -> np.ndarray:
    f = as_field(f)
    return _apply_symbol(f, mollifier_symbol(f.size, eps))


def double_mollify(f, eps: float) -> np.ndarray:
    """Convolution with the mollifier twice (symbol squared)."""
    f = as_field(f)
    return _apply_symbol(f, mollifier_symbol(f.size, eps) ** 2)


def antiderivative(f) -> tuple[float, np.ndarray]:
    """Split ``int_{-pi}^{alpha} f`` into ``mean*(alpha + pi) + P(alpha)``.

    Returns ``(mean, P)`` where ``P`` is the periodic part sampled on the
    grid, with ``P(-pi) = 0``.
    """
    f = as_field(f)
    n = f.size
    fhat = np.fft.fft(f)
    k = wavenumbers(n)
    ghat = np.zeros(n, dtype=complex)
    nz = k != 0
    ghat[nz] = fhat[nz] / (1j * k[nz])
    ghat[n // 2] = 0.0
    g = np.fft.ifft(ghat).real
    return float(fhat[0].real / n), g - g[0]


def trig_eval(f, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of grid field ``f`` at points ``x``.

    The Nyquist mode is split symmetrically so the interpolant is real.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = np.fft.fft(f) / n
    k = wavenumbers(n)
    # shift so node 0 sits at -pi
    phase = x[:, None] + np.pi
    out = np.empty(x.size)
    chunk = max(1, 2**22 // n)
    for start in range(0, x.size, chunk):
        sl = slice(start, start + chunk)
        e = np.exp(1j * phase[sl] * k[None, :])
        vals = e @ c
        # replace the one-sided Nyquist term by its real cosine form
        vals += -c[n // 2] * e[:, n // 2] + c[n // 2].real * np.cos(n // 2 * phase[sl, 0])
        out[sl] = vals.real
    return out


def resample(f, m: int) -> np.ndarray:
    """Trigonometric interpolation of ``f`` onto the ``m``-point grid (``m >= N``)."""
    f = as_field(f)
    n = f.size
    if m < n or m % 2:
        raise GridError(f"resample target must be even and >= {n}, got {m}")
    if m == n:
        return f.copy()
    c = np.fft.fft(f)
    out = np.zeros(m, dtype=complex)
    half = n // 2
    out[:half] = c[:half]
    out[m - half + 1:] = c[half + 1:]
    # split Nyquist between +k and -k
    out[half] = 0.5 * c[half]
    out[m - half] = 0.5 * c[half]
    # grids share node 0 at -pi, so no phase correction is needed
    return np.fft.ifft(out).real * (m / n)
