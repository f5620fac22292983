import math
from typing import Callable, Sequence, overload

import numpy as np
from scipy import integrate, special

from core.errors import DomainError
from core.models.streams import RngStream
from core.settings import GaussianMethod, get_settings

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Quantile arguments outside this range raise instead of clamping
P_MIN = 1e-300
P_MAX = 1.0 - 1e-16

# Rational initial guess for the normal quantile (Acklam)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


@overload
def std_normal_cdf(x: float) -> float: ...


@overload
def std_normal_cdf(x: np.ndarray) -> np.ndarray: ...


def std_normal_cdf(x):
    """Φ(x). Saturates to 0 and 1 far in the tails."""
    value = special.ndtr(x)
    return float(value) if np.ndim(value) == 0 else value


@overload
def std_normal_pdf(x: float) -> float: ...


@overload
def std_normal_pdf(x: np.ndarray) -> np.ndarray: ...


def std_normal_pdf(x):
    value = np.exp(-0.5 * np.square(x)) / SQRT_2PI
    return float(value) if np.ndim(value) == 0 else value


def _initial_guess(q: np.ndarray) -> np.ndarray:
    """Acklam's approximation for q in (0, 1/2]; relative error about 1e-9."""
    x = np.empty_like(q)

    tail = q < _P_LOW
    if np.any(tail):
        r = np.sqrt(-2.0 * np.log(q[tail]))
        numerator = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
        denominator = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        x[tail] = numerator / denominator

    central = ~tail
    if np.any(central):
        u = q[central] - 0.5
        r = u * u
        numerator = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u
        denominator = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[central] = numerator / denominator

    return x


@overload
def std_normal_quantile(p: float) -> float: ...


@overload
def std_normal_quantile(p: np.ndarray) -> np.ndarray: ...


def std_normal_quantile(p):
    """
    Φ⁻¹(p) for p in [1e-300, 1 - 1e-16].

    The rational guess is refined by Halley steps against `std_normal_cdf`. Work is done on the lower half,
    where 1 - p is exact in floating point for p ≥ 1/2, and the sign is restored at the end.

    Raises:
        DomainError: If any p falls outside the supported range.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_arr)) or np.any(p_arr < P_MIN) or np.any(p_arr > P_MAX):
        raise DomainError(f'Quantile argument must lie in [{P_MIN}, 1 - 1e-16], got {p}')

    upper = p_arr > 0.5
    q = np.where(upper, 1.0 - p_arr, p_arr)
    x = _initial_guess(np.atleast_1d(q)).reshape(q.shape)

    for _ in range(3):
        error = special.ndtr(x) - q
        u = error / std_normal_pdf(x)
        x = x - u / (1.0 + 0.5 * x * u)

    x = np.where(upper, -x, x)
    x = np.where(p_arr == 0.5, 0.0, x)
    return float(x) if np.ndim(x) == 0 else x


def abs_moment(p: float) -> float:
    """𝔼|ζ|^p = 2^{p/2} Γ((p+1)/2) / √π."""
    if p < 0:
        raise DomainError(f'Absolute moments are defined here for p ≥ 0, got {p}')
    return float(2.0 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi))


def sigma_p(p: float) -> float:
    """σ_p = (½ 𝔼|ζ|^p)^{1/p}, the L_p norm of the positive part of a standard Gaussian."""
    if p <= 0:
        raise DomainError(f'σ_p needs p > 0, got {p}')
    return (0.5 * abs_moment(p)) ** (1.0 / p)


def gaussian_expectation(h: Callable[[float], float],
                         points: Sequence[float] | None = None,
                         lower: float = -10.0,
                         upper: float = 10.0) -> float:
    """
    ∫ h dγ over [lower, upper] by adaptive quadrature. Kinks of h should be passed as `points`.
    """
    breakpoints = sorted(pt for pt in (points or ()) if lower < pt < upper)
    value, _ = integrate.quad(
        lambda t: h(t) * std_normal_pdf(t),
        lower, upper,
        points=breakpoints or None,
        epsabs=1e-13, epsrel=1e-10, limit=400
    )
    return float(value)


def _standard_normal(generator: np.random.Generator,
                     shape: tuple[int, ...],
                     method: GaussianMethod) -> np.ndarray:
    match method:
        case GaussianMethod.ZIGGURAT:
            return generator.standard_normal(shape)
        case GaussianMethod.INVERSION:
            # random() yields k / 2^53, so the shift keeps u strictly inside (0, 1)
            u = generator.random(shape) + 2.0 ** -54
            return special.ndtri(u)
        case _:
            raise DomainError(f'Unknown Gaussian method: {method}')


def sample_gaussian_matrix(stream: RngStream,
                           rows: int,
                           n: int,
                           method: GaussianMethod | None = None) -> tuple[np.ndarray, RngStream]:
    """
    A rows × n matrix of independent N(0, 1) draws and the stream positioned after them.
    """
    if rows < 1 or n < 1:
        raise DomainError(f'Matrix shape must be positive, got ({rows}, {n})')

    generator = stream.generator()
    values = _standard_normal(generator, (rows, n), method or get_settings().gaussian_method)
    return values, stream.advanced_past(generator)


def sample_gaussian_vector(stream: RngStream,
                           n: int,
                           method: GaussianMethod | None = None) -> tuple[np.ndarray, RngStream]:
    values, advanced = sample_gaussian_matrix(stream, 1, n, method)
    return values[0], advanced
