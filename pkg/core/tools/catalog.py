import logging
import math
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import linalg

from core.errors import CatalogKeyError, DomainError, ReportIOError
from core.models.functions import (
    BatchFunction, CustomParams, FunctionFamily, FunctionSpec, GAlphaParams, LinearParams, LpParams,
    MatrixParams, MonomialParams, NegatedParams, PiecewiseLinearParams, RateFunction, RateKind, SupParams, TiltParams
)
from core.tools.gaussian import SQRT_2PI, std_normal_cdf, std_normal_pdf

_log = logging.getLogger('catalog')

DEFAULT_KEYS: list[str] = [
    'linear:n=2',
    'linear:n=50',
    'l1:n=4',
    'l2:n=100',
    'l4:n=256',
    'linf:n=16',
    'linf:n=64',
    'linf:n=1024',
    'linf:n=4096',
    'ellipsoidal:n=64:gap=2',
    'tilted:linf:n=256:t=4',
    'tilted:l2:n=256:t=4',
    'galpha:a=2',
    'galpha:a=3',
    'galpha:a=4',
    'abs',
    'pospart',
    'monomial:k=1',
    'neg:linf:n=64',
]


def _format_number(value: float) -> str:
    return f'{value:g}'


# --- constructors ---------------------------------------------------------------------------------------------------

def make_linear(u: np.ndarray, key: str | None = None) -> FunctionSpec:
    direction = np.asarray(u, dtype=float).ravel()
    norm = float(np.linalg.norm(direction))
    if direction.size == 0 or norm == 0.0:
        raise DomainError('A linear functional needs a nonzero direction.')

    return FunctionSpec(
        key=key or f'linear:n={direction.size}',
        family=FunctionFamily.LINEAR,
        dimension=direction.size,
        params=LinearParams(u=direction),
        convex=True,
        lipschitz=norm,
        nondecreasing=direction.size == 1 and direction[0] > 0,
        reference_variance=norm ** 2
    )


def make_lp_norm(n: int, p: float) -> FunctionSpec:
    """
    The ℓ_p norm on ℝⁿ; p = ∞ gives the sup norm.

    The Lipschitz constant is 1 for p ≥ 2 and n^{1/p - 1/2} below, which is also the largest value of the norm on
    the Euclidean sphere.
    """
    if n < 1:
        raise DomainError(f'Dimension must be positive, got {n}')
    if not p >= 1:
        raise DomainError(f'ℓ_p is a norm only for p ≥ 1, got p={p}')

    if math.isinf(p):
        return FunctionSpec(
            key=f'linf:n={n}',
            family=FunctionFamily.SUP_NORM,
            dimension=n,
            params=SupParams(),
            convex=True,
            lipschitz=1.0,
            is_norm=True,
            coordinate_symmetric=True
        )

    return FunctionSpec(
        key=f'l{_format_number(p)}:n={n}',
        family=FunctionFamily.LP_NORM,
        dimension=n,
        params=LpParams(p=float(p)),
        convex=True,
        lipschitz=1.0 if p >= 2 else float(n ** (1.0 / p - 0.5)),
        is_norm=True,
        coordinate_symmetric=True
    )


def make_ellipsoidal(A: np.ndarray, key: str | None = None) -> FunctionSpec:
    matrix = MatrixParams.from_matrix(A)
    if matrix.op_norm == 0.0:
        raise DomainError('The ellipsoidal norm needs a matrix with a nonzero singular value.')

    n = matrix.A.shape[1]
    return FunctionSpec(
        key=key or f'ellipsoidal:m={matrix.A.shape[0]}:n={n}',
        family=FunctionFamily.ELLIPSOIDAL,
        dimension=n,
        params=matrix,
        convex=True,
        lipschitz=matrix.op_norm,
        is_norm=True
    )


def dual_extremal(base: FunctionSpec) -> np.ndarray:
    """
    x₀*: a functional of dual norm one whose Euclidean length is b(X).

    ℓ_p with p ≥ 2 (and ℓ∞) use e₁, ℓ_p with p < 2 the flat vector n^{-1/q}·1, ellipsoidal norms σ₁·v₁.
    """
    n = base.dimension
    match base.params:
        case SupParams():
            x0 = np.zeros(n)
            x0[0] = 1.0
            return x0
        case LpParams(p=p) if p >= 2:
            x0 = np.zeros(n)
            x0[0] = 1.0
            return x0
        case LpParams(p=p):
            q_inverse = 1.0 - 1.0 / p
            return np.full(n, n ** (-q_inverse))
        case MatrixParams() as matrix:
            _, s, vt = linalg.svd(matrix.A, full_matrices=False)
            v1 = vt[0]
            # Sign is irrelevant for |⟨x, x₀*⟩|; fix it for reproducible output
            if v1[np.argmax(np.abs(v1))] < 0:
                v1 = -v1
            return s[0] * v1
        case CustomParams(x0_star=x0) if x0 is not None:
            return np.asarray(x0, dtype=float)
        case _:
            raise DomainError(f'No dual-extremal functional is known for "{base.key}"')


def make_tilted(base: FunctionSpec, t: float) -> FunctionSpec:
    """f_t(x) = ‖x‖ + t|⟨x, x₀*⟩|, a (1+t)-equivalent norm whose Lipschitz constant is (1+t)·b."""
    if not base.is_norm or base.lipschitz is None:
        raise DomainError(f'Tilting needs a norm with a known b(X), got "{base.key}"')
    if not t > 0:
        raise DomainError(f'The tilt must be positive, got t={t}')

    x0_star = dual_extremal(base)
    b = float(base.lipschitz)
    return FunctionSpec(
        key=f'tilted:{base.key}:t={_format_number(t)}',
        family=FunctionFamily.TILTED,
        dimension=base.dimension,
        params=TiltParams(base=base, t=float(t), x0_star=x0_star, b=b),
        convex=True,
        lipschitz=(1.0 + t) * b,
        is_norm=True
    )


def tilted_closed_form_k(k_base: float, t: float) -> float:
    """k(X_t) = (1+t)^{-2} (√k(X) + t√(2/π))²."""
    return (math.sqrt(k_base) + t * math.sqrt(2.0 / math.pi)) ** 2 / (1.0 + t) ** 2


def make_galpha(alpha: float) -> FunctionSpec:
    """g_α(t) = c_α (t - α)₊ with c_α = (1 - Φ(α))^{-1/2}, so that 𝔼g_α² = 𝔼(ζ - α)₊² / (1 - Φ(α))."""
    if not alpha >= 2:
        raise DomainError(f'g_α is studied for α ≥ 2, got {alpha}')

    tail = std_normal_cdf(-alpha)
    c_alpha = tail ** -0.5

    # Truncated moments of (ζ - α)₊
    first = std_normal_pdf(alpha) - alpha * tail
    second = (1.0 + alpha ** 2) * tail - alpha * std_normal_pdf(alpha)

    return FunctionSpec(
        key=f'galpha:a={_format_number(alpha)}',
        family=FunctionFamily.G_ALPHA,
        dimension=1,
        params=GAlphaParams(alpha=float(alpha), c_alpha=c_alpha),
        convex=True,
        lipschitz=c_alpha,
        nondecreasing=True,
        reference_variance=c_alpha ** 2 * (second - first ** 2),
        kinks=(float(alpha),)
    )


def make_odd_monomial(k: int) -> FunctionSpec:
    if k < 1:
        raise DomainError(f'The monomial index must be at least 1, got {k}')

    degree = 2 * k + 1
    # 𝔼ζ^{2(2k+1)} = (4k+1)!!
    double_factorial = math.prod(range(1, 2 * degree, 2))
    return FunctionSpec(
        key=f'monomial:k={k}',
        family=FunctionFamily.MONOMIAL_ODD,
        dimension=1,
        params=MonomialParams(k=k, positive_part_mean=2 ** k * math.factorial(k) / SQRT_2PI),
        convex=False,
        lipschitz=None,
        nondecreasing=True,
        reference_variance=float(double_factorial)
    )


def make_abs() -> FunctionSpec:
    return FunctionSpec(
        key='abs',
        family=FunctionFamily.CUSTOM,
        dimension=1,
        params=PiecewiseLinearParams(left_slope=-1.0, right_slope=1.0),
        convex=True,
        lipschitz=1.0,
        reference_variance=1.0 - 2.0 / math.pi,
        kinks=(0.0,)
    )


def make_positive_part() -> FunctionSpec:
    return FunctionSpec(
        key='pospart',
        family=FunctionFamily.CUSTOM,
        dimension=1,
        params=PiecewiseLinearParams(left_slope=0.0, right_slope=1.0),
        convex=True,
        lipschitz=1.0,
        nondecreasing=True,
        reference_variance=0.5 - 1.0 / (2.0 * math.pi),
        kinks=(0.0,)
    )


def make_negated(inner: FunctionSpec) -> FunctionSpec:
    """z ↦ -f(z). Reflections of convex functions are concave and serve as negative controls."""
    return FunctionSpec(
        key=f'neg:{inner.key}',
        family=FunctionFamily.CUSTOM,
        dimension=inner.dimension,
        params=NegatedParams(inner=inner),
        convex=False,
        lipschitz=inner.lipschitz,
        coordinate_symmetric=inner.coordinate_symmetric,
        reference_variance=inner.reference_variance,
        kinks=inner.kinks
    )


def make_custom(key: str,
                dimension: int,
                evaluate: BatchFunction,
                gradient: BatchFunction | None = None,
                lipschitz: float | None = None,
                convex: bool = False,
                is_norm: bool = False,
                x0_star: np.ndarray | None = None,
                nondecreasing: bool = False,
                reference_variance: float | None = None) -> FunctionSpec:
    """
    A user-supplied function. `evaluate` and `gradient` take a batch of shape (m, n) and return (m,) and (m, n).
    """
    return FunctionSpec(
        key=key,
        family=FunctionFamily.CUSTOM,
        dimension=dimension,
        params=CustomParams(evaluate=evaluate, gradient=gradient, x0_star=x0_star),
        convex=convex,
        lipschitz=lipschitz,
        is_norm=is_norm,
        nondecreasing=nondecreasing,
        reference_variance=reference_variance
    )


# --- evaluation -----------------------------------------------------------------------------------------------------

def as_batch(spec: FunctionSpec, z: np.ndarray) -> np.ndarray:
    """
    Coerces points to shape (m, n). A flat array is one point, except for 1-D functions where it is m points.
    """
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None] if spec.is_one_dimensional else arr[None, :]

    if arr.ndim != 2 or arr.shape[1] != spec.dimension:
        raise DomainError(f'"{spec.key}" expects points of dimension {spec.dimension}, got shape {arr.shape}')
    return arr


def evaluate_batch(spec: FunctionSpec, Z: np.ndarray) -> np.ndarray:
    batch = as_batch(spec, Z)
    match spec.params:
        case LinearParams(u=u):
            return batch @ u
        case SupParams():
            return np.max(np.abs(batch), axis=1)
        case LpParams(p=p):
            return np.linalg.norm(batch, ord=p, axis=1)
        case MatrixParams(A=A):
            return np.linalg.norm(batch @ A.T, axis=1)
        case TiltParams(base=base, t=t, x0_star=x0):
            return evaluate_batch(base, batch) + t * np.abs(batch @ x0)
        case GAlphaParams(alpha=alpha, c_alpha=c):
            return c * np.maximum(batch[:, 0] - alpha, 0.0)
        case MonomialParams() as monomial:
            return batch[:, 0] ** monomial.degree
        case PiecewiseLinearParams(left_slope=left, right_slope=right, kink=kink):
            shifted = batch[:, 0] - kink
            return np.where(shifted < 0, left * shifted, right * shifted)
        case NegatedParams(inner=inner):
            return -evaluate_batch(inner, batch)
        case CustomParams(evaluate=function):
            return np.asarray(function(batch), dtype=float)
        case _:
            raise DomainError(f'Cannot evaluate "{spec.key}"')


def evaluate(spec: FunctionSpec, z: np.ndarray | float) -> float:
    """f at a single point."""
    point = np.asarray(z, dtype=float).reshape(1, spec.dimension)
    return float(evaluate_batch(spec, point)[0])


def _piecewise_slope(shifted: np.ndarray, left: float, right: float) -> np.ndarray:
    # At the kink take 0 when it is a valid subgradient, otherwise the left slope
    at_kink = 0.0 if min(left, right) <= 0.0 <= max(left, right) else left
    return np.where(shifted < 0, left, np.where(shifted > 0, right, at_kink))


def subgradient_batch(spec: FunctionSpec, Z: np.ndarray) -> np.ndarray:
    """
    An a.e. gradient at each row of Z. Ties in an argmax go to the lowest index and |·| has derivative 0 at 0.
    """
    batch = as_batch(spec, Z)
    m, n = batch.shape
    match spec.params:
        case LinearParams(u=u):
            return np.broadcast_to(u, (m, n)).copy()
        case SupParams():
            gradient = np.zeros((m, n))
            index = np.argmax(np.abs(batch), axis=1)
            rows = np.arange(m)
            gradient[rows, index] = np.sign(batch[rows, index])
            return gradient
        case LpParams(p=p) if p == 1:
            return np.sign(batch)
        case LpParams(p=p):
            norms = np.linalg.norm(batch, ord=p, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            gradient = np.sign(batch) * (np.abs(batch) / safe[:, None]) ** (p - 1.0)
            gradient[norms == 0] = 0.0
            return gradient
        case MatrixParams(A=A):
            image = batch @ A.T
            norms = np.linalg.norm(image, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            gradient = (image @ A) / safe[:, None]
            gradient[norms == 0] = 0.0
            return gradient
        case TiltParams(base=base, t=t, x0_star=x0):
            return subgradient_batch(base, batch) + t * np.sign(batch @ x0)[:, None] * x0[None, :]
        case GAlphaParams(alpha=alpha, c_alpha=c):
            return (c * (batch[:, 0] > alpha))[:, None].astype(float)
        case MonomialParams() as monomial:
            return (monomial.degree * batch[:, 0] ** (monomial.degree - 1))[:, None]
        case PiecewiseLinearParams(left_slope=left, right_slope=right, kink=kink):
            return _piecewise_slope(batch[:, 0] - kink, left, right)[:, None]
        case NegatedParams(inner=inner):
            return -subgradient_batch(inner, batch)
        case CustomParams(gradient=gradient) if gradient is not None:
            return np.asarray(gradient(batch), dtype=float).reshape(m, n)
        case CustomParams(evaluate=function):
            return _finite_difference_gradient(function, batch)
        case _:
            raise DomainError(f'No gradient available for "{spec.key}"')


def subgradient(spec: FunctionSpec, z: np.ndarray | float) -> np.ndarray:
    point = np.asarray(z, dtype=float).reshape(1, spec.dimension)
    return subgradient_batch(spec, point)[0]


def _finite_difference_gradient(function: BatchFunction, batch: np.ndarray, h: float = 1e-6) -> np.ndarray:
    gradient = np.empty_like(batch)
    for i in range(batch.shape[1]):
        step = np.zeros(batch.shape[1])
        step[i] = h
        gradient[:, i] = (function(batch + step) - function(batch - step)) / (2 * h)
    return gradient


def derivative(spec: FunctionSpec) -> Callable[[float], float]:
    """The a.e. derivative of a 1-D function as a scalar callable, for quadrature."""
    if not spec.is_one_dimensional:
        raise DomainError(f'"{spec.key}" is not a function of one variable')
    return lambda t: float(subgradient_batch(spec, np.array([[t]]))[0, 0])


def right_derivative(spec: FunctionSpec, t: float, h: float = 1e-7) -> float:
    """g′(t+), in closed form for the piecewise families and by a forward difference otherwise."""
    if not spec.is_one_dimensional:
        raise DomainError(f'"{spec.key}" is not a function of one variable')

    match spec.params:
        case GAlphaParams(alpha=alpha, c_alpha=c):
            return c if t >= alpha else 0.0
        case PiecewiseLinearParams(left_slope=left, right_slope=right, kink=kink):
            return right if t >= kink else left
        case LinearParams(u=u):
            return float(u[0])
        case _:
            return (evaluate(spec, t + h) - evaluate(spec, t)) / h


def left_derivative(spec: FunctionSpec, t: float, h: float = 1e-7) -> float:
    """g′(t−), the companion of `right_derivative`."""
    if not spec.is_one_dimensional:
        raise DomainError(f'"{spec.key}" is not a function of one variable')

    match spec.params:
        case GAlphaParams(alpha=alpha, c_alpha=c):
            return c if t > alpha else 0.0
        case PiecewiseLinearParams(left_slope=left, right_slope=right, kink=kink):
            return right if t > kink else left
        case LinearParams(u=u):
            return float(u[0])
        case _:
            return (evaluate(spec, t) - evaluate(spec, t - h)) / h


def rate_value(rate: RateFunction, t: float | np.ndarray) -> float | np.ndarray:
    """α(t) for the ℓ∞, ℓ₄ and ellipsoidal tail families."""
    s = np.asarray(t, dtype=float)
    if np.any(s < 0):
        raise DomainError('Rate functions are defined for t ≥ 0')

    match rate.kind:
        case RateKind.ALPHA_INF:
            n = float(rate.n or 1)
            value = np.maximum(s ** 2, s * math.sqrt(math.log(n)))
        case RateKind.ALPHA_4:
            n = float(rate.n or 1)
            value = np.maximum(np.minimum(s ** 2 * math.sqrt(n), np.sqrt(s) * n ** 0.375), s ** 2)
        case RateKind.ALPHA_ELLIPSOIDAL:
            matrix = rate.matrix
            assert matrix is not None
            hs, s4, op = matrix.hs_norm, matrix.schatten4_norm, matrix.op_norm
            value = np.maximum(np.minimum(s ** 2 * hs ** 2 / s4 ** 4, s * hs / op ** 2), s ** 2 / op ** 2)
        case _:
            raise DomainError(f'Unknown rate kind: {rate.kind}')

    return float(value) if np.ndim(value) == 0 else value


def rate_for(spec: FunctionSpec) -> RateFunction:
    """The rate family matching a catalog norm."""
    match spec.params:
        case SupParams():
            return RateFunction(kind=RateKind.ALPHA_INF, n=spec.dimension)
        case LpParams(p=p) if p == 4:
            return RateFunction(kind=RateKind.ALPHA_4, n=spec.dimension)
        case MatrixParams() as matrix:
            return RateFunction(kind=RateKind.ALPHA_ELLIPSOIDAL, matrix=matrix)
        case _:
            raise DomainError(f'No two-sided rate is known for "{spec.key}"')


# --- keys -----------------------------------------------------------------------------------------------------------

def load_matrix(path: str | Path) -> np.ndarray:
    """
    Reads a matrix stored as whitespace-separated reals: a header `m n`, then the m·n entries in column-major order.
    """
    try:
        tokens = Path(path).read_text(encoding='utf-8').split()
    except OSError as e:
        raise ReportIOError(f'Could not read matrix file "{path}": {e}') from e

    try:
        m, n = int(tokens[0]), int(tokens[1])
        values = np.array(tokens[2:], dtype=float)
    except (IndexError, ValueError) as e:
        raise DomainError(f'Malformed matrix file "{path}": {e}') from e

    if m < 1 or n < 1 or values.size != m * n:
        raise DomainError(f'Matrix file "{path}" declares {m}x{n} but holds {values.size} entries')
    return values.reshape((m, n), order='F')


def _parse_fields(tokens: list[str], key: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for token in tokens:
        name, sep, value = token.partition('=')
        if not sep or not name or not value:
            raise CatalogKeyError(f'Malformed field "{token}" in catalog key "{key}"')
        fields[name] = value
    return fields


def _int_field(fields: dict[str, str], name: str, key: str, default: int | None = None) -> int:
    raw = fields.get(name)
    if raw is None:
        if default is None:
            raise CatalogKeyError(f'Catalog key "{key}" is missing the "{name}=" field')
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise CatalogKeyError(f'Field "{name}" of catalog key "{key}" is not an integer') from e


def _float_field(fields: dict[str, str], name: str, key: str, default: float | None = None) -> float:
    raw = fields.get(name)
    if raw is None:
        if default is None:
            raise CatalogKeyError(f'Catalog key "{key}" is missing the "{name}=" field')
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise CatalogKeyError(f'Field "{name}" of catalog key "{key}" is not a number') from e


def parse_key(key: str, n_override: int | None = None) -> FunctionSpec:
    """
    Resolves a catalog key such as `linf:n=1024`, `tilted:linf:n=256:t=4`, `galpha:a=3` or `neg:l4:n=64`.
    `n_override` replaces the dimension field of dimension-carrying keys.

    Raises:
        CatalogKeyError: If the key does not name a function the catalog can build.
    """
    tokens = [token.strip() for token in key.strip().split(':') if token.strip()]
    if not tokens:
        raise CatalogKeyError('Empty catalog key')

    family, rest = tokens[0].lower(), tokens[1:]
    try:
        match family:
            case 'neg':
                return make_negated(parse_key(':'.join(rest), n_override))
            case 'tilted':
                tilt_fields = [token for token in rest if token.startswith('t=')]
                base_tokens = [token for token in rest if not token.startswith('t=')]
                t = _float_field(_parse_fields(tilt_fields, key), 't', key, default=4.0)
                return make_tilted(parse_key(':'.join(base_tokens), n_override), t)
            case _:
                return _parse_simple(family, _parse_fields(rest, key), key, n_override)
    except CatalogKeyError:
        raise
    except (DomainError, ReportIOError) as e:
        raise CatalogKeyError(f'Catalog key "{key}" cannot be built: {e}') from e


def _parse_simple(family: str, fields: dict[str, str], key: str, n_override: int | None) -> FunctionSpec:
    def dimension() -> int:
        return n_override if n_override is not None else _int_field(fields, 'n', key)

    match family:
        case 'linear':
            n = dimension()
            match fields.get('u', 'flat'):
                case 'flat':
                    u = np.full(n, 1.0 / math.sqrt(n))
                case 'e1':
                    u = np.zeros(n)
                    u[0] = 1.0
                case other:
                    raise CatalogKeyError(f'Unknown direction "u={other}" in catalog key "{key}"')
            suffix = '' if 'u' not in fields else f':u={fields["u"]}'
            return make_linear(u, key=f'linear:n={n}{suffix}')
        case 'linf':
            return make_lp_norm(dimension(), math.inf)
        case 'ellipsoidal':
            if 'file' in fields:
                return make_ellipsoidal(load_matrix(fields['file']), key=f'ellipsoidal:file={fields["file"]}')
            n = dimension()
            gap = _float_field(fields, 'gap', key, default=1.0)
            diagonal = np.ones(n)
            diagonal[0] = gap
            return make_ellipsoidal(np.diag(diagonal), key=f'ellipsoidal:n={n}:gap={_format_number(gap)}')
        case 'galpha':
            return make_galpha(_float_field(fields, 'a', key))
        case 'monomial':
            return make_odd_monomial(_int_field(fields, 'k', key, default=1))
        case 'abs':
            return make_abs()
        case 'pospart':
            return make_positive_part()
        case lp if lp.startswith('l') and len(lp) > 1:
            try:
                p = float(lp[1:])
            except ValueError as e:
                raise CatalogKeyError(f'Unknown catalog family "{family}" in key "{key}"') from e
            return make_lp_norm(dimension(), p)
        case _:
            raise CatalogKeyError(f'Unknown catalog family "{family}" in key "{key}"')


def default_registry() -> list[FunctionSpec]:
    return [parse_key(key) for key in DEFAULT_KEYS]


def list_catalog(keys: list[str] | None = None) -> str:
    """A text table of key, family, dimension, Lipschitz constant and convexity for each registered function."""
    specs = [parse_key(key) for key in (keys or DEFAULT_KEYS)]
    rows = [('key', 'family', 'n', 'lipschitz', 'convex')]
    rows += [(spec.key,
              spec.family.value,
              str(spec.dimension),
              '-' if spec.lipschitz is None else f'{spec.lipschitz:.6g}',
              'yes' if spec.convex else 'no') for spec in specs]

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return '\n'.join('  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows)
