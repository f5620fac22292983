from dataclasses import dataclass, field
from enum import Enum
from typing import Callable
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from scipy import linalg

BatchFunction = Callable[[np.ndarray], np.ndarray]


class FunctionFamily(str, Enum):
    LINEAR = 'linear'
    LP_NORM = 'lp_norm'
    SUP_NORM = 'sup_norm'
    ELLIPSOIDAL = 'ellipsoidal'
    TILTED = 'tilted'
    G_ALPHA = 'g_alpha'
    MONOMIAL_ODD = 'monomial_odd'
    CUSTOM = 'custom'


@dataclass(frozen=True, eq=False)
class LinearParams:
    u: np.ndarray


@dataclass(frozen=True)
class LpParams:
    p: float


@dataclass(frozen=True)
class SupParams:
    pass


@dataclass(frozen=True, eq=False)
class MatrixParams:
    """
    A matrix together with the norms the ellipsoidal examples are phrased in. All three norms come from one SVD.
    """
    A: np.ndarray
    singular_values: np.ndarray
    hs_norm: float
    schatten4_norm: float
    op_norm: float

    @classmethod
    def from_matrix(cls, A: np.ndarray) -> Self:
        matrix = np.atleast_2d(np.asarray(A, dtype=float))
        singular_values = linalg.svd(matrix, compute_uv=False)
        return cls(
            A=matrix,
            singular_values=singular_values,
            hs_norm=float(np.sqrt(np.sum(singular_values ** 2))),
            schatten4_norm=float(np.sum(singular_values ** 4) ** 0.25),
            op_norm=float(singular_values[0]) if singular_values.size else 0.0
        )

    @property
    def variance_scale(self) -> float:
        """‖A‖_{S₄}⁴ / ‖A‖_{HS}², the order of Var[‖AZ‖₂]."""
        return self.schatten4_norm ** 4 / self.hs_norm ** 2


@dataclass(frozen=True, eq=False)
class TiltParams:
    base: 'FunctionSpec'
    t: float
    x0_star: np.ndarray
    b: float


@dataclass(frozen=True)
class GAlphaParams:
    alpha: float
    c_alpha: float


@dataclass(frozen=True)
class MonomialParams:
    k: int
    positive_part_mean: float

    @property
    def degree(self) -> int:
        return 2 * self.k + 1


@dataclass(frozen=True)
class PiecewiseLinearParams:
    """t ↦ left_slope·(t - kink) for t < kink and right_slope·(t - kink) otherwise."""
    left_slope: float
    right_slope: float
    kink: float = 0.0


@dataclass(frozen=True, eq=False)
class NegatedParams:
    inner: 'FunctionSpec'


@dataclass(frozen=True, eq=False)
class CustomParams:
    evaluate: BatchFunction
    gradient: BatchFunction | None = None
    x0_star: np.ndarray | None = None


FamilyParams = (LinearParams | LpParams | SupParams | MatrixParams | TiltParams | GAlphaParams | MonomialParams
                | PiecewiseLinearParams | NegatedParams | CustomParams)


@dataclass(frozen=True, eq=False)
class FunctionSpec:
    """
    A function on ℝⁿ studied by the lab, immutable once built.

    `lipschitz` is the closed-form constant when the family has one. For norms it is also b(X), the largest value
    of the norm on the Euclidean unit sphere.
    """
    key: str
    family: FunctionFamily
    dimension: int
    params: FamilyParams
    convex: bool
    lipschitz: float | None
    is_norm: bool = False
    nondecreasing: bool = False
    coordinate_symmetric: bool = False
    reference_variance: float | None = None
    kinks: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError('The dimension of a function must be positive.')
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError('A Lipschitz constant cannot be negative.')

    @property
    def is_one_dimensional(self) -> bool:
        return self.dimension == 1

    def describe(self) -> str:
        lipschitz = 'n/a' if self.lipschitz is None else f'{self.lipschitz:.6g}'
        return f'{self.key} ({self.family.value}, n={self.dimension}, L={lipschitz}, convex={self.convex})'


class RateKind(str, Enum):
    ALPHA_INF = 'alpha_inf'
    ALPHA_4 = 'alpha_4'
    ALPHA_ELLIPSOIDAL = 'alpha_ellipsoidal'


@dataclass(frozen=True, eq=False)
class RateFunction:
    """The exponent describing the multi-level tail of ℓ∞, ℓ₄ or ellipsoidal norms around their center."""
    kind: RateKind
    n: int | None = None
    matrix: MatrixParams | None = None

    def __post_init__(self):
        match self.kind:
            case RateKind.ALPHA_INF | RateKind.ALPHA_4:
                if self.n is None or self.n < 1:
                    raise ValueError(f'{self.kind.value} needs a positive dimension.')
            case RateKind.ALPHA_ELLIPSOIDAL:
                if self.matrix is None:
                    raise ValueError('alpha_ellipsoidal needs the matrix norms.')
