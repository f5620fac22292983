import logging

import numpy as np
from scipy import linalg

from core.errors import DomainError
from core.models.dvoretzky import SubspaceSample
from core.models.streams import RngStream
from core.settings import GaussianMethod
from core.tools.gaussian import sample_gaussian_matrix

_log = logging.getLogger('grassmann')

# Relative size of the smallest R diagonal entry below which a Gaussian frame counts as rank deficient
RANK_TOLERANCE = 1e-10
MAX_RESAMPLES = 8


def sample_subspace(n: int,
                    k: int,
                    stream: RngStream,
                    method: GaussianMethod | None = None) -> tuple[SubspaceSample, RngStream]:
    """
    A Haar-random k-dimensional subspace of ℝⁿ and the advanced stream.

    The rows of a k×n Gaussian matrix are orthonormalized by a QR factorization with the signs of R's diagonal
    made positive, which makes the frame itself Haar distributed.
    """
    if not 1 <= k <= n:
        raise DomainError(f'A subspace needs 1 ≤ k ≤ n, got k={k}, n={n}')

    start = stream.to_string()
    for attempt in range(MAX_RESAMPLES):
        G, stream = sample_gaussian_matrix(stream, k, n, method)
        q, r = linalg.qr(G.T, mode='economic')
        diagonal = np.diag(r)
        if np.min(np.abs(diagonal)) > RANK_TOLERANCE * np.max(np.abs(diagonal)):
            signs = np.where(diagonal < 0, -1.0, 1.0)
            return SubspaceSample(basis=(q * signs).T.copy(), provenance=start), stream
        _log.warning(f'⚠️ Rank-deficient Gaussian frame from {start} (attempt {attempt + 1}), resampling')

    raise DomainError(f'Could not draw a full-rank {k}×{n} frame from {start}')
