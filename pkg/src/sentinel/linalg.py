"""Dense real-matrix primitives shared by every other module.

All functions are pure and operate on float64 numpy arrays; inputs are
validated to be finite 2-D matrices. Thresholded decisions (rank, nonzero
tests) are driven by a single Tolerance record so the whole pipeline can be
re-tuned from one place.
"""

from dataclasses import dataclass

import numpy as np


class RankDeficiencyError(ValueError):
    """A matrix required to have full row rank does not have it."""

    def __init__(self, observed: int, required: int, context: str = ""):
        self.observed = observed
        self.required = required
        msg = f"rank deficiency: observed rank {observed}, required {required}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


@dataclass(frozen=True)
class Tolerance:
    """Numeric thresholds used across the package.

    rank_rel: relative singular-value cutoff for rank decisions. Weakly
        observable directions of the benchmark sit near 1e-7 of the top
        singular value while round-off noise sits near 1e-16, so the
        default separates the two by several decades on each side.
    residual_abs / residual_rel: absolute / scale-relative slack when
        comparing prediction residuals.
    nonzero_abs: absolute floor below which a sample is considered zero.
    nonzero_rel: cutoff relative to a signal's peak magnitude; a sample
        counts as nonzero only if it exceeds nonzero_rel * peak as well as
        nonzero_abs. Sampling smears impulse responses, so leading samples
        a few orders of magnitude below the peak must read as zero for
        timing tests to be scale-invariant.
    """

    rank_rel: float = 1e-11
    residual_abs: float = 1e-9
    residual_rel: float = 1e-9
    nonzero_abs: float = 1e-12
    nonzero_rel: float = 1e-2

    def __post_init__(self):
        for name in ("rank_rel", "residual_abs", "residual_rel",
                     "nonzero_abs", "nonzero_rel"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"Tolerance.{name} must be strictly positive")


DEFAULT_TOL = Tolerance()


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a finite float64 2-D array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(a, dim: int, name: str = "vector") -> np.ndarray:
    """Validate and return `a` as a finite float64 1-D array of length dim."""
    v = np.asarray(a, dtype=float).reshape(-1)
    if v.shape[0] != dim:
        raise ValueError(f"{name} must have length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def numerical_rank(mat, tol: Tolerance = DEFAULT_TOL) -> int:
    """Number of singular values above rank_rel * sigma_max * max(rows, cols)."""
    m = as_matrix(mat)
    sigma = np.linalg.svd(m, compute_uv=False)
    if sigma[0] == 0.0:
        return 0
    cutoff = tol.rank_rel * sigma[0] * max(m.shape)
    return int(np.sum(sigma > cutoff))


def pseudo_right_inverse(mat, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose right inverse R with mat @ R = I.

    Raises RankDeficiencyError when mat does not have full row rank at the
    given tolerance (no right inverse exists then).
    """
    m = as_matrix(mat)
    rank = numerical_rank(m, tol)
    if rank < m.shape[0]:
        raise RankDeficiencyError(rank, m.shape[0], "pseudo_right_inverse")
    return np.linalg.pinv(m, rcond=tol.rank_rel * max(m.shape))


def matrix_exponential(mat) -> np.ndarray:
    """e^M by scaling-and-squaring with a 20-term truncated series.

    The matrix is scaled by 2**-s so its max-abs norm is at most 0.5, the
    series is summed to the x^20/20! term, and the result squared s times.
    """
    m = as_matrix(mat)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got {m.shape}")
    norm = np.max(np.abs(m))
    squarings = 0
    while norm / (2.0 ** squarings) > 0.5:
        squarings += 1
    scaled = m / (2.0 ** squarings)
    n = m.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 21):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def characteristic_polynomial(mat) -> np.ndarray:
    """Monic characteristic polynomial coefficients a_0..a_{n-1}.

    p(x) = x^n + a_{n-1} x^{n-1} + ... + a_0, computed with the
    Faddeev-LeVerrier recursion (division-free except by integers), so the
    result is deterministic and needs no eigendecomposition.
    """
    a = as_matrix(mat)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"characteristic_polynomial needs a square matrix, got {a.shape}")
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    work = a.copy()
    coeffs[n - 1] = -np.trace(work)
    eye = np.eye(n)
    for k in range(2, n + 1):
        work = a @ (work + coeffs[n - k + 1] * eye)
        coeffs[n - k] = -np.trace(work) / k
    return coeffs[:n]
