"""
Linear-Gaussian inverse problems on a spatial grid.

The posterior of a linear forward model with Gaussian noise and a Gaussian
prior is itself Gaussian, so samples are drawn exactly from a Cholesky factor
of the posterior precision. Random numbers come from the counter-based
Philox generator; sample ``i`` consumes the i-th block of draws, so the
output does not depend on how the work is chunked.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.ndimage import gaussian_filter1d

from core.config.settings import config
from core.exceptions import DimensionMismatchError, InvalidArgumentError, NumericalFailureError
from core.monitoring.logger import get_logger
from core.services.scalespace import SpatialGrid, forward_difference, lift_to_axis

logger = get_logger(__name__)


def philox(seed: int) -> np.random.Generator:
    """Counter-based generator for a seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


# =============================================================================
# Operators
# =============================================================================


def gaussian_convolution_operator(grid: SpatialGrid, kernel_std: float) -> sp.csr_matrix:
    """
    Truncated Gaussian blur with reflecting boundary as a sparse matrix.

    Args:
        grid: Spatial grid of the signal
        kernel_std: Kernel standard deviation in grid cells

    Returns:
        Symmetric (N1*N2) x (N1*N2) matrix acting on row-major flattened images
    """
    if not (kernel_std > 0 and math.isfinite(kernel_std)):
        raise InvalidArgumentError(f"kernel_std must be positive, got {kernel_std}")
    radius = max(1, math.ceil(4.0 * kernel_std))

    def blur_matrix(n: int) -> sp.csr_matrix:
        # Column j is the blurred unit impulse e_j
        dense = gaussian_filter1d(np.eye(n), kernel_std, axis=0, mode="reflect", radius=radius)
        return sp.csr_matrix(dense)

    op = blur_matrix(grid.n1)
    if grid.dims == 2:
        op = sp.kron(op, blur_matrix(grid.n2), format="csr")
    return op.tocsr()


def gmrf_prior_precision(grid: SpatialGrid, tau: float, eps: float) -> sp.csr_matrix:
    """Gaussian Markov random field precision ``tau * (eps*I + D^T D)`` with Neumann differences."""
    if tau <= 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    if eps < 0:
        raise InvalidArgumentError(f"eps must be non-negative, got {eps}")
    shape = grid.shape
    quadratic = sp.csr_matrix((grid.size, grid.size))
    for axis in range(grid.dims):
        D = lift_to_axis(forward_difference(shape[axis]), axis, shape)
        quadratic = quadratic + (D.T @ D)
    return (tau * (eps * sp.identity(grid.size, format="csr") + quadratic)).tocsr()


# =============================================================================
# Model
# =============================================================================


@dataclass(frozen=True, eq=False)
class LinearGaussianModel:
    """``Y = G F + W`` with ``W ~ N(0, gamma^2 I)`` and ``F ~ N(0, P^-1)``."""
    grid: SpatialGrid
    forward: sp.csr_matrix
    noise_std: float
    prior_precision: sp.csr_matrix

    def __post_init__(self):
        n = self.grid.size
        forward = sp.csr_matrix(self.forward)
        precision = sp.csr_matrix(self.prior_precision)
        if forward.shape[1] != n:
            raise DimensionMismatchError("forward operator does not act on the signal grid",
                                         expected=n, actual=forward.shape)
        if precision.shape != (n, n):
            raise DimensionMismatchError("prior precision has the wrong shape",
                                         expected=(n, n), actual=precision.shape)
        if not (self.noise_std > 0 and math.isfinite(self.noise_std)):
            raise InvalidArgumentError(f"noise_std must be positive, got {self.noise_std}")
        asymmetry = abs(precision - precision.T).max() if precision.nnz else 0.0
        if asymmetry > 1e-12 * max(1.0, abs(precision).max()):
            raise InvalidArgumentError("prior precision must be symmetric",
                                       detail={"asymmetry": float(asymmetry)})
        try:
            la.cholesky(precision.toarray(), lower=True)
        except la.LinAlgError as e:
            raise InvalidArgumentError("prior precision must be positive definite") from e
        object.__setattr__(self, "forward", forward)
        object.__setattr__(self, "prior_precision", precision)

    @property
    def signal_size(self) -> int:
        return self.grid.size

    @property
    def data_size(self) -> int:
        return self.forward.shape[0]

    def check_data(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size != self.data_size:
            raise DimensionMismatchError("data vector has the wrong length",
                                         expected=self.data_size, actual=y.size)
        return y

    def check_signal(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64).reshape(-1)
        if f.size != self.signal_size:
            raise DimensionMismatchError("signal vector has the wrong length",
                                         expected=self.signal_size, actual=f.size)
        return f


def deconvolution_model(
    grid: SpatialGrid,
    kernel_std: float,
    gamma: Optional[float] = None,
    tau: Optional[float] = None,
    eps: Optional[float] = None,
) -> LinearGaussianModel:
    """Gaussian deconvolution with a GMRF prior; unset parameters come from config."""
    gamma = config.bayes.gamma if gamma is None else gamma
    tau = config.bayes.tau if tau is None else tau
    eps = config.bayes.eps if eps is None else eps
    return LinearGaussianModel(
        grid=grid,
        forward=gaussian_convolution_operator(grid, kernel_std),
        noise_std=gamma,
        prior_precision=gmrf_prior_precision(grid, tau, eps),
    )


@dataclass(frozen=True, eq=False)
class PosteriorFactor:
    """Lower Cholesky factor ``L`` of the posterior precision ``H = L L^T``."""
    lower: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return la.cho_solve((self.lower, True), rhs)

    def whiten_inverse(self, xi: np.ndarray) -> np.ndarray:
        """``L^-T xi``; maps standard normal vectors to N(0, H^-1)."""
        return la.solve_triangular(self.lower, xi, lower=True, trans="T")

    def precision(self) -> np.ndarray:
        return self.lower @ self.lower.T


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Posterior samples with their unnormalized log densities."""
    samples: np.ndarray
    log_densities: np.ndarray
    seed: int

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        log_densities = np.asarray(self.log_densities, dtype=np.float64).reshape(-1)
        if samples.shape[0] != log_densities.size:
            raise DimensionMismatchError("one log density per sample is required",
                                         expected=samples.shape[0], actual=log_densities.size)
        if not np.all(np.isfinite(log_densities)):
            raise InvalidArgumentError("log densities must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "log_densities", log_densities)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]


# =============================================================================
# Posterior computations
# =============================================================================


def posterior_moments(model: LinearGaussianModel, y: np.ndarray) -> Tuple[np.ndarray, PosteriorFactor]:
    """
    Posterior mean and Cholesky factor of the posterior precision.

    ``H = G^T G / gamma^2 + P`` and the mean solves ``H m = G^T y / gamma^2``.
    """
    y = model.check_data(y)
    G = model.forward
    gamma2 = model.noise_std ** 2
    H = (G.T @ G).toarray() / gamma2 + model.prior_precision.toarray()
    try:
        lower = la.cholesky(H, lower=True)
    except la.LinAlgError as e:
        raise NumericalFailureError("posterior precision is not positive definite") from e
    factor = PosteriorFactor(lower)
    mean = factor.solve(G.T @ y / gamma2)
    return mean, factor


def unnormalized_log_posterior(model: LinearGaussianModel, y: np.ndarray, f: np.ndarray) -> float:
    """``-||G f - y||^2 / (2 gamma^2) - f^T P f / 2``."""
    y = model.check_data(y)
    f = model.check_signal(f)
    return float(log_posterior_batch(model, y, f[None, :])[0])


def log_posterior_batch(model: LinearGaussianModel, y: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior of every row of ``F``."""
    F = np.atleast_2d(F)
    residual = F @ model.forward.T - y[None, :]
    misfit = np.einsum("ij,ij->i", residual, residual) / (2.0 * model.noise_std ** 2)
    prior = np.einsum("ij,ij->i", F @ model.prior_precision.T, F) / 2.0
    return -misfit - prior


def sample_posterior(
    model: LinearGaussianModel,
    y: np.ndarray,
    S: int,
    seed: int,
    chunk: Optional[int] = None,
) -> SampleSet:
    """
    Draw S exact samples from the Gaussian posterior.

    Args:
        model: Linear-Gaussian model
        y: Data vector
        S: Number of samples (>= 1)
        seed: Philox key
        chunk: Samples generated per batch (default from config)

    Returns:
        SampleSet with samples of shape (S, N1*N2)
    """
    if S < 1:
        raise InvalidArgumentError(f"S must be >= 1, got {S}")
    chunk = config.bayes.sample_chunk if chunk is None else chunk
    y = model.check_data(y)
    mean, factor = posterior_moments(model, y)
    rng = philox(seed)
    n = model.signal_size

    samples = np.empty((S, n), dtype=np.float64)
    for start in range(0, S, chunk):
        stop = min(S, start + chunk)
        # Row-major draws: sample i always receives draws [i*n, (i+1)*n)
        xi = rng.standard_normal((stop - start, n))
        samples[start:stop] = mean[None, :] + factor.whiten_inverse(xi.T).T
    log_densities = log_posterior_batch(model, y, samples)

    logger.info("Sampled posterior", samples=S, dimension=n, seed=int(seed))
    return SampleSet(samples=samples, log_densities=log_densities, seed=int(seed))


def posterior_mean(sample_set: SampleSet) -> np.ndarray:
    """Arithmetic mean of the samples."""
    if sample_set.size < 1:
        raise InvalidArgumentError("at least one sample is required")
    return sample_set.samples.mean(axis=0)


def map_estimate(model: LinearGaussianModel, y: np.ndarray) -> np.ndarray:
    """Maximum-a-posteriori estimate; equals the posterior mean for a Gaussian posterior."""
    mean, _ = posterior_moments(model, y)
    return mean


def posterior_std(model: LinearGaussianModel, y: np.ndarray) -> np.ndarray:
    """Marginal posterior standard deviations ``sqrt(diag(H^-1))``."""
    _, factor = posterior_moments(model, y)
    inverse_lower = la.solve_triangular(factor.lower, np.eye(model.signal_size), lower=True)
    return np.sqrt(np.einsum("ij,ij->j", inverse_lower, inverse_lower))


def simulate_data(model: LinearGaussianModel, f_true: np.ndarray, seed: int) -> np.ndarray:
    """Noisy observation ``y = G f_true + gamma * xi``."""
    f_true = model.check_signal(f_true)
    xi = philox(seed).standard_normal(model.data_size)
    return model.forward @ f_true + model.noise_std * xi


# =============================================================================
# Ground truth
# =============================================================================


def gaussian_bumps(
    grid: SpatialGrid,
    centers: Sequence[Sequence[float]],
    variances: Iterable[float],
    amplitudes: Iterable[float],
) -> np.ndarray:
    """
    Sum of Gaussian bumps ``a * exp(-|x - m|^2 / (2 s))`` sampled on the grid.

    Centers are given in index coordinates; distances use the grid steps.

    Returns:
        Image of shape (N1, N2)
    """
    i = np.arange(grid.n1)[:, None] * grid.h1
    j = np.arange(grid.n2)[None, :] * grid.h2
    image = np.zeros(grid.shape)
    for center, s, a in zip(centers, variances, amplitudes):
        c = list(center) + [0.0] * (2 - len(center))
        dist2 = (i - c[0] * grid.h1) ** 2 + (j - c[1] * grid.h2) ** 2
        image += a * np.exp(-dist2 / (2.0 * s))
    return image


def prototypical_blob(grid: SpatialGrid, center: Sequence[float], s: float) -> np.ndarray:
    """Normalized Gaussian ``exp(-|x - m|^2 / (2 s)) / (2 pi s)^(d/2)`` sampled on the grid."""
    norm = (2.0 * math.pi * s) ** (grid.dims / 2.0)
    return gaussian_bumps(grid, [center], [s], [1.0 / norm])
