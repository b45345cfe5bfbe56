"""Two-component Gaussian mixture fitted by regularized EM."""

import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from ..utils.batch_processor import BatchProcessor
from ..utils.error_handler import ValidationError
from ..utils.logging_config import get_logger
from .features import FeatureField
from .reduction import DEGENERATE_VARIANCE

logger = get_logger(__name__)

N_COMPONENTS = 2
REGULARIZATION_SCALE = 1e-6
# Components with less soft mass than this keep their previous parameters
MIN_COMPONENT_MASS = 1e-8


@dataclass
class GaussianMixtureState:
    """
    Fitted mixture parameters.

    `log_likelihood` is the penalized mean log-likelihood that EM maximizes;
    `history` holds its value after initialization and after every iteration.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    iterations: int
    history: List[float] = field(default_factory=list)
    degenerate: bool = False
    regularization: float = 0.0
    restart: int = 0
    converged: bool = False

    def __post_init__(self):
        if self.weights.shape != (N_COMPONENTS,):
            raise ValidationError(f"expected {N_COMPONENTS} weights, got shape {self.weights.shape}")
        if np.any(self.weights < 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ValidationError(f"weights must be non-negative and sum to 1, got {self.weights}")
        if self.covariances.shape[0] != N_COMPONENTS or self.means.shape[0] != N_COMPONENTS:
            raise ValidationError("means/covariances must have one entry per component")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """log N(x | mean_k, cov_k) for each component, shape (N, 2)."""
        return np.stack([_log_gaussian(x, self.means[k], self.covariances[k]) for k in range(N_COMPONENTS)], axis=1)

    def log_likelihood_ratio(self, x: np.ndarray) -> np.ndarray:
        """log p(x | component 1) - log p(x | component 0)."""
        if self.degenerate:
            return np.zeros(len(x))
        dens = self.component_log_densities(x)
        return dens[:, 1] - dens[:, 0]

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        if self.degenerate:
            return np.full((len(x), N_COMPONENTS), 0.5)
        joint = _log_joint(x, self.weights, self.means, self.covariances)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def swapped(self) -> "GaussianMixtureState":
        """Same mixture with the component labels exchanged."""
        return GaussianMixtureState(
            weights=self.weights[::-1].copy(), means=self.means[::-1].copy(),
            covariances=self.covariances[::-1].copy(), log_likelihood=self.log_likelihood,
            iterations=self.iterations, history=list(self.history), degenerate=self.degenerate,
            regularization=self.regularization, restart=self.restart, converged=self.converged,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'weights': self.weights.tolist(),
            'log_likelihood': self.log_likelihood,
            'iterations': self.iterations,
            'degenerate': self.degenerate,
            'regularization': self.regularization,
            'restart': self.restart,
            'converged': self.converged,
        }


def _log_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(cov)
    z = solve_triangular(chol, (x - mean).T, lower=True)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (x.shape[1] * np.log(2.0 * np.pi) + log_det + (z * z).sum(axis=0))


def _log_joint(x, weights, means, covariances) -> np.ndarray:
    with np.errstate(divide='ignore'):
        log_w = np.log(weights)
    return np.stack(
        [log_w[k] + _log_gaussian(x, means[k], covariances[k]) for k in range(N_COMPONENTS)], axis=1
    )


def _inverse_trace(cov: np.ndarray) -> float:
    chol_inv = solve_triangular(np.linalg.cholesky(cov), np.eye(cov.shape[0]), lower=True)
    return float((chol_inv * chol_inv).sum())


def _objective(x, weights, means, covariances, eps) -> Tuple[float, np.ndarray]:
    """
    Penalized mean log-likelihood and the per-point log joint.

    The penalty -eps/2 * sum_k tr(cov_k^-1) is the log prior whose MAP
    M-step is cov_k = (S_k + eps * N * I) / N_k.
    """
    joint = _log_joint(x, weights, means, covariances)
    penalty = 0.5 * eps * sum(_inverse_trace(c) for c in covariances)
    return float(logsumexp(joint, axis=1).mean()) - penalty, joint


def _m_step(x, resp, eps, previous: Optional[Tuple] = None):
    n, d = x.shape
    mass = resp.sum(axis=0)
    weights = mass / mass.sum()
    means = np.empty((N_COMPONENTS, d))
    covariances = np.empty((N_COMPONENTS, d, d))
    ridge = eps * n * np.eye(d)
    for k in range(N_COMPONENTS):
        if mass[k] < MIN_COMPONENT_MASS:
            if previous is not None:
                means[k], covariances[k] = previous[1][k], previous[2][k]
            else:
                means[k] = x.mean(axis=0)
                covariances[k] = np.cov(x, rowvar=False, bias=True).reshape(d, d) + eps * np.eye(d)
            continue
        means[k] = resp[:, k] @ x / mass[k]
        diff = x - means[k]
        scatter = (resp[:, k, None] * diff).T @ diff
        cov = (scatter + ridge) / mass[k]
        covariances[k] = (cov + cov.T) / 2.0
    return weights, means, covariances


def _kmeans_labels(x: np.ndarray, seed: int) -> np.ndarray:
    with warnings.catch_warnings():
        # duplicate points may leave fewer distinct clusters than requested
        warnings.simplefilter('ignore')
        km = KMeans(n_clusters=N_COMPONENTS, init='random', n_init=1, random_state=seed)
        return km.fit_predict(x)


def _run_em(x, init_seed, max_iter, tol, eps, restart) -> GaussianMixtureState:
    labels = _kmeans_labels(x, init_seed)
    params = _m_step(x, np.eye(N_COMPONENTS)[labels], eps)
    objective, joint = _objective(x, *params, eps)
    history = [objective]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        params = _m_step(x, resp, eps, previous=params)
        new_objective, joint = _objective(x, *params, eps)
        history.append(new_objective)
        gain = new_objective - objective
        objective = new_objective
        if gain < tol:
            converged = True
            break
    weights, means, covariances = params
    return GaussianMixtureState(
        weights=weights, means=means, covariances=covariances, log_likelihood=objective,
        iterations=iterations, history=history, regularization=eps, restart=restart, converged=converged,
    )


def degenerate_state(dim: int) -> GaussianMixtureState:
    return GaussianMixtureState(
        weights=np.full(N_COMPONENTS, 1.0 / N_COMPONENTS), means=np.zeros((N_COMPONENTS, dim)),
        covariances=np.stack([np.eye(dim)] * N_COMPONENTS), log_likelihood=0.0, iterations=0,
        degenerate=True, converged=True,
    )


def em_fit(
    field: Union[FeatureField, np.ndarray],
    max_iter: int = 100,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 10,
    workers: int = 1
) -> GaussianMixtureState:
    """
    Fit a two-Gaussian mixture with seeded 2-means restarts.

    Each restart initializes from k-means with random centres; the restart
    with the highest final penalized log-likelihood wins, ties going to the
    lowest restart index. Covariances get a ridge of
    eps = 1e-6 * trace(cov(x)) / d (scaled by N / N_k) at every M-step.

    Args:
        field: Reduced feature field, or an (N, d) array
        max_iter: EM iterations per restart
        tol: Stop once the per-iteration gain drops below this
        seed: Seeds the restart initializations
        restarts: Number of initializations
        workers: Restarts run concurrently on this many threads

    Returns:
        Best state; flagged `degenerate` for zero-variance input
    """
    if isinstance(field, FeatureField):
        x = field.flat()
        flagged = field.degenerate
    else:
        x = np.asarray(field, dtype=np.float64)
        flagged = False
    if x.ndim != 2:
        raise ValidationError(f"expected (N, d) vectors, got shape {x.shape}")
    n, d = x.shape
    if n < 2 * d:
        raise ValidationError(f"EM needs at least {2 * d} vectors in dimension {d}, have {n}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("feature vectors contain non-finite values")
    if restarts < 1 or max_iter < 1:
        raise ValidationError("restarts and max_iter must be >= 1")

    total_variance = float(np.trace(np.cov(x, rowvar=False, bias=True).reshape(d, d)))
    if flagged or total_variance <= DEGENERATE_VARIANCE:
        logger.info("degenerate feature field, skipping EM")
        return degenerate_state(d)

    eps = REGULARIZATION_SCALE * total_variance / d
    # any non-negative seed, including the 64-bit per-image seeds of the localizer
    init_seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=restarts)
    processor = BatchProcessor(max_workers=workers, show_progress=False)
    states = processor.map(
        lambda r: _run_em(x, int(init_seeds[r]), max_iter, tol, eps, r), range(restarts), desc="em restarts"
    )

    best = states[0]
    for state in states[1:]:
        if state.log_likelihood > best.log_likelihood:
            best = state
    logger.debug("EM finished", extra={
        'restart': best.restart, 'iterations': best.iterations, 'log_likelihood': best.log_likelihood,
    })
    return best
