"""Exact Gaussian-process regression of slip ratio against time.

The kernel is a Brownian-motion term multiplied by a squared-exponential:

    k(t, t') = sigma2_b * min(t, t') * sigma2_rbf * exp(-(t-t')^2 / (2 ell^2))

so uncertainty grows with elapsed time while nearby samples stay
correlated. Time inputs are window-relative: the caller shifts tags so the
learning window starts at 0 (the Brownian term pins the origin).
Hyperparameters are refit per window by multi-start L-BFGS-B on the exact
log marginal likelihood with analytic gradients in log-parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, cho_solve, solve_triangular
from scipy.optimize import minimize

__all__ = [
    "KernelParams",
    "GpModel",
    "GpPrediction",
    "GpFitError",
    "DEFAULT_PARAMS",
    "kernel_eval",
    "fit",
    "log_marginal_likelihood",
    "optimize_hyperparams",
    "predict",
]

ELL_BOUNDS = (0.1, 60.0)
VAR_BOUNDS = (1e-8, 1e3)
NOISE_BOUNDS = (1e-8, 1.0)

N_JITTER_RETRIES = 3


class GpFitError(RuntimeError):
    """Raised when the kernel matrix cannot be factorized even with jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Composite-kernel hyperparameters.

    sigma2_rbf is dimensionless, ell is in seconds (bounded to
    [0.1, 60] by the optimizer), sigma2_b in 1/s so the Brownian term has
    slip-squared units, sigma2_noise is the observation noise variance.
    """

    sigma2_rbf: float = 0.05
    ell: float = 2.0
    sigma2_b: float = 0.01
    sigma2_noise: float = 1.0e-3

    def __post_init__(self):
        for name in ("sigma2_rbf", "ell", "sigma2_b", "sigma2_noise"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma2_rbf, self.ell, self.sigma2_b, self.sigma2_noise])


DEFAULT_PARAMS = KernelParams()


@dataclass(frozen=True)
class GpModel:
    t: np.ndarray
    y: np.ndarray
    params: KernelParams
    L: np.ndarray          # lower Cholesky factor of K + sigma2_noise I + jitter I
    alpha: np.ndarray      # (K + sigma2_noise I + jitter I)^-1 y
    jitter: float


@dataclass(frozen=True)
class GpPrediction:
    t_star: np.ndarray     # query times, window-relative seconds
    mu_star: np.ndarray
    var_star: np.ndarray


def kernel_eval(t1, t2, params: KernelParams) -> np.ndarray:
    """Gram matrix of the composite kernel between two time vectors."""
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    diff = t1[:, None] - t2[None, :]
    brown = params.sigma2_b * np.minimum(t1[:, None], t2[None, :])
    return brown * params.sigma2_rbf * np.exp(-(diff * diff) / (2.0 * params.ell ** 2))


def _factorize(K_noisy: np.ndarray):
    """Cholesky with adaptive jitter: start at 1e-10 * trace/N, grow 10x."""
    n = K_noisy.shape[0]
    jitter = max(1e-10 * float(np.trace(K_noisy)) / n, 1e-12)
    for _ in range(N_JITTER_RETRIES + 1):
        try:
            L = cholesky(K_noisy + jitter * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GpFitError(
        f"kernel matrix not positive definite after jitter up to {jitter / 10:.3e}")


def fit(t, y, params: KernelParams = DEFAULT_PARAMS) -> GpModel:
    """Condition the GP on observations. Duplicate time tags are allowed
    (the noise term keeps the system well posed)."""
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("need at least one observation")
    if t.shape != y.shape:
        raise ValueError("t and y must have matching length")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite observations")
    K = kernel_eval(t, t, params) + params.sigma2_noise * np.eye(t.size)
    L, jitter = _factorize(K)
    alpha = cho_solve((L, True), y)
    return GpModel(t=t, y=y, params=params, L=L, alpha=alpha, jitter=jitter)


def _lml_and_grad(log_theta: np.ndarray, t: np.ndarray, y: np.ndarray,
                  D2: np.ndarray):
    """Log marginal likelihood and gradient w.r.t. log parameters, ordered
    (sigma2_rbf, ell, sigma2_b, sigma2_noise)."""
    s2_rbf, ell, s2_b, s2_n = np.exp(log_theta)
    n = t.size
    brown = s2_b * np.minimum(t[:, None], t[None, :])
    Kf = brown * s2_rbf * np.exp(-D2 / (2.0 * ell ** 2))
    K = Kf + s2_n * np.eye(n)
    L, _ = _factorize(K)
    alpha = cho_solve((L, True), y)
    lml = (-0.5 * float(y @ alpha)
           - float(np.sum(np.log(np.diag(L))))
           - 0.5 * n * np.log(2.0 * np.pi))
    Kinv = cho_solve((L, True), np.eye(n))
    A = np.outer(alpha, alpha) - Kinv
    # product kernel: d/dlog sigma2_rbf = d/dlog sigma2_b = Kf itself
    g_amp = 0.5 * float(np.sum(A * Kf))
    g_ell = 0.5 * float(np.sum(A * (Kf * (D2 / ell ** 2))))
    g_noise = 0.5 * s2_n * float(np.trace(A))
    return lml, np.array([g_amp, g_ell, g_amp, g_noise])


def log_marginal_likelihood(t, y, params: KernelParams):
    """Exact log evidence and its gradient in log-parameter space."""
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    diff = t[:, None] - t[None, :]
    return _lml_and_grad(np.log(params.as_array()), t, y, diff * diff)


def optimize_hyperparams(t, y, init: KernelParams = DEFAULT_PARAMS,
                         maxiter: int = 60) -> KernelParams:
    """Multi-start maximum-evidence hyperparameters.

    Three deterministic starts (init, init*10, init*0.1, clipped into
    bounds); the best final evidence wins. Bounds: ell in [0.1, 60],
    variances in [1e-8, 1e3], noise in [1e-8, 1].
    """
    t = np.asarray(t, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    diff = t[:, None] - t[None, :]
    D2 = diff * diff

    lb = np.log([VAR_BOUNDS[0], ELL_BOUNDS[0], VAR_BOUNDS[0], NOISE_BOUNDS[0]])
    ub = np.log([VAR_BOUNDS[1], ELL_BOUNDS[1], VAR_BOUNDS[1], NOISE_BOUNDS[1]])

    def objective(log_theta):
        try:
            lml, grad = _lml_and_grad(log_theta, t, y, D2)
        except GpFitError:
            return np.inf, np.zeros(4)
        return -lml, -grad

    theta0 = np.log(init.as_array())
    best = None
    for shift in (0.0, np.log(10.0), -np.log(10.0)):
        start = np.clip(theta0 + shift, lb, ub)
        res = minimize(objective, start, jac=True, method="L-BFGS-B",
                       bounds=list(zip(lb, ub)), options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    s2_rbf, ell, s2_b, s2_n = np.exp(best.x)
    return KernelParams(sigma2_rbf=s2_rbf, ell=ell, sigma2_b=s2_b, sigma2_noise=s2_n)


def predict(model: GpModel, t_star) -> GpPrediction:
    """Posterior mean and variance of the latent slip at query times."""
    t_star = np.atleast_1d(np.asarray(t_star, dtype=float))
    k_star = kernel_eval(model.t, t_star, model.params)
    mu = k_star.T @ model.alpha
    v = solve_triangular(model.L, k_star, lower=True)
    # k(t,t) = sigma2_b * t * sigma2_rbf (the RBF factor is 1 on the diagonal)
    prior = model.params.sigma2_b * model.params.sigma2_rbf * t_star
    var = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
    return GpPrediction(t_star=t_star, mu_star=mu, var_star=var)
