"""Quantile check loss, its smooth Huber-type surrogate, and their gradients.

These are the scalar kernels everything else is built on.  All functions
accept scalars or numpy arrays and broadcast elementwise; the aggregate
losses operate on a full design matrix with the intercept carried as
coefficient 0 (implicit regressor 1).
"""

import numpy as np

DEFAULT_GAMMA = 0.01


def _validate_tau(tau):
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")


def _validate_gamma(gamma):
    if not gamma > 0.0:
        raise ValueError(f"smoothing half-width must be positive, got {gamma}")


def check_loss(u, tau):
    """Piecewise-linear quantile loss: u*tau for u >= 0, u*(tau-1) otherwise."""
    _validate_tau(tau)
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0.0, tau * u, (tau - 1.0) * u)
    return float(out) if out.ndim == 0 else out


def huber_abs(u, gamma=DEFAULT_GAMMA):
    """Smooth surrogate for ``abs``: quadratic within ``gamma`` of zero, linear outside.

    Continuously differentiable, with the two branches meeting at ``|u| == gamma``.
    """
    _validate_gamma(gamma)
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    out = np.where(au <= gamma, u * u / (2.0 * gamma), au - gamma / 2.0)
    return float(out) if out.ndim == 0 else out


def huber_quantile_loss(u, tau, gamma=DEFAULT_GAMMA):
    """Smoothed check loss: 0.5 * (huber_abs(u) + (2*tau - 1)*u).

    Underestimates the check loss by at most ``gamma / 4`` (the gap peaks at
    ``|u| == gamma``), which is what makes the surrogate safe to minimize in
    place of the exact loss.
    """
    _validate_tau(tau)
    out = 0.5 * (np.asarray(huber_abs(u, gamma)) + (2.0 * tau - 1.0) * np.asarray(u, dtype=float))
    return float(out) if out.ndim == 0 else out


def huber_quantile_grad(u, tau, gamma=DEFAULT_GAMMA):
    """Derivative of :func:`huber_quantile_loss` in u.

    Equals ``u/(2*gamma) + tau - 0.5`` inside the quadratic zone and saturates
    at ``tau - 1`` / ``tau`` outside; continuous everywhere.
    """
    _validate_tau(tau)
    _validate_gamma(gamma)
    u = np.asarray(u, dtype=float)
    core = u / (2.0 * gamma)
    out = np.where(np.abs(u) <= gamma, core, 0.5 * np.sign(u)) + (tau - 0.5)
    return float(out) if out.ndim == 0 else out


def _residuals(beta, X, target):
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    target = np.asarray(target, dtype=float)
    if X.ndim != 2:
        raise ValueError("design matrix must be 2-D")
    n, d = X.shape
    if beta.shape != (d + 1,):
        raise ValueError(f"coefficient vector must have length {d + 1} "
                         f"(intercept first), got {beta.shape}")
    if target.shape != (n,):
        raise ValueError(f"target vector must have length {n}, got {target.shape}")
    return target - beta[0] - X @ beta[1:]


def data_loss(beta, X, y, tau, gamma=DEFAULT_GAMMA):
    """Mean smoothed check loss of the residuals y - X @ beta[1:] - beta[0]."""
    r = _residuals(beta, X, y)
    return float(np.mean(huber_quantile_loss(r, tau, gamma)))


def grad_data_loss(beta, X, y, tau, gamma=DEFAULT_GAMMA):
    """Gradient of :func:`data_loss` in beta; component 0 is the intercept."""
    r = _residuals(beta, X, y)
    h = huber_quantile_grad(r, tau, gamma)
    n = len(r)
    g = np.empty(len(beta))
    g[0] = -np.sum(h) / n
    g[1:] = -(np.asarray(X, dtype=float).T @ h) / n
    return g


def prior_loss(beta, X, prior_predictions, tau, gamma=DEFAULT_GAMMA):
    """Mean smoothed check loss against prior predictions instead of y."""
    return data_loss(beta, X, prior_predictions, tau, gamma)


def grad_prior_loss(beta, X, prior_predictions, tau, gamma=DEFAULT_GAMMA):
    """Gradient of :func:`prior_loss` in beta."""
    return grad_data_loss(beta, X, prior_predictions, tau, gamma)
