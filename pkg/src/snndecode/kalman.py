"""Linear Kalman-filter velocity decoder, the classical baseline.

State is ``[v1, v2, 1]`` — the two finger velocities plus a constant
bias component.  The transition and observation matrices are fit by
ordinary least squares on the training split, the noise covariances
from the fit residuals.  Decoding is the standard predict/update
recursion with the Joseph-form covariance update, which keeps the
posterior covariance symmetric positive semi-definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

_COND_LIMIT = 1e12


@dataclass
class KfModel:
    """Fitted filter matrices (in standardized units)."""

    A: np.ndarray               # (3, 3) state transition
    W: np.ndarray               # (3, 3) process noise covariance
    C: np.ndarray               # (channels, 3) observation matrix
    Q: np.ndarray               # (channels, channels) observation noise
    ridge: float = 0.0          # regularizer used if the fit was deficient


@dataclass
class KfState:
    mean: np.ndarray            # (3,)
    cov: np.ndarray             # (3, 3)


def _lstsq_rows(X, Y):
    """Solve ``M @ X.T = Y.T`` rows by least squares: returns (M, ridge)."""
    gram = X.T @ X
    ridge = 0.0
    if np.linalg.cond(gram) > _COND_LIMIT:
        ridge = 1e-8 * float(np.trace(gram)) / gram.shape[0]
        gram = gram + ridge * np.eye(gram.shape[0])
    M = np.linalg.solve(gram, X.T @ Y).T
    return M, ridge


def kf_fit(features: np.ndarray, velocities: np.ndarray) -> KfModel:
    """Fit filter matrices on a training split.

    ``features`` is (frames, channels) and ``velocities`` (frames, 2),
    both already standardized.  Rank-deficient regressions fall back to
    a small ridge penalty, reported in the returned model.
    """
    features = np.asarray(features, dtype=np.float64)
    velocities = np.asarray(velocities, dtype=np.float64)
    n = len(features)
    if n < 2 or len(velocities) != n:
        raise ValueError("need at least two aligned training frames")

    states = np.hstack([velocities, np.ones((n, 1))])      # (n, 3)

    A, ridge_a = _lstsq_rows(states[:-1], states[1:])
    A[2] = (0.0, 0.0, 1.0)                  # bias component is constant
    resid_a = states[1:] - states[:-1] @ A.T
    W = resid_a.T @ resid_a / (n - 1)

    C, ridge_c = _lstsq_rows(states, features)
    resid_c = features - states @ C.T
    Q = resid_c.T @ resid_c / n

    W = (W + W.T) / 2.0
    Q = (Q + Q.T) / 2.0
    # observation-noise floor: keeps the innovation covariance invertible
    # when residuals are (near-)degenerate, e.g. noiseless data; features
    # are standardized, so this is far below any real noise level
    Q += 1e-6 * np.eye(Q.shape[0])
    return KfModel(A=A, W=W, C=C, Q=Q, ridge=max(ridge_a, ridge_c))


def kf_init(model: KfModel) -> KfState:
    """Start-of-stream state: zero velocity, unit bias, unit covariance."""
    return KfState(mean=np.array([0.0, 0.0, 1.0]), cov=np.eye(3))


def kf_step(model: KfModel, state: KfState, observation: np.ndarray):
    """One predict/update cycle; returns ``(state', velocity_estimate)``.

    The passed-in state is not modified.  A numerically singular
    innovation covariance raises :class:`NumericError` with its
    condition estimate.
    """
    observation = np.asarray(observation, dtype=np.float64)
    if observation.shape != (model.C.shape[0],):
        raise ValueError(
            f"expected an observation of shape ({model.C.shape[0]},), "
            f"got {observation.shape}"
        )

    mean_pred = model.A @ state.mean
    cov_pred = model.A @ state.cov @ model.A.T + model.W

    S = model.C @ cov_pred @ model.C.T + model.Q
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise NumericError(
            f"innovation covariance numerically singular "
            f"(condition estimate {cond:.3e})"
        )
    gain = np.linalg.solve(S, model.C @ cov_pred).T    # (3, channels)

    innovation = observation - model.C @ mean_pred
    mean = mean_pred + gain @ innovation
    ident = np.eye(3)
    shrink = ident - gain @ model.C
    cov = shrink @ cov_pred @ shrink.T + gain @ model.Q @ gain.T
    cov = (cov + cov.T) / 2.0
    mean[2] = 1.0                               # pin the bias component

    new_state = KfState(mean=mean, cov=cov)
    return new_state, mean[:2].copy()


def kf_run(model: KfModel, features: np.ndarray) -> np.ndarray:
    """Decode a whole sequence from the start-of-stream state."""
    features = np.asarray(features, dtype=np.float64)
    state = kf_init(model)
    out = np.empty((len(features), 2))
    for t, obs in enumerate(features):
        state, out[t] = kf_step(model, state, obs)
    return out
