"""Complex Kalman filter over the AR state-space model of a fading link.

The state is the gain history ``x(n) = [h(n), ..., h(n-p+1)]``; the
transition is the companion matrix of the effective AR coefficients and only
the newest entry is driven by noise. Each link is observed through one pilot,
``y(n) = s h(n) + v(n)``.

All functions work on batches: ``state_estimate`` may carry any leading
shape ``(..., p)``. When every link in the batch shares a model and an
observation schedule, the covariance evolves identically for all of them, so
``error_covariance`` may be a single ``(p, p)`` matrix that broadcasts. This
is the usual situation in the simulator and saves most of the work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import FadingConfig
from .errors import ContractViolation, NumericalError

__all__ = [
    "StateSpaceModel",
    "KalmanBelief",
    "Innovation",
    "init_belief",
    "predict",
    "update",
    "predict_channel",
]


def _hermitize(m):
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


@dataclass(frozen=True)
class StateSpaceModel:
    transition: np.ndarray
    process_noise_cov: np.ndarray
    measurement_matrix: np.ndarray
    measurement_noise_cov: float

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.transition, dtype=complex))
        q_w = np.atleast_2d(np.asarray(self.process_noise_cov, dtype=complex))
        m = np.atleast_1d(np.asarray(self.measurement_matrix, dtype=complex)).reshape(-1)
        p = phi.shape[0]
        if phi.shape != (p, p) or q_w.shape != (p, p) or m.shape != (p,):
            raise ContractViolation(
                f"inconsistent model dimensions: transition {phi.shape}, "
                f"process noise {q_w.shape}, measurement row {m.shape}"
            )
        if self.measurement_noise_cov < 0:
            raise ContractViolation(f"measurement noise variance must be >= 0, got {self.measurement_noise_cov}")
        if np.max(np.abs(q_w - q_w.conj().T)) > 1e-12 or np.min(np.linalg.eigvalsh(_hermitize(q_w))) < -1e-12:
            raise ContractViolation("process noise covariance must be Hermitian PSD")
        radius = float(np.max(np.abs(np.linalg.eigvals(phi))))
        # A noiseless frozen model (Q_w = 0) may have radius exactly 1.
        frozen = not np.any(q_w) and radius <= 1.0 + 1e-12
        if radius >= 1.0 and not frozen:
            raise ContractViolation(f"transition spectral radius {radius:.6g} >= 1")
        object.__setattr__(self, "transition", phi)
        object.__setattr__(self, "process_noise_cov", q_w)
        object.__setattr__(self, "measurement_matrix", m)
        object.__setattr__(self, "measurement_noise_cov", float(self.measurement_noise_cov))

    @property
    def order(self):
        return self.transition.shape[0]

    @classmethod
    def from_fading(cls, config: FadingConfig, noise_variance, pilot=1.0):
        """Model matching a :class:`FadingConfig` observed through pilot ``pilot``.

        The transition absorbs the ``sqrt(1 - tau**2)`` factor and the state
        noise variance is ``tau**2 * sigma_p**2``, so that the state equation
        reproduces the channel recursion exactly.
        """
        p = config.order
        q_w = np.zeros((p, p), dtype=complex)
        q_w[0, 0] = config.driving_variance
        m = np.zeros(p, dtype=complex)
        m[0] = pilot
        return cls(config.companion_matrix(), q_w, m, noise_variance)


@dataclass(frozen=True)
class KalmanBelief:
    state_estimate: np.ndarray
    error_covariance: np.ndarray

    @property
    def order(self):
        return self.state_estimate.shape[-1]


@dataclass(frozen=True)
class Innovation:
    value: np.ndarray
    gain: np.ndarray


def init_belief(order, batch_shape=()):
    """Zero state and identity covariance."""
    if order < 1:
        raise ContractViolation(f"order must be >= 1, got {order}")
    x = np.zeros(tuple(batch_shape) + (order,), dtype=complex)
    return KalmanBelief(x, np.eye(order, dtype=complex))


def _check(belief, model):
    p = model.order
    if belief.state_estimate.shape[-1] != p or belief.error_covariance.shape[-2:] != (p, p):
        raise ContractViolation(
            f"belief of order {belief.state_estimate.shape[-1]} / covariance "
            f"{belief.error_covariance.shape} does not fit a model of order {p}"
        )


def predict(belief, model):
    """Time update: ``x <- Phi x``, ``P <- Phi P Phi^H + Q_w``."""
    _check(belief, model)
    phi = model.transition
    x = belief.state_estimate @ phi.T
    p = phi @ belief.error_covariance @ phi.conj().T + model.process_noise_cov
    return KalmanBelief(x, _hermitize(p))


def update(prior, observation, model):
    """Measurement update with one scalar pilot observation per link.

    Returns the posterior and the :class:`Innovation` (residual and gain).
    When the innovation variance is exactly zero (certain prior observed
    without noise) the gain is zero and the prior is returned unchanged.
    """
    _check(prior, model)
    m = model.measurement_matrix
    p_prior = prior.error_covariance
    pm = p_prior @ m.conj()
    s = np.real(np.tensordot(pm, m, axes=([-1], [0]))) + model.measurement_noise_cov
    s = np.asarray(s)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise NumericalError(f"innovation covariance must be positive, got {s}")
    safe = np.where(s > 0, s, 1.0)
    gain = np.where((s > 0)[..., None], pm / safe[..., None], 0.0)

    y = np.asarray(observation, dtype=complex)
    residual = y - prior.state_estimate @ m
    x = prior.state_estimate + gain * residual[..., None]
    # (I - G M) P, written as P - G (M P) to avoid forming I - G M.
    mp = m @ p_prior
    p = p_prior - gain[..., :, None] * mp[..., None, :]
    return KalmanBelief(x, _hermitize(p)), Innovation(residual, gain)


def predict_channel(belief, model):
    """One-step-ahead channel prediction ``[Phi x]_1`` from a posterior."""
    _check(belief, model)
    x = belief.state_estimate
    out = x @ model.transition[0]
    return complex(out) if np.ndim(out) == 0 else out
