"""Run evaluation: channel MSE, matched-filter precoding and received SNR.

Channel arrays use the ``[..., tx, rx, subcarrier]`` layout of
:class:`~predictive_csi.channel.ChannelTensor`; leading axes (time, trials)
are carried along. On subcarrier ``k`` the channel matrix is
``H_k = T[:, :, k].T`` (``N_r x N_t``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelTensor
from .errors import ContractViolation, DegenerateChannelError

__all__ = [
    "PrecodingSetup",
    "MetricsRecord",
    "mse",
    "mf_precoder",
    "received_snr",
    "snr_gain_percent",
    "to_db",
]


@dataclass(frozen=True)
class PrecodingSetup:
    tx_power: float = 1.0
    noise_variance: float = 0.1
    n_t: int = 4
    n_r: int = 2

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ContractViolation(f"tx_power must be positive, got {self.tx_power}")
        if not self.noise_variance >= 0:
            raise ContractViolation(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.n_t < 1 or self.n_r < 1:
            raise ContractViolation(f"antenna counts must be positive, got {self.n_t}x{self.n_r}")


def to_db(linear):
    if linear <= 0:
        return -math.inf
    return 10.0 * math.log10(linear)


@dataclass(frozen=True)
class MetricsRecord:
    mse: float
    received_snr: float
    avg_feedback_bits: float
    config_tag: str = ""

    def __post_init__(self):
        if not self.mse >= 0:
            raise ContractViolation(f"mse must be >= 0, got {self.mse}")
        if not self.received_snr >= 0:
            raise ContractViolation(f"linear SNR must be >= 0, got {self.received_snr}")

    @property
    def received_snr_db(self):
        return to_db(self.received_snr)


def _gains(x):
    return x.gains if isinstance(x, ChannelTensor) else np.asarray(x, dtype=complex)


def _stack(series):
    if isinstance(series, np.ndarray):
        return series.astype(complex, copy=False)
    return np.stack([_gains(t) for t in series])


def mse(actual, estimated):
    """Mean over time of the squared Frobenius error.

    Both arguments are series of channel tensors: a sequence of
    :class:`ChannelTensor` or an array whose first axis is time.
    """
    a = _stack(actual)
    e = _stack(estimated)
    if a.shape != e.shape:
        raise ContractViolation(f"series shapes differ: {a.shape} vs {e.shape}")
    if a.ndim < 1 or a.shape[0] < 1:
        raise ContractViolation("mse needs at least one time step")
    err = np.abs(a - e) ** 2
    per_step = err.reshape(a.shape[0], -1).sum(axis=1)
    return float(per_step.mean())


def mf_precoder(estimated, setup=None):
    """Matched-filter precoder ``W_k = H_k^H / ||H_k||_F`` per subcarrier.

    Returned with the same ``[..., tx, rx, subcarrier]`` layout as the input,
    so ``W[..., :, :, k]`` is the ``N_t x N_r`` precoder of subcarrier ``k``.
    """
    g = _gains(estimated)
    if g.ndim < 3:
        raise ContractViolation(f"expected [..., tx, rx, subcarrier] gains, got shape {g.shape}")
    if setup is not None and g.shape[-3:-1] != (setup.n_t, setup.n_r):
        raise ContractViolation(f"gains {g.shape[-3:-1]} do not match a {setup.n_t}x{setup.n_r} setup")
    norm = np.sqrt(np.sum(np.abs(g) ** 2, axis=(-3, -2), keepdims=True))
    if np.any(norm == 0):
        raise DegenerateChannelError("matched filter of an all-zero channel estimate")
    return np.conj(g) / norm


def received_snr(actual, precoder, setup):
    """Post-precoding SNR ``P ||H W||_F^2 / (N_r sigma_v^2)``, averaged over subcarriers.

    Extra leading axes are kept, so a batch of instants gives one value per
    instant. With ``noise_variance == 0`` the result is ``math.inf``.
    """
    h = _gains(actual)
    w = np.asarray(precoder, dtype=complex)
    if h.shape != w.shape or h.ndim < 3:
        raise ContractViolation(f"channel {h.shape} and precoder {w.shape} must share [..., tx, rx, K]")
    n_r = h.shape[-2]
    # (H_k W_k)[r, s] = sum_t H_k[r, t] W_k[t, s] = sum_t h[t, r] w[t, s]
    effective = np.einsum("...trk,...tsk->...rsk", h, w)
    power = np.sum(np.abs(effective) ** 2, axis=(-3, -2)).mean(axis=-1)
    if setup.noise_variance == 0:
        out = np.full(np.shape(power), math.inf)
    else:
        out = setup.tx_power * power / (n_r * setup.noise_variance)
    return float(out) if np.ndim(out) == 0 else out


def snr_gain_percent(proposed_snr, conventional_snr):
    """Relative gain of linear SNR, in percent."""
    if not conventional_snr > 0:
        raise ValueError(f"baseline SNR must be positive, got {conventional_snr}")
    return 100.0 * (proposed_snr - conventional_snr) / conventional_snr
