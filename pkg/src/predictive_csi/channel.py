"""Correlated Rayleigh fading as a complex autoregressive process.

Each link gain follows

    h(n) = sqrt(1 - tau**2) * sum_l c(l) h(n - l) + tau * w(n),   w ~ CN(0, sigma_p**2)

so ``tau = 0`` freezes the channel and ``tau = 1`` makes every sample
independent. The AR coefficients either come from the Jakes autocorrelation
``J0(2 pi f_m l)`` through the Yule-Walker equations, or from the first-order
Gauss-Markov form used for the tau sweeps.

Throughout, ``a(l) = sqrt(1 - tau**2) * c(l)`` is called the *effective*
coefficient and ``tau**2 * sigma_p**2`` the *driving variance*: these are the
numbers the recursion actually applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import ContractViolation, NumericalError

__all__ = [
    "FadingConfig",
    "LinkState",
    "ChannelTensor",
    "bessel_j0",
    "jakes_autocorrelation",
    "yule_walker",
    "gauss_markov",
    "jakes",
    "make_config",
    "initial_state",
    "step",
    "simulate",
    "simulate_links",
    "sample_tensor",
    "psd",
    "autocovariance",
    "substream",
]

# Toeplitz systems with a larger 2-norm condition number are rejected.
MAX_TOEPLITZ_CONDITION = 1e12
# Spectral radius slack when deciding whether a frozen (tau = 0) channel is marginal.
_MARGINAL_TOL = 1e-12
PSD_FLOOR = 1e-12


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind.

    Accepts scalars or arrays. Non-finite input raises ``ValueError``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"bessel_j0 needs finite input, got {x!r}")
    out = scipy.special.j0(arr)
    return float(out) if out.ndim == 0 else out


def jakes_autocorrelation(lag, doppler):
    """Jakes autocorrelation ``R(l) = J0(2 pi f_m l)`` of a unit-power link.

    ``doppler`` is the maximum Doppler shift normalised by the sampling rate.
    """
    lags = np.asarray(lag)
    if np.any(lags < 0):
        raise ValueError(f"lag must be nonnegative, got {lag!r}")
    if doppler < 0 or not math.isfinite(doppler):
        raise ValueError(f"doppler must be a finite nonnegative number, got {doppler!r}")
    return bessel_j0(2.0 * math.pi * doppler * lags)


def _hermitian_toeplitz(autocorr, order):
    r = np.asarray(autocorr[:order], dtype=complex)
    return scipy.linalg.toeplitz(r, np.conj(r))


def yule_walker(autocorr, order):
    """Solve the Yule-Walker equations by the Levinson-Durbin recursion.

    Parameters
    ----------
    autocorr : sequence of length ``order + 1``
        ``R(0), ..., R(p)`` with ``R(l) = E[h(n) h*(n - l)]``; ``R(-l)`` is
        taken as ``conj(R(l))``.
    order : int
        AR order ``p``.

    Returns
    -------
    coefficients : ndarray of complex, shape (p,)
        ``c`` such that ``h(n) = sum_l c(l) h(n - l) + e(n)`` is the best
        linear one-step predictor.
    residual_variance : float
        ``E|e(n)|^2 = R(0) - sum_l c(l) conj(R(l))``.

    Raises
    ------
    NumericalError
        When the Toeplitz matrix is singular or its condition number exceeds
        ``MAX_TOEPLITZ_CONDITION``.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    r = np.asarray(autocorr, dtype=complex)
    if r.shape != (order + 1,):
        raise ValueError(f"need {order + 1} autocorrelation values, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("autocorrelation values must be finite")
    if not (r[0].real > 0 and abs(r[0].imag) <= 1e-12 * r[0].real):
        raise ValueError(f"R(0) must be real and positive, got {r[0]}")

    try:
        cond = np.linalg.cond(_hermitian_toeplitz(r, order))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not np.isfinite(cond) or cond > MAX_TOEPLITZ_CONDITION:
        raise NumericalError(
            f"Yule-Walker Toeplitz matrix is ill-conditioned (condition estimate {cond:.3e})"
        )

    a = np.zeros(order, dtype=complex)
    err = r[0].real
    for m in range(1, order + 1):
        acc = r[m] - np.dot(a[: m - 1], r[m - 1 : 0 : -1])
        k = acc / err
        prev = a[: m - 1].copy()
        a[: m - 1] = prev - k * np.conj(prev[::-1])
        a[m - 1] = k
        err = err * (1.0 - abs(k) ** 2)

    residual = float(r[0].real - np.real(np.dot(a, np.conj(r[1:]))))
    if residual < 0:
        # Only reachable through round-off on a nearly singular system.
        residual = 0.0
    return a, residual


def _companion(coefficients):
    p = len(coefficients)
    phi = np.zeros((p, p), dtype=complex)
    phi[0, :] = coefficients
    if p > 1:
        phi[1:, :-1] = np.eye(p - 1)
    return phi


def _spectral_radius(coefficients):
    return float(np.max(np.abs(np.linalg.eigvals(_companion(coefficients)))))


@dataclass(frozen=True)
class FadingConfig:
    """Parameters that fully determine one link's fading process.

    ``doppler`` is informational for the Gauss-Markov mode and drives the
    coefficients in Jakes mode.
    """

    order: int
    coefficients: tuple
    tau: float
    innovation_variance: float
    doppler: float = 0.0

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in np.atleast_1d(self.coefficients))
        object.__setattr__(self, "coefficients", coeffs)
        problems = []
        if int(self.order) != self.order or self.order < 1:
            problems.append(f"order must be a positive integer, got {self.order}")
        elif len(coeffs) != self.order:
            problems.append(f"{len(coeffs)} coefficients given for order {self.order}")
        if not 0.0 <= self.tau <= 1.0:
            problems.append(f"tau must lie in [0, 1], got {self.tau}")
        if not self.innovation_variance > 0:
            problems.append(f"innovation_variance must be > 0, got {self.innovation_variance}")
        if not (self.doppler >= 0 and math.isfinite(self.doppler)):
            problems.append(f"doppler must be finite and >= 0, got {self.doppler}")
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in coeffs):
            problems.append("coefficients must be finite")
        if problems:
            raise ContractViolation("; ".join(problems))

        radius = _spectral_radius(self.ar_coefficients)
        # A frozen channel (tau = 0) may sit on the unit circle: with no
        # innovation it stays bounded. Anything driven by noise must decay.
        marginal_ok = self.tau == 0.0 and radius <= 1.0 + _MARGINAL_TOL
        if radius >= 1.0 and not marginal_ok:
            raise ContractViolation(
                f"unstable AR recursion: companion spectral radius {radius:.6g} >= 1"
            )

    @property
    def ar_coefficients(self):
        """Effective coefficients ``sqrt(1 - tau**2) * c``."""
        return math.sqrt(1.0 - self.tau**2) * np.asarray(self.coefficients, dtype=complex)

    @property
    def driving_variance(self):
        """Variance of the innovation term ``tau * w(n)``."""
        return self.tau**2 * self.innovation_variance

    @property
    def spectral_radius(self):
        return _spectral_radius(self.ar_coefficients)

    def companion_matrix(self):
        """State transition matrix of the recursion (first row = effective coefficients)."""
        return _companion(self.ar_coefficients)

    @classmethod
    def from_ar(cls, coefficients, residual_variance, innovation_variance=1.0, doppler=0.0):
        """Express a plain AR process ``h(n) = sum a(l) h(n-l) + e(n)`` in tau form.

        ``tau`` is chosen so that ``tau**2 * innovation_variance`` equals the
        residual variance, and the stored coefficients are rescaled so the
        effective ones equal ``coefficients``.
        """
        a = np.atleast_1d(np.asarray(coefficients, dtype=complex))
        if not 0 < residual_variance <= innovation_variance:
            raise ContractViolation(
                f"residual variance {residual_variance} must lie in (0, {innovation_variance}]"
            )
        tau = math.sqrt(residual_variance / innovation_variance)
        scale = math.sqrt(1.0 - tau**2)
        if scale == 0.0:
            if np.any(a != 0):
                raise ContractViolation("tau = 1 leaves no room for nonzero AR coefficients")
            c = a
        else:
            c = a / scale
        return cls(len(a), tuple(c), tau, innovation_variance, doppler)


def gauss_markov(tau):
    """First-order Gauss-Markov channel with unit stationary power.

    ``h(n) = sqrt(1 - tau**2) h(n-1) + tau w(n)`` with ``w ~ CN(0, 1)``.
    """
    return FadingConfig(order=1, coefficients=(1.0,), tau=float(tau), innovation_variance=1.0)


def jakes(order, doppler):
    """AR(p) fit to the Jakes autocorrelation at normalised Doppler ``doppler``."""
    lags = np.arange(order + 1)
    r = jakes_autocorrelation(lags, doppler)
    coeffs, residual = yule_walker(r, order)
    if residual <= 0:
        raise ContractViolation(
            f"Jakes fit at f_m={doppler} has zero residual variance; the AR model is degenerate"
        )
    return FadingConfig.from_ar(coeffs, residual, innovation_variance=float(r[0]), doppler=doppler)


def make_config(mode, **params):
    """Build a :class:`FadingConfig` from ``"gauss_markov"`` (tau) or ``"jakes"`` (order, doppler)."""
    if mode == "gauss_markov":
        return gauss_markov(params["tau"])
    if mode == "jakes":
        return jakes(int(params["order"]), float(params["doppler"]))
    raise ValueError(f"unknown channel mode {mode!r}")


@dataclass
class LinkState:
    """Recent gains of one link, newest first: ``[h(n), h(n-1), ..., h(n-p+1)]``."""

    history: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.history = np.asarray(self.history, dtype=complex).reshape(-1)


def substream(seed, trial, link, purpose=0):
    """Independent generator for one (trial, link, purpose) triple.

    The triple is hashed together with the master seed by
    :class:`numpy.random.SeedSequence`, so streams never overlap and do not
    depend on the order in which they are created.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(link), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def _complex_normal(rng, size, variance):
    draws = rng.standard_normal(size + (2,) if isinstance(size, tuple) else (size, 2))
    return math.sqrt(variance / 2.0) * (draws[..., 0] + 1j * draws[..., 1])


def _stationary_covariance(config):
    phi = config.companion_matrix()
    p = config.order
    if config.spectral_radius >= 1.0:
        # Frozen channel: no stationary law; start at the nominal power.
        return config.innovation_variance * np.eye(p)
    q = np.zeros((p, p), dtype=complex)
    q[0, 0] = config.driving_variance
    sigma = scipy.linalg.solve_discrete_lyapunov(phi, q)
    return 0.5 * (sigma + sigma.conj().T)


def initial_state(config, rng):
    """Draw a history from the stationary law of the process."""
    sigma = _stationary_covariance(config)
    w, v = np.linalg.eigh(sigma)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    z = _complex_normal(rng, config.order, 1.0)
    return LinkState(root @ z, 0)


def _ar_sum(a, history):
    # Explicit left-to-right sum keeps scalar and batched paths bit-identical.
    acc = a[0] * history[..., 0]
    for lag in range(1, len(a)):
        acc = acc + a[lag] * history[..., lag]
    return acc


def step(state, config, rng):
    """Advance one link by one sample; returns ``(new_state, gain)``."""
    if state.history.shape != (config.order,):
        raise ContractViolation(
            f"history length {state.history.shape} does not match order {config.order}"
        )
    w = _complex_normal(rng, 1, config.innovation_variance)[0]
    gain = _ar_sum(config.ar_coefficients, state.history) + config.tau * w
    history = np.empty_like(state.history)
    history[0] = gain
    history[1:] = state.history[:-1]
    return LinkState(history, state.time_index + 1), complex(gain)


def simulate(config, n_samples, rng, state=None, burn_in=None):
    """Gain sequence of one link.

    Starts from ``state`` or a stationary draw, discards ``burn_in`` samples
    (default ``10 * order``), and returns ``(gains, final_state)``. The result
    is bit-identical to calling :func:`step` repeatedly with the same ``rng``.
    """
    if burn_in is None:
        burn_in = 10 * config.order
    if state is None:
        state = initial_state(config, rng)
    gains, hist = _recurse(config, state.history[None, :], rng_list=[rng], n=burn_in + n_samples)
    final = LinkState(hist[0], state.time_index + burn_in + n_samples)
    return gains[0, burn_in:], final


def _recurse(config, history, rng_list, n):
    """Run the recursion for a batch of links, one generator per link."""
    history = np.array(history, dtype=complex)
    w = np.stack([_complex_normal(rng, n, config.innovation_variance) for rng in rng_list])
    a = config.ar_coefficients
    tau = config.tau
    out = np.empty((len(rng_list), n), dtype=complex)
    for t in range(n):
        gain = _ar_sum(a, history) + tau * w[:, t]
        history[:, 1:] = history[:, :-1]
        history[:, 0] = gain
        out[:, t] = gain
    return out, history


def simulate_links(config, n_samples, rngs, burn_in=None):
    """Gain traces for a batch of independent links.

    ``rngs`` is a flat sequence of generators, one per link. Each link draws
    its stationary start and then its innovations from its own generator, in
    that order, exactly as :func:`simulate` does. Returns shape
    ``(len(rngs), n_samples)``.
    """
    if burn_in is None:
        burn_in = 10 * config.order
    rngs = list(rngs)
    starts = np.stack([initial_state(config, rng).history for rng in rngs])
    gains, _ = _recurse(config, starts, rngs, burn_in + n_samples)
    return gains[:, burn_in:]


@dataclass(frozen=True)
class ChannelTensor:
    """Complex gains at one instant, indexed ``[tx, rx, subcarrier]``."""

    gains: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex)
        if g.ndim != 3:
            raise ContractViolation(f"channel tensor must be N_t x N_r x K, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ContractViolation("channel tensor has non-finite entries")
        object.__setattr__(self, "gains", g)

    @property
    def shape(self):
        return self.gains.shape

    def matrix(self, subcarrier=0):
        """The ``N_r x N_t`` channel matrix seen on one subcarrier."""
        return self.gains[:, :, subcarrier].T


def sample_tensor(states, config, rngs):
    """Step every link of an ``N_t x N_r x K`` grid once.

    ``states`` and ``rngs`` are object arrays (or nested lists) of matching
    shape holding :class:`LinkState` and generators. Returns the new state
    grid and the resulting :class:`ChannelTensor`.
    """
    states = np.asarray(states, dtype=object)
    rngs = np.asarray(rngs, dtype=object)
    if states.ndim != 3 or states.shape != rngs.shape:
        raise ContractViolation(
            f"state grid {states.shape} and generator grid {rngs.shape} must be equal 3-D shapes"
        )
    new_states = np.empty(states.shape, dtype=object)
    gains = np.empty(states.shape, dtype=complex)
    for idx in np.ndindex(states.shape):
        new_states[idx], gains[idx] = step(states[idx], config, rngs[idx])
    return new_states, ChannelTensor(gains)


def psd(config, f):
    """Power spectral density of the recursion at normalised frequency ``f``.

    Convention: ``S(f) = v / |1 - sum_l a(l) exp(-j 2 pi f l)|**2`` with ``a``
    the effective coefficients and ``v`` the driving variance, i.e. the
    textbook denominator ``|1 + sum_l c_l exp(...)|`` with ``c_l = -a(l)``.
    Returns ``math.inf`` when the denominator magnitude falls below
    ``PSD_FLOOR``.
    """
    if not -0.5 <= f <= 0.5:
        raise ValueError(f"normalised frequency must lie in [-0.5, 0.5], got {f}")
    a = config.ar_coefficients
    lags = np.arange(1, config.order + 1)
    denom = abs(1.0 - np.sum(a * np.exp(-2j * math.pi * f * lags))) ** 2
    if denom < PSD_FLOOR:
        return math.inf
    return config.driving_variance / denom


def autocovariance(config, max_lag):
    """Analytic ``R(0..max_lag)`` of the stationary process."""
    if config.spectral_radius >= 1.0:
        raise NumericalError("a frozen channel has no stationary autocovariance")
    sigma = _stationary_covariance(config)
    p = config.order
    a = config.ar_coefficients
    r = np.zeros(max_lag + 1, dtype=complex)
    r[: min(p, max_lag + 1)] = sigma[0, : min(p, max_lag + 1)]
    for k in range(p, max_lag + 1):
        # R(k-l) for k-l < 0 never occurs here since k >= p >= l.
        r[k] = sum(a[l - 1] * r[k - l] for l in range(1, p + 1))
    return r
