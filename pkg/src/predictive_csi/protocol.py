"""Dual-predictor CSI reporting between a UE and its BS.

Both ends run the same Kalman predictor. During the initialization phase the
UE reports quantized estimates (conventional feedback); afterwards it reports
only the quantized difference between the shared prediction and its fresh
estimate, or nothing at all when that difference is within the suppression
threshold.

The predictors stay in lockstep because both consume the same input: the
BS-side reconstruction ``h_bs(n)``. The BS computes it from the message; the
UE computes it from the message it just sent and its own copy of the
prediction. Any bit difference between the two copies is fatal.

Batches
-------
Arrays of estimates have shape ``(..., L)``: the last axis holds the ``L``
links of one session (every tx/rx/subcarrier triple, flattened) and any
leading axes index independent sessions that are simulated together.
Per-session quantities (message kind, bit cost, fitted ranges) have the
leading shape ``(...)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kalman
from .channel import FadingConfig
from .errors import ContractViolation, ProtocolDesyncError, ProtocolError
from .quantizer import QuantizerSpec, dequantize, fit_range, loading_factor, quantize

__all__ = [
    "Phase",
    "MessageKind",
    "UECapabilities",
    "BSProposal",
    "SessionConfig",
    "Calibration",
    "FeedbackMessage",
    "SharedPredictor",
    "UEState",
    "BSState",
    "TraceRecord",
    "SessionResult",
    "assessment_handshake",
    "open_session",
    "ue_estimate",
    "calibrate",
    "ue_report",
    "bs_reconstruct",
    "advance_predictors",
    "bs_advance",
    "run_link_session",
    "PRESENCE_FLAG_BITS",
]

PRESENCE_FLAG_BITS = 1
SUPPORTED_PREDICTORS = frozenset({"kalman"})


class Phase(enum.Enum):
    ASSESSMENT = "assessment"
    INITIALIZATION = "initialization"
    PREDICTION = "prediction"


class MessageKind(enum.IntEnum):
    INIT = 0
    DELTA = 1
    SUPPRESSED = 2


@dataclass(frozen=True)
class UECapabilities:
    """What the UE announces during assessment."""

    predictors: frozenset = SUPPORTED_PREDICTORS
    memory_depth: int = 8


@dataclass(frozen=True)
class BSProposal:
    """What the BS asks for during assessment."""

    predictor: str = "kalman"
    order: int = 1
    init_length: int = 20
    suppression_threshold: float = 0.0
    conventional_bits: int = 2
    delta_bits: int = 2
    kappa: float = 3.0


@dataclass(frozen=True)
class SessionConfig:
    """Outcome of the assessment phase.

    ``predictor`` is ``None`` for a conventional-only session. Fixed
    quantizers may be given through ``conventional_spec`` / ``delta_spec``;
    otherwise their ranges are fitted at the end of the initialization
    window (``kappa`` standard deviations, widened at high resolution by
    :func:`~predictive_csi.quantizer.loading_factor`).

    ``estimator`` selects what the UE reports as its estimate: ``"kalman"``
    (posterior of its local filter) or ``"raw"`` (the pilot observation).
    ``lossless_init`` sends the initialization window at full precision.
    """

    predictor: str | None = "kalman"
    order: int = 1
    memory_depth: int = 1
    init_length: int = 20
    suppression_threshold: float = 0.0
    conventional_bits: int = 2
    delta_bits: int = 2
    kappa: float = 3.0
    conventional_spec: QuantizerSpec | None = None
    delta_spec: QuantizerSpec | None = None
    lossless_init: bool = False
    estimator: str = "kalman"
    update_function: str = "difference"

    def __post_init__(self):
        problems = []
        if self.predictor is not None and self.predictor not in SUPPORTED_PREDICTORS:
            problems.append(f"unsupported predictor {self.predictor!r}")
        if self.order < 1:
            problems.append(f"order must be >= 1, got {self.order}")
        if self.init_length < max(1, self.order if self.prediction_enabled else 1):
            problems.append(f"init_length {self.init_length} shorter than max(1, order={self.order})")
        if not self.suppression_threshold >= 0:
            problems.append(f"suppression threshold must be >= 0, got {self.suppression_threshold}")
        if self.estimator not in ("kalman", "raw"):
            problems.append(f"estimator must be 'kalman' or 'raw', got {self.estimator!r}")
        if self.update_function != "difference":
            problems.append(f"only the 'difference' update function exists, got {self.update_function!r}")
        if not self.kappa > 0:
            problems.append(f"kappa must be positive, got {self.kappa}")
        if problems:
            raise ContractViolation("; ".join(problems))

    @property
    def prediction_enabled(self):
        return self.predictor is not None


def assessment_handshake(ue_capabilities, bs_proposal):
    """Agree on predictor, memory and initialization length.

    Falls back to a conventional-only session when the UE lacks the
    proposed predictor or cannot store ``order`` past estimates.
    """
    if not isinstance(ue_capabilities, UECapabilities) or not isinstance(bs_proposal, BSProposal):
        raise ContractViolation("handshake needs UECapabilities and BSProposal descriptors")
    supported = bs_proposal.predictor in ue_capabilities.predictors
    enough_memory = ue_capabilities.memory_depth >= bs_proposal.order
    agreed = supported and enough_memory
    return SessionConfig(
        predictor=bs_proposal.predictor if agreed else None,
        order=bs_proposal.order,
        memory_depth=bs_proposal.order if agreed else 0,
        init_length=bs_proposal.init_length,
        suppression_threshold=bs_proposal.suppression_threshold,
        conventional_bits=bs_proposal.conventional_bits,
        delta_bits=bs_proposal.delta_bits,
        kappa=bs_proposal.kappa,
    )


@dataclass(frozen=True)
class Calibration:
    """Quantizers both ends use once the initialization window is known."""

    init: QuantizerSpec
    conventional: QuantizerSpec
    delta: QuantizerSpec | None


@dataclass(frozen=True)
class FeedbackMessage:
    """One report cycle from the UE.

    ``kind`` holds a :class:`MessageKind` per session; ``payload`` carries
    the codewords of every link (ignored for suppressed sessions) and may be
    ``None`` when all sessions are suppressed.
    """

    kind: np.ndarray
    payload: object
    bit_cost: np.ndarray
    time_index: int
    phase: Phase

    @property
    def suppressed(self):
        return self.kind == MessageKind.SUPPRESSED


@dataclass
class SharedPredictor:
    """Kalman predictor fed with the BS-side reconstructions."""

    model: kalman.StateSpaceModel
    belief: kalman.KalmanBelief
    last_prediction: np.ndarray

    @classmethod
    def create(cls, model, batch_shape):
        belief = kalman.init_belief(model.order, batch_shape)
        return cls(model, belief, kalman.predict_channel(belief, model))

    def advance(self, h_bs):
        prior = kalman.predict(self.belief, self.model)
        self.belief, _ = kalman.update(prior, h_bs, self.model)
        self.last_prediction = kalman.predict_channel(self.belief, self.model)
        return self.last_prediction


@dataclass
class UEState:
    session: SessionConfig
    estimator_model: kalman.StateSpaceModel
    estimator: kalman.KalmanBelief
    predictor: SharedPredictor | None
    pilot: complex = 1.0
    phase: Phase = Phase.INITIALIZATION
    time_index: int = 0
    reports_sent: int = 0
    calibration: Calibration | None = None
    window_estimates: list = field(default_factory=list)
    window_residuals: list = field(default_factory=list)
    last_delta: np.ndarray | None = None
    mirror_reconstruction: np.ndarray | None = None


@dataclass
class BSState:
    session: SessionConfig
    predictor: SharedPredictor | None
    phase: Phase = Phase.INITIALIZATION
    time_index: int = 0
    calibration: Calibration | None = None


def open_session(session, fading: FadingConfig, noise_variance, batch_shape=(), pilot=1.0):
    """Fresh UE and BS states for ``batch_shape`` = ``(..., L)`` links."""
    batch_shape = tuple(batch_shape)
    if session.prediction_enabled and session.order != fading.order:
        raise ContractViolation(f"session order {session.order} != channel order {fading.order}")
    model = kalman.StateSpaceModel.from_fading(fading, noise_variance, pilot)
    ue = UEState(
        session=session,
        estimator_model=model,
        estimator=kalman.init_belief(model.order, batch_shape),
        predictor=SharedPredictor.create(model, batch_shape) if session.prediction_enabled else None,
        pilot=pilot,
    )
    bs = BSState(
        session=session,
        predictor=SharedPredictor.create(model, batch_shape) if session.prediction_enabled else None,
    )
    return ue, bs


def ue_estimate(observation, ue, session):
    """The UE's estimate of ``h(n)`` from the pilot observation ``y(n)``.

    The UE-local filter runs on raw observations and is distinct from the
    shared predictor. While the initialization window is open the estimate
    and the local one-step prediction residual are recorded for calibration.
    """
    if ue.phase is Phase.ASSESSMENT:
        raise ContractViolation("ue_estimate called before the handshake completed")
    model = ue.estimator_model
    prior = kalman.predict(ue.estimator, model)
    local_prediction = prior.state_estimate[..., 0]
    ue.estimator, _ = kalman.update(prior, observation, model)
    if session.estimator == "kalman":
        estimate = ue.estimator.state_estimate[..., 0].copy()
    else:
        estimate = np.asarray(observation, dtype=complex) / ue.pilot
    ue.time_index += 1
    if ue.calibration is None:
        ue.window_estimates.append(estimate)
        # The first `order` predictions come from the prior, not from data.
        if ue.time_index > model.order:
            ue.window_residuals.append(local_prediction - estimate)
    return estimate


def _fit_per_session(samples, kappa):
    """Fit one range per session; ``samples`` has shape ``(T, ..., L)``."""
    samples = np.asarray(samples)
    lead = samples.shape[1:-1]
    if not lead:
        return fit_range(samples, kappa)
    ranges = np.empty(lead + (1,))
    for idx in np.ndindex(lead):
        ranges[idx] = fit_range(samples[(slice(None),) + idx], kappa)
    return ranges


def calibrate(ue, bs, session):
    """Fix both quantizers from the initialization window and share them.

    The conventional range is fitted to the UE's estimates. The delta range
    is fitted to the residuals of the UE-local one-step prediction, which is
    what a settled predictor leaves for the UE to report.
    """
    if len(ue.window_estimates) < session.init_length:
        raise ContractViolation(
            f"calibration needs {session.init_length} window estimates, have {len(ue.window_estimates)}"
        )
    conventional = session.conventional_spec
    if conventional is None:
        kappa = loading_factor(session.conventional_bits, session.kappa)
        conventional = QuantizerSpec(
            session.conventional_bits, _fit_per_session(ue.window_estimates, kappa)
        )
    delta = None
    if session.prediction_enabled:
        delta = session.delta_spec
        if delta is None:
            kappa = loading_factor(session.delta_bits, session.kappa)
            delta = QuantizerSpec(session.delta_bits, _fit_per_session(ue.window_residuals, kappa))
    init = QuantizerSpec.lossless() if session.lossless_init else conventional
    cal = Calibration(init=init, conventional=conventional, delta=delta)
    ue.calibration = cal
    bs.calibration = cal
    return cal


def _message_bits(spec, n_links):
    return PRESENCE_FLAG_BITS + spec.bits_per_scalar * n_links


def ue_report(h_ue, ue, session):
    """Build the feedback message for the current report cycle."""
    if ue.phase is Phase.ASSESSMENT or ue.calibration is None:
        raise ContractViolation("ue_report called before the handshake and calibration")
    h_ue = np.asarray(h_ue, dtype=complex)
    lead = h_ue.shape[:-1]
    n_links = h_ue.shape[-1] if h_ue.ndim else 1
    cal = ue.calibration
    time_index = ue.reports_sent + 1

    if ue.phase is Phase.INITIALIZATION or not session.prediction_enabled:
        in_window = ue.reports_sent < session.init_length
        spec = cal.init if in_window else cal.conventional
        payload = quantize(h_ue, spec)
        kind = np.full(lead, MessageKind.INIT, dtype=np.int8)
        cost = np.full(lead, _message_bits(spec, n_links), dtype=np.int64)
        ue.last_delta = None
    else:
        delta = ue.predictor.last_prediction - h_ue
        magnitude = np.max(np.abs(delta), axis=-1)
        suppressed = magnitude <= session.suppression_threshold
        payload = None if np.all(suppressed) else quantize(delta, cal.delta)
        kind = np.where(suppressed, MessageKind.SUPPRESSED, MessageKind.DELTA).astype(np.int8)
        cost = np.where(suppressed, PRESENCE_FLAG_BITS, _message_bits(cal.delta, n_links)).astype(np.int64)
        ue.last_delta = magnitude

    msg = FeedbackMessage(kind, payload, cost, time_index, ue.phase)
    ue.mirror_reconstruction = _reconstruct(msg, ue.predictor, ue.phase)
    ue.reports_sent += 1
    return msg


def _reconstruct(msg, predictor, phase):
    kind = np.asarray(msg.kind)
    if phase is Phase.INITIALIZATION:
        if np.any(kind != MessageKind.INIT):
            raise ProtocolError(f"non-Init message received during initialization at n={msg.time_index}")
        return dequantize(msg.payload)
    if np.any(kind == MessageKind.INIT):
        raise ProtocolError(f"Init message received during the prediction phase at n={msg.time_index}")
    prediction = predictor.last_prediction
    if msg.payload is None:
        return np.array(prediction, copy=True)
    delta = dequantize(msg.payload)
    suppressed = (kind == MessageKind.SUPPRESSED)[..., None]
    return np.where(suppressed, prediction, prediction - delta)


def bs_reconstruct(msg, bs, session):
    """The BS's channel estimate for the reported instant."""
    if bs.calibration is None:
        raise ContractViolation("bs_reconstruct called before calibration")
    # A conventional-only session never leaves the initialization phase.
    return _reconstruct(msg, bs.predictor, bs.phase)


def bs_advance(h_bs, bs, session):
    """Close a report cycle at the BS: feed ``h_bs`` to its predictor and advance time.

    This is all the BS needs to follow a session, so a recorded message
    trace can be replayed into a fresh :class:`BSState` with
    :func:`bs_reconstruct` and this function alone.
    """
    if bs.predictor is not None:
        bs.predictor.advance(h_bs)
    bs.time_index += 1
    if session.prediction_enabled and bs.time_index == session.init_length:
        bs.phase = Phase.PREDICTION
    return bs


def advance_predictors(h_bs, ue, bs, session):
    """Feed ``h_bs`` to both predictor copies and check they agree bit for bit.

    Also closes the report cycle: time indices advance and both ends leave
    the initialization phase together.
    """
    if ue.mirror_reconstruction is None:
        raise ContractViolation("advance_predictors called without a pending report")
    if session.prediction_enabled:
        if not np.array_equal(ue.mirror_reconstruction, h_bs):
            raise ProtocolDesyncError(f"UE and BS reconstructions differ at n={bs.time_index + 1}")
        ue.predictor.advance(ue.mirror_reconstruction)
    bs_advance(h_bs, bs, session)
    if session.prediction_enabled:
        same = (
            np.array_equal(ue.predictor.last_prediction, bs.predictor.last_prediction)
            and np.array_equal(ue.predictor.belief.state_estimate, bs.predictor.belief.state_estimate)
            and np.array_equal(ue.predictor.belief.error_covariance, bs.predictor.belief.error_covariance)
        )
        if not same:
            raise ProtocolDesyncError(f"predictor copies diverged at n={bs.time_index}")
    ue.mirror_reconstruction = None
    ue.phase = bs.phase
    return ue, bs


@dataclass(frozen=True)
class TraceRecord:
    time_index: int
    phase: str
    tag: str
    bit_cost: int
    delta_magnitude: float
    h_bs: tuple
    prediction: tuple

    FIELDS = ("time_index", "phase", "tag", "bit_cost", "delta_magnitude", "h_bs", "prediction")


@dataclass
class SessionResult:
    """Everything a closed-loop run produced, time on axis ``-2`` (or ``-1`` for per-session series)."""

    h_ue: np.ndarray
    h_bs: np.ndarray
    prediction: np.ndarray
    bit_cost: np.ndarray
    kind: np.ndarray
    delta_magnitude: np.ndarray
    calibration: Calibration
    init_length: int
    lockstep_checks: int

    @property
    def total_bits(self):
        return int(np.sum(self.bit_cost))

    @property
    def prediction_payload_bits(self):
        """Bits beyond the presence flag spent after the initialization window."""
        after = self.bit_cost[..., self.init_length :]
        return int(np.sum(after - PRESENCE_FLAG_BITS))

    def records(self, index=()):
        """Per-step trace of one session (``index`` picks it from the batch)."""
        out = []
        n_steps = self.bit_cost.shape[-1]
        for n in range(n_steps):
            kind = MessageKind(int(self.kind[index + (n,)]))
            out.append(
                TraceRecord(
                    time_index=n + 1,
                    phase=(Phase.INITIALIZATION if n < self.init_length else Phase.PREDICTION).value,
                    tag=kind.name.lower(),
                    bit_cost=int(self.bit_cost[index + (n,)]),
                    delta_magnitude=float(self.delta_magnitude[index + (n,)]),
                    h_bs=tuple(complex(v) for v in self.h_bs[index + (n,)]),
                    prediction=tuple(complex(v) for v in self.prediction[index + (n,)]),
                )
            )
        return out


def run_link_session(channel, noise, session, fading, noise_variance, pilot=1.0):
    """Closed-loop run over a channel trace.

    ``channel`` and ``noise`` have shape ``(..., N, L)``: optional session
    axes, time, links. The UE observes ``pilot * h + v``. The
    initialization window is estimated first, the quantizers are calibrated
    on it, and then every instant goes through report, reconstruction and
    predictor advance.
    """
    channel = np.asarray(channel, dtype=complex)
    noise = np.asarray(noise, dtype=complex)
    if channel.shape != noise.shape or channel.ndim < 2:
        raise ContractViolation(f"channel {channel.shape} and noise {noise.shape} traces must match, (..., N, L)")
    n_steps = channel.shape[-2]
    if n_steps < session.init_length:
        raise ContractViolation(f"trace length {n_steps} shorter than init_length {session.init_length}")
    lead = channel.shape[:-2]
    n_links = channel.shape[-1]
    obs = pilot * channel + noise

    ue, bs = open_session(session, fading, noise_variance, lead + (n_links,), pilot)
    h_ue = np.empty_like(channel)
    h_bs = np.empty_like(channel)
    prediction = np.empty_like(channel)
    bit_cost = np.empty(lead + (n_steps,), dtype=np.int64)
    kind = np.empty(lead + (n_steps,), dtype=np.int8)
    delta_mag = np.full(lead + (n_steps,), np.nan)
    checks = 0

    for n in range(session.init_length):
        h_ue[..., n, :] = ue_estimate(obs[..., n, :], ue, session)
    calibrate(ue, bs, session)

    for n in range(n_steps):
        if n >= session.init_length:
            h_ue[..., n, :] = ue_estimate(obs[..., n, :], ue, session)
        if bs.predictor is not None:
            prediction[..., n, :] = bs.predictor.last_prediction
        else:
            prediction[..., n, :] = np.nan
        msg = ue_report(h_ue[..., n, :], ue, session)
        estimate = bs_reconstruct(msg, bs, session)
        advance_predictors(estimate, ue, bs, session)
        if session.prediction_enabled:
            checks += 1
        h_bs[..., n, :] = estimate
        bit_cost[..., n] = msg.bit_cost
        kind[..., n] = msg.kind
        if ue.last_delta is not None:
            delta_mag[..., n] = ue.last_delta

    return SessionResult(
        h_ue=h_ue,
        h_bs=h_bs,
        prediction=prediction,
        bit_cost=bit_cost,
        kind=kind,
        delta_magnitude=delta_mag,
        calibration=ue.calibration,
        init_length=session.init_length,
        lockstep_checks=checks,
    )
