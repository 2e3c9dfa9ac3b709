"""Parameter sweeps over quantizer resolution and channel dynamics.

All trials of one sweep point run together as a batch of sessions. Channel
and pilot-noise traces depend only on ``(seed, trial, link)``, so every
method and every bit count sees the same realizations (common random
numbers), which keeps comparisons between rows paired.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .. import channel as ch
from ..metrics import PrecodingSetup, mf_precoder, received_snr, to_db
from ..protocol import SessionConfig, run_link_session
from .config import ExperimentConfig

__all__ = ["ResultRow", "PointDiagnostics", "ResultTable", "run_sweep", "emit_csv", "trace_rows", "CSV_HEADER"]

CSV_HEADER = ("method", "bits", "tau", "mse", "snr_linear", "snr_db", "avg_bits", "trials", "seed")

CHANNEL_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class ResultRow:
    method: str
    bits: int
    tau: float
    mse: float
    snr_linear: float
    snr_db: float
    avg_bits: float
    trials: int
    seed: int

    def as_tuple(self):
        return tuple(getattr(self, k) for k in CSV_HEADER)


@dataclass(frozen=True)
class PointDiagnostics:
    """Extra per-point quantities that are not part of the CSV."""

    prediction_payload_bits: int
    feedback_distortion: float
    lockstep_checks: int
    suppressed_fraction: float


@dataclass
class ResultTable:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def lookup(self, method, bits, tau):
        for row in self.rows:
            if row.method == method and row.bits == bits and math.isclose(row.tau, tau, abs_tol=1e-12):
                return row
        raise KeyError((method, bits, tau))

    def series(self, method, attribute, *, bits=None, tau=None):
        """Values of ``attribute`` in row order for one method and a fixed bits or tau."""
        out = []
        for row in self.rows:
            if row.method != method:
                continue
            if bits is not None and row.bits != bits:
                continue
            if tau is not None and not math.isclose(row.tau, tau, abs_tol=1e-12):
                continue
            out.append(getattr(row, attribute))
        return out


def _fading_points(config):
    if config.channel_mode == "jakes":
        fading = ch.jakes(config.order, config.doppler)
        return [(fading.tau, fading)]
    return [(float(t), ch.gauss_markov(t)) for t in config.taus]


def draw_traces(config, fading):
    """Channel and pilot-noise traces of shape ``(trials, samples, links)``."""
    n_links = config.n_links
    rngs = [
        ch.substream(config.seed, trial, link, CHANNEL_STREAM)
        for trial in range(config.trials)
        for link in range(n_links)
    ]
    gains = ch.simulate_links(fading, config.samples, rngs, config.burn_in)
    gains = gains.reshape(config.trials, n_links, config.samples).transpose(0, 2, 1)
    noise = np.empty_like(gains)
    scale = math.sqrt(config.noise_variance / 2.0)
    for trial in range(config.trials):
        for link in range(n_links):
            z = ch.substream(config.seed, trial, link, NOISE_STREAM).standard_normal((config.samples, 2))
            noise[trial, :, link] = scale * (z[:, 0] + 1j * z[:, 1])
    return np.ascontiguousarray(gains), noise


def session_for(config, method, bits):
    return SessionConfig(
        predictor="kalman" if method == "proposed" else None,
        order=config.order,
        memory_depth=config.order,
        init_length=config.init_length,
        suppression_threshold=config.suppression_threshold,
        conventional_bits=bits,
        delta_bits=bits,
        kappa=config.kappa,
        lossless_init=config.lossless_init,
        estimator=config.estimator,
    )


def _evaluate(config, channel, result):
    """MSE, mean linear SNR and mean bits per instant over all trials."""
    shape = channel.shape[:2] + (config.n_t, config.n_r, config.subcarriers)
    actual = channel.reshape(shape)
    estimated = result.h_bs.reshape(shape)
    err = np.sum(np.abs(actual - estimated) ** 2, axis=(-3, -2, -1))
    setup = PrecodingSetup(config.tx_power, config.noise_variance, config.n_t, config.n_r)
    snr = received_snr(actual, mf_precoder(estimated, setup), setup)
    return float(err.mean()), float(np.mean(snr)), float(result.bit_cost.mean())


def run_sweep(config: ExperimentConfig, keep_traces=False):
    """Evaluate every (method, bits, tau) point of ``config``.

    Rows are ordered by the fixed axis, then method, then the swept axis.
    With ``keep_traces`` the per-step records of trial 0 are kept for each
    point in ``table.traces``.
    """
    config.validate()
    results = {}
    diagnostics = {}
    traces = {}
    for tau, fading in _fading_points(config):
        channel, noise = draw_traces(config, fading)
        for bits in config.bits:
            for method in config.methods:
                session = session_for(config, method, bits)
                result = run_link_session(channel, noise, session, fading, config.noise_variance)
                mse, snr, avg_bits = _evaluate(config, channel, result)
                key = (method, bits, tau)
                results[key] = ResultRow(
                    method, bits, tau, mse, snr, to_db(snr), avg_bits, config.trials, config.seed
                )
                distortion = np.sum(np.abs(result.h_bs - result.h_ue) ** 2, axis=-1).mean()
                diagnostics[key] = PointDiagnostics(
                    prediction_payload_bits=result.prediction_payload_bits if session.prediction_enabled else 0,
                    feedback_distortion=float(distortion),
                    lockstep_checks=result.lockstep_checks,
                    suppressed_fraction=float(np.mean(result.kind[..., config.init_length :] == 2)),
                )
                if keep_traces:
                    traces[key] = result.records((0,))

    taus = [t for t, _ in _fading_points(config)]
    rows = []
    if config.sweep == "bits":
        for tau in taus:
            for method in config.methods:
                rows.extend(results[(method, b, tau)] for b in config.bits)
    else:
        for bits in config.bits:
            for method in config.methods:
                rows.extend(results[(method, bits, t)] for t in taus)
    return ResultTable(config, rows, diagnostics, traces)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def provenance_lines(config):
    """Comment lines recording simulation choices that the CSV does not show."""
    return [
        f"channel={config.channel_mode} order={config.order} doppler={config.doppler!r}",
        f"antennas={config.n_t}x{config.n_r} subcarriers={config.subcarriers} samples={config.samples}",
        f"noise_variance={config.noise_variance!r} tx_power={config.tx_power!r}",
        f"init_length={config.init_length} epsilon={config.suppression_threshold!r} "
        f"kappa={config.kappa!r} estimator={config.estimator} lossless_init={str(config.lossless_init).lower()}",
    ]


def emit_csv(table, path=None, provenance=None):
    """Write ``table`` as CSV to ``path`` (a file path or text stream).

    Returns the CSV text. ``provenance`` lines, if given, are written first
    as ``#`` comments. An empty table raises ``ValueError`` before anything
    is created.
    """
    if not len(table):
        raise ValueError("refusing to write an empty result table")
    buf = io.StringIO()
    for line in provenance or ():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])
    text = buf.getvalue()
    if path is None:
        return text
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


TRACE_HEADER = ("method", "bits", "tau", "time_index", "phase", "tag", "bit_cost", "delta_magnitude", "h_bs", "prediction")


def trace_rows(table):
    """Flatten the kept trial-0 traces into CSV rows."""
    for (method, bits, tau), records in table.traces.items():
        for r in records:
            yield (
                method,
                bits,
                repr(tau),
                r.time_index,
                r.phase,
                r.tag,
                r.bit_cost,
                repr(r.delta_magnitude),
                ";".join(repr(v) for v in r.h_bs),
                ";".join(repr(v) for v in r.prediction),
            )
