"""End-to-end Monte Carlo harness for slotted unsourced transmission.

One trial draws active users and messages, tree-encodes them, synthesizes
the received block of every slot from fresh channel realizations (block
fading), runs the covariance detector per slot, thresholds into candidate
lists, tree-decodes, and scores the per-user misdetection and false-alarm
rates against the transmitted set.

Stream discipline: all randomness is addressed as
``(domain, trial, slot, ...)`` under the master seed (see
:mod:`uramimo.streams`), so trials are reproducible in isolation and an SNR
sweep reuses the same channel/noise/message draws at every grid point (the
transmit power never shifts stream consumption).
"""

from __future__ import annotations

import dataclasses
import multiprocessing
from dataclasses import dataclass

import numpy as np

from . import streams
from .channel import ChannelParams, build_omega, build_spec, sample_coupling
from .codebook import DEFAULT_MAX_BYTES, Codebook, generate_codebook
from .detector import (
    DetectionResult,
    DetectorConfig,
    run_detection,
    sample_covariance,
    threshold_decide,
)
from .errors import SpecError, TreeDecodeOverflow
from .streams import (
    DOMAIN_CHANNEL,
    DOMAIN_CODEBOOK,
    DOMAIN_DETECTOR,
    DOMAIN_MESSAGES,
    DOMAIN_NOISE,
)
from .treecode import DEFAULT_MAX_PATHS, TreeCodeSpec, build_rules, decode, encode


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one experiment needs, fully resolved and picklable."""

    k_tot: int
    k_a: int
    m: int
    d: int
    n_k: int
    g: float
    sigma2: float
    tree: TreeCodeSpec
    channel: ChannelParams
    detector: DetectorConfig
    trials: int
    master_seed: int
    zeta_rel: float | None = None  # when set, zeta = zeta_rel * per-user power
    max_paths: int = DEFAULT_MAX_PATHS
    workers: int = 1
    codebook_normalized: bool = False
    codebook_max_bytes: int = DEFAULT_MAX_BYTES

    def validate(self) -> None:
        if self.k_a < 1 or self.k_a > self.k_tot:
            raise SpecError(f"need 1 <= k_a <= k_tot, got k_a={self.k_a}, k_tot={self.k_tot}")
        if self.m < 1 or self.d < 1 or self.n_k < 1:
            raise SpecError("antenna counts and slot dimension must be >= 1")
        if not (np.isfinite(self.g) and self.g > 0):
            raise SpecError(f"transmit power must be finite positive, got {self.g}")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise SpecError(f"noise variance must be finite positive, got {self.sigma2}")
        if self.trials < 1:
            raise SpecError(f"trial count must be >= 1, got {self.trials}")
        self.tree.validate()
        if self.channel.m != self.m or self.channel.n_k != self.n_k:
            raise SpecError("channel template antenna counts must match the scenario")
        self.detector.validate()

    @property
    def snr_db(self) -> float:
        return 10.0 * float(np.log10(self.g / self.sigma2))


@dataclass(frozen=True)
class ErrorReport:
    """Per-trial outcome."""

    p_md: float
    p_fa: float
    p_e: float
    list_sizes: tuple[int, ...]
    overflow: bool
    n_decoded: int


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    p_md: float
    p_fa: float
    p_e: float
    overflow_count: int


@dataclass(frozen=True, eq=False)
class ConvergenceResult:
    gamma_true: np.ndarray
    results: dict[str, DetectionResult]


def codebook_for(config: ScenarioConfig) -> Codebook:
    seed = streams.derived_seed(config.master_seed, DOMAIN_CODEBOOK)
    return generate_codebook(
        seed,
        config.d,
        1 << config.tree.j,
        normalized=config.codebook_normalized,
        max_bytes=config.codebook_max_bytes,
    )


def per_user_power(config: ScenarioConfig) -> float:
    """Activity power one user contributes to its codeword's gamma entry.

    The per-receive-sample covariance contribution of a user is its transmit
    power times the average of its coupling powers over the receive modes,
    i.e. g * sum(omega) / m (= g * n_k for a normalized spec).
    """
    spec = build_spec(config.channel)
    return config.g * float(build_omega(spec).sum()) / config.m


def detector_for(config: ScenarioConfig) -> DetectorConfig:
    """Detector configuration with the threshold resolved for this scenario."""
    det = config.detector
    if config.zeta_rel is not None:
        det = dataclasses.replace(det, zeta=config.zeta_rel * per_user_power(config))
    if det.sigma2 != config.sigma2:
        det = dataclasses.replace(det, sigma2=config.sigma2)
    return det


def synthesize_slot(
    chunks,
    codebook: Codebook,
    channels,
    g: float,
    sigma2: float,
    rng: np.random.Generator,
    m: int | None = None,
) -> np.ndarray:
    """Received block ``Y`` (d x m) for one slot.

    ``chunks`` holds one transmitted codeword index per active user and
    ``channels`` the matching coupling-matrix realizations.  Each user adds
    ``sqrt(g) * a_chunk  (row-sums of its coupling matrix)^T``; the noise is
    i.i.d. complex Gaussian with variance ``sigma2`` (the receive-side
    rotation leaves its law unchanged, so it is drawn directly).  With no
    active users the block is pure noise and ``m`` must be given explicitly.
    """
    chunks = list(chunks)
    channels = list(channels)
    if len(chunks) != len(channels):
        raise SpecError(f"{len(chunks)} chunks vs {len(channels)} channel realizations")
    if channels:
        m = channels[0].h_tilde.shape[0]
    elif m is None:
        raise SpecError("receive antenna count m is required when no users are active")
    y = np.zeros((codebook.d, m), dtype=np.complex128)
    amp = np.sqrt(g)
    for chunk, realization in zip(chunks, channels):
        if not 0 <= int(chunk) < codebook.n_cw:
            raise SpecError(f"codeword index {chunk} outside [0, {codebook.n_cw})")
        if realization.h_tilde.shape[0] != m:
            raise SpecError("channel realizations disagree on the receive antenna count")
        y += amp * np.outer(codebook.a[:, int(chunk)], realization.h_tilde.sum(axis=1))
    noise = rng.standard_normal((codebook.d, m)) + 1j * rng.standard_normal((codebook.d, m))
    y += noise * np.sqrt(sigma2 / 2.0)
    return y


def gamma_truth(chunks, n_cw: int, power: float) -> np.ndarray:
    """Implied activity pattern: per-user powers superpose on shared indices."""
    gamma = np.zeros(n_cw)
    for chunk in chunks:
        gamma[int(chunk)] += power
    return gamma


def _trial_messages(config: ScenarioConfig, trial_index: int):
    rng = streams.stream(config.master_seed, DOMAIN_MESSAGES, trial_index)
    # the active-user identities matter only through their count
    rng.choice(config.k_tot, size=config.k_a, replace=False)
    return [streams.random_bits(rng, config.tree.w) for _ in range(config.k_a)]


def _detect_slot(config, codebook, det_cfg, spec, chunks, trial_index, slot, gamma_true=None):
    channel_rng = streams.stream(config.master_seed, DOMAIN_CHANNEL, trial_index, slot)
    noise_rng = streams.stream(config.master_seed, DOMAIN_NOISE, trial_index, slot)
    det_rng = streams.stream(config.master_seed, DOMAIN_DETECTOR, trial_index, slot)
    channels = [sample_coupling(spec, channel_rng) for _ in range(config.k_a)]
    y = synthesize_slot(chunks, codebook, channels, config.g, config.sigma2, noise_rng)
    sigma_hat = sample_covariance(y)
    return run_detection(sigma_hat, codebook, det_cfg, rng=det_rng, gamma_true=gamma_true)


def run_trial(config: ScenarioConfig, trial_index: int = 0) -> ErrorReport:
    """One full Monte Carlo trial, deterministic in (master_seed, trial_index)."""
    config.validate()
    spec = build_spec(config.channel)
    rules = build_rules(config.tree)
    codebook = codebook_for(config)
    det_cfg = detector_for(config)

    messages = _trial_messages(config, trial_index)
    chunk_seqs = [encode(msg, rules, config.tree) for msg in messages]

    slot_lists = []
    for slot in range(config.tree.s):
        chunks = [int(seq[slot]) for seq in chunk_seqs]
        result = _detect_slot(config, codebook, det_cfg, spec, chunks, trial_index, slot)
        slot_lists.append(threshold_decide(result.gamma, det_cfg.zeta))

    overflow = False
    try:
        decoded = decode(slot_lists, rules, config.tree, config.max_paths)
    except TreeDecodeOverflow:
        decoded = set()
        overflow = True

    sent = set(messages)
    p_md = sum(1 for msg in messages if msg not in decoded) / config.k_a
    p_fa = len(decoded - sent) / len(decoded) if decoded else 0.0
    return ErrorReport(
        p_md=p_md,
        p_fa=p_fa,
        p_e=p_md + p_fa,
        list_sizes=tuple(len(lst) for lst in slot_lists),
        overflow=overflow,
        n_decoded=len(decoded),
    )


def _pool_job(job):
    config, trial_index = job
    return run_trial(config, trial_index)


def run_trials(config: ScenarioConfig, pool=None) -> list[ErrorReport]:
    """All trials of one scenario; fans out to ``pool`` when given."""
    jobs = [(config, t) for t in range(config.trials)]
    if pool is None:
        return [_pool_job(job) for job in jobs]
    return list(pool.map(_pool_job, jobs))


def make_pool(workers: int):
    """Worker pool for trial fan-out, or None for serial execution."""
    if workers <= 1:
        return None
    return multiprocessing.get_context("fork").Pool(processes=workers)


def aggregate(reports) -> tuple[float, float, float, int]:
    """Mean p_md / p_fa / p_e plus the decoder-overflow count."""
    reports = list(reports)
    n = len(reports)
    p_md = sum(r.p_md for r in reports) / n
    p_fa = sum(r.p_fa for r in reports) / n
    p_e = sum(r.p_e for r in reports) / n
    return p_md, p_fa, p_e, sum(r.overflow for r in reports)


def config_at_snr(config: ScenarioConfig, snr_db: float) -> ScenarioConfig:
    """Same scenario with the transmit power set to the requested SNR."""
    g = config.sigma2 * 10.0 ** (snr_db / 10.0)
    return dataclasses.replace(config, g=g)


def snr_sweep(config: ScenarioConfig, snr_grid_db) -> list[SweepPoint]:
    """Mean error rates across an SNR grid, ``config.trials`` trials per point.

    Trial streams are shared across grid points (only the power changes), so
    the per-point estimates are positively correlated and trend comparisons
    are low-variance.
    """
    grid = [float(x) for x in snr_grid_db]
    if not grid:
        raise SpecError("SNR grid must not be empty")
    config.validate()
    pool = make_pool(config.workers)
    try:
        points = []
        for snr_db in grid:
            reports = run_trials(config_at_snr(config, snr_db), pool=pool)
            p_md, p_fa, p_e, overflows = aggregate(reports)
            points.append(SweepPoint(snr_db, p_md, p_fa, p_e, overflows))
        return points
    finally:
        if pool is not None:
            pool.close()
            pool.join()


def convergence_experiment(config: ScenarioConfig, policies) -> ConvergenceResult:
    """Feed one slot's sample covariance to each policy and trace e_gamma.

    Uses trial 0 / slot 0 streams for the channel, noise, and messages, so
    every policy sees the identical sample covariance and ground truth;
    each policy gets its own detector stream.
    """
    config.validate()
    policies = list(policies)
    if not policies:
        raise SpecError("at least one policy is required")
    spec = build_spec(config.channel)
    rules = build_rules(config.tree)
    codebook = codebook_for(config)
    det_cfg = detector_for(config)

    messages = _trial_messages(config, 0)
    chunks = [int(encode(msg, rules, config.tree)[0]) for msg in messages]
    gamma_true = gamma_truth(chunks, codebook.n_cw, per_user_power(config))

    channel_rng = streams.stream(config.master_seed, DOMAIN_CHANNEL, 0, 0)
    noise_rng = streams.stream(config.master_seed, DOMAIN_NOISE, 0, 0)
    channels = [sample_coupling(spec, channel_rng) for _ in range(config.k_a)]
    y = synthesize_slot(chunks, codebook, channels, config.g, config.sigma2, noise_rng)
    sigma_hat = sample_covariance(y)

    results = {}
    for idx, policy in enumerate(policies):
        det = dataclasses.replace(det_cfg, policy=policy)
        det_rng = streams.stream(config.master_seed, DOMAIN_DETECTOR, 0, 0, idx)
        results[policy] = run_detection(
            sigma_hat, codebook, det, rng=det_rng, gamma_true=gamma_true
        )
    return ConvergenceResult(gamma_true=gamma_true, results=results)
