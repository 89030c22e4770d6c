"""Closed-form detector math for dual-threshold full-duplex energy sensing.

A full-duplex vehicle senses channel energy twice: against a first
threshold before it starts broadcasting (is the channel free?) and
against a second, elevated threshold while it is broadcasting (is my
transmission colliding with someone else's?).  Under the Gaussian
approximation of the averaged-energy statistic all detection and
false-alarm probabilities reduce to Q-function expressions in the
sample count, the two measured SNRs and the residual self-interference
left after cancellation.  This module holds those expressions, their
inversions (thresholds from target probabilities, SIC factor from a
target false-alarm rate) and the averaged false-alarm rate under a
fluctuating SIC factor.

Everything here is a pure function of its arguments.  Scalar inputs
give scalar outputs; the formula functions also broadcast over numpy
arrays (either in the config fields or in the threshold argument),
which the sweep layer relies on.  SNRs are linear throughout; use
``db_to_linear`` at interface boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

__all__ = [
    "DetectorConfig",
    "TargetProbabilities",
    "ThresholdPair",
    "InfeasibleDetectorError",
    "db_to_linear",
    "linear_to_db",
    "q",
    "q_inv",
    "q_approx",
    "pf_before",
    "pd_before",
    "pf_during",
    "pd_during",
    "threshold_before",
    "threshold_during",
    "thresholds_for",
    "threshold_link",
    "sic_factor_for_pf",
    "SicSolution",
    "avg_pf_fluct_numeric",
    "avg_pf_fluct_approx",
    "avg_pd_fluct_numeric",
]

_SQRT2 = math.sqrt(2.0)


class InfeasibleDetectorError(ValueError):
    """No detector setting satisfies the requested operating point."""


def db_to_linear(x_db):
    """Convert a dB power ratio to linear scale."""
    return _maybe_scalar(10.0 ** (np.asarray(x_db, dtype=float) / 10.0))


def linear_to_db(x):
    """Convert a linear power ratio to dB."""
    return _maybe_scalar(10.0 * np.log10(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class DetectorConfig:
    """Scalar parameters of one sensing problem.

    num_samples: energy samples N averaged per decision.
    noise_power: noise variance, linear.
    snr_self:    SNR of the node's own (self-interference) signal before
                 cancellation, linear.
    snr_other:   SNR of the colliding node's signal at this receiver, linear.
    sic_factor:  fraction of self-interference *amplitude* left after
                 cancellation, in [0, 1]; 0 means perfect cancellation.
                 Residual SI power is sic_factor**2 * snr_self * noise_power.
    modulation:  constant-envelope symbol alphabet used when synthesizing
                 sample blocks ("bpsk" or "qpsk"); irrelevant to the
                 closed forms.

    Fields may be numpy arrays of compatible shapes, in which case the
    formula functions broadcast.
    """

    num_samples: int | np.ndarray
    noise_power: float | np.ndarray = 1.0
    snr_self: float | np.ndarray = 0.0
    snr_other: float | np.ndarray = 0.0
    sic_factor: float | np.ndarray = 0.0
    modulation: str = "qpsk"

    def __post_init__(self):
        if not np.all(np.asarray(self.num_samples) >= 1):
            raise ValueError("num_samples must be >= 1")
        if not np.all(np.asarray(self.noise_power) > 0):
            raise ValueError("noise_power must be > 0")
        if not np.all(np.asarray(self.snr_self) >= 0):
            raise ValueError("snr_self must be >= 0")
        if not np.all(np.asarray(self.snr_other) >= 0):
            raise ValueError("snr_other must be >= 0")
        sic = np.asarray(self.sic_factor)
        if not (np.all(sic >= 0) and np.all(sic <= 1)):
            raise ValueError("sic_factor must lie in [0, 1]")
        if self.modulation not in ("bpsk", "qpsk"):
            raise ValueError("modulation must be 'bpsk' or 'qpsk'")

    @property
    def si_power(self):
        """Self-interference signal power before cancellation."""
        return self.snr_self * self.noise_power

    @property
    def other_power(self):
        """Received power of the colliding node's signal."""
        return self.snr_other * self.noise_power

    def with_sic(self, sic_factor) -> "DetectorConfig":
        return replace(self, sic_factor=sic_factor)

    def with_snr_other(self, snr_other) -> "DetectorConfig":
        return replace(self, snr_other=snr_other)


@dataclass(frozen=True)
class TargetProbabilities:
    """Target detection probabilities before and during transmission."""

    target_pd_before: float = 0.9
    target_pd_during: float = 0.9

    def __post_init__(self):
        for name in ("target_pd_before", "target_pd_during"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class ThresholdPair:
    """The two energy thresholds: before and during transmission."""

    eps_before: float
    eps_during: float

    def __post_init__(self):
        if not (self.eps_before > 0 and self.eps_during > 0):
            raise ValueError("thresholds must be positive")


# ---------------------------------------------------------------------------
# standard-normal tail numerics
# ---------------------------------------------------------------------------


def q(x):
    """Standard normal upper-tail probability Q(x) = P(Z > x)."""
    return _maybe_scalar(0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2))


def q_inv(p):
    """Inverse of ``q``: the x with Q(x) = p, for p strictly in (0, 1).

    Round-trips through ``q`` to better than 1e-10 absolute over the
    whole open interval.
    """
    p_arr = np.asarray(p, dtype=float)
    if not (np.all(p_arr > 0.0) and np.all(p_arr < 1.0)):
        raise ValueError("q_inv requires 0 < p < 1")
    return _maybe_scalar(-special.ndtri(p_arr))


def q_approx(x):
    """Loose upper-tail approximation Q(x) ~= exp(-x^2/2)/2, x >= 0.

    Only kept because the averaged-false-alarm derivation uses it to
    show the fluctuation integral has no closed form; do not use it on
    any decision path.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("q_approx is only valid for x >= 0")
    return _maybe_scalar(0.5 * np.exp(-0.5 * x_arr * x_arr))


def _maybe_scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


# ---------------------------------------------------------------------------
# detection / false-alarm closed forms
# ---------------------------------------------------------------------------


def _check_eps(eps):
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("energy threshold must be positive")


def pf_before(cfg: DetectorConfig, eps0):
    """False-alarm probability of the idle-channel test (noise only)."""
    _check_eps(eps0)
    n = np.asarray(cfg.num_samples, dtype=float)
    return _maybe_scalar(q((np.asarray(eps0) / cfg.noise_power - 1.0) * np.sqrt(n)))


def pd_before(cfg: DetectorConfig, eps0):
    """Detection probability of the idle-channel test against one
    transmitter received at ``cfg.snr_other``."""
    _check_eps(eps0)
    n = np.asarray(cfg.num_samples, dtype=float)
    g2 = np.asarray(cfg.snr_other, dtype=float)
    x = (np.asarray(eps0) / cfg.noise_power - g2 - 1.0) * np.sqrt(n / (2.0 * g2 + 1.0))
    return _maybe_scalar(q(x))


def pf_during(cfg: DetectorConfig, eps1):
    """False-alarm probability of the in-transmission collision test.

    The node hears only its own residual self-interference plus noise;
    an alarm here aborts a perfectly good broadcast.
    """
    _check_eps(eps1)
    n = np.asarray(cfg.num_samples, dtype=float)
    r = np.asarray(cfg.sic_factor, dtype=float) ** 2 * np.asarray(cfg.snr_self, dtype=float)
    x = (np.asarray(eps1) / cfg.noise_power - r - 1.0) * np.sqrt(n / (2.0 * r + 1.0))
    return _maybe_scalar(q(x))


def pd_during(cfg: DetectorConfig, eps1):
    """Detection probability of the in-transmission collision test."""
    _check_eps(eps1)
    n = np.asarray(cfg.num_samples, dtype=float)
    g2 = np.asarray(cfg.snr_other, dtype=float)
    r = np.asarray(cfg.sic_factor, dtype=float) ** 2 * np.asarray(cfg.snr_self, dtype=float)
    x = (np.asarray(eps1) / cfg.noise_power - g2 - r - 1.0) * np.sqrt(
        n / (2.0 * r + 2.0 * r * g2 + 2.0 * g2 + 1.0)
    )
    return _maybe_scalar(q(x))


# ---------------------------------------------------------------------------
# threshold setting
# ---------------------------------------------------------------------------


def _check_target(p):
    if np.any(np.asarray(p) <= 0) or np.any(np.asarray(p) >= 1):
        raise ValueError("target probability must lie strictly inside (0, 1)")


def threshold_before(cfg: DetectorConfig, target_pd):
    """Pre-transmission threshold meeting ``target_pd`` at the design SNR.

    Inverts the pd_before expression; pd_before(cfg, result) round-trips
    to the target within 1e-9.
    """
    _check_target(target_pd)
    n = np.asarray(cfg.num_samples, dtype=float)
    g2 = np.asarray(cfg.snr_other, dtype=float)
    eps = (q_inv(target_pd) / np.sqrt(n / (2.0 * g2 + 1.0)) + g2 + 1.0) * cfg.noise_power
    if np.any(np.asarray(eps) <= 0):
        raise InfeasibleDetectorError(
            "pre-transmission threshold is non-positive; the target detection "
            "probability is unreachable for this sample count"
        )
    return _maybe_scalar(eps)


def threshold_during(cfg: DetectorConfig, target_pd):
    """In-transmission threshold meeting ``target_pd`` at the design SNR.

    Sits above the pre-transmission threshold by (roughly) the residual
    self-interference power; equals it exactly when cancellation is
    perfect and the targets match.
    """
    _check_target(target_pd)
    n = np.asarray(cfg.num_samples, dtype=float)
    g2 = np.asarray(cfg.snr_other, dtype=float)
    r = np.asarray(cfg.sic_factor, dtype=float) ** 2 * np.asarray(cfg.snr_self, dtype=float)
    scale = np.sqrt(n / (2.0 * r + 2.0 * r * g2 + 2.0 * g2 + 1.0))
    eps = (q_inv(target_pd) / scale + g2 + r + 1.0) * cfg.noise_power
    if np.any(np.asarray(eps) <= 0):
        raise InfeasibleDetectorError(
            "in-transmission threshold is non-positive; the target detection "
            "probability is unreachable for this sample count"
        )
    return _maybe_scalar(eps)


def thresholds_for(cfg: DetectorConfig, targets: TargetProbabilities) -> ThresholdPair:
    """Both thresholds for a config and a pair of detection targets."""
    return ThresholdPair(
        eps_before=threshold_before(cfg, targets.target_pd_before),
        eps_during=threshold_during(cfg, targets.target_pd_during),
    )


def threshold_link(cfg: DetectorConfig, eps0):
    """Map the pre-transmission threshold to the in-transmission one.

    Valid when both thresholds are derived from the same target
    detection probability: composing this with ``threshold_before``
    reproduces ``threshold_during`` to 1e-9.  With perfect cancellation
    it is the identity.
    """
    n = np.asarray(cfg.num_samples, dtype=float)
    g2 = np.asarray(cfg.snr_other, dtype=float)
    r = np.asarray(cfg.sic_factor, dtype=float) ** 2 * np.asarray(cfg.snr_self, dtype=float)
    ratio = np.sqrt((2.0 * g2 + 1.0) / (2.0 * r + 2.0 * r * g2 + 2.0 * g2 + 1.0))
    eps1 = ((np.asarray(eps0) / cfg.noise_power - g2 - 1.0) / ratio + r + g2 + 1.0) * cfg.noise_power
    return _maybe_scalar(eps1)


# ---------------------------------------------------------------------------
# SIC-factor inversion
# ---------------------------------------------------------------------------


class SicSolution(NamedTuple):
    """SIC factor solving a false-alarm target, with its square."""

    eta: float
    eta_sq: float


def sic_factor_for_pf(cfg: DetectorConfig, eps1, target_pf) -> SicSolution:
    """Largest tolerable SIC factor for a false-alarm target at ``eps1``.

    Solves pf_during(eta) = target_pf as a quadratic in eta^2.  The
    squaring step introduces a mirror root that lands on 1 - target_pf;
    the root is therefore chosen by the sign of Q^-1(target_pf) so the
    returned eta always round-trips through pf_during (to 1e-8).

    Raises InfeasibleDetectorError when the discriminant
    (8*y*N*Qi^2 + 4*Qi^4)/N^2 with y = eps1/noise - 0.5 is negative
    (no SIC factor reaches the target at this threshold), and
    ValueError when the algebraic solution falls outside [0, 1].
    """
    _check_target(target_pf)
    _check_eps(eps1)
    n = float(cfg.num_samples)
    g1 = float(cfg.snr_self)
    if g1 <= 0:
        raise ValueError("sic_factor_for_pf requires snr_self > 0")
    e = float(eps1) / float(cfg.noise_power)
    beta = q_inv(float(target_pf))
    y = e - 0.5

    delta = (8.0 * y * n * beta**2 + 4.0 * beta**4) / n**2
    if delta < 0.0:
        raise InfeasibleDetectorError(
            "no SIC factor meets the false-alarm target at this threshold "
            f"(discriminant {delta:.3e} < 0)"
        )

    # residual power u = eta^2 * snr_self; mirror root rejected via sign(beta)
    u = (e - 1.0) + (beta**2 - beta * math.sqrt(2.0 * y * n + beta**2)) / n
    eta_sq = u / g1
    if eta_sq < 0.0 or eta_sq > 1.0:
        raise ValueError(
            f"solution eta^2 = {eta_sq:.6g} falls outside [0, 1]; the target "
            "is met by no physical SIC factor at this threshold"
        )
    return SicSolution(eta=math.sqrt(eta_sq), eta_sq=eta_sq)


# ---------------------------------------------------------------------------
# SIC fluctuation averaging
# ---------------------------------------------------------------------------


def _check_fluct(eta0, m):
    if m < 0:
        raise ValueError("fluctuation half-width m must be >= 0")
    if eta0 - m < 0 or eta0 + m > 1:
        raise ValueError("fluctuation interval must stay inside [0, 1]")


def _avg_over_sic(prob_fn, cfg: DetectorConfig, eps1, eta0, m):
    _check_fluct(eta0, m)
    if m == 0.0:
        return float(prob_fn(cfg.with_sic(eta0), eps1))
    val, _ = integrate.quad(
        lambda s: prob_fn(cfg.with_sic(s), eps1),
        eta0 - m,
        eta0 + m,
        epsabs=1e-9,
        epsrel=1e-9,
        limit=200,
    )
    return val / (2.0 * m)


def avg_pf_fluct_numeric(cfg: DetectorConfig, eps1, eta0, m):
    """In-transmission false-alarm rate averaged over a uniformly
    fluctuating SIC factor on [eta0 - m, eta0 + m].

    Adaptive quadrature; absolute error well under 1e-6 (the integral
    has no closed form).  m = 0 degenerates to pf_during at eta0.
    """
    return _avg_over_sic(pf_during, cfg, eps1, eta0, m)


def avg_pf_fluct_approx(cfg: DetectorConfig, eps1, eta0, m):
    """Endpoint-mean shortcut for the fluctuation-averaged false alarm:
    the mean of pf_during evaluated at eta0 + m and at eta0 - m, each
    endpoint with its own SIC factor throughout.

    Tracks the quadrature answer to within a couple of percent for
    realistic fluctuations, which is what makes it useful as a design
    rule of thumb.
    """
    _check_fluct(eta0, m)
    hi = pf_during(cfg.with_sic(eta0 + m), eps1)
    lo = pf_during(cfg.with_sic(eta0 - m), eps1)
    return 0.5 * (hi + lo)


def avg_pd_fluct_numeric(cfg: DetectorConfig, eps1, eta0, m):
    """Collision-detection probability averaged over a uniformly
    fluctuating SIC factor; quadrature twin of ``avg_pf_fluct_numeric``."""
    return _avg_over_sic(pd_during, cfg, eps1, eta0, m)
