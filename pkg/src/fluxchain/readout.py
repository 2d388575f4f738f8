"""Single-shot readout simulation and histogram statistics.

Signal model: the resonator is driven at the low-state dip; the mean
transmission relaxes exponentially (amplitude time constant 2/kappa) from
its pre-latch level to the latched state's steady level, and the
integrated signal picks up Gaussian noise of std noise_sigma_rate*sqrt(T).
Signals are normalized so the noiseless low/high separation at T = 1 us
equals 1.

Preparation errors enter as per-shot label flips: each prepared ensemble
flips with probability eps_prep + sep_loss/2, covering thermal/preparation
residuals and the latching separation limit.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfcinv

from .errors import CalibrationError, FitError, ModelError
from .resonator import S21Fit, calibrate_f_bare, decay_rate, resonant_freq, s21_model

_NORM_TIME = 1e-6
_MIN_T_INT = 2e-9
_SIGMA_RATE_CAP = 1e6

LOW_STATE = "L"    # parked-on-dip state: small integrated signal
HIGH_STATE = "R"


@dataclass(frozen=True)
class ReadoutModel:
    """Readout signal chain reduced to levels, ringup, noise, and flips."""

    mu_low: float              # steady |S21| at the drive, low state
    mu_high: float             # steady |S21| at the drive, high state
    mu_init: float             # pre-latch |S21| at the drive
    kappa: float               # resonator energy decay rate (rad/s)
    noise_sigma_rate: float = 0.0   # normalized signal units per sqrt(s)
    eps_prep: float = 0.0      # per-prepared-state flip probability
    sep_loss: float = 0.0      # latching separation-error budget (total)

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ModelError("kappa must be positive")
        if self.mu_low == self.mu_high:
            raise ModelError("state levels must differ")

    @property
    def tau(self):
        """Amplitude relaxation time constant 2/kappa (s)."""
        return 2.0 / self.kappa

    def _raw_integral(self, mu_ss, t):
        ramp = self.tau * (1.0 - np.exp(-t / self.tau))
        return mu_ss * t + (self.mu_init - mu_ss) * ramp

    @property
    def scale(self):
        d = abs(self._raw_integral(self.mu_high, _NORM_TIME)
                - self._raw_integral(self.mu_low, _NORM_TIME))
        return 1.0 / d

    def mean_signal(self, state, t_int):
        """Noiseless normalized integrated signal for a latched state."""
        mu = self.mu_low if state == LOW_STATE else self.mu_high
        return self.scale * self._raw_integral(mu, t_int)

    def separation(self, t_int):
        return abs(self.mean_signal(HIGH_STATE, t_int) - self.mean_signal(LOW_STATE, t_int))

    def flip_probability(self):
        return self.eps_prep + 0.5 * self.sep_loss


def readout_model_from_device(p, op_point=0.25, delta_phi=0.05, z0=50.0):
    """Build the readout model from the calibrated tunable resonator.

    The drive parks at the low-state resonance (upper branch of the
    state-dependent shift); the opposite latch moves the resonance a full
    2*delta_phi step lower. kappa uses the sweet-spot frequency and total Q.
    """
    model = calibrate_f_bare(p, z0=z0)
    f_low = resonant_freq(model, op_point - delta_phi)
    f_high = resonant_freq(model, op_point + delta_phi)
    q_e_tilde = p.q_external if p.q_external is not None else p.q_total
    kappa, _ = decay_rate(p.f_res_max, p.q_total)

    def level(f0):
        fit = S21Fit(f0=f0, q_total=p.q_total, q_e_tilde=q_e_tilde,
                     phi_asym=0.0, amplitude=1.0)
        return float(s21_model(f_low, fit))

    return ReadoutModel(mu_low=level(f_low), mu_high=level(f_high),
                        mu_init=level(0.5 * (f_low + f_high)), kappa=kappa)


@dataclass(frozen=True)
class ShotRecord:
    """One integrated single-shot value with its prepared-state label."""

    prepared: str
    integrated_signal: float
    integration_time: float

    def __post_init__(self):
        if self.integration_time <= 0.0:
            raise ModelError("integration_time must be positive")


def simulate_shot(state, t_int, model, noise_sigma_rate=None, rng=None):
    """Draw one ShotRecord; see simulate_shots for the vectorized path."""
    sig = simulate_shots(model if noise_sigma_rate is None
                         else replace(model, noise_sigma_rate=noise_sigma_rate),
                         state, 1, t_int,
                         rng=rng if rng is not None else np.random.default_rng(0))
    return ShotRecord(prepared=state, integrated_signal=float(sig[0]),
                      integration_time=t_int)


def simulate_shots(model, prepared, n, t_int, rng):
    """Vectorized shot ensemble for one prepared label; returns signals."""
    if prepared not in (LOW_STATE, HIGH_STATE):
        raise ModelError(f"prepared state must be {LOW_STATE!r} or {HIGH_STATE!r}")
    if t_int < _MIN_T_INT:
        raise ModelError(f"integration time below {_MIN_T_INT:.0e} s")
    other = HIGH_STATE if prepared == LOW_STATE else LOW_STATE
    flips = rng.random(n) < model.flip_probability()
    means = np.where(flips, model.mean_signal(other, t_int),
                     model.mean_signal(prepared, t_int))
    sigma = model.noise_sigma_rate * math.sqrt(t_int)
    return means + sigma * rng.standard_normal(n)


def shot_ensemble(model, t_int, n_shots, seed=0):
    """Both prepared ensembles as ShotRecord lists, reproducible by seed."""
    records = []
    for idx, label in enumerate((LOW_STATE, HIGH_STATE)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        for s in simulate_shots(model, label, n_shots, t_int, rng):
            records.append(ShotRecord(prepared=label, integrated_signal=float(s),
                                      integration_time=t_int))
    return records


@dataclass(frozen=True)
class GaussianPeak:
    mean: float
    sigma: float
    weight: float                 # fraction of shots inside the fit window

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise FitError("fitted peak sigma must be positive")


def _robust_peak(values):
    """Dominant-peak Gaussian moments, ignoring far-tail minority events.

    Median/MAD seed the window, then the moments are refined on samples
    within 4 sigma of the running mean.
    """
    x = np.asarray(values, dtype=float)
    m = float(np.median(x))
    mad = float(np.median(np.abs(x - m)))
    s = 1.4826 * mad
    if s == 0.0:
        s = float(np.std(x)) or 1e-300
    sel = np.abs(x - m) < 4.0 * s
    for _ in range(4):
        if not np.any(sel):
            raise FitError("peak fit collapsed: no samples inside the window")
        m = float(np.mean(x[sel]))
        s = float(np.std(x[sel], ddof=1)) if np.sum(sel) > 1 else 0.0
        if s == 0.0:
            s = 1e-300
        sel = np.abs(x - m) < 4.0 * s
    return GaussianPeak(mean=m, sigma=s, weight=float(np.mean(sel)))


def gaussian_threshold(fit_l, fit_r):
    """Intersection of the two unit-weight fitted densities, between means.

    For equal sigmas this is exactly the midpoint of the means.
    """
    if fit_l.mean == fit_r.mean:
        raise FitError("degenerate single-peak data: identical means")
    lo, hi = sorted((fit_l.mean, fit_r.mean))
    if fit_l.sigma == fit_r.sigma:
        return 0.5 * (fit_l.mean + fit_r.mean)
    a = 1.0 / fit_l.sigma ** 2 - 1.0 / fit_r.sigma ** 2
    b = -2.0 * (fit_l.mean / fit_l.sigma ** 2 - fit_r.mean / fit_r.sigma ** 2)
    c = (fit_l.mean ** 2 / fit_l.sigma ** 2 - fit_r.mean ** 2 / fit_r.sigma ** 2
         - 2.0 * math.log(fit_r.sigma / fit_l.sigma))
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise FitError("fitted densities do not intersect")
    roots = [(-b + s * math.sqrt(disc)) / (2.0 * a) for s in (+1.0, -1.0)]
    inside = [r for r in roots if lo <= r <= hi]
    if not inside:
        raise FitError("fitted densities do not intersect between the means")
    return float(inside[0])


def _norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def overlap_error(fit_l, fit_r):
    """Total misclassification probability of the two fitted Gaussians at the
    intersection threshold; erfc(d/(2*sqrt(2)*sigma)) for equal sigmas.

    Invariant under affine rescaling of the signal axis. Identical
    Gaussians overlap completely: returns 1.
    """
    if fit_l.mean == fit_r.mean and fit_l.sigma == fit_r.sigma:
        return 1.0
    thr = gaussian_threshold(fit_l, fit_r)
    low, high = (fit_l, fit_r) if fit_l.mean < fit_r.mean else (fit_r, fit_l)
    q_low = 1.0 - _norm_cdf((thr - low.mean) / low.sigma)    # low state above thr
    q_high = _norm_cdf((thr - high.mean) / high.sigma)       # high state below thr
    return q_low + q_high


@dataclass(frozen=True)
class HistogramAnalysis:
    """Threshold readout statistics for a two-label shot ensemble."""

    peak_l: GaussianPeak
    peak_r: GaussianPeak
    threshold: float
    fidelity: float
    p_l_given_r: float
    p_r_given_l: float
    overlap_error: float
    sigma_separation: float       # |mean_R - mean_L| / rms-pooled sigma
    n_l: int
    n_r: int

    def to_dict(self):
        return {
            "peak_l": {"mean": self.peak_l.mean, "sigma": self.peak_l.sigma,
                       "weight": self.peak_l.weight},
            "peak_r": {"mean": self.peak_r.mean, "sigma": self.peak_r.sigma,
                       "weight": self.peak_r.weight},
            "threshold": self.threshold,
            "fidelity": self.fidelity,
            "p_l_given_r": self.p_l_given_r,
            "p_r_given_l": self.p_r_given_l,
            "overlap_error": self.overlap_error,
            "sigma_separation": self.sigma_separation,
            "n_l": self.n_l, "n_r": self.n_r,
        }


def analyze_histograms(shots, min_shots=1000):
    """Gaussian-fit the dominant peaks, set the threshold at their
    intersection, and count conditional errors empirically.

    fidelity = 1 - (P(L|R) + P(R|L)); signals at or below the threshold
    classify as the low state.
    """
    sig_l = np.array([s.integrated_signal for s in shots if s.prepared == LOW_STATE])
    sig_r = np.array([s.integrated_signal for s in shots if s.prepared == HIGH_STATE])
    if len(sig_l) < min_shots or len(sig_r) < min_shots:
        raise FitError(f"need >= {min_shots} shots per prepared label")

    peak_l = _robust_peak(sig_l)
    peak_r = _robust_peak(sig_r)
    pooled = math.sqrt(0.5 * (peak_l.sigma ** 2 + peak_r.sigma ** 2))
    if abs(peak_r.mean - peak_l.mean) < 1e-6 * pooled:
        raise FitError("degenerate single-peak data: labels are not separated")

    thr = gaussian_threshold(peak_l, peak_r)
    low_is_l = peak_l.mean < peak_r.mean
    below_l = np.mean(sig_l <= thr)
    below_r = np.mean(sig_r <= thr)
    p_r_given_l = float(1.0 - below_l) if low_is_l else float(below_l)
    p_l_given_r = float(below_r) if low_is_l else float(1.0 - below_r)

    return HistogramAnalysis(
        peak_l=peak_l, peak_r=peak_r, threshold=thr,
        fidelity=max(0.0, 1.0 - (p_l_given_r + p_r_given_l)),
        p_l_given_r=p_l_given_r, p_r_given_l=p_r_given_l,
        overlap_error=overlap_error(peak_l, peak_r),
        sigma_separation=abs(peak_r.mean - peak_l.mean) / pooled,
        n_l=len(sig_l), n_r=len(sig_r),
    )


def calibrate_noise(target_overlap, t_int, model):
    """Noise rate making the analytic Gaussian overlap equal the target.

    Closed-form inversion: overlap = erfc(d/(2*sqrt(2)*sigma)) with
    d = noiseless separation at t_int and sigma = rate*sqrt(t_int).
    """
    if not 0.0 < target_overlap < 1.0:
        raise CalibrationError("target overlap must lie in (0, 1)")
    d = model.separation(t_int)
    z = erfcinv(target_overlap)
    if z <= 0.0:
        raise CalibrationError("unattainable overlap target")
    rate = d / (2.0 * math.sqrt(2.0) * z * math.sqrt(t_int))
    if rate > _SIGMA_RATE_CAP:
        raise CalibrationError(
            f"unattainable overlap target: implied noise rate {rate:.3e} "
            f"exceeds the cap {_SIGMA_RATE_CAP:.0e}")
    return float(rate)


def calibrate_prep(target_fidelity, overlap, sep_loss):
    """Per-state flip probability reproducing a target total fidelity.

    The error budget composes as 1 - F = overlap + sep_loss + 2*eps_prep.
    """
    eps = 0.5 * (1.0 - target_fidelity - overlap - sep_loss)
    if eps < 0.0:
        raise CalibrationError(
            "target fidelity already exceeded by overlap + separation errors")
    return eps


def predicted_conditionals(model, t_int, threshold):
    """Model-predicted (P(L|R), P(R|L)) at a threshold, flips included."""
    sigma = model.noise_sigma_rate * math.sqrt(t_int)
    mu_l = model.mean_signal(LOW_STATE, t_int)
    mu_r = model.mean_signal(HIGH_STATE, t_int)
    if sigma == 0.0:
        q_l = float(mu_l > threshold)
        q_r = float(mu_r <= threshold)
    else:
        q_l = 1.0 - _norm_cdf((threshold - mu_l) / sigma)   # L-state above thr
        q_r = _norm_cdf((threshold - mu_r) / sigma)         # R-state below thr
    flip = model.flip_probability()
    p_l_given_r = flip * (1.0 - q_l) + (1.0 - flip) * q_r
    p_r_given_l = flip * (1.0 - q_r) + (1.0 - flip) * q_l
    return p_l_given_r, p_r_given_l


def fidelity_vs_time(model, times, n_shots, seed=0):
    """Full shots->histogram pipeline per integration time.

    Returns (t, fidelity, overlap_error) rows; per-time shot streams derive
    from (seed, time index, label index).
    """
    rows = []
    for k, t_int in enumerate(times):
        if t_int <= 0.0:
            raise ModelError("integration times must be positive")
        records = []
        for idx, label in enumerate((LOW_STATE, HIGH_STATE)):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(k, idx)))
            for s in simulate_shots(model, label, n_shots, t_int, rng):
                records.append(ShotRecord(prepared=label, integrated_signal=float(s),
                                          integration_time=t_int))
        analysis = analyze_histograms(records)
        rows.append((float(t_int), analysis.fidelity, analysis.overlap_error))
    return rows


def write_shots_csv(shots):
    out = ["prepared,integrated_signal,t_int_s"]
    for s in shots:
        out.append(f"{s.prepared},{s.integrated_signal:.17g},{s.integration_time:.17g}")
    return "\n".join(out) + "\n"


def read_shots_csv(text):
    lines = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "prepared,integrated_signal,t_int_s":
        raise FitError("shots CSV must start with header prepared,integrated_signal,t_int_s")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise FitError(f"malformed shots CSV row: {ln!r}")
        records.append(ShotRecord(prepared=parts[0], integrated_signal=float(parts[1]),
                                  integration_time=float(parts[2])))
    return records


def analysis_report_json(analysis):
    return json.dumps(analysis.to_dict(), indent=2)
