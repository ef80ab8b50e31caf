"""Fringe and envelope fitting.

Fits use a damped Gauss-Newton (Levenberg-Marquardt) loop with analytic
Jacobians and absolute error bars; parameter uncertainties come from the
inverse of the weighted normal matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import FWHM_FACTOR

MAX_ITER = 200
REL_TOL = 1e-10


class FitError(Exception):
    pass


class NoConvergence(FitError):
    pass


class InsufficientData(FitError):
    pass


class WindowTooSmall(FitError):
    pass


class Degenerate(ValueError):
    pass


class FitModel(enum.Enum):
    SINUSOID = "sinusoid"
    GAUSSIAN_ENVELOPE = "gaussian_envelope"
    GAUSSIAN_DIP = "gaussian_dip"


@dataclass
class FitReport:
    model: FitModel
    params: dict[str, float]
    uncertainties: dict[str, float]
    visibility: float
    visibility_err: float
    residual_rms: float
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.params[key]

    @property
    def period(self) -> float:
        return self.params["period"]

    @property
    def fwhm(self) -> float:
        return self.params["fwhm"]


def visibility(c_max: float, c_min: float) -> float:
    """(C_max - C_min) / (C_max + C_min)."""
    if c_max == 0 and c_min == 0:
        raise Degenerate("both rates are zero")
    if not c_max >= c_min >= 0:
        raise ValueError(f"need c_max >= c_min >= 0, got {c_max}, {c_min}")
    return (c_max - c_min) / (c_max + c_min)


def hom_visibility(c_plat: float, c_dip: float) -> float:
    """(C_plat - C_dip) / C_plat."""
    if c_plat == 0:
        raise Degenerate("plateau rate is zero")
    if not c_plat > 0 or not 0 <= c_dip <= c_plat:
        raise ValueError(f"need c_plat > 0 and 0 <= c_dip <= c_plat, got {c_plat}, {c_dip}")
    return (c_plat - c_dip) / c_plat


def levenberg_marquardt(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    sigma: np.ndarray,
    p0: Sequence[float],
    max_iter: int = MAX_ITER,
    tol: float = REL_TOL,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimize sum(((y - model) / sigma)^2). Returns (params, covariance, iterations)."""
    p = np.asarray(p0, dtype=float).copy()
    w = 1.0 / sigma
    r = (y - model(x, p)) * w
    chi2 = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = jacobian(x, p) * w[:, None]
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(A + lam * np.diag(diag), g, rcond=None)[0]
            p_new = p + step
            r_new = (y - model(x, p_new)) * w
            chi2_new = float(r_new @ r_new)
            if chi2_new <= chi2:
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left: at the numerical minimum
                return p, _covariance(A), it
        small = np.all(np.abs(step) <= tol * np.maximum(np.abs(p_new), 1e-300))
        # a parameter sitting at zero never passes the relative step test,
        # so also stop once chi^2 stalls under near Gauss-Newton steps
        stalled = lam < 1.0 and chi2 - chi2_new <= tol * chi2
        p, r, chi2 = p_new, r_new, chi2_new
        if small or stalled or chi2 == 0.0:
            J = jacobian(x, p) * w[:, None]
            return p, _covariance(J.T @ J), it
    raise NoConvergence(f"no convergence within {max_iter} iterations")


def _covariance(A: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(A)


def _errors(y: np.ndarray, err) -> np.ndarray:
    if err is None:
        return np.ones_like(y)
    err = np.asarray(err, dtype=float)
    if np.any(err <= 0):
        raise ValueError("error bars must be positive")
    return err


def poisson_errors(counts) -> np.ndarray:
    """sqrt(N) error bars with a floor of one count."""
    return np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))


# -- sinusoid -----------------------------------------------------------------

def _sin_model(x, p):
    offset, amp, period, phase = p
    return offset + amp * np.cos(2 * np.pi * x / period + phase)


def _sin_jac(x, p):
    offset, amp, period, phase = p
    th = 2 * np.pi * x / period + phase
    s = np.sin(th)
    return np.column_stack(
        [np.ones_like(x), np.cos(th), amp * s * 2 * np.pi * x / period**2, -amp * s]
    )


def dominant_frequency(x: np.ndarray, y: np.ndarray, oversample: int = 4) -> tuple[float, complex]:
    """Peak of the discrete Fourier transform of the mean-subtracted signal.

    A coarse scan locates the peak, a fine scan around it refines it.
    Returns the frequency and the complex coefficient there.
    """
    yc = y - y.mean()
    span = x.max() - x.min()
    dx = np.median(np.diff(np.sort(x)))

    def power(freqs):
        return np.abs(np.exp(-2j * np.pi * np.outer(freqs, x)) @ yc)

    coarse = np.linspace(0.5 / span, 0.5 / dx, max(64, oversample * len(x)))
    k = int(np.argmax(power(coarse)))
    df = coarse[1] - coarse[0]
    fine = np.linspace(max(coarse[k] - df, coarse[0]), min(coarse[k] + df, coarse[-1]), 65)
    pw = power(fine)
    j = int(np.argmax(pw))
    f = fine[j]
    if 0 < j < len(fine) - 1:
        a, b, c = pw[j - 1 : j + 2]
        denom = a - 2 * b + c
        if denom != 0:
            f = fine[j] + 0.5 * (a - c) / denom * (fine[1] - fine[0])
    return float(f), complex(np.exp(-2j * np.pi * f * x) @ yc)


def fringe_guess(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    f, c = dominant_frequency(x, y)
    offset = 0.5 * (y.max() + y.min())
    amp = 0.5 * (y.max() - y.min())
    return np.array([offset, amp, 1.0 / f, float(np.angle(c))])


def fit_fringe(x, y, err=None, p0: Sequence[float] | None = None, poisson: bool = False) -> FitReport:
    """Weighted fit of offset + amplitude * cos(2 pi x / period + phase).

    ``x`` units carry through to ``period``. Visibility is amplitude /
    offset, clamped to [0, 1]. With ``poisson`` the data are counts: after
    a first pass the weights come from the fitted curve rather than the
    observed counts, which removes the low-count bias of sqrt(N) weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = _errors(y, err)
    if len(x) < 8:
        raise InsufficientData(f"{len(x)} points; need at least 8")
    guess = fringe_guess(x, y) if p0 is None else np.asarray(p0, dtype=float)
    span = x.max() - x.min()
    if span < 1.5 * guess[2]:
        raise InsufficientData(f"data span {span:g} covers fewer than 1.5 periods of {guess[2]:g}")
    p, cov, it = levenberg_marquardt(_sin_model, _sin_jac, x, y, sigma, guess)
    if poisson:
        for _ in range(2):
            sigma = np.sqrt(np.maximum(_sin_model(x, p), 1.0))
            p, cov, more = levenberg_marquardt(_sin_model, _sin_jac, x, y, sigma, p)
            it += more
    offset, amp, period, phase = p
    if amp < 0:
        amp, phase = -amp, phase + np.pi
        cov[1, :] *= -1
        cov[:, 1] *= -1
    phase = float((phase + np.pi) % (2 * np.pi) - np.pi)
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    vis, vis_err = _ratio_visibility(amp, offset, cov[1, 1], cov[0, 0], cov[0, 1])
    resid = y - _sin_model(x, [offset, amp, period, phase])
    return FitReport(
        FitModel.SINUSOID,
        {"offset": float(offset), "amplitude": float(amp), "period": float(period), "phase": phase},
        dict(zip(("offset", "amplitude", "period", "phase"), map(float, errs))),
        vis,
        vis_err,
        float(np.sqrt(np.mean(resid**2))),
        it,
    )


def _ratio_visibility(amp, offset, var_a, var_o, cov_ao) -> tuple[float, float]:
    if offset <= 0:
        return (1.0 if amp > 0 else 0.0), float("nan")
    v = amp / offset
    var = var_a / offset**2 + amp**2 * var_o / offset**4 - 2 * amp * cov_ao / offset**3
    return float(min(max(v, 0.0), 1.0)), float(math.sqrt(max(var, 0.0)))


# -- Gaussian -----------------------------------------------------------------

def _gauss_model(sign):
    def model(x, p):
        offset, amp, center, sig = p
        return offset + sign * amp * np.exp(-((x - center) ** 2) / (2 * sig**2))

    def jac(x, p):
        offset, amp, center, sig = p
        g = np.exp(-((x - center) ** 2) / (2 * sig**2))
        return np.column_stack(
            [
                np.ones_like(x),
                sign * g,
                sign * amp * g * (x - center) / sig**2,
                sign * amp * g * (x - center) ** 2 / sig**3,
            ]
        )

    return model, jac


def gaussian_guess(x: np.ndarray, y: np.ndarray, dip: bool) -> np.ndarray:
    order = np.argsort(x)
    xs, ys = x[order], (-y if dip else y)[order]
    edge = max(1, len(xs) // 10)
    offset = float(np.median(np.concatenate([ys[:edge], ys[-edge:]])))
    k = int(np.argmax(ys))
    amp = ys[k] - offset
    above = xs[ys - offset >= 0.5 * amp]
    width = (above.max() - above.min()) if len(above) > 1 else (xs[1] - xs[0])
    sig = max(width, xs[1] - xs[0]) / FWHM_FACTOR
    if dip:
        offset = -offset
    return np.array([offset, amp, xs[k], sig])


def fit_envelope(x, y, err=None, dip: bool = False, p0: Sequence[float] | None = None) -> FitReport:
    """Fit offset +/- amplitude * exp(-(x - center)^2 / (2 sigma^2)).

    ``dip=True`` fits an inverted Gaussian (HOM data) and reports
    (plateau - dip) / plateau as visibility; otherwise visibility is the
    contrast of the fitted curve between its peak and the offset.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = _errors(y, err)
    if len(x) < 5:
        raise InsufficientData(f"{len(x)} points; need at least 5")
    guess = gaussian_guess(x, y, dip) if p0 is None else np.asarray(p0, dtype=float)
    if x.max() - x.min() < 2 * FWHM_FACTOR * abs(guess[3]):
        raise InsufficientData("scan covers less than twice the envelope width")
    model, jac = _gauss_model(-1.0 if dip else 1.0)
    p, cov, it = levenberg_marquardt(model, jac, x, y, sigma, guess)
    offset, amp, center, sig = p
    sig = abs(sig)
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if dip:
        vis, vis_err = _ratio_visibility(amp, offset, cov[1, 1], cov[0, 0], cov[0, 1])
        kind = FitModel.GAUSSIAN_DIP
    else:
        peak, base = offset + amp, offset
        hi, lo = max(peak, base, 0.0), max(min(peak, base), 0.0)
        vis = visibility(hi, lo) if hi > 0 else 0.0
        vis_err = float("nan")
        kind = FitModel.GAUSSIAN_ENVELOPE
    resid = y - model(x, [offset, amp, center, sig])
    params = {
        "offset": float(offset),
        "amplitude": float(amp),
        "center": float(center),
        "sigma": float(sig),
        "fwhm": float(FWHM_FACTOR * sig),
    }
    uncertainties = dict(zip(("offset", "amplitude", "center", "sigma"), map(float, errs)))
    uncertainties["fwhm"] = float(FWHM_FACTOR * errs[3])
    return FitReport(kind, params, uncertainties, float(min(max(vis, 0.0), 1.0)), vis_err,
                     float(np.sqrt(np.mean(resid**2))), it)


# -- windowed amplitudes ------------------------------------------------------

def envelope_amplitude_extraction(
    x, y, centers: Sequence[float], half_width: float, period: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Local fringe amplitude in windows around ``centers``.

    Each window is fitted with offset + a cos + b sin at a common period
    (estimated from the most modulated window when not given) and reports
    sqrt(a^2 + b^2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    centers = np.asarray(centers, dtype=float)
    windows = [np.flatnonzero(np.abs(x - c) <= half_width) for c in centers]
    for c, idx in zip(centers, windows):
        if len(idx) < 5:
            raise WindowTooSmall(f"window at {c:g} holds {len(idx)} points")
    if period is None:
        best = max(windows, key=lambda idx: np.ptp(y[idx]))
        period = fit_fringe(x[best], y[best]).period
    amps = np.empty(len(centers))
    for i, idx in enumerate(windows):
        xs = x[idx]
        # an estimated period is only good to a fraction of a percent
        if xs.max() - xs.min() < 1.95 * period:
            raise WindowTooSmall(f"window at {centers[i]:g} spans fewer than two periods")
        th = 2 * np.pi * xs / period
        A = np.column_stack([np.ones_like(xs), np.cos(th), np.sin(th)])
        coef, *_ = np.linalg.lstsq(A, y[idx], rcond=None)
        amps[i] = math.hypot(coef[1], coef[2])
    return centers, amps
