"""Gaussian wave-packet model for the down-converted pairs.

Delays are path lengths in micrometres; angular frequencies are rad/fs.
The joint spectral amplitude factorizes into a pump envelope of the sum
detuning and a phase-matching factor of the half-difference detuning,

    f(d1, d2) = alpha(d1 + d2) * phi((d1 - d2) / 2),

both Gaussian. A coherence length xi maps to a spectral intensity width
sigma through the envelope convention: the interference envelope
exp(-sigma^2 dL^2 / (2 c^2)) has a full width at half maximum equal to xi.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np

C_UM_PER_FS = 0.299792458
FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))


class SpectralError(ValueError):
    pass


class NonPositiveLength(SpectralError):
    pass


class GridTooCoarse(SpectralError):
    pass


@dataclass(frozen=True)
class SpectralModel:
    """Spectral configuration of the source.

    ``span`` is the half-width of the detuning grid in rad/fs; ``None``
    selects 5 sigma of the wider factor. When ``enabled`` is false every
    photon is monochromatic at ``lambda0_nm`` and the bins only serve as
    temporal slots.
    """

    lambda0_nm: float = 810.0
    xi_single_um: float = 126.0
    xi_pump_um: float = 300.0
    bin_count: int = 257
    span: float | None = None
    enabled: bool = True

    def __post_init__(self):
        if not self.xi_single_um > 0 or not self.xi_pump_um > 0:
            raise NonPositiveLength("coherence lengths must be positive")
        if not self.lambda0_nm > 0:
            raise NonPositiveLength("center wavelength must be positive")
        if self.bin_count < 1:
            raise SpectralError("bin_count must be at least 1")
        if self.span is not None and self.enabled and not self.span > 0:
            raise SpectralError("span must be positive when the model is enabled")

    @property
    def lambda0_um(self) -> float:
        return self.lambda0_nm * 1e-3

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * C_UM_PER_FS / self.lambda0_um

    @property
    def sigma_pm(self) -> float:
        return bandwidth_from_coherence_length(self.xi_single_um, self.lambda0_nm)

    @property
    def sigma_pump(self) -> float:
        if math.isinf(self.xi_pump_um):
            return 0.0
        return bandwidth_from_coherence_length(self.xi_pump_um, self.lambda0_nm)

    @property
    def half_span(self) -> float:
        if self.span is not None:
            return self.span
        return 5.0 * max(self.sigma_pm, self.sigma_pump)

    def with_(self, **changes) -> "SpectralModel":
        return replace(self, **changes)


def bandwidth_from_coherence_length(xi_um: float, lambda0_nm: float = 810.0) -> float:
    """Spectral intensity std (rad/fs) whose interference envelope has FWHM ``xi_um``.

    The envelope width depends only on the spectral width, so ``lambda0_nm``
    does not enter the result; it is validated for consistency.
    """
    if not xi_um > 0 or not lambda0_nm > 0:
        raise NonPositiveLength(f"lengths must be positive, got xi={xi_um}, lambda0={lambda0_nm}")
    return FWHM_FACTOR * C_UM_PER_FS / xi_um


def envelope_fwhm(sigma_omega: float) -> float:
    """Inverse of :func:`bandwidth_from_coherence_length`, in micrometres."""
    if not sigma_omega > 0:
        raise NonPositiveLength("bandwidth must be positive")
    return FWHM_FACTOR * C_UM_PER_FS / sigma_omega


def detunings(model: SpectralModel) -> np.ndarray:
    """Symmetric detuning grid; d_i + d_j == 0 exactly when i + j == n - 1."""
    n = model.bin_count
    if n == 1:
        return np.zeros(1)
    step = 2.0 * model.half_span / (n - 1)
    return (np.arange(n) - (n - 1) / 2.0) * step


def bin_wavelengths_um(model: SpectralModel) -> np.ndarray:
    if not model.enabled:
        return np.full(model.bin_count, model.lambda0_um)
    omega = model.omega0 + detunings(model)
    return 2.0 * math.pi * C_UM_PER_FS / omega


def _gauss_amp(x: np.ndarray, sigma: float) -> np.ndarray:
    # amplitude whose square is a Gaussian intensity of std sigma
    if sigma == 0.0:
        return np.where(np.abs(x) < 1e-12, 1.0, 0.0)
    return np.exp(-(x**2) / (4.0 * sigma**2))


def _check_resolution(model: SpectralModel) -> None:
    d = detunings(model)
    inside = int(np.count_nonzero(np.abs(d) <= 3.0 * model.sigma_pm))
    if inside < 8:
        raise GridTooCoarse(
            f"only {inside} bins within +-3 sigma of the phase-matching factor; need 8"
        )


@dataclass(frozen=True, eq=False)
class JointSpectralAmplitude:
    """Pair amplitude on the (signal bin, idler bin) detuning grid, unit L2 norm."""

    detunings: np.ndarray
    values: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def marginal(self) -> np.ndarray:
        return self.intensity.sum(axis=1)

    def sum_frequency_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """Weights of d1 + d2, grouped over the anti-diagonals of the grid."""
        n = len(self.detunings)
        idx = np.add.outer(np.arange(n), np.arange(n)).ravel()
        weights = np.bincount(idx, weights=self.intensity.ravel(), minlength=2 * n - 1)
        step = self.detunings[1] - self.detunings[0] if n > 1 else 0.0
        sums = (np.arange(2 * n - 1) - (n - 1)) * step
        return sums, weights

    def correlation(self) -> float:
        """Pearson correlation of the two detunings under |f|^2."""
        p = self.intensity
        d = self.detunings
        m1 = np.sum(p.sum(axis=1) * d)
        m2 = np.sum(p.sum(axis=0) * d)
        v1 = np.sum(p.sum(axis=1) * (d - m1) ** 2)
        v2 = np.sum(p.sum(axis=0) * (d - m2) ** 2)
        cov = np.sum(p * np.outer(d - m1, d - m2))
        return float(cov / math.sqrt(v1 * v2))


@functools.lru_cache(maxsize=32)
def build_jsa(model: SpectralModel) -> JointSpectralAmplitude:
    if not model.enabled:
        raise SpectralError("the spectral model is disabled")
    _check_resolution(model)
    d = detunings(model)
    d1, d2 = np.meshgrid(d, d, indexing="ij")
    f = _gauss_amp(d1 + d2, model.sigma_pump) * _gauss_amp((d1 - d2) / 2.0, model.sigma_pm)
    f = f / math.sqrt(np.sum(np.abs(f) ** 2))
    f.setflags(write=False)
    d.setflags(write=False)
    return JointSpectralAmplitude(d, f)


@functools.lru_cache(maxsize=32)
def _pm_weights(model: SpectralModel) -> tuple[np.ndarray, np.ndarray]:
    _check_resolution(model)
    d = detunings(model)
    w = _gauss_amp(d, model.sigma_pm) ** 2
    return d, w / w.sum()


def _cos_transform(freqs: np.ndarray, weights: np.ndarray, delta_l_um) -> np.ndarray | float:
    dl = np.asarray(delta_l_um, dtype=float)
    phase = np.multiply.outer(dl, freqs) / C_UM_PER_FS
    val = np.abs(np.exp(1j * phase) @ weights)
    val = np.clip(val, 0.0, 1.0)
    return float(val) if val.ndim == 0 else val


def temporal_overlap(model: SpectralModel, delta_l1_um) -> np.ndarray | float:
    """Wave-packet overlap v(dL1) of the two photons at the first splitter.

    Quadrature of |phi(W)|^2 cos(W dL / c) over the grid, with v(0) = 1.
    """
    d, w = _pm_weights(model)
    return _cos_transform(d, w, delta_l1_um)


def single_photon_envelope(model: SpectralModel, delta_l2_um) -> np.ndarray | float:
    """One-photon fringe envelope versus the interferometer delay.

    Uses the phase-matching factor alone, so its FWHM equals ``xi_single``.
    The pump contributes (xi / (2 xi_pump))^2 to the marginal bandwidth;
    :func:`marginal_envelope` keeps that term.
    """
    return temporal_overlap(model, delta_l2_um)


def marginal_envelope(model: SpectralModel, delta_l2_um) -> np.ndarray | float:
    jsa = build_jsa(model)
    return _cos_transform(jsa.detunings, jsa.marginal(), delta_l2_um)


def two_photon_envelope(model: SpectralModel, delta_l2_um) -> np.ndarray | float:
    """Envelope of the lambda/2 coincidence fringes.

    Both photons cross the same delay, so the fringe phase follows the sum
    frequency and the envelope is set by the pump factor.
    """
    sums, weights = build_jsa(model).sum_frequency_distribution()
    return _cos_transform(sums, weights, delta_l2_um)


def hom_coincidence(model: SpectralModel, delta_l1_um, v_floor: float = 1.0):
    """Coincidence rate at the first splitter normalized to the plateau."""
    if not 0.0 <= v_floor <= 1.0:
        raise ValueError(f"v_floor must lie in [0, 1], got {v_floor}")
    return 1.0 - v_floor * temporal_overlap(model, delta_l1_um)
