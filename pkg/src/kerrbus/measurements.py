"""Homodyne and photon-number measurements on branch states.

Quadratures follow x(xi) = a e^{i xi} + a^dag e^{-i xi}, so the vacuum has
unit variance and |alpha> is centred on 2 Re(alpha e^{i xi}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .branch import BranchState, ConditioningError, coherent_overlap, normalize, prune

PHOTON = "photon_count"
QUADRATURE = "quadrature"


class GridError(RuntimeError):
    """The homodyne grid does not hold the distribution's mass."""


class CutoffError(RuntimeError):
    """Photon-number cutoff too small for the state."""


@dataclass(frozen=True)
class HomodyneSetting:
    xi: float = 0.0
    grid_half_width: float = 10.0
    grid_step: float = 0.01

    def __post_init__(self):
        if self.grid_step > 0.01 or self.grid_step <= 0:
            raise ValueError("grid_step must lie in (0, 0.01]")
        if self.grid_half_width < 10:
            raise ValueError("grid_half_width must be at least 10")


@dataclass(frozen=True)
class PhotonCountSetting:
    n_max: int | None = None
    odd_threshold: int = 1


@dataclass
class MeasurementOutcome:
    kind: str
    value: float
    probability: float
    state: BranchState


def photon_cutoff(max_abs_alpha: float) -> int:
    m = max_abs_alpha ** 2
    return int(math.ceil(m + 10 * math.sqrt(m) + 20))


# ---- single-mode wavefunctions ------------------------------------------


def quadrature_amplitude(x, alpha, xi: float = 0.0):
    """<x|alpha> in the x(xi) eigenbasis."""
    a = np.asarray(alpha, dtype=complex) * np.exp(1j * xi)
    x = np.asarray(x, dtype=float)
    re, im = a.real, a.imag
    return (2 * np.pi) ** -0.25 * np.exp(-((x - 2 * re) ** 2) / 4 + 1j * (im * x - re * im))


def number_amplitude(n, alpha):
    """<n|alpha> = e^{-|alpha|^2/2} alpha^n / sqrt(n!), evaluated in log space."""
    n = np.asarray(n)
    alpha = np.asarray(alpha, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mod = -0.5 * np.abs(alpha) ** 2 + n * np.log(np.abs(alpha)) - 0.5 * gammaln(n + 1)
        out = np.exp(log_mod + 1j * n * np.angle(alpha))
    # 0^0 = 1 for the vacuum amplitude
    return np.where((np.abs(alpha) == 0) & (n == 0), 1.0 + 0j, np.where(np.abs(alpha) == 0, 0j, out))


# ---- shared pieces -------------------------------------------------------


def _split(state: BranchState, bus: str):
    """Coefficient matrix M[j,k] = c_j^* c_k <rest_j|rest_k> and the measured column."""
    col = state.bus_column(bus)
    rest = np.delete(state.bus, col, axis=1)
    tmp = BranchState(
        amps=state.amps, registers=state.registers, bus=rest, discrete=state.discrete
    )
    M = np.conj(state.amps)[:, None] * tmp.gram() * state.amps[None, :]
    return M, state.bus[:, col]


def _condition(state: BranchState, bus: str, weights) -> BranchState:
    post = replace(state, amps=state.amps * weights).consume(bus)
    keep = post.amps != 0
    if not keep.any():
        raise ConditioningError("measurement outcome has zero amplitude")
    post = replace(post, amps=post.amps[keep], registers=post.registers[keep], bus=post.bus[keep])
    return normalize(prune(normalize(post)))


# ---- homodyne ------------------------------------------------------------


def peak_means(state: BranchState, bus: str, xi: float) -> np.ndarray:
    col = state.bus_column(bus)
    return 2 * np.real(state.bus[:, col] * np.exp(1j * xi))


def homodyne_grid(state: BranchState, bus: str, setting: HomodyneSetting) -> np.ndarray:
    means = peak_means(state, bus, setting.xi)
    lo = means.min() - setting.grid_half_width
    hi = means.max() + setting.grid_half_width
    n = int(math.ceil((hi - lo) / setting.grid_step)) + 1
    return lo + setting.grid_step * np.arange(n)


def homodyne_pdf(state: BranchState, bus: str, setting: HomodyneSetting, x):
    """Quadrature probability density, interference terms included."""
    M, alphas = _split(state, bus)
    x = np.asarray(x, dtype=float)
    psi = quadrature_amplitude(x.reshape(-1)[:, None], alphas[None, :], setting.xi)
    p = np.real(np.einsum("gj,jk,gk->g", np.conj(psi), M, psi))
    p = p / _total(M, state, bus)
    return p.reshape(x.shape) if x.ndim else float(p[0])


def _total(M, state, bus):
    # norm including the measured mode's overlaps
    col = state.bus_column(bus)
    a = state.bus[:, col]
    return float(np.real(np.sum(M * coherent_overlap(a[:, None], a[None, :]))))


def grid_cdf(grid: np.ndarray, pdf: np.ndarray) -> np.ndarray:
    steps = 0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid)
    return np.concatenate([[0.0], np.cumsum(steps)])


def inverse_cdf(grid: np.ndarray, cdf: np.ndarray, u):
    """Map uniforms in [0,1) to grid positions by linear interpolation of the CDF."""
    target = np.asarray(u) * cdf[-1]
    i = np.clip(np.searchsorted(cdf, target, side="right") - 1, 0, len(grid) - 2)
    width = cdf[i + 1] - cdf[i]
    frac = np.where(width > 0, (target - cdf[i]) / np.where(width > 0, width, 1.0), 0.5)
    return grid[i] + frac * (grid[i + 1] - grid[i])


def homodyne_distribution(state: BranchState, bus: str, setting: HomodyneSetting):
    """Grid, density and CDF; raises GridError if the grid misses mass."""
    grid = homodyne_grid(state, bus, setting)
    pdf = homodyne_pdf(state, bus, setting, grid)
    cdf = grid_cdf(grid, pdf)
    if cdf[-1] < 1 - 1e-4:
        raise GridError(f"grid holds only {cdf[-1]:.6g} of the probability")
    return grid, pdf, cdf


def homodyne_condition(state: BranchState, bus: str, setting: HomodyneSetting, x: float) -> MeasurementOutcome:
    density = homodyne_pdf(state, bus, setting, x)
    col = state.bus_column(bus)
    w = quadrature_amplitude(x, state.bus[:, col], setting.xi)
    return MeasurementOutcome(QUADRATURE, float(x), float(density), _condition(state, bus, w))


def homodyne_sample(state: BranchState, bus: str, setting: HomodyneSetting, rng) -> MeasurementOutcome:
    grid, _, cdf = homodyne_distribution(state, bus, setting)
    x = float(inverse_cdf(grid, cdf, rng.random()))
    return homodyne_condition(state, bus, setting, x)


# ---- photon counting -----------------------------------------------------


def _cutoff(state: BranchState, bus: str, setting: PhotonCountSetting) -> int:
    col = state.bus_column(bus)
    needed = photon_cutoff(float(np.abs(state.bus[:, col]).max()))
    if setting.n_max is None:
        return needed
    return setting.n_max


def photon_number_distribution(state: BranchState, bus: str, setting: PhotonCountSetting = PhotonCountSetting()):
    """P(n) for n = 0..n_max; raises CutoffError if mass leaks past n_max."""
    n_max = _cutoff(state, bus, setting)
    M, alphas = _split(state, bus)
    n = np.arange(n_max + 1)
    A = number_amplitude(n[:, None], alphas[None, :])
    p = np.real(np.einsum("nj,jk,nk->n", np.conj(A), M, A))
    p = np.clip(p / _total(M, state, bus), 0.0, None)
    if p.sum() < 1 - 1e-8:
        raise CutoffError(f"n_max={n_max} holds only {p.sum():.10g} of the photon-number mass")
    return p


def photon_number_pmf(state: BranchState, bus: str, setting: PhotonCountSetting, n: int) -> float:
    p = photon_number_distribution(state, bus, setting)
    if n > len(p) - 1:
        raise CutoffError(f"n={n} exceeds n_max={len(p) - 1}")
    return float(p[n])


def sample_index(pmf: np.ndarray, u):
    cdf = np.cumsum(pmf)
    return np.minimum(np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right"), len(pmf) - 1)


def photon_condition(state: BranchState, bus: str, n: int, probability: float | None = None) -> MeasurementOutcome:
    col = state.bus_column(bus)
    w = number_amplitude(n, state.bus[:, col])
    if probability is None:
        M, alphas = _split(state, bus)
        a = number_amplitude(n, alphas)
        probability = float(np.real(np.conj(a) @ M @ a)) / _total(M, state, bus)
    return MeasurementOutcome(PHOTON, int(n), float(probability), _condition(state, bus, w))


def photon_number_measure(state: BranchState, bus: str, setting: PhotonCountSetting, rng) -> MeasurementOutcome:
    pmf = photon_number_distribution(state, bus, setting)
    n = int(sample_index(pmf, rng.random()))
    return photon_condition(state, bus, n, float(pmf[n]))


# ---- discrimination ------------------------------------------------------


def classify_peaks(x, peaks):
    """Index of the bin (midpoint boundaries) containing x; ties go to the lower bin."""
    peaks = np.asarray(peaks, dtype=float)
    if peaks.size == 0:
        raise ValueError("empty peak list")
    if np.any(np.diff(peaks) <= 0):
        raise ValueError("peak means must be strictly increasing")
    mids = 0.5 * (peaks[1:] + peaks[:-1])
    out = np.searchsorted(mids, x, side="left")
    return int(out) if np.ndim(out) == 0 else out
