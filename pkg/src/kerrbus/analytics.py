"""Closed-form error and decoherence predictions, plus two-qubit state metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, gammaln
from scipy.stats import norm as _normal

EVEN = "even"
ODD = "odd"


def homodyne_error(alpha: float, theta: float) -> tuple[float, float]:
    """(two-peak error, multi-peak bound) for midpoint discrimination of x(pi/2)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    z = abs(alpha * math.sin(theta)) / math.sqrt(2)
    e = float(erfc(z))
    return 0.5 * e, e


def detector_peak_means(alpha: float, theta: float, levels: int, xi: float = math.pi / 2) -> np.ndarray:
    """Quadrature means 2 Re(alpha e^{i(xi + n theta)}) for n = 0..levels-1."""
    n = np.arange(levels)
    return 2 * alpha * np.cos(xi + n * theta)


def detector_error_exact(alpha: float, theta: float, true_n: int, levels: int, xi: float = math.pi / 2) -> float:
    """Probability that a unit-variance Gaussian at peak ``true_n`` lands outside its midpoint bin."""
    means = detector_peak_means(alpha, theta, levels, xi)
    order = np.argsort(means)
    sorted_means = means[order]
    pos = int(np.flatnonzero(order == true_n)[0])
    mu = sorted_means[pos]
    inside = 1.0
    if pos > 0:
        lo = 0.5 * (sorted_means[pos] + sorted_means[pos - 1])
        inside -= _normal.cdf(lo - mu)
    if pos < levels - 1:
        hi = 0.5 * (sorted_means[pos] + sorted_means[pos + 1])
        inside -= _normal.sf(hi - mu)
    return float(1.0 - inside)


def heralding_prob(alpha_a: float, n: int) -> float:
    """Poisson weight e^{-a^2} a^{2n} / n! of the n-photon herald."""
    if alpha_a == 0:
        return 1.0 if n == 0 else 0.0
    return float(math.exp(-alpha_a ** 2 + 2 * n * math.log(abs(alpha_a)) - gammaln(n + 1)))


class LossParams(NamedTuple):
    gamma: float
    lambda_plus: float
    lambda_minus: float
    mean_odd_photons: float


def loss_params(eta: float, alpha: float, theta: float) -> LossParams:
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    gamma = eta ** 2 * abs(alpha) ** 2 * (1 - math.cos(theta))
    lp = 0.5 * (1 + math.exp(-gamma))
    mean_odd = 2 * (1 - eta ** 2) * abs(alpha) ** 2 * (1 - math.cos(theta))
    return LossParams(gamma, lp, 1.0 - lp, mean_odd)


def parity_misclass(alpha: float, theta: float, eta: float = 0.0) -> float:
    """Chance that an odd-parity probe shows zero photons after displacement."""
    return math.exp(-2 * (1 - eta ** 2) * abs(alpha) ** 2 * (1 - math.cos(theta)))


class PhiCorrection(NamedTuple):
    published: float
    resolved: float


def phi_correction(n_p: int, theta: float) -> PhiCorrection:
    """Conditional odd-branch phase after counting ``n_p`` probe photons.

    ``published`` is n atan(cot(theta/2)). ``resolved`` is the phase the
    simulator actually removes: n arg(e^{i theta} - 1) = n (pi/2 + theta/2)
    on the HV amplitude (and its negative on VH). The two differ by a sign
    convention: published = n pi - resolved.
    """
    if n_p == 0:
        return PhiCorrection(0.0, 0.0)
    published = n_p * math.atan(1.0 / math.tan(theta / 2))
    resolved = n_p * float(np.angle(np.exp(1j * theta) - 1))
    return PhiCorrection(published, resolved)


def bell_like_states(c, d, parity: str):
    """The two unnormalised states mixed by probe loss, in basis HH, HV, VH, VV.

    c = (c_H, c_V) for qubit a, d = (d_H, d_V) for qubit b.
    """
    cp, cm = c
    dp, dm = d
    plus = np.zeros(4, dtype=complex)
    minus = np.zeros(4, dtype=complex)
    if parity == EVEN:
        plus[0], plus[3] = cp * dp, cm * dm
        minus[0], minus[3] = cp * dp, -cm * dm
    elif parity == ODD:
        plus[1], plus[2] = cp * dm, cm * dp
        minus[1], minus[2] = cp * dm, -cm * dp
    else:
        raise ValueError(f"parity must be {EVEN!r} or {ODD!r}")
    return plus, minus


def predicted_mixture(c, d, eta: float, alpha: float, theta: float, parity: str) -> np.ndarray:
    """Conditioned two-qubit state lambda_+ |psi+><psi+| + lambda_- |psi-><psi-|."""
    plus, minus = bell_like_states(c, d, parity)
    prob = float(np.vdot(plus, plus).real)
    if prob == 0:
        raise ValueError("outcome has zero probability for these inputs")
    lp = loss_params(eta, alpha, theta)
    rho = lp.lambda_plus * np.outer(plus, plus.conj()) + lp.lambda_minus * np.outer(minus, minus.conj())
    return rho / prob


def check_density_matrix(rho, atol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=1e-12, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > atol:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def fidelity(rho, psi) -> float:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return float(np.real(np.conj(psi) @ np.asarray(rho) @ psi))


_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho) -> float:
    """Wootters concurrence from the eigenvalues of rho (Y x Y) rho^* (Y x Y)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a two-qubit density matrix")
    tilde = _YY @ rho.conj() @ _YY
    ev = np.linalg.eigvals(rho @ tilde)
    lam = np.sort(np.sqrt(np.clip(ev.real, 0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


@dataclass(frozen=True)
class ErrorBudget:
    p_err_two_peak: float
    p_err_total_bound: float
    parity_misclass: float
    gamma: float
    lambda_plus: float
    lambda_minus: float
    mean_odd_photons: float


def error_budget(alpha: float, theta: float, eta: float = 0.0) -> ErrorBudget:
    two, bound = homodyne_error(alpha, theta)
    lp = loss_params(eta, alpha, theta)
    return ErrorBudget(
        p_err_two_peak=two,
        p_err_total_bound=bound,
        parity_misclass=parity_misclass(alpha, theta, eta),
        gamma=lp.gamma,
        lambda_plus=lp.lambda_plus,
        lambda_minus=lp.lambda_minus,
        mean_odd_photons=lp.mean_odd_photons,
    )
