"""Brute-force truncated-Fock twin of the branch primitives.

Only meant for validation at small amplitude (|alpha| <= 3). Tensors are
laid out as (discrete modes..., continuous modes...) in the same order as
the BranchState they were expanded from.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
from math import comb

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .branch import BranchState, DiscreteMode
from .measurements import number_amplitude

MAX_AMPLITUDE = 3.0
MAX_MODES = 2
MAX_REGISTER_DIM = 9
DEFAULT_CUTOFF = 80


class OracleRegimeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FockState:
    amplitudes: np.ndarray
    discrete: tuple[DiscreteMode, ...]
    modes: tuple[str, ...]

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return self.amplitudes.shape[len(self.discrete):]

    def axis(self, name: str) -> int:
        try:
            return len(self.discrete) + self.modes.index(name)
        except ValueError:
            raise OracleRegimeError(f"no continuous mode {name!r}") from None

    def register_axis(self, name: str) -> int:
        for i, m in enumerate(self.discrete):
            if m.name == name:
                return i
        raise OracleRegimeError(f"no discrete mode {name!r}")

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _check_regime(discrete, n_modes):
    if n_modes > MAX_MODES:
        raise OracleRegimeError(f"oracle handles at most {MAX_MODES} continuous modes")
    if int(np.prod([m.dim for m in discrete] or [1])) > MAX_REGISTER_DIM:
        raise OracleRegimeError(f"register dimension above {MAX_REGISTER_DIM}")


def expand(state: BranchState, cutoffs=None) -> FockState:
    """Write a branch state out in the truncated Fock basis."""
    if state.bus.size and np.abs(state.bus).max() > MAX_AMPLITUDE + 1e-12:
        raise OracleRegimeError(f"amplitude {np.abs(state.bus).max():.3g} above oracle limit {MAX_AMPLITUDE}")
    names = tuple(m.name for m in state.active_modes)
    _check_regime(state.discrete, len(names))
    if cutoffs is None:
        cutoffs = (DEFAULT_CUTOFF,) * len(names)
    dims = [m.dim for m in state.discrete]
    out = np.zeros(tuple(dims) + tuple(cutoffs), dtype=complex)
    for k in range(len(state.amps)):
        term = np.array(state.amps[k], dtype=complex)
        for m, cut in enumerate(cutoffs):
            term = np.multiply.outer(term, number_amplitude(np.arange(cut), state.bus[k, m]))
        out[tuple(state.registers[k])] += term
    return FockState(out, tuple(state.discrete), names)


def inner(a: FockState, b: FockState) -> complex:
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: FockState, b: FockState) -> float:
    return abs(inner(a, b)) ** 2 / (a.norm() * b.norm())


def _along(fs: FockState, axis: int, factors) -> np.ndarray:
    shape = [1] * fs.amplitudes.ndim
    shape[axis] = len(factors)
    return fs.amplitudes * np.reshape(factors, shape)


def oracle_register_unitary(fs: FockState, mode: str, U) -> FockState:
    ax = fs.register_axis(mode)
    amps = np.moveaxis(np.tensordot(np.asarray(U), fs.amplitudes, axes=([1], [ax])), 0, ax)
    return replace(fs, amplitudes=amps)


def oracle_cross_kerr(fs: FockState, mode: str, bus: str, theta: float, photons=None) -> FockState:
    rax, bax = fs.register_axis(mode), fs.axis(bus)
    d = fs.discrete[rax].dim
    n_reg = np.arange(d) if photons is None else np.asarray(photons)
    n_bus = np.arange(fs.amplitudes.shape[bax])
    phase = np.exp(1j * theta * np.outer(n_reg, n_bus))
    shape = [1] * fs.amplitudes.ndim
    shape[rax], shape[bax] = d, len(n_bus)
    return replace(fs, amplitudes=fs.amplitudes * phase.reshape(shape))


def oracle_bus_phase(fs: FockState, bus: str, phi: float) -> FockState:
    ax = fs.axis(bus)
    n = np.arange(fs.amplitudes.shape[ax])
    return replace(fs, amplitudes=_along(fs, ax, np.exp(1j * phi * n)))


def displacement_matrix(beta: complex, cutoff: int) -> np.ndarray:
    """<m|D(beta)|n> from the associated-Laguerre closed form, D = exp(beta a^dag - beta^* a)."""
    beta = complex(beta)
    x = abs(beta) ** 2
    m = np.arange(cutoff)[:, None]
    n = np.arange(cutoff)[None, :]
    lo, hi = np.minimum(m, n), np.maximum(m, n)
    k = hi - lo
    # m >= n: sqrt(n!/m!) beta^(m-n) L_n^(m-n)(x); m < n: sqrt(m!/n!) (-beta^*)^(n-m) L_m^(n-m)(x)
    base = np.where(m >= n, beta, -np.conj(beta))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - 0.5 * x + k * np.log(abs(beta))
        pref = np.exp(log_mag + 1j * k * np.angle(base))
    if beta == 0:
        return np.eye(cutoff, dtype=complex)
    return pref * eval_genlaguerre(lo, k, x)


def oracle_displace(fs: FockState, bus: str, beta: complex) -> FockState:
    ax = fs.axis(bus)
    D = displacement_matrix(beta, fs.amplitudes.shape[ax])
    amps = np.moveaxis(np.tensordot(D, fs.amplitudes, axes=([1], [ax])), 0, ax)
    return replace(fs, amplitudes=amps)


def oracle_beam_splitter(fs: FockState, bus: str, eta: float, env_name: str, env_cutoff: int | None = None) -> FockState:
    """Mix ``bus`` with a fresh vacuum mode: a^dag -> sqrt(1-eta^2) a^dag + eta b^dag."""
    ax = fs.axis(bus)
    cut = fs.amplitudes.shape[ax]
    env_cutoff = env_cutoff or cut
    _check_regime(fs.discrete, len(fs.modes) + 1)
    t = np.sqrt(1 - eta ** 2)
    # |n>|0> -> sum_k sqrt(C(n,k)) t^(n-k) eta^k |n-k>|k>
    B = np.zeros((cut, env_cutoff, cut))
    for n in range(cut):
        for k in range(min(n, env_cutoff - 1) + 1):
            B[n - k, k, n] = math.sqrt(comb(n, k)) * t ** (n - k) * eta ** k
    amps = np.tensordot(B, fs.amplitudes, axes=([2], [ax]))  # (out, env, ...rest)
    amps = np.moveaxis(amps, 1, -1)  # env to the end
    amps = np.moveaxis(amps, 0, ax)
    return FockState(amps, fs.discrete, fs.modes + (env_name,))


def hermite_functions(x, n_max: int, xi: float = 0.0) -> np.ndarray:
    """<x|n> in the x = a + a^dag normalisation, rows n = 0..n_max-1."""
    q = np.asarray(x, dtype=float) / np.sqrt(2)
    out = np.zeros((n_max,) + q.shape)
    out[0] = np.pi ** -0.25 * np.exp(-q ** 2 / 2)
    if n_max > 1:
        out[1] = np.sqrt(2) * q * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2 / (n + 1)) * q * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out * 2 ** -0.25


def oracle_homodyne_pdf(fs: FockState, bus: str, xi: float, x) -> np.ndarray:
    ax = fs.axis(bus)
    cut = fs.amplitudes.shape[ax]
    # <x|_xi = <x|_0 e^{i xi n}
    h = hermite_functions(x, cut) * np.exp(1j * xi * np.arange(cut)).reshape((cut,) + (1,) * np.ndim(x))
    proj = np.tensordot(fs.amplitudes, h, axes=([ax], [0]))
    lead = tuple(range(proj.ndim - np.ndim(x)))
    return np.sum(np.abs(proj) ** 2, axis=lead) / fs.norm()


def oracle_photon_pmf(fs: FockState, bus: str, n=None) -> np.ndarray:
    ax = fs.axis(bus)
    p = np.sum(np.abs(np.moveaxis(fs.amplitudes, ax, 0)) ** 2, axis=tuple(range(1, fs.amplitudes.ndim)))
    p = p / fs.norm()
    return p if n is None else p[n]


def oracle_condition_photon(fs: FockState, bus: str, n: int) -> FockState:
    ax = fs.axis(bus)
    amps = np.take(fs.amplitudes, n, axis=ax)
    amps = amps / np.linalg.norm(amps)
    return FockState(amps, fs.discrete, tuple(m for m in fs.modes if m != bus))


def oracle_condition_homodyne(fs: FockState, bus: str, xi: float, x: float) -> FockState:
    ax = fs.axis(bus)
    cut = fs.amplitudes.shape[ax]
    h = hermite_functions(np.array([x]), cut)[:, 0] * np.exp(1j * xi * np.arange(cut))
    amps = np.tensordot(fs.amplitudes, h, axes=([ax], [0]))
    amps = amps / np.linalg.norm(amps)
    return FockState(amps, fs.discrete, tuple(m for m in fs.modes if m != bus))


def leaked_probability(fs: FockState, tail: int = 1) -> float:
    """Probability in the top ``tail`` Fock levels of any continuous mode."""
    total = 0.0
    for m in fs.modes:
        total += float(oracle_photon_pmf(fs, m)[-tail:].sum())
    return total
