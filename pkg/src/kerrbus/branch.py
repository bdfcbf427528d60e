"""Exact branch representation of qubit/coherent-bus states.

A state is stored as a finite superposition

    sum_k c_k |register_k> (x) prod_m |alpha_{k,m}>

where the register is a tuple of small integers (one per discrete mode) and
every bus or environment mode carries one coherent amplitude per branch.
Coherent states are not orthogonal, so norms, probabilities and reduced
density matrices are all computed through the branch Gram matrix.

Qubits use 0 for H and 1 for V.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

QUBIT = "qubit"
FOCK = "fock"
BUS = "bus"
ENVIRONMENT = "environment"
ACTIVE = "active"
CONSUMED = "consumed"

MERGE_TOL = 1e-12


class ModeError(ValueError):
    """Raised for operations on unknown, consumed or read-only modes."""


class ConditioningError(RuntimeError):
    """Raised when a projection leaves (numerically) nothing behind."""


@dataclass(frozen=True)
class DiscreteMode:
    name: str
    dim: int
    kind: str = QUBIT


@dataclass(frozen=True)
class ModeInfo:
    name: str
    kind: str = BUS
    status: str = ACTIVE


def coherent_overlap(alpha, beta):
    """<alpha|beta> for coherent states; broadcasts over arrays."""
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    # -|a|^2/2 - |b|^2/2 + a* b written without the large cancelling terms
    out = np.exp(-0.5 * np.abs(alpha - beta) ** 2 + 1j * np.imag(np.conj(alpha) * beta))
    return out if out.ndim else complex(out)


def _log_overlap(alpha, beta):
    return -0.5 * np.abs(alpha - beta) ** 2 + 1j * np.imag(np.conj(alpha) * beta)


@dataclass(frozen=True, eq=False)
class BranchState:
    """Immutable branch-sum state. Operations return new instances."""

    amps: np.ndarray
    registers: np.ndarray
    bus: np.ndarray
    discrete: tuple[DiscreteMode, ...] = ()
    modes: tuple[ModeInfo, ...] = ()
    norm_tol: float = 1e-10

    # ---- construction -------------------------------------------------

    @classmethod
    def empty(cls) -> "BranchState":
        """The trivial state: one branch of amplitude 1 and no modes."""
        return cls(
            amps=np.ones(1, dtype=complex),
            registers=np.zeros((1, 0), dtype=np.int64),
            bus=np.zeros((1, 0), dtype=complex),
        )

    @classmethod
    def from_qubit_vector(cls, names: Sequence[str], vector) -> "BranchState":
        """Register-only state from a dense vector; first name is most significant."""
        names = list(names)
        vector = np.asarray(vector, dtype=complex).ravel()
        if vector.size != 2 ** len(names):
            raise ValueError(f"vector of size {vector.size} does not match {len(names)} qubits")
        return cls.from_register_vector([DiscreteMode(n, 2) for n in names], vector)

    @classmethod
    def from_register_vector(cls, discrete: Sequence[DiscreteMode], vector) -> "BranchState":
        dims = [m.dim for m in discrete]
        vector = np.asarray(vector, dtype=complex).reshape(dims)
        idx = np.argwhere(vector != 0)
        if len(idx) == 0:
            raise ValueError("zero vector")
        amps = vector[tuple(idx.T)]
        return cls(
            amps=amps.astype(complex),
            registers=idx.astype(np.int64),
            bus=np.zeros((len(amps), 0), dtype=complex),
            discrete=tuple(discrete),
        )

    def with_register(self, name: str, amplitudes, kind: str = QUBIT) -> "BranchState":
        """Tensor on a new discrete mode prepared in ``sum_n amplitudes[n] |n>``."""
        if name in self.discrete_names or name in self.mode_names:
            raise ModeError(f"mode {name!r} already exists")
        amplitudes = np.asarray(amplitudes, dtype=complex).ravel()
        if kind == QUBIT and amplitudes.size != 2:
            raise ValueError("a qubit needs exactly two amplitudes")
        values = np.flatnonzero(amplitudes)
        if values.size == 0:
            raise ValueError("zero amplitude vector")
        K = len(self.amps)
        amps = (self.amps[:, None] * amplitudes[values][None, :]).ravel()
        regs = np.repeat(self.registers, values.size, axis=0)
        regs = np.hstack([regs, np.tile(values, K)[:, None]])
        bus = np.repeat(self.bus, values.size, axis=0)
        mode = DiscreteMode(name, amplitudes.size, kind)
        return replace(self, amps=amps, registers=regs, bus=bus, discrete=self.discrete + (mode,))

    def with_qubit(self, name: str, amplitudes) -> "BranchState":
        return self.with_register(name, amplitudes, QUBIT)

    def with_fock(self, name: str, amplitudes) -> "BranchState":
        return self.with_register(name, amplitudes, FOCK)

    def with_bus(self, name: str, alpha: complex, kind: str = BUS) -> "BranchState":
        if name in self.mode_names or name in self.discrete_names:
            raise ModeError(f"mode {name!r} already exists")
        column = np.full((len(self.amps), 1), complex(alpha))
        return replace(
            self,
            bus=np.hstack([self.bus, column]),
            modes=self.modes + (ModeInfo(name, kind),),
        )

    def tensor(self, other: "BranchState") -> "BranchState":
        """Product state. Discrete and bus names must be disjoint; clashing
        environment modes of ``other`` are renamed since they are anonymous."""
        mine = set(self.discrete_names) | set(self.mode_names)
        clash = mine & (set(other.discrete_names) | {m.name for m in other.active_modes if m.kind != ENVIRONMENT})
        if clash:
            raise ModeError(f"modes {sorted(clash)} exist in both states")
        taken = mine | set(other.discrete_names) | set(other.mode_names)
        renamed = []
        for m in other.active_modes:
            if m.name in mine:
                i = 0
                while f"{m.name}~{i}" in taken:
                    i += 1
                m = replace(m, name=f"{m.name}~{i}")
                taken.add(m.name)
            renamed.append(m)
        consumed = self.consumed_modes + tuple(m for m in other.consumed_modes if m.name not in mine)
        K, L = len(self.amps), len(other.amps)
        amps = (self.amps[:, None] * other.amps[None, :]).ravel()
        regs = np.hstack([np.repeat(self.registers, L, axis=0), np.tile(other.registers, (K, 1))])
        bus = np.hstack([np.repeat(self.bus, L, axis=0), np.tile(other.bus, (K, 1))])
        return replace(
            self,
            amps=amps,
            registers=regs,
            bus=bus,
            discrete=self.discrete + other.discrete,
            modes=self.active_modes + tuple(renamed) + consumed,
        )

    # ---- mode bookkeeping ----------------------------------------------

    @property
    def discrete_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.discrete)

    @property
    def active_modes(self) -> tuple[ModeInfo, ...]:
        return tuple(m for m in self.modes if m.status == ACTIVE)

    @property
    def consumed_modes(self) -> tuple[ModeInfo, ...]:
        return tuple(m for m in self.modes if m.status == CONSUMED)

    @property
    def mode_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    def fresh_name(self, stem: str) -> str:
        taken = set(self.mode_names) | set(self.discrete_names)
        i = 0
        while f"{stem}{i}" in taken:
            i += 1
        return f"{stem}{i}"

    def discrete_index(self, name: str) -> int:
        try:
            return self.discrete_names.index(name)
        except ValueError:
            raise ModeError(f"no discrete mode named {name!r}") from None

    def bus_column(self, name: str, allow_environment: bool = False) -> int:
        active = self.active_modes
        for i, m in enumerate(active):
            if m.name == name:
                if m.kind == ENVIRONMENT and not allow_environment:
                    raise ModeError(f"environment mode {name!r} cannot be acted on")
                return i
        if any(m.name == name for m in self.consumed_modes):
            raise ModeError(f"mode {name!r} has been consumed")
        raise ModeError(f"no bus mode named {name!r}")

    def consume(self, name: str) -> "BranchState":
        """Drop the amplitude column of a measured mode and mark it consumed."""
        col = self.bus_column(name)
        modes = tuple(replace(m, status=CONSUMED) if m.name == name else m for m in self.modes)
        return replace(self, bus=np.delete(self.bus, col, axis=1), modes=modes)

    def drop_register(self, name: str) -> "BranchState":
        i = self.discrete_index(name)
        return replace(
            self,
            registers=np.delete(self.registers, i, axis=1),
            discrete=self.discrete[:i] + self.discrete[i + 1:],
        )

    # ---- linear algebra ------------------------------------------------

    def gram(self) -> np.ndarray:
        """G[j, k] = <branch_j|branch_k> (amplitudes excluded)."""
        same = (self.registers[:, None, :] == self.registers[None, :, :]).all(-1)
        if self.bus.shape[1] == 0:
            return same.astype(complex)
        expo = _log_overlap(self.bus[:, None, :], self.bus[None, :, :]).sum(-1)
        return np.where(same, np.exp(expo), 0.0)

    def norm(self) -> float:
        c = self.amps
        return float(np.real(np.conj(c) @ self.gram() @ c))

    def branch_count(self) -> int:
        return len(self.amps)

    def __len__(self) -> int:
        return len(self.amps)


# ---- housekeeping ------------------------------------------------------


def normalize(state: BranchState) -> BranchState:
    n = state.norm()
    if not n > 0:
        raise ConditioningError("state has zero norm")
    return replace(state, amps=state.amps / np.sqrt(n))


def prune(state: BranchState, tol: float = MERGE_TOL) -> BranchState:
    """Merge duplicate branches and drop those that carry (almost) no norm.

    Branches are duplicates when registers agree and every bus amplitude
    agrees to within ``tol`` (relative to the largest amplitude, floor 1).
    """
    amps, regs, bus = state.amps, state.registers, state.bus
    scale = tol * max(1.0, float(np.abs(bus).max())) if bus.size else tol
    keys = np.hstack([regs.astype(float), np.round(bus.real / scale), np.round(bus.imag / scale)])
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    # keep first-occurrence order so results do not depend on the sort
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    order = np.sort(first)
    merged = np.zeros(len(first), dtype=complex)
    np.add.at(merged, rank[inverse.ravel()], amps)
    amps = merged
    regs = regs[order]
    bus = bus[order]
    nonzero = amps != 0
    amps, regs, bus = amps[nonzero], regs[nonzero], bus[nonzero]
    if len(amps) == 0:
        raise ConditioningError("pruning removed every branch")
    trial = replace(state, amps=amps, registers=regs, bus=bus)
    # norm change from removing branch k alone: 2 Re(c_k^* (G c)_k) - |c_k|^2
    gc = trial.gram() @ amps
    delta = np.abs(2 * np.real(np.conj(amps) * gc) - np.abs(amps) ** 2)
    keep = delta >= tol ** 2
    if not keep.any():
        raise ConditioningError("pruning removed every branch")
    return replace(trial, amps=amps[keep], registers=regs[keep], bus=bus[keep])


# ---- unitary primitives --------------------------------------------------


def apply_register_unitary(state: BranchState, mode: str, U) -> BranchState:
    """Apply a unitary on one discrete mode (2x2 for qubits)."""
    U = np.asarray(U, dtype=complex)
    i = state.discrete_index(mode)
    d = state.discrete[i].dim
    if U.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix for mode {mode!r}")
    if np.abs(U.conj().T @ U - np.eye(d)).max() > 1e-12:
        raise ValueError("matrix is not unitary")
    old = state.registers[:, i]
    if not np.any(U - np.diag(np.diag(U))):
        # diagonal: phases only, no new branches
        return replace(state, amps=state.amps * np.diag(U)[old])
    K = len(state.amps)
    amps = (U[:, old].T).ravel() * np.repeat(state.amps, d)
    regs = np.repeat(state.registers, d, axis=0)
    regs[:, i] = np.tile(np.arange(d), K)
    bus = np.repeat(state.bus, d, axis=0)
    keep = amps != 0
    out = replace(state, amps=amps[keep], registers=regs[keep], bus=bus[keep])
    return prune(out)


def cross_kerr(state: BranchState, mode: str, bus: str, theta: float, photons=None) -> BranchState:
    """Cross-Kerr phase exp(i theta n_mode n_bus) on every branch.

    ``photons`` maps register value to the photon number that enters the
    medium (e.g. ``(1, 0)`` routes only the H path of a qubit through the
    nonlinearity). Defaults to the register value itself.
    """
    i = state.discrete_index(mode)
    col = state.bus_column(bus)
    values = state.registers[:, i]
    n = values if photons is None else np.asarray(photons)[values]
    new = state.bus.copy()
    new[:, col] = new[:, col] * np.exp(1j * theta * n)
    return replace(state, bus=new)


def bus_phase(state: BranchState, bus: str, phi: float) -> BranchState:
    col = state.bus_column(bus)
    new = state.bus.copy()
    new[:, col] *= np.exp(1j * phi)
    return replace(state, bus=new)


def displace(state: BranchState, bus: str, beta: complex) -> BranchState:
    """D(beta)|alpha> = exp(i Im(beta alpha*)) |alpha + beta>."""
    col = state.bus_column(bus)
    alpha = state.bus[:, col]
    phase = np.exp(1j * np.imag(beta * np.conj(alpha)))
    new = state.bus.copy()
    new[:, col] = alpha + beta
    return replace(state, amps=state.amps * phase, bus=new)


def loss_channel(state: BranchState, bus: str, eta: float, env_name: str | None = None) -> BranchState:
    """Beam splitter of reflectivity ``eta`` dumping light into a new environment mode.

    The environment mode is kept, so the global state stays pure; tracing it
    out happens implicitly in every probability and reduced density matrix.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"loss eta must lie in [0, 1], got {eta}")
    col = state.bus_column(bus)
    env_name = env_name or state.fresh_name(f"{bus}.env")
    alpha = state.bus[:, col]
    new = state.bus.copy()
    new[:, col] = np.sqrt(1.0 - eta ** 2) * alpha
    new = np.hstack([new, (eta * alpha)[:, None]])
    # environment column goes right after the last active mode
    modes = state.active_modes + (ModeInfo(env_name, ENVIRONMENT),) + state.consumed_modes
    return replace(state, bus=new, modes=modes)


# ---- readout -------------------------------------------------------------


def reduced_density_matrix(state: BranchState, modes: Sequence[str]) -> np.ndarray:
    """Density matrix of the listed discrete modes, everything else traced out."""
    modes = list(modes)
    if not modes:
        raise ValueError("need at least one mode")
    idx = [state.discrete_index(m) for m in modes]
    rest = [j for j in range(len(state.discrete)) if j not in idx]
    dims = [state.discrete[j].dim for j in idx]
    D = int(np.prod(dims))
    regs = state.registers
    same_rest = (regs[:, None, rest] == regs[None, :, rest]).all(-1)
    if state.bus.shape[1]:
        # <alpha_k|alpha_j> on every traced continuous mode
        expo = _log_overlap(state.bus[None, :, :], state.bus[:, None, :]).sum(-1)
        ov = np.exp(expo)
    else:
        ov = np.ones((len(regs), len(regs)), dtype=complex)
    W = np.where(same_rest, np.outer(state.amps, np.conj(state.amps)) * ov, 0.0)
    flat = np.ravel_multi_index(tuple(regs[:, idx].T), dims) if idx else np.zeros(len(regs), int)
    rho = np.zeros((D, D), dtype=complex)
    np.add.at(rho, (flat[:, None], flat[None, :]), W)
    tr = np.real(np.trace(rho))
    if not tr > 0:
        raise ConditioningError("state has zero norm")
    return rho / tr


def register_vector(state: BranchState, modes: Sequence[str] | None = None) -> np.ndarray:
    """Dense pure register vector for states without active continuous modes."""
    if state.bus.shape[1]:
        raise ModeError("state still has active continuous modes; use reduced_density_matrix")
    modes = list(modes) if modes is not None else list(state.discrete_names)
    if sorted(modes) != sorted(state.discrete_names):
        raise ValueError("modes must list every discrete mode")
    idx = [state.discrete_index(m) for m in modes]
    dims = [state.discrete[j].dim for j in idx]
    vec = np.zeros(int(np.prod(dims)), dtype=complex)
    flat = np.ravel_multi_index(tuple(state.registers[:, idx].T), dims)
    np.add.at(vec, flat, state.amps)
    return vec / np.linalg.norm(vec)


def measure_register(state: BranchState, mode: str, rng=None, value: int | None = None):
    """Projective measurement of a discrete mode in its number basis.

    Returns ``(value, probability, post_state)``; the mode is removed from
    the post-measurement state. Pass ``value`` to postselect instead of
    sampling.
    """
    i = state.discrete_index(mode)
    d = state.discrete[i].dim
    G = state.gram()
    vals = state.registers[:, i]
    probs = np.zeros(d)
    for v in range(d):
        sel = vals == v
        if sel.any():
            c = state.amps[sel]
            probs[v] = max(0.0, float(np.real(np.conj(c) @ G[np.ix_(sel, sel)] @ c)))
    probs /= probs.sum()
    if value is None:
        if rng is None:
            raise ValueError("need an rng or a forced value")
        value = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        value = min(value, d - 1)
    if probs[value] <= 0:
        raise ConditioningError(f"outcome {value} on {mode!r} has zero probability")
    sel = vals == value
    post = replace(state, amps=state.amps[sel], registers=state.registers[sel], bus=state.bus[sel])
    post = normalize(post.drop_register(mode))
    return value, float(probs[value]), post


def dump(state: BranchState) -> str:
    """One line per branch, 17 significant digits, sorted by register then bus."""

    def g(x):
        return format(float(x), ".17g")

    rows = []
    for k in range(len(state.amps)):
        reg = tuple(int(v) for v in state.registers[k])
        bus = tuple((float(b.real), float(b.imag)) for b in state.bus[k])
        rows.append((reg, bus, state.amps[k]))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = []
    for reg, bus, a in rows:
        bus_txt = " ".join(f"({g(re)},{g(im)})" for re, im in bus)
        lines.append(f"({g(a.real)},{g(a.imag)}) {reg} {bus_txt}".rstrip())
    return "\n".join(lines)


# ---- single-qubit matrices ----------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def phase_diag(phi_h: float, phi_v: float) -> np.ndarray:
    return np.diag([np.exp(1j * phi_h), np.exp(1j * phi_v)])
