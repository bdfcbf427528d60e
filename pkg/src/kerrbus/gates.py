"""QND detector, heralded source, parity gate and the circuits built on it.

Every protocol works on a shared :class:`BranchState`; probe modes are
created fresh for each gate and consumed by its measurement. Measurement
values can be forced (``outcome=...``) to postselect a branch instead of
sampling, which is how the correction tables are checked exhaustively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .analytics import EVEN, ODD
from .branch import (
    HADAMARD,
    X,
    Z,
    BranchState,
    ConditioningError,
    apply_register_unitary,
    bus_phase,
    coherent_overlap,
    cross_kerr,
    displace,
    loss_channel,
    measure_register,
    phase_diag,
    reduced_density_matrix,
)
from .measurements import (
    HomodyneSetting,
    MeasurementOutcome,
    PhotonCountSetting,
    classify_peaks,
    homodyne_condition,
    homodyne_distribution,
    inverse_cdf,
    number_amplitude,
    photon_condition,
    photon_number_distribution,
    quadrature_amplitude,
    sample_index,
)

INDETERMINATE = "indeterminate"
PHOTON = "photon"
HOMODYNE = "homodyne"
COMPUTATIONAL = "computational"
DIAGONAL = "diagonal"

PHI_CORRECTION = "phiCorrection"
STATIC_PHASE = "staticDisplacementPhase"
LOSSY_PHASE = "lossyPhaseCorrection"
BIT_FLIP = "bitFlip"
SIGN_FLIP = "signFlip"


# ---- feed-forward bookkeeping --------------------------------------------


@dataclass(frozen=True)
class Correction:
    mode: str
    unitary: np.ndarray
    reason: str


@dataclass
class FeedForwardRecord:
    entries: list[Correction] = field(default_factory=list)

    def apply(self, state: BranchState, mode: str, U, reason: str) -> BranchState:
        U = np.asarray(U, dtype=complex)
        self.entries.append(Correction(mode, U, reason))
        return apply_register_unitary(state, mode, U)

    def extend(self, other: "FeedForwardRecord") -> None:
        self.entries.extend(other.entries)

    def undo(self, state: BranchState) -> BranchState:
        """Apply the inverses in reverse order."""
        for c in reversed(self.entries):
            state = apply_register_unitary(state, c.mode, c.unitary.conj().T)
        return state

    def reasons(self) -> list[str]:
        return [c.reason for c in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


# ---- QND detector and heralded source ------------------------------------


@dataclass
class DetectionResult:
    estimate: int
    state: BranchState
    outcome: MeasurementOutcome


class QNDDetector:
    """Signal register |n> dispersively coupled to a probe |alpha>, read out by homodyne."""

    def __init__(self, amplitudes, alpha: float, theta: float, xi: float = math.pi / 2,
                 setting: HomodyneSetting | None = None):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1) > 1e-9:
            raise ValueError(f"signal amplitudes must be normalised (norm {norm:.12g})")
        self.prior = np.abs(amplitudes) ** 2
        self.levels = len(amplitudes)
        self.alpha, self.theta = alpha, theta
        self.setting = setting or HomodyneSetting(xi=xi)
        state = BranchState.empty().with_fock("signal", amplitudes).with_bus("probe", alpha)
        self.state = cross_kerr(state, "signal", "probe", theta)
        self.grid, self.pdf, self.cdf = homodyne_distribution(self.state, "probe", self.setting)
        means = 2 * np.real(alpha * np.exp(1j * (self.setting.xi + theta * np.arange(self.levels))))
        self.order = np.argsort(means, kind="stable")
        self.means = means[self.order]
        self.blind = bool(np.any(np.diff(self.means) <= 1e-12))

    def sample_x(self, u):
        return inverse_cdf(self.grid, self.cdf, u)

    def classify(self, x, u_guess=None):
        """Photon-number estimate for quadrature value(s) x.

        With coincident peaks (theta = 0) the reading carries no information
        and the estimate is a guess drawn from the prior with ``u_guess``.
        """
        if self.blind:
            if u_guess is None:
                raise ValueError("blind detector needs a guess uniform")
            return sample_index(self.prior, u_guess)
        return self.order[classify_peaks(x, self.means)]

    def condition(self, x: float) -> MeasurementOutcome:
        return homodyne_condition(self.state, "probe", self.setting, x)


def qnd_photon_detect(amplitudes, alpha: float, theta: float, rng, xi: float = math.pi / 2) -> DetectionResult:
    det = QNDDetector(amplitudes, alpha, theta, xi)
    x = float(det.sample_x(rng.random()))
    est = int(det.classify(x, rng.random() if det.blind else None))
    outcome = det.condition(x)
    return DetectionResult(est, outcome.state, outcome)


def coherent_signal(alpha_a: float, leak: float = 1e-6, min_levels: int = 3) -> np.ndarray:
    """Truncated, renormalised |alpha_a> with tail mass below ``leak``."""
    n = np.arange(200)
    amps = np.real(number_amplitude(n, alpha_a))
    tail = 1 - np.cumsum(amps ** 2)
    levels = max(min_levels, int(np.argmax(tail < leak)) + 1)
    amps = amps[:levels]
    return amps / np.linalg.norm(amps)


@dataclass
class HeraldResult:
    n: int
    heralded: bool
    state: BranchState


def prepare_heralded_photon(alpha_a: float, alpha: float, theta: float, rng,
                            signal_levels: int | None = None) -> HeraldResult:
    if not 0 <= alpha_a <= 2:
        raise ValueError("alpha_a must lie in [0, 2]")
    amps = coherent_signal(alpha_a)
    if signal_levels is not None:
        amps = np.real(number_amplitude(np.arange(signal_levels), alpha_a))
        amps = amps / np.linalg.norm(amps)
    res = qnd_photon_detect(amps, alpha, theta, rng)
    return HeraldResult(res.estimate, res.estimate == 1, res.state)


# ---- parity gate ---------------------------------------------------------


@dataclass(frozen=True)
class ParityGateConfig:
    alpha: float
    theta: float
    eta: float = 0.0
    measurement: str = PHOTON
    basis: str = COMPUTATIONAL
    static_phase_correction: bool = True
    feed_forward: bool = True
    # photon counts 1 <= n < odd_threshold are declared indeterminate
    odd_threshold: int = 1
    loss_placement: str = "between"
    min_separation: float = 5.0
    xi: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.measurement not in (PHOTON, HOMODYNE):
            raise ValueError(f"unknown measurement {self.measurement!r}")
        if self.basis not in (COMPUTATIONAL, DIAGONAL):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.loss_placement not in ("between", "after"):
            raise ValueError(f"unknown loss placement {self.loss_placement!r}")
        if self.odd_threshold < 1:
            raise ValueError("odd_threshold must be at least 1")

    @property
    def transmission(self) -> float:
        return math.sqrt(1 - self.eta ** 2)

    @property
    def separation(self) -> float:
        """Odd-branch mean photon number (photon) or peak separation in sigma (homodyne)."""
        t, a = self.transmission, self.alpha
        if self.measurement == PHOTON:
            return 2 * t ** 2 * a ** 2 * (1 - math.cos(self.theta))
        return 2 * t * a * (1 - math.cos(self.theta))

    @property
    def degraded(self) -> bool:
        return self.separation < self.min_separation


@dataclass
class ParityOutcome:
    parity: str
    record: MeasurementOutcome
    corrections: FeedForwardRecord
    leakage: float
    degraded: bool


def _probe_sequence(state: BranchState, a: str, b: str, cfg: ParityGateConfig, bus: str) -> BranchState:
    state = state.with_bus(bus, cfg.alpha)
    state = cross_kerr(state, a, bus, cfg.theta, photons=(1, 0))  # H path of a
    if cfg.eta > 0 and cfg.loss_placement == "between":
        state = loss_channel(state, bus, cfg.eta)
    state = cross_kerr(state, b, bus, cfg.theta, photons=(0, 1))  # V path of b
    if cfg.eta > 0 and cfg.loss_placement == "after":
        state = loss_channel(state, bus, cfg.eta)
    state = bus_phase(state, bus, -cfg.theta)
    return displace(state, bus, -cfg.transmission * cfg.alpha)


@dataclass(frozen=True)
class _Pattern:
    phase: dict
    probe: dict
    env: dict


@lru_cache(maxsize=256)
def _reference(alpha: float, theta: float, eta: float, placement: str) -> _Pattern:
    """Branch data for each of HH, HV, VH, VV after the probe sequence."""
    cfg = ParityGateConfig(alpha, theta, eta, loss_placement=placement)
    plus = np.array([1, 1]) / np.sqrt(2)
    ref = BranchState.empty().with_qubit("a", plus).with_qubit("b", plus)
    ref = _probe_sequence(ref, "a", "b", cfg, "p")
    phase, probe, env = {}, {}, {}
    for k in range(len(ref)):
        key = tuple(int(v) for v in ref.registers[k])
        phase[key] = float(np.angle(ref.amps[k]))
        probe[key] = complex(ref.bus[k, 0])
        env[key] = tuple(complex(e) for e in ref.bus[k, 1:])
    return _Pattern(phase, probe, env)


def _env_phase(pat: _Pattern, keep: tuple, other: tuple) -> float:
    ov = np.prod([coherent_overlap(e_o, e_k) for e_k, e_o in zip(pat.env[keep], pat.env[other])])
    return float(np.angle(ov))


@dataclass
class PreparedParity:
    """Pre-measurement state of a parity gate plus its outcome distribution."""

    state: BranchState
    a: str
    b: str
    bus: str
    config: ParityGateConfig
    pattern: _Pattern
    pmf: np.ndarray | None = None
    grid: np.ndarray | None = None
    cdf: np.ndarray | None = None

    def sample(self, u):
        """Measurement value(s) from uniform(s) by inverse CDF."""
        if self.config.measurement == PHOTON:
            return sample_index(self.pmf, u)
        return inverse_cdf(self.grid, self.cdf, u)


def prepare_parity(state: BranchState, a: str, b: str, config: ParityGateConfig) -> PreparedParity:
    if a == b:
        raise ValueError("parity gate needs two distinct qubits")
    for q in (a, b):
        if state.discrete[state.discrete_index(q)].dim != 2:
            raise ValueError(f"{q!r} is not a qubit")
    if config.basis == DIAGONAL:
        state = apply_register_unitary(apply_register_unitary(state, a, HADAMARD), b, HADAMARD)
    bus = state.fresh_name("probe")
    pre = _probe_sequence(state, a, b, config, bus)
    pat = _reference(config.alpha, config.theta, config.eta, config.loss_placement)
    prep = PreparedParity(pre, a, b, bus, config, pat)
    if config.measurement == PHOTON:
        prep.pmf = photon_number_distribution(pre, bus, PhotonCountSetting())
    else:
        prep.grid, _, prep.cdf = homodyne_distribution(pre, bus, HomodyneSetting(xi=config.xi))
    return prep


def _classify(prep: PreparedParity, value) -> str:
    cfg = prep.config
    if cfg.measurement == PHOTON:
        if value == 0:
            return EVEN
        return ODD if value >= cfg.odd_threshold else INDETERMINATE
    odd_mean = 2 * np.real(prep.pattern.probe[(0, 1)] * np.exp(1j * cfg.xi))
    even_mean = 2 * np.real(prep.pattern.probe[(0, 0)] * np.exp(1j * cfg.xi))
    if abs(odd_mean - even_mean) < 1e-15:
        return INDETERMINATE
    peaks = sorted([(even_mean, EVEN), (odd_mean, ODD)])
    return peaks[classify_peaks(value, [p[0] for p in peaks])][1]


def _leakage(state: BranchState, a: str, b: str, parity: str) -> float:
    rho = reduced_density_matrix(state, [a, b])
    pop = np.real(np.diag(rho))
    wrong = pop[1] + pop[2] if parity == EVEN else pop[0] + pop[3]
    return float(wrong)


def _corrections(prep: PreparedParity, parity: str, value) -> list[tuple[str, np.ndarray, str]]:
    """Single-qubit corrections in the gate's computational frame."""
    cfg, pat, a, b = prep.config, prep.pattern, prep.a, prep.b
    out = []
    if cfg.static_phase_correction:
        p = pat.phase
        # split p_vw = a_v + b_w into local phases
        pa = (0.0, p[(1, 0)] - p[(0, 0)])
        pb = (p[(0, 0)], p[(0, 1)])
        if max(map(abs, pa + pb)) > 0:
            out.append((a, phase_diag(-pa[0], -pa[1]), STATIC_PHASE))
            out.append((b, phase_diag(-pb[0], -pb[1]), STATIC_PHASE))
        if cfg.eta > 0:
            pair = ((0, 0), (1, 1)) if parity == EVEN else ((0, 1), (1, 0))
            eps = _env_phase(pat, *pair)
            out.append((a, phase_diag(0.0, eps), LOSSY_PHASE))
    if cfg.feed_forward and parity == ODD:
        if cfg.measurement == PHOTON:
            w01 = number_amplitude(value, pat.probe[(0, 1)])
            w10 = number_amplitude(value, pat.probe[(1, 0)])
        else:
            w01 = quadrature_amplitude(value, pat.probe[(0, 1)], cfg.xi)
            w10 = quadrature_amplitude(value, pat.probe[(1, 0)], cfg.xi)
        phi = 0.5 * float(np.angle(w01 / w10))
        if phi != 0:
            out.append((a, phase_diag(-phi, phi), PHI_CORRECTION))
    return out


def complete_parity(prep: PreparedParity, value) -> tuple[ParityOutcome, BranchState]:
    """Condition on a measurement value, classify, and apply corrections."""
    cfg = prep.config
    if cfg.measurement == PHOTON:
        value = int(value)
        prob = float(prep.pmf[value]) if value < len(prep.pmf) else None
        if prob == 0:
            raise ConditioningError(f"photon count {value} has zero probability")
        record = photon_condition(prep.state, prep.bus, value, prob)
    else:
        record = homodyne_condition(prep.state, prep.bus, HomodyneSetting(xi=cfg.xi), float(value))
    parity = _classify(prep, value)
    raw = record.state
    leakage = _leakage(raw, prep.a, prep.b, parity) if parity != INDETERMINATE else float("nan")
    fixes = _corrections(prep, parity, value) if parity != INDETERMINATE else []
    if cfg.basis == DIAGONAL:
        raw = apply_register_unitary(apply_register_unitary(raw, prep.a, HADAMARD), prep.b, HADAMARD)
        fixes = [(m, HADAMARD @ U @ HADAMARD, r) for m, U, r in fixes]
    record.state = raw
    ff = FeedForwardRecord()
    state = raw
    for mode, U, reason in fixes:
        state = ff.apply(state, mode, U, reason)
    return ParityOutcome(parity, record, ff, leakage, cfg.degraded), state


def parity_gate(state: BranchState, a: str, b: str, config: ParityGateConfig, rng=None,
                outcome=None) -> tuple[ParityOutcome, BranchState]:
    """Project qubits ``a``, ``b`` onto even or odd parity via a shared probe.

    ``outcome`` forces the measurement value (photon count or quadrature)
    instead of drawing it from ``rng``.
    """
    prep = prepare_parity(state, a, b, config)
    if outcome is None:
        if rng is None:
            raise ValueError("need an rng or a forced outcome")
        outcome = prep.sample(rng.random())
    return complete_parity(prep, outcome)


# ---- circuits --------------------------------------------------------------

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def make_bell_pair(config: ParityGateConfig, rng=None, names=("a", "b"), outcome=None):
    """(|HH> + |VV>)/sqrt2 from two |D> photons; odd results are fixed by a bit flip."""
    a, b = names
    state = BranchState.empty().with_qubit(a, PLUS).with_qubit(b, PLUS)
    res, state = parity_gate(state, a, b, config, rng, outcome)
    if res.parity == ODD:
        state = res.corrections.apply(state, b, X, BIT_FLIP)
    return res, state


# (control parity, ancilla-a diagonal result, target parity, ancilla-b result)
# -> (control correction, target correction); 0 = H/D/even, 1 = V/Dbar/odd.
# Derived by enumeration, checked in tests against the ideal CNOT.
CNOT_CORRECTIONS = {
    (0, 0, 0, 0): (None, None),
    (0, 0, 0, 1): (None, "X"),
    (0, 0, 1, 0): ("Z", None),
    (0, 0, 1, 1): ("Z", "X"),
    (0, 1, 0, 0): ("Z", None),
    (0, 1, 0, 1): ("Z", "X"),
    (0, 1, 1, 0): (None, None),
    (0, 1, 1, 1): (None, "X"),
    (1, 0, 0, 0): (None, "X"),
    (1, 0, 0, 1): (None, None),
    (1, 0, 1, 0): ("Z", "X"),
    (1, 0, 1, 1): ("Z", None),
    (1, 1, 0, 0): ("Z", "X"),
    (1, 1, 0, 1): ("Z", None),
    (1, 1, 1, 0): (None, "X"),
    (1, 1, 1, 1): (None, None),
}
_PAULI = {"X": X, "Z": Z}


@dataclass
class CircuitResult:
    state: BranchState
    corrections: FeedForwardRecord
    outcomes: dict
    success: bool


def _bit(parity: str) -> int:
    return 0 if parity == EVEN else 1


def cnot(state: BranchState, control: str, target: str, config: ParityGateConfig, rng=None,
         forced: dict | None = None, correct: bool = True) -> CircuitResult:
    """CNOT from a shared Bell pair, two parity gates and ancilla measurements.

    ``forced`` may fix any of ``bell``, ``control_parity``, ``target_parity``
    (probe readings) and ``ancilla_a``, ``ancilla_b`` (0/1 results).
    """
    if control == target:
        raise ValueError("control and target must differ")
    forced = forced or {}
    comp = _with_basis(config, COMPUTATIONAL)
    diag = _with_basis(config, DIAGONAL)
    a, b = state.fresh_name("anc_a"), state.fresh_name("anc_b")
    ff = FeedForwardRecord()
    outcomes = {}

    bell, pair = make_bell_pair(comp, rng, (a, b), forced.get("bell"))
    ff.extend(bell.corrections)
    outcomes["bell"] = bell
    if bell.parity == INDETERMINATE:
        return CircuitResult(state, ff, outcomes, False)
    state = state.tensor(pair)

    r1, state = parity_gate(state, control, a, comp, rng, forced.get("control_parity"))
    ff.extend(r1.corrections)
    outcomes["control_parity"] = r1
    if r1.parity == INDETERMINATE:
        return CircuitResult(state, ff, outcomes, False)

    state = apply_register_unitary(state, a, HADAMARD)
    s, _, state = measure_register(state, a, rng, forced.get("ancilla_a"))
    outcomes["ancilla_a"] = s

    r2, state = parity_gate(state, target, b, diag, rng, forced.get("target_parity"))
    ff.extend(r2.corrections)
    outcomes["target_parity"] = r2
    if r2.parity == INDETERMINATE:
        return CircuitResult(state, ff, outcomes, False)

    m, _, state = measure_register(state, b, rng, forced.get("ancilla_b"))
    outcomes["ancilla_b"] = m

    if correct:
        fix_c, fix_t = CNOT_CORRECTIONS[(_bit(r1.parity), s, _bit(r2.parity), m)]
        if fix_t:
            state = ff.apply(state, target, _PAULI[fix_t], BIT_FLIP)
        if fix_c:
            state = ff.apply(state, control, _PAULI[fix_c], SIGN_FLIP)
    return CircuitResult(state, ff, outcomes, True)


def _with_basis(config: ParityGateConfig, basis: str) -> ParityGateConfig:
    return replace(config, basis=basis)


BELL_LABELS = {
    (EVEN, EVEN): "Phi+",
    (EVEN, ODD): "Phi-",
    (ODD, EVEN): "Psi+",
    (ODD, ODD): "Psi-",
}

BELL_STATES = {
    "Phi+": np.array([1, 0, 0, 1]) / np.sqrt(2),
    "Phi-": np.array([1, 0, 0, -1]) / np.sqrt(2),
    "Psi+": np.array([0, 1, 1, 0]) / np.sqrt(2),
    "Psi-": np.array([0, 1, -1, 0]) / np.sqrt(2),
}


@dataclass
class BellMeasurement:
    label: str | None
    parities: tuple
    outcomes: tuple
    state: BranchState
    success: bool


def bell_measurement(state: BranchState, a: str, b: str, config: ParityGateConfig, rng=None,
                     forced=(None, None)) -> BellMeasurement:
    """Non-destructive Bell analysis: Z-parity then X-parity."""
    r1, state = parity_gate(state, a, b, _with_basis(config, COMPUTATIONAL), rng, forced[0])
    if r1.parity == INDETERMINATE:
        return BellMeasurement(None, (r1.parity,), (r1,), state, False)
    r2, state = parity_gate(state, a, b, _with_basis(config, DIAGONAL), rng, forced[1])
    if r2.parity == INDETERMINATE:
        return BellMeasurement(None, (r1.parity, r2.parity), (r1, r2), state, False)
    return BellMeasurement(BELL_LABELS[(r1.parity, r2.parity)], (r1.parity, r2.parity), (r1, r2), state, True)


def fuse_clusters(state: BranchState, a: str, b: str, config: ParityGateConfig, rng=None,
                  outcome=None, neighbours=()) -> tuple[ParityOutcome, BranchState]:
    """Join two cluster fragments with a parity projection on ``a`` and ``b``.

    Odd results are mapped onto the even fused state by a bit flip on ``b``.
    The flip also negates the stabilizers of b's graph neighbours inside its
    own fragment; passing them as ``neighbours`` adds the compensating Z
    (so the total correction is b's own fragment stabilizer X_b Z_N(b)).
    """
    res, state = parity_gate(state, a, b, _with_basis(config, COMPUTATIONAL), rng, outcome)
    if res.parity == ODD:
        state = res.corrections.apply(state, b, X, BIT_FLIP)
        for q in neighbours:
            state = res.corrections.apply(state, q, Z, SIGN_FLIP)
    return res, state


def linear_cluster(names) -> BranchState:
    """Linear cluster state on ``names``: |+>^n followed by CZ on neighbours."""
    n = len(names)
    dim = 2 ** n
    bits = (np.arange(dim)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    signs = (-1.0) ** np.sum(bits[:, :-1] * bits[:, 1:], axis=1)
    return BranchState.from_qubit_vector(names, signs / np.sqrt(dim))
