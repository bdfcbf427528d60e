import itertools
import math

import numpy as np
import pytest

from kerrbus.analytics import concurrence, heralding_prob, loss_params, parity_misclass, predicted_mixture
from kerrbus.branch import BranchState, HADAMARD, X, Z, reduced_density_matrix, register_vector
from kerrbus.gates import (
    BELL_STATES,
    CNOT_CORRECTIONS,
    EVEN,
    INDETERMINATE,
    ODD,
    ParityGateConfig,
    QNDDetector,
    bell_measurement,
    cnot,
    coherent_signal,
    complete_parity,
    fuse_clusters,
    linear_cluster,
    make_bell_pair,
    parity_gate,
    prepare_heralded_photon,
    prepare_parity,
    qnd_photon_detect,
)

from conftest import IDEAL, random_state

CNOT = np.eye(4)[[0, 1, 3, 2]]
ODD_COUNT = 100  # typical odd-branch count at the ideal setting (mean 100)


def overlap(vec, target):
    target = np.asarray(target) / np.linalg.norm(target)
    return abs(np.vdot(target, vec)) ** 2


def _projected(psi, parity):
    out = psi.copy()
    out[[1, 2] if parity == EVEN else [0, 3]] = 0
    return out / np.linalg.norm(out)


# ---- parity gate ----------------------------------------------------------


@pytest.mark.parametrize("value", [0, 90, ODD_COUNT, 113])
def test_parity_projection_with_feed_forward(rng, value):
    psi = random_state(rng, 2)
    res, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], psi), "a", "b", IDEAL, outcome=value)
    parity = EVEN if value == 0 else ODD
    assert res.parity == parity
    assert res.leakage <= 1e-18
    rho = reduced_density_matrix(post, ["a", "b"])
    assert 1 - np.real(_projected(psi, parity).conj() @ rho @ _projected(psi, parity)) < 1e-12


def test_without_feed_forward_odd_branch_has_phase(rng):
    psi = random_state(rng, 2)
    cfg = ParityGateConfig(IDEAL.alpha, IDEAL.theta, feed_forward=False)
    _, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], psi), "a", "b", cfg, outcome=ODD_COUNT + 1)
    rho = reduced_density_matrix(post, ["a", "b"])
    assert np.real(_projected(psi, ODD).conj() @ rho @ _projected(psi, ODD)) < 0.99


def test_feed_forward_replay_restores_raw_state(rng):
    psi = random_state(rng, 2)
    res, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], psi), "a", "b", IDEAL, outcome=97)
    assert "phiCorrection" in res.corrections.reasons()
    raw = reduced_density_matrix(res.record.state, ["a", "b"])
    undone = reduced_density_matrix(res.corrections.undo(post), ["a", "b"])
    assert np.abs(raw - undone).max() < 1e-12


def test_parity_gate_is_qnd(rng):
    psi = random_state(rng, 2)
    state = BranchState.from_qubit_vector(["a", "b"], psi)
    for seed in range(20):
        r = np.random.default_rng(seed)
        first, s1 = parity_gate(state, "a", "b", IDEAL, r)
        second, s2 = parity_gate(s1, "a", "b", IDEAL, r)
        assert first.parity == second.parity
        # the second projection leaves the already-projected state alone
        target = _projected(psi, first.parity)
        rho = reduced_density_matrix(s2, ["a", "b"])
        assert np.real(target.conj() @ rho @ target) == pytest.approx(1.0, abs=1e-12)


def test_repeat_probability_bound():
    # at alpha theta = pi an odd state reads zero with probability e^{-2 a^2 (1 - cos theta)}
    cfg = ParityGateConfig(314.159, 0.01)
    odd = np.array([0, 1, 1, 0]) / math.sqrt(2)
    prep = prepare_parity(BranchState.from_qubit_vector(["a", "b"], odd), "a", "b", cfg)
    assert prep.pmf[0] == pytest.approx(math.exp(-2 * 314.159 ** 2 * (1 - math.cos(0.01))), rel=1e-9)
    _, post = complete_parity(prep, 12)
    again = prepare_parity(post, "a", "b", cfg)
    assert 1 - again.pmf[0] >= 1 - 2 * prep.pmf[0]


def test_diagonal_basis_projects_onto_xx_eigenspaces(rng):
    psi = random_state(rng, 2)
    cfg = ParityGateConfig(IDEAL.alpha, IDEAL.theta, basis="diagonal")
    HH = np.kron(HADAMARD, HADAMARD)
    for value, parity in ((0, EVEN), (ODD_COUNT, ODD)):
        res, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], psi), "a", "b", cfg, outcome=value)
        assert res.parity == parity
        target = HH @ _projected(HH @ psi, parity)
        rho = reduced_density_matrix(post, ["a", "b"])
        assert np.real(target.conj() @ rho @ target) == pytest.approx(1.0, abs=1e-12)


def test_homodyne_readout(rng):
    psi = random_state(rng, 2)
    # x-quadrature peaks sit 2 alpha (1 - cos theta) apart, so homodyne needs alpha theta^2 >> 1
    assert ParityGateConfig(IDEAL.alpha, IDEAL.theta, measurement="homodyne").degraded
    cfg = ParityGateConfig(2e4, 0.05, measurement="homodyne")
    assert not cfg.degraded
    prep = prepare_parity(BranchState.from_qubit_vector(["a", "b"], psi), "a", "b", cfg)
    for u in (0.05, 0.5, 0.95):
        x = float(prep.sample(u))
        res, post = complete_parity(prep, x)
        rho = reduced_density_matrix(post, ["a", "b"])
        t = _projected(psi, res.parity)
        assert np.real(t.conj() @ rho @ t) == pytest.approx(1.0, abs=1e-9)


def test_degraded_and_indeterminate_windows():
    weak = ParityGateConfig(alpha=10.0, theta=0.1)
    assert weak.degraded
    assert not IDEAL.degraded
    lossy = ParityGateConfig(IDEAL.alpha, IDEAL.theta, eta=0.2, odd_threshold=3)
    state = BranchState.from_qubit_vector(["a", "b"], np.ones(4) / 2)
    res, post = parity_gate(state, "a", "b", lossy, outcome=2)
    assert res.parity == INDETERMINATE
    assert len(res.corrections) == 0
    with pytest.raises(ValueError):
        ParityGateConfig(alpha=-1.0, theta=0.1)


def _even_block(rho):
    idx = np.ix_([0, 3], [0, 3])
    out = np.zeros_like(rho)
    out[idx] = rho[idx] / np.trace(rho[idx])
    return out


@pytest.mark.parametrize("eta", [0.05, 0.1, 0.3])
def test_lossy_mixture(eta):
    alpha, theta = 300.0, math.pi / 300
    cfg = ParityGateConfig(alpha, theta, eta=eta)
    c = d = np.array([1, 1]) / math.sqrt(2)
    _, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], np.kron(c, d)), "a", "b", cfg, outcome=0)
    rho = reduced_density_matrix(post, ["a", "b"])
    # n_p = 0 also catches odd light with probability m; that part is the discrimination error
    m = parity_misclass(alpha, theta, eta)
    assert np.real(rho[1, 1] + rho[2, 2]) == pytest.approx(m / (1 + m), rel=1e-9)
    # the even part is the loss mixture
    even = _even_block(rho)
    lp = loss_params(eta, alpha, theta)
    assert np.abs(even - predicted_mixture(c, d, eta, alpha, theta, EVEN)).max() <= 1e-10
    assert np.sort(np.linalg.eigvalsh(even))[::-1][:2] == pytest.approx([lp.lambda_plus, lp.lambda_minus], abs=1e-10)
    assert concurrence(even) == pytest.approx(math.exp(-lp.gamma), abs=1e-10)


def test_lossy_mixture_exact_when_discrimination_is_perfect():
    # alpha theta = 10 pushes the misclassification to e^-100
    alpha, theta, eta = 1000.0, 0.01, 0.05
    c, d = np.array([0.6, 0.8j]), np.array([1, 1]) / math.sqrt(2)
    cfg = ParityGateConfig(alpha, theta, eta=eta)
    _, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], np.kron(c, d)), "a", "b", cfg, outcome=0)
    rho = reduced_density_matrix(post, ["a", "b"])
    assert np.abs(rho - predicted_mixture(c, d, eta, alpha, theta, EVEN)).max() <= 1e-10


def test_lossy_odd_branch_mixture():
    alpha, theta, eta = 300.0, math.pi / 300, 0.1
    cfg = ParityGateConfig(alpha, theta, eta=eta)
    c, d = np.array([0.6, 0.8]), np.array([1, 1]) / math.sqrt(2)
    _, post = parity_gate(BranchState.from_qubit_vector(["a", "b"], np.kron(c, d)), "a", "b", cfg, outcome=10)
    rho = reduced_density_matrix(post, ["a", "b"])
    assert np.abs(rho - predicted_mixture(c, d, eta, alpha, theta, ODD)).max() <= 1e-10


# ---- detector and source ---------------------------------------------------


def test_detector_is_quantum_non_demolition():
    rng = np.random.default_rng(11)
    amps = np.array([0.6, 0.8, 0])
    res = qnd_photon_detect(amps, 314.159, 0.01, rng)
    rho = reduced_density_matrix(res.state, ["signal"])
    # the count is read but the photon is still there
    assert np.real(rho[res.estimate, res.estimate]) == pytest.approx(1.0, abs=1e-3)


def test_detector_blind_without_coupling():
    det = QNDDetector(np.array([0.6, 0.8]), 100.0, 0.0)
    assert det.blind
    guesses = det.classify(np.zeros(10000), np.random.default_rng(0).random(10000))
    assert np.mean(guesses == 1) == pytest.approx(0.64, abs=0.02)


def test_coherent_signal_truncation():
    amps = coherent_signal(1.0)
    assert np.linalg.norm(amps) == pytest.approx(1.0)
    # the Poisson tail beyond the kept levels is below the leak bound
    assert 1 - sum(heralding_prob(1.0, n) for n in range(len(amps))) < 1e-6
    assert len(coherent_signal(0.0)) == 3


def test_heralded_single_photon():
    for seed in range(40):
        h = prepare_heralded_photon(1.0, 314.159, 0.01, np.random.default_rng(seed))
        if h.heralded:
            rho = reduced_density_matrix(h.state, ["signal"])
            assert np.real(rho[1, 1]) > 0.99
            return
    pytest.fail("no herald in 40 tries")


# ---- circuits --------------------------------------------------------------


def _ideal_parity(vec, i, j, parity, basis="Z"):
    """Project qubits i, j of a 4-qubit vector onto a parity subspace."""
    v = vec.reshape([2] * 4).copy()
    if basis == "X":
        for q in (i, j):
            v = np.moveaxis(np.tensordot(HADAMARD, v, axes=([1], [q])), 0, q)
    idx = np.indices([2] * 4)
    keep = (idx[i] ^ idx[j]) == (0 if parity == EVEN else 1)
    v = np.where(keep, v, 0)
    if basis == "X":
        for q in (i, j):
            v = np.moveaxis(np.tensordot(HADAMARD, v, axes=([1], [q])), 0, q)
    return v.ravel()


def _oracle_cnot_table():
    """Pauli fix-ups found by brute force on dense vectors, order (c, t, a, b)."""
    rng = np.random.default_rng(99)
    psi = random_state(rng, 2)
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    table = {}
    for p1, s, p2, m in itertools.product((0, 1), repeat=4):
        v = np.kron(psi, bell)
        v = _ideal_parity(v, 0, 2, EVEN if p1 == 0 else ODD)
        v = v.reshape([2] * 4)
        v = np.moveaxis(np.tensordot(HADAMARD, v, axes=([1], [2])), 0, 2)[:, :, s, :]  # measure a
        v = np.stack([v, np.zeros_like(v)], axis=2).ravel()  # park a in |0>
        v = _ideal_parity(v, 1, 3, EVEN if p2 == 0 else ODD, basis="X")
        v = v.reshape([2] * 4)[:, :, 0, m]
        hits = []
        for fc, ft in itertools.product((None, "Z"), (None, "X")):
            U = np.kron(Z if fc else np.eye(2), X if ft else np.eye(2))
            out = U @ v.ravel()
            if overlap(out / np.linalg.norm(out), CNOT @ psi) > 1 - 1e-12:
                hits.append((fc, ft))
        assert len(hits) == 1
        table[(p1, s, p2, m)] = hits[0]
    return table


def test_cnot_correction_table_matches_enumeration_oracle():
    assert CNOT_CORRECTIONS == _oracle_cnot_table()


def _forced(p1, s, p2, m):
    return {
        "bell": 0,
        "control_parity": 0 if p1 == 0 else ODD_COUNT,
        "ancilla_a": s,
        "target_parity": 0 if p2 == 0 else ODD_COUNT,
        "ancilla_b": m,
    }


@pytest.mark.parametrize("combo", list(itertools.product((0, 1), repeat=4)))
def test_cnot_every_outcome_combination(combo):
    psi = random_state(np.random.default_rng(sum(b << i for i, b in enumerate(combo))), 2)
    res = cnot(BranchState.from_qubit_vector(["c", "t"], psi), "c", "t", IDEAL, forced=_forced(*combo))
    assert res.success
    assert overlap(register_vector(res.state, ["c", "t"]), CNOT @ psi) >= 1 - 1e-8


def test_cnot_odd_bell_pair_is_repaired():
    psi = random_state(np.random.default_rng(3), 2)
    f = _forced(1, 0, 1, 1)
    f["bell"] = ODD_COUNT
    res = cnot(BranchState.from_qubit_vector(["c", "t"], psi), "c", "t", IDEAL, forced=f)
    assert "bitFlip" in res.corrections.reasons()
    assert overlap(register_vector(res.state, ["c", "t"]), CNOT @ psi) >= 1 - 1e-8


@pytest.mark.parametrize("basis_in,expected", [(0, 0), (1, 1), (2, 3), (3, 2)])
def test_cnot_truth_table(basis_in, expected):
    for seed in range(5):
        res = cnot(BranchState.from_qubit_vector(["c", "t"], np.eye(4)[basis_in]), "c", "t", IDEAL,
                   np.random.default_rng(seed))
        assert overlap(register_vector(res.state, ["c", "t"]), np.eye(4)[expected]) >= 1 - 1e-8


def test_cnot_makes_bell_state_and_chains():
    state = BranchState.from_qubit_vector(["c", "t"], np.kron([1, 1], [1, 0]) / math.sqrt(2))
    res = cnot(state, "c", "t", IDEAL, np.random.default_rng(1))
    assert overlap(register_vector(res.state, ["c", "t"]), BELL_STATES["Phi+"]) >= 1 - 1e-8
    # applying it again undoes the entanglement, ancilla names do not clash
    back = cnot(res.state, "c", "t", IDEAL, np.random.default_rng(2))
    assert overlap(register_vector(back.state, ["c", "t"]), np.kron([1, 1], [1, 0])) >= 1 - 1e-8


def test_cnot_rejects_same_qubit():
    with pytest.raises(ValueError):
        cnot(BranchState.from_qubit_vector(["c"], [1, 0]), "c", "c", IDEAL)


def test_make_bell_pair_both_outcomes():
    for value in (0, ODD_COUNT):
        res, state = make_bell_pair(IDEAL, outcome=value)
        assert overlap(register_vector(state, ["a", "b"]), BELL_STATES["Phi+"]) >= 1 - 1e-12


@pytest.mark.parametrize("label", list(BELL_STATES))
def test_bell_measurement_signatures(label):
    state = BranchState.from_qubit_vector(["a", "b"], BELL_STATES[label])
    for seed in range(5):
        res = bell_measurement(state, "a", "b", IDEAL, np.random.default_rng(seed))
        assert res.success and res.label == label
        assert overlap(register_vector(res.state, ["a", "b"]), BELL_STATES[label]) >= 1 - 1e-8


def test_bell_measurement_statistics():
    psi = np.kron([math.cos(0.3), math.sin(0.3)], [math.cos(1.1), math.sin(1.1) * np.exp(0.4j)])
    weights = {k: abs(np.vdot(v, psi)) ** 2 for k, v in BELL_STATES.items()}
    n = 10_000
    state = BranchState.from_qubit_vector(["a", "b"], psi)
    labels = [bell_measurement(state, "a", "b", IDEAL, np.random.default_rng([7, i])).label for i in range(n)]
    for k, w in weights.items():
        assert abs(labels.count(k) / n - w) <= 4 * math.sqrt(w * (1 - w) / n)


FUSED = {"XZII": None, "ZXXZ": None, "IIZX": None, "IZZI": None}


def _expect(vec, word):
    mats = {"I": np.eye(2), "X": X, "Z": Z}
    op = np.array([[1.0]])
    for ch in word:
        op = np.kron(op, mats[ch])
    return float(np.real(np.vdot(vec, op @ vec)))


@pytest.mark.parametrize("value", [0, ODD_COUNT])
def test_fusion_stabilizers(value):
    names = ["q1", "q2", "q3", "q4"]
    start = linear_cluster(names[:2]).tensor(linear_cluster(names[2:]))
    res, post = fuse_clusters(start, "q2", "q3", IDEAL, outcome=value, neighbours=("q4",))
    vec = register_vector(post, names)
    for word in FUSED:
        assert _expect(vec, word) == pytest.approx(1.0, abs=1e-8)


def test_fusion_adds_one_qubit():
    start = linear_cluster(["q1", "q2"]).with_qubit("new", np.array([1, 1]) / math.sqrt(2))
    for value in (0, ODD_COUNT):
        res, post = fuse_clusters(start, "q2", "new", IDEAL, outcome=value)
        vec = register_vector(post, ["q1", "q2", "new"])
        assert len(post.discrete_names) == 3
        for word in ("XZI", "ZXX", "IZZ"):
            assert _expect(vec, word) == pytest.approx(1.0, abs=1e-8)


def test_fusion_even_odd_balanced():
    start = linear_cluster(["q1", "q2"]).tensor(linear_cluster(["q3", "q4"]))
    prep = prepare_parity(start, "q2", "q3", IDEAL)
    assert prep.pmf[0] == pytest.approx(0.5, abs=1e-12)


def test_single_shot_detector_matches_vectorised_path():
    amps = np.array([0, 1, 0])
    det = QNDDetector(amps, 314.159, 0.01)
    for seed in range(20):
        res = qnd_photon_detect(amps, 314.159, 0.01, np.random.default_rng(seed))
        x = det.sample_x(np.random.default_rng(seed).random())
        assert res.outcome.value == pytest.approx(float(x))
        assert res.estimate == det.classify(x)
