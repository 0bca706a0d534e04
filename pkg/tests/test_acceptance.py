"""End-to-end acceptance suite.

Each test prints an explicit PASS/FAIL line for its criterion (the
project's pytest config uses ``--capture=tee-sys`` so the lines reach the
terminal during a normal run). Criteria 9-11 train
variational codes and take tens of minutes on a single core; everything
else is fast.
"""

import functools
import time

import numpy as np
import pytest

from concatqec import rea, train
from concatqec.channels import (
    PauliChannel,
    named_channel,
    worst_case_infidelity,
)
from concatqec.cli import load_records, main as cli_main
from concatqec.estimator import (
    estimate_effective_channel,
    eta_to_probs,
    pauli_channel_evaluator,
    project_to_simplex,
)
from concatqec.pipeline import (
    CodeSpec,
    overhead_ratio,
    run_level,
)
from concatqec.qsim import DensityMatrix, apply_kraus, fidelity
from concatqec.stabilizer import get_code, pauli_matrix, recovery_channel
from concatqec.train import TrainConfig, train_code


def criterion(num, desc):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\ncriterion {num} ({desc}): FAIL")
                raise
            print(f"\ncriterion {num} ({desc}): PASS")
        return wrapper
    return deco


# ---------------------------------------------------------------------------
# 1. estimator exactness
# ---------------------------------------------------------------------------

@criterion(1, "estimator exactness on 100 random Pauli channels")
def test_estimator_exactness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(100):
        raw = rng.uniform(0, 1, size=4)
        raw /= raw.sum()
        ch = PauliChannel(raw[1], raw[2], raw[3])
        est = estimate_effective_channel(pauli_channel_evaluator(ch))
        assert np.max(np.abs(np.array(est.probs.as_tuple()) -
                             np.array(ch.as_tuple()))) < 1e-10
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# 2. repetition-code closed form
# ---------------------------------------------------------------------------

@criterion(2, "rep3 bitflip closed form 3p^2 - 2p^3")
def test_rep3_closed_form():
    start = time.perf_counter()
    for p in (0.01, 0.05, 0.1):
        est = run_level(CodeSpec.from_stabilizer("rep3"), named_channel("bit", p))
        assert est.probs.p_x == pytest.approx(3 * p**2 - 2 * p**3, abs=1e-9)
    est = run_level(CodeSpec.from_stabilizer("rep3"), named_channel("bit", 0.1))
    assert est.probs.p == pytest.approx(0.028, abs=5e-4)
    assert est.probs.proportions[0] == pytest.approx(1.0, abs=1e-6)
    assert est.probs.proportions[1] == pytest.approx(0.0, abs=1e-6)
    assert est.probs.proportions[2] == pytest.approx(0.0, abs=1e-6)
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# 3. stabilizer-only yflip suppression table
# ---------------------------------------------------------------------------

@criterion(3, "six-level [[5,1,3]] yflip p sequence")
def test_yflip_stabilizer_table():
    start = time.perf_counter()
    expected = (0.082, 0.056, 0.027, 0.0068, 0.00046, 2.0e-6)
    spec = CodeSpec.from_stabilizer("perfect5")
    channel = named_channel("yflip", 0.1)
    ps, props = [], []
    for _ in range(6):
        est = run_level(spec, channel)
        ps.append(est.probs.p)
        props.append(est.probs.proportions)
        channel = est.probs
    for got, want in zip(ps, expected):
        assert abs(got - want) <= 0.05 * want, (got, want)
    assert np.allclose(props[0], (0.50, 0.00, 0.50), atol=0.01)
    for level in (2, 3, 4, 5):
        assert np.allclose(props[level], (1 / 3,) * 3, atol=0.01), level
    assert time.perf_counter() - start < 30.0


# ---------------------------------------------------------------------------
# 4. adep level 1
# ---------------------------------------------------------------------------

@criterion(4, "[[5,1,3]] adep level-1 channel")
def test_adep_level_one():
    start = time.perf_counter()
    est = run_level(CodeSpec.from_stabilizer("perfect5"), named_channel("adep", 0.1))
    assert est.probs.p == pytest.approx(0.081, rel=0.05)
    assert np.allclose(est.probs.proportions, (0.44, 0.44, 0.12), atol=0.02)
    assert time.perf_counter() - start < 10.0


# ---------------------------------------------------------------------------
# 5. bit-through-perfect5 level 1
# ---------------------------------------------------------------------------

@criterion(5, "[[5,1,3]] bitflip level-1 channel")
def test_bit_level_one():
    est = run_level(CodeSpec.from_stabilizer("perfect5"), named_channel("bit", 0.1))
    assert est.probs.p == pytest.approx(0.082, rel=0.05)
    assert np.allclose(est.probs.proportions, (0.00, 0.50, 0.50), atol=0.01)


# ---------------------------------------------------------------------------
# 6. single-error correction property
# ---------------------------------------------------------------------------

@criterion(6, "[[5,1,3]] corrects all 15 single-qubit Paulis")
def test_perfect5_single_error_correction():
    code = get_code("perfect5")
    rec = recovery_channel(code)
    for cw in code.codewords:
        ideal = DensityMatrix.from_vector(cw)
        for q in range(5):
            for letter in "XYZ":
                err = "I" * q + letter + "I" * (4 - q)
                u = np.asarray(pauli_matrix(err), dtype=complex)
                corrupted = DensityMatrix(5, u @ ideal.data @ u.conj().T)
                recovered = apply_kraus(corrupted, rec, list(range(5)))
                assert fidelity(ideal, recovered) == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# 7. simplex projection properties
# ---------------------------------------------------------------------------

def _grid_simplex(resolution):
    """All probability 4-vectors with entries k/resolution."""
    points = []
    for a in range(resolution + 1):
        for b in range(resolution + 1 - a):
            for c in range(resolution + 1 - a - b):
                d = resolution - a - b - c
                points.append((a, b, c, d))
    return np.array(points, dtype=float) / resolution


@criterion(7, "simplex projection optimality")
def test_simplex_projection():
    rng = np.random.default_rng(7)
    grid = _grid_simplex(60)
    for _ in range(20):
        raw = rng.normal(size=4) * 0.5 + 0.25
        if np.all(raw >= 0) and abs(raw.sum() - 1) < 1e-12:
            raw[rng.integers(0, 4)] -= 0.5  # force invalidity
        probs, projected = project_to_simplex(raw)
        q = np.array([1 - probs.p, *probs.as_tuple()])
        # valid output
        assert np.all(q >= -1e-15) and q.sum() == pytest.approx(1.0, abs=1e-12)
        # idempotent
        again, flag = project_to_simplex(q)
        assert not flag
        assert np.allclose(again.as_tuple(), probs.as_tuple(), atol=1e-12)
        # beats 1000 random simplex points
        samples = rng.dirichlet(np.ones(4), size=1000)
        d_proj = np.linalg.norm(q - raw)
        assert d_proj <= np.linalg.norm(samples - raw, axis=1).min() + 1e-12
        # within 2e-3 of the dense-grid oracle
        d_grid = np.linalg.norm(grid - raw, axis=1).min()
        assert d_proj <= d_grid + 2e-3


@criterion(7.1, "closed-form probabilities then projection vs grid oracle")
def test_eta_to_probs_projection_oracle():
    rng = np.random.default_rng(71)
    grid = _grid_simplex(60)
    for _ in range(20):
        # noisy eta triple that may leave the physical region
        eta = rng.uniform(-1.2, 1.2, size=3)
        raw = np.array(eta_to_probs(type("E", (), {
            "as_tuple": staticmethod(lambda e=eta: tuple(e))})()))
        probs, _ = project_to_simplex(raw)
        q = np.array([1 - probs.p, *probs.as_tuple()])
        d_proj = np.linalg.norm(q - raw)
        d_grid = np.linalg.norm(grid - raw, axis=1).min()
        assert d_proj <= d_grid + 2e-3


# ---------------------------------------------------------------------------
# 8. finite-difference gradient order check
# ---------------------------------------------------------------------------

@criterion(8, "O(h^2) finite-difference convergence on both losses")
def test_gradient_order():
    rng = np.random.default_rng(8)
    enc_layout = rea.build_rea(3, 6, seed=2)
    enc_params = rea.ReaParameters(
        rng.uniform(-0.5, 0.5, rea.parameter_count(enc_layout)))
    rec_layout = rea.build_rea(4, 6, seed=3)
    rec_x = rng.uniform(-0.5, 0.5, rea.parameter_count(rec_layout))
    ch = named_channel("adep", 0.1)

    losses = {
        "distinguishability": (
            lambda v: train.distinguishability_loss(
                enc_layout, rea.ReaParameters(v), ch),
            np.array(enc_params.values),
            train.distinguishability_loss_and_grad(enc_layout, enc_params, ch)[1],
        ),
        "fidelity": (
            lambda v: train.fidelity_loss(
                enc_layout, enc_params, rec_layout, rea.ReaParameters(v), ch, 1),
            rec_x,
            train.fidelity_loss_and_grad(
                enc_layout, enc_params, rec_layout,
                rea.ReaParameters(rec_x), ch, 1)[1],
        ),
    }
    h = 0.05
    for name, (fn, x, exact) in losses.items():
        coords = rng.choice(x.size, size=5, replace=False)
        for i in coords:
            def fd(step):
                bump = np.zeros_like(x)
                bump[i] = step
                return (fn(x + bump) - fn(x - bump)) / (2 * step)
            err_h = abs(fd(h) - exact[i])
            err_h2 = abs(fd(h / 2) - exact[i])
            if err_h < 1e-12:
                continue  # derivative is (numerically) exact already
            # central differences: error ~ h^2, so halving h quarters it
            assert err_h2 <= err_h / 3.0, (name, i, err_h, err_h2)


# ---------------------------------------------------------------------------
# 9. variational training quality (slow: full training runs)
# ---------------------------------------------------------------------------

@criterion(9, "trained ((5,2)) yflip wc <= 0.02 and ((3,2)) bit wc <= 0.04")
def test_variational_training_bounds():
    cases = (
        (5, named_channel("yflip", 0.1), 0.02),
        (3, named_channel("bit", 0.1), 0.04),
    )
    for n, channel, bound in cases:
        best = np.inf
        # best of 3 seeds; later seeds are skipped once the bound is met
        for seed in (0, 1, 2):
            start = time.perf_counter()
            code = train_code(n, channel, TrainConfig(seed=seed))
            est = run_level(CodeSpec.from_trained(code), channel)
            assert time.perf_counter() - start <= 1800, (n, seed)
            best = min(best, worst_case_infidelity(est.probs))
            if best <= bound:
                break
        assert best <= bound, (n, best)


# ---------------------------------------------------------------------------
# 10 & 11. hybrid pipeline end-to-end and byte-level determinism (slow)
# ---------------------------------------------------------------------------

HYBRID_ARGS = ["concat", "--noise", "yflip:0.1"]  # default policy and seed


@pytest.fixture(scope="session")
def hybrid_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("hybrid")
    start = time.perf_counter()
    assert cli_main(HYBRID_ARGS + ["--out", str(out)]) == 0
    return out, time.perf_counter() - start


@criterion(10, "hybrid yflip pipeline: sequence, qubits, target, overhead")
def test_hybrid_pipeline(hybrid_run, tmp_path):
    out, elapsed = hybrid_run
    assert elapsed <= 3600
    records, _ = load_records(str(out))
    assert [r.code.label for r in records] == ["((5,2))", "((5,2))", "[[5,1,3]]"]
    assert records[-1].cumulative_qubits == 125
    achieved = records[-1].worst_case_infidelity
    assert achieved <= 1e-4
    baseline_dir = tmp_path / "baseline"
    assert cli_main(["concat", "--noise", "yflip:0.1", "--sizes", "",
                     "--out", str(baseline_dir)]) == 0
    baseline, _ = load_records(str(baseline_dir))
    assert overhead_ratio(records, baseline, achieved) >= 50


@criterion(11, "rerun with the same seed is byte-identical")
def test_determinism(hybrid_run, tmp_path):
    out, _ = hybrid_run
    rerun = tmp_path / "rerun"
    assert cli_main(HYBRID_ARGS + ["--out", str(rerun)]) == 0
    for name in ("records.json", "curve.csv", "table.txt"):
        assert (rerun / name).read_bytes() == (out / name).read_bytes(), name
