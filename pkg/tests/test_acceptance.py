"""Acceptance gate: every criterion at its stated tolerance and time limit.

Each test prints one PASS/FAIL line, and the terminal summary repeats them.
"""

import math
from collections import defaultdict
from itertools import product
from math import comb

import numpy as np

import _oracles as O
from shadowdfe.baseline import approximate_measurement_count, tailored_measurement_count
from shadowdfe.bench import BenchConfig, aggregate, run_bench
from shadowdfe.cli import main
from shadowdfe.linalg import LocalUnitary, local_trace_element, validate_density
from shadowdfe.measurement import MeasuredState
from shadowdfe.rng import make_rng
from shadowdfe.shadow import (
    DIAGONAL,
    ErrorBudget,
    dicke_coefficients,
    draw_samples,
    estimate,
    estimator_value,
    plan,
    snapshot_matrix_element,
)
from shadowdfe.states import GHZ, Dicke, W, random_state_with_fidelity

H, Y, Z = LocalUnitary.HADAMARD, LocalUnitary.HADAMARD_SDG, LocalUnitary.IDENTITY

# (bra, outcome, ket) -> values for the X, Y and Z bases
LOCAL_TRACE_TABLE = {
    (0, 0, 1): (0.5, -0.5j, 0),
    (0, 1, 1): (-0.5, 0.5j, 0),
    (1, 0, 0): (0.5, 0.5j, 0),
    (1, 1, 0): (-0.5, -0.5j, 0),
}


def test_c01_local_trace_table(criterion):
    with criterion(1, "local trace table reproduced exactly", 1):
        for (bra, o, ket), row in LOCAL_TRACE_TABLE.items():
            for u, want in zip((H, Y, Z), row):
                assert local_trace_element(u, bra, o, ket) == want, (u, bra, o, ket)


def test_c02_basis_identity(criterion):
    with criterion(2, "3^n-average of diagonal snapshot elements is delta", 10):
        for n in (2, 3):
            settings = list(product(range(3), repeat=n))
            for b_hat in product((0, 1), repeat=n):
                for b in product((0, 1), repeat=n):
                    avg = sum(snapshot_matrix_element(b, b, s, b_hat) for s in settings) / len(settings)
                    assert abs(avg - (b == b_hat)) < 1e-12


def _enumerated_mean(target, rho):
    """Exact mean of one sample: oracle branch weights, package values and outcome probabilities.

    Also checks that the branch weights summed per arm agree with the plan's arm probabilities.
    """
    state = MeasuredState(rho)
    arm_weight = defaultdict(float)
    total = 0.0
    for w, codes, pair, _ in O.branches(target):
        if pair is None:
            arm = DIAGONAL
        elif isinstance(target, Dicke):
            arm = sum(a & b for a, b in zip(*pair))
        else:
            arm = 0
        arm_weight[arm] += w
        probs = state.distribution(codes).probs
        values = [estimator_value(target, codes, o, pair) for o in range(1 << target.n)]
        total += w * math.fsum(p * v for p, v in zip(probs, values))
    p = plan(target, ErrorBudget(0.1, 0.1))
    for prob, arm in p.arms:
        assert abs(arm_weight[arm.code] - prob) < 1e-12
    return total, p.offset


def test_c03_exact_unbiasedness(criterion):
    with criterion(3, "enumerated mean plus offset equals tr(rho sigma)", 120):
        rng = np.random.default_rng(2024)
        for target in (GHZ(2), GHZ(3), W(2), W(3), Dicke(4, 2)):
            for _ in range(20):
                rho = validate_density(O.random_density(target.n, rng))
                mean, off = _enumerated_mean(target, rho)
                assert abs(mean + off - O.fidelity(rho.data, target)) < 1e-10, target


def test_c04_sample_bounds(criterion):
    with criterion(4, "no sample exceeds its bound over 10^6 draws", 120):
        bounds = {
            GHZ(5): 0.75,
            W(5): (25 - 5 + 1) / 10,
            Dicke(5, 2): (0.5 + sum(O.brute_pair_counts(5, 2).values())) / comb(5, 2),
        }
        for i, (target, bound) in enumerate(bounds.items()):
            state = MeasuredState(random_state_with_fidelity(target, 0.5, i))
            values = draw_samples(state, target, 10**6, make_rng(77, i)).values
            assert values.size == 10**6
            assert int(np.sum(np.abs(values) > bound)) == 0, target


def test_c05_pair_counts(criterion):
    with criterion(5, "c_l equals brute-force pair counts for n <= 8", 30):
        for n in range(1, 9):
            for k in range(n + 1):
                co = dicke_coefficients(n, k)
                assert co.c == O.brute_pair_counts(n, k), (n, k)
                if k == 1:
                    assert 2 * co.S == n * n - n + 1


def test_c06_sample_counts(criterion):
    with criterion(6, "plan counts 1660 / 338 / 3998 and baseline bound ratio", 1):
        got = {
            "ghz": plan(GHZ(3), ErrorBudget(0.05, 0.05)).N,
            "w": plan(W(2), ErrorBudget(0.1, 0.1)).N,
            "dicke": plan(Dicke(4, 2), ErrorBudget(0.1, 0.1)).N,
        }
        want = {"ghz": 1660, "w": 338, "dicke": 3998}
        ratio_ok = []
        for delta in (0.05, 0.1, 0.3):
            b = ErrorBudget(0.1, delta)
            ratio = approximate_measurement_count(GHZ(3), b) / tailored_measurement_count(GHZ(3), b)
            ratio_ok.append(abs(ratio - 128 / 9 * (1 + math.log(2) / math.log(2 / delta))) < 1e-9)
        assert all(ratio_ok)
        assert got == want, f"plan counts {got} differ from required {want}"


def _coverage(target, runs=500):
    budget = ErrorBudget(0.1, 0.1)
    rho = random_state_with_fidelity(target, 0.6, 2025)
    state = MeasuredState(rho)
    p = plan(target, budget)
    f = O.fidelity(rho.data, target)
    misses = sum(abs(estimate(state, p, seed).estimate - f) >= budget.epsilon for seed in range(runs))
    slack = 1.959963984540054 * math.sqrt(budget.delta * (1 - budget.delta) / runs)
    return misses / runs, budget.delta + slack


def test_c07_hoeffding_coverage(criterion):
    with criterion(7, "P(|estimate - F| >= eps) <= delta + binomial slack", 600):
        for target in (GHZ(4), W(4)):
            rate, limit = _coverage(target)
            assert rate <= limit, (target, rate, limit)


def test_c08_mse_ordering(criterion):
    with criterion(8, "tailored MSE below baseline MSE with disjoint 95% CIs, n = 2..5", 3600):
        budget = ErrorBudget(0.1, 0.1)
        for target in [GHZ(n) for n in range(2, 6)] + [W(n) for n in range(2, 6)]:
            cfg = BenchConfig(target, budget, trials=10, seed=8, methods=("shadow", "baseline"))
            groups = {g.method: g for g in aggregate(run_bench(cfg))}
            shadow, base = groups["shadow"], groups["baseline"]
            assert shadow.count >= 1000 and base.count >= 1000
            print(f"  {target}: shadow {shadow.mse:.3e} +- {shadow.half_width:.1e}, baseline {base.mse:.3e} +- {base.half_width:.1e}")
            assert shadow.mse < base.mse, target
            assert shadow.ci95[1] < base.ci95[0], target


def test_c09_bench_determinism(criterion, tmp_path):
    with criterion(9, "results.csv byte-identical across 1, 2 and 8 threads", 300):
        blobs = []
        for threads in (1, 2, 8):
            out = tmp_path / f"t{threads}"
            argv = ["bench", "--target", "ghz", "--n-range", "2..3", "--epsilon", "0.1", "--delta", "0.1",
                    "--trials", "2", "--seed", "31", "--out-dir", str(out), "--threads", str(threads)]
            assert main(argv) == 0
            blobs.append((out / "results.csv").read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]
        assert blobs[0].count(b"\n") == 1 + 2 * 101 * 2 * 3


def test_c10_dicke_one_reduces_to_w(criterion):
    with criterion(10, "Dicke(n, 1) matches W(n) in estimates and enumerated means", 60):
        rng = np.random.default_rng(10)
        budget = ErrorBudget(0.1, 0.1)
        for n in (3, 4, 5):
            rho = validate_density(O.random_density(n, rng))
            state = MeasuredState(rho)
            pw, pd = plan(W(n), budget), plan(Dicke(n, 1), budget)
            assert pw.N == pd.N and pw.offset == pd.offset
            for seed in range(5):
                assert estimate(state, pw, seed).estimate == estimate(state, pd, seed).estimate
            mw, _ = _enumerated_mean(W(n), rho)
            md, _ = _enumerated_mean(Dicke(n, 1), rho)
            assert abs(mw - md) < 1e-12
