import math
from collections import Counter
from math import comb

import numpy as np
import pytest

import _oracles as O
from shadowdfe.linalg import LocalUnitary, validate_density
from shadowdfe.measurement import MeasuredState
from shadowdfe.rng import make_rng
from shadowdfe.shadow import (
    DIAGONAL,
    ErrorBudget,
    _decode_dicke_pairs,
    basis_dfe_estimator,
    basis_sample,
    compatible_settings,
    dicke_coefficients,
    dicke_sample,
    draw_samples,
    estimate,
    estimator_value,
    ghz_sample,
    plan,
    sample_bound,
    snapshot_matrix_element,
    w_sample,
)
from shadowdfe.states import GHZ, Basis, Dicke, W, random_state_with_fidelity

TARGETS = [GHZ(2), GHZ(3), W(2), W(3), W(4), Dicke(4, 2), Dicke(5, 2), Dicke(4, 0), Dicke(3, 3), Dicke(4, 3), Basis("10")]


def _state(target, seed=0):
    return validate_density(O.random_density(target.n, np.random.default_rng(seed)))


def test_snapshot_element_is_product_of_rescaled_traces():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        b1, b2, o = (tuple(rng.integers(0, 2, n)) for _ in range(3))
        s = tuple(rng.integers(0, 3, n))
        want = np.prod([3 * O.local_trace(int(u), x, ob, y) - (x == y) for u, x, ob, y in zip(s, b1, o, b2)])
        assert abs(snapshot_matrix_element(b1, b2, s, o) - want) < 1e-14


def test_snapshot_length_mismatch():
    with pytest.raises(ValueError):
        snapshot_matrix_element("01", "01", (0,), "0")


def test_basis_estimator():
    assert basis_dfe_estimator("101", (1, 0, 1)) == 1.0
    assert basis_dfe_estimator("101", "100") == 0.0


@pytest.mark.parametrize("b1, b2", [("000", "111"), ("0101", "0110"), ("10", "10"), ("1100", "0011")])
def test_compatible_settings(b1, b2):
    got = compatible_settings(b1, b2)
    i, j = tuple(map(int, b1)), tuple(map(int, b2))
    assert {tuple(int(u) for u in s) for s in got} == set(O.even_y_settings(i, j))
    d = sum(a != b for a, b in zip(i, j))
    assert len(got) == (2 ** (d - 1) if d else 1)


@pytest.mark.parametrize("target", TARGETS, ids=str)
def test_values_match_oracle_on_every_branch(target):
    n = target.n
    for _, codes, pair, fn in O.branches(target):
        for o in range(1 << n):
            ob = O.bits(o, n)
            assert estimator_value(target, codes, ob, pair) == pytest.approx(fn(ob), abs=1e-12)


@pytest.mark.parametrize("n, k", [(4, 2), (5, 2), (4, 1), (3, 2), (6, 3)])
def test_dicke_pair_values_match_oracle(n, k):
    target = Dicke(n, k)
    s = O.scale(target)
    strings = O.weight_strings(n, k)
    for a in range(len(strings)):
        for b in range(a + 1, len(strings)):
            i, j = strings[a], strings[b]
            for codes in O.even_y_settings(i, j):
                for o in range(1 << n):
                    ob = O.bits(o, n)
                    want = s * O.pair_value(codes, ob, i, j)
                    assert estimator_value(target, codes, ob, (i, j)) == pytest.approx(want, abs=1e-12)
                    assert estimator_value(target, codes, ob, (j, i)) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_dicke_coefficients_match_brute_force(n):
    for k in range(n + 1):
        co = dicke_coefficients(n, k)
        assert co.c == O.brute_pair_counts(n, k)
        assert co.S == 0.5 + sum(co.c.values())
        assert list(co.overlaps) == sorted(co.c)


def test_dicke_normaliser_closed_form():
    # 1/2 + number of unordered pairs of weight-k strings
    for n in range(1, 9):
        for k in range(n + 1):
            assert dicke_coefficients(n, k).S == 0.5 + comb(comb(n, k), 2)


@pytest.mark.parametrize("n, k", [(4, 2), (5, 2), (6, 3), (5, 1), (6, 2), (5, 4)])
def test_pair_decoder_is_a_bijection(n, k):
    co = dicke_coefficients(n, k)
    for l, c in co.c.items():
        si, sj, sym = _decode_dicke_pairs(np.arange(c), n, k, l)
        pairs = {frozenset((tuple(a.astype(int)), tuple(b.astype(int)))) for a, b in zip(si, sj)}
        assert len(pairs) == c
        assert np.all(si.sum(1) == k) and np.all(sj.sum(1) == k)
        assert np.all((si & sj).sum(1) == l)
        # the smallest symmetric-difference position belongs to i
        assert np.all(si[np.arange(c), sym[:, 0]])
        np.testing.assert_array_equal(np.sort(sym, axis=1), sym)


def _branch_weights(target):
    weights = Counter()
    for w, codes, _, _ in O.branches(target):
        weights[tuple(codes)] += w
    return weights


@pytest.mark.parametrize("target", [GHZ(3), W(3), Dicke(4, 2), Dicke(5, 3)], ids=str)
def test_sampler_setting_frequencies(target):
    count = 200_000
    state = MeasuredState(_state(target, 1))
    batch = draw_samples(state, target, count, make_rng(2))
    seen = Counter(map(tuple, batch.codes.tolist()))
    want = _branch_weights(target)
    assert set(seen) <= set(want)
    for codes, p in want.items():
        sigma = math.sqrt(p * (1 - p) / count)
        assert abs(seen[codes] / count - p) < 5 * sigma, codes


@pytest.mark.parametrize("target", [GHZ(4), W(4), Dicke(5, 2), Dicke(6, 3)], ids=str)
def test_sampled_settings_have_even_y_on_pair(target):
    batch = draw_samples(_state(target), target, 20_000, make_rng(0))
    off = batch.arm != DIAGONAL
    assert np.all(batch.codes[~off] == 0)
    assert np.all((batch.codes[off] == 2).sum(1) % 2 == 0)
    if isinstance(target, Dicke):
        sym = batch.sup_i[off] ^ batch.sup_j[off]
        np.testing.assert_array_equal(batch.codes[off] != 0, sym)
    if isinstance(target, W):
        nz = batch.codes[off][batch.codes[off] != 0].reshape(-1, 2)
        assert np.all(nz[:, 0] == nz[:, 1])


@pytest.mark.parametrize("target", TARGETS, ids=str)
def test_batch_values_bounded(target):
    batch = draw_samples(_state(target, 3), target, 50_000, make_rng(9))
    assert np.abs(batch.values).max() <= sample_bound(target) * (1 + 1e-12)


def test_dicke_one_equals_w_draw_for_draw():
    for n in (3, 4, 5):
        rho = MeasuredState(_state(W(n), n))
        a = draw_samples(rho, W(n), 5000, make_rng(n))
        b = draw_samples(rho, Dicke(n, 1), 5000, make_rng(n))
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.codes, b.codes)


def test_single_sample_helpers():
    rng = make_rng(0)
    for fn, target, args in [
        (ghz_sample, GHZ(3), ()),
        (w_sample, W(3), ()),
        (dicke_sample, Dicke(4, 2), (dicke_coefficients(4, 2),)),
    ]:
        rho = _state(target)
        for _ in range(20):
            s = fn(rho, *args, rng) if args else fn(rho, rng)
            assert s.value == estimator_value(target, s.setting, s.outcome, s.pair)
            assert all(isinstance(u, LocalUnitary) for u in s.setting)
    s = basis_sample(_state(Basis("01")), "01", rng)
    assert s.value == basis_dfe_estimator("01", s.outcome)


def test_plan_counts():
    eps = ErrorBudget(0.05, 0.05)
    tenth = ErrorBudget(0.1, 0.1)
    assert plan(GHZ(3), eps).N == 1660
    assert plan(W(2), tenth).N == 338
    # 2 ln(20) 15.5^2 / (0.01 * 36) = 3998.47...
    S = 0.5 + sum(O.brute_pair_counts(4, 2).values())
    assert plan(Dicke(4, 2), tenth).N == math.ceil(2 * math.log(20) * S**2 / (0.01 * 36)) == 3999
    assert plan(Basis("0"), tenth).N == math.ceil(math.log(20) / 0.02)
    assert plan(GHZ(3), eps, "pseudocode").N == math.ceil(2 * math.log(40) / 0.0025)
    assert plan(W(4), tenth, "pseudocode").N == math.ceil(2 * math.log(20) * 9 / 0.01)


def test_plan_arms_sum_to_one():
    for target in TARGETS:
        p = plan(target, ErrorBudget(0.1, 0.1))
        assert math.isclose(sum(w for w, _ in p.arms), 1.0)
        assert p.offset == pytest.approx(O.offset(target))


def test_plan_rejects_tiny_targets_and_bad_budgets():
    with pytest.raises(ValueError):
        plan(GHZ(1), ErrorBudget(0.1, 0.1))
    with pytest.raises(ValueError):
        plan(W(1), ErrorBudget(0.1, 0.1))
    with pytest.raises(ValueError):
        ErrorBudget(0, 0.1)
    with pytest.raises(ValueError):
        ErrorBudget(0.1, 1)
    with pytest.raises(ValueError):
        plan(GHZ(2), ErrorBudget(0.1, 0.1), counts="other")


def test_estimate_is_thread_count_independent():
    rho = MeasuredState(random_state_with_fidelity(Dicke(4, 2), 0.7, 1))
    p = plan(Dicke(4, 2), ErrorBudget(0.05, 0.05))
    runs = [estimate(rho, p, 11, n_samples=40_000, threads=t).estimate for t in (1, 2, 8)]
    assert runs[0] == runs[1] == runs[2]
    assert abs(runs[0] - 0.7) < 0.05


def test_estimate_result_fields():
    rho = random_state_with_fidelity(GHZ(2), 1.0, 0)
    res = estimate(rho, plan(GHZ(2), ErrorBudget(0.5, 0.5)), 0)
    assert res.samples_used == plan(GHZ(2), ErrorBudget(0.5, 0.5)).N
    assert 0 <= res.clamped <= 1
    with pytest.raises(ValueError):
        estimate(rho, plan(GHZ(3), ErrorBudget(0.5, 0.5)), 0)
    with pytest.raises(ValueError):
        estimate(rho, plan(GHZ(2), ErrorBudget(0.5, 0.5)), 0, n_samples=0)


@pytest.mark.parametrize("target", [GHZ(3), W(3), Dicke(4, 2), Basis("110")], ids=str)
def test_sample_mean_converges(target):
    rho = MeasuredState(random_state_with_fidelity(target, 0.35, 4))
    res = estimate(rho, plan(target, ErrorBudget(0.1, 0.1)), 3, n_samples=200_000)
    bound = sample_bound(target)
    assert abs(res.estimate - 0.35) < 5 * bound / math.sqrt(200_000)


@pytest.mark.parametrize("target", [GHZ(2), W(3), Dicke(4, 2), Dicke(3, 0), Basis("01")], ids=str)
def test_enumerated_mean_is_fidelity(target):
    rho = _state(target, 8)
    total = 0.0
    for w, codes, pair, _ in O.branches(target):
        p = O.outcome_probs(rho.data, codes)
        total += w * sum(p[o] * estimator_value(target, codes, O.bits(o, target.n), pair) for o in range(1 << target.n))
    assert total + O.offset(target) == pytest.approx(O.fidelity(rho.data, target), abs=1e-12)
