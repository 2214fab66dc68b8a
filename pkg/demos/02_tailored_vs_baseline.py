# Tailored fidelity estimation against the importance-sampling baseline and
# uniform classical shadows, at matched measurement counts.
#
# Run with:  python demos/02_tailored_vs_baseline.py
from shadowdfe import (
    GHZ,
    W,
    BenchConfig,
    ErrorBudget,
    MeasuredState,
    aggregate,
    baseline_config,
    baseline_estimate,
    estimate,
    plan,
    random_state_with_fidelity,
    run_bench,
)
from shadowdfe.rng import make_rng

budget = ErrorBudget(epsilon=0.1, delta=0.1)

# %% A single estimate. The plan fixes the sample count from a Hoeffding bound.
target = W(4)
state = MeasuredState(random_state_with_fidelity(target, 0.6, seed=3))
p = plan(target, budget)
res = estimate(state, p, seed=0)
print(f"W(4): N = {p.N}, bound = {p.bound:.3f}, estimate = {res.estimate:.4f} (true 0.6)")

base = baseline_estimate(state, target, baseline_config(target, budget), make_rng(0))
print(f"baseline: {base.measurements_used} shots, estimate = {base.estimate:.4f}")

# %% Matched-budget MSE over a coarse fidelity grid.
for t in (GHZ(3), W(3)):
    cfg = BenchConfig(t, budget, grid=(0.0, 1.0, 0.1), trials=5, seed=1)
    for g in aggregate(run_bench(cfg)):
        lo, hi = g.ci95
        print(f"{g.target}{g.n} {g.method:>8}: MSE {g.mse:.2e}  95% CI [{lo:.2e}, {hi:.2e}]")
