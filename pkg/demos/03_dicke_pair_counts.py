# Pair counts behind the Dicke protocol and the sample counts they imply.
#
# Run with:  python demos/03_dicke_pair_counts.py
from math import comb

from shadowdfe import Dicke, ErrorBudget, dicke_coefficients, plan

budget = ErrorBudget(0.1, 0.1)

# %% c[l] counts unordered pairs of weight-k strings sharing l ones; S = 1/2 + sum c[l].
for n, k in [(4, 1), (4, 2), (6, 3), (8, 4)]:
    co = dicke_coefficients(n, k)
    print(f"n={n} k={k}: c={co.c}  S={co.S}  N={plan(Dicke(n, k), budget).N}")

# %% For k = 1 the normaliser matches the W-state constant: 2S = n^2 - n + 1.
print([2 * dicke_coefficients(n, 1).S == n * n - n + 1 for n in range(2, 9)])

# %% The per-sample bound S / C(n, k) grows roughly like C(n, k) / 2.
for n in range(4, 11, 2):
    co = dicke_coefficients(n, n // 2)
    print(n, round(co.S / comb(n, n // 2), 2))
