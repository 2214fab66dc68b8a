# Local Pauli measurements and the snapshot matrix elements they produce.
#
# Run with:  python demos/01_snapshots_and_local_traces.py
import itertools

import numpy as np

from shadowdfe import LocalUnitary, local_trace_element, snapshot_matrix_element
from shadowdfe.measurement import outcome_distribution, setting
from shadowdfe.states import GHZ, random_state_with_fidelity

# %% One-qubit traces <bra|U^dag|o><o|U|ket> for the three readout rotations.
# The X and Y rows are +-1/2 or +-i/2; Z kills every off-diagonal element.
for u in LocalUnitary:
    row = [local_trace_element(u, a, o, b) for a, o, b in [(0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 1, 0)]]
    print(f"{u.basis}: {row}")

# %% Averaging a diagonal snapshot element over all 3^n settings recovers the
# computational-basis projector: 1 if the outcome equals b, else 0.
n = 2
settings = list(itertools.product(range(3), repeat=n))
for b_hat in itertools.product((0, 1), repeat=n):
    avgs = [sum(snapshot_matrix_element(b, b, s, b_hat) for s in settings).real / len(settings)
            for b in itertools.product((0, 1), repeat=n)]
    print(b_hat, np.round(avgs, 12))

# %% Outcome distributions come from rotating one qubit at a time.
rho = random_state_with_fidelity(GHZ(3), 0.8, seed=1)
for label in ("ZZZ", "XXX", "XYY"):
    print(label, np.round(outcome_distribution(rho, setting(label)).probs, 4))
