"""Direct fidelity estimation from local Pauli measurements.

Tailored sampling protocols for GHZ, W, Dicke and computational-basis
targets, the importance-sampling and uniform classical-shadow baselines,
and a matched-budget benchmark harness.
"""

from .baseline import (
    BaselineConfig,
    baseline_config,
    baseline_estimate,
    characteristic_table,
    vanilla_shadow_estimate,
)
from .bench import BenchConfig, BenchRecord, aggregate, run_bench
from .linalg import DensityMatrix, LocalUnitary, kron, local_trace_element, validate_density
from .measurement import MeasuredState, OutcomeDistribution, outcome_distribution, sample_outcome, setting
from .shadow import (
    ErrorBudget,
    basis_dfe_estimator,
    compatible_settings,
    dicke_coefficients,
    dicke_sample,
    estimate,
    ghz_sample,
    plan,
    snapshot_matrix_element,
    w_sample,
)
from .states import GHZ, Basis, Dicke, W, fidelity, random_state_with_fidelity, target_density

__version__ = "0.1.0"
