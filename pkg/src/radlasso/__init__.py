"""Multichannel signal decomposition over rational-dilation wavelet dictionaries.

K simultaneously recorded signals are modeled as one shared low-resonance
component plus channel-specific, jointly sparse high-resonance components.
The decomposition is estimated by a group-lasso regression over two wavelet
dictionaries with different Q-factors, with single-channel lasso, SOMP and
l1/l2 block coordinate descent baselines, synthetic benchmarks, and
theory-driven diagnostics.
"""

from .frame import (
    CoefficientVector,
    DictionaryMatrix,
    FrameSpec,
    analyze,
    frame_matrix,
    frame_spec,
    synthesize,
)
from .model import (
    GroupedDesign,
    ThetaEstimate,
    apply_design,
    group_correlations,
    grouped_design,
    mixed_norm,
)
from .solver import (
    CVResult,
    FitConfig,
    FitResult,
    cv_select,
    fit_group_lasso,
    fit_single_channel,
    lambda_path,
)
from .baselines import SsaProblem, bcd_l1l2, bcd_select, somp, somp_select
from .bench import (
    MetricsReport,
    ScenarioConfig,
    ScenarioDataset,
    generate,
    run_benchmark,
    scenario_design,
    score,
)
from .theory import (
    TheoryReport,
    check_oracle,
    check_proposition,
    estimate_phi,
    lambda0,
)

__version__ = "0.1.0"

LOW_RESONANCE_FRAME = (1, 2, 1, 4)
HIGH_RESONANCE_FRAME = (8, 9, 3, 10)
