"""Inference on panel means with temporal and cross-sectional dependence."""

from .bootstrap import (BootstrapDraws, MultiplierError, MultiplierSpec, bootstrap_heterogeneous,
                        bootstrap_homogeneous, draw_multiplier_matrix, draw_multipliers,
                        gaussian_multiplier_max, gaussian_multiplier_max_unbalanced)
from .cce import CceError, CceFit, CcePanelData, cce_fit, cce_heterogeneity_test, simulate_cce_panel
from .dgp import (Ar1PanelSpec, HdmaSpec, SpecError, bn_decompose, bn_partial_sums, edgeworth_beta3_star,
                  simulate_ar1_panel, simulate_hdma, simulate_unit_root, unit_root_limit, unit_root_moment)
from .grouping import GroupingResult, group_fixed_j, group_panel, select_j
from .harness import (ExperimentConfig, ResultTable, emit_table, mse_bandwidth_experiment, preset_grid,
                      run_experiment, run_grid)
from .homogeneity import (MeanInterval, MeanTest, StageError, TestReport, infer_common_mean, infer_unit_means,
                          q_statistic, test_common_mean, test_homogeneity, test_regression_heterogeneity,
                          test_unit_means)
from .longrun import (BandwidthError, KernelSpec, LongRunMatrix, default_bandwidth, hac_matrix,
                      hac_matrix_unbalanced, kernel_eval, mse_optimal_bandwidth, optimal_bandwidth, psd_sqrt)
from .panel import (SCHEMA_VERSION, DependenceSummary, Panel, PanelError, ParseError, dependence_summary,
                    load_panel, save_panel)

__version__ = "0.1.0"
