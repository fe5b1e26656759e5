"""Budget-aware search over flag-gated system configurations.

Mixed boolean/threshold/categorical flag spaces, noisy pass/fail evaluation
at multiple suite fidelities, warmup-aware target correction, a block
kernel surrogate with safety-filtered hypervolume acquisition, local
Hamming-ball search regions, and telemetry-driven flag pruning.
"""

from .acquisition import (BatchProposal, FrontPoint, ParetoFront, ehvi,
                          hypervolume, hypervolume_gain, safety_filter,
                          select_batch)
from .bruteforce import (TrueOutcome, enumerate_truth, front_hypervolume,
                         safe_outcomes, score_front, true_baseline, true_front)
from .driver import (BudgetError, FrontEntry, LedgerRow, RunConfig, RunResult,
                     build_ledger, load_meta_history, pareto_front,
                     parse_report, report, report_from_history, run,
                     wilson_interval)
from .evaluator import (AdapterError, AdapterProtocolError,
                        AdapterTransportError, BaselineResult,
                        EvaluationRecord, ProcessAdapter, SimSpec,
                        SimulatorAdapter, TaskResult, TaskSuite,
                        baseline_config, evaluate, fidelity_subset, load_sim,
                        load_suite, measure_baseline, parse_sim, parse_suite,
                        sim_truth)
from .space import (Configuration, FlagDef, FlagSpace, SobolDesign,
                    SpaceError, load_space, parse_space, sobol_init)
from .surrogate import (AnovaEntry, CostModel, Surrogate, block_anova, fit,
                        fit_cost_model, gram, kernel, prior_variance)
from .telemetry import (CounterBinding, FlagVerdict, PreflightResult,
                        SilentFinding, TelemetrySnapshot, detect_asymmetry,
                        detect_silent, judge_smoke, parse_bindings,
                        preflight_smoke)
from .trustregion import (BatchOutcome, FreezeAction, TrustRegion,
                          freeze_blocks, init_regions, relax_region,
                          update_region)
from .warmstart import (WarmupModel, apply_correction,
                        counter_logs_from_history, corrected_variance,
                        enabled_warm_flags, fit_warm_curves, invert_warm,
                        observation_variance, warm_fraction)

__version__ = "0.1.0"
