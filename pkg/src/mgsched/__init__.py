"""Stochastic day-ahead scheduling for isolated microgrids.

Coordinates uncertain renewable generation with price-based demand response:
a population heuristic commits and dispatches the microgrid under
chance-constrained spinning reserve requirements, an interior point method
solves the users' load-shifting problem, and a real-time pricing loop
couples the two levels.
"""

from .chance import ChanceCheck, achieved_confidence, min_reserve
from .coordinator import (IterationRecord, StrategyResult, Study, prepare_study,
                          run_all, run_strategy, select_final, update_price)
from .demand import DrConfig, UserPlan, build_user_lp, solve_user
from .ipm import IpmConfig, IpmResult, LinearProgram, solve_lp
from .jaya import Candidate, JayaParams, UpperResult, jaya_update, solve_upper
from .microgrid import (DispatchContext, EssConfig, MtUnit, PriceTrack, Schedule,
                        UnrepairableError, Violation, check_feasible,
                        ess_reserve_limit, evaluate_cost, repair, soc_step)
from .scenario import ScenarioConfig, ScenarioError, bundled_scenario_path, load_scenario
from .sequences import (ProbSeq, add_convolve, discretize, el_sequence,
                        expectation, load_sequence, point_mass, pv_sequence,
                        sub_convolve, wt_sequence)
from .stochastic import (LoadModel, PvModel, WtModel, equivalent_load, load_pdf,
                         pv_output_pdf, wt_output_pdf, wt_power_curve)

__version__ = "0.1.0"
