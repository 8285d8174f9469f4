"""Expected-utility robo-advisor.

Pipeline: historical ratings -> pairwise questionnaire -> binary choices ->
pessimistic/optimistic/neutral utility elicitation -> expected-utility
portfolio recommendation, plus a simulation harness around all of it.
"""

from .conic import Affine, ConicProgram, SolveResult, SolveSettings, check_feasible, solve
from .elicitation import (
    AnswerSheet,
    BenchmarkSpec,
    ElicitedUtility,
    ScenarioSet,
    answer_violation,
    build_scenarios,
    elicit_neutral,
    elicit_optimistic,
    elicit_pessimistic,
    feasible_answer_slacks,
)
from .errors import (
    AdvisorError,
    ConflictError,
    DomainError,
    InconsistentAnswersError,
    ModelError,
    NotFoundError,
    SingularMatrixError,
    SolverFailureError,
    ValidationError,
)
from .kantorovich import DistanceResult, kantorovich_closed_form, kantorovich_socp
from .lotteries import (
    BreakpointGrid,
    ClosedFormUtility,
    ItemSet,
    Lottery,
    PwlUtility,
    RiskAnalytics,
    build_breakpoints,
    eval_utility,
    expected_utility,
    gini_coefficient,
    refine_to_grid,
    restrict_to_grid,
    risk_aversion,
)
from .portfolio import (
    BacktestConfig,
    BacktestResult,
    Portfolio,
    PortfolioSpec,
    ReturnsPanel,
    direct_objective,
    optimize_portfolio,
    run_backtest,
)
from .questionnaire import (
    LfmConfig,
    LfmModel,
    Questionnaire,
    RatingsMatrix,
    fit_lfm,
    select_pairs_random,
    select_pairs_spq,
    spq_objective,
)
from .simulation import (
    ExperimentReport,
    PreferenceGraph,
    VirtualUser,
    answer_questionnaire,
    build_preference_graph,
    default_scenarios,
    default_virtual_user,
    population_gini,
    run_convergence,
    run_spq_vs_random,
    simulate_rating_matrix,
)

__version__ = "0.1.0"
