"""Cyber-insurance contract design with coherent risk measures."""

from .casestudy import (
    CaseStudyConfig, monotone_segments, run_coverage_vs_avar_level, run_premium_vs_investment,
)
from .contract import (
    BaselineResult, Contract, InfeasibleContract, NoContractError, ProblemSpec, SolveReport,
    Tolerances, brute_force_bilevel, check_theorem_conditions, compromise_objective,
    feasible_coverage, feasible_premium, insurer_objective, reduced_objective, solve_baseline,
    solve_contract, user_objective,
)
from .distributions import (
    BinomialRansomware, DiscreteDistribution, DomainError, ParameterError,
    ParameterizedLossModel, Tabulated, binomial_model, cdf, check_density_convexity,
    check_fosd, distribution_at, expectation, load_tabulated_csv, tabulated_model,
)
from .risk import (
    AVaR, AbsoluteSemideviation, Expectation, Mixture, RiskMeasureSpec, check_axioms,
    check_dominance_consistency, dual_evaluate_avar, evaluate,
)
from .sensitivity import risk_derivative_dual, risk_derivative_fd, risk_second_derivative_fd

__version__ = "0.1.0"
