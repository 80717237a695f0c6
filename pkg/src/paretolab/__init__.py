"""Monte Carlo laboratory for wealth-exchange economies with Pareto-tailed
wealth distributions.

Two stochastic engines (a mean-field multiplicative process with a reflecting
barrier, and a networked pairwise-exchange market), tail-exponent inference,
and orchestrated experiments: baseline stationarity, conservation of the
log-wealth invariant, government-channel intervention, and thermalization of
coupled subsystems.
"""

from .core import (
    AgentState,
    ConservedQuantity,
    CorrelationParams,
    DomainError,
    InsufficientDataError,
    ParameterError,
    StateError,
    Subsystem,
    SystemAccounts,
    compute_conserved,
    conserved_energy,
    gini,
    pareto_gini,
    record_exchange,
    sample_pareto,
)
from .netgen import (
    Selection,
    SubsystemSpec,
    WeightedNetwork,
    carve_subsystem,
    generate_scale_free,
)
from .dynamics import (
    ExchangeEngine,
    ExchangeParams,
    GovernmentChannel,
    KestenEngine,
    KestenParams,
    MoneyLegRule,
    Redistribution,
    government_step,
    kesten_step,
    target_alpha_to_drift,
    thermalize,
)
from .inference import (
    ParetoFit,
    alpha_from_flows,
    fit_tail,
    hill_estimator,
    monotone_ledger,
    pareto_mle,
    select_xmin,
)
from .experiments import (
    ExperimentReport,
    run_baseline,
    run_conservation,
    run_intervention,
    run_thermalization,
)
from .runio import (
    ConfigError,
    RunConfig,
    emit_plot_data,
    parse_config,
    read_timeseries,
    write_summary,
    write_timeseries,
)

__version__ = "0.1.0"
