"""Domain types, macroscopic accounting, and the conserved log-wealth quantity.

Wealth is always strictly positive and currency-denominated.  The two ledgers
are Omega (cumulative money leg of all exchanges, the model's GDP analogue)
and Lambda (total wealth).  The per-agent invariant is

    E_i = alpha * ln(x_i) - ln(Omega)

which is conserved on average at equilibrium; conservation tests are always
statistical, never pathwise.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class DomainError(ValueError):
    """A value outside its physical domain (e.g. non-positive wealth)."""


class ParameterError(ValueError):
    """A structurally invalid parameter (out of declared range)."""


class StateError(RuntimeError):
    """An operation applied to inconsistent or empty state."""


class InsufficientDataError(ValueError):
    """Too few samples / trajectory points for the requested estimate."""


class Subsystem(Enum):
    CORE = "Core"
    S = "S"
    EXTERNAL = "External"


@dataclass
class AgentState:
    id: int
    wealth: float
    subsystem: Subsystem = Subsystem.CORE

    def __post_init__(self):
        if self.wealth <= 0:
            raise DomainError(f"agent {self.id}: wealth must be > 0, got {self.wealth}")


@dataclass
class SystemAccounts:
    """Macroscopic ledgers.  omega is non-decreasing; n_agents is constant."""
    omega: float
    lam: float
    n_agents: int
    step: int = 0

    def check_ledger(self, wealths):
        lam = float(np.sum(wealths))
        if abs(self.lam - lam) > 1e-9 * abs(lam):
            raise StateError(
                f"ledger drift: lambda={self.lam!r} vs sum(wealth)={lam!r}")


@dataclass
class CorrelationParams:
    """alpha_target in (1, 2]; beta >= 0 held constant within a run."""
    alpha_target: float
    beta: float = 0.0

    def __post_init__(self):
        if not (1.0 < self.alpha_target <= 2.0):
            raise ParameterError(
                f"alpha_target must be in (1, 2], got {self.alpha_target}")
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")


@dataclass
class ConservedQuantity:
    e_per_agent: np.ndarray
    e_total: float
    e_subsystem: float


def record_exchange(accounts, money_leg):
    """Add one money leg to the gross-product ledger.  Mutates and returns."""
    if money_leg < 0:
        raise DomainError(f"money_leg must be >= 0, got {money_leg}")
    accounts.omega += money_leg
    return accounts


def _wealth_array(agents):
    if isinstance(agents, np.ndarray):
        return agents.astype(float, copy=False), None
    if len(agents) and isinstance(agents[0], AgentState):
        w = np.array([a.wealth for a in agents], float)
        mask = np.array([a.subsystem is Subsystem.S for a in agents])
        return w, mask
    return np.asarray(agents, float), None


def conserved_energy(wealths, alpha, omega):
    """E_i = alpha*ln(x_i) - ln(omega) as a vector."""
    return alpha * np.log(wealths) - np.log(omega)


def compute_conserved(agents, alpha, omega, s_mask=None, use_lambda=False,
                      lam=None):
    """Per-agent conserved quantity plus total and subsystem sums.

    `agents` may be a wealth array or a list of AgentState (whose subsystem
    tags define S unless s_mask is given).  use_lambda switches the
    denominator ledger from omega to total wealth, for sensitivity checks
    only.
    """
    w, tag_mask = _wealth_array(agents)
    if w.size == 0:
        raise DomainError("no agents")
    if np.any(w <= 0):
        bad = int(np.argmax(w <= 0))
        raise DomainError(f"agent {bad}: wealth must be > 0, got {w[bad]}")
    denom = (float(np.sum(w)) if lam is None else lam) if use_lambda else omega
    if denom <= 0:
        raise DomainError(f"ledger denominator must be > 0, got {denom}")
    if s_mask is None:
        s_mask = tag_mask
    e = alpha * np.log(w) - np.log(denom)
    e_s = float(e[s_mask].sum()) if s_mask is not None else 0.0
    return ConservedQuantity(e_per_agent=e, e_total=float(e.sum()),
                             e_subsystem=e_s)


def gini(wealths):
    """Gini coefficient by the sorted-rank formula; 0 is perfect equality."""
    x = np.asarray(wealths, float)
    if x.size == 0:
        raise DomainError("gini of empty sample")
    if np.any(x <= 0):
        raise DomainError("gini requires strictly positive wealths")
    xs = np.sort(x)
    n = x.size
    ranks = np.arange(1, n + 1)
    return float(2.0 * np.sum(ranks * xs) / (n * xs.sum()) - (n + 1) / n)


def pareto_gini(alpha):
    """Analytic Gini of a Pareto(alpha) law: 1/(2*alpha - 1)."""
    if alpha <= 1:
        raise ParameterError(f"Pareto Gini needs alpha > 1, got {alpha}")
    return 1.0 / (2.0 * alpha - 1.0)


def sample_pareto(alpha, x_min, size, rng):
    """Inverse-CDF draws: x = x_min * u**(-1/alpha)."""
    if alpha <= 0 or x_min <= 0:
        raise ParameterError("alpha and x_min must be > 0")
    u = rng.random(size)
    return x_min * u ** (-1.0 / alpha)
