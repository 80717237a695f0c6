"""The two stochastic engines: a mean-field multiplicative process with a
reflecting barrier, and a networked pairwise-exchange market, plus the
government channel that degrades exchange quality inside a subsystem and the
thermalization of two coupled systems.

Exchange microdynamic: a link (i,j) is sampled with probability proportional
to its traffic count + 1, a payer side is chosen by fair coin, the payer
sends money leg m = f*x_i and receives product valued gamma*m:

    x_i += gamma*m - m ;  x_j += m ;  Omega += m ;  link weight += m

so total wealth grows by gamma*m per unit m of gross product (the accounting
identity d(sum x) = gamma*dOmega), realizing an effective growth correlation
of 1 + gamma.

Under a government channel, exchanges on links internal to the subsystem S
are taxed: the payer's product return drops to gamma*(1-tax)*m plus
gamma_gov*tax*m from government spending, the receiver keeps (1-tax)*m, and
the tax is pooled and redistributed to S members at the end of each sampling
batch.  The redistribution money legs are counted in Omega (money moves, so
measured gross product inflates even though the product return is degraded).

Link sampling uses exchange *counts* rather than currency weights: sampling
by cumulative currency is a superlinear reinforcement urn and condenses all
traffic onto one link in finite time, whereas count-based reinforcement is a
Friedman urn with a stable limit.  Currency weights are still accumulated on
the links for node-strength accounting and export.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import DomainError, ParameterError, StateError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    njit = None


# ---------------------------------------------------------------------------
# mean-field multiplicative engine


@dataclass
class KestenParams:
    """mu is the arithmetic drift per step; the wealth multiplier is
    exp(mu - sigma^2/2 + sigma*xi) so that the stationary tail exponent of
    the reflected process is alpha = 1 - 2*mu/sigma^2."""
    mu: float
    sigma: float
    x_min: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.mu >= 0:
            raise ParameterError(
                f"mu must be < 0 for a stationary distribution, got {self.mu}")
        if self.x_min <= 0:
            raise ParameterError(f"x_min must be > 0, got {self.x_min}")

    @property
    def alpha(self):
        return 1.0 - 2.0 * self.mu / self.sigma ** 2


def target_alpha_to_drift(alpha, sigma):
    """Drift giving stationary exponent alpha: mu = sigma^2*(1-alpha)/2."""
    if not (1.0 < alpha <= 2.0):
        raise ParameterError(f"alpha must be in (1, 2], got {alpha}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    return sigma ** 2 * (1.0 - alpha) / 2.0


def kesten_step(wealths, params, rng):
    """One synchronous multiplicative step with mirror reflection at the
    barrier.  Returns (new wealths, omega increment).

    The reflection is a mirror (x -> x_min^2/x), not a clamp: clamping piles
    a point mass onto the barrier and visibly distorts the near-barrier
    distribution, while the mirror preserves the stationary Pareto law.
    Omega is incremented by half the total absolute wealth change, counting
    each unit of implied flow once even though it touches two agents.
    """
    x = np.asarray(wealths, float)
    if np.any(x < params.x_min * (1 - 1e-12)):
        raise DomainError("wealth below the reflecting barrier")
    drift = params.mu - 0.5 * params.sigma ** 2
    xi = rng.standard_normal(x.size)
    x_new = x * np.exp(drift + params.sigma * xi)
    low = x_new < params.x_min
    x_new[low] = params.x_min ** 2 / x_new[low]
    d_omega = 0.5 * float(np.sum(np.abs(x_new - x)))
    return x_new, d_omega


class KestenEngine:
    """Owns a wealth population and its ledgers; steps are atomic."""

    def __init__(self, wealths, params, seed, omega0=None):
        self.params = params
        self.x = np.asarray(wealths, float).copy()
        if np.any(self.x < params.x_min):
            raise DomainError("initial wealth below the reflecting barrier")
        self.rng = seed if isinstance(seed, np.random.Generator) \
            else np.random.default_rng(seed)
        self.omega = float(self.x.sum()) if omega0 is None else float(omega0)
        self.step_count = 0

    @property
    def lam(self):
        return float(self.x.sum())

    @property
    def n_agents(self):
        return self.x.size

    def step(self):
        self.x, d_omega = kesten_step(self.x, self.params, self.rng)
        self.omega += d_omega
        self.step_count += 1

    def run(self, steps):
        for _ in range(steps):
            self.step()


# ---------------------------------------------------------------------------
# networked exchange engine


class MoneyLegRule(Enum):
    FIXED_FRACTION = "FixedFraction"
    UNIFORM_FRACTION = "UniformFraction"


class Redistribution(Enum):
    UNIFORM_PER_CAPITA = "UniformPerCapita"
    PROPORTIONAL_TO_WEALTH = "ProportionalToWealth"


@dataclass
class ExchangeParams:
    gamma: float
    f: float = 0.1
    money_leg_rule: MoneyLegRule = MoneyLegRule.FIXED_FRACTION

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ParameterError(f"gamma must be in [0,1], got {self.gamma}")
        if not (0.0 < self.f < 1.0):
            raise ParameterError(f"f must be in (0,1), got {self.f}")


@dataclass
class GovernmentChannel:
    """Taxes exchanges internal to the subsystem and redistributes the pool
    to its members with a (worse) product-return perfection gamma_gov.

    Default redistribution is proportional to wealth: a per-capita transfer
    is itself a powerful equalizer that overwhelms the concentration effect
    of the degraded exchanges, while a wealth-proportional transfer returns
    the pooled money without reshaping relative wealths, isolating the
    channel's exchange-quality effect.
    """
    members: frozenset
    tax_rate: float
    gamma_gov: float
    redistribution: Redistribution = Redistribution.PROPORTIONAL_TO_WEALTH

    def __post_init__(self):
        if not (0.0 <= self.tax_rate < 1.0):
            raise ParameterError(f"tax_rate must be in [0,1), got {self.tax_rate}")
        if not (0.0 <= self.gamma_gov < 1.0):
            raise ParameterError(f"gamma_gov must be in [0,1), got {self.gamma_gov}")
        if not self.members:
            raise ParameterError("government member set is empty")
        self.members = frozenset(int(i) for i in self.members)


def _exchange_kernel(x, w, t, eu, ev, gamma_link, group, agent_group, gov,
                     links, sides, fracs, tax, g_gov, m_out, acc, agent_acc):
    """Inner loop over one batch of exchanges.  acc layout:
    [0] global log-wealth gain, [1] global currency gain, then per tracked
    link group g: [2+3g] ledger omega_g, [3+3g] log gain, [4+3g] currency
    gain.  agent_acc accumulates log-wealth gains per tracked agent group
    (attribution by which agent's wealth moved, so cross-group exchanges
    are included).  Returns the tax pool collected in this batch."""
    pool = 0.0
    for k in range(links.shape[0]):
        l = links[k]
        if sides[k]:
            i = eu[l]
            j = ev[l]
        else:
            i = ev[l]
            j = eu[l]
        m = fracs[k] * x[i]
        g = gamma_link[l]
        if gov[l]:
            keep = (1.0 - tax) * m
            xi_new = x[i] + g * keep + g_gov * (tax * m) - m
            xj_new = x[j] + keep
            pool += tax * m
        else:
            xi_new = x[i] + g * m - m
            xj_new = x[j] + m
        dlog_i = math.log(xi_new) - math.log(x[i])
        dlog_j = math.log(xj_new) - math.log(x[j])
        acc[0] += dlog_i + dlog_j
        acc[1] += (xi_new - x[i]) + (xj_new - x[j])
        gi = group[l]
        if gi >= 0:
            acc[2 + 3 * gi] += m
            acc[3 + 3 * gi] += dlog_i + dlog_j
            acc[4 + 3 * gi] += (xi_new - x[i]) + (xj_new - x[j])
        ai = agent_group[i]
        if ai >= 0:
            agent_acc[ai] += dlog_i
        aj = agent_group[j]
        if aj >= 0:
            agent_acc[aj] += dlog_j
        x[i] = xi_new
        x[j] = xj_new
        w[l] += m
        t[l] += 1.0
        m_out[k] = m
    return pool


if njit is not None:
    _exchange_kernel = njit(cache=True)(_exchange_kernel)


class ExchangeEngine:
    """Owns the network, the wealth vector, the ledgers, and the rng.

    `link_group` optionally tags links with a tracked-ledger index (>= 0);
    -1 means untracked.  Each tracked group accumulates its own money-leg
    ledger plus the log-wealth and currency gains its exchanges caused,
    which is what the subsystem flow measurements regress on.
    """

    def __init__(self, network, wealths, params, seed, omega0=None,
                 channel=None, gamma_link=None, link_group=None,
                 group_members=None, agent_groups=None):
        self.net = network
        self.params = params
        self.x = np.asarray(wealths, float).copy()
        if np.any(self.x <= 0):
            raise DomainError("wealths must be strictly positive")
        if network.n_edges == 0:
            raise StateError("empty network")
        if self.x.size != network.n_nodes:
            raise StateError("wealth vector does not match the network")
        self.rng = seed if isinstance(seed, np.random.Generator) \
            else np.random.default_rng(seed)
        self.traffic = np.zeros(network.n_edges)
        self.gamma_link = (np.full(network.n_edges, params.gamma)
                           if gamma_link is None
                           else np.asarray(gamma_link, float).copy())
        self.channel = channel
        gov = np.zeros(network.n_edges, dtype=bool)
        self._member_idx = None
        if channel is not None:
            members = np.zeros(network.n_nodes, dtype=bool)
            members[sorted(channel.members)] = True
            if members.all():
                raise ParameterError("government covers the whole system")
            s_internal = members[network.eu] & members[network.ev]
            if channel.tax_rate > 0:
                gov = s_internal
            self._member_idx = np.flatnonzero(members)
        self.gov_link = gov
        self.link_group = (np.full(network.n_edges, -1, dtype=np.int64)
                           if link_group is None
                           else np.asarray(link_group, np.int64).copy())
        self.n_groups = int(self.link_group.max()) + 1 \
            if self.link_group.size and self.link_group.max() >= 0 else 0
        self.group_members = [np.asarray(g, np.int64)
                              for g in (group_members or [])]
        if len(self.group_members) != self.n_groups:
            raise ParameterError("group_members must match tagged link groups")
        self.acc = np.zeros(2 + 3 * self.n_groups)
        self.agent_groups = [np.asarray(g, np.int64)
                             for g in (agent_groups or [])]
        self.agent_group = np.full(network.n_nodes, -1, dtype=np.int64)
        for gi, idx in enumerate(self.agent_groups):
            self.agent_group[idx] = gi
        self.agent_acc = np.zeros(max(len(self.agent_groups), 1))
        self.lam = float(self.x.sum())
        gamma = params.gamma
        if omega0 is None:
            # ledger-consistent start: Omega0 such that Lambda = gamma*(1+gamma)*Omega0,
            # the steady proportion the accounting identity drives the system toward
            omega0 = self.lam / (gamma * (1.0 + gamma)) if gamma > 0 else self.lam
        self.omega = float(omega0)
        self._omega_init = self.omega
        self.exchanges_done = 0

    # -- batching ----------------------------------------------------------

    def _draw_batch(self, b):
        p = self.traffic + 1.0
        p /= p.sum()
        links = self.rng.choice(self.net.n_edges, size=b, p=p)
        sides = self.rng.random(b) < 0.5
        if self.params.money_leg_rule is MoneyLegRule.UNIFORM_FRACTION:
            fracs = self.params.f * self.rng.random(b)
        else:
            fracs = np.full(b, self.params.f)
        return links, sides, fracs

    def _redistribute(self, pool):
        ch = self.channel
        idx = self._member_idx
        xs = self.x[idx]
        lam_s = xs.sum()
        if ch.redistribution is Redistribution.PROPORTIONAL_TO_WEALTH:
            scale = 1.0 + pool / lam_s
            self.x[idx] = xs * scale
            dlog_each = np.full(idx.size, math.log(scale))
        else:
            x_new = xs + pool / idx.size
            self.x[idx] = x_new
            dlog_each = np.log(x_new) - np.log(xs)
        dlog = float(dlog_each.sum())
        if self.agent_groups:
            ag = self.agent_group[idx]
            tracked = ag >= 0
            np.add.at(self.agent_acc, ag[tracked], dlog_each[tracked])
        self.acc[0] += dlog
        self.acc[1] += pool
        self.omega += pool  # the redistribution money legs count as product
        if self.n_groups:
            # the government pool always belongs to the S-internal ledger,
            # which by convention is the last tracked group
            gi = self.n_groups - 1
            self.acc[2 + 3 * gi] += pool
            self.acc[3 + 3 * gi] += dlog
            self.acc[4 + 3 * gi] += pool

    def _execute(self, links, sides, fracs):
        """Run the kernel on pre-drawn exchanges; returns (money legs, pool)."""
        m_out = np.empty(links.size)
        pool = _exchange_kernel(
            self.x, self.net.weights, self.traffic, self.net.eu, self.net.ev,
            self.gamma_link, self.link_group, self.agent_group, self.gov_link,
            links, sides, fracs,
            self.channel.tax_rate if self.channel else 0.0,
            self.channel.gamma_gov if self.channel else 0.0, m_out, self.acc,
            self.agent_acc)
        self.omega += float(m_out.sum())
        self.exchanges_done += links.size
        return m_out, pool

    def run_batch(self, b):
        links, sides, fracs = self._draw_batch(b)
        m_out, pool = self._execute(links, sides, fracs)
        if pool > 0.0:
            self._redistribute(pool)
        self.lam = float(self.x.sum())
        return m_out

    def run(self, n_exchanges, batch=2048):
        done = 0
        while done < n_exchanges:
            b = min(batch, n_exchanges - done)
            self.run_batch(b)
            done += b

    def exchange_step(self):
        """A single exchange (batch of one); returns its money leg."""
        return float(self.run_batch(1)[0])

    # -- flow measurement --------------------------------------------------

    def measure_flow_window(self, width=0.6, npoints=60, gamma_eff=None,
                            groups=None, agent_series=None,
                            max_exchanges=50_000_000):
        """Advance the engine through a measurement window of `width` in
        log gross product, sampling trajectories at (approximately) equal
        log-ledger increments; batch sizes adapt so sampling lands close to
        each threshold even when single money legs are large.

        Each measured series gets its own fresh ledger, initialized to the
        centered consistency value Omega_0 = Lambda/(g*(1 + g*exp(width/2)))
        so that the ledger-to-wealth proportion crosses its steady value at
        the middle of the window; without the centering the regression slope
        is biased toward 1 on long windows.  Returns a dict with key None
        for the whole system and the group index for each tracked group;
        values are lists of (mean log wealth, log ledger) pairs.

        `agent_series` lists tracked agent-group indices whose mean log
        wealth (all exchanges touching those agents, cross trades included)
        is recorded against the *whole-system* ledger — the instrument for
        how tightly a set of agents is coupled to total gross product.
        Those series appear under key ("agents", gi).
        """
        specs = {}
        g_all = self.params.gamma if gamma_eff is None else gamma_eff
        if g_all <= 0:
            raise ParameterError("flow window needs effective gamma > 0")
        specs[None] = (g_all, self.x.size, float(np.mean(np.log(self.x))),
                       self.lam)
        for gi in (groups or []):
            idx = self.group_members[gi]
            g_g = self._group_gamma_eff(gi)
            specs[gi] = (g_g, idx.size, float(np.mean(np.log(self.x[idx]))),
                         float(self.x[idx].sum()))
        omega0, base_log, base_omega = {}, {}, {}
        series = {k: [] for k in specs}
        for k, (g, n_mem, mln0, lam0) in specs.items():
            omega0[k] = lam0 / (g * (1.0 + g * np.exp(width / 2.0)))
            base_log[k] = self.acc[0] if k is None else self.acc[3 + 3 * k]
            base_omega[k] = 0.0 if k is None else self.acc[2 + 3 * k]
            series[k].append((mln0, np.log(omega0[k])))
        agent_specs = {}
        for gi in (agent_series or []):
            idx = self.agent_groups[gi]
            agent_specs[gi] = (idx.size, float(np.mean(np.log(self.x[idx]))),
                               self.agent_acc[gi])
            series[("agents", gi)] = [(agent_specs[gi][1],
                                       np.log(omega0[None]))]
        omega_global0 = self.omega

        def local_omega():
            return omega0[None] + (self.omega - omega_global0)

        def record():
            for k, (g, n_mem, mln0, lam0) in specs.items():
                if k is None:
                    d_omega = self.omega - omega_global0
                    d_log = self.acc[0] - base_log[k]
                else:
                    d_omega = self.acc[2 + 3 * k] - base_omega[k]
                    d_log = self.acc[3 + 3 * k] - base_log[k]
                series[k].append((mln0 + d_log / n_mem,
                                  np.log(omega0[k] + d_omega)))
            ln_union = np.log(local_omega())
            for gi, (n_mem, mln0, acc0) in agent_specs.items():
                series[("agents", gi)].append(
                    (mln0 + (self.agent_acc[gi] - acc0) / n_mem, ln_union))

        # the sampling probabilities are frozen over full-size batches, the
        # same cadence as plain runs, while recording lands on the ledger
        # thresholds by consuming each frozen batch in adaptive chunks
        spacing = width / npoints
        m_bar = 2.0 * self.params.f * self.lam / self.x.size
        thr = omega0[None] * np.exp(spacing)
        done = 0
        batch = 2048
        while done < max_exchanges and \
                np.log(local_omega() / omega0[None]) < width:
            links, sides, fracs = self._draw_batch(batch)
            pos, pool = 0, 0.0
            while pos < batch:
                gap = thr - local_omega()
                c = int(min(max(gap / m_bar, 1), batch - pos))
                m_out, p = self._execute(links[pos:pos + c],
                                         sides[pos:pos + c],
                                         fracs[pos:pos + c])
                pool += p
                pos += c
                done += c
                m_bar = 0.5 * m_bar + 0.5 * float(m_out.mean())
                if local_omega() >= thr:
                    record()
                    thr *= np.exp(spacing)
                    if np.log(local_omega() / omega0[None]) >= width:
                        break
            if pool > 0.0:
                self._redistribute(pool)
            self.lam = float(self.x.sum())
        return series

    def _group_gamma_eff(self, gi):
        """Effective gamma of a tracked group from its own accounting; falls
        back to the engine gamma before the group has carried any money."""
        d_omega = self.acc[2 + 3 * gi]
        if d_omega <= 0:
            return self.params.gamma
        return max(self.acc[4 + 3 * gi] / d_omega, 1e-3)

    def gamma_eff_global(self):
        """Run-cumulative effective gamma from d(sum x) = gamma_eff*dOmega."""
        traded = self.omega - self._omega_init
        if traded <= 0:
            return self.params.gamma
        return self.acc[1] / traded


def government_step(engine):
    """One taxed exchange on a subsystem-internal link, with the collected
    tax redistributed immediately.  With tax_rate=0 this is arithmetic-
    identical to an ordinary exchange restricted to the subsystem."""
    if engine.channel is None:
        raise ParameterError("engine has no government channel")
    members = np.zeros(engine.net.n_nodes, dtype=bool)
    members[sorted(engine.channel.members)] = True
    internal = np.flatnonzero(members[engine.net.eu] & members[engine.net.ev])
    if internal.size == 0:
        raise StateError("no links internal to the subsystem")
    p = engine.traffic[internal] + 1.0
    p /= p.sum()
    link = int(internal[engine.rng.choice(internal.size, p=p)])
    side = bool(engine.rng.random() < 0.5)
    if engine.params.money_leg_rule is MoneyLegRule.UNIFORM_FRACTION:
        frac = engine.params.f * float(engine.rng.random())
    else:
        frac = engine.params.f
    m_out = np.empty(1)
    pool = _exchange_kernel(
        engine.x, engine.net.weights, engine.traffic, engine.net.eu,
        engine.net.ev, engine.gamma_link, engine.link_group,
        engine.agent_group, engine.gov_link, np.array([link]),
        np.array([side]), np.array([frac]), engine.channel.tax_rate,
        engine.channel.gamma_gov, m_out, engine.acc, engine.agent_acc)
    engine.omega += float(m_out[0])
    if pool > 0.0:
        engine._redistribute(pool)
    engine.lam = float(engine.x.sum())
    engine.exchanges_done += 1
    return float(m_out[0])


# ---------------------------------------------------------------------------
# thermalization


def thermalize(system_a, system_b, coupling, steps, rng, checkpoints=6,
               window=0.4, npoints=60):
    """Join two burned-in exchange systems with `coupling` random cross-links
    and run the joint dynamics, returning flow-measured exponent trajectories
    for each side and for the union.

    Wealths are rescaled to unit mean on both sides at the join (a common-
    currency re-basing; the higher-gamma system has grown exponentially
    faster during burn-in and would otherwise dwarf the other in every
    money-weighted quantity).  Cross-links carry the arithmetic mean of the
    two gammas.

    After the join the two sides share a single gross-product ledger, so
    each side's exponent is measured as the response of its mean log wealth
    (all its exchanges, cross trades included) to the *union* ledger — the
    coupling the exponent quantifies.  Both sides are driven toward a common
    intermediate value as the joint flows equilibrate.  Returns a dict with
    'alpha_a', 'alpha_b', 'alpha_union' trajectories of (exchanges,
    alpha_hat, stderr) and the joint engine.
    """
    from .inference import alpha_from_flows, monotone_ledger

    if coupling < 1:
        raise ParameterError("coupling must be >= 1")
    n_a, n_b = system_a.x.size, system_b.x.size
    net_a, net_b = system_a.net, system_b.net
    x = np.concatenate([system_a.x / system_a.x.mean(),
                        system_b.x / system_b.x.mean()])
    cross_a = rng.integers(0, n_a, size=coupling)
    cross_b = rng.integers(0, n_b, size=coupling) + n_a
    eu = np.concatenate([net_a.eu, net_b.eu + n_a, cross_a])
    ev = np.concatenate([net_a.ev, net_b.ev + n_a, cross_b])
    ga, gb = system_a.params.gamma, system_b.params.gamma
    gamma_link = np.concatenate([
        np.full(net_a.n_edges, ga), np.full(net_b.n_edges, gb),
        np.full(coupling, 0.5 * (ga + gb))])
    # carry the burn-in traffic so the joint sampling keeps the established
    # trade patterns; the new cross-links open at the mean internal traffic
    # count, else the reinforcement sampling would starve them (a fresh link
    # competes against links with millions of accumulated exchanges)
    internal = np.concatenate([system_a.traffic, system_b.traffic])
    traffic = np.concatenate([internal,
                              np.full(coupling, internal.mean())])
    from .netgen import WeightedNetwork
    net = WeightedNetwork(eu=eu, ev=ev, weights=np.zeros(eu.size),
                          n_nodes=n_a + n_b)
    params = ExchangeParams(gamma=0.5 * (ga + gb), f=system_a.params.f,
                            money_leg_rule=system_a.params.money_leg_rule)
    engine = ExchangeEngine(net, x, params, rng, gamma_link=gamma_link,
                            agent_groups=[np.arange(n_a),
                                          np.arange(n_a, n_a + n_b)])
    engine.traffic = traffic
    traj = {"alpha_a": [], "alpha_b": [], "alpha_union": []}
    seg = max(steps // checkpoints, 1)
    for _ in range(checkpoints):
        lam0, om0 = engine.lam, engine.omega
        engine.run(seg)
        # effective exchange perfection of the joint system over the last
        # segment, from the exact accounting d(sum x) = gamma_eff * dOmega
        g_eff = min(max((engine.lam - lam0) / (engine.omega - om0), 0.05), 1.0)
        series = engine.measure_flow_window(width=window, npoints=npoints,
                                            gamma_eff=g_eff,
                                            agent_series=[0, 1])
        for key, name in ((None, "alpha_union"), (("agents", 0), "alpha_a"),
                          (("agents", 1), "alpha_b")):
            pts = monotone_ledger(series[key])
            if len(pts) >= 31:
                a_hat, se = alpha_from_flows(pts)
                traj[name].append((engine.exchanges_done, a_hat, se))
    return {"trajectories": traj, "engine": engine}
