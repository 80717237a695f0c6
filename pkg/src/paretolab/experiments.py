"""The four named experiments — baseline stationarity, conservation of the
log-wealth invariant, government intervention, thermalization — each pairing
runs and reducing them to named verdicts.

Verdicts are dicts with a status in {PASS, FAIL, NOT-RUN, NOT-APPLICABLE}
plus the measured value, the tolerance applied, and the replica count, so a
report is self-describing.  Every intervention verdict is computed against a
same-seed paired control, never against an analytic baseline alone.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (compute_conserved, gini, sample_pareto)
from .netgen import (Selection, SubsystemSpec, WeightedNetwork,
                     carve_subsystem, generate_scale_free)
from .dynamics import (ExchangeEngine, ExchangeParams, GovernmentChannel,
                       KestenEngine, KestenParams, Redistribution,
                       target_alpha_to_drift, thermalize)
from .inference import (alpha_from_flows, monotone_ledger, pareto_mle,
                        select_xmin)

TIMESERIES_FIELDS = ("step", "omega", "lambda", "alpha_global", "alpha_s",
                     "e_total", "e_s", "gini_global", "gini_s")


@dataclass
class ExperimentReport:
    experiment: str
    config_digest: str
    seeds: list
    trajectories: list = field(default_factory=list)  # rows of 9 floats
    verdicts: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)


def _verdict(status, value=None, tolerance=None, replicas=None, note=None):
    return {"status": status, "value": value, "tolerance": tolerance,
            "replicas": replicas, "note": note}


def _row(step, omega, lam, alpha_g=math.nan, alpha_s=math.nan,
         e_total=math.nan, e_s=math.nan, gini_g=math.nan, gini_s=math.nan):
    return (float(step), float(omega), float(lam), float(alpha_g),
            float(alpha_s), float(e_total), float(e_s), float(gini_g),
            float(gini_s))


def _fit_dict(fit):
    return {"alpha_hat": fit.alpha_hat, "x_min": fit.x_min,
            "stderr": fit.stderr, "ks_distance": fit.ks_distance,
            "n_tail": fit.n_tail}


# ---------------------------------------------------------------------------
# baseline


def _kesten_from_config(config, seed):
    k = config.kesten
    params = KestenParams(
        mu=target_alpha_to_drift(k["alpha_target"], k["sigma"]),
        sigma=k["sigma"], x_min=k["x_min"])
    rng = np.random.default_rng(seed)
    # warm start at the target law, then burn in to wash out the start
    x0 = sample_pareto(k["alpha_target"], k["x_min"], config.n_agents, rng)
    return KestenEngine(x0, params, rng)


def _exchange_from_config(config, seed, wealths=None, **kw):
    e = config.exchange
    net = generate_scale_free(config.n_agents, config.network["m"],
                              config.seed)
    x = np.ones(config.n_agents) if wealths is None else wealths
    return ExchangeEngine(net, x, ExchangeParams(gamma=e["gamma"], f=e["f"]),
                          seed, **kw)


def run_baseline(config):
    """Burn in one engine, sample the wealth trajectory, and check that the
    measured tail exponent recovers its configured target."""
    report = ExperimentReport("baseline", config.digest, [config.seed])
    if config.steps == 0:
        for name in ("alpha_recovery", "ks_fit", "flow_alpha", "gini_band"):
            report.verdicts[name] = _verdict(
                "NOT-RUN", note="zero measurement steps")
        return report

    if config.engine == "kesten":
        alpha_t = config.kesten["alpha_target"]
        eng = _kesten_from_config(config, config.seed)
        eng.run(config.burn_in)
        x_min = config.kesten["x_min"]
        for s in range(0, config.steps, config.stride):
            eng.run(min(config.stride, config.steps - s))
            fit = pareto_mle(eng.x, x_min)
            e = compute_conserved(eng.x, alpha_t, eng.omega)
            report.trajectories.append(_row(
                eng.step_count, eng.omega, eng.lam, fit.alpha_hat,
                e_total=e.e_total, gini_g=gini(eng.x)))
        # the final fit starts at the KS-selected tail onset: discrete steps
        # leave a boundary layer above the barrier that a fixed-threshold
        # fit mistakes for lack of fit
        fit = pareto_mle(eng.x, select_xmin(eng.x))
        report.details["fit"] = _fit_dict(fit)
        ks_crit = 1.63 / math.sqrt(fit.n_tail)  # 1% point of the KS law
        report.verdicts["alpha_recovery"] = _verdict(
            "PASS" if abs(fit.alpha_hat - alpha_t) <= 0.05 else "FAIL",
            value=fit.alpha_hat, tolerance=f"|alpha_hat - {alpha_t}| <= 0.05",
            replicas=1)
        report.verdicts["ks_fit"] = _verdict(
            "PASS" if fit.ks_distance < ks_crit else "FAIL",
            value=fit.ks_distance, tolerance=f"KS < {ks_crit:.4g} (1% level)",
            replicas=1)
        return report

    # exchange engine
    gamma = config.exchange["gamma"]
    eng = _exchange_from_config(config, config.seed)
    eng.run(config.burn_in)
    alpha_eff = 1.0 + gamma
    x_min = select_xmin(eng.x)
    for s in range(0, config.steps, config.stride):
        eng.run(min(config.stride, config.steps - s))
        fit = pareto_mle(eng.x, x_min)
        e = compute_conserved(eng.x, alpha_eff, eng.omega)
        report.trajectories.append(_row(
            eng.exchanges_done, eng.omega, eng.lam, fit.alpha_hat,
            e_total=e.e_total, gini_g=gini(eng.x)))
    a_flow, se_flow = alpha_from_flows(
        monotone_ledger(eng.measure_flow_window(width=0.6)[None]))
    g = gini(eng.x)
    report.details["flow_alpha"] = {"alpha_hat": a_flow, "stderr": se_flow}
    report.details["gini"] = g
    report.verdicts["flow_alpha"] = _verdict(
        "PASS" if abs(a_flow - alpha_eff) <= 0.1 else "FAIL", value=a_flow,
        tolerance=f"|alpha_hat - {alpha_eff}| <= 0.1", replicas=1)
    # the static wealth distribution of the exchange market concentrates
    # harder than the i.i.d. Pareto law at the flow exponent; the band is
    # checked and reported as measured
    lo, hi = 0.30, 0.37
    report.verdicts["gini_band"] = _verdict(
        "PASS" if lo <= g <= hi else "FAIL", value=g,
        tolerance=f"gini in [{lo}, {hi}]", replicas=1,
        note="band for the i.i.d. Pareto law at the flow exponent")
    return report


# ---------------------------------------------------------------------------
# conservation


def run_conservation(config):
    """Per-stride changes of the summed invariant on stationary runs: the
    mean change must vanish within 3 standard errors, replica by replica."""
    report = ExperimentReport("conservation", config.digest,
                              [config.seed + r for r in range(config.replicas)])
    n_strides = config.steps // config.stride
    if n_strides < 2:
        report.verdicts["conservation"] = _verdict(
            "NOT-RUN", note=f"{n_strides} stride(s), need >= 2")
        return report
    alpha_t = config.kesten["alpha_target"]
    passed, drifts = 0, []
    for r, seed in enumerate(report.seeds):
        eng = _kesten_from_config(config, seed)
        eng.run(config.burn_in)
        e_prev = compute_conserved(eng.x, alpha_t, eng.omega).e_total
        deltas = np.empty(n_strides)
        for s in range(n_strides):
            eng.run(config.stride)
            e_now = compute_conserved(eng.x, alpha_t, eng.omega).e_total
            deltas[s] = e_now - e_prev
            e_prev = e_now
            if r == 0:
                report.trajectories.append(_row(
                    eng.step_count, eng.omega, eng.lam,
                    pareto_mle(eng.x, config.kesten["x_min"]).alpha_hat,
                    e_total=e_now, gini_g=gini(eng.x)))
        se = deltas.std(ddof=1) / math.sqrt(n_strides)
        drift = deltas.mean()
        drifts.append({"seed": seed, "mean_delta_e": drift, "stderr": se,
                       "pass": bool(abs(drift) <= 3 * se)})
        passed += abs(drift) <= 3 * se
    frac = passed / config.replicas
    report.details["replicas"] = drifts
    report.verdicts["conservation"] = _verdict(
        "PASS" if frac >= 0.95 else "FAIL", value=frac,
        tolerance="|mean dE| <= 3*stderr in >= 95% of replicas",
        replicas=config.replicas,
        note="burn-in skipped => expected FAIL (drift is the signal)"
        if config.burn_in == 0 else None)
    return report


# ---------------------------------------------------------------------------
# intervention


def _intervention_arm(config, net, x0, w0, t0, om0, s_idx, tax, gamma_gov,
                      seed, redistribution, collect_rows=False):
    """One arm of a paired run: same pre-carved state and same arm seed, so
    the tax=0 control differs from a treatment only through the channel."""
    n = config.n_agents
    gamma = config.exchange["gamma"]
    arm_net = WeightedNetwork(eu=net.eu, ev=net.ev, weights=w0.copy(),
                              n_nodes=n)
    s_mask = np.zeros(n, bool)
    s_mask[s_idx] = True
    link_group = np.where(s_mask[net.eu] & s_mask[net.ev], 0, -1)
    ch = GovernmentChannel(frozenset(int(i) for i in s_idx), tax, gamma_gov,
                           Redistribution(redistribution))
    eng = ExchangeEngine(arm_net, x0, ExchangeParams(gamma=gamma,
                                                     f=config.exchange["f"]),
                         np.random.default_rng(seed), omega0=om0, channel=ch,
                         link_group=link_group.astype(np.int64),
                         group_members=[np.asarray(s_idx)])
    eng.traffic = t0.copy()
    alpha_ref = 1.0 + gamma  # global accounting exponent, the headline choice
    ln_s0 = float(np.log(eng.x[s_idx]).sum())
    es0 = alpha_ref * ln_s0 - s_idx.size * math.log(eng.omega)
    segments = max(config.steps // config.stride, 1)
    ginis, rows = [], []
    x_min_s = None
    for _ in range(segments):
        eng.run(config.stride)
        ginis.append(gini(eng.x[s_idx]))
        if collect_rows:
            if x_min_s is None:
                x_min = select_xmin(eng.x)
                x_min_s = select_xmin(eng.x[s_idx])
            e = compute_conserved(eng.x, alpha_ref, eng.omega, s_mask=s_mask)
            rows.append(_row(
                eng.exchanges_done, eng.omega, eng.lam,
                pareto_mle(eng.x, x_min).alpha_hat,
                pareto_mle(eng.x[s_idx], x_min_s).alpha_hat,
                e.e_total, e.e_subsystem, gini(eng.x), ginis[-1]))
    ln_s1 = float(np.log(eng.x[s_idx]).sum())
    es1 = alpha_ref * ln_s1 - s_idx.size * math.log(eng.omega)
    series = monotone_ledger(
        eng.measure_flow_window(width=0.5, npoints=80, groups=[0])[0])
    a_s, se_s = alpha_from_flows(series, min_points=25)
    return {"des": es1 - es0,
            "dlns": ln_s1 - ln_s0,
            "dlnomega": math.log(eng.omega) - math.log(om0),
            "gini": float(np.mean(ginis[len(ginis) // 2:])),
            "alpha_s": a_s, "se_s": se_s, "rows": rows}


def run_intervention(config, channel=None):
    """Paired-control intervention on one (tax_rate, gamma_gov) cell.

    Every replica burns in an untouched market, carves S, then runs a
    control (tax=0) and a treatment from the identical snapshot with the
    identical arm seed; all deltas are treatment minus control.
    """
    ch_cfg = dict(config.channel)
    if channel is not None:
        ch_cfg["tax_rate"] = channel.tax_rate
        ch_cfg["gamma_gov"] = channel.gamma_gov
        ch_cfg["redistribution"] = channel.redistribution.value
    tax, g_gov = ch_cfg["tax_rate"], ch_cfg["gamma_gov"]
    report = ExperimentReport("intervention", config.digest,
                              [config.seed + r for r in range(config.replicas)])
    report.details["cell"] = {"tax_rate": tax, "gamma_gov": g_gov,
                              "gamma": config.exchange["gamma"]}
    rows_out = []
    per_seed = []
    for r, seed in enumerate(report.seeds):
        eng = _exchange_from_config(config, seed)
        eng.run(config.burn_in)
        x0, w0 = eng.x.copy(), eng.net.weights.copy()
        t0, om0 = eng.traffic.copy(), eng.omega
        s_idx = np.array(sorted(carve_subsystem(
            eng.net,
            SubsystemSpec(Selection(ch_cfg["selection"]),
                          ch_cfg["fraction"]),
            seed + 100)))
        ctrl = _intervention_arm(config, eng.net, x0, w0, t0, om0, s_idx,
                                 0.0, 0.0, seed * 10,
                                 ch_cfg["redistribution"])
        treat = _intervention_arm(config, eng.net, x0, w0, t0, om0, s_idx,
                                  tax, g_gov, seed * 10,
                                  ch_cfg["redistribution"],
                                  collect_rows=(r == 0))
        if r == 0:
            rows_out = treat["rows"]
        # the invariant change with the subsystem's own measured exponent,
        # reported alongside the headline global-exponent column
        des_sub = (treat["alpha_s"] * treat["dlns"]
                   - ctrl["alpha_s"] * ctrl["dlns"]) \
            - s_idx.size * (treat["dlnomega"] - ctrl["dlnomega"])
        per_seed.append({
            "seed": seed,
            "des_global": treat["des"] - ctrl["des"],
            "des_subsystem_alpha": des_sub,
            "dgini_s": treat["gini"] - ctrl["gini"],
            "dalpha_s": treat["alpha_s"] - ctrl["alpha_s"],
            "alpha_s_treat": treat["alpha_s"],
            "alpha_s_ctrl": ctrl["alpha_s"],
            "se_joint": math.hypot(treat["se_s"], ctrl["se_s"])})
    report.trajectories = rows_out
    report.details["per_seed"] = per_seed
    n = config.replicas
    des = np.array([p["des_global"] for p in per_seed])
    dgini = np.array([p["dgini_s"] for p in per_seed])
    dalpha = np.array([p["dalpha_s"] for p in per_seed])
    need = math.ceil(0.8 * n)
    if tax == 0.0:
        # null cell: treatment and control are the same arithmetic, so the
        # deltas must be identically zero, well inside any noise band
        ok = bool(np.all(des == 0.0) and np.all(dgini == 0.0)
                  and np.all(dalpha == 0.0))
        report.verdicts["null_within_noise"] = _verdict(
            "PASS" if ok else "FAIL", value=float(np.abs(des).max()),
            tolerance="all deltas within 2 sigma of zero", replicas=n)
        return report
    report.verdicts["eq_direction"] = _verdict(
        "PASS" if int((des < 0).sum()) >= need else "FAIL",
        value=int((des < 0).sum()), tolerance=f">= {need}/{n} with dE_S < 0",
        replicas=n)
    report.verdicts["alpha_degradation"] = _verdict(
        "PASS" if int((dalpha < 0).sum()) >= need else "FAIL",
        value=int((dalpha < 0).sum()),
        tolerance=f">= {need}/{n} with alpha_S,treat < alpha_S,ctrl",
        replicas=n)
    need_g = math.ceil(0.7 * n)
    report.verdicts["equality_degradation"] = _verdict(
        "PASS" if int((dgini > 0).sum()) >= need_g else "FAIL",
        value=int((dgini > 0).sum()),
        tolerance=f">= {need_g}/{n} with Gini_S rising (direction only)",
        replicas=n)
    return report


# ---------------------------------------------------------------------------
# thermalization


def run_thermalization(config):
    """Join two burned-in markets with different exchange perfection and test
    whether the coupled flows settle at a common intermediate exponent."""
    th = config.thermalization
    report = ExperimentReport("thermalization", config.digest,
                              [config.seed + r for r in range(config.replicas)])
    ga, gb = th["gamma_a"], th["gamma_b"]
    if ga == gb:
        report.verdicts["intermediacy"] = _verdict(
            "NOT-APPLICABLE", note="identical exponent targets: nothing to "
            "thermalize; the union estimate equals the common value")
        return report
    a_lo, a_hi = sorted((1.0 + ga, 1.0 + gb))
    n = config.n_agents
    f = config.exchange["f"]
    passed, finals = 0, []
    for r, seed in enumerate(report.seeds):
        sides = {}
        for tag, gamma, off in (("A", ga, 0), ("B", gb, 1000)):
            net = generate_scale_free(n, config.network["m"], seed + off)
            e = ExchangeEngine(net, np.ones(n),
                               ExchangeParams(gamma=gamma, f=f), seed + off + 7)
            e.run(config.burn_in)
            sides[tag] = e
        out = thermalize(sides["A"], sides["B"], th["coupling"], config.steps,
                         np.random.default_rng(seed + 5000),
                         checkpoints=th["checkpoints"], window=th["window"])
        tr = out["trajectories"]
        _, a_u, se_u = tr["alpha_union"][-1]
        ok = a_lo + 2 * se_u < a_u < a_hi - 2 * se_u
        passed += ok
        finals.append({"seed": seed, "alpha_union": a_u, "stderr": se_u,
                       "alpha_a": tr["alpha_a"][-1][1],
                       "alpha_b": tr["alpha_b"][-1][1], "pass": bool(ok)})
        if r == 0:
            report.details["trajectories"] = {
                k: [(int(s), a, se) for s, a, se in v]
                for k, v in tr.items()}
            eng = out["engine"]
            for step, a_u_k, se_k in tr["alpha_union"]:
                report.trajectories.append(_row(step, math.nan, math.nan,
                                                a_u_k))
            # fill ledgers/gini for the final state only (cheap and honest:
            # intermediate engine states were consumed by the measurement)
            if report.trajectories:
                e = compute_conserved(eng.x, a_u, eng.omega)
                report.trajectories[-1] = _row(
                    tr["alpha_union"][-1][0], eng.omega, eng.lam, a_u,
                    e_total=e.e_total, gini_g=gini(eng.x))
    frac_need = math.ceil(0.8 * config.replicas)
    report.details["finals"] = finals
    report.verdicts["intermediacy"] = _verdict(
        "PASS" if passed >= frac_need else "FAIL", value=passed,
        tolerance=f">= {frac_need}/{config.replicas} with final union "
        f"alpha in ({a_lo} + 2 se, {a_hi} - 2 se)",
        replicas=config.replicas)
    return report
