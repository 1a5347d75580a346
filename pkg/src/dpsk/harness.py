"""Seeded Monte Carlo experiments over the three coding schemes.

Randomness contract: every trial owns one counter-based substream per
random component (state, channel noise, observation noise, messages),
keyed by (master_seed, trial, component) alone. Draws therefore do not
depend on batch size, worker count, or execution order, and two runs with
the same seed and configuration produce bit-identical reports. Workers
write per-trial and per-batch results into preallocated slots and the
final reduction runs in index order, so parallel and sequential execution
agree exactly.

``DPSK_THREADS`` caps the worker count (0 or unset = one worker per CPU).
"""

import concurrent.futures
import dataclasses
import math
import os

import numpy as np

from . import noisy_obs, regions, sk_dpc, sk_dpmac
from .errors import ConfigError, DegenerateSplit, EmptyGrid
from .params import (
    BlockConfig,
    DpcParams,
    MacParams,
    NoisyObsParams,
    PowerSplit,
    RunConfig,
    resolve_block,
    to_config_dict,
)

# Stream component ids. OBS_NOISE sits between NOISE and MSG so that a
# noisy-observation run with sigma_z2 = 0 consumes exactly the same state,
# noise and message draws as the plain run it must reproduce.
STATE, NOISE, OBS_NOISE, MSG, MSG2 = range(5)
_STREAMS_PER_TRIAL = 8

#: Trials processed per work unit; fixed so batching never affects output.
BATCH = 4096

_RHO_CONVERGENCE_TOL = 1e-3
_DISTORTION_FLAG_REL = 0.02


def worker_count():
    """Resolve DPSK_THREADS; 0 or unset means one worker per CPU."""
    raw = os.environ.get("DPSK_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(
            f"DPSK_THREADS must be a nonnegative integer, got {raw!r}", field="DPSK_THREADS"
        ) from None
    if value < 0:
        raise ConfigError(
            f"DPSK_THREADS must be a nonnegative integer, got {value}", field="DPSK_THREADS"
        )
    return value if value > 0 else (os.cpu_count() or 1)


@dataclasses.dataclass(frozen=True)
class RandomPlan:
    """Derivation rule from a master seed to per-trial substreams."""

    master_seed: int

    def key(self, trial, component):
        """128-bit counter key; unique per (trial, component)."""
        if trial < 0:
            raise ConfigError(f"trial index must be >= 0, got {trial}", field="trial")
        if not 0 <= component < _STREAMS_PER_TRIAL:
            raise ConfigError(f"component must be in 0..7, got {component}", field="component")
        return (self.master_seed % (1 << 64)) + ((trial * _STREAMS_PER_TRIAL + component) << 64)

    def generator(self, trial, component):
        return np.random.Generator(np.random.Philox(key=self.key(trial, component)))

    def normal_block(self, trial, component, n, std):
        """std * N(0,1)^n; drawing standard normals first keeps the stream
        layout identical across variance choices (std = 0 gives zeros)."""
        return std * self.generator(trial, component).standard_normal(n)

    def message(self, trial, component, M):
        return int(self.generator(trial, component).integers(1, M + 1))


def _spans(trials):
    starts = range(0, trials, BATCH)
    return [(i, s, min(s + BATCH, trials)) for i, s in enumerate(starts)]


def _for_each_batch(spans, worker):
    workers = min(worker_count(), len(spans))
    if workers <= 1:
        for span in spans:
            worker(*span)
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, *span) for span in spans]
        for future in futures:
            future.result()


def _draw_normals(plan, start, stop, n, std, component):
    out = np.empty((stop - start, n))
    for i, trial in enumerate(range(start, stop)):
        out[i] = plan.normal_block(trial, component, n, std)
    return out


def _draw_messages(plan, start, stop, M, component):
    out = np.empty(stop - start, dtype=np.int64)
    for i, trial in enumerate(range(start, stop)):
        out[i] = plan.message(trial, component, M)
    return out


def _theta_grid(W, M):
    return -0.5 + (2.0 * W - 1.0) / (2.0 * M)


def _pe_with_ci(errors, trials):
    pe = float(np.count_nonzero(errors)) / trials
    half = 1.96 * math.sqrt(max(pe * (1.0 - pe), 0.0) / trials)
    return pe, half


def _mean_with_se(values):
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


@dataclasses.dataclass(frozen=True)
class ExperimentReport:
    """Aggregated Monte Carlo results next to the matching theory values.

    ``deltas`` holds empirical minus theory for every quantity both sides
    define. Error bars: binomial 95% normal-approximation half-width for
    error probabilities, standard error of the mean for distortion.
    """

    scheme: str
    config: dict
    trials: int
    rates: dict
    empirical: dict
    theory: dict
    deltas: dict
    flags: list

    def as_dict(self):
        return {
            "scheme": self.scheme,
            "config": self.config,
            "trials": self.trials,
            "rates": self.rates,
            "empirical": self.empirical,
            "theory": self.theory,
            "deltas": self.deltas,
            "flags": list(self.flags),
        }


def _config_echo(scheme, params, split, block, trials, plan):
    run = RunConfig(
        scheme=scheme, channel=params, split=split, block=block,
        trials=trials, seed=plan.master_seed,
    )
    return to_config_dict(run)


def _symbol_stats(power_sums, trials):
    per_symbol = np.sum(power_sums, axis=0) / trials
    return [float(v) for v in per_symbol], per_symbol


def _dpc_experiment(params, gamma, block, trials, plan, trace_writer):
    n = block.n
    rate, M = resolve_block(block, regions.dpc_rate_cap(params, gamma))
    message_path = gamma * params.P > 0.0
    if not message_path and M > 1:
        raise DegenerateSplit("gamma*P = 0 cannot carry a message, resolve M = 1")
    coeffs = sk_dpc.compute_coefficients(params, gamma, n) if message_path else None
    std_s = math.sqrt(params.Q)
    std_eta = math.sqrt(params.sigma2)

    spans = _spans(trials)
    errors = np.zeros(trials, dtype=bool)
    sq_err = np.empty(trials)
    power_sums = np.zeros((len(spans), n))

    def worker(bi, start, stop):
        S = _draw_normals(plan, start, stop, n, std_s, STATE)
        eta = _draw_normals(plan, start, stop, n, std_eta, NOISE)
        W = _draw_messages(plan, start, stop, M, MSG)
        if message_path:
            X, Y, th, _ = sk_dpc.simulate_message_batch(coeffs, _theta_grid(W, M), S, eta)
            errors[start:stop] = sk_dpc.decode_batch(th[:, -1], M) != W
        else:
            X, Y = sk_dpc.simulate_forwarding_batch(params, gamma, S, eta)
            th = np.zeros_like(Y)
        s_hat = sk_dpc.estimate_state(Y, params, gamma)
        sq_err[start:stop] = np.mean((S - s_hat) ** 2, axis=1)
        power_sums[bi] = np.sum(X * X, axis=0)
        if trace_writer is not None:
            for i, trial in enumerate(range(start, stop)):
                trace_writer(trial, {
                    "X": X[i], "Y": Y[i], "theta_hat": th[i], "S": S[i], "S_hat": s_hat[i],
                })

    _for_each_batch(spans, worker)

    pe, pe_half = _pe_with_ci(errors, trials)
    distortion, dist_se = _mean_with_se(sq_err)
    symbol_power, per_symbol = _symbol_stats(power_sums, trials)
    forward = sk_dpc.state_forward_coefficient(params, gamma)
    theory = {
        "rate_cap": regions.dpc_rate_cap(params, gamma),
        "distortion": sk_dpc.finite_n_distortion(params, gamma, n),
        "distortion_step": regions.dpc_min_distortion(params, gamma),
        "power": params.P if message_path else forward**2 * params.Q,
        "time1_power": (
            sk_dpc.time1_power_theory(params, gamma, n, M=M)
            if message_path
            else forward**2 * params.Q
        ),
    }
    empirical = {
        "pe": pe,
        "pe_ci95": pe_half,
        "distortion": distortion,
        "distortion_se": dist_se,
        "power": float(per_symbol.mean()),
        "time1_power": float(per_symbol[0]),
        "steady_power": float(per_symbol[1:].mean()),
        "symbol_power": symbol_power,
    }
    deltas = {
        "distortion": distortion - theory["distortion"],
        "time1_power": empirical["time1_power"] - theory["time1_power"],
        "steady_power": empirical["steady_power"] - theory["power"],
    }
    return {"rate": rate, "M": M}, empirical, theory, deltas, []


def _mac_experiment(params, gamma, beta, block, trials, plan, paper_sgn, trace_writer):
    n = block.n
    (rate1, M1), (rate2, M2), rho_star = sk_dpmac.resolve_mac_rates(params, gamma, beta, block)
    coeffs = sk_dpmac.mac_coefficients(params, gamma, beta, n, paper_sgn=paper_sgn)
    caps = regions.mac_constraints(params, gamma, beta, rho_star)
    std_s = math.sqrt(params.Q)
    std_eta = math.sqrt(params.sigma2)

    spans = _spans(trials)
    errors1 = np.zeros(trials, dtype=bool)
    errors2 = np.zeros(trials, dtype=bool)
    sq_err = np.empty(trials)
    power_sums1 = np.zeros((len(spans), n))
    power_sums2 = np.zeros((len(spans), n))

    def worker(bi, start, stop):
        S = _draw_normals(plan, start, stop, n, std_s, STATE)
        eta = _draw_normals(plan, start, stop, n, std_eta, NOISE)
        W1 = _draw_messages(plan, start, stop, M1, MSG)
        W2 = _draw_messages(plan, start, stop, M2, MSG2)
        X1, X2, Y, th1, th2, _, _ = sk_dpmac.simulate_mac_batch(
            coeffs, _theta_grid(W1, M1), _theta_grid(W2, M2), S, eta
        )
        w1_hat, w2_hat = sk_dpmac.mac_decode_batch(th1[:, -1], th2[:, -1], M1, M2)
        errors1[start:stop] = w1_hat != W1
        errors2[start:stop] = w2_hat != W2
        s_hat = coeffs.est_coef * Y
        sq_err[start:stop] = np.mean((S - s_hat) ** 2, axis=1)
        power_sums1[bi] = np.sum(X1 * X1, axis=0)
        power_sums2[bi] = np.sum(X2 * X2, axis=0)
        if trace_writer is not None:
            for i, trial in enumerate(range(start, stop)):
                trace_writer(trial, {
                    "X1": X1[i], "X2": X2[i], "Y": Y[i],
                    "theta1_hat": th1[i], "theta2_hat": th2[i],
                    "S": S[i], "S_hat": s_hat[i],
                })

    _for_each_batch(spans, worker)

    pe1, half1 = _pe_with_ci(errors1, trials)
    pe2, half2 = _pe_with_ci(errors2, trials)
    distortion, dist_se = _mean_with_se(sq_err)
    symbol_power1, per_symbol1 = _symbol_stats(power_sums1, trials)
    symbol_power2, per_symbol2 = _symbol_stats(power_sums2, trials)
    rho_final = float(coeffs.rho[-1])
    theory = {
        "rho_star": rho_star,
        "rho_final": rho_final,
        "r1_max": caps.r1_max,
        "r2_max": caps.r2_max,
        "rsum_max": caps.rsum_max,
        "distortion": sk_dpmac.finite_n_distortion(params, gamma, beta, n),
        "distortion_step": caps.d_min,
        "power1": params.P1,
        "power2": params.P2,
    }
    empirical = {
        "pe1": pe1,
        "pe1_ci95": half1,
        "pe2": pe2,
        "pe2_ci95": half2,
        "distortion": distortion,
        "distortion_se": dist_se,
        "power1": float(per_symbol1.mean()),
        "power2": float(per_symbol2.mean()),
        "steady_power1": float(per_symbol1[2:].mean()),
        "steady_power2": float(per_symbol2[2:].mean()),
        "symbol_power1": symbol_power1,
        "symbol_power2": symbol_power2,
    }
    deltas = {
        "distortion": distortion - theory["distortion"],
        "steady_power1": empirical["steady_power1"] - params.P1,
        "steady_power2": empirical["steady_power2"] - params.P2,
        "rho": rho_final - rho_star,
    }
    flags = []
    if abs(rho_final - rho_star) > _RHO_CONVERGENCE_TOL:
        flags.append("mac_rho_nonconvergence")
    rates = {"rate1": rate1, "M1": M1, "rate2": rate2, "M2": M2}
    return rates, empirical, theory, deltas, flags


def _noisy_experiment(params, gamma, block, trials, plan, trace_writer):
    n = block.n
    rate, M = resolve_block(block, regions.noisy_rate_cap(params, gamma))
    message_path = gamma * params.P > 0.0
    if not message_path and M > 1:
        raise DegenerateSplit("gamma*P = 0 cannot carry a message, resolve M = 1")
    eq = noisy_obs.make_equivalent(params)
    eq_params = noisy_obs.equivalent_dpc_params(params)
    coeffs = sk_dpc.compute_coefficients(eq_params, gamma, n) if message_path else None
    c_true = noisy_obs.true_state_coefficient(params, gamma)
    std_s = math.sqrt(params.Q)
    std_z = math.sqrt(params.sigma_z2)
    std_eta = math.sqrt(params.sigma2)

    spans = _spans(trials)
    errors = np.zeros(trials, dtype=bool)
    sq_err = np.empty(trials)
    power_sums = np.zeros((len(spans), n))

    def worker(bi, start, stop):
        S = _draw_normals(plan, start, stop, n, std_s, STATE)
        eta = _draw_normals(plan, start, stop, n, std_eta, NOISE)
        Z = _draw_normals(plan, start, stop, n, std_z, OBS_NOISE)
        W = _draw_messages(plan, start, stop, M, MSG)
        s_eq = eq.kappa * (S + Z)
        eta_eq = (S - s_eq) + eta
        if message_path:
            X, Y, th, _ = sk_dpc.simulate_message_batch(coeffs, _theta_grid(W, M), s_eq, eta_eq)
            errors[start:stop] = sk_dpc.decode_batch(th[:, -1], M) != W
        else:
            X, Y = sk_dpc.simulate_forwarding_batch(eq_params, gamma, s_eq, eta_eq)
            th = np.zeros_like(Y)
        s_hat = c_true * Y
        s_hat[:, 0] = 0.0
        sq_err[start:stop] = np.mean((S - s_hat) ** 2, axis=1)
        power_sums[bi] = np.sum(X * X, axis=0)
        if trace_writer is not None:
            for i, trial in enumerate(range(start, stop)):
                trace_writer(trial, {
                    "X": X[i], "Y": Y[i], "theta_hat": th[i], "S": S[i], "S_hat": s_hat[i],
                })

    _for_each_batch(spans, worker)

    pe, pe_half = _pe_with_ci(errors, trials)
    distortion, dist_se = _mean_with_se(sq_err)
    symbol_power, per_symbol = _symbol_stats(power_sums, trials)
    forward = sk_dpc.state_forward_coefficient(eq_params, gamma)
    bound_step = regions.noisy_min_distortion(params, gamma)
    theory = {
        "rate_cap": regions.noisy_rate_cap(params, gamma),
        "kappa": eq.kappa,
        "distortion_scheme": noisy_obs.finite_n_distortion(params, gamma, n),
        "distortion_scheme_step": noisy_obs.scheme_step_distortion(params, gamma),
        "distortion_bound": params.Q / n + (n - 1) / n * bound_step,
        "distortion_bound_step": bound_step,
        "power": params.P if message_path else forward**2 * eq.state_var,
    }
    empirical = {
        "pe": pe,
        "pe_ci95": pe_half,
        "distortion": distortion,
        "distortion_se": dist_se,
        "power": float(per_symbol.mean()),
        "time1_power": float(per_symbol[0]),
        "steady_power": float(per_symbol[1:].mean()),
        "symbol_power": symbol_power,
    }
    deltas = {
        "distortion_scheme": distortion - theory["distortion_scheme"],
        "distortion_bound": distortion - theory["distortion_bound"],
        "steady_power": empirical["steady_power"] - theory["power"],
    }
    flags = []
    bound = theory["distortion_bound"]
    if bound > 0.0 and abs(distortion - bound) / bound > _DISTORTION_FLAG_REL:
        # The conservative closed-form bound and the simulated scheme
        # disagree beyond tolerance; report both rather than hide it.
        flags.append("distortion_bound_mismatch")
    return {"rate": rate, "M": M}, empirical, theory, deltas, flags


def run_experiment(scheme, params, split, block, trials, plan,
                   paper_sgn=False, trace_writer=None):
    """Run a seeded Monte Carlo experiment and aggregate a report.

    ``trace_writer``, when given, is called once per trial with the trial
    index and a dict of per-symbol columns (safe to call concurrently,
    trials are disjoint). Messages are drawn uniformly; the error
    probability is the fraction of wrongly decoded messages and distortion
    the time-averaged squared estimation error including the
    estimate-free initial slots.
    """
    if block is None:
        raise ConfigError("simulation needs a block configuration", field="n")
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}", field="trials")

    if scheme == "dpc":
        rates, empirical, theory, deltas, flags = _dpc_experiment(
            params, split.gamma, block, trials, plan, trace_writer
        )
    elif scheme == "mac":
        if split.beta is None:
            raise ConfigError("the two-encoder scheme needs beta", field="beta")
        rates, empirical, theory, deltas, flags = _mac_experiment(
            params, split.gamma, split.beta, block, trials, plan, paper_sgn, trace_writer
        )
    elif scheme == "noisy":
        rates, empirical, theory, deltas, flags = _noisy_experiment(
            params, split.gamma, block, trials, plan, trace_writer
        )
    else:
        raise ConfigError(f"unknown scheme {scheme!r}", field="scheme")

    return ExperimentReport(
        scheme=scheme,
        config=_config_echo(scheme, params, split, block, trials, plan),
        trials=trials,
        rates=rates,
        empirical=empirical,
        theory=theory,
        deltas=deltas,
        flags=flags,
    )


def run_config(config: RunConfig, paper_sgn=False, trace_writer=None):
    """Convenience wrapper over :func:`run_experiment` for a RunConfig."""
    return run_experiment(
        config.scheme,
        config.channel,
        config.split,
        config.block,
        config.trials,
        RandomPlan(config.seed),
        paper_sgn=paper_sgn,
        trace_writer=trace_writer,
    )


def sweep(scheme, params, gamma_grid, block, trials, plan, beta_grid=None, paper_sgn=False):
    """One experiment per grid point, each row paired with the theory
    boundary at that point. All points reuse the same per-trial
    substreams; rows are comparable but not mutually independent.

    Two-encoder grid points without message power on both sides (gamma*P1
    or beta*P2 zero) cannot run the joint loop; their rows keep the theory
    columns and hold NaN everywhere else.
    """
    gamma_grid = list(gamma_grid)
    if not gamma_grid:
        raise EmptyGrid("gamma grid is empty")
    if scheme == "mac":
        beta_grid = list(beta_grid) if beta_grid is not None else list(gamma_grid)
        if not beta_grid:
            raise EmptyGrid("beta grid is empty")
    elif beta_grid is not None:
        raise ConfigError("beta grid only applies to the two-encoder scheme", field="beta")

    rows = []
    if scheme == "mac":
        for gamma in gamma_grid:
            for beta in beta_grid:
                rho_star = regions.solve_rho_star(params, gamma, beta)
                caps = regions.mac_constraints(params, gamma, beta, rho_star)
                if gamma * params.P1 > 0.0 and beta * params.P2 > 0.0:
                    report = run_experiment(
                        scheme, params, PowerSplit(gamma, beta), block, trials, plan,
                        paper_sgn=paper_sgn,
                    )
                    measured = {
                        "rate1": report.rates["rate1"],
                        "rate2": report.rates["rate2"],
                        "pe1": report.empirical["pe1"],
                        "pe2": report.empirical["pe2"],
                        "distortion": report.empirical["distortion"],
                    }
                else:
                    measured = dict.fromkeys(
                        ("rate1", "rate2", "pe1", "pe2", "distortion"), math.nan
                    )
                rows.append({
                    "gamma": gamma,
                    "beta": beta,
                    "rho_star": rho_star,
                    **measured,
                    "r1_max": caps.r1_max,
                    "r2_max": caps.r2_max,
                    "rsum_max": caps.rsum_max,
                    "d_min": caps.d_min,
                })
        return rows

    for gamma in gamma_grid:
        report = run_experiment(scheme, params, PowerSplit(gamma), block, trials, plan)
        point = regions.boundary_sweep(params, [gamma])[0]
        row = {"gamma": gamma}
        if scheme == "noisy":
            row["sigma_z2"] = params.sigma_z2
        row.update({
            "rate": report.rates["rate"],
            "pe": report.empirical["pe"],
            "distortion": report.empirical["distortion"],
            "rate_cap": point.rate,
            "theory_distortion": point.distortion,
        })
        if scheme == "noisy":
            row["theory_distortion_scheme"] = report.theory["distortion_scheme"]
        rows.append(row)
    return rows
