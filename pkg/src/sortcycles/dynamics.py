"""Household dynamics: steady states, the consumption policy on a (K, z)
grid, stochastic simulation, and generalized impulse responses.

The aggregate economy behaves like a stochastic growth model whose period
"technology" is the within-period equilibrium of :mod:`sortcycles.statics`.
Two exact scale facts make the dynamic problem cheap: holding the shock state
fixed, Y, factor incomes and w0 are homogeneous of degree alpha in K and R of
degree alpha-1.  The policy solver therefore precomputes the K=1 statics for
each z state and evaluates resources and rental rates off-grid exactly.  The
solver itself is time iteration: given next period's consumption rule, the
Euler equation is solved node by node with bisection (the Euler residual is
strictly increasing in current consumption), and the rule is interpolated
piecewise-linearly between nodes.

Impulse responses are generalized: treated/control path pairs share every
random innovation, the treated path is forced into the high-z state at
horizon zero, the control into the boom state, and both follow the chain
afterwards.  Common random numbers remove simulation noise from the
difference at desk-scale replication counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BracketFailure, DomainError, GridExit, NoConvergence
from .params import (AggregateShockState, LogVolProcess, MarkovChain2, ThetaRedrawProcess,
                     ValidatedParams)
from .rng import block_uniforms, normal_icdf
from .statics import measured_tfp, solve_static
from .firms import analytic_moments


@dataclass(frozen=True)
class GridSpec:
    """Capital grid: n log-spaced nodes spanning the scaled steady-state hull."""

    n: int = 400
    lo_frac: float = 0.5
    hi_frac: float = 1.5

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("grid needs at least 2 nodes")
        if not 0.0 < self.lo_frac < self.hi_frac:
            raise DomainError("grid fractions must satisfy 0 < lo < hi")


@dataclass(frozen=True)
class Policy:
    """Converged savings/consumption rule on the capital grid."""

    K_grid: np.ndarray
    z_states: tuple[float, float]
    P: np.ndarray
    C: np.ndarray        # (2, n) consumption at nodes
    K_next: np.ndarray   # (2, n) savings at nodes; C + K_next = resources exactly
    resources: np.ndarray
    R1: np.ndarray       # rental rate at K=1 per state
    income1: np.ndarray  # household income at K=1 per state
    n_iterations: int
    sup_diff: float

    def consumption(self, state: int, K: float) -> float:
        return kernels.interp(self.K_grid, self.C[state], K)

    def next_capital(self, state: int, K: float) -> float:
        return kernels.interp(self.K_grid, self.K_next[state], K)


@dataclass(frozen=True)
class SimulationPath:
    """Per-period record of a simulated economy."""

    states: np.ndarray
    z: np.ndarray
    K: np.ndarray
    Y: np.ndarray
    C: np.ndarray
    measured_tfp: np.ndarray
    lambda_t: np.ndarray
    var_log_wage: np.ndarray
    var_log_tfpq: np.ndarray
    var_log_tfpr: np.ndarray
    labor_share: np.ndarray
    R: np.ndarray
    w0: np.ndarray
    income: np.ndarray
    seed: int
    burn_in: int

    def __len__(self) -> int:
        return self.z.shape[0]

    def post_burn(self, series: np.ndarray) -> np.ndarray:
        return series[self.burn_in:]

    def moments(self) -> dict[str, float]:
        """Time-averaged moments over the post-burn-in sample."""
        sl = slice(self.burn_in, None)
        return {
            "labor_share": float(np.mean(self.labor_share[sl])),
            "wage_inequality": float(np.mean(self.var_log_wage[sl])),
            "var_log_tfpq": float(np.mean(self.var_log_tfpq[sl])),
            "var_log_tfpr": float(np.mean(self.var_log_tfpr[sl])),
            "std_tfp": float(np.std(self.measured_tfp[sl])),
            "mean_Y": float(np.mean(self.Y[sl])),
            "mean_C": float(np.mean(self.C[sl])),
            "mean_K": float(np.mean(self.K[sl])),
            "recession_frequency": float(np.mean(self.states[sl])),
        }


@dataclass(frozen=True)
class IRFResult:
    """Mean treated-minus-control deviations by horizon."""

    horizon: int
    d_log_Y: np.ndarray
    d_measured_tfp: np.ndarray
    d_var_log_wage: np.ndarray
    d_var_log_tfpq: np.ndarray
    d_var_log_tfpr: np.ndarray
    n_episodes: int


def _shock_for(params: ValidatedParams, chain: MarkovChain2, state: int, A: float) -> AggregateShockState:
    return AggregateShockState.from_params(params, z=chain.z_states[state], A=A)


def steady_state(params: ValidatedParams, z_fixed: float, A: float = 1.0) -> tuple[float, float]:
    """Deterministic steady state (K*, C*) of the fixed-shock economy.

    K* solves beta (R(K*) + 1 - delta) = 1 by bisection; R is strictly
    decreasing in K (its elasticity is alpha - 1 < 0).  C* then follows from
    the budget constraint with investment at replacement level.
    """
    shock = AggregateShockState.from_params(params, z=z_fixed, A=A)
    r_star = 1.0 / params.beta - 1.0 + params.delta

    def rental(K: float) -> float:
        return solve_static(params, shock, K).R

    lo = 1e-8
    if rental(lo) <= r_star:
        raise BracketFailure("rental rate below the Euler target even at minimal capital")
    hi = 1.0
    for _ in range(200):
        if rental(hi) < r_star:
            break
        hi *= 2.0
    else:  # pragma: no cover
        raise BracketFailure("could not bracket the steady-state capital stock")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rental(mid) > r_star:
            lo = mid
        else:
            hi = mid
    k_star = 0.5 * (lo + hi)
    eq = solve_static(params, shock, k_star)
    c_star = eq.household_income - params.delta * k_star
    return k_star, c_star


def _state_constants(params: ValidatedParams, chain: MarkovChain2, A: float):
    """R and household income at K=1 for each z state (exact in K by scaling)."""
    R1 = np.empty(2)
    income1 = np.empty(2)
    for s in range(2):
        eq = solve_static(params, _shock_for(params, chain, s, A), 1.0)
        R1[s] = eq.R
        income1[s] = eq.household_income
    return R1, income1


def solve_policy(params: ValidatedParams, chain: MarkovChain2, A: float = 1.0,
                 grid_spec: GridSpec | None = None, tol: float = 1e-9,
                 max_iter: int = 10_000) -> Policy:
    """Time iteration on the Euler equation until the consumption rule is fixed."""
    spec = grid_spec or GridSpec()
    k_stars = [steady_state(params, z, A)[0] for z in chain.z_states]
    K_lo = spec.lo_frac * min(k_stars)
    K_hi = spec.hi_frac * max(k_stars)
    K_grid = np.exp(np.linspace(math.log(K_lo), math.log(K_hi), spec.n))
    # pin the ends exactly so hull checks are not hostage to exp/log rounding
    K_grid[0], K_grid[-1] = K_lo, K_hi

    R1, income1 = _state_constants(params, chain, A)
    res = (1.0 - params.delta) * K_grid[None, :] + income1[:, None] * K_grid[None, :] ** params.alpha
    P = np.asarray(chain.transition_matrix, dtype=float)

    C0 = np.maximum(res - K_grid[None, :], 0.05 * res)
    C, n_iter, sup = kernels.time_iteration(
        C0.copy(), K_grid, res, R1, params.alpha - 1.0, 1.0 - params.delta,
        P, params.beta, tol, max_iter)
    if sup >= tol:
        raise NoConvergence(f"time iteration stalled after {n_iter} sweeps (sup diff {sup:.3g})")
    C = np.asarray(C)
    return Policy(K_grid=K_grid, z_states=chain.z_states, P=P, C=C, K_next=res - C,
                  resources=res, R1=R1, income1=income1, n_iterations=int(n_iter),
                  sup_diff=float(sup))


def euler_residuals(policy: Policy, params: ValidatedParams, points: np.ndarray,
                    states: np.ndarray) -> np.ndarray:
    """Unit-free Euler residuals |beta E[(C/C')(R'+1-delta)] - 1| off grid."""
    out = np.empty(points.shape[0])
    omd = 1.0 - params.delta
    am1 = params.alpha - 1.0
    for i, (K, s) in enumerate(zip(points, states)):
        s = int(s)
        c = policy.consumption(s, K)
        resources = omd * K + policy.income1[s] * K ** params.alpha
        kp = resources - c
        q = 0.0
        for sp in range(2):
            cp = policy.consumption(sp, kp)
            q += policy.P[s, sp] * (policy.R1[sp] * kp ** am1 + omd) / cp
        out[i] = abs(params.beta * c * q - 1.0)
    return out


def draw_state_path(chain: MarkovChain2, T: int, seed: int, s0: int = 0,
                    stream_label: str = "simulate-z") -> np.ndarray:
    """Seeded Markov path of state indices (0 = boom, 1 = recession)."""
    u = block_uniforms(seed, stream_label, 0, T)[:, 0]
    return np.asarray(kernels.state_path(u, chain.p_stay_low, chain.p_stay_high, s0))


def simulate(policy: Policy, params: ValidatedParams, chain: MarkovChain2,
             T: int = 10_000, burn_in: int = 100, seed: int = 0, A: float = 1.0,
             K0: float | None = None, s0: int = 0) -> SimulationPath:
    """Simulate the economy for T periods and record the full period statics.

    The capital recursion interpolates the policy table; every recorded
    period re-solves the within-period equilibrium at (z_t, K_t), so recorded
    series satisfy the budget identity by construction rather than by grid
    interpolation.
    """
    if T <= burn_in:
        raise DomainError(f"T={T} must exceed burn_in={burn_in}")
    states = draw_state_path(chain, T, seed)
    if K0 is None:
        K0 = steady_state(params, chain.z_states[s0], A)[0]
    kpath = np.asarray(kernels.kpath(float(K0), states, policy.K_grid, policy.K_next))
    lo, hi = policy.K_grid[0], policy.K_grid[-1]
    bad = np.where((kpath < lo) | (kpath > hi))[0]
    if bad.size:
        raise GridExit(int(bad[0]), float(kpath[bad[0]]))

    shocks = (_shock_for(params, chain, 0, A), _shock_for(params, chain, 1, A))
    cols = {name: np.empty(T) for name in
            ("z", "K", "Y", "C", "measured_tfp", "lambda_t", "var_log_wage",
             "var_log_tfpq", "var_log_tfpr", "labor_share", "R", "w0", "income")}
    for t in range(T):
        s = int(states[t])
        K = kpath[t]
        eq = solve_static(params, shocks[s], K)
        vw, vq, vr = analytic_moments(eq, params, eq.shock)
        income = eq.household_income
        cols["z"][t] = eq.shock.z
        cols["K"][t] = K
        cols["Y"][t] = eq.Y
        cols["C"][t] = (1.0 - params.delta) * K + income - kpath[t + 1]
        cols["measured_tfp"][t] = measured_tfp(eq)
        cols["lambda_t"][t] = eq.lambda_t
        cols["var_log_wage"][t] = vw
        cols["var_log_tfpq"][t] = vq
        cols["var_log_tfpr"][t] = vr
        cols["labor_share"][t] = eq.labor_share
        cols["R"][t] = eq.R
        cols["w0"][t] = eq.w0
        cols["income"][t] = income
    if np.any(cols["C"] <= 0.0):
        t_bad = int(np.argmax(cols["C"] <= 0.0))
        raise NoConvergence(f"nonpositive consumption at period {t_bad}; grid too narrow")
    return SimulationPath(states=states, seed=seed, burn_in=burn_in, **cols)


def _irf_episode(policy, params, chain, shocks, K0, u, horizon):
    """One CRN pair; returns (H+1, 5) treated-minus-control records."""
    out = np.empty((horizon + 1, 5))
    s_treat, s_ctrl = 1, 0
    K_t, K_c = K0, K0
    for h in range(horizon + 1):
        rec = []
        for s, K in ((s_treat, K_t), (s_ctrl, K_c)):
            eq = solve_static(params, shocks[s], K)
            vw, vq, vr = analytic_moments(eq, params, eq.shock)
            rec.append((math.log(eq.Y), measured_tfp(eq), vw, vq, vr))
        out[h] = np.subtract(rec[0], rec[1])
        if h == horizon:
            break
        K_t = policy.next_capital(s_treat, K_t)
        K_c = policy.next_capital(s_ctrl, K_c)
        stay = (chain.p_stay_low, chain.p_stay_high)
        s_treat = s_treat if u[h] < stay[s_treat] else 1 - s_treat
        s_ctrl = s_ctrl if u[h] < stay[s_ctrl] else 1 - s_ctrl
    return out


def impulse_response(policy: Policy, params: ValidatedParams, chain: MarkovChain2,
                     horizon: int = 20, n_sims: int = 1000, seed: int = 0,
                     A: float = 1.0, threads: int = 1) -> IRFResult:
    """Generalized IRF to entering the high-z state, averaged over the
    ergodic boom distribution of capital.

    Initial capital stocks are boom-period values from a presimulated path;
    each episode then runs a treated path (forced z = z_high at horizon 0)
    and a control path (z = z_low) under common chain innovations.
    """
    if n_sims < 1:
        raise DomainError("n_sims must be at least 1")
    stride = 10
    presim_T = 200 + stride * n_sims
    pre_states = draw_state_path(chain, presim_T, seed, stream_label="irf-presim")
    K0 = steady_state(params, chain.z_states[0], A)[0]
    pre_k = np.asarray(kernels.kpath(K0, pre_states, policy.K_grid, policy.K_next))
    boom_k = pre_k[:-1][pre_states == 0]
    boom_k = boom_k[200:] if boom_k.shape[0] > 200 + n_sims else boom_k
    if boom_k.shape[0] == 0:
        boom_k = np.array([K0])  # chain never visits the boom; condition on its steady state
    idx = (np.arange(n_sims) * max(1, boom_k.shape[0] // n_sims)) % boom_k.shape[0]
    inits = boom_k[idx]

    u_all = block_uniforms(seed, "irf-chain", 0, n_sims * max(horizon, 1))[:, 0]
    u_all = u_all.reshape(n_sims, max(horizon, 1))
    acc = np.zeros((horizon + 1, 5))

    shocks = (_shock_for(params, chain, 0, A), _shock_for(params, chain, 1, A))

    def run_block(rng_range):
        a, b = rng_range
        block = np.zeros((horizon + 1, 5))
        for r in range(a, b):
            block += _irf_episode(policy, params, chain, shocks, float(inits[r]), u_all[r], horizon)
        return block

    ranges = [(a, min(a + 64, n_sims)) for a in range(0, n_sims, 64)]
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run_block, ranges))
    else:
        blocks = [run_block(r) for r in ranges]
    for b in blocks:  # fixed chunk order keeps the sum deterministic
        acc += b
    acc /= n_sims
    return IRFResult(horizon=horizon, d_log_Y=acc[:, 0], d_measured_tfp=acc[:, 1],
                     d_var_log_wage=acc[:, 2], d_var_log_tfpq=acc[:, 3],
                     d_var_log_tfpr=acc[:, 4], n_episodes=n_sims)


def generate_shock_path(params: ValidatedParams,
                        process: MarkovChain2 | ThetaRedrawProcess | LogVolProcess,
                        T: int, seed: int) -> list[AggregateShockState]:
    """Aggregate shock-state sequences for any of the supported driver laws.

    MarkovChain2 varies z; ThetaRedrawProcess varies lambda_theta_t (the
    aggregate law only; the firm-level redraw construction is exercised by
    the verification module); LogVolProcess varies the wedge volatilities.
    """
    if isinstance(process, MarkovChain2):
        states = draw_state_path(process, T, seed, stream_label="shock-z")
        return [AggregateShockState.from_params(params, z=process.z_states[int(s)]) for s in states]
    if isinstance(process, ThetaRedrawProcess):
        process.check_valid()
        chain = MarkovChain2(z_high=0.0, p_stay_low=process.p_stay_low,
                             p_stay_high=process.p_stay_high)
        states = draw_state_path(chain, T, seed, stream_label="shock-lambda")
        return [AggregateShockState.from_params(params, z=0.0,
                                                lambda_theta_t=process.rates[int(s)])
                for s in states]
    if isinstance(process, LogVolProcess):
        u = block_uniforms(seed, "shock-vol", 0, T)
        e1 = process.sigma_l * normal_icdf(u[:, 0])
        e2 = process.sigma_k * normal_icdf(u[:, 1])
        out = []
        log_s1 = math.log(params.sigma1) if params.sigma1 > 0 else 0.0
        log_s2 = math.log(params.sigma2) if params.sigma2 > 0 else 0.0
        anchor1, anchor2 = log_s1, log_s2
        for t in range(T):
            log_s1 = anchor1 + process.rho1 * (log_s1 - anchor1) + e1[t]
            log_s2 = anchor2 + process.rho2 * (log_s2 - anchor2) + e2[t]
            out.append(AggregateShockState.from_params(
                params, z=0.0,
                sigma1_t=math.exp(log_s1) if params.sigma1 > 0 else 0.0,
                sigma2_t=math.exp(log_s2) if params.sigma2 > 0 else 0.0))
        return out
    raise DomainError(f"unsupported shock process type {type(process).__name__}")
