"""Within-period equilibrium: the job-distribution rate, coefficient block,
and aggregate prices and quantities given (K, shock state).

The period problem separates cleanly.  The employment-weighted distribution
of job types is exponential with rate lambda_t, and lambda_t solves a single
scalar equation

    G(lam) = b * (lam/lambda_x)^psi + lam - (d*z + lambda_theta_t) = 0

that involves no prices.  Given lambda_t, a block of loadings (eta's) and
lognormal market constants (B1, B2, B3) turns the three market-clearing
conditions into closed forms for w0, R and Y; every firm-level object is then
an exponential tilt of the scale constants Q_bar, k_bar, chi_bar, l_bar.

All powers are evaluated in log space: the xi/(xi-1)-type exponents applied
to large market constants would otherwise overflow for thick-tailed
calibrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonFinite, NoRoot, UnboundedCapitalDemand
from .params import AggregateShockState, ValidatedParams

#: |log x| above which exp(x) is treated as an overflow rather than a value
EXP_CAP = 700.0

#: residual tolerance for the fixed point, scaled by max(1, lambda_theta_t)
LAMBDA_TOL = 1e-12


def _exp_checked(logx: float) -> float:
    if abs(logx) > EXP_CAP:
        raise NonFinite(f"log magnitude {logx:.3g} exceeds the exp cap {EXP_CAP:g}")
    return math.exp(logx)


def fixed_point_coefficients(params: ValidatedParams) -> tuple[float, float]:
    """(b, d) of the job-distribution equation.

    b scales the (lam/lambda_x)^psi term and may take either sign; d > 0
    scales the market-efficiency shock.
    """
    a, g, psi, xi = params.alpha, params.gamma, params.psi, params.xi
    denom = 1.0 + (1.0 - a - g) * (xi - 1.0)
    b = ((xi - 1.0) * (g - psi * (1.0 - a)) - psi) / (g * denom)
    d = (1.0 + (xi - 1.0) * (1.0 - a)) / denom
    return b, d


def fixed_point_residual(params: ValidatedParams, shock: AggregateShockState, lam) -> float:
    """G(lam); the equilibrium lambda_t is its unique nonnegative root."""
    b, d = fixed_point_coefficients(params)
    target = d * shock.z + shock.lambda_theta_t
    lam = np.asarray(lam, dtype=float)
    return b * (lam / params.lambda_x) ** params.psi + lam - target


def solve_lambda(params: ValidatedParams, shock: AggregateShockState) -> float:
    """Unique nonnegative root of the job-distribution equation.

    The root always lies on the increasing branch of G (strict convexity when
    b < 0), so a sign-change bracket plus safeguarded Newton converges
    unconditionally.  The bracket starts at the analytic upper bound
    T + |b| (1 + T/lambda_x)^psi + 1 with T = lambda_theta_t + d z and is
    doubled if G is still negative there, which can happen for extreme
    (psi near 1, tiny lambda_x) corners of the parameter space.
    """
    psi, lam_x = params.psi, params.lambda_x
    b, d = fixed_point_coefficients(params)
    target = d * shock.z + shock.lambda_theta_t  # T > 0 for valid inputs

    def G(lam: float) -> float:
        return b * (lam / lam_x) ** psi + lam - target

    def Gprime(lam: float) -> float:
        if psi == 0.0 or lam == 0.0:
            return 1.0
        return b * psi / lam_x * (lam / lam_x) ** (psi - 1.0) + 1.0

    # degenerate psi edges make G affine; the uniqueness argument needs 0 < psi < 1
    if psi == 0.0:
        root = target - b
        if root < 0.0:
            raise NoRoot(f"psi=0 linear equation has negative root {root:.6g}")
        return root
    if psi == 1.0:
        slope = 1.0 + b / lam_x
        if slope <= 0.0:
            raise NoRoot("psi=1 equation has nonpositive slope; no nonnegative root")
        return target / slope

    lo = 0.0
    hi = target + abs(b) * (1.0 + target / lam_x) ** psi + 1.0
    for _ in range(2000):
        if G(hi) > 0.0:
            break
        hi *= 2.0
    else:  # pragma: no cover - G grows without bound, expansion must succeed
        raise NoRoot("failed to bracket the job-distribution root")

    # bisection depth covers roots down to the denormal range: for psi near 0
    # with b > target the root is lambda_x (target/b)^(1/psi), which can be
    # astronomically small yet still representable
    tol = LAMBDA_TOL * max(1.0, shock.lambda_theta_t)
    x = 0.5 * (lo + hi)
    for _ in range(1200):
        gx = G(x)
        if abs(gx) <= tol:
            return x
        if gx > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 8.0 * np.finfo(float).eps * hi:
            # bracket collapsed to relative machine precision: the residual
            # floor is set by cancellation among G's terms, not by the root
            return 0.5 * (lo + hi)
        gp = Gprime(x)
        if gp > 0.0:
            xn = x - gx / gp
            if lo < xn < hi:
                x = xn
                continue
        x = 0.5 * (lo + hi)
    if abs(G(x)) <= tol:
        return x
    raise NoRoot(f"job-distribution root underflows double precision "
                 f"(stalled at residual {G(x):.3g})")


@dataclass(frozen=True)
class Coefficients:
    """Firm-block loadings and the lognormal market constants.

    eta_q is the common demand-technology elasticity; eta_q_theta and
    eta_l_theta are the firm-type loadings of output and employment.  B1, B2,
    B3 collect the Gaussian wedge moments entering labor, capital and goods
    market clearing; B2 and B3 carry the 1/(lambda_theta_t - kappa eta_q
    eta_q_theta) factor from the type integral, which must stay positive or
    capital demand diverges.
    """

    eta_q: float
    eta_q_theta: float
    eta_l_theta: float
    b1: float
    b2: float
    b3: float
    kappa: float


def capital_margin(params: ValidatedParams, shock: AggregateShockState, coeffs: Coefficients) -> float:
    """lambda_theta_t - kappa*eta_q*eta_q_theta, the boundedness margin."""
    return shock.lambda_theta_t - coeffs.kappa * coeffs.eta_q * coeffs.eta_q_theta


def coefficients(params: ValidatedParams, shock: AggregateShockState, lambda_t: float) -> Coefficients:
    """Evaluate the coefficient block at a solved lambda_t."""
    a, g, xi, psi = params.alpha, params.gamma, params.xi, params.psi
    kappa = params.kappa
    eta_q = params.eta_q
    s1, s2 = shock.sigma1_t, shock.sigma2_t

    ratio = (lambda_t / params.lambda_x) ** psi
    eta_q_theta = -g * shock.z + (1.0 - psi) * ratio
    eta_l_theta = kappa * eta_q * eta_q_theta - shock.z - (psi / g) * ratio

    margin = shock.lambda_theta_t - kappa * eta_q * eta_q_theta
    if margin <= 0.0:
        raise UnboundedCapitalDemand(
            f"lambda_theta_t - kappa*eta_q*eta_q_theta = {margin:.6g} <= 0")

    ke = kappa * eta_q
    b1 = math.exp(0.5 * ((ke * g + 1.0) ** 2 * s1 * s1 + (ke * a) ** 2 * s2 * s2))
    b2 = math.exp(0.5 * ((ke * g) ** 2 * s1 * s1 + (ke * a + 1.0) ** 2 * s2 * s2)) / margin
    b3 = math.exp(0.5 * ((ke * g) ** 2 * s1 * s1 + (ke * a) ** 2 * s2 * s2)) / margin
    return Coefficients(eta_q=eta_q, eta_q_theta=eta_q_theta, eta_l_theta=eta_l_theta,
                        b1=b1, b2=b2, b3=b3, kappa=kappa)


@dataclass(frozen=True)
class StaticEquilibrium:
    """One period's complete within-period solution.

    Scale constants (Q_bar, k_bar, chi_bar, l_bar) are the firm-level values
    at theta = eps1 = eps2 = 0; M and C_in are the goods-market composites;
    Y_l, Y_k, Y_d are the factor incomes actually received by the household,
    which fall short of Y whenever wedges destroy resources.
    """

    lambda_t: float
    coefficients: Coefficients
    w0: float
    R: float
    Y: float
    Q_bar: float
    k_bar: float
    chi_bar: float
    l_bar: float
    M: float
    C_in: float
    Y_l: float
    Y_k: float
    Y_d: float
    shock: AggregateShockState
    K: float
    params: ValidatedParams  # carried for derived measures; not part of the wire format

    @property
    def household_income(self) -> float:
        return self.Y_l + self.Y_k + self.Y_d

    @property
    def labor_share(self) -> float:
        return self.Y_l / self.Y


def aggregates(params: ValidatedParams, shock: AggregateShockState, lambda_t: float,
               coeffs: Coefficients, K: float) -> StaticEquilibrium:
    """Aggregate prices and quantities, evaluated in the order
    M, w0, C_in, Q_bar, Y, R and then the scale constants chi_bar, k_bar, l_bar.
    """
    if not K > 0.0:
        raise DomainError(f"capital stock must be positive, got {K}")
    a, g, xi = params.alpha, params.gamma, params.xi
    kappa, eta_q = coeffs.kappa, coeffs.eta_q
    lt = shock.lambda_theta_t
    A = shock.A

    log_ltb1 = math.log(lt * coeffs.b1)
    log_ltb2 = math.log(lt * coeffs.b2)
    log_ltb3 = math.log(lt * coeffs.b3)
    log_lam = math.log(lambda_t)
    log_K = math.log(K)
    log_A = math.log(A)

    log_M = (xi / (xi - 1.0)) * log_ltb3
    log_w0 = (log_A + math.log(g * kappa) + log_ltb3 / (xi - 1.0)
              + (g - 1.0) * (log_lam - log_ltb1) + a * (log_K - log_ltb2))
    log_C_in = (log_A + a * log_K + g * math.log(kappa) - a * log_ltb2
                + (g / xi) * log_M + g * (math.log(g) - log_w0))
    exp_q = eta_q / (1.0 - eta_q * (-a + (a + g) / xi))
    log_Q_bar = exp_q * log_C_in
    log_Y = log_M + log_Q_bar
    log_R = log_ltb2 + math.log(a * kappa) + log_Q_bar + log_ltb3 / (xi - 1.0) - log_K
    log_chi_bar = math.log(kappa) + (log_Y - log_Q_bar) / xi
    log_k_bar = math.log(a * kappa) + kappa * log_Q_bar + log_Y / xi - log_R
    log_l_bar = (log_chi_bar + log_A + a * log_k_bar + math.log(g) - log_w0) / (1.0 - g)

    chi_q = _exp_checked(log_chi_bar) * _exp_checked(log_Q_bar)
    y_l, y_k, y_d = _factor_incomes_from(params, shock, coeffs, chi_q)

    return StaticEquilibrium(
        lambda_t=lambda_t,
        coefficients=coeffs,
        w0=_exp_checked(log_w0),
        R=_exp_checked(log_R),
        Y=_exp_checked(log_Y),
        Q_bar=_exp_checked(log_Q_bar),
        k_bar=_exp_checked(log_k_bar),
        chi_bar=_exp_checked(log_chi_bar),
        l_bar=_exp_checked(log_l_bar),
        M=_exp_checked(log_M),
        C_in=_exp_checked(log_C_in),
        Y_l=y_l,
        Y_k=y_k,
        Y_d=y_d,
        shock=shock,
        K=float(K),
        params=params,
    )


def _factor_incomes_from(params: ValidatedParams, shock: AggregateShockState,
                         coeffs: Coefficients, chi_q: float) -> tuple[float, float, float]:
    margin = shock.lambda_theta_t - coeffs.kappa * coeffs.eta_q * coeffs.eta_q_theta
    if margin <= 0.0:
        raise UnboundedCapitalDemand(f"capital margin {margin:.6g} <= 0")
    if margin + shock.z <= 0.0:
        raise UnboundedCapitalDemand(f"labor-income margin {margin + shock.z:.6g} <= 0")
    lt = shock.lambda_theta_t
    y_l = params.gamma * lt * coeffs.b1 * chi_q / (margin + shock.z)
    y_k = params.alpha * lt * coeffs.b2 * chi_q
    y_d = (params.xi / (params.xi - 1.0) - params.gamma - params.alpha) * lt * coeffs.b3 * chi_q
    return (y_l, y_k, y_d)


def factor_incomes(params: ValidatedParams, shock: AggregateShockState,
                   eq: StaticEquilibrium) -> tuple[float, float, float]:
    """(Y_l, Y_k, Y_d): labor income, capital income, distributed profits.

    The labor-income denominator carries the extra +z relative to the capital
    margin because workers are paid net of the type-correlated wedge.
    """
    return _factor_incomes_from(params, shock, eq.coefficients, eq.chi_bar * eq.Q_bar)


def solve_static(params: ValidatedParams, shock: AggregateShockState, K: float) -> StaticEquilibrium:
    """Full within-period solve: lambda_t, coefficients, aggregates."""
    lam = solve_lambda(params, shock)
    coeffs = coefficients(params, shock, lam)
    return aggregates(params, shock, lam, coeffs, K)


def measured_tfp(eq: StaticEquilibrium) -> float:
    """Aggregate measured TFP, log Y - alpha log K.

    The household supplies one unit of labor in the aggregate, so the gamma
    log L term of the usual Solow residual vanishes.
    """
    return math.log(eq.Y) - eq.params.alpha * math.log(eq.K)
