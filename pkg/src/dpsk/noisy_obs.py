"""Single-user scheme when the transmitter sees the state through noise.

The encoder observes S_tilde = S + Z with Z ~ N(0, sigma_z2) instead of S
itself. Writing S = kappa S_tilde + Z_tilde with kappa = Q/(Q + sigma_z2)
splits the state into a part the encoder knows and an orthogonal remainder
Z_tilde ~ N(0, (1-kappa) Q) that acts as extra channel noise:

    Y = X + kappa S_tilde + (Z_tilde + eta).

The clean-observation machinery therefore runs unchanged on the
equivalent channel with state variance kappa Q and noise variance
kappa sigma_z2 + sigma2 (note Var(kappa Z) = kappa sigma_z2 relative to
the observed block). The receiver, however, wants the true S, not the
equivalent state, which changes the estimator weight and the achieved
distortion; see :func:`true_state_coefficient` and
:func:`scheme_step_distortion`.
"""

import dataclasses

import numpy as np

from . import regions, sk_dpc
from .errors import DegenerateSplit, LengthMismatch
from .params import DpcParams, NoisyObsParams, resolve_block


@dataclasses.dataclass(frozen=True)
class EquivalentChannel:
    """Clean-observation channel the noisy problem reduces to."""

    kappa: float
    state_var: float
    noise_var: float


def make_equivalent(params: NoisyObsParams):
    kappa = regions.observation_weight(params)
    return EquivalentChannel(
        kappa=kappa,
        state_var=kappa * params.Q,
        noise_var=kappa * params.sigma_z2 + params.sigma2,
    )


def equivalent_dpc_params(params: NoisyObsParams):
    eq = make_equivalent(params)
    return DpcParams(P=params.P, Q=eq.state_var, sigma2=eq.noise_var)


def equivalent_coefficients(params: NoisyObsParams, gamma, n):
    return sk_dpc.compute_coefficients(equivalent_dpc_params(params), gamma, n)


def true_state_coefficient(params: NoisyObsParams, gamma):
    """Steady-state weight c with S_hat_t = c Y_t estimating the true S.

    On the equivalent channel E[S_eq Y] = omega' kappa Q, but the true
    state adds E[Z_tilde Y] = (1-kappa) Q because Z_tilde rides inside Y:

        c = (omega' kappa Q + (1-kappa) Q) / E[Y^2],
        E[Y^2] = gamma P + omega'^2 kappa Q + kappa sigma_z2 + sigma2,

    with omega' = 1 + sqrt((1-gamma) P / (kappa Q)).
    """
    eq = make_equivalent(params)
    if eq.state_var == 0.0:
        return 0.0
    omega = 1.0 + sk_dpc.state_forward_coefficient(
        DpcParams(params.P, eq.state_var, eq.noise_var), gamma
    )
    ey2 = gamma * params.P + omega * omega * eq.state_var + eq.noise_var
    return (omega * eq.state_var + (1.0 - eq.kappa) * params.Q) / ey2


def scheme_step_distortion(params: NoisyObsParams, gamma):
    """Per-step MMSE of the true state under the linear estimator.

    Q - (E[S Y])^2 / E[Y^2] evaluated in closed form. This is smaller
    than the conservative figure :func:`dpsk.regions.noisy_min_distortion`
    reports, which prices the unobserved state component (1-kappa) Q at
    its full variance instead of crediting its presence inside Y. The
    simulation harness checks simulated distortion against this value and
    flags the gap from the conservative bound.
    """
    eq = make_equivalent(params)
    if params.Q == 0.0:
        return 0.0
    if eq.state_var == 0.0:
        # Observation carries nothing; Y still contains S itself.
        ey2 = params.P + params.Q + params.sigma2
        return params.Q - params.Q * params.Q / ey2
    omega = 1.0 + sk_dpc.state_forward_coefficient(
        DpcParams(params.P, eq.state_var, eq.noise_var), gamma
    )
    ey2 = gamma * params.P + omega * omega * eq.state_var + eq.noise_var
    cross = omega * eq.state_var + (1.0 - eq.kappa) * params.Q
    return params.Q - cross * cross / ey2


def finite_n_distortion(params: NoisyObsParams, gamma, n):
    """Block average with the unprotected first slot contributing Q."""
    return params.Q / n + (n - 1) / n * scheme_step_distortion(params, gamma)


def estimate_true_state(Y, params: NoisyObsParams, gamma):
    """Apply the true-state weight; the first slot has no estimate."""
    Y = np.asarray(Y, dtype=float)
    s_hat = true_state_coefficient(params, gamma) * Y
    s_hat[..., 0] = 0.0
    return s_hat


def noisy_run_block(params: NoisyObsParams, gamma, block, W, S, Z, eta):
    """Simulate one block with physical state S and observation noise Z.

    The encoder is driven by kappa (S + Z); the channel adds the true S
    and noise eta. With sigma_z2 = 0 this reproduces the clean-observation
    trace sample for sample.
    """
    n = block.n
    S = np.asarray(S, dtype=float)
    Z = np.asarray(Z, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if S.shape != (n,) or Z.shape != (n,) or eta.shape != (n,):
        raise LengthMismatch(f"S, Z and eta must have shape ({n},)")
    eq = make_equivalent(params)
    s_eq = eq.kappa * (S + Z)
    # Residual state the encoder cannot see, folded into the channel noise.
    eta_eq = (S - s_eq) + eta

    rate, M = resolve_block(block, regions.noisy_rate_cap(params, gamma))
    if gamma * params.P == 0.0:
        if M > 1:
            raise DegenerateSplit("gamma * P = 0 leaves no message power; need M = 1")
        eq_params = equivalent_dpc_params(params)
        x = sk_dpc.state_forward_coefficient(eq_params, gamma) * s_eq
        y = x + S + eta
        return sk_dpc.SchemeTrace(
            W=1,
            W_hat=1,
            M=1,
            X=x,
            Y=y,
            theta_hat=np.zeros(n),
            S=S,
            S_hat=estimate_true_state(y, params, gamma),
        )

    coeffs = equivalent_coefficients(params, gamma, n)
    theta = sk_dpc.message_to_theta(W, M)
    X = np.empty(n)
    Y = np.empty(n)
    state = sk_dpc.start_encoder(theta, s_eq, coeffs)
    for t in range(1, n + 1):
        y_prev = Y[t - 2] if t >= 2 else None
        x, state = sk_dpc.encode_step(state, coeffs, s_eq[t - 1], y_prev)
        X[t - 1] = x
        Y[t - 1] = x + s_eq[t - 1] + eta_eq[t - 1]

    theta_hat = np.empty(n)
    theta_hat[0] = Y[0] / coeffs.message_amp
    for k in range(1, n):
        theta_hat[k] = sk_dpc.decode_update(theta_hat[k - 1], Y[k], coeffs.mu[k - 1])
    return sk_dpc.SchemeTrace(
        W=int(W),
        W_hat=sk_dpc.finalize_decode(theta_hat[-1], M),
        M=M,
        X=X,
        Y=Y,
        theta_hat=theta_hat,
        S=S,
        S_hat=estimate_true_state(Y, params, gamma),
    )
