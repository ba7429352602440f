"""
advlab - NTK Engine
Two-layer ReLU network f_NN(w,x) = Σ uⱼ h(θⱼᵀx)/√(mp), its first-order linearization at w₀,
empirical / arccos / linearized kernels, the gradient-descent fixed point and NTK risk metrics
"""

import logging
import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from advlab.engines.datagen import draw_unit_entries, sample_design
from advlab.models.errors import InvalidArgumentError, NumericalError, PreconditionError
from advlab.models.reports import (
    DesignDistribution,
    DesignSample,
    KernelTriple,
    McEstimate,
    NtkFit,
    NtkModel,
    RiskReport,
)
from advlab.models.spectrum import Spectrum
from advlab.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

DEFAULT_PARAM_BUDGET = 50_000_000
SINGULAR_RTOL = 1e-12
DIVERGENCE_PATIENCE = 10
PGA_STEPS = 50
MC_BATCH = 512


class ForwardMode(str, Enum):
    NN = "NN"
    NTK = "NTK"


# ---------------------------------------------------------------------------
# model and parameter layout
# ---------------------------------------------------------------------------

def init_network(
    m: int,
    p: int,
    seed: int = 0,
    radius: float = 1.0,
    max_params: int = DEFAULT_PARAM_BUDGET,
) -> NtkModel:
    """w₀ ~ N(0, I) of length m(p+1), neuron-major with θⱼ before uⱼ"""
    if m < 1 or p < 1:
        raise InvalidArgumentError(f"network needs m >= 1 and p >= 1, got m={m}, p={p}")
    if radius <= 0:
        raise InvalidArgumentError(f"neighborhood radius must be positive, got {radius}")
    size = m * (p + 1)
    if size > max_params:
        raise InvalidArgumentError(f"m(p+1)={size} exceeds the parameter budget {max_params}")
    w0 = derive_rng(seed, "ntk_init", m, p).standard_normal(size)
    w0.setflags(write=False)
    logger.debug(f"Initialized network m={m}, p={p} ({size} parameters)")
    return NtkModel(m=m, p=p, w0=w0, seed=int(seed), radius=float(radius))


def _split_params(model: NtkModel, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if w.shape != (model.m * (model.p + 1),):
        raise InvalidArgumentError(f"parameter vector has shape {w.shape}, expected ({model.m * (model.p + 1)},)")
    block = w.reshape(model.m, model.p + 1)
    return block[:, : model.p], block[:, model.p]


def _as_rows(model: NtkModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.p:
        raise InvalidArgumentError(f"inputs must have dimension p={model.p}, got shape {X.shape}")
    return X


def _activations(model: NtkModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """H = h(XΘ₀ᵀ) and D = h′(XΘ₀ᵀ) with h′(0) = 0"""
    pre = X @ model.theta0.T
    return np.maximum(pre, 0.0), (pre > 0).astype(float)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _gradient_dot(model: NtkModel, X: np.ndarray, H: np.ndarray, D: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """∇_w f_NN(w₀, xᵢ)ᵀΔ for each row"""
    d_theta, d_u = _split_params(model, delta)
    moved = (D * model.u0) * (X @ d_theta.T)
    return model.scale * (moved.sum(axis=1) + H @ d_u)


def forward_batch(model: NtkModel, w: np.ndarray, X: np.ndarray, mode: ForwardMode = ForwardMode.NN) -> np.ndarray:
    X = _as_rows(model, X)
    mode = ForwardMode(mode)
    if mode == ForwardMode.NN:
        theta, u = _split_params(model, w)
        return model.scale * (np.maximum(X @ theta.T, 0.0) @ u)
    H, D = _activations(model, X)
    base = model.scale * (H @ model.u0)
    return base + _gradient_dot(model, X, H, D, np.asarray(w, dtype=float) - model.w0)


def forward(model: NtkModel, w: np.ndarray, x: np.ndarray, mode: ForwardMode = ForwardMode.NN) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise InvalidArgumentError(f"input has shape {x.shape}, expected ({model.p},)")
    return float(forward_batch(model, w, x, mode)[0])


def ntk_features(model: NtkModel, x: np.ndarray) -> np.ndarray:
    """∇_w f_NN(w₀, x), laid out like w₀"""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise InvalidArgumentError(f"input has shape {x.shape}, expected ({model.p},)")
    return feature_matrix(model, x[None, :])[0]


def feature_matrix(model: NtkModel, X: np.ndarray) -> np.ndarray:
    """∇F, one feature row per input (n × m(p+1))"""
    X = _as_rows(model, X)
    H, D = _activations(model, X)
    n = X.shape[0]
    block = np.empty((n, model.m, model.p + 1))
    block[:, :, : model.p] = (D * model.u0)[:, :, None] * X[:, None, :]
    block[:, :, model.p] = H
    return model.scale * block.reshape(n, -1)


def _transpose_apply(model: NtkModel, X: np.ndarray, H: np.ndarray, D: np.ndarray, c: np.ndarray) -> np.ndarray:
    """∇Fᵀc assembled neuron by neuron"""
    block = np.empty((model.m, model.p + 1))
    block[:, : model.p] = model.u0[:, None] * ((D * c[:, None]).T @ X)
    block[:, model.p] = H.T @ c
    return model.scale * block.reshape(-1)


def input_gradients(model: NtkModel, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Rows ∇ₓf_NTK(w, xᵢ) = Σⱼ h′(θ₀ⱼᵀxᵢ)[uⱼθ₀ⱼ + u₀ⱼ(θⱼ − θ₀ⱼ)]/√(mp)"""
    X = _as_rows(model, X)
    theta, u = _split_params(model, w)
    _, D = _activations(model, X)
    mixed = u[:, None] * model.theta0 + model.u0[:, None] * (theta - model.theta0)
    return model.scale * (D @ mixed)


def input_gradient(model: NtkModel, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise InvalidArgumentError(f"input has shape {x.shape}, expected ({model.p},)")
    return input_gradients(model, w, x)[0]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _empirical_kernel(model: NtkModel, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Ha, Da = _activations(model, A)
    Hb, Db = _activations(model, B)
    gate = (Da * model.u0 ** 2) @ Db.T
    return model.scale ** 2 * (Ha @ Hb.T + (A @ B.T) * gate)


def empirical_kernel(model: NtkModel, X: np.ndarray) -> np.ndarray:
    """K_emp = ∇F∇Fᵀ from activation and gate matrices"""
    X = _as_rows(model, X)
    K = _empirical_kernel(model, X, X)
    return 0.5 * (K + K.T)


def arccos_kernel(X: np.ndarray) -> np.ndarray:
    """Infinite-width NTK for standard-normal weights"""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise InvalidArgumentError(f"zero-norm input rows {np.flatnonzero(norms == 0).tolist()}: cosine undefined")
    gram = X @ X.T
    outer = np.outer(norms, norms)
    cos = np.clip(gram / outer, -1.0, 1.0)
    K = gram / (math.pi * p) * np.arccos(-cos) + outer / (2.0 * math.pi * p) * np.sqrt(1.0 - cos ** 2)
    return 0.5 * (K + K.T)


def linearized_kernel(X: np.ndarray, spec: Spectrum) -> np.ndarray:
    """K̃ = (l/p)(1/(2π) + 3tr(Σ²)/(4πl²))11ᵀ + XXᵀ/(2p) + (l/p)(1/2 − 1/(2π))I"""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    l_trace = spec.trace
    rank_one = l_trace / p * (1.0 / (2.0 * math.pi) + 3.0 * spec.trace_sq / (4.0 * math.pi * l_trace ** 2))
    ridge = l_trace / p * (0.5 - 0.5 / math.pi)
    return rank_one * np.ones((n, n)) + (X @ X.T) / (2.0 * p) + ridge * np.eye(n)


def kernels(model: NtkModel, X: np.ndarray, spec: Spectrum) -> KernelTriple:
    X = _as_rows(model, X)
    if spec.truncation_dim != model.p:
        raise InvalidArgumentError(f"spectrum dimension {spec.truncation_dim} differs from p={model.p}")
    K_emp = empirical_kernel(model, X)
    K_arc = arccos_kernel(X)
    K_lin = linearized_kernel(X, spec)
    errors = (float(np.linalg.norm(K_emp - K_arc, 2)), float(np.linalg.norm(K_arc - K_lin, 2)))
    logger.debug(f"Kernels n={X.shape[0]}, m={model.m}: ‖K_emp−K_arc‖={errors[0]:.3e}, ‖K_arc−K_lin‖={errors[1]:.3e}")
    return KernelTriple(K_emp=K_emp, K_arc=K_arc, K_lin=K_lin, op_norm_errors=errors)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _guard_kernel(K: np.ndarray) -> np.ndarray:
    mu = linalg.eigvalsh(K)
    if mu[-1] <= 0 or mu[0] < SINGULAR_RTOL * mu[-1]:
        raise NumericalError(f"singular NTK Gram matrix: μₙ={mu[0]:.3e}, μ₁={mu[-1]:.3e}")
    return mu


def ntk_fixed_point(model: NtkModel, X: np.ndarray, y: np.ndarray) -> NtkFit:
    """ŵ = w₀ + ∇Fᵀ(∇F∇Fᵀ)⁻¹(y − F)"""
    X = _as_rows(model, X)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise InvalidArgumentError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    H, D = _activations(model, X)
    K = empirical_kernel(model, X)
    _guard_kernel(K)
    residual = y - model.scale * (H @ model.u0)
    coef = linalg.solve(K, residual, assume_a="pos")
    w_hat = model.w0 + _transpose_apply(model, X, H, D, coef)
    return NtkFit(
        w_hat=w_hat,
        coef=coef,
        solve_residual=float(np.linalg.norm(K @ coef - residual)),
        kernel=K,
    )


def gd_train(
    model: NtkModel,
    X: np.ndarray,
    y: np.ndarray,
    gamma: float,
    steps: int,
    log_every: int = 1,
) -> NtkFit:
    """
    LINEARIZED GRADIENT DESCENT
    - w_{t+1} = w_t − (γ/n)Σ(f_NTK(w_t,xᵢ) − yᵢ)∇f(xᵢ), run in coefficient space w_t − w₀ = ∇Fᵀa_t
    - gd_trace holds ‖w_t − ŵ‖ at every logged step, step 0 included
    - converges iff γ < 2n/λ_max(K); monotone without oscillation when γ < n/λ_max(K)
    - γ >= 2n/λ_max(K) raises NumericalError before any step is taken
    """
    if gamma <= 0:
        raise InvalidArgumentError(f"learning rate must be positive, got {gamma}")
    if steps < 0 or log_every < 1:
        raise InvalidArgumentError(f"need steps >= 0 and log_every >= 1, got {steps}, {log_every}")
    closed = ntk_fixed_point(model, X, y)
    X = _as_rows(model, X)
    n = X.shape[0]
    K = closed.kernel
    threshold = n / float(linalg.eigvalsh(K)[-1])
    if gamma >= 2.0 * threshold:
        raise NumericalError(
            f"learning rate γ={gamma:.6g} is past the stability threshold γ < 2n/λ_max(K) = {2.0 * threshold:.6g}"
        )
    if gamma >= threshold:
        logger.warning(f"⚠️ γ={gamma:.6g} >= n/λ_max(K) = {threshold:.6g}: iterates will oscillate while converging")
    target = y - model.scale * (_activations(model, X)[0] @ model.u0)

    def distance(a: np.ndarray) -> float:
        gap = a - closed.coef
        return math.sqrt(max(float(gap @ K @ gap), 0.0))

    a = np.zeros(n)
    trace: List[float] = [distance(a)]
    rising = 0
    for step in range(1, steps + 1):
        a = a - (gamma / n) * (K @ a - target)
        if step % log_every and step != steps:
            continue
        current = distance(a)
        if not math.isfinite(current):
            raise NumericalError(f"gradient descent overflowed at step {step}; stability threshold γ < {threshold:.6g}")
        rising = rising + 1 if current > trace[-1] else 0
        trace.append(current)
        if rising >= DIVERGENCE_PATIENCE:
            raise NumericalError(
                f"gradient descent diverged (γ={gamma:.6g}); stability threshold γ < n/λ_max(K) = {threshold:.6g}"
            )
    H, D = _activations(model, X)
    return NtkFit(
        w_hat=model.w0 + _transpose_apply(model, X, H, D, a),
        coef=a,
        solve_residual=float(np.linalg.norm(K @ a - target)),
        kernel=K,
        gd_trace=trace,
    )


# ---------------------------------------------------------------------------
# targets and tasks
# ---------------------------------------------------------------------------

def make_target(model: NtkModel, X_holdout: np.ndarray, radius: Optional[float] = None, seed: int = 0) -> np.ndarray:
    """w⋆ = w₀ + R·v/‖v‖ with v a random element of the row space of the held-out ∇F"""
    radius = model.radius if radius is None else float(radius)
    if radius < 0:
        raise InvalidArgumentError(f"target radius must be non-negative, got {radius}")
    X_holdout = _as_rows(model, X_holdout)
    H, D = _activations(model, X_holdout)
    c = derive_rng(seed, "ntk_target", X_holdout.shape[0]).standard_normal(X_holdout.shape[0])
    direction = _transpose_apply(model, X_holdout, H, D, c)
    length = float(np.linalg.norm(direction))
    if length == 0:
        raise NumericalError("held-out features span nothing; cannot build a target direction")
    return model.w0 + radius * direction / length


def sample_ntk_task(
    model: NtkModel,
    spec: Spectrum,
    n: int,
    sigma2: float,
    w_star: np.ndarray,
    seed: int = 0,
    dist: DesignDistribution = DesignDistribution.GAUSSIAN,
) -> Tuple[DesignSample, np.ndarray]:
    """Design from spec and labels y = f_NTK(w⋆, X) + ε"""
    if sigma2 < 0:
        raise InvalidArgumentError(f"noise variance must be non-negative, got {sigma2}")
    design = sample_design(spec, n, dist, seed)
    y = forward_batch(model, w_star, design.X, ForwardMode.NTK)
    if sigma2 > 0:
        y = y + math.sqrt(sigma2) * draw_unit_entries(derive_rng(seed, "ntk_noise", n), n, DesignDistribution.GAUSSIAN)
    return design, y


# ---------------------------------------------------------------------------
# risks
# ---------------------------------------------------------------------------

def _fresh_inputs(spec: Spectrum, trials: int, seed: int) -> np.ndarray:
    rng = derive_rng(seed, "ntk_test", trials)
    return rng.standard_normal((trials, spec.truncation_dim)) * np.sqrt(spec.eigenvalues)


def _batched(trials: int):
    for start in range(0, trials, MC_BATCH):
        yield slice(start, min(start + MC_BATCH, trials))


def _input_shift(
    model: NtkModel, X: np.ndarray, H: np.ndarray, D: np.ndarray, Dt: np.ndarray, coef: np.ndarray
) -> np.ndarray:
    """
    Rows ∂²f/∂w∂x·∇Fᵀc at each test gate row of Dt: the move of ∇ₓf_NTK when ŵ − w₀ = ∇Fᵀc
    """
    outgoing = H.T @ coef
    through_u = Dt @ (outgoing[:, None] * model.theta0)
    gate = (Dt * model.u0 ** 2) @ D.T
    through_theta = (gate * coef[None, :]) @ X
    return model.scale ** 2 * (through_u + through_theta)


def ntk_risks(
    model: NtkModel,
    fit: NtkFit,
    w_star: np.ndarray,
    sigma2: float,
    alpha: float,
    trials: int,
    seed: int,
    spec: Spectrum,
    X: Optional[np.ndarray] = None,
) -> RiskReport:
    """
    NTK RISK METRICS
    - std risk by MC over fresh x; with the training design X it is averaged over label noise
      (bias through the noiseless fit, variance σ²‖K⁻¹k(x)‖²), without X it is the pointwise
      E_x(f_NTK(ŵ,x) − f_NTK(w⋆,x))²
    - grad_proxy = α²E‖∇ₓf_NTK(ŵ,x)‖², grad_baseline the same at w₀
    - grad_shift = α²E‖∂²f/∂w∂x·(ŵ − w₀)‖², the part of the proxy that grows with n
    - with X both gradient terms are integrated over ε in closed form: the noise move is
      K⁻¹ε through the same map, contributing σ²‖S(x)K⁻¹‖²_F
    - norm fields hold ‖ŵ − w₀‖²
    """
    if trials < 2:
        raise InvalidArgumentError(f"ntk risks need trials >= 2, got {trials}")
    if sigma2 < 0 or alpha < 0:
        raise InvalidArgumentError(f"need σ² >= 0 and α >= 0, got {sigma2}, {alpha}")
    w_star = np.asarray(w_star, dtype=float)
    offset = float(np.linalg.norm(w_star - model.w0))
    if offset > model.radius * (1.0 + 1e-9):
        raise PreconditionError(f"‖w⋆ − w₀‖ = {offset:.6g} exceeds the neighborhood radius R = {model.radius:.6g}")

    tests = _fresh_inputs(spec, trials, seed)
    target_move = w_star - model.w0
    errors = np.empty(trials)
    noise_part = np.zeros(trials)
    proxy = np.empty(trials)
    shift = np.empty(trials)
    baseline = np.empty(trials)

    if X is not None:
        X = _as_rows(model, X)
        H, D = _activations(model, X)
        K = fit.kernel
        signal = _gradient_dot(model, X, H, D, target_move)
        clean_coef = linalg.solve(K, signal, assume_a="pos")
        clean_move = _transpose_apply(model, X, H, D, clean_coef) - target_move
        K_inv = linalg.solve(K, np.eye(K.shape[0]), assume_a="pos")

    for rows in _batched(trials):
        batch = tests[rows]
        Ht, Dt = _activations(model, batch)
        at_init = input_gradients(model, model.w0, batch)
        baseline[rows] = np.sum(at_init ** 2, axis=1)
        if X is None:
            errors[rows] = _gradient_dot(model, batch, Ht, Dt, fit.w_hat - w_star)
            moved = input_gradients(model, fit.w_hat, batch) - at_init
            proxy[rows] = np.sum((at_init + moved) ** 2, axis=1)
            shift[rows] = np.sum(moved ** 2, axis=1)
            continue
        errors[rows] = _gradient_dot(model, batch, Ht, Dt, clean_move)
        cross = _empirical_kernel(model, batch, X)
        spread = linalg.solve(K, cross.T, assume_a="pos")
        noise_part[rows] = sigma2 * np.sum(spread ** 2, axis=0)
        moved = _input_shift(model, X, H, D, Dt, clean_coef)
        noise_moves = np.zeros(batch.shape[0])
        if sigma2 > 0:
            for k in range(K_inv.shape[1]):
                noise_moves += np.sum(_input_shift(model, X, H, D, Dt, K_inv[:, k]) ** 2, axis=1)
        proxy[rows] = np.sum((at_init + moved) ** 2, axis=1) + sigma2 * noise_moves
        shift[rows] = np.sum(moved ** 2, axis=1) + sigma2 * noise_moves

    bias = errors ** 2
    std_samples = bias + noise_part
    alpha_sq = alpha ** 2
    move = float(np.sum((fit.w_hat - model.w0) ** 2))
    return RiskReport(
        std_bias=float(np.mean(bias)),
        std_variance=float(np.mean(noise_part)),
        norm_bias=move,
        norm_variance=0.0,
        budget=float(alpha),
        mc_estimate=McEstimate.from_samples(std_samples),
        model="ntk",
        grad_proxy=McEstimate.from_samples(alpha_sq * proxy),
        grad_shift=McEstimate.from_samples(alpha_sq * shift),
        grad_baseline=McEstimate.from_samples(alpha_sq * baseline),
    )


def adversarial_pga(
    model: NtkModel,
    w_hat: np.ndarray,
    w_star: np.ndarray,
    x: np.ndarray,
    alpha: float,
    steps: int = PGA_STEPS,
    step_size: Optional[float] = None,
) -> Dict[str, float]:
    """Projected gradient ascent on (f_NTK(ŵ, x+δ) − f_NTK(w⋆, x))² over ‖δ‖ <= α (validation only)"""
    if alpha < 0:
        raise InvalidArgumentError(f"budget must be non-negative, got {alpha}")
    x = np.asarray(x, dtype=float)
    step_size = alpha / 10.0 if step_size is None else float(step_size)
    reference = forward(model, w_star, x, ForwardMode.NTK)

    def objective(delta: np.ndarray) -> float:
        return (forward(model, w_hat, x + delta, ForwardMode.NTK) - reference) ** 2

    delta = np.zeros_like(x)
    best = objective(delta)
    for _ in range(steps):
        error = forward(model, w_hat, x + delta, ForwardMode.NTK) - reference
        grad = input_gradient(model, w_hat, x + delta)
        ascent = grad * (np.sign(error) if error != 0 else 1.0)
        length = float(np.linalg.norm(ascent))
        if length == 0:
            break
        delta = delta + step_size * ascent / length
        radius = float(np.linalg.norm(delta))
        if radius > alpha:
            delta = delta * (alpha / radius)
        best = max(best, objective(delta))
    return {"sup_value": best, "clean_value": objective(np.zeros_like(x)), "steps": float(steps)}
