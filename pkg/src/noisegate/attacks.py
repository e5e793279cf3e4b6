"""Targeted adversarial example generation.

Two routes against the built-in classifier: a gradient-free genetic attack
(selection over target-class probability, uniform crossover, LSB-scale
mutation) and a projected-gradient attack that walks the sign of the exact
sample gradient while keeping the perturbation under a peak-dB budget.
"""

import math
from dataclasses import dataclass

import numpy as np

from noisegate.audio import (
    SILENT_PERTURBATION,
    AudioClip,
    I16_MAX,
    I16_MIN,
    Perturbation,
)
from noisegate.classifier import (
    Model,
    _forward_batch,
    pad_or_trim,
    predict,
    predict_samples_batch,
)
from noisegate.features import mfcc_backprop, mfcc_with_gradient_cache


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    k_max: int = 500
    temp: float = 0.02
    mutation_probability: float = 0.005
    mutation_range: int = 2
    init_noise_bits: int = 1
    elitism: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.temp <= 0:
            raise ValueError("temp must be positive")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError("mutation_probability must be in [0, 1]")
        if self.mutation_range < 0 or self.init_noise_bits < 0:
            raise ValueError("mutation_range and init_noise_bits must be >= 0")


@dataclass(frozen=True)
class PgdConfig:
    tau: float = -20.0
    steps: int = 100
    step_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size < 1:
            raise ValueError("step_size must be >= 1")


@dataclass
class AttackResult:
    adversarial: AudioClip
    perturbation: Perturbation
    success: bool
    iterations_used: int
    target: str
    distortion_db: float  # SILENT_PERTURBATION for an all-zero perturbation
    final_target_score: float
    distortion_trace: list | None = None  # per-iterate distortions (gradient attack)
    fitness_trace: list | None = None  # per-generation best target score (genetic attack)


def _relative_peak_db(original: AudioClip, perturbation: Perturbation) -> float:
    peak_delta = int(np.max(np.abs(perturbation.deltas)))
    peak_carrier = int(np.max(np.abs(original.samples.astype(np.int32))))
    if peak_delta == 0:
        return SILENT_PERTURBATION
    if peak_carrier == 0:
        return float("inf")
    return 20.0 * math.log10(peak_delta / peak_carrier)


def _result(model: Model, original: AudioClip, adv_samples: np.ndarray, target: str,
            iterations: int, distortion_trace=None, fitness_trace=None) -> AttackResult:
    adversarial = AudioClip(samples=adv_samples, sample_rate_hz=original.sample_rate_hz)
    deltas = adversarial.samples.astype(np.int32) - original.samples.astype(np.int32)
    perturbation = Perturbation(deltas=deltas)
    probs = predict_samples_batch(
        model, adversarial.samples[None, :], original.sample_rate_hz
    )[0]
    target_idx = model.label_index(target)
    return AttackResult(
        adversarial=adversarial,
        perturbation=perturbation,
        success=int(np.argmax(probs)) == target_idx,
        iterations_used=iterations,
        target=target,
        distortion_db=_relative_peak_db(original, perturbation),
        final_target_score=float(probs[target_idx]),
        distortion_trace=distortion_trace,
        fitness_trace=fitness_trace,
    )


def _child_rng(seed: int, generation: int, index: int) -> np.random.Generator:
    # one stream per (generation, candidate) so batched work stays reproducible
    return np.random.default_rng(np.random.SeedSequence((seed, generation, index)))


def _stable_softmax(scores: np.ndarray, temp: float) -> np.ndarray:
    # float64: Generator.choice validates sum(p) == 1 at double precision
    z = scores.astype(np.float64) / temp
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def ga_attack(model: Model, original: AudioClip, target: str, cfg: GaConfig = GaConfig()) -> AttackResult:
    """Gradient-free targeted attack on the built-in classifier.

    The population starts as copies of the original with the lowest
    `init_noise_bits` bits randomized. Each generation is scored by the
    model's target-class probability; parents are drawn from
    softmax(scores / temp), children are uniform crossovers, and every child
    is mutated samplewise with `mutation_probability`. Stops as soon as the
    best candidate is classified as the target, else after k_max generations
    (exhaustion is a success=False result, not an error).
    """
    target_idx = model.label_index(target)
    rate = original.sample_rate_hz
    n = len(original)

    if predict(model, original)[0] == target:
        return _result(model, original, original.samples.copy(), target, 0)

    size = cfg.population_size
    pop = np.empty((size, n), dtype=np.int16)
    if cfg.init_noise_bits > 0:
        mask = np.int16((1 << cfg.init_noise_bits) - 1)
        base = original.samples & np.int16(~mask)
        for i in range(size):
            rng = _child_rng(cfg.seed, 0, i)
            bits = rng.integers(0, mask + 1, size=n, dtype=np.int16)
            pop[i] = base | bits
    else:
        pop[:] = original.samples

    best_samples = pop[0].copy()
    best_score = -1.0
    fitness_trace = []

    for generation in range(cfg.k_max):
        # float32 fitness path: ~2x faster, deterministic, and the returned
        # result is always re-scored through the double-precision predictor
        probs = predict_samples_batch(model, pop, rate, dtype=np.float32)
        scores = probs[:, target_idx]
        best_idx = int(np.argmax(scores))
        fitness_trace.append(float(scores[best_idx]))
        if scores[best_idx] > best_score:
            best_score = float(scores[best_idx])
            best_samples = pop[best_idx].copy()
        if int(np.argmax(probs[best_idx])) == target_idx:
            return _result(model, original, pop[best_idx].copy(), target, generation,
                           fitness_trace=fitness_trace)

        selection = _stable_softmax(scores, cfg.temp)
        next_pop = np.empty_like(pop)
        start = 0
        if cfg.elitism:
            next_pop[0] = pop[best_idx]
            start = 1
        for i in range(start, size):
            rng = _child_rng(cfg.seed, generation + 1, i)
            parents = rng.choice(size, size=2, replace=True, p=selection)
            take_first = rng.random(n) < 0.5
            child = np.where(take_first, pop[parents[0]], pop[parents[1]]).astype(np.int32)
            mutate = rng.random(n) < cfg.mutation_probability
            count = int(mutate.sum())
            if count and cfg.mutation_range > 0:
                child[mutate] += rng.integers(
                    -cfg.mutation_range, cfg.mutation_range + 1, size=count
                )
            next_pop[i] = np.clip(child, I16_MIN, I16_MAX).astype(np.int16)
        pop = next_pop

    # k_max exhausted: the best-so-far goes back as a success=False result
    return _result(model, original, best_samples, target, cfg.k_max,
                   fitness_trace=fitness_trace)


def _target_loss_gradient(model: Model, samples_f: np.ndarray, rate: int, target_idx: int):
    """Cross-entropy toward the target and its gradient w.r.t. raw samples."""
    features, cache = mfcc_with_gradient_cache(samples_f, rate, model.feature_config)
    flat = features.reshape(-1)
    probs, activations = _forward_batch(model, flat[None, :])
    loss = -math.log(max(probs[0, target_idx], 1e-300))
    delta = probs.copy()
    delta[0, target_idx] -= 1.0
    for i in range(len(model.weights) - 1, 0, -1):
        delta = (delta @ model.weights[i]) * (activations[i] > 0.0)
    grad_features = (delta @ model.weights[0])[0].reshape(features.shape)
    grad_samples = mfcc_backprop(grad_features, cache)
    return loss, grad_samples, probs[0]


def pgd_attack(model: Model, original: AudioClip, target: str, cfg: PgdConfig = PgdConfig()) -> AttackResult:
    """Sign-gradient targeted attack under a relative peak-dB budget.

    Uses the analytic gradient through a float feature pipeline (the sample
    gradient of the MFCC+MLP composition). After every step the perturbation
    is rescaled so its peak stays within tau dB of the carrier peak, so the
    budget holds at every iterate; the per-iterate distortions are recorded
    in the result's distortion_trace.
    """
    target_idx = model.label_index(target)
    rate = original.sample_rate_hz
    x = original.samples.astype(np.float64)
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise ValueError("original clip is silent; the dB budget is undefined")
    bound = peak * 10.0 ** (cfg.tau / 20.0)

    n_eval = int(round(rate * 1.0))
    delta = np.zeros_like(x)
    trace = []
    iterations = 0

    for step in range(cfg.steps):
        adv = x + delta
        loss_input = pad_or_trim(adv, rate)
        _, grad, _ = _target_loss_gradient(model, loss_input, rate, target_idx)
        full_grad = np.zeros_like(x)
        usable = min(n_eval, x.size)
        full_grad[:usable] = grad[:usable]

        delta = delta - cfg.step_size * np.sign(full_grad)
        delta = np.clip(x + delta, I16_MIN, I16_MAX) - x  # stay a valid 16-bit signal
        peak_delta = float(np.max(np.abs(delta)))
        if peak_delta > bound:
            delta *= bound / peak_delta
            peak_delta = bound
        trace.append(
            SILENT_PERTURBATION if peak_delta == 0.0
            else 20.0 * math.log10(peak_delta) - 20.0 * math.log10(peak)
        )
        iterations = step + 1

        rounded = _project_rounded(x, delta, bound)
        probs = predict_samples_batch(model, rounded[None, :], rate)[0]
        if int(np.argmax(probs)) == target_idx:
            break

    final = _project_rounded(x, delta, bound)
    return _result(model, original, final, target, iterations, distortion_trace=trace)


def _project_rounded(x: np.ndarray, delta: np.ndarray, bound: float) -> np.ndarray:
    """Round the float perturbation to integers without breaching the dB bound."""
    rounded = np.round(delta)
    cap = math.floor(bound)
    rounded = np.clip(rounded, -cap, cap)
    return np.clip(x + rounded, I16_MIN, I16_MAX).astype(np.int16)
