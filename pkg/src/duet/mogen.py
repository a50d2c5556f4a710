"""Diffusion noising, a pluggable denoiser loop and contact-distance guidance.

Everything operates on joint positions of a paired motion ``(x, y)``, each
shaped ``(frames, joints, 3)``. Guidance nudges a sample toward the
reference's close-range joint distances; the default denoiser pulls the
running estimate toward a motion-matched prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from duet.core.kinematics import joint_distance_tensor
from duet.errors import DomainError, ShapeMismatch

DEFAULT_GAMMA = 0.3
DEFAULT_LAMBDA = 0.01
DEFAULT_T = 1000


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    betas: np.ndarray

    @property
    def T(self) -> int:
        return int(self.betas.size)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        """``alpha_bars[t-1]`` is the cumulative product up to step t."""
        return np.cumprod(self.alphas)

    def alpha_bar(self, t: int) -> float:
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])


def linear_beta_schedule(T: int = DEFAULT_T, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if T < 1 or not (0.0 < beta_start < 1.0) or not (0.0 < beta_end < 1.0):
        raise DomainError("need T >= 1 and betas inside (0, 1)")
    if T > 1 and not beta_start < beta_end:
        raise DomainError("beta_start must be below beta_end")
    if T == 1:
        betas = np.array([beta_start])
    else:
        betas = beta_start + np.arange(T) / (T - 1) * (beta_end - beta_start)
    betas.setflags(write=False)
    return NoiseSchedule(betas)


def _pair(pair) -> tuple[np.ndarray, np.ndarray]:
    x, y = pair
    x = np.asarray(getattr(x, "positions", x), dtype=np.float64)
    y = np.asarray(getattr(y, "positions", y), dtype=np.float64)
    if x.shape != y.shape or x.ndim != 3 or x.shape[-1] != 3:
        raise ShapeMismatch("pair members must both be (frames, joints, 3)")
    return x, y


def forward_noise(pair0, t: int, schedule: NoiseSchedule, rng: np.random.Generator):
    """Closed-form marginal ``sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps`` per member."""
    x, y = _pair(pair0)
    if not 0 <= t <= schedule.T:
        raise DomainError(f"t must lie in [0, {schedule.T}]")
    if t == 0:
        return x.copy(), y.copy()
    ab = schedule.alpha_bar(t)
    ex = rng.standard_normal(x.shape)
    ey = rng.standard_normal(y.shape)
    return np.sqrt(ab) * x + np.sqrt(1.0 - ab) * ex, np.sqrt(ab) * y + np.sqrt(1.0 - ab) * ey


@dataclass(frozen=True, eq=False)
class ContactConstraint:
    reference: np.ndarray  # D-bar[i, j1, j2]
    gamma: float = DEFAULT_GAMMA
    lambda_g: float = DEFAULT_LAMBDA

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64)
        if ref.ndim != 3 or np.any(ref < 0) or not np.all(np.isfinite(ref)):
            raise ValueError("reference distances must be a finite non-negative (F, J, J) tensor")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "reference", ref)

    @classmethod
    def from_pair(cls, pair, gamma: float = DEFAULT_GAMMA, lambda_g: float = DEFAULT_LAMBDA) -> "ContactConstraint":
        x, y = _pair(pair)
        return cls(joint_distance_tensor(x, y), gamma, lambda_g)

    @property
    def active(self) -> np.ndarray:
        return self.reference < self.gamma


def contact_loss(pair, constraint: ContactConstraint) -> float:
    """``sum |D-bar - D|`` over entries whose reference distance is below gamma."""
    x, y = _pair(pair)
    D = joint_distance_tensor(x, y)
    if D.shape != constraint.reference.shape:
        raise ShapeMismatch("pair does not match the constraint's shape")
    return float(np.sum(np.abs(constraint.reference - D) * constraint.active))


def contact_gradient(pair, constraint: ContactConstraint) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of contact_loss with respect to each member's positions.

    For an active entry, ``d|Db - D|/dx_j1 = -sign(Db - D) * (x_j1 - y_j2) / D``
    and the opposite for ``y_j2``; zero where ``Db == D`` or ``D == 0``.
    """
    x, y = _pair(pair)
    diff = x[:, :, None, :] - y[:, None, :, :]  # (F, J1, J2, 3)
    D = np.linalg.norm(diff, axis=-1)
    if D.shape != constraint.reference.shape:
        raise ShapeMismatch("pair does not match the constraint's shape")
    coef = -np.sign(constraint.reference - D) * constraint.active
    safe = np.where(D > 0.0, D, 1.0)
    coef = np.where(D > 0.0, coef / safe, 0.0)
    g = coef[..., None] * diff
    return g.sum(axis=2), -g.sum(axis=1)


def contact_guidance_step(pair, constraint: ContactConstraint, lambda_g: float | None = None):
    """One descent step ``S - lambda_g * grad``; the contact loss shrinks for small steps."""
    x, y = _pair(pair)
    lam = constraint.lambda_g if lambda_g is None else lambda_g
    gx, gy = contact_gradient((x, y), constraint)
    return x - lam * gx, y - lam * gy


def safeguarded_guidance_step(pair, constraint: ContactConstraint, lambda_g: float | None = None, max_halvings: int = 12):
    """Guidance step whose size is halved until the contact loss does not rise."""
    x, y = _pair(pair)
    lam = constraint.lambda_g if lambda_g is None else lambda_g
    base = contact_loss((x, y), constraint)
    if base == 0.0:
        return x, y
    gx, gy = contact_gradient((x, y), constraint)
    for _ in range(max_halvings):
        cand = (x - lam * gx, y - lam * gy)
        if contact_loss(cand, constraint) <= base:
            return cand
        lam *= 0.5
    return x, y


class Denoiser(Protocol):
    def __call__(self, noised, t: int, prior, text: str | None) -> tuple[np.ndarray, np.ndarray]:
        """Estimate of the clean pair from a noised pair at step t."""
        ...


class PriorPullDenoiser:
    """Clean estimate ``(1 - w) * x_t + w * prior``."""

    def __init__(self, w: float = 0.8):
        if not 0.0 <= w <= 1.0:
            raise ValueError("w must lie in [0, 1]")
        self.w = w

    def __call__(self, noised, t, prior, text=None):
        (x, y), (px, py) = _pair(noised), _pair(prior)
        return (1.0 - self.w) * x + self.w * px, (1.0 - self.w) * y + self.w * py


def sample_with_guidance(
    schedule: NoiseSchedule,
    denoiser: Denoiser | None,
    prior_pair,
    constraint: ContactConstraint | None,
    rng: np.random.Generator,
    text: str | None = None,
    guidance_steps: int = 1,
    safeguard: bool = True,
    trace: list | None = None,
):
    """Ancestral sampling from ``t = T`` down to 1.

    Each step estimates the clean pair, applies contact guidance to that
    estimate and draws ``x_{t-1}`` from the Gaussian posterior
    ``q(x_{t-1} | x_t, x0_hat)``; the last step returns the guided estimate.
    With ``safeguard`` each guidance step backs off rather than raise the loss.
    ``trace`` collects ``(t, contact loss of the guided estimate)`` per step.
    """
    step = safeguarded_guidance_step if safeguard else contact_guidance_step
    denoiser = denoiser or PriorPullDenoiser()
    px, py = _pair(prior_pair)
    x = rng.standard_normal(px.shape)
    y = rng.standard_normal(py.shape)
    for t in range(schedule.T, 0, -1):
        x0, y0 = denoiser((x, y), t, (px, py), text)
        if constraint is not None:
            for _ in range(guidance_steps):
                x0, y0 = step((x0, y0), constraint)
            if trace is not None:
                trace.append((t, contact_loss((x0, y0), constraint)))
        if t == 1:
            return x0, y0
        beta = float(schedule.betas[t - 1])
        ab_t, ab_prev = schedule.alpha_bar(t), schedule.alpha_bar(t - 1)
        a_t = 1.0 - beta
        c0 = np.sqrt(ab_prev) * beta / (1.0 - ab_t)
        ct = np.sqrt(a_t) * (1.0 - ab_prev) / (1.0 - ab_t)
        sigma = np.sqrt(beta * (1.0 - ab_prev) / (1.0 - ab_t))
        x = c0 * x0 + ct * x + sigma * rng.standard_normal(x.shape)
        y = c0 * y0 + ct * y + sigma * rng.standard_normal(y.shape)
    return x, y  # unreachable for T >= 1
