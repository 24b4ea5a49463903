"""Hyperparametric edge-probability models.

An edge (u, v) gets its diffusion probability from the concatenated feature
vector of its endpoints and a global parameter vector theta living in an
axis-aligned cube.  Three response curves are supported, all nondecreasing
in the inner product theta . x_e:

    linear    clamp(theta . x_e, 0, 1)
    logistic  1 / (1 + exp(-theta . x_e))
    probit    Phi(theta . x_e)      (standard normal CDF)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODEL_KINDS = ("linear", "logistic", "probit")


class DimensionError(ValueError):
    """Raised when vector lengths disagree with the model dimension."""


@dataclass(frozen=True)
class HyperparamModel:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dim <= 0 or self.dim % 2 != 0:
            raise ValueError("model dimension must be an even positive integer")


@dataclass(frozen=True)
class HyperparamSpace:
    """Axis-aligned cube: each coordinate j ranges over center[j] +- radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.center.ndim != 1:
            raise ValueError("center must be a 1-d vector")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def edge_feature(fu, fv) -> np.ndarray:
    """Concatenate the two endpoint feature vectors (source first)."""
    fu = np.asarray(fu, dtype=float)
    fv = np.asarray(fv, dtype=float)
    if fu.shape != fv.shape or fu.ndim != 1:
        raise DimensionError(
            f"endpoint features must be 1-d and equally long, got {fu.shape} / {fv.shape}"
        )
    return np.concatenate([fu, fv])


def response(model: HyperparamModel, inner: float) -> float:
    """Edge probability as a function of the inner product theta . x_e."""
    if model.kind == "linear":
        return min(1.0, max(0.0, inner))
    if model.kind == "logistic":
        # guard exp overflow for very negative inner products
        if inner < -700.0:
            return 0.0
        return 1.0 / (1.0 + math.exp(-inner))
    return 0.5 * (1.0 + math.erf(inner / math.sqrt(2.0)))


def response_array(model: HyperparamModel, inner: np.ndarray) -> np.ndarray:
    """Vectorized `response` over an array of inner products."""
    inner = np.asarray(inner, dtype=float)
    if model.kind == "linear":
        return np.clip(inner, 0.0, 1.0)
    if model.kind == "logistic":
        out = np.empty_like(inner)
        np.negative(inner, out=out)
        np.clip(out, None, 700.0, out=out)
        np.exp(out, out=out)
        out += 1.0
        np.reciprocal(out, out=out)
        return out
    return 0.5 * (1.0 + np.array([math.erf(x / math.sqrt(2.0)) for x in inner.ravel()]).reshape(inner.shape))


def edge_probability(model: HyperparamModel, theta, xe) -> float:
    theta = np.asarray(theta, dtype=float)
    xe = np.asarray(xe, dtype=float)
    if theta.shape != (model.dim,) or xe.shape != (model.dim,):
        raise DimensionError(
            f"theta and edge feature must have length {model.dim}, got {theta.shape} / {xe.shape}"
        )
    return response(model, float(theta @ xe))


def prob_bounds(model: HyperparamModel, space: HyperparamSpace, xe) -> tuple[float, float]:
    """Tight probability interval over the whole parameter cube.

    Every supported response is nondecreasing in the inner product, so the
    extremes occur at inner = center . x_e -+ radius * sum_j |x_e[j]|.
    """
    xe = np.asarray(xe, dtype=float)
    if xe.shape != (model.dim,) or space.dim != model.dim:
        raise DimensionError("edge feature / space dimension mismatch")
    mid = float(space.center @ xe)
    span = space.radius * float(np.abs(xe).sum())
    return response(model, mid - span), response(model, mid + span)


def sample_hyperparameters(space: HyperparamSpace, count: int, rng) -> np.ndarray:
    """Draw `count` parameter vectors, each coordinate uniform in its interval."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo = space.center - space.radius
    hi = space.center + space.radius
    return rng.uniform(lo, hi, size=(count, space.dim))
