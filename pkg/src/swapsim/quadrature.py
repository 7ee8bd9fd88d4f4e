"""Adaptive Gauss-Legendre quadrature for exponentially weighted integrals.

All time integrals in the emission model have the form

    I = integral_0^inf (1/tau) exp(-t/tau) f(t) dt

with f bounded (products of decay envelopes and phase factors). The
domain is truncated at ``tail_factor * tau`` where the weight has
decayed to ~4e-18, and the finite interval is integrated with a
composite Gauss-Legendre rule whose panel count doubles until two
successive refinements agree. The integrand is entire in t, so the
composite rule converges exponentially even for fast phase
oscillation, which a rule on the compactified variable 1 - exp(-t/tau)
does not (its endpoint oscillation limits it to algebraic convergence).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(RuntimeError):
    """Raised when panel doubling fails to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for the adaptive composite rule.

    ``rel_tol`` is the stopping tolerance on the difference between
    successive refinements, relative to max(1, |I|).
    """

    rel_tol: float = 1e-9
    initial_panels: int = 4
    panel_order: int = 16
    max_panels: int = 4096
    tail_factor: float = 40.0

    def __post_init__(self) -> None:
        if self.rel_tol <= 0.0:
            raise ValueError("rel_tol must be positive")
        if self.initial_panels < 1 or self.panel_order < 2:
            raise ValueError("need at least one panel of order >= 2")


DEFAULT_QUADRATURE = QuadratureSpec()


@lru_cache(maxsize=None)
def _gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    nodes, weights = _gauss_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    w = (half[:, None] * weights[None, :]).reshape(-1)
    return t, w


def emission_nodes(
    tau: float, panels: int, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes for the decay-weighted integral.

    The returned weights already contain the (1/tau) exp(-t/tau)
    factor, so ``sum(w * f(t))`` approximates the weighted integral.
    """
    if not np.isfinite(tau) or tau <= 0.0:
        raise ValueError(f"decay time must be finite and positive, got {tau}")
    t, w = panel_nodes(0.0, spec.tail_factor * tau, panels, spec.panel_order)
    return t, w * np.exp(-t / tau) / tau


def decay_weighted(
    fn: Callable[[np.ndarray], np.ndarray],
    tau: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> complex:
    """Adaptive evaluation of integral_0^inf (1/tau) e^(-t/tau) fn(t) dt.

    ``fn`` must accept a vector of times. Panels double until two
    successive estimates differ by less than rel_tol * max(1, |I|);
    raises QuadratureError if max_panels is reached first.
    """
    panels = spec.initial_panels
    t, w = emission_nodes(tau, panels, spec)
    estimate = complex(np.sum(w * fn(t)))
    while panels <= spec.max_panels:
        panels *= 2
        t, w = emission_nodes(tau, panels, spec)
        refined = complex(np.sum(w * fn(t)))
        if abs(refined - estimate) <= spec.rel_tol * max(1.0, abs(refined)):
            return refined
        estimate = refined
    raise QuadratureError(
        f"no convergence to rel_tol={spec.rel_tol} within {spec.max_panels} panels"
    )
