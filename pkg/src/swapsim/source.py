"""Physical model of one XX-X cascade photon-pair source.

A biexciton-exciton cascade emits a polarization-entangled photon pair.
Conditioned on the exciton recombination time t the pair state carries
three imperfections: spin scattering (tau_ss) depolarizes the diagonal,
cross-dephasing (tau_hv) and spin scattering damp the HH-VV coherence,
and the fine structure splitting S precesses its phase at S/hbar.
Detected pairs are cascade pairs with probability k, otherwise
unpolarized background. Pure dephasing (t2_star) does not alter the
pair state itself; it only degrades two-photon interference and enters
the Bell-state-measurement model in :mod:`swapsim.swap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import BellKind, DensityOperator, bell_state, fidelity

# hbar in micro-eV * ns; the single authoritative definition.
HBAR_UEV_NS = 0.6582119569

INF = math.inf


def _check_decay_time(name: str, value: float) -> None:
    # math.inf encodes "no decoherence" exactly; NaN and <= 0 are rejected.
    if math.isnan(value) or value <= 0.0:
        raise ValueError(f"{name} must be positive (inf allowed), got {value}")


@dataclass(frozen=True)
class SourceParams:
    """One XX-X cascade source.

    s_ueV       fine structure splitting, micro-eV
    tau_x_ns    exciton lifetime, ns (finite)
    tau_ss_ns   spin-scattering time, ns
    tau_hv_ns   cross-dephasing time, ns
    t2_star_ns  pure dephasing time, ns
    k           fraction of detected pairs originating from the cascade
    """

    s_ueV: float
    tau_x_ns: float
    tau_ss_ns: float = INF
    tau_hv_ns: float = INF
    t2_star_ns: float = INF
    k: float = 1.0

    def __post_init__(self) -> None:
        if self.s_ueV < 0.0 or not math.isfinite(self.s_ueV):
            raise ValueError(f"s_ueV must be finite and >= 0, got {self.s_ueV}")
        if not math.isfinite(self.tau_x_ns) or self.tau_x_ns <= 0.0:
            raise ValueError(f"tau_x_ns must be finite and positive, got {self.tau_x_ns}")
        _check_decay_time("tau_ss_ns", self.tau_ss_ns)
        _check_decay_time("tau_hv_ns", self.tau_hv_ns)
        _check_decay_time("t2_star_ns", self.t2_star_ns)
        if not 0.0 <= self.k <= 1.0:
            raise ValueError(f"k must lie in [0, 1], got {self.k}")

    @property
    def fss_phase_rate(self) -> float:
        """FSS precession rate S/hbar in rad/ns."""
        return self.s_ueV / HBAR_UEV_NS

    @property
    def fss_lifetime_product(self) -> float:
        """Dimensionless S * tau_x / hbar."""
        return self.s_ueV * self.tau_x_ns / HBAR_UEV_NS


@dataclass(frozen=True)
class CoherenceFactors:
    """Exponential-weighted time averages of the three decay envelopes."""

    g1_prime_hv: float
    g1_hv: float
    g1_deph: float

    def __post_init__(self) -> None:
        for name in ("g1_prime_hv", "g1_hv", "g1_deph"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        # The extra cross-dephasing channel can only reduce coherence.
        if self.g1_hv > self.g1_prime_hv + 1e-12:
            raise ValueError("g1_hv exceeds g1_prime_hv")


def coherence_factors(p: SourceParams) -> CoherenceFactors:
    """g' = 1/(1 + tx/tss), g = 1/(1 + tx/tss + tx/thv), gd = 1/(1 + 2 tx/t2*)."""
    u = p.tau_x_ns / p.tau_ss_ns
    v = p.tau_x_ns / p.tau_hv_ns
    w = 2.0 * p.tau_x_ns / p.t2_star_ns
    return CoherenceFactors(
        g1_prime_hv=1.0 / (1.0 + u),
        g1_hv=1.0 / (1.0 + u + v),
        g1_deph=1.0 / (1.0 + w),
    )


def cascade_state_at(p: SourceParams, t: float) -> DensityOperator:
    """Pair state conditioned on exciton recombination time t (ns).

    In the {HH, HV, VH, VV} basis the diagonal is (1 +- d)/4 with
    d = exp(-t/tau_ss), and the only coherence is
    <HH|rho|VV> = exp(-t (1/tau_ss + 1/tau_hv)) exp(i S t / hbar) / 2.
    """
    if t < 0.0:
        raise ValueError(f"emission time must be >= 0, got {t}")
    d = math.exp(-t / p.tau_ss_ns)
    damp = math.exp(-t * (1.0 / p.tau_ss_ns + 1.0 / p.tau_hv_ns))
    coh = 0.5 * damp * np.exp(1j * p.fss_phase_rate * t)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = 0.25 * (1.0 + d)
    m[1, 1] = m[2, 2] = 0.25 * (1.0 - d)
    m[0, 3] = coh
    m[3, 0] = np.conj(coh)
    return DensityOperator(m)


def _integrated_coherence(p: SourceParams) -> complex:
    """Closed form of the decay-weighted HH-VV coherence integral."""
    rates = 1.0 + p.tau_x_ns / p.tau_ss_ns + p.tau_x_ns / p.tau_hv_ns
    return 0.5 / (rates - 1j * p.fss_lifetime_product)


def pair_state(p: SourceParams) -> DensityOperator:
    """Time-integrated detected pair state.

    k * integral of (1/tau_x) e^(-t/tau_x) cascade_state_at(t) dt,
    evaluated entry-wise in closed form, mixed with (1-k) I/4.
    """
    g = coherence_factors(p)
    coh = _integrated_coherence(p)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[3, 3] = 0.25 * (1.0 + g.g1_prime_hv)
    m[1, 1] = m[2, 2] = 0.25 * (1.0 - g.g1_prime_hv)
    m[0, 3] = coh
    m[3, 0] = np.conj(coh)
    mixed = p.k * m + (1.0 - p.k) * np.eye(4, dtype=complex) / 4.0
    return DensityOperator(mixed)


def source_fidelity(p: SourceParams) -> float:
    """Fidelity of the integrated pair state to the Phi+ Bell state."""
    return fidelity(pair_state(p), bell_state(BellKind.PHI_PLUS))
