#!/usr/bin/env python3
"""Produce the calibrated entries of data/qd1.toml.

Measured inputs (fixed): S = 0.6 ueV, tau_X = 0.27 ns, V = 0.63 plus the
splitter geometry. Free calibration constants: tau_SS, tau_HV, T2*, k.

Fit targets, in priority order:
  1. analytic swapped fidelity = 0.560 (reported model value)
  2. ladder entry "no background + ideal splitter" near 0.64 (reported)
  3. integrated pair fidelity to Phi+ = 0.88 (reported measurement)

Targets 1 and 3 cannot hold together in this model: writing the pair
fidelity as (1 + k P)/4 with P = g' + 2g/(1+(xg)^2) and the swapped
fidelity as (1 + r k^2 B)/4 with r = V/(2-V), every admissible parameter
set obeys B <= P, hence

    f_swap <= (1 + r k (4 f_pair - 1))/4 <= 0.549   for f_pair <= 0.90.

(See the frontier scan below; the supremum given f_pair = 0.88 is 0.503.)
The measured 0.88 evidently contains setup penalties that are outside
the emission model, so the calibration pins targets 1 and 2 and reports
the model's own pair fidelity for transparency.

Procedure: decoherence times are set to round values small enough in
1/tau to keep the ladder entry (2) inside its band, with T2* carrying
the residual phase-averaging penalty; k then solves target 1 exactly
and is rounded to six digits for the shipped file.
"""

import numpy as np
from scipy.optimize import brentq

from swapsim.source import SourceParams, source_fidelity
from swapsim.swap import BsmModel, idealization_report, swap_fidelity_analytic

S_UEV = 0.6
TAU_X_NS = 0.27
BSM = BsmModel(visibility=0.63)

TAU_SS_NS = 100.0
TAU_HV_NS = 300.0
T2_STAR_NS = 0.15

SWAP_TARGET = 0.56


def params(k: float) -> SourceParams:
    return SourceParams(
        s_ueV=S_UEV,
        tau_x_ns=TAU_X_NS,
        tau_ss_ns=TAU_SS_NS,
        tau_hv_ns=TAU_HV_NS,
        t2_star_ns=T2_STAR_NS,
        k=k,
    )


def frontier_swap_given_pair_fidelity(pair_fid: float) -> float:
    """Supremum of the swapped fidelity over all parameter sets with the
    given pair fidelity (scan over k with g'=g and no phase-averaging)."""
    x = params(1.0).fss_lifetime_product
    v = BSM.visibility
    best = 0.0
    for k in np.linspace(0.5, 1.0, 2001):
        def gap(g: float) -> float:
            lor = 1.0 / (1.0 + (x * g) ** 2)
            return 0.25 * (1.0 + k * g + 2.0 * k * g * lor) - pair_fid

        if gap(1e-6) > 0.0 or gap(1.0) < 0.0:
            continue
        g = brentq(gap, 1e-6, 1.0)
        lor = 1.0 / (1.0 + (x * g) ** 2)
        bracket = g * g + 2.0 * g * g * lor
        best = max(best, 0.25 * (1.0 + v / (2.0 - v) * k * k * bracket))
    return best


def main() -> None:
    k_exact = brentq(
        lambda k: swap_fidelity_analytic(params(k), BSM) - SWAP_TARGET,
        0.5,
        1.0,
        xtol=1e-15,
    )
    k = round(k_exact, 6)
    p = params(k)
    ladder = idealization_report(p, BSM)

    print("calibrated values for data/qd1.toml")
    print(f"  tau_SS_ns  = {TAU_SS_NS}")
    print(f"  tau_HV_ns  = {TAU_HV_NS}")
    print(f"  T2_star_ns = {T2_STAR_NS}")
    print(f"  k          = {k}   (exact solution {k_exact:.12f})")
    print()
    print("achieved targets")
    print(f"  swapped fidelity          = {swap_fidelity_analytic(p, BSM):.6f}  (target 0.560)")
    print(f"  ladder, no background     = {ladder.no_background:.6f}")
    print(f"  ladder, + ideal splitter  = {ladder.ideal_beam_splitter:.6f}  (target near 0.64)")
    print(f"  model pair fidelity       = {source_fidelity(p):.6f}  (reported 0.88; unreachable, see below)")
    print()
    cap = frontier_swap_given_pair_fidelity(0.88)
    print(f"  consistency bound: max swapped fidelity given pair fidelity 0.88 = {cap:.4f}")


if __name__ == "__main__":
    main()
