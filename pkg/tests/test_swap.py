import numpy as np
import pytest

import helpers
from swapsim.quantum import BellKind, bell_state, is_physical
from swapsim.source import SourceParams
from swapsim.swap import (
    BsmModel,
    bsm_operator,
    fidelity_contour,
    idealization_report,
    swap_fidelity_analytic,
    swap_fidelity_numeric,
    swapped_state,
)

IDEAL_SOURCE = SourceParams(s_ueV=0.0, tau_x_ns=0.27)
IDEAL_BSM = BsmModel(visibility=1.0, reflectance=0.5, transmittance=0.5, mode_overlap=1.0)
QD1 = SourceParams(**helpers.QD1_SOURCE_KWARGS)
QD1_BSM = BsmModel(visibility=helpers.QD1_VISIBILITY)


def random_params(rng: np.random.Generator, infinite_allowed: bool = True) -> SourceParams:
    def decay():
        if infinite_allowed and rng.random() < 0.2:
            return np.inf
        return float(rng.uniform(0.3, 50.0))

    return SourceParams(
        s_ueV=float(rng.uniform(0.0, 10.0)),
        tau_x_ns=float(rng.uniform(0.1, 1.0)),
        tau_ss_ns=decay(),
        tau_hv_ns=decay(),
        t2_star_ns=decay() if infinite_allowed else float(rng.uniform(0.05, 20.0)),
        k=float(rng.uniform(0.0, 1.0)),
    )


class TestBsmOperator:
    def test_perfect_visibility_is_singlet_projector(self):
        op = bsm_operator(BsmModel(visibility=1.0))
        assert np.allclose(op.matrix, helpers.PSI_MINUS_PROJ, atol=1e-15)

    def test_zero_visibility_is_half_identity(self):
        op = bsm_operator(BsmModel(visibility=0.0))
        assert np.allclose(op.matrix, np.eye(4) / 2, atol=1e-15)

    def test_povm_element_bounds(self):
        for v in np.linspace(0.0, 1.0, 7):
            evals = np.linalg.eigvalsh(bsm_operator(BsmModel(visibility=float(v))).matrix)
            assert evals.min() >= -1e-12 and evals.max() <= 1.0 + 1e-12


class TestAnalyticFidelity:
    def test_ideal_limit_exact(self):
        assert swap_fidelity_analytic(IDEAL_SOURCE, IDEAL_BSM) == 1.0

    def test_zero_visibility_exact_quarter(self):
        p = SourceParams(s_ueV=3.0, tau_x_ns=0.4, tau_ss_ns=2.0, k=0.8)
        assert swap_fidelity_analytic(p, BsmModel(visibility=0.0)) == 0.25

    def test_zero_k_exact_quarter(self):
        p = SourceParams(s_ueV=0.0, tau_x_ns=0.27, k=0.0)
        assert swap_fidelity_analytic(p, BsmModel(visibility=0.9)) == 0.25

    def test_frozen_value_v063_ideal_source(self):
        # 1/4 (1 + (0.63/1.37) * 3)
        got = swap_fidelity_analytic(IDEAL_SOURCE, BsmModel(visibility=0.63))
        assert got == pytest.approx(0.5948905109489051, abs=1e-12)

    def test_qd1_calibration_anchor(self):
        assert swap_fidelity_analytic(QD1, QD1_BSM) == pytest.approx(0.56, abs=1e-4)

    def test_bounds_on_random_draws(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            f = swap_fidelity_analytic(random_params(rng), BsmModel(visibility=float(rng.random())))
            assert 0.25 - 1e-12 <= f <= 1.0 + 1e-12


class TestNumericOracle:
    def test_ideal_limit(self):
        assert swap_fidelity_numeric(IDEAL_SOURCE, IDEAL_BSM) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_zero_fss_reduces_to_coherence_factors(self):
        p = SourceParams(s_ueV=0.0, tau_x_ns=0.3, tau_ss_ns=4.0, tau_hv_ns=2.0, t2_star_ns=0.5, k=0.9)
        m = BsmModel(visibility=0.7)
        assert swap_fidelity_numeric(p, m) == pytest.approx(
            swap_fidelity_analytic(p, m), abs=1e-9
        )

    def test_agrees_with_analytic_on_sweep(self):
        rng = np.random.default_rng(17)
        m = BsmModel(visibility=0.63)
        for _ in range(25):
            p = random_params(rng)
            fa = swap_fidelity_analytic(p, m)
            fn = swap_fidelity_numeric(p, m)
            assert abs(fa - fn) < 1e-6

    def test_loose_tolerance_rejected(self):
        from swapsim.quadrature import QuadratureSpec

        with pytest.raises(ValueError, match="1e-8"):
            swap_fidelity_numeric(IDEAL_SOURCE, IDEAL_BSM, QuadratureSpec(rel_tol=1e-6))


class TestHeraldedClosedForm:
    @pytest.mark.parametrize("v", np.linspace(0.0, 1.0, 10).tolist())
    def test_ideal_source_fidelity_matches_bruteforce(self, v):
        _, oracle_fid, oracle_prob = helpers.ideal_swap_bruteforce(v)
        closed = (1.0 + v) / (4.0 - 2.0 * v)
        assert oracle_fid == pytest.approx(closed, abs=1e-10)
        assert oracle_prob == pytest.approx((2.0 - v) / 4.0, abs=1e-12)
        analytic = swap_fidelity_analytic(
            IDEAL_SOURCE,
            BsmModel(visibility=float(v), reflectance=0.5, transmittance=0.5, mode_overlap=1.0),
        )
        assert analytic == pytest.approx(closed, abs=1e-10)


class TestSwappedState:
    def test_ideal_inputs_give_singlet(self):
        res = swapped_state(IDEAL_SOURCE, IDEAL_SOURCE, IDEAL_BSM)
        assert res.herald_probability == pytest.approx(0.25, abs=1e-9)
        assert res.fidelity_psi_minus == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(
            res.rho.matrix, bell_state(BellKind.PSI_MINUS).matrix, atol=1e-9
        )

    def test_pure_background_gives_white_noise(self):
        p = SourceParams(s_ueV=0.0, tau_x_ns=0.27, k=0.0)
        res = swapped_state(p, p, BsmModel(visibility=0.8))
        assert np.allclose(res.rho.matrix, np.eye(4) / 4, atol=1e-9)
        assert res.fidelity_psi_minus == pytest.approx(0.25, abs=1e-9)

    def test_qd1_matches_analytic(self):
        res = swapped_state(QD1, QD1, QD1_BSM)
        assert res.fidelity_psi_minus == pytest.approx(
            swap_fidelity_analytic(QD1, QD1_BSM), abs=1e-4
        )

    def test_matches_analytic_on_random_sets(self):
        rng = np.random.default_rng(19)
        for _ in range(6):
            p = random_params(rng, infinite_allowed=False)
            m = BsmModel(visibility=float(rng.uniform(0.2, 1.0)))
            res = swapped_state(p, p, m)
            assert abs(res.fidelity_psi_minus - swap_fidelity_analytic(p, m)) < 1e-4
            assert is_physical(res.rho, 1e-9)
            assert 0.0 < res.herald_probability <= 0.5 + 1e-12

    def test_symmetric_in_source_order(self):
        rng = np.random.default_rng(23)
        pE = random_params(rng, infinite_allowed=False)
        pL = random_params(rng, infinite_allowed=False)
        m = BsmModel(visibility=0.77)
        f1 = swapped_state(pE, pL, m).fidelity_psi_minus
        f2 = swapped_state(pL, pE, m).fidelity_psi_minus
        assert f1 == pytest.approx(f2, abs=1e-10)

    def test_herald_probability_tracks_visibility(self):
        res = swapped_state(QD1, QD1, QD1_BSM)
        assert res.herald_probability == pytest.approx(
            (2.0 - QD1_BSM.visibility) / 4.0, abs=1e-9
        )


class TestIdealizationReport:
    def test_fully_ideal_inputs(self):
        rep = idealization_report(IDEAL_SOURCE, IDEAL_BSM)
        for value in (rep.as_is, rep.no_background, rep.ideal_beam_splitter, rep.fully_ideal):
            assert value == pytest.approx(1.0, abs=1e-12)

    def test_qd1_ladder_frozen_values(self):
        rep = idealization_report(QD1, QD1_BSM)
        assert rep.as_is == pytest.approx(0.56, abs=1e-4)
        assert rep.ideal_beam_splitter == pytest.approx(0.6234, abs=2e-4)
        assert rep.fully_ideal == pytest.approx(1.0, abs=1e-12)

    def test_ladder_monotone_on_random_draws(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            p = random_params(rng)
            m = BsmModel(visibility=float(rng.uniform(0.0, 0.9)))
            rep = idealization_report(p, m)
            ladder = [rep.as_is, rep.no_background, rep.ideal_beam_splitter, rep.fully_ideal]
            assert all(a <= b + 1e-12 for a, b in zip(ladder, ladder[1:]))

    def test_splitter_penalty_value(self):
        # 2RT/(R^2+T^2) * overlap^2 for the default geometry
        m = BsmModel(visibility=0.63)
        assert m.splitter_penalty == pytest.approx(0.9186556, abs=1e-6)
        assert m.intrinsic_visibility == pytest.approx(0.63 / 0.9186556, abs=1e-6)

    def test_intrinsic_visibility_capped(self):
        m = BsmModel(visibility=0.99, reflectance=0.3, transmittance=0.7, mode_overlap=0.8)
        assert m.intrinsic_visibility == 1.0


class TestContour:
    def test_corners_and_monotonicity(self):
        v = np.linspace(0.0, 1.0, 11)
        s = np.linspace(0.0, 3.0, 13)
        grid = fidelity_contour(v, s, IDEAL_SOURCE, IDEAL_BSM)
        assert grid.fidelity[0, -1] == pytest.approx(1.0, abs=1e-12)  # V=1, S=0
        assert grid.fidelity[:, 0] == pytest.approx(0.25, abs=1e-12)  # V=0 column
        # non-decreasing along V, non-increasing along S tau / hbar
        assert np.all(np.diff(grid.fidelity, axis=1) >= -1e-12)
        assert np.all(np.diff(grid.fidelity, axis=0) <= 1e-12)

    def test_qd1_marker_value(self):
        x = QD1.fss_lifetime_product
        grid = fidelity_contour(
            np.array([QD1_BSM.visibility]), np.array([x]), QD1, QD1_BSM
        )
        assert x == pytest.approx(0.2461, abs=1e-4)
        assert grid.fidelity[0, 0] == pytest.approx(0.56, abs=1e-4)

    def test_csv_layout(self):
        grid = fidelity_contour(
            np.array([0.5, 1.0]), np.array([0.0, 1.0]), IDEAL_SOURCE, IDEAL_BSM
        )
        lines = grid.to_csv_text().strip().split("\n")
        assert lines[0].startswith("s_tau_over_hbar,0.5,1")
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[2]) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_axes_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            fidelity_contour(
                np.array([0.5, 0.4]), np.array([0.0]), IDEAL_SOURCE, IDEAL_BSM
            )
        with pytest.raises(ValueError, match="non-empty"):
            fidelity_contour(np.array([]), np.array([0.0]), IDEAL_SOURCE, IDEAL_BSM)


class TestBsmModelValidation:
    def test_unbalanced_splitter_rejected(self):
        with pytest.raises(ValueError, match="reflectance"):
            BsmModel(visibility=0.5, reflectance=0.4, transmittance=0.5)

    def test_out_of_range_visibility(self):
        with pytest.raises(ValueError, match="visibility"):
            BsmModel(visibility=1.2)


class TestAccumulationAgainstProjectionPipeline:
    def test_einsum_matches_tensor_permute_project(self):
        # The vectorized node accumulation must equal the explicit
        # tensor -> reorder -> project route from the quantum module,
        # node by node, at the same quadrature nodes.
        from swapsim.quadrature import QuadratureSpec, emission_nodes
        from swapsim.quantum import (
            DensityOperator,
            Projector,
            permute_qubits,
            project,
            tensor,
        )
        from swapsim.swap import (
            _accumulate,
            _cascade_stack,
            _phase_average_weight,
            bsm_operator,
        )

        p = SourceParams(
            s_ueV=2.0, tau_x_ns=0.3, tau_ss_ns=3.0, tau_hv_ns=7.0,
            t2_star_ns=0.4, k=0.85,
        )
        m = BsmModel(visibility=0.7)
        quad = QuadratureSpec(panel_order=8)
        panels = 2

        pi = bsm_operator(m).matrix
        pi_pop = np.diag(np.diag(pi))
        i3 = _phase_average_weight(p, quad)
        pi_eff = pi_pop + i3 * (pi - pi_pop)

        fast = _accumulate(p, p, pi_pop, panels, quad) + i3 * _accumulate(
            p, p, pi - pi_pop, panels, quad
        )

        t, w = emission_nodes(p.tau_x_ns, panels, quad)
        stack = _cascade_stack(p, t)
        proj = Projector(qubits=(0, 1), matrix=pi_eff)
        reference = np.zeros((4, 4), dtype=complex)
        for rho_e, w_e in zip(stack, w):
            state_e = DensityOperator(rho_e)
            for rho_l, w_l in zip(stack, w):
                four = tensor(state_e, DensityOperator(rho_l))
                reordered = DensityOperator(
                    permute_qubits(four.matrix, [0, 2, 1, 3])
                )
                conditioned, _ = project(reordered, proj)
                reference += w_e * w_l * conditioned.matrix
        assert np.max(np.abs(fast - reference)) < 1e-12

    def test_effective_operator_is_povm_element(self):
        from swapsim.quadrature import DEFAULT_QUADRATURE
        from swapsim.swap import _phase_average_weight, bsm_operator

        rng = np.random.default_rng(47)
        for _ in range(20):
            p = random_params(rng, infinite_allowed=False)
            m = BsmModel(visibility=float(rng.random()))
            pi = bsm_operator(m).matrix
            pi_pop = np.diag(np.diag(pi))
            i3 = _phase_average_weight(p, DEFAULT_QUADRATURE)
            evals = np.linalg.eigvalsh(pi_pop + i3 * (pi - pi_pop))
            assert evals.min() >= -1e-12
            assert evals.max() <= 1.0 + 1e-12


class TestSwappedMatrixStructure:
    def test_closed_form_entries(self):
        # Normalized heralded matrix in {HH, HV, VH, VV}:
        #   diag  = (1 -+ r k^2 g'^2)/4 with the enhanced weight on HV/VH,
        #   <HV|rho|VH> = -(r/2) k^2 I2 I3, everything else zero,
        # where r = V/(2-V). Sharper than the fidelity check alone.
        from swapsim.quadrature import DEFAULT_QUADRATURE
        from swapsim.source import coherence_factors
        from swapsim.swap import _phase_average_weight

        p = QD1
        m = QD1_BSM
        g = coherence_factors(p)
        x = p.fss_lifetime_product
        r = m.visibility / (2.0 - m.visibility)
        i2 = g.g1_hv**2 / (1.0 + (x * g.g1_hv) ** 2)
        i3 = _phase_average_weight(p, DEFAULT_QUADRATURE)
        rho = swapped_state(p, p, m).rho.matrix

        pop = r * p.k**2 * g.g1_prime_hv**2
        assert rho[0, 0].real == pytest.approx(0.25 * (1 - pop), abs=1e-6)
        assert rho[3, 3].real == pytest.approx(0.25 * (1 - pop), abs=1e-6)
        assert rho[1, 1].real == pytest.approx(0.25 * (1 + pop), abs=1e-6)
        assert rho[2, 2].real == pytest.approx(0.25 * (1 + pop), abs=1e-6)
        assert rho[1, 2].real == pytest.approx(-0.5 * r * p.k**2 * i2 * i3, abs=1e-6)
        assert abs(rho[1, 2].imag) < 1e-9
        zero_mask = np.ones((4, 4), dtype=bool)
        for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (2, 1)]:
            zero_mask[i, j] = False
        assert np.max(np.abs(rho[zero_mask])) < 1e-9

    def test_werner_identity_at_zero_splitting(self):
        # With S = 0 and no cross-dephasing the heralded state is exactly
        # a Werner state with weight V/(2-V) k^2 g'^2.
        from swapsim.quantum import werner_state

        p = SourceParams(s_ueV=0.0, tau_x_ns=0.27, tau_ss_ns=4.0, k=0.9)
        m = BsmModel(visibility=0.8)
        g_prime = 1.0 / (1.0 + 0.27 / 4.0)
        weight = m.visibility / (2.0 - m.visibility) * p.k**2 * g_prime**2
        rho = swapped_state(p, p, m).rho
        assert np.max(np.abs(rho.matrix - werner_state(weight).matrix)) < 1e-8
