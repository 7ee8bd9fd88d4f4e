"""Brute-force reference computations used by the tests.

Everything here is written directly against numpy so that the package's
own linear algebra is never used to generate its expected values.
"""

import numpy as np

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)

PHI_PLUS_VEC = (np.kron(H, H) + np.kron(V, V)) / np.sqrt(2.0)
PHI_MINUS_VEC = (np.kron(H, H) - np.kron(V, V)) / np.sqrt(2.0)
PSI_PLUS_VEC = (np.kron(H, V) + np.kron(V, H)) / np.sqrt(2.0)
PSI_MINUS_VEC = (np.kron(H, V) - np.kron(V, H)) / np.sqrt(2.0)

PSI_MINUS_PROJ = np.outer(PSI_MINUS_VEC, PSI_MINUS_VEC.conj())

# Frozen QD1 calibration (mirrors data/qd1.toml; produced by
# scripts/calibrate_qd1.py).
QD1_SOURCE_KWARGS = dict(
    s_ueV=0.6,
    tau_x_ns=0.27,
    tau_ss_ns=100.0,
    tau_hv_ns=300.0,
    t2_star_ns=0.15,
    k=0.970606,
)
QD1_VISIBILITY = 0.63


def reorder_16_to_bsm_front(rho: np.ndarray) -> np.ndarray:
    """(X_E, XX_E, X_L, XX_L) -> (X_E, X_L, XX_E, XX_L) on a 16x16 matrix."""
    t = rho.reshape(2, 2, 2, 2, 2, 2, 2, 2)
    t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7)
    return t.reshape(16, 16)


def ideal_swap_bruteforce(visibility: float) -> tuple[np.ndarray, float, float]:
    """Heralded XX state for two ideal Phi+ pairs, by explicit 16x16 algebra.

    Returns (normalized 4x4 state, fidelity to the singlet, herald
    probability).
    """
    pair = np.outer(PHI_PLUS_VEC, PHI_PLUS_VEC.conj())
    rho4 = np.kron(pair, pair)  # (X_E, XX_E, X_L, XX_L)
    rho4 = reorder_16_to_bsm_front(rho4)
    pi = visibility * PSI_MINUS_PROJ + 0.5 * (1.0 - visibility) * np.eye(4)
    big = np.kron(pi, np.eye(4, dtype=complex))
    weighted = big @ rho4
    herald = float(np.trace(weighted).real)
    # Trace out the first two qubits explicitly.
    t = weighted.reshape(4, 4, 4, 4)  # (X row, XX row, X col, XX col)
    sigma = np.einsum("abad->bd", t)
    sigma = 0.5 * (sigma + sigma.conj().T)
    state = sigma / herald
    fid = float(np.real(PSI_MINUS_VEC.conj() @ state @ PSI_MINUS_VEC))
    return state, fid, herald


def random_physical_state(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Ginibre-distributed density matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def concurrence_bruteforce(rho: np.ndarray) -> float:
    """Wootters concurrence by direct eigen-solve, independent code path."""
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]])
    yy = np.kron(sy, sy)
    r = rho @ yy @ rho.conj() @ yy
    lams = np.sort(np.sqrt(np.clip(np.linalg.eigvals(r).real, 0.0, None)))[::-1]
    return max(0.0, lams[0] - lams[1] - lams[2] - lams[3])
