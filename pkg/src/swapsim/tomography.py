"""Two-qubit polarization tomography of the swapped photon pair.

The two analyzers each select one of the six states H, V, D, A, R, L,
giving 36 ordered projector pairs. The photons are labelled by arrival
time, not by detector, so permuted analyzer pairs are acquired
simultaneously and only 21 unordered settings need to be measured; each
acquisition yields the counts of one or two ordered pairs.

Reconstruction follows the standard two-step recipe: a linear Stokes
inversion (fast, but not guaranteed positive at low counts) seeds a
maximum-likelihood fit over the Cholesky-style parameterization
T^dagger T / Tr(T^dagger T), which is physical by construction. Error
bars come from re-fitting Poisson-resampled count tables.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .quantum import (
    BellKind,
    DensityOperator,
    bell_state,
    concurrence,
    fidelity,
)

BASIS_LABELS = "HVDARL"

_H = np.array([1.0, 0.0], dtype=complex)
_V = np.array([0.0, 1.0], dtype=complex)
BASIS_KETS = {
    "H": _H,
    "V": _V,
    "D": (_H + _V) / np.sqrt(2.0),
    "A": (_H - _V) / np.sqrt(2.0),
    "R": (_H - 1j * _V) / np.sqrt(2.0),
    "L": (_H + 1j * _V) / np.sqrt(2.0),
}

PSI_MINUS = bell_state(BellKind.PSI_MINUS)

_PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


class ReconstructionError(RuntimeError):
    """Raised when a count table cannot support a reconstruction."""


def _check_label(label: str) -> str:
    if label not in BASIS_KETS:
        raise ValueError(f"unknown polarization label {label!r}")
    return label


@dataclass(frozen=True)
class MeasurementSetting:
    """Unordered analyzer pair; canonical order follows H,V,D,A,R,L."""

    basis_a: str
    basis_b: str

    def __post_init__(self) -> None:
        a, b = _check_label(self.basis_a), _check_label(self.basis_b)
        if BASIS_LABELS.index(a) > BASIS_LABELS.index(b):
            a, b = b, a
        object.__setattr__(self, "basis_a", a)
        object.__setattr__(self, "basis_b", b)

    def ordered_pairs(self) -> tuple[tuple[str, str], ...]:
        """The ordered projector pairs this acquisition yields (1 or 2)."""
        if self.basis_a == self.basis_b:
            return ((self.basis_a, self.basis_b),)
        return ((self.basis_a, self.basis_b), (self.basis_b, self.basis_a))


def enumerate_settings() -> list[MeasurementSetting]:
    """The 21 unordered settings covering all 36 ordered pairs."""
    settings = []
    for i, a in enumerate(BASIS_LABELS):
        for b in BASIS_LABELS[i:]:
            settings.append(MeasurementSetting(a, b))
    return settings


def projector_pair(basis_a: str, basis_b: str) -> np.ndarray:
    """Rank-1 projector |a><a| (x) |b><b| on the two-qubit space."""
    ka, kb = BASIS_KETS[_check_label(basis_a)], BASIS_KETS[_check_label(basis_b)]
    k = np.kron(ka, kb)
    return np.outer(k, k.conj())


@dataclass(frozen=True)
class CountRecord:
    basis_a: str
    basis_b: str
    counts: int
    acquisition_weight: float = 1.0

    def __post_init__(self) -> None:
        _check_label(self.basis_a)
        _check_label(self.basis_b)
        if self.counts < 0:
            raise ValueError("counts must be non-negative")
        if self.acquisition_weight <= 0.0:
            raise ValueError("acquisition_weight must be positive")


@dataclass(frozen=True)
class CountTable:
    """Ordered-pair coincidence counts for one tomography run."""

    rows: tuple[CountRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))

    def projectors(self) -> np.ndarray:
        return np.stack([projector_pair(r.basis_a, r.basis_b) for r in self.rows])

    def counts(self) -> np.ndarray:
        return np.array([r.counts for r in self.rows], dtype=float)

    def weights(self) -> np.ndarray:
        return np.array([r.acquisition_weight for r in self.rows])

    def resampled(self, rng: np.random.Generator) -> "CountTable":
        """Poisson-resample every count around its observed value."""
        return CountTable(
            tuple(
                replace(r, counts=int(rng.poisson(r.counts))) for r in self.rows
            )
        )

    def to_csv_text(self) -> str:
        lines = ["setting_a,setting_b,counts,weight"]
        for r in self.rows:
            lines.append(f"{r.basis_a},{r.basis_b},{r.counts},{r.acquisition_weight:.10g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "CountTable":
        lines = [ln for ln in text.strip().split("\n") if ln]
        if not lines or lines[0].split(",")[:2] != ["setting_a", "setting_b"]:
            raise ValueError("missing setting_a,setting_b,counts,weight header")
        rows = []
        for ln in lines[1:]:
            a, b, counts, weight = ln.split(",")
            rows.append(CountRecord(a, b, int(counts), float(weight)))
        return cls(tuple(rows))


@dataclass(frozen=True)
class ReconstructionResult:
    rho: DensityOperator
    log_likelihood: float
    fidelity_psi_minus: float
    concurrence: float
    iterations: int
    converged: bool
    fidelity_sigma: float = 0.0
    concurrence_sigma: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho.to_json_dict(),
            "log_likelihood": self.log_likelihood,
            "fidelity_psi_minus": self.fidelity_psi_minus,
            "fidelity_sigma": self.fidelity_sigma,
            "concurrence": self.concurrence,
            "concurrence_sigma": self.concurrence_sigma,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def expected_counts(
    state: DensityOperator, table_rows: list[tuple[str, str]], n_expected: float,
    dark_rate: float = 0.0,
) -> np.ndarray:
    projs = np.stack([projector_pair(a, b) for a, b in table_rows])
    q = np.einsum("iab,ba->i", projs, state.matrix).real
    return n_expected * np.clip(q, 0.0, None) + dark_rate


def simulate_counts(
    state: DensityOperator,
    settings: list[MeasurementSetting],
    n_expected: float,
    dark_rate: float = 0.0,
    seed: int | np.random.SeedSequence = 0,
) -> CountTable:
    """Poisson draws of the Born-rule coincidences for every ordered pair.

    Each ordered pair of every acquisition gets expectation
    n_expected * Tr[rho (P_a x P_b)] + dark_rate; deterministic for a
    given seed.
    """
    if n_expected <= 0.0:
        raise ValueError("n_expected must be positive")
    if state.dim != 4:
        raise ValueError("tomography expects a two-qubit state")
    rng = np.random.default_rng(seed)
    rows = []
    for setting in settings:
        for a, b in setting.ordered_pairs():
            mu = float(expected_counts(state, [(a, b)], n_expected, dark_rate)[0])
            rows.append(CountRecord(a, b, int(rng.poisson(mu))))
    return CountTable(tuple(rows))


def _pauli_design(table: CountTable) -> np.ndarray:
    """Rows of Tr[P_i (sigma_j x sigma_k)] / 4 over the 16 Pauli products."""
    projs = table.projectors()
    design = np.empty((len(table.rows), 16))
    for j in range(4):
        for k in range(4):
            sjk = np.kron(_PAULIS[j], _PAULIS[k])
            design[:, 4 * j + k] = 0.25 * np.einsum("iab,ba->i", projs, sjk).real
    return design


def _group_normalized_probabilities(table: CountTable) -> np.ndarray:
    """Counts to probabilities, normalized within each product-basis group."""
    basis_of = {"H": "HV", "V": "HV", "D": "DA", "A": "DA", "R": "RL", "L": "RL"}
    rates = table.counts() / table.weights()
    groups: dict[tuple[str, str], list[int]] = {}
    for i, r in enumerate(table.rows):
        groups.setdefault((basis_of[r.basis_a], basis_of[r.basis_b]), []).append(i)
    probs = np.empty(len(table.rows))
    for idx in groups.values():
        total = rates[idx].sum()
        if total <= 0.0:
            # An empty basis group carries no information; spread evenly.
            probs[idx] = 1.0 / len(idx)
        else:
            probs[idx] = rates[idx] / total
    return probs


def linear_reconstruct(table: CountTable) -> np.ndarray:
    """Linear Stokes inversion; Hermitian and unit trace, PSD not guaranteed."""
    design = _pauli_design(table)
    rank = np.linalg.matrix_rank(design, tol=1e-10)
    if rank < 16:
        raise ReconstructionError(
            f"design matrix rank {rank} < 16: settings are tomographically incomplete"
        )
    probs = _group_normalized_probabilities(table)
    # S_00 = 1 is fixed by normalization; solve for the remaining components.
    target = probs - design[:, 0]
    stokes, *_ = np.linalg.lstsq(design[:, 1:], target, rcond=None)
    coeffs = np.concatenate([[1.0], stokes])
    rho = np.zeros((4, 4), dtype=complex)
    for j in range(4):
        for k in range(4):
            rho += 0.25 * coeffs[4 * j + k] * np.kron(_PAULIS[j], _PAULIS[k])
    return 0.5 * (rho + rho.conj().T)


def physicalize(matrix: np.ndarray) -> DensityOperator:
    """Clip negative eigenvalues to zero and renormalize the trace."""
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    clipped = np.clip(evals, 0.0, None)
    if clipped.sum() <= 0.0:
        return DensityOperator(np.eye(matrix.shape[0], dtype=complex) / matrix.shape[0])
    rho = (evecs * clipped) @ evecs.conj().T
    return DensityOperator(rho / clipped.sum())


def _t_to_rho(params: np.ndarray) -> np.ndarray:
    """Upper-triangular T from 16 reals; rho = T^dagger T normalized."""
    t = np.zeros((4, 4), dtype=complex)
    t[0, 0], t[1, 1], t[2, 2], t[3, 3] = params[:4]
    t[0, 1] = params[4] + 1j * params[5]
    t[0, 2] = params[6] + 1j * params[7]
    t[0, 3] = params[8] + 1j * params[9]
    t[1, 2] = params[10] + 1j * params[11]
    t[1, 3] = params[12] + 1j * params[13]
    t[2, 3] = params[14] + 1j * params[15]
    rho = t.conj().T @ t
    return rho / np.trace(rho).real


def _rho_to_t_params(rho: np.ndarray) -> np.ndarray:
    """Inverse of _t_to_rho via Cholesky of a slightly regularized rho."""
    dim = rho.shape[0]
    reg = rho + 1e-9 * np.eye(dim)
    # U = L^dagger is upper triangular with U^dagger U = reg.
    u = np.linalg.cholesky(reg).conj().T
    params = np.empty(16)
    params[:4] = u.diagonal().real
    params[4:6] = u[0, 1].real, u[0, 1].imag
    params[6:8] = u[0, 2].real, u[0, 2].imag
    params[8:10] = u[0, 3].real, u[0, 3].imag
    params[10:12] = u[1, 2].real, u[1, 2].imag
    params[12:14] = u[1, 3].real, u[1, 3].imag
    params[14:16] = u[2, 3].real, u[2, 3].imag
    return params


def poisson_log_likelihood(table: CountTable, rho: np.ndarray) -> float:
    """Poisson log-likelihood with the overall flux profiled out."""
    projs = table.projectors()
    n = table.counts()
    w = table.weights()
    q = np.clip(np.einsum("iab,ba->i", projs, rho).real, 1e-300, None)
    mu_shape = w * q
    scale = n.sum() / mu_shape.sum()
    mu = scale * mu_shape
    return float(np.sum(n * np.log(mu)) - mu.sum())


def _negative_log_likelihood(table: CountTable, statistic: str):
    projs = table.projectors()
    n = table.counts()
    w = table.weights()
    n_sum = n.sum()

    def poisson(params: np.ndarray) -> float:
        rho = _t_to_rho(params)
        q = np.clip(np.einsum("iab,ba->i", projs, rho).real, 1e-300, None)
        mu = (n_sum / np.dot(w, q)) * w * q
        return float(mu.sum() - np.sum(n * np.log(mu)))

    def gaussian(params: np.ndarray) -> float:
        rho = _t_to_rho(params)
        q = np.clip(np.einsum("iab,ba->i", projs, rho).real, 1e-300, None)
        mu = (n_sum / np.dot(w, q)) * w * q
        return float(np.sum((mu - n) ** 2 / (2.0 * np.clip(mu, 1e-12, None))))

    if statistic == "poisson":
        return poisson
    if statistic == "gaussian":
        return gaussian
    raise ValueError(f"unknown statistic {statistic!r}")


def mle_reconstruct(
    table: CountTable,
    restarts: int = 10,
    seed: int | np.random.SeedSequence = 0,
    statistic: str = "poisson",
    max_iterations: int = 500,
) -> ReconstructionResult:
    """Maximum-likelihood state fit, physical by construction.

    Seeded from the physicalized linear inversion; ``restarts``
    perturbed multi-starts are run and the best final likelihood wins
    (ties broken by restart index). Counting statistics default to
    Poisson; a Gaussian objective is available for comparison.
    """
    if table.counts().sum() <= 0:
        raise ReconstructionError("count table is empty; nothing to fit")
    seed_params = _rho_to_t_params(physicalize(linear_reconstruct(table)).matrix)
    objective = _negative_log_likelihood(table, statistic)
    rng = np.random.default_rng(seed)

    best = None
    iterations = 0
    converged = False
    for restart in range(max(1, restarts)):
        if restart == 0:
            start = seed_params
        else:
            start = seed_params * (1.0 + 0.05 * rng.standard_normal(16))
            start += 0.01 * rng.standard_normal(16)
        result = minimize(
            objective,
            start,
            method="L-BFGS-B",
            options={"maxiter": max_iterations, "ftol": 1e-12, "gtol": 1e-10},
        )
        iterations += int(result.nit)
        converged = converged or bool(result.success)
        if best is None or result.fun < best.fun - 1e-12:
            best = result
    rho = DensityOperator(_t_to_rho(best.x))
    return ReconstructionResult(
        rho=rho,
        log_likelihood=poisson_log_likelihood(table, rho.matrix),
        fidelity_psi_minus=fidelity(rho, PSI_MINUS),
        concurrence=concurrence(rho),
        iterations=iterations,
        converged=converged,
    )


def _mc_iteration(
    args: tuple["CountTable", np.random.SeedSequence, int, str],
) -> tuple[float, float] | None:
    """One resample-and-refit step; None marks a failed iteration."""
    table, child, restarts, statistic = args
    rng = np.random.default_rng(child)
    resampled = table.resampled(rng)
    try:
        fit = mle_reconstruct(
            resampled, restarts=restarts, seed=child.spawn(1)[0], statistic=statistic
        )
    except (ReconstructionError, np.linalg.LinAlgError):
        return None
    return fit.fidelity_psi_minus, fit.concurrence


def monte_carlo_errors(
    table: CountTable,
    iterations: int = 2000,
    seed: int | np.random.SeedSequence = 0,
    restarts: int = 10,
    statistic: str = "poisson",
    workers: int = 1,
) -> ReconstructionResult:
    """Error bars by re-fitting Poisson-resampled count tables.

    Every count is resampled around its observed value, the fit is
    repeated, and the standard deviation of the fitted fidelity and
    concurrence over the iterations is reported. Central values come
    from the fit to the unresampled table. Fails if more than 5% of the
    iterations raise. Iterations carry seeds split from the root, so
    the result is identical for any worker count.
    """
    if iterations < 2:
        raise ValueError("need at least 2 Monte Carlo iterations")
    central = mle_reconstruct(table, restarts=restarts, seed=seed, statistic=statistic)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    jobs = [(table, child, restarts, statistic) for child in root.spawn(iterations)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_mc_iteration, jobs, chunksize=8))
    else:
        outcomes = [_mc_iteration(job) for job in jobs]
    results = [out for out in outcomes if out is not None]
    failures = len(outcomes) - len(results)
    if failures > 0.05 * iterations:
        raise ReconstructionError(
            f"{failures}/{iterations} Monte Carlo iterations failed"
        )
    fids = [f for f, _ in results]
    concs = [c for _, c in results]
    return replace(
        central,
        fidelity_sigma=float(np.std(fids, ddof=1)),
        concurrence_sigma=float(np.std(concs, ddof=1)),
    )
