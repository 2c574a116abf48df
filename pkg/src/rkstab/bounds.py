"""Two-sided bounds on the largest eigenvalue of the pencil (A, M-tilde).

The diagonal-ratio bounds sandwich lambda_max between max_i A_ii/Mt_ii and
eta * kappa(Mt_ref) times that maximum; the geometric bound re-expresses the
upper end through patch volumes and element alignment factors, and the
comparison bound (largest diffusion eigenvalue times the squared inverse
Jacobian norm) is reported alongside for anisotropy studies.  The exact
eigenvalue itself comes from a Lanczos iteration in the surrogate inner
product, cross-checkable against a dense solve on small systems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    AssembledSystem,
    DiffusionField,
    SurrogatePolicy,
    assemble_system,
    element_alignment_factor,
    surrogate_reference_matrix,
)
from .mesh import SimplicialMesh, build_affine_maps, build_patches, number_dofs
from .reference import ReferenceElement

__all__ = [
    "BoundReport",
    "ConvergenceError",
    "InequalityViolation",
    "DEFAULT_SEED",
    "lambda_max_generalized",
    "lambda_max_dense",
    "diag_ratio_bounds",
    "is_m_matrix",
    "geometric_bound",
    "zhudu_bound",
    "verify_matrix_inequalities",
    "compute_bound_report",
    "BOUND_CSV_FIELDS",
]

DEFAULT_SEED = 1729


class ConvergenceError(RuntimeError):
    """Eigenvalue iteration hit its operation cap before reaching tolerance."""

    def __init__(self, message: str, best_estimate: float, residual: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.residual = residual


class InequalityViolation(AssertionError):
    """A matrix inequality failed; carries the margin and a witness vector."""

    def __init__(self, name: str, margin: float, witness: np.ndarray):
        super().__init__(f"{name} violated: margin {margin:.3e}")
        self.name = name
        self.margin = margin
        self.witness = witness


def _make_solver(matrix: sp.csr_array):
    """Apply-inverse for an SPD sparse matrix; exact division when diagonal."""
    coo = matrix.tocoo()
    n = matrix.shape[0]
    if coo.nnz == n and np.all(coo.coords[0] == coo.coords[1]):
        diag = matrix.diagonal()
        if np.any(diag <= 0):
            raise ValueError("surrogate mass diagonal must be positive")
        inv = 1.0 / diag
        return lambda b: inv * b
    return spla.splu(sp.csc_matrix(matrix)).solve


def lambda_max_with_vector(
    A: sp.csr_array,
    surrogate: sp.csr_array,
    tol: float = 1e-10,
    max_ops: int = 10000,
    seed: int = DEFAULT_SEED,
    block: int = 400,
) -> tuple[float, np.ndarray]:
    """Largest pencil eigenvalue and its eigenvector (surrogate-normalized).

    Lanczos iteration on the operator M-tilde^-1 A, kept symmetric by running
    all inner products in the M-tilde inner product with one SPD factorization
    (plain division when the surrogate is diagonal).  The start vector is
    seeded deterministically and boosted toward the largest diagonal ratio;
    full reorthogonalization keeps the Ritz values trustworthy and the
    iteration restarts from the best Ritz vector if the subspace hits `block`
    columns.  Convergence is declared when the residual bound
    beta * |last Ritz component| drops below tol times the Ritz value.

    Raises ConvergenceError (carrying the best estimate and its residual)
    after max_ops operator applications.
    """
    n = A.shape[0]
    if A.shape != surrogate.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {surrogate.shape}")
    diag_a = A.diagonal()
    diag_m = surrogate.diagonal()
    if np.any(diag_m <= 0) or np.any(diag_a <= 0):
        raise ValueError("pencil matrices must have positive diagonals")
    if n == 1:
        return float(diag_a[0] / diag_m[0]), np.ones(1)
    solve = _make_solver(surrogate)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v[int(np.argmax(diag_a / diag_m))] += 1.0
    ops = 0
    best = (0.0, np.inf)
    while ops < max_ops:
        k_cap = int(min(block, max_ops - ops, n))
        Q = np.empty((n, k_cap))
        MQ = np.empty((n, k_cap))
        alphas: list[float] = []
        betas: list[float] = []
        mv = surrogate @ v
        norm = np.sqrt(v @ mv)
        if not norm > 0:
            raise ValueError("start vector annihilated; pencil not positive definite")
        Q[:, 0] = v / norm
        MQ[:, 0] = mv / norm
        k = 0
        while k < k_cap:
            w = solve(A @ Q[:, k])
            ops += 1
            if k > 0:
                w -= betas[k - 1] * Q[:, k - 1]
            a = float(w @ MQ[:, k])
            alphas.append(a)
            w -= a * Q[:, k]
            w -= Q[:, : k + 1] @ (MQ[:, : k + 1].T @ w)
            mw = surrogate @ w
            b = float(np.sqrt(max(w @ mw, 0.0)))
            ritz_vals, ritz_vecs = sla.eigh_tridiagonal(alphas, betas)
            lam = float(ritz_vals[-1])
            if lam <= 0:
                raise ValueError(
                    f"nonpositive Ritz value {lam:.3e}: pencil is not positive definite"
                )
            residual = b * abs(float(ritz_vecs[-1, -1]))
            if residual < best[1]:
                best = (lam, residual)
            scale = float(np.max(np.abs(alphas)))
            if residual <= tol * lam or b <= 1e-13 * scale:
                return lam, Q[:, : k + 1] @ ritz_vecs[:, -1]
            if k + 1 >= k_cap:
                v = Q[:, : k + 1] @ ritz_vecs[:, -1]
                break
            betas.append(b)
            Q[:, k + 1] = w / b
            MQ[:, k + 1] = mw / b
            k += 1
    raise ConvergenceError(
        f"no convergence after {max_ops} operator applications "
        f"(best estimate {best[0]:.17g}, residual {best[1]:.3e})",
        best_estimate=best[0],
        residual=best[1],
    )


def lambda_max_generalized(
    A: sp.csr_array,
    surrogate: sp.csr_array,
    tol: float = 1e-10,
    max_ops: int = 10000,
    seed: int = DEFAULT_SEED,
    block: int = 400,
) -> float:
    """Largest eigenvalue of the pencil (A, M-tilde); see lambda_max_with_vector."""
    lam, _ = lambda_max_with_vector(
        A, surrogate, tol=tol, max_ops=max_ops, seed=seed, block=block
    )
    return lam


def lambda_max_dense(A: sp.csr_array, surrogate: sp.csr_array) -> float:
    """Dense generalized eigensolve oracle (small systems only)."""
    values = sla.eigh(
        A.toarray(), surrogate.toarray(), eigvals_only=True
    )
    return float(values[-1])


def diag_ratio_bounds(system: AssembledSystem, elem: ReferenceElement) -> tuple[float, float]:
    """Two-sided diagonal-ratio bounds (lower, upper) on lambda_max.

    lower = max_i A_ii / Mt_ii; upper = eta * kappa(Mt_ref) * lower.
    """
    diag_a = system.diag_stiffness
    diag_m = system.diag_surrogate
    if np.any(diag_a <= 0) or np.any(diag_m <= 0):
        raise ValueError("diagonal entries must be positive on the reduced system")
    lower = float(np.max(diag_a / diag_m))
    upper = elem.node_count * system.kappa_surrogate * lower
    return lower, upper


def is_m_matrix(matrix: sp.csr_array, tol: float = 1e-12) -> bool:
    """Sign-structure test: off-diagonals <= 0 and row sums >= 0 (within tol)."""
    coo = matrix.tocoo()
    scale = float(np.max(np.abs(coo.data))) if coo.nnz else 1.0
    off = coo.coords[0] != coo.coords[1]
    if np.any(coo.data[off] > tol * scale):
        return False
    row_sums = np.asarray(matrix.sum(axis=1)).ravel()
    return bool(np.all(row_sums >= -tol * scale))


def geometric_bound(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    diffusion: DiffusionField,
    policy: SurrogatePolicy,
    free_only: bool = True,
) -> float:
    """Patch-based upper bound on lambda_max.

    eta * (C_H1 / lambda_hat_min(Mt_ref)) * max over DOFs of the patch
    average sum_{K in patch} (|K| / |patch|) * alignment(K).
    """
    numbering = number_dofs(mesh, elem)
    maps = build_affine_maps(mesh)
    patches = build_patches(mesh, elem, numbering, maps)
    ref = surrogate_reference_matrix(elem, policy)
    lam_hat_min = float(np.linalg.eigvalsh(ref)[0])
    align = np.array(
        [element_alignment_factor(m, diffusion, elem.quad_points) for m in maps]
    )
    dofs = numbering.free_dofs if free_only else np.arange(numbering.n_dofs)
    worst = 0.0
    for i in dofs:
        incident = patches.elements[i]
        patch_volume = patches.volumes[i]
        total = sum(maps[e].volume * align[e] for e in incident) / patch_volume
        worst = max(worst, total)
    return elem.node_count * (elem.c_h1 / lam_hat_min) * worst


def zhudu_bound(mesh: SimplicialMesh, diffusion: DiffusionField) -> float:
    """Comparison bound: max_K max_x lambda_max(D(x)) * ||F'^-1 F'^-T||_2.

    Reported without its unstated leading constant; used for trend
    comparisons against the geometric bound, not as a certified bound.
    """
    maps = build_affine_maps(mesh)
    identity = DiffusionField.constant(np.eye(mesh.dimension))
    worst = 0.0
    for amap in maps:
        jacobian_part = element_alignment_factor(amap, identity)
        if diffusion.is_constant:
            lam_d = float(np.linalg.eigvalsh(diffusion.matrix)[-1])
        else:
            ref_pts = np.vstack([np.zeros(mesh.dimension), np.eye(mesh.dimension),
                                 np.full((1, mesh.dimension), 1.0 / (mesh.dimension + 1))])
            x = ref_pts @ amap.jacobian.T + amap.offset
            lam_d = float(max(np.linalg.eigvalsh(s)[-1] for s in diffusion.sample(x)))
        worst = max(worst, lam_d * jacobian_part)
    return worst


def _psd_margin_dense(diff: np.ndarray, scale: float) -> tuple[float, np.ndarray]:
    values, vectors = np.linalg.eigh(diff)
    return float(values[0] / scale), vectors[:, 0]


def _psd_margin_sampled(
    diff: sp.csr_array, n_samples: int, rng: np.random.Generator, scale: float
) -> tuple[float, np.ndarray]:
    n = diff.shape[0]
    worst = np.inf
    witness = np.zeros(n)
    for _ in range(n_samples):
        v = rng.standard_normal(n)
        quad = float(v @ (diff @ v)) / (scale * float(v @ v))
        if quad < worst:
            worst = quad
            witness = v
    return worst, witness


def _inf_norm(matrix: sp.csr_array) -> float:
    if matrix.nnz == 0:
        return 0.0
    return float(np.max(np.abs(matrix).sum(axis=1)))


def verify_matrix_inequalities(
    system: AssembledSystem,
    elem: ReferenceElement,
    n_samples: int = 1000,
    rng_seed: int = DEFAULT_SEED,
    dense_limit: int = 200,
    tol: float = 1e-10,
) -> dict[str, float]:
    """Check the structural matrix inequalities underlying the bounds.

    Verifies, as positive-semidefiniteness of difference matrices:
      * diagonal domination: eta * diag(A) - A,
      * patch-volume sandwich: lambda_hat * W <= Mt <= Lambda_hat * W with
        W = diag(patch volumes),
      * diagonal sandwich: kappa^-1 * diag(Mt) <= Mt <= kappa * diag(Mt).

    Systems up to dense_limit DOFs get a dense eigensolve; larger ones are
    sampled with n_samples random quadratic forms (fixed seed).  Margins are
    the worst eigenvalue (or quadratic form) of lhs - rhs normalized by the
    larger operand norm, so a tight inequality reads as ~0 rather than as
    amplified roundoff.  Raises InequalityViolation with a witness vector
    when a margin falls below -tol.
    """
    if system.patch_volumes is None:
        raise ValueError("system carries no patch volumes; assemble via assemble_system")
    eta = elem.node_count
    A = system.stiffness
    surrogate = system.surrogate_mass
    W = sp.diags_array([system.patch_volumes], offsets=[0], format="csr")
    diag_a = sp.diags_array([A.diagonal()], offsets=[0], format="csr")
    diag_m = sp.diags_array([surrogate.diagonal()], offsets=[0], format="csr")
    kappa = system.kappa_surrogate
    checks = {
        "diagonal_domination": (eta * diag_a, A),
        "patch_volume_lower": (surrogate, system.lambda_hat_min * W),
        "patch_volume_upper": (system.lambda_hat_max * W, surrogate),
        "diagonal_sandwich_lower": (surrogate, (1.0 / kappa) * diag_m),
        "diagonal_sandwich_upper": (kappa * diag_m, surrogate),
    }
    rng = np.random.default_rng(rng_seed)
    margins: dict[str, float] = {}
    for name, (lhs, rhs) in checks.items():
        lhs = sp.csr_array(lhs)
        rhs = sp.csr_array(rhs)
        scale = max(_inf_norm(lhs), _inf_norm(rhs))
        if scale == 0.0:
            margins[name] = 0.0
            continue
        diff = sp.csr_array(lhs - rhs)
        if system.n_dofs <= dense_limit:
            margin, witness = _psd_margin_dense(diff.toarray(), scale)
        else:
            margin, witness = _psd_margin_sampled(diff, n_samples, rng, scale)
        margins[name] = margin
        if margin < -tol:
            raise InequalityViolation(name, margin, witness)
    return margins


@dataclass(frozen=True)
class BoundReport:
    """All bound expressions for one assembled configuration."""

    n_dofs: int
    order: int
    node_count: int
    policy: str
    kappa_surrogate: float
    c_h1: float
    lambda_max_exact: float | None
    lower_diag_ratio: float
    upper_diag_ratio: float
    upper_geometric: float
    upper_zhudu: float
    tightness_lower: float | None
    tightness_upper: float | None
    m_matrix_refinement_applied: bool
    upper_diag_ratio_refined: float | None

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in BOUND_CSV_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_row(self) -> list[str]:
        row = []
        for name in BOUND_CSV_FIELDS:
            value = getattr(self, name)
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append(str(value).lower())
            elif isinstance(value, float):
                row.append("%.17g" % value)
            else:
                row.append(str(value))
        return row


BOUND_CSV_FIELDS = [
    "n_dofs",
    "order",
    "node_count",
    "policy",
    "kappa_surrogate",
    "c_h1",
    "lambda_max_exact",
    "lower_diag_ratio",
    "upper_diag_ratio",
    "upper_geometric",
    "upper_zhudu",
    "tightness_lower",
    "tightness_upper",
    "m_matrix_refinement_applied",
    "upper_diag_ratio_refined",
]


def compute_bound_report(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    diffusion: DiffusionField,
    policy: SurrogatePolicy,
    tol: float = 1e-10,
    dof_cap: int = 5000,
    seed: int = DEFAULT_SEED,
    system: AssembledSystem | None = None,
) -> BoundReport:
    """Assemble (unless given a system) and evaluate every bound expression.

    The exact eigenvalue is skipped (reported as None) when the reduced
    system exceeds dof_cap degrees of freedom.
    """
    if system is None:
        system = assemble_system(mesh, elem, diffusion, policy)
    lower, upper = diag_ratio_bounds(system, elem)
    geometric = geometric_bound(mesh, elem, diffusion, policy)
    zhudu = zhudu_bound(mesh, diffusion)
    m_matrix = is_m_matrix(system.stiffness)
    refined = 2.0 * system.kappa_surrogate * lower if m_matrix else None
    lam = None
    if system.n_dofs <= dof_cap:
        lam = lambda_max_generalized(
            system.stiffness, system.surrogate_mass, tol=tol, seed=seed
        )
    return BoundReport(
        n_dofs=system.n_dofs,
        order=elem.order,
        node_count=elem.node_count,
        policy=policy.kind,
        kappa_surrogate=system.kappa_surrogate,
        c_h1=elem.c_h1,
        lambda_max_exact=lam,
        lower_diag_ratio=lower,
        upper_diag_ratio=upper,
        upper_geometric=geometric,
        upper_zhudu=zhudu,
        tightness_lower=None if lam is None else lam / lower,
        tightness_upper=None if lam is None else upper / lam,
        m_matrix_refinement_applied=m_matrix,
        upper_diag_ratio_refined=refined,
    )
