"""Mass, stiffness, and surrogate-mass assembly with Dirichlet reduction.

Element mass matrices are exactly |K| times one shared reference matrix (the
consistent reference mass or a lumped surrogate of it), so every surrogate
satisfies the two structural axioms this library is built on: the reference
matrix is symmetric positive definite, and the element matrix is its |K|
multiple.  Stiffness integrals are evaluated by quadrature after pulling the
diffusion tensor back to the reference cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import (
    AffineMap,
    DofNumbering,
    SimplicialMesh,
    build_affine_maps,
    build_patches,
    number_dofs,
)
from .reference import (
    ReferenceElement,
    simplex_quadrature,
    tabulate_basis,
    tabulate_gradients,
)

__all__ = [
    "DiffusionField",
    "SurrogatePolicy",
    "AssembledSystem",
    "SurrogateAxiomError",
    "NonSPDDiffusionError",
    "surrogate_reference_matrix",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_system",
    "apply_dirichlet",
    "element_alignment_factor",
    "l2_project",
    "write_coo",
]


class SurrogateAxiomError(ValueError):
    """A surrogate policy produced a reference matrix violating axiom (M1)."""


class NonSPDDiffusionError(ValueError):
    """The diffusion tensor failed the SPD check at some sample point."""


@dataclass(frozen=True)
class DiffusionField:
    """Diffusion tensor D(x): constant, rotated-anisotropic, or a callable.

    For callables, `degree` declares a polynomial-degree proxy used to pick
    the stiffness quadrature order.
    """

    kind: str
    matrix: np.ndarray | None = None
    angle: float = 0.0
    eigenvalues: tuple[float, float] = (1.0, 1.0)
    func: Callable[[np.ndarray], np.ndarray] | None = None
    degree: int = 0

    @staticmethod
    def constant(matrix, d: int | None = None) -> "DiffusionField":
        """Constant tensor; scalars become multiples of the identity."""
        arr = np.asarray(matrix, dtype=float)
        if arr.ndim == 0:
            if d is None:
                raise ValueError("scalar diffusion needs an explicit dimension")
            arr = float(arr) * np.eye(d)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"diffusion matrix must be square, got shape {arr.shape}")
        return DiffusionField(kind="constant", matrix=arr)

    @staticmethod
    def rotated_anisotropic(angle: float, eigenvalues: tuple[float, float]) -> "DiffusionField":
        """2D tensor with the given eigenvalues, principal axis at `angle`."""
        k1, k2 = eigenvalues
        if k1 <= 0 or k2 <= 0:
            raise ValueError(f"diffusion eigenvalues must be positive, got {eigenvalues}")
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        matrix = rot @ np.diag([k1, k2]) @ rot.T
        return DiffusionField(
            kind="rotated_anisotropic",
            matrix=0.5 * (matrix + matrix.T),
            angle=angle,
            eigenvalues=(float(k1), float(k2)),
        )

    @staticmethod
    def from_callable(func, degree: int) -> "DiffusionField":
        """Position-dependent tensor with a declared polynomial-degree proxy."""
        return DiffusionField(kind="callable", func=func, degree=int(degree))

    @property
    def is_constant(self) -> bool:
        return self.kind in ("constant", "rotated_anisotropic")

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Tensor values at physical points; shape (n_points, d, d)."""
        points = np.atleast_2d(points)
        if self.is_constant:
            return np.broadcast_to(
                self.matrix, (points.shape[0], *self.matrix.shape)
            ).copy()
        values = np.array([self.func(p) for p in points], dtype=float)
        if values.ndim == 1:  # scalar-valued callable in 1D
            values = values[:, None, None]
        return values


def _check_spd_samples(samples: np.ndarray, element: int) -> None:
    """Validate symmetry and positive definiteness of sampled tensors."""
    sym_err = np.abs(samples - samples.transpose(0, 2, 1)).max(axis=(1, 2))
    scale = np.abs(samples).max(axis=(1, 2))
    bad = np.nonzero(sym_err > 1e-13 * np.maximum(scale, 1.0))[0]
    if bad.size:
        raise NonSPDDiffusionError(
            f"diffusion tensor not symmetric at element {element}, "
            f"quadrature point {bad[0]}"
        )
    if samples.shape[1] == 1:
        bad = np.nonzero(samples[:, 0, 0] <= 0)[0]
    else:
        trace = samples[:, 0, 0] + samples[:, 1, 1]
        det = samples[:, 0, 0] * samples[:, 1, 1] - samples[:, 0, 1] * samples[:, 1, 0]
        bad = np.nonzero((trace <= 0) | (det <= 0))[0]
    if bad.size:
        raise NonSPDDiffusionError(
            f"diffusion tensor not positive definite at element {element}, "
            f"quadrature point {bad[0]}"
        )


@dataclass(frozen=True)
class SurrogatePolicy:
    """How the surrogate mass matrix is built from the reference element."""

    kind: str  # "consistent" | "hrz_diagonal" | "node_quadrature"

    def __post_init__(self):
        if self.kind not in ("consistent", "hrz_diagonal", "node_quadrature"):
            raise ValueError(f"unknown surrogate policy {self.kind!r}")


CONSISTENT = SurrogatePolicy("consistent")
HRZ_DIAGONAL = SurrogatePolicy("hrz_diagonal")
NODE_QUADRATURE = SurrogatePolicy("node_quadrature")


def surrogate_reference_matrix(elem: ReferenceElement, policy: SurrogatePolicy) -> np.ndarray:
    """Reference surrogate mass matrix for the policy; checks axiom (M1).

    consistent: the reference mass matrix itself.  hrz_diagonal: its diagonal
    rescaled to preserve total reference mass.  node_quadrature: the nodal
    quadrature weights (row sums of the reference mass), valid only when all
    of them are strictly positive.
    """
    mass = elem.ref_mass_matrix
    if policy.kind == "consistent":
        ref = mass
    elif policy.kind == "hrz_diagonal":
        diag = np.diag(mass)
        ref = np.diag(diag / diag.sum())
    else:  # node_quadrature
        weights = mass.sum(axis=1)
        if np.any(weights <= 1e-14):
            raise SurrogateAxiomError(
                f"(M1) violated by policy node_quadrature: nonpositive nodal "
                f"weight for d={elem.dimension}, m={elem.order} "
                f"(min weight {weights.min():.3e})"
            )
        ref = np.diag(weights)
    eigenvalues = np.linalg.eigvalsh(ref)
    if eigenvalues[0] <= 0:
        raise SurrogateAxiomError(
            f"(M1) violated by policy {policy.kind}: reference matrix not SPD "
            f"(min eigenvalue {eigenvalues[0]:.3e})"
        )
    return ref


@dataclass(frozen=True)
class AssembledSystem:
    """Sparse system M, A, and surrogate M-tilde on a common DOF set.

    Matrices are on the full DOF set until apply_dirichlet produces the
    reduced system; dof_map then records which full DOFs survived.
    """

    mass: sp.csr_array
    stiffness: sp.csr_array
    surrogate_mass: sp.csr_array
    dof_map: np.ndarray
    reduced: bool
    policy: SurrogatePolicy
    surrogate_ref_matrix: np.ndarray
    lambda_hat_min: float
    lambda_hat_max: float
    numbering: DofNumbering
    patch_volumes: np.ndarray | None = None

    @property
    def n_dofs(self) -> int:
        return self.mass.shape[0]

    @property
    def kappa_surrogate(self) -> float:
        """Condition number of the surrogate reference matrix."""
        return self.lambda_hat_max / self.lambda_hat_min

    @property
    def diag_stiffness(self) -> np.ndarray:
        return self.stiffness.diagonal()

    @property
    def diag_surrogate(self) -> np.ndarray:
        return self.surrogate_mass.diagonal()

    @property
    def surrogate_is_diagonal(self) -> bool:
        coo = self.surrogate_mass.tocoo()
        return bool(np.all(coo.coords[0] == coo.coords[1]))


def _scatter(
    local: np.ndarray, element_dofs: np.ndarray, n_dofs: int
) -> sp.csr_array:
    """Accumulate per-element matrices into canonical CSR.

    Duplicate (row, col) entries are summed by the COO->CSR conversion in a
    fixed sorted order, so assembly results are bit-reproducible.
    """
    eta = element_dofs.shape[1]
    rows = np.repeat(element_dofs, eta, axis=1).ravel()
    cols = np.tile(element_dofs, (1, eta)).ravel()
    mat = sp.coo_array((local.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def assemble_mass(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    policy: SurrogatePolicy = CONSISTENT,
    numbering: DofNumbering | None = None,
    maps: list[AffineMap] | None = None,
) -> tuple[sp.csr_array, np.ndarray]:
    """Assemble M (consistent policy) or a surrogate M-tilde.

    Every element contributes exactly |K| times the policy's reference matrix
    (axiom (M2)).  Returns the sparse matrix and the reference matrix used.
    """
    numbering = numbering or number_dofs(mesh, elem)
    maps = maps or build_affine_maps(mesh)
    ref = surrogate_reference_matrix(elem, policy)
    volumes = np.array([m.volume for m in maps])
    local = volumes[:, None, None] * ref[None, :, :]
    return _scatter(local, numbering.element_dofs, numbering.n_dofs), ref


def _stiffness_quadrature(
    elem: ReferenceElement, diffusion: DiffusionField
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature points/weights/gradients adequate for the stiffness integral."""
    needed = 2 * (elem.order - 1) + max(diffusion.degree, 0)
    if needed <= 2 * elem.order:
        return elem.quad_points, elem.quad_weights, elem.quad_grads
    pts, wts = simplex_quadrature(elem.dimension, needed)
    return pts, wts, tabulate_gradients(elem, pts)


def assemble_stiffness(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    diffusion: DiffusionField,
    numbering: DofNumbering | None = None,
    maps: list[AffineMap] | None = None,
) -> sp.csr_array:
    """Assemble the stiffness matrix for the diffusion field.

    Element integrals are |K| sum_q w_q grad_i^T (F'^-1 D F'^-T) grad_j with
    reference-cell quadrature; the result is symmetrized exactly.
    """
    numbering = numbering or number_dofs(mesh, elem)
    maps = maps or build_affine_maps(mesh)
    pts, wts, grads = _stiffness_quadrature(elem, diffusion)
    inv_jac = np.stack([m.inv_jacobian for m in maps])        # (e, d, d)
    volumes = np.array([m.volume for m in maps])

    if diffusion.is_constant:
        _check_spd_samples(diffusion.matrix[None, :, :], element=0)
        geo = np.einsum("eab,bc,edc->ead", inv_jac, diffusion.matrix, inv_jac)
        local = np.einsum("q,qia,eab,qjb->eij", wts, grads, geo, grads)
    else:
        offsets = np.stack([m.offset for m in maps])
        jac = np.stack([m.jacobian for m in maps])
        local = np.empty((mesh.n_elements, elem.node_count, elem.node_count))
        for e in range(mesh.n_elements):
            x = pts @ jac[e].T + offsets[e]
            samples = diffusion.sample(x)
            _check_spd_samples(samples, element=e)
            geo = np.einsum("ab,qbc,dc->qad", inv_jac[e], samples, inv_jac[e])
            local[e] = np.einsum("q,qia,qab,qjb->ij", wts, grads, geo, grads)
    local *= volumes[:, None, None]
    local = 0.5 * (local + local.transpose(0, 2, 1))
    return _scatter(local, numbering.element_dofs, numbering.n_dofs)


def assemble_system(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    diffusion: DiffusionField,
    policy: SurrogatePolicy = CONSISTENT,
    reduce: bool = True,
) -> AssembledSystem:
    """Assemble M, A, and M-tilde, then apply Dirichlet reduction by default."""
    numbering = number_dofs(mesh, elem)
    maps = build_affine_maps(mesh)
    mass, _ = assemble_mass(mesh, elem, CONSISTENT, numbering, maps)
    stiffness = assemble_stiffness(mesh, elem, diffusion, numbering, maps)
    if policy.kind == "consistent":
        surrogate, ref = mass, elem.ref_mass_matrix
    else:
        surrogate, ref = assemble_mass(mesh, elem, policy, numbering, maps)
    eigenvalues = np.linalg.eigvalsh(ref)
    patches = build_patches(mesh, elem, numbering, maps)
    system = AssembledSystem(
        mass=mass,
        stiffness=stiffness,
        surrogate_mass=surrogate,
        dof_map=np.arange(numbering.n_dofs),
        reduced=False,
        policy=policy,
        surrogate_ref_matrix=ref,
        lambda_hat_min=float(eigenvalues[0]),
        lambda_hat_max=float(eigenvalues[-1]),
        numbering=numbering,
        patch_volumes=patches.volumes,
    )
    return apply_dirichlet(system) if reduce else system


def apply_dirichlet(system: AssembledSystem) -> AssembledSystem:
    """Remove Dirichlet rows and columns (reduction, not penalty)."""
    if system.reduced:
        return system
    dirichlet = system.numbering.dirichlet_dofs
    if dirichlet.size == 0:
        raise ValueError(
            "empty Dirichlet set: the Dirichlet boundary must have positive measure"
        )
    free = system.numbering.free_dofs

    def cut(matrix: sp.csr_array) -> sp.csr_array:
        out = matrix[free][:, free]
        out.sort_indices()
        return out

    return AssembledSystem(
        mass=cut(system.mass),
        stiffness=cut(system.stiffness),
        surrogate_mass=cut(system.surrogate_mass),
        dof_map=free,
        reduced=True,
        policy=system.policy,
        surrogate_ref_matrix=system.surrogate_ref_matrix,
        lambda_hat_min=system.lambda_hat_min,
        lambda_hat_max=system.lambda_hat_max,
        numbering=system.numbering,
        patch_volumes=None
        if system.patch_volumes is None
        else system.patch_volumes[free],
    )


def _spectral_norm_small(mats: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of symmetric 1x1 or 2x2 matrices."""
    if mats.shape[-1] == 1:
        return np.abs(mats[..., 0, 0])
    half_sum = 0.5 * (mats[..., 0, 0] + mats[..., 1, 1])
    half_diff = 0.5 * (mats[..., 0, 0] - mats[..., 1, 1])
    radius = np.sqrt(half_diff**2 + mats[..., 0, 1] * mats[..., 1, 0])
    return np.maximum(np.abs(half_sum + radius), np.abs(half_sum - radius))


def element_alignment_factor(
    amap: AffineMap,
    diffusion: DiffusionField,
    quad_points: np.ndarray | None = None,
) -> float:
    """max over sample points of || F'^-1 D(x) F'^-T ||_2 for one element.

    Exact for constant diffusion; otherwise the maximum is taken over the
    element's quadrature images plus its vertices.
    """
    inv = amap.inv_jacobian
    if diffusion.is_constant:
        mat = inv @ diffusion.matrix @ inv.T
        return float(_spectral_norm_small(mat[None])[0])
    d = inv.shape[0]
    ref_pts = [np.zeros(d), *np.eye(d)]
    if quad_points is not None:
        ref_pts.extend(quad_points)
    x = np.array(ref_pts) @ amap.jacobian.T + amap.offset
    samples = diffusion.sample(x)
    pulled = np.einsum("ab,qbc,dc->qad", inv, samples, inv)
    return float(np.max(_spectral_norm_small(pulled)))


def l2_project(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    func: Callable[[np.ndarray], float],
    numbering: DofNumbering | None = None,
    maps: list[AffineMap] | None = None,
) -> np.ndarray:
    """L2 projection of a scalar function onto the FE space (full DOF vector)."""
    numbering = numbering or number_dofs(mesh, elem)
    maps = maps or build_affine_maps(mesh)
    mass, _ = assemble_mass(mesh, elem, CONSISTENT, numbering, maps)
    pts, wts = simplex_quadrature(elem.dimension, 2 * elem.order + 2)
    basis = tabulate_basis(elem, pts)
    load = np.zeros(numbering.n_dofs)
    for e, amap in enumerate(maps):
        x = pts @ amap.jacobian.T + amap.offset
        f_vals = np.array([func(p) for p in x], dtype=float)
        local = amap.volume * (basis.T @ (wts * f_vals))
        np.add.at(load, numbering.element_dofs[e], local)
    return spla.spsolve(mass.tocsc(), load)


def write_coo(matrix: sp.csr_array, path) -> None:
    """Dump a sparse matrix as 'row col value' lines with 17-digit decimals."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.coords[1], coo.coords[0]))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.coords[0][order], coo.coords[1][order], coo.data[order]):
            fh.write("%d %d %.17g\n" % (r, c, v))
