"""Simplicial meshes: generation, affine maps, DOF numbering, patches, file I/O.

Meshes are segments (d=1) or triangles (d=2) with positively oriented
elements and marked boundary facets.  Degrees of freedom for order-m elements
are numbered deterministically: mesh vertices first, then edge DOFs in global
edge order, then element-interior DOFs in element order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .reference import ReferenceElement

__all__ = [
    "SimplicialMesh",
    "AffineMap",
    "PatchTable",
    "DofNumbering",
    "MeshSpec",
    "MeshFormatError",
    "MeshStructureError",
    "DegenerateElementError",
    "build_affine_maps",
    "build_patches",
    "number_dofs",
    "generate_mesh",
    "uniform_interval",
    "structured_triangular",
    "stretched",
    "random_perturbed",
    "read_mesh",
    "write_mesh",
    "validate_mesh",
]

DIRICHLET = "D"
NEUMANN = "N"


class MeshFormatError(ValueError):
    """Malformed mesh file (carries the offending line number)."""


class MeshStructureError(ValueError):
    """Structurally inconsistent mesh (bad indices, orphan DOFs, ...)."""


class DegenerateElementError(ValueError):
    """Element with (numerically) vanishing volume."""


@dataclass(frozen=True)
class SimplicialMesh:
    """Simplicial mesh with boundary markers.

    vertices is (n_vertices, d); elements is (n_elements, d+1) with positive
    orientation; boundary_facets is (n_facets, d) vertex tuples and
    boundary_markers the matching "D"/"N" labels.
    """

    dimension: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    boundary_markers: tuple[str, ...]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True)
class AffineMap:
    """Affine map from the reference simplex onto one element."""

    jacobian: np.ndarray
    offset: np.ndarray
    volume: float
    inv_jacobian: np.ndarray


@dataclass(frozen=True)
class PatchTable:
    """Incident elements and patch volume for every degree of freedom."""

    elements: tuple[np.ndarray, ...]
    volumes: np.ndarray


@dataclass(frozen=True)
class DofNumbering:
    """Global DOF layout for one (mesh, element order) pair."""

    n_dofs: int
    element_dofs: np.ndarray          # (n_elements, eta)
    dirichlet_dofs: np.ndarray        # sorted global indices
    n_vertex_dofs: int
    n_edge_dofs: int
    n_interior_dofs: int

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.nonzero(mask)[0]


@dataclass(frozen=True)
class MeshSpec:
    """Declarative description of a generated mesh (CLI/config friendly)."""

    kind: str
    n: int = 0
    nx: int = 0
    ny: int = 0
    pattern: str = "diagonal"
    ratio: float = 1.0
    amplitude: float = 0.0
    seed: int = 0


_FACTORIAL = {1: 1.0, 2: 2.0}


def build_affine_maps(mesh: SimplicialMesh) -> list[AffineMap]:
    """One affine map per element; raises DegenerateElementError on collapse.

    The Jacobian columns are the edge vectors from the element's first vertex,
    so the map sends reference vertex k to physical vertex k.  Volume is
    det(jacobian)/d!.
    """
    d = mesh.dimension
    maps = []
    for idx, element in enumerate(mesh.elements):
        coords = mesh.vertices[element]
        jac = (coords[1:] - coords[0]).T
        det = float(np.linalg.det(jac))
        edges = coords[1:] - coords[0]
        scale = float(np.max(np.linalg.norm(edges, axis=1))) ** d
        if abs(det) <= 1e-14 * scale:
            raise DegenerateElementError(
                f"degenerate element {idx}: |det F'| = {abs(det):.3e}"
            )
        if det < 0:
            raise MeshStructureError(
                f"element {idx} is negatively oriented (det F' = {det:.3e})"
            )
        maps.append(
            AffineMap(
                jacobian=jac,
                offset=coords[0].copy(),
                volume=det / _FACTORIAL[d],
                inv_jacobian=np.linalg.inv(jac),
            )
        )
    return maps


def _edge_table(mesh: SimplicialMesh) -> dict[tuple[int, int], int]:
    """Global edge numbering: sorted vertex pairs in lexicographic order."""
    pairs = set()
    for element in mesh.elements:
        v = sorted(element.tolist())
        pairs.update((v[i], v[j]) for i in range(len(v)) for j in range(i + 1, len(v)))
    return {pair: k for k, pair in enumerate(sorted(pairs))}


def number_dofs(mesh: SimplicialMesh, elem: ReferenceElement) -> DofNumbering:
    """Deterministic global DOF numbering for order-m Lagrange elements.

    Vertex DOFs coincide with vertex indices.  For m >= 2 in 2D, each global
    edge contributes m-1 DOFs ordered from its lower-indexed vertex; remaining
    nodes are element-interior and numbered in element order.  In 1D all
    non-vertex nodes are element-interior.
    """
    d, m = mesh.dimension, elem.order
    n_vertices = mesh.n_vertices
    multi = elem.multi_indices
    use_edges = d == 2 and m >= 2
    edge_index = _edge_table(mesh) if use_edges else {}
    n_edge_dofs = len(edge_index) * (m - 1) if use_edges else 0

    # classify local nodes once
    vertex_slot = {}       # local -> barycentric position k
    edge_slot = {}         # local -> (k1, k2, alpha_k2)
    interior_locals = []
    for loc, alpha in enumerate(multi):
        support = np.nonzero(alpha)[0]
        if support.size == 1:
            vertex_slot[loc] = int(support[0])
        elif support.size == 2 and use_edges:
            k1, k2 = int(support[0]), int(support[1])
            edge_slot[loc] = (k1, k2, int(alpha[k2]))
        else:
            interior_locals.append(loc)
    n_interior_per_elem = len(interior_locals)
    interior_base = n_vertices + n_edge_dofs

    element_dofs = np.empty((mesh.n_elements, elem.node_count), dtype=np.int64)
    for e, element in enumerate(mesh.elements):
        for loc in range(elem.node_count):
            if loc in vertex_slot:
                element_dofs[e, loc] = element[vertex_slot[loc]]
            elif loc in edge_slot:
                k1, k2, a2 = edge_slot[loc]
                va, vb = int(element[k1]), int(element[k2])
                if va < vb:
                    slot = a2 - 1            # node sits a2/m of the way va -> vb
                else:
                    va, vb = vb, va
                    slot = (m - a2) - 1
                element_dofs[e, loc] = n_vertices + edge_index[va, vb] * (m - 1) + slot
            else:
                pos = interior_locals.index(loc)
                element_dofs[e, loc] = interior_base + e * n_interior_per_elem + pos

    n_dofs = interior_base + mesh.n_elements * n_interior_per_elem

    dirichlet = set()
    for facet, marker in zip(mesh.boundary_facets, mesh.boundary_markers):
        if marker != DIRICHLET:
            continue
        dirichlet.update(int(v) for v in facet)
        if use_edges and len(facet) == 2:
            a, b = sorted(int(v) for v in facet)
            base = n_vertices + edge_index[a, b] * (m - 1)
            dirichlet.update(range(base, base + m - 1))
    return DofNumbering(
        n_dofs=n_dofs,
        element_dofs=element_dofs,
        dirichlet_dofs=np.array(sorted(dirichlet), dtype=np.int64),
        n_vertex_dofs=n_vertices,
        n_edge_dofs=n_edge_dofs,
        n_interior_dofs=mesh.n_elements * n_interior_per_elem,
    )


def build_patches(
    mesh: SimplicialMesh,
    elem: ReferenceElement,
    numbering: DofNumbering | None = None,
    maps: list[AffineMap] | None = None,
) -> PatchTable:
    """Per-DOF element patches and their volumes.

    A DOF's patch is the set of elements whose basis function it belongs to;
    the patch volume is the exact sum of those element volumes.
    """
    numbering = numbering or number_dofs(mesh, elem)
    maps = maps or build_affine_maps(mesh)
    incident: list[list[int]] = [[] for _ in range(numbering.n_dofs)]
    for e in range(mesh.n_elements):
        for dof in numbering.element_dofs[e]:
            incident[dof].append(e)
    volumes = np.zeros(numbering.n_dofs)
    elements = []
    for dof, elems in enumerate(incident):
        if not elems:
            raise MeshStructureError(f"orphan DOF {dof}: no incident element")
        arr = np.array(sorted(set(elems)), dtype=np.int64)
        elements.append(arr)
        volumes[dof] = sum(maps[e].volume for e in arr)
    return PatchTable(elements=tuple(elements), volumes=volumes)


# ---------------------------------------------------------------------------
# generators


def uniform_interval(n: int) -> SimplicialMesh:
    """n equal elements on [0, 1], Dirichlet at both ends."""
    if n < 1:
        raise ValueError(f"element count must be positive, got {n}")
    vertices = np.linspace(0.0, 1.0, n + 1)[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]], dtype=np.int64)
    return SimplicialMesh(1, vertices, elements.astype(np.int64), facets, (DIRICHLET, DIRICHLET))


def _grid_triangulation(
    nx: int, ny: int, width: float, height: float, pattern: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[str, ...]]:
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    if pattern not in ("diagonal", "alternating"):
        raise ValueError(f"unknown triangulation pattern {pattern!r}")
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i
    vertices = np.array([[xs[i], ys[j]] for j in range(ny + 1) for i in range(nx + 1)])
    elements = []
    for j in range(ny):
        for i in range(nx):
            sw, se = vid(i, j), vid(i + 1, j)
            nw, ne = vid(i, j + 1), vid(i + 1, j + 1)
            flip = pattern == "alternating" and (i + j) % 2 == 1
            if flip:
                elements.append((sw, se, nw))   # diagonal se-nw
                elements.append((se, ne, nw))
            else:
                elements.append((sw, se, ne))   # diagonal sw-ne
                elements.append((sw, ne, nw))
    facets = []
    for i in range(nx):
        facets.append((vid(i, 0), vid(i + 1, 0)))
        facets.append((vid(i, ny), vid(i + 1, ny)))
    for j in range(ny):
        facets.append((vid(0, j), vid(0, j + 1)))
        facets.append((vid(nx, j), vid(nx, j + 1)))
    markers = tuple(DIRICHLET for _ in facets)
    return (
        vertices,
        np.array(elements, dtype=np.int64),
        np.array(facets, dtype=np.int64),
        markers,
    )


def structured_triangular(nx: int, ny: int, pattern: str = "diagonal") -> SimplicialMesh:
    """2*nx*ny triangles on the unit square, all boundary Dirichlet."""
    v, e, f, mk = _grid_triangulation(nx, ny, 1.0, 1.0, pattern)
    return SimplicialMesh(2, v, e, f, mk)


def stretched(nx: int, ny: int, ratio: float) -> SimplicialMesh:
    """Anisotropic triangulation of [0,1] x [0,1/ratio].

    With nx == ny the cells measure hx = 1/nx by hy = hx/ratio, so every
    triangle has aspect ratio `ratio`.
    """
    if ratio <= 0:
        raise ValueError(f"aspect ratio must be positive, got {ratio}")
    v, e, f, mk = _grid_triangulation(nx, ny, 1.0, 1.0 / ratio, "diagonal")
    return SimplicialMesh(2, v, e, f, mk)


def random_perturbed(nx: int, ny: int, amplitude: float, seed: int) -> SimplicialMesh:
    """Structured triangulation with interior vertices jiggled by +-amplitude.

    The perturbation is uniform per coordinate and deterministic in the seed;
    amplitude must stay below half the smallest cell edge so elements cannot
    collapse or invert.
    """
    base = structured_triangular(nx, ny, "diagonal")
    h_min = min(1.0 / nx, 1.0 / ny)
    if amplitude < 0 or amplitude >= 0.5 * h_min:
        raise ValueError(
            f"perturbation amplitude {amplitude} must lie in [0, {0.5 * h_min})"
        )
    rng = np.random.default_rng(seed)
    vertices = base.vertices.copy()
    interior = (
        (vertices[:, 0] > 1e-12)
        & (vertices[:, 0] < 1 - 1e-12)
        & (vertices[:, 1] > 1e-12)
        & (vertices[:, 1] < 1 - 1e-12)
    )
    shift = rng.uniform(-amplitude, amplitude, size=vertices.shape)
    vertices[interior] += shift[interior]
    return SimplicialMesh(2, vertices, base.elements, base.boundary_facets, base.boundary_markers)


def generate_mesh(spec: MeshSpec) -> SimplicialMesh:
    """Build a mesh from a declarative spec (see MeshSpec)."""
    if spec.kind == "uniform_interval":
        return uniform_interval(spec.n)
    if spec.kind == "structured_triangular":
        return structured_triangular(spec.nx, spec.ny, spec.pattern)
    if spec.kind == "stretched":
        return stretched(spec.nx, spec.ny, spec.ratio)
    if spec.kind == "random_perturbed":
        return random_perturbed(spec.nx, spec.ny, spec.amplitude, spec.seed)
    raise ValueError(f"unknown mesh kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# text format


def write_mesh(mesh: SimplicialMesh, path) -> None:
    """Write the plain-text mesh format (bit-exact round trips)."""
    lines = ["# simplicial mesh", f"DIMENSION {mesh.dimension}"]
    lines.append(f"VERTICES {mesh.n_vertices}")
    for v in mesh.vertices:
        lines.append(" ".join("%.17g" % x for x in v))
    lines.append(f"ELEMENTS {mesh.n_elements}")
    for e in mesh.elements:
        lines.append(" ".join(str(int(i)) for i in e))
    lines.append(f"BOUNDARY {mesh.boundary_facets.shape[0]}")
    for facet, marker in zip(mesh.boundary_facets, mesh.boundary_markers):
        lines.append(" ".join(str(int(i)) for i in facet) + f" {marker}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_error(lineno: int, text: str, reason: str) -> MeshFormatError:
    return MeshFormatError(f"line {lineno}: {reason}: {text.strip()!r}")


def read_mesh(path) -> SimplicialMesh:
    """Parse the text format written by write_mesh.

    Lines starting with '#' are comments.  Negative-orientation elements are
    repaired by swapping two vertices (with a warning); bad vertex references
    raise MeshStructureError and malformed lines raise MeshFormatError with
    their line number.
    """
    with open(path) as fh:
        raw = fh.readlines()
    tokens = [
        (lineno, line.split())
        for lineno, line in enumerate(raw, start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0

    def expect(keyword: str) -> int:
        nonlocal pos
        if pos >= len(tokens):
            raise MeshFormatError(f"unexpected end of file, expected {keyword}")
        lineno, words = tokens[pos]
        if len(words) != 2 or words[0] != keyword:
            raise _parse_error(lineno, " ".join(words), f"expected '{keyword} <count>'")
        try:
            count = int(words[1])
        except ValueError:
            raise _parse_error(lineno, " ".join(words), f"bad {keyword} count") from None
        pos += 1
        return count

    d = expect("DIMENSION")
    if d not in (1, 2):
        raise MeshFormatError(f"unsupported mesh dimension {d}")

    n_vertices = expect("VERTICES")
    vertices = np.empty((n_vertices, d))
    for k in range(n_vertices):
        if pos >= len(tokens):
            raise MeshFormatError("unexpected end of file in VERTICES section")
        lineno, words = tokens[pos]
        if len(words) != d:
            raise _parse_error(lineno, " ".join(words), f"expected {d} coordinates")
        try:
            vertices[k] = [float(w) for w in words]
        except ValueError:
            raise _parse_error(lineno, " ".join(words), "bad coordinate") from None
        pos += 1

    n_elements = expect("ELEMENTS")
    elements = np.empty((n_elements, d + 1), dtype=np.int64)
    for k in range(n_elements):
        if pos >= len(tokens):
            raise MeshFormatError("unexpected end of file in ELEMENTS section")
        lineno, words = tokens[pos]
        if len(words) != d + 1:
            raise _parse_error(lineno, " ".join(words), f"expected {d + 1} vertex indices")
        try:
            elements[k] = [int(w) for w in words]
        except ValueError:
            raise _parse_error(lineno, " ".join(words), "bad vertex index") from None
        if np.any(elements[k] < 0) or np.any(elements[k] >= n_vertices):
            raise MeshStructureError(
                f"element {k} references vertex outside [0, {n_vertices})"
            )
        pos += 1

    n_facets = expect("BOUNDARY")
    facets = np.empty((n_facets, d), dtype=np.int64)
    markers = []
    for k in range(n_facets):
        if pos >= len(tokens):
            raise MeshFormatError("unexpected end of file in BOUNDARY section")
        lineno, words = tokens[pos]
        if len(words) != d + 1 or words[-1] not in (DIRICHLET, NEUMANN):
            raise _parse_error(
                lineno, " ".join(words), f"expected {d} indices and a D|N marker"
            )
        try:
            facets[k] = [int(w) for w in words[:-1]]
        except ValueError:
            raise _parse_error(lineno, " ".join(words), "bad facet index") from None
        if np.any(facets[k] < 0) or np.any(facets[k] >= n_vertices):
            raise MeshStructureError(
                f"boundary facet {k} references vertex outside [0, {n_vertices})"
            )
        markers.append(words[-1])
        pos += 1

    if pos != len(tokens):
        lineno, words = tokens[pos]
        raise _parse_error(lineno, " ".join(words), "trailing content")

    # repair negatively oriented elements
    repaired = 0
    for k in range(n_elements):
        coords = vertices[elements[k]]
        det = np.linalg.det((coords[1:] - coords[0]).T)
        if det < 0:
            elements[k, [0, 1]] = elements[k, [1, 0]]
            repaired += 1
    if repaired:
        warnings.warn(
            f"repaired {repaired} negatively oriented element(s) by vertex swap",
            stacklevel=2,
        )
    return SimplicialMesh(d, vertices, elements, facets, tuple(markers))


# ---------------------------------------------------------------------------
# validation


def _facet_incidence(mesh: SimplicialMesh) -> dict[tuple[int, ...], int]:
    """Count how many elements share each facet (vertex in 1D, edge in 2D)."""
    counts: dict[tuple[int, ...], int] = {}
    for element in mesh.elements:
        v = element.tolist()
        if mesh.dimension == 1:
            facets = [(v[0],), (v[1],)]
        else:
            facets = [tuple(sorted((v[i], v[j]))) for i, j in ((0, 1), (1, 2), (0, 2))]
        for f in facets:
            counts[f] = counts.get(f, 0) + 1
    return counts


def validate_mesh(mesh: SimplicialMesh) -> list[str]:
    """Run the structural validation pass; returns a list of problems.

    Checks positive element volumes, facet conformity (interior facets shared
    by exactly two elements), boundary coverage by the marked facet list, and
    that the Dirichlet part of the boundary is nonempty.
    """
    problems = []
    try:
        build_affine_maps(mesh)
    except (DegenerateElementError, MeshStructureError) as exc:
        problems.append(str(exc))

    counts = _facet_incidence(mesh)
    over_shared = [f for f, c in counts.items() if c > 2]
    for f in over_shared:
        problems.append(f"facet {f} shared by {counts[f]} elements (non-conforming)")

    boundary = {f for f, c in counts.items() if c == 1}
    listed = {tuple(sorted(int(v) for v in facet)) for facet in mesh.boundary_facets}
    for f in sorted(listed - set(counts)):
        problems.append(f"boundary facet {f} does not belong to any element")
    for f in sorted(listed & set(counts) - boundary):
        problems.append(f"boundary facet {f} is interior (shared by two elements)")
    missing = boundary - listed
    for f in sorted(missing):
        problems.append(f"boundary facet {f} has no marker (defaults require listing)")

    if DIRICHLET not in mesh.boundary_markers:
        problems.append("no Dirichlet facet: the Dirichlet boundary must have positive measure")
    return problems
