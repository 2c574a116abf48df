"""Mesh generation, text-format round trips, and validation.

Creates the built-in mesh families, writes one to the plain-text format,
reads it back bit-exactly, and runs the structural validator.
"""

import os
import tempfile

from rkstab import (
    random_perturbed,
    read_mesh,
    stretched,
    structured_triangular,
    uniform_interval,
    validate_mesh,
    write_mesh,
)

interval = uniform_interval(16)
print(f"uniform interval: {interval.n_vertices} vertices, {interval.n_elements} cells")

uniform = structured_triangular(8, 8)
print(f"structured triangular 8x8: {uniform.n_vertices} vertices, {uniform.n_elements} triangles")

aniso = stretched(8, 8, ratio=10.0)
widths = aniso.vertices[:, 0].max(), aniso.vertices[:, 1].max()
print(f"stretched mesh covers [0,{widths[0]:g}] x [0,{widths[1]:g}] (aspect ratio 10)")

wiggly = random_perturbed(8, 8, amplitude=0.03, seed=5)
print(f"perturbed mesh: {wiggly.n_elements} triangles, interior vertices jittered")

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "mesh.txt")
    write_mesh(wiggly, path)
    again = read_mesh(path)
    identical = (again.vertices == wiggly.vertices).all()
    print(f"text round trip bit-exact: {bool(identical)}")

for name, mesh in [("interval", interval), ("uniform", uniform), ("perturbed", wiggly)]:
    problems = validate_mesh(mesh)
    print(f"validate {name}: {'ok' if not problems else problems}")
