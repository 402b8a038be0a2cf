"""Simplicial meshes with P1 element gradients and lumped node weights.

Built-in generators cover intervals, triangulated rectangles, and disks
(midpoint refinement of an inscribed hexagon, boundary nodes kept exactly
on the circle).  External meshes are exchanged through a small text format,
see `read_mesh` / `write_mesh`.

A mesh is immutable after construction and safe to share across threads;
all operations here are pure functions of their arguments.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree


class MeshError(ValueError):
    """Invalid mesh data (degenerate element, bad index, ...)."""


class MeshFormatError(MeshError):
    """Malformed mesh file; message carries the offending line number."""


class Mesh:
    """Simplicial mesh of an open bounded domain with marked boundary nodes.

    Parameters
    ----------
    nodes : array_like, shape (K, dim) or (K,)
        Node coordinates.  A 1D array is treated as K points on the line.
    elements : array_like, shape (M, dim+1)
        Node indices of each simplex.
    boundary_nodes : iterable of int
        Indices of the nodes lying on the domain boundary.

    Attributes
    ----------
    dim : int
        Spatial dimension (1, 2 or 3).
    element_measure : ndarray, shape (M,)
        Length / area / volume of each simplex.
    node_weight : ndarray, shape (K,)
        Lumped quadrature weight: each element contributes measure/(dim+1)
        to each of its vertices.  Weights sum to the domain volume.
    """

    def __init__(self, nodes, elements, boundary_nodes):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1)
        self.nodes = nodes
        self.dim = nodes.shape[1]
        if self.dim not in (1, 2, 3):
            raise MeshError(f"unsupported spatial dimension {self.dim}")

        elements = np.array(elements, dtype=np.int64)
        if elements.size == 0:
            elements = elements.reshape(0, self.dim + 1)
        if elements.ndim != 2 or elements.shape[1] != self.dim + 1:
            raise MeshError(
                f"elements must be (M, {self.dim + 1}) for dim {self.dim}, "
                f"got {elements.shape}"
            )
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise MeshError("element references a node index out of range")
        self.elements = elements

        boundary = np.array(sorted(set(int(i) for i in boundary_nodes)), dtype=np.int64)
        if boundary.size and (boundary.min() < 0 or boundary.max() >= len(nodes)):
            raise MeshError("boundary node index out of range")
        if self.dim == 1 and boundary.size != 2:
            raise MeshError("a 1D mesh must have exactly two boundary nodes")
        self.boundary_nodes = boundary
        mask = np.zeros(len(nodes), dtype=bool)
        mask[boundary] = True
        self.is_boundary = mask
        self.interior_nodes = np.flatnonzero(~mask)

        self._build_geometry()
        for arr in (self.nodes, self.elements, self.boundary_nodes, self.is_boundary,
                    self.interior_nodes, self.element_measure, self.node_weight,
                    self.basis_gradients):
            arr.setflags(write=False)

    def _build_geometry(self):
        n = self.dim
        p0 = self.nodes[self.elements[:, 0]]
        # edge matrix D has columns p_j - p_0; gradients of the barycentric
        # coordinates are the rows of D^{-1}
        D = np.stack([self.nodes[self.elements[:, j]] - p0 for j in range(1, n + 1)], axis=2)
        det = np.linalg.det(D)
        measure = np.abs(det) / math.factorial(n)
        if np.any(measure <= 0.0) or not np.all(np.isfinite(measure)):
            bad = int(np.argmin(measure))
            raise MeshError(f"element {bad} is degenerate (measure {measure[bad]:g})")
        self.element_measure = measure

        Dinv = np.linalg.inv(D)
        grads = np.empty((len(self.elements), n + 1, n))
        grads[:, 1:, :] = Dinv  # rows of D^{-1} are grad(lambda_j), j = 1..n
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.basis_gradients = grads

        weight = np.zeros(len(self.nodes))
        np.add.at(weight, self.elements, (measure / (n + 1))[:, None])
        self.node_weight = weight

    # -- derived scalars ---------------------------------------------------

    def volume(self):
        """Total measure of the meshed domain."""
        return float(self.element_measure.sum())

    def mesh_size(self):
        """Longest element edge, the discretization parameter h."""
        h = 0.0
        for a in range(self.dim + 1):
            for b in range(a + 1, self.dim + 1):
                e = self.nodes[self.elements[:, a]] - self.nodes[self.elements[:, b]]
                h = max(h, float(np.sqrt((e * e).sum(axis=1)).max()))
        return h

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, nodes={len(self.nodes)}, "
                f"elements={len(self.elements)}, boundary={len(self.boundary_nodes)})")


class Field:
    """Nodal values of a continuous piecewise-affine function on a mesh.

    With ``dirichlet_zero=True`` the constructor enforces exact zeros at
    every boundary node.
    """

    def __init__(self, mesh: Mesh, values, dirichlet_zero: bool = False):
        values = np.array(values, dtype=float)
        if values.shape != (len(mesh.nodes),):
            raise MeshError(
                f"field has {values.shape} values for {len(mesh.nodes)} nodes"
            )
        if dirichlet_zero and np.any(values[mesh.boundary_nodes] != 0.0):
            raise MeshError("dirichlet_zero field has a nonzero boundary value")
        self.mesh = mesh
        self.values = values
        self.dirichlet_zero = dirichlet_zero
        values.setflags(write=False)

    @classmethod
    def zero(cls, mesh: Mesh) -> "Field":
        return cls(mesh, np.zeros(len(mesh.nodes)), dirichlet_zero=True)

    @classmethod
    def from_function(cls, mesh: Mesh, fn, dirichlet_zero: bool = False) -> "Field":
        """Sample ``fn`` at every node; ``fn`` receives a coordinate array."""
        vals = np.array([fn(x) for x in mesh.nodes], dtype=float)
        if dirichlet_zero:
            vals[mesh.boundary_nodes] = 0.0
        return cls(mesh, vals, dirichlet_zero=dirichlet_zero)

    def __repr__(self):
        return f"Field(nodes={len(self.values)}, dirichlet_zero={self.dirichlet_zero})"


# -- generators --------------------------------------------------------------


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    """Uniform mesh of the interval (a, b) with n elements.

    The two endpoints are the boundary nodes.
    """
    if n < 1:
        raise MeshError(f"need at least one element, got n={n}")
    if not a < b:
        raise MeshError(f"empty interval: a={a!r} must be < b={b!r}")
    nodes = np.linspace(a, b, n + 1).reshape(-1, 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(nodes, elements, [0, n])


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Triangulated rectangle (0, lx) x (0, ly), each cell split in two."""
    if lx <= 0 or ly <= 0:
        raise MeshError(f"rectangle sides must be positive, got {lx} x {ly}")
    if nx < 1 or ny < 1:
        raise MeshError(f"subdivision counts must be positive, got {nx} x {ny}")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    nodes = np.array([(x, y) for y in ys for x in xs])

    def idx(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
    boundary = [idx(i, j) for j in range(ny + 1) for i in range(nx + 1)
                if i in (0, nx) or j in (0, ny)]
    return Mesh(nodes, np.array(elements), boundary)


def build_disk_mesh(radius: float, refinement: int) -> Mesh:
    """Triangulated disk of the given radius centered at the origin.

    Starts from a hexagon fan and applies `refinement` rounds of midpoint
    subdivision; midpoints of rim edges are pushed back onto the circle, so
    all boundary nodes lie exactly on it.  The covered polygon is inscribed
    in the disk and its area converges to pi*radius^2.
    """
    if radius <= 0:
        raise MeshError(f"disk radius must be positive, got {radius}")
    if refinement < 0:
        raise MeshError(f"refinement must be >= 0, got {refinement}")
    nodes = [(0.0, 0.0)]
    for k in range(6):
        t = math.pi * k / 3.0
        nodes.append((radius * math.cos(t), radius * math.sin(t)))
    elements = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    rim_edges = {frozenset((1 + k, 1 + (k + 1) % 6)) for k in range(6)}
    boundary = set(range(1, 7))

    for _ in range(refinement):
        midpoint = {}

        def split(a, b):
            key = frozenset((a, b))
            if key in midpoint:
                return midpoint[key]
            m = 0.5 * (np.asarray(nodes[a]) + np.asarray(nodes[b]))
            if key in rim_edges:
                m = m * (radius / np.hypot(m[0], m[1]))
            nodes.append(tuple(m))
            midpoint[key] = len(nodes) - 1
            return midpoint[key]

        new_elements = []
        for (a, b, c) in elements:
            mab, mbc, mca = split(a, b), split(b, c), split(c, a)
            new_elements += [(a, mab, mca), (mab, b, mbc),
                             (mca, mbc, c), (mab, mbc, mca)]
        new_rim = set()
        for edge in rim_edges:
            a, b = tuple(edge)
            m = midpoint[edge]
            boundary.add(m)
            new_rim.add(frozenset((a, m)))
            new_rim.add(frozenset((m, b)))
        elements = new_elements
        rim_edges = new_rim

    return Mesh(np.array(nodes), np.array(elements), boundary)


# -- element-level evaluation -------------------------------------------------


def element_gradient(mesh: Mesh, field: Field, element: int) -> np.ndarray:
    """Constant gradient of the P1 interpolant of `field` on one simplex."""
    if field.mesh is not mesh:
        raise MeshError("field was built on a different mesh")
    m = len(mesh.elements)
    if not 0 <= element < m:
        raise MeshError(f"element index {element} out of range [0, {m})")
    verts = mesh.elements[element]
    return mesh.basis_gradients[element].T @ field.values[verts]


def element_gradients(mesh: Mesh, values) -> np.ndarray:
    """Per-element P1 gradients of a nodal value vector, shape (M, dim)."""
    values = np.asarray(values, dtype=float)
    return np.einsum("evd,ev->ed", mesh.basis_gradients, values[mesh.elements])


def inradius(mesh: Mesh) -> float:
    """Largest distance from an interior node to the nearest boundary node.

    For a field with per-element gradient norms <= 1 and zero boundary
    values, |v| at any interior node is bounded by this constant (straight
    segments to the boundary cross elements of slope at most one), so it
    serves as the discrete uniform bound on the feasible set.
    """
    if mesh.interior_nodes.size == 0:
        return 0.0
    tree = cKDTree(mesh.nodes[mesh.boundary_nodes])
    dist, _ = tree.query(mesh.nodes[mesh.interior_nodes])
    return float(dist.max())


# -- text format --------------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    """Write a mesh in the plain-text exchange format."""
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dim}\n")
        fh.write(f"nodes {len(mesh.nodes)}\n")
        for x in mesh.nodes:
            fh.write(" ".join(f"{c:.17g}" for c in x) + "\n")
        fh.write(f"elements {len(mesh.elements)}\n")
        for e in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in e) + "\n")
        fh.write("boundary\n")
        fh.write(" ".join(str(int(i)) for i in mesh.boundary_nodes) + "\n")


def read_mesh(path) -> Mesh:
    """Read a mesh written by `write_mesh`.

    Format: ``dim N``; ``nodes K`` followed by K coordinate lines;
    ``elements M`` followed by M 0-based index lines; ``boundary`` followed
    by one line of indices.  ``#`` starts a comment; blank lines are
    ignored.  Malformed input raises `MeshFormatError` naming the line.
    """
    with open(path) as fh:
        raw = fh.readlines()
    lines = []  # (lineno, tokens)
    for no, text in enumerate(raw, start=1):
        text = text.split("#", 1)[0].strip()
        if text:
            lines.append((no, text.split()))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            last = raw and len(raw) or 1
            raise MeshFormatError(f"line {last}: unexpected end of file, expected {what}")
        item = lines[pos]
        pos += 1
        return item

    def keyword_count(word):
        no, toks = take(f"'{word} <count>'")
        if toks[0] != word or len(toks) != 2:
            raise MeshFormatError(f"line {no}: expected '{word} <count>', got {' '.join(toks)!r}")
        try:
            return int(toks[1])
        except ValueError:
            raise MeshFormatError(f"line {no}: bad count {toks[1]!r}") from None

    dim = keyword_count("dim")
    if dim not in (1, 2, 3):
        raise MeshFormatError(f"unsupported dim {dim}")
    n_nodes = keyword_count("nodes")
    nodes = np.empty((n_nodes, dim))
    for i in range(n_nodes):
        no, toks = take("a coordinate line")
        if len(toks) != dim:
            raise MeshFormatError(f"line {no}: expected {dim} coordinates, got {len(toks)}")
        try:
            nodes[i] = [float(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"line {no}: bad coordinate in {' '.join(toks)!r}") from None

    n_el = keyword_count("elements")
    elements = np.empty((n_el, dim + 1), dtype=np.int64)
    for i in range(n_el):
        no, toks = take("an element line")
        if len(toks) != dim + 1:
            raise MeshFormatError(f"line {no}: expected {dim + 1} node indices, got {len(toks)}")
        try:
            idx = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"line {no}: bad node index in {' '.join(toks)!r}") from None
        for j in idx:
            if not 0 <= j < n_nodes:
                raise MeshFormatError(f"line {no}: node index {j} out of range [0, {n_nodes})")
        elements[i] = idx

    no, toks = take("'boundary'")
    if toks != ["boundary"]:
        raise MeshFormatError(f"line {no}: expected 'boundary', got {' '.join(toks)!r}")
    if pos < len(lines):
        no, toks = take("a boundary index line")
        try:
            boundary = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"line {no}: bad boundary index in {' '.join(toks)!r}") from None
    else:
        boundary = []
    for j in boundary:
        if not 0 <= j < n_nodes:
            raise MeshFormatError(f"line {no}: boundary index {j} out of range [0, {n_nodes})")
    if pos < len(lines):
        no, toks = lines[pos]
        raise MeshFormatError(f"line {no}: trailing content {' '.join(toks)!r}")
    return Mesh(nodes, elements, boundary)
