"""Independent checks: inclusion residuals, the critical-point inequality,
closed-form radial oracles, and a brute-force global minimizer for tiny
meshes.

The discrete weak operator value at an interior node is read off as
m_i = -(psi_gradient)_i / node_weight_i, which turns the inclusion into a
per-node interval test.  The inclusion holds at a node when m_i lies inside
the envelope bracket at (x_i, u_i); near a declared jump level the bracket
is widened to the full jump interval (a discrete solution only crosses the
level between nodes).
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .mesh import Field, Mesh, element_gradients, inradius
from .nonlinearity import NonlinearitySpec, bracket, primitive
from .energy import psi, psi_gradient, total_energy


# -- trial fields --------------------------------------------------------------

_adjacency_cache = weakref.WeakKeyDictionary()


def _adjacency(mesh: Mesh):
    try:
        return _adjacency_cache[mesh]
    except KeyError:
        pass
    nv = mesh.dim + 1
    rows, cols = [], []
    for a in range(nv):
        for b in range(nv):
            if a != b:
                rows.append(mesh.elements[:, a])
                cols.append(mesh.elements[:, b])
    n = len(mesh.nodes)
    A = sp.coo_matrix((np.ones(nv * (nv - 1) * len(mesh.elements)),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.data[:] = 1.0
    deg = np.maximum(A @ np.ones(n), 1.0)
    _adjacency_cache[mesh] = (A, deg)
    return A, deg


def _random_bump(mesh: Mesh, rng) -> np.ndarray:
    """Smooth random zero-boundary shape with max element gradient norm 1."""
    A, deg = _adjacency(mesh)
    for _ in range(32):
        v = rng.standard_normal(len(mesh.nodes))
        for _ in range(int(rng.integers(0, 9))):
            v = 0.5 * v + 0.5 * (A @ v) / deg
            v[mesh.boundary_nodes] = 0.0
        if rng.random() < 0.3:
            v = np.abs(v) * (1.0 if rng.random() < 0.5 else -1.0)
        v[mesh.boundary_nodes] = 0.0
        g = element_gradients(mesh, v)
        gmax = float(np.sqrt((g * g).sum(axis=1).max()))
        if gmax > 0.0:
            return v / gmax
    return np.zeros(len(mesh.nodes))


def random_feasible_field(mesh: Mesh, rng, max_gradient: float = 0.9,
                          around=None) -> Field:
    """Random zero-boundary field with element gradient norms <= max_gradient.

    Smooth random bumps (neighbor-averaged noise, occasionally rectified to
    a single sign) rescaled until the gradient bound holds; the amplitude is
    drawn log-uniformly so both tiny and near-maximal trial fields appear.
    With `around` (a nodal value array) the bump perturbs that field instead
    of zero, using the remaining gradient headroom, so local behaviour near
    a candidate solution gets probed too.
    """
    bump = _random_bump(mesh, rng)
    amp = 10.0 ** rng.uniform(-3.0, 0.0)
    if around is None:
        return Field(mesh, bump * (max_gradient * amp), dirichlet_zero=True)
    base = np.asarray(around, dtype=float)
    g = element_gradients(mesh, base)
    headroom = max_gradient - float(np.sqrt((g * g).sum(axis=1).max()))
    if headroom <= 0.0:
        return Field(mesh, base.copy(), dirichlet_zero=True)
    return Field(mesh, base + bump * (headroom * amp), dirichlet_zero=True)


def boundary_distance_cone(mesh: Mesh, max_gradient: float = 0.9) -> Field:
    """Distance-to-boundary-nodes field rescaled to the given gradient bound."""
    vals = np.zeros(len(mesh.nodes))
    tree = cKDTree(mesh.nodes[mesh.boundary_nodes])
    d, _ = tree.query(mesh.nodes[mesh.interior_nodes])
    vals[mesh.interior_nodes] = d
    g = element_gradients(mesh, vals)
    gmax = float(np.sqrt((g * g).sum(axis=1).max()))
    if gmax > 0.0:
        vals *= max_gradient / gmax
    return Field(mesh, vals, dirichlet_zero=True)


# -- pointwise inclusion residual ----------------------------------------------


def windowed_envelopes(mesh: Mesh, spec: NonlinearitySpec, values,
                       window: Optional[float] = None):
    """Envelope arrays (lo, hi) at every node, widened near jump levels.

    A nodal value within `window` (default: the mesh size h) of a declared
    jump level sees the whole jump interval: a piecewise-affine candidate
    crosses the level between nodes, so the limiting selection there may be
    any bracket element.
    """
    if window is None:
        window = mesh.mesh_size()
    lo = np.empty(len(values))
    hi = np.empty(len(values))
    for i, (x, s) in enumerate(zip(mesh.nodes, values)):
        br = bracket(spec, x, s)
        lo[i], hi[i] = br.lo, br.hi
        for j in spec.jumps or ():
            if abs(s - float(j.level(x))) <= window:
                a, b = float(j.left(x)), float(j.right(x))
                lo[i] = min(lo[i], a, b)
                hi[i] = max(hi[i], a, b)
    return lo, hi


def inclusion_residual(mesh: Mesh, u: Field, spec: NonlinearitySpec,
                       bracket_slack: float = 0.0,
                       jump_window: Optional[float] = None,
                       margin: float = 1e-9) -> np.ndarray:
    """Distance of the discrete operator value to the envelope bracket.

    Returns one residual per node (zero at boundary nodes, which carry the
    Dirichlet condition instead).  `bracket_slack` widens every bracket
    symmetrically; `jump_window` (default: the mesh size h) is the value
    tolerance within which a node counts as sitting on a jump level, in
    which case the bracket is widened to the whole jump interval.
    """
    lo, hi = windowed_envelopes(mesh, spec, u.values, window=jump_window)
    grad = psi_gradient(mesh, u, margin=margin)
    out = np.zeros(len(mesh.nodes))
    idx = mesh.interior_nodes
    m = -grad[idx] / mesh.node_weight[idx]
    out[idx] = np.maximum(0.0, np.maximum(lo[idx] - bracket_slack - m,
                                          m - hi[idx] - bracket_slack)) + 0.0
    return out


# -- critical-point inequality ---------------------------------------------------


def variational_inequality_check(mesh: Mesh, u: Field, zeta, trials: int,
                                 seed: int = 0) -> float:
    """Minimum slack of psi(w) - psi(u) + <zeta, w - u> over trial fields.

    The trial set is a deterministic suite (zero field, the candidate
    itself, distance cones at several amplitudes and both signs) plus
    `trials` random feasible fields, half of them small perturbations of
    the candidate.  At a critical point paired with its selection the
    returned minimum is nonnegative up to solver tolerances.
    """
    zeta = np.asarray(zeta, dtype=float)
    psi_u = psi(mesh, u)
    if math.isinf(psi_u):
        raise ValueError("candidate field is outside the constraint set")
    w_lumped = mesh.node_weight * zeta

    def slack(field: Field) -> float:
        return psi(mesh, field) - psi_u + float(
            np.dot(w_lumped, field.values - u.values))

    suite = [Field.zero(mesh), Field(mesh, u.values.copy(), dirichlet_zero=True)]
    for amp in (0.9, 0.5, 0.25, 0.1):
        cone = boundary_distance_cone(mesh, max_gradient=amp)
        suite.append(cone)
        suite.append(Field(mesh, -cone.values, dirichlet_zero=True))
    rng = np.random.default_rng(seed)
    worst = min(slack(w) for w in suite)
    for k in range(trials):
        around = u.values if k % 2 else None
        worst = min(worst, slack(random_feasible_field(mesh, rng, around=around)))
    return worst


# -- closed-form radial oracle ---------------------------------------------------


@dataclass(frozen=True)
class RadialSolution:
    """Closed-form solution of the constant-right-hand-side ball problem.

    u(r) = (N/a) * (sqrt(1 + (a r / N)^2) - sqrt(1 + (a R / N)^2)) solves
    (r^{N-1} u' / sqrt(1 - u'^2))' = a r^{N-1} with u(R) = 0 and |u'| < 1;
    for a = 0 it degenerates to the zero function.
    """

    a: float
    R: float
    N: int
    center: np.ndarray = dataclass_field(default=None)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        if self.a == 0.0:
            return np.zeros_like(r)
        k = self.a / self.N
        return (self.N / self.a) * (np.sqrt(1.0 + (k * r) ** 2)
                                    - math.sqrt(1.0 + (k * self.R) ** 2))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.a == 0.0:
            return np.zeros_like(r)
        k = self.a / self.N
        return (k * r) / np.sqrt(1.0 + (k * r) ** 2)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        center = self.center if self.center is not None else np.zeros(points.shape[1])
        d = points - center
        return self.radial(np.sqrt((d * d).sum(axis=1)))

    def on_mesh(self, mesh: Mesh) -> Field:
        vals = self(mesh.nodes)
        vals[mesh.boundary_nodes] = 0.0
        return Field(mesh, vals, dirichlet_zero=True)


def analytic_radial(a: float, R: float, N: int, center=None) -> RadialSolution:
    """Closed-form field for constant right-hand side a on a ball of radius R."""
    if R <= 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    c = None if center is None else np.asarray(center, dtype=float)
    return RadialSolution(a=float(a), R=float(R), N=int(N), center=c)


# -- brute-force global minimum --------------------------------------------------


def brute_force_minimize(mesh: Mesh, spec: NonlinearitySpec, grid_step: float):
    """Exhaustive search over quantized interior values on a tiny 1D mesh.

    Interior nodal values range over [-inradius, inradius] on a symmetric
    grid of spacing grid_step (zero included); configurations violating the
    per-element gradient bound (up to a 1e-12 quantization slack) are
    discarded.  Returns (nodal values including boundary zeros, energy).
    Ties are broken by the lexicographically smallest configuration in
    interior-node order.
    """
    if mesh.dim != 1:
        raise ValueError("brute force search supports 1D meshes only")
    if grid_step <= 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    interior = mesh.interior_nodes
    m = interior.size
    if m > 4:
        raise ValueError(f"{m} interior nodes is too many for exhaustive search (max 4)")
    rad = inradius(mesh)
    if m == 0:
        vals = np.zeros(len(mesh.nodes))
        f = Field(mesh, vals, dirichlet_zero=True)
        return vals, total_energy(mesh, f, spec)
    half = int(math.floor(rad / grid_step + 1e-12))
    grid = np.arange(-half, half + 1) * grid_step
    n_grid = grid.size

    # lumped potential per interior node, tabulated over the grid
    f_tab = np.empty((m, n_grid))
    for k, i in enumerate(interior):
        w, x = mesh.node_weight[i], mesh.nodes[i]
        f_tab[k] = [w * primitive(spec, x, s) for s in grid]

    node_slot = {int(i): k for k, i in enumerate(interior)}
    measures = mesh.element_measure
    slack = 1.0 + 1e-12

    def element_terms(assign):
        """Per-element (feasible, energy) contributions given node values.

        `assign` maps interior slot -> scalar or broadcastable array;
        boundary nodes contribute zero.
        """
        feas, area = True, 0.0
        for (na, nb), h in zip(mesh.elements, measures):
            va = assign.get(node_slot.get(int(na), -1), 0.0)
            vb = assign.get(node_slot.get(int(nb), -1), 0.0)
            g = (vb - va) / h
            g2 = np.minimum(np.square(g), 1.0)
            feas = np.logical_and(feas, np.abs(g) <= slack)
            area = area + h * (1.0 - np.sqrt(1.0 - g2))
        return feas, area

    best_energy = math.inf
    best_slots = None
    n_loop = max(0, m - 2)
    vec_slots = list(range(n_loop, m))
    shape = tuple(n_grid for _ in vec_slots)
    vec_arrays = {}
    for pos, slot in enumerate(vec_slots):
        idx = [None] * len(vec_slots)
        idx[pos] = slice(None)
        vec_arrays[slot] = grid[tuple(idx)]

    for combo in itertools.product(range(n_grid), repeat=n_loop):
        assign = {slot: grid[j] for slot, j in zip(range(n_loop), combo)}
        assign.update(vec_arrays)
        feas, area = element_terms(assign)
        if not np.any(feas):
            continue
        energy = area + sum(f_tab[slot][combo[slot]] for slot in range(n_loop))
        for pos, slot in enumerate(vec_slots):
            idx = [None] * len(vec_slots)
            idx[pos] = slice(None)
            energy = energy + f_tab[slot][tuple(idx)]
        energy = np.where(feas, energy, math.inf)
        flat = int(np.argmin(energy))
        e_min = float(np.asarray(energy).ravel()[flat])
        if e_min < best_energy:
            best_energy = e_min
            tail = np.unravel_index(flat, shape) if shape else ()
            best_slots = tuple(combo) + tuple(int(t) for t in tail)

    if best_slots is None:
        raise ValueError("no feasible configuration on the search grid")
    vals = np.zeros(len(mesh.nodes))
    for slot, j in enumerate(best_slots):
        vals[interior[slot]] = grid[j]
    return vals, best_energy


# -- composed report --------------------------------------------------------------


@dataclass
class VerificationReport:
    """Outcome of the independent checks with per-check pass flags."""

    max_inclusion_residual: float
    vi_min_slack: float
    analytic_linf_error: Optional[float] = None
    bruteforce_gap: Optional[float] = None
    passed: dict = dataclass_field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def verification_report(mesh: Mesh, u: Field, zeta, spec: NonlinearitySpec, *,
                        residual_tol: float = 1e-2, vi_tol: float = 1e-6,
                        vi_trials: int = 200, seed: int = 0,
                        analytic=None, analytic_tol: float = 2e-2,
                        bruteforce_step: Optional[float] = None,
                        bruteforce_tol: float = 1e-3,
                        margin: float = 1e-9) -> VerificationReport:
    """Run every applicable check on a candidate solution/selection pair."""
    res = inclusion_residual(mesh, u, spec, margin=margin)
    max_res = float(res[mesh.interior_nodes].max()) if mesh.interior_nodes.size else 0.0
    vi = variational_inequality_check(mesh, u, zeta, vi_trials, seed=seed)
    passed = {
        "inclusion": max_res <= residual_tol,
        "variational_inequality": vi >= -vi_tol,
    }
    analytic_err = None
    if analytic is not None:
        exact = analytic(mesh.nodes) if callable(analytic) else np.asarray(analytic)
        analytic_err = float(np.abs(u.values - exact).max())
        passed["analytic"] = analytic_err <= analytic_tol
    gap = None
    if bruteforce_step is not None:
        _, brute_energy = brute_force_minimize(mesh, spec, bruteforce_step)
        gap = total_energy(mesh, u, spec) - brute_energy
        passed["bruteforce"] = gap <= bruteforce_tol
    return VerificationReport(max_inclusion_residual=max_res, vi_min_slack=vi,
                              analytic_linf_error=analytic_err,
                              bruteforce_gap=gap, passed=passed)


def format_report(report: VerificationReport) -> str:
    """Flat key-value text block used by reports and the command line."""
    lines = [
        f"max_inclusion_residual {report.max_inclusion_residual:.17g}",
        f"vi_min_slack {report.vi_min_slack:.17g}",
    ]
    if report.analytic_linf_error is not None:
        lines.append(f"analytic_linf_error {report.analytic_linf_error:.17g}")
    if report.bruteforce_gap is not None:
        lines.append(f"bruteforce_gap {report.bruteforce_gap:.17g}")
    for name, ok in report.passed.items():
        lines.append(f"passed.{name} {'true' if ok else 'false'}")
    lines.append(f"all_passed {'true' if report.all_passed else 'false'}")
    return "\n".join(lines) + "\n"
