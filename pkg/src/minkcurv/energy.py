"""The gradient-constrained area energy, the potential term, and their sum.

The area-type functional is evaluated exactly per element (P1 gradients are
constant), the potential term by lumped vertex quadrature, so its partial
derivative at a node is node_weight * f(x_i, u_i) wherever f is continuous.
Infeasibility is a functional value: outside the constraint set the energy
is +inf, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Field, Mesh, element_gradients, inradius
from .nonlinearity import NonlinearitySpec, primitive


class StrictFeasibilityError(ValueError):
    """A gradient was requested too close to the constraint surface."""

    def __init__(self, element: int, gradient_norm: float, margin: float):
        super().__init__(
            f"element {element} has |grad| = {gradient_norm:.17g} "
            f"> 1 - {margin:g}; gradients are only defined strictly inside "
            f"the unit ball")
        self.element = element
        self.gradient_norm = gradient_norm
        self.margin = margin


@dataclass(frozen=True)
class Feasibility:
    """Membership report for the constraint set (|grad| <= 1, zero trace)."""

    in_K0: bool
    max_element_gradient_norm: float
    boundary_violation: float


@dataclass(frozen=True)
class EnergyBounds:
    """Uniform constants implied by the growth bound on the feasible set.

    c_omega bounds |v| on the feasible set, C1 bounds |f(x, v)|, C2 bounds
    |F(x, v)|, and lower_bound = -C2 * vol is a floor for the total energy.
    """

    c_omega: float
    C1: float
    C2: float
    lower_bound: float


def feasibility(mesh: Mesh, field: Field) -> Feasibility:
    """Exact constraint check: per-element gradient norms and boundary trace."""
    g = element_gradients(mesh, field.values)
    gnorm = np.sqrt((g * g).sum(axis=1))
    max_norm = float(gnorm.max()) if gnorm.size else 0.0
    bviol = float(np.abs(field.values[mesh.boundary_nodes]).max()) \
        if mesh.boundary_nodes.size else 0.0
    return Feasibility(in_K0=(max_norm <= 1.0 and bviol == 0.0),
                       max_element_gradient_norm=max_norm,
                       boundary_violation=bviol)


def psi(mesh: Mesh, field: Field) -> float:
    """Area-type energy: sum of measure * (1 - sqrt(1 - |grad|^2)).

    Returns +inf for fields outside the constraint set (gradient norm
    above one anywhere, or a nonzero boundary value).
    """
    g = element_gradients(mesh, field.values)
    g2 = (g * g).sum(axis=1)
    if np.any(g2 > 1.0):
        return math.inf
    if mesh.boundary_nodes.size and np.any(field.values[mesh.boundary_nodes] != 0.0):
        return math.inf
    return float(np.dot(mesh.element_measure, 1.0 - np.sqrt(np.maximum(0.0, 1.0 - g2))))


def psi_gradient(mesh: Mesh, field: Field, margin: float = 1e-9) -> np.ndarray:
    """Exact nodal gradient of `psi` for strictly feasible fields.

    Component i sums measure * grad/sqrt(1-|grad|^2) . grad(phi_i) over the
    elements touching node i.  Components at boundary nodes are returned too
    (callers doing Dirichlet solves mask them).  Raises
    `StrictFeasibilityError` when some element gradient norm exceeds
    1 - margin, since the integrand's slope blows up on the constraint
    surface.
    """
    g = element_gradients(mesh, field.values)
    g2 = (g * g).sum(axis=1)
    limit = (1.0 - margin) ** 2
    if np.any(g2 > limit):
        bad = int(np.argmax(g2))
        raise StrictFeasibilityError(bad, float(np.sqrt(g2[bad])), margin)
    dens = g / np.sqrt(1.0 - g2)[:, None]
    contrib = mesh.element_measure[:, None] * np.einsum(
        "evd,ed->ev", mesh.basis_gradients, dens)
    out = np.zeros(len(mesh.nodes))
    np.add.at(out, mesh.elements, contrib)
    return out


def script_f(mesh: Mesh, field: Field, spec: NonlinearitySpec) -> float:
    """Lumped potential term: sum of node_weight * F(x_i, v_i)."""
    total = 0.0
    for i, w in enumerate(mesh.node_weight):
        total += w * primitive(spec, mesh.nodes[i], field.values[i])
    return float(total)


def total_energy(mesh: Mesh, field: Field, spec: NonlinearitySpec) -> float:
    """Area energy plus potential term; +inf off the constraint set."""
    area = psi(mesh, field)
    if math.isinf(area):
        return math.inf
    return area + script_f(mesh, field, spec)


def bounds(mesh: Mesh, spec: NonlinearitySpec) -> EnergyBounds:
    """Uniform constants from the growth bound over the feasible set."""
    c = inradius(mesh)
    C, q = spec.growth_c, spec.growth_q
    C1 = C * (1.0 + c ** (q - 1.0))
    C2 = C * (c + c ** q / q)
    return EnergyBounds(c_omega=c, C1=C1, C2=C2,
                        lower_bound=-C2 * mesh.volume())
