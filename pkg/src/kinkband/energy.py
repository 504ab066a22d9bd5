"""Stored energy, smoothed dissipation, and their gradients over free DOFs.

The stored-energy density per unit reference area is

    W(Fe) = C (|Fe|^p - 2^{p/2} - 2 log det Fe) + D (det Fe - 1)^2
            + aniso |Fe m|^2                       [MPa]

with |.| the Frobenius norm, plus the slip terms

    beta (2 + gamma^2)^{r/2}  +  eps_grad |grad gamma|^2 .

Where det Fe <= det_floor the elastic density is replaced by the flat
penalty det_penalty and its gradient contribution is zero.  The smoothed
dissipation between two slip fields is

    sigma * integral sqrt(delta^2 + (gamma1 - gamma2)^2) dx .

Assembly integrates with the 3-point edge-midpoint rule in a fixed element
order, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import SlipSystem
from .mesh import Mesh2D

# Edge-midpoint quadrature: barycentric points and area-normalized weights.
_QP = np.array([[0.5, 0.5, 0.0],
                [0.0, 0.5, 0.5],
                [0.5, 0.0, 0.5]])
_QW = np.full(3, 1.0 / 3.0)


@dataclass
class MaterialParams:
    """Constitutive and regularization constants, N-mm-MPa units.

    Defaults are the reference compression setup: C = 0.6 GPa, D = 0.2 GPa,
    aniso = 0.1 GPa, beta = 20 kPa, eps_grad = 500 N, sigma = 1 kPa,
    delta = 1e-5, penalty 1e6.  The model only constrains the growth
    exponent to p > 2; see the README for why the default sits just above 2.
    """

    C: float = 600.0            # MPa
    D: float = 200.0            # MPa
    aniso: float = 100.0        # MPa, coefficient of |Fe m|^2
    beta: float = 0.02          # MPa
    eps_grad: float = 500.0     # N (= MPa mm^2)
    sigma: float = 0.001        # MPa, slip resistance
    p: float = 2.2              # growth exponent, > 2
    r: float = 2.0              # hardening exponent
    grad_exponent: float = 2.0  # slip-gradient exponent, fixed at 2
    delta: float = 1e-5         # dissipation smoothing
    det_penalty: float = 1e6    # MPa, density where det Fe <= det_floor
    det_floor: float = 1e-8

    def validate(self) -> None:
        for name in ("C", "D", "aniso", "eps_grad", "sigma", "delta",
                     "det_penalty", "det_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not self.p > 2:
            raise ValueError(f"p must exceed 2, got {self.p}")
        if not self.r >= 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if self.grad_exponent != 2.0:
            raise ValueError("grad_exponent is fixed at 2")


@dataclass
class EnergyBreakdown:
    """Stored energy split by term; total excludes dissipation.  [N mm]"""

    elastic: float
    hardening: float
    slip_gradient: float
    penalty: float
    total: float


def elastic_density(Fe: np.ndarray, params: MaterialParams, slip: SlipSystem) -> float:
    """Elastic energy density at one strain state, penalty branch included."""
    Fe = np.asarray(Fe, dtype=float)
    det = Fe[0, 0] * Fe[1, 1] - Fe[0, 1] * Fe[1, 0]
    if det <= params.det_floor:
        return params.det_penalty
    frob2 = float(np.sum(Fe * Fe))
    fem = Fe @ slip.m
    return (params.C * (frob2 ** (params.p / 2.0) - 2.0 ** (params.p / 2.0)
                        - 2.0 * np.log(det))
            + params.D * (det - 1.0) ** 2
            + params.aniso * float(fem @ fem))


def hardening_density(gamma: float, params: MaterialParams) -> float:
    """beta * (2 + gamma^2)^{r/2}; the squared Frobenius norm of Fp is 2 + gamma^2."""
    return params.beta * (2.0 + gamma * gamma) ** (params.r / 2.0)


def slip_gradient_density(grad_gamma, params: MaterialParams) -> float:
    """eps_grad * |grad gamma|^2 (for unit s, m the plastic-distortion
    gradient norm equals |grad gamma|)."""
    g = np.asarray(grad_gamma, dtype=float)
    return params.eps_grad * float(g @ g)


def _check_lengths(mesh: Mesh2D, *arrays):
    for a in arrays:
        if len(a) != mesh.n_nodes:
            raise ValueError(
                f"nodal array length {len(a)} does not match mesh with "
                f"{mesh.n_nodes} nodes")


def _assemble(mesh: Mesh2D, a1, a2, b, params: MaterialParams, slip: SlipSystem,
              b_prev=None, need_grad=False):
    """Vectorized quadrature assembly of energy (and dissipation / gradients).

    Returns (breakdown, dissipation, grads) where grads is None or a tuple
    of full nodal gradient arrays (ga1, ga2, gb) of I + D^delta.
    """
    tri = mesh.triangles
    area = mesh.element_area
    bg = mesh.basis_gradients                       # (nt, 3, 2)
    s, m = slip.s, slip.m

    ny = np.empty((len(tri), 2, 2))
    ny[:, 0, :] = np.einsum("ei,eij->ej", a1[tri], bg)
    ny[:, 1, :] = np.einsum("ei,eij->ej", a2[tri], bg)
    gam = b[tri] @ _QP.T                            # (nt, nq) slip at quad points
    grad_gam = np.einsum("ei,eij->ej", b[tri], bg)  # (nt, 2), element-constant

    u = ny @ s                                      # grad_y . s  (nt, 2)
    # Fe[e,q] = grad_y[e] - gam[e,q] * outer(u[e], m)
    Fe = ny[:, None, :, :] - gam[:, :, None, None] * (u[:, None, :, None] * m)
    det = Fe[..., 0, 0] * Fe[..., 1, 1] - Fe[..., 0, 1] * Fe[..., 1, 0]
    ok = det > params.det_floor
    det_safe = np.where(ok, det, 1.0)

    with np.errstate(over="ignore", invalid="ignore"):
        frob2 = np.einsum("eqij,eqij->eq", Fe, Fe)
        fem = Fe @ m                                # (nt, nq, 2)
        fem2 = np.einsum("eqi,eqi->eq", fem, fem)
        w_smooth = (params.C * (frob2 ** (params.p / 2.0)
                                - 2.0 ** (params.p / 2.0)
                                - 2.0 * np.log(det_safe))
                    + params.D * (det - 1.0) ** 2
                    + params.aniso * fem2)
        el_q = np.where(ok, w_smooth, 0.0)
        pen_q = np.where(ok, 0.0, params.det_penalty)
        hard_q = params.beta * (2.0 + gam * gam) ** (params.r / 2.0)

    elastic = float(area @ (el_q @ _QW))
    penalty = float(area @ (pen_q @ _QW))
    hardening = float(area @ (hard_q @ _QW))
    slip_grad = params.eps_grad * float(area @ np.einsum("ej,ej->e", grad_gam, grad_gam))
    breakdown = EnergyBreakdown(
        elastic=elastic, hardening=hardening, slip_gradient=slip_grad,
        penalty=penalty, total=elastic + hardening + slip_grad + penalty)

    diss = 0.0
    diff = None
    root = None
    if b_prev is not None:
        gam_prev = b_prev[tri] @ _QP.T
        diff = gam - gam_prev
        root = np.sqrt(params.delta ** 2 + diff * diff)
        diss = params.sigma * float(area @ (root @ _QW))

    if not need_grad:
        return breakdown, diss, None

    # dW/dFe on the smooth branch; zero at penalty points.
    cof = np.empty_like(Fe)
    cof[..., 0, 0] = Fe[..., 1, 1]
    cof[..., 0, 1] = -Fe[..., 1, 0]
    cof[..., 1, 0] = -Fe[..., 0, 1]
    cof[..., 1, 1] = Fe[..., 0, 0]
    with np.errstate(over="ignore", invalid="ignore"):
        coef_p = params.C * params.p * frob2 ** (params.p / 2.0 - 1.0)
        coef_det = 2.0 * params.D * (det - 1.0) - 2.0 * params.C / det_safe
        S = (coef_p[..., None, None] * Fe
             + coef_det[..., None, None] * cof
             + 2.0 * params.aniso * fem[..., :, None] * m)
    S *= ok[..., None, None]

    # Chain rule to grad_y: dW/d(grad_y) = S P^T = S - gam * outer(S m, s).
    Sm = S @ m                                      # (nt, nq, 2)
    T = S - gam[..., None, None] * (Sm[..., :, None] * s)
    Tbar = np.einsum("q,eqij->eij", _QW, T)         # (nt, 2, 2)
    loc_a1 = area[:, None] * np.einsum("ej,eij->ei", Tbar[:, 0, :], bg)
    loc_a2 = area[:, None] * np.einsum("ej,eij->ei", Tbar[:, 1, :], bg)

    # Slip derivative: dW/dgamma = -u . (S m), plus hardening and dissipation.
    dW_dg = -np.einsum("ei,eqi->eq", u, Sm)
    dW_dg += params.beta * params.r * (2.0 + gam * gam) ** (params.r / 2.0 - 1.0) * gam
    if diff is not None:
        dW_dg += params.sigma * diff / root
    loc_b = area[:, None] * ((dW_dg * _QW) @ _QP)
    loc_b += area[:, None] * (2.0 * params.eps_grad
                              * np.einsum("ej,eij->ei", grad_gam, bg))

    n = mesh.n_nodes
    flat = tri.ravel()
    ga1 = np.bincount(flat, weights=loc_a1.ravel(), minlength=n)
    ga2 = np.bincount(flat, weights=loc_a2.ravel(), minlength=n)
    gb = np.bincount(flat, weights=loc_b.ravel(), minlength=n)
    return breakdown, diss, (ga1, ga2, gb)


def total_energy(state, mesh: Mesh2D, params: MaterialParams,
                 slip: SlipSystem) -> EnergyBreakdown:
    """Quadrature-assembled stored energy of a state (dissipation excluded)."""
    _check_lengths(mesh, state.a1, state.a2, state.b)
    breakdown, _, _ = _assemble(mesh, state.a1, state.a2, state.b, params, slip)
    return breakdown


def dissipation_increment(gamma_prev, gamma, mesh: Mesh2D,
                          params: MaterialParams) -> float:
    """Smoothed dissipation sigma * int sqrt(delta^2 + (g1-g2)^2) dx  [N mm].

    Always at least sigma * delta * |Omega| and symmetric in its arguments.
    """
    gamma_prev = np.asarray(gamma_prev, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_lengths(mesh, gamma_prev, gamma)
    diff = (gamma - gamma_prev)[mesh.triangles] @ _QP.T
    root = np.sqrt(params.delta ** 2 + diff * diff)
    return params.sigma * float(mesh.element_area @ (root @ _QW))


def energy_nodal_gradient(state, mesh: Mesh2D, params: MaterialParams,
                          slip: SlipSystem, gamma_prev=None):
    """Gradient of I (+ D^delta if gamma_prev given) w.r.t. all nodal values.

    Returns full arrays (ga1, ga2, gb); entries at constrained nodes are the
    constraint reactions.
    """
    _check_lengths(mesh, state.a1, state.a2, state.b)
    _, _, grads = _assemble(mesh, state.a1, state.a2, state.b, params, slip,
                            b_prev=gamma_prev, need_grad=True)
    return grads


def energy_gradient_analytic(state, mesh: Mesh2D, dofmap, params: MaterialParams,
                             slip: SlipSystem, gamma_prev=None) -> np.ndarray:
    """Exact smooth-branch gradient of I + D^delta over the free DOF vector."""
    ga1, ga2, gb = energy_nodal_gradient(state, mesh, params, slip,
                                         gamma_prev=gamma_prev)
    return dofmap.pack(ga1, ga2, gb)


def energy_gradient_fd(objective, x: np.ndarray, h: float) -> np.ndarray:
    """Forward-difference gradient, one objective call per coordinate."""
    if not h > 0:
        raise ValueError(f"perturbation must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    f0 = objective(x)
    g = np.empty_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xp[i] += h
        g[i] = (objective(xp) - f0) / h
    return g
