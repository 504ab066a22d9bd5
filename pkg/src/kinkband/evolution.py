"""Rate-independent evolution by time-incremental energy minimization.

Each step minimizes H(q) = D_delta(gamma_prev, gamma) + I(t_next, y, gamma)
over the free coefficients, with the moving Dirichlet data imposed at
t_next before minimization.  Runtime diagnostics implement the stability
inequality probe and the two-sided discrete energy estimate against an
affinely lifted copy of the previous state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .energy import (EnergyBreakdown, MaterialParams, _assemble,
                     dissipation_increment, energy_nodal_gradient)
from .kinematics import SlipSystem
from .mesh import (BOTTOM, LEFT, RIGHT, TOP, DofMap, Mesh2D, build_dofmap,
                   build_structured_mesh)
from .optimizer import (InvalidStartError, MinimizeOptions, MinimizeResult,
                        gradient_check, minimize)

log = logging.getLogger("kinkband")

_ALTERNATING_MAX_SWEEPS = 100


class StepFailureError(RuntimeError):
    """A time step could not be solved; partial results are attached."""

    def __init__(self, message, records=None, states=None):
        super().__init__(message)
        self.records = records or []
        self.states = states or []


@dataclass
class State:
    """Packed nodal coefficients: deformation (a1, a2) and slip b, at a time."""

    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    time: float = 0.0

    def copy(self) -> "State":
        return State(a1=self.a1.copy(), a2=self.a2.copy(), b=self.b.copy(),
                     time=self.time)


@dataclass
class LoadProgram:
    """Constant-speed platen descent: prescribed top height Ly - speed * t."""

    speed: float       # mm/s
    T: float           # s
    Ly: float          # mm

    def top_displacement(self, t: float) -> float:
        return self.Ly - self.speed * t


@dataclass
class TimeGrid:
    K: int
    tau: float
    times: np.ndarray

    @classmethod
    def uniform(cls, T: float, K: int) -> "TimeGrid":
        if K < 1:
            raise ValueError(f"K must be at least 1, got {K}")
        return cls(K=K, tau=T / K, times=np.linspace(0.0, T, K + 1))


@dataclass
class StepRecord:
    k: int
    time: float
    energy: EnergyBreakdown
    dissipation_increment: float
    cumulative_dissipation: float
    reaction_force: float
    top_displacement: float
    max_abs_gamma: float
    min_det_Fe: float
    optimizer_iterations: int


def initial_state(mesh: Mesh2D) -> State:
    """Undeformed configuration: nodes at reference coordinates, zero slip."""
    return State(a1=mesh.nodes[:, 0].copy(), a2=mesh.nodes[:, 1].copy(),
                 b=np.zeros(mesh.n_nodes), time=0.0)


def apply_boundary_conditions(state: State, mesh: Mesh2D, program: LoadProgram,
                              t: float) -> State:
    """Impose the Dirichlet program at time t; free entries are untouched."""
    out = state.copy()
    x_ref = mesh.nodes[:, 0]
    y_ref = mesh.nodes[:, 1]
    tags = mesh.boundary_tags
    bottom = tags == BOTTOM
    top = tags == TOP
    lateral = (tags == LEFT) | (tags == RIGHT)
    out.a1[bottom] = x_ref[bottom]
    out.a2[bottom] = y_ref[bottom]
    out.a1[top] = x_ref[top]
    out.a2[top] = program.top_displacement(t)
    out.a1[lateral] = x_ref[lateral]
    out.time = t
    return out


def lift_state(state: State, mesh: Mesh2D, program: LoadProgram,
               t_from: float, t_to: float) -> State:
    """Affine vertical lift making a state at t_from admissible at t_to.

    Adds the incremental field (0, delta * x2 / Ly) evaluated at reference
    heights, which moves the top nodes exactly onto the new platen position
    and keeps the bottom fixed.
    """
    delta = program.top_displacement(t_to) - program.top_displacement(t_from)
    out = state.copy()
    out.a2 = out.a2 + delta * mesh.nodes[:, 1] / program.Ly
    out.time = t_to
    return out


def _make_objective(mesh, dofmap, params, slip, template: State, b_prev):
    """Objective and analytic gradient of I + D^delta over the packed free DOFs."""
    a1_t, a2_t, b_t = template.a1, template.a2, template.b

    def fun(x):
        a1, a2, b = dofmap.unpack(x, a1_t, a2_t, b_t)
        breakdown, diss, _ = _assemble(mesh, a1, a2, b, params, slip,
                                       b_prev=b_prev)
        return breakdown.total + diss

    def grad(x):
        a1, a2, b = dofmap.unpack(x, a1_t, a2_t, b_t)
        _, _, grads = _assemble(mesh, a1, a2, b, params, slip,
                                b_prev=b_prev, need_grad=True)
        return dofmap.pack(*grads)

    return fun, grad


def _minimize_subset(fun, grad, x_full, idx, options):
    """Minimize over a subset of coordinates, complement held fixed."""
    base = x_full.copy()

    def fs(xs):
        base[idx] = xs
        return fun(base)

    gs = None
    if grad is not None:
        def gs(xs):
            base[idx] = xs
            return grad(base)[idx]

    res = minimize(fs, gs, x_full[idx], options)
    out = x_full.copy()
    out[idx] = res.x_min
    return out, res


def _smooth_bumps(mesh, dofmap, rng):
    """One random smooth admissible perturbation of the free DOFs (packed)."""
    x = mesh.nodes[:, 0] / mesh.Lx
    y = mesh.nodes[:, 1] / mesh.Ly
    i1, j1 = rng.integers(1, 5, size=2)
    amp = 10.0 ** rng.uniform(-3.5, -0.4)
    sgn = rng.choice([-1.0, 1.0], size=3)
    active = rng.random(3) < 2.0 / 3.0
    if not active.any():
        active[rng.integers(0, 3)] = True
    da1 = sgn[0] * amp * np.sin(np.pi * i1 * x) * np.sin(np.pi * j1 * y)
    da2 = sgn[1] * amp * np.cos(np.pi * i1 * x) * np.sin(np.pi * j1 * y)
    db = sgn[2] * amp * np.cos(np.pi * i1 * x) * np.cos(np.pi * j1 * y)
    dx = np.zeros(dofmap.n_free)
    if active[0]:
        dx[dofmap.sl_a1] = da1[dofmap.free_a1]
    if active[1]:
        dx[dofmap.sl_a2] = da2[dofmap.free_a2]
    if active[2]:
        dx[dofmap.sl_b] = db[dofmap.free_b]
    return dx


def incremental_step(prev: State, t_next: float, mesh: Mesh2D, dofmap: DofMap,
                     params: MaterialParams, slip: SlipSystem,
                     program: LoadProgram, options: MinimizeOptions,
                     mode: str = "joint", warm_start_plastic: bool = False,
                     perturb_init: float = 0.0, perturb_seed: int = 0,
                     prev_cumulative: float = 0.0, k: int = 0):
    """Advance one step: minimize H over free DOFs with boundary data at t_next.

    The initial guess keeps the elastic coefficients from the previous
    solution (top row re-imposed) and restarts the slip block at zero unless
    warm_start_plastic.  The result is also checked against the affinely
    lifted previous state; if that admissible competitor is lower, the
    minimization restarts from it and the better local minimizer wins.
    """
    if mode not in ("joint", "alternating"):
        raise ValueError(f"unknown mode {mode!r}")
    template = apply_boundary_conditions(prev, mesh, program, t_next)
    if not warm_start_plastic:
        template.b = np.zeros_like(template.b)
    b_prev = prev.b
    fun, grad_fn = _make_objective(mesh, dofmap, params, slip, template, b_prev)
    grad = grad_fn if options.gradient_mode == "analytic" else None
    x0 = dofmap.pack(template.a1, template.a2, template.b)
    if perturb_init > 0.0:
        rng = np.random.default_rng(perturb_seed)
        x0 = x0 + perturb_init * _smooth_bumps(mesh, dofmap, rng)

    try:
        if mode == "joint":
            res = minimize(fun, grad, x0, options)
            iterations = res.iterations
        else:
            res, iterations = _alternating_minimize(fun, grad, x0, dofmap, options)
    except InvalidStartError as exc:
        raise StepFailureError(
            f"step to t={t_next:g} failed to start: {exc}") from exc

    # Compare with the lifted previous state (admissible, keeps gamma): if it
    # beats the found minimizer, descend from it instead.
    lifted = lift_state(prev, mesh, program, prev.time, t_next)
    x_lift = dofmap.pack(lifted.a1, lifted.a2, prev.b)
    f_lift = fun(x_lift)
    if np.isfinite(f_lift) and f_lift < res.f_min:
        res_lift = minimize(fun, grad, x_lift, options)
        iterations += res_lift.iterations
        if res_lift.f_min < res.f_min:
            res = res_lift

    a1, a2, b = dofmap.unpack(res.x_min, template.a1, template.a2, template.b)
    new_state = State(a1=a1, a2=a2, b=b, time=t_next)
    breakdown, diss, _ = _assemble(mesh, a1, a2, b, params, slip, b_prev=b_prev)
    # the smoothed increment is what the step minimized; the cumulative
    # variation uses the raw dissipation distance sigma * int |dgamma|
    var_inc = dissipation_increment(b_prev, b, mesh, replace(params, delta=0.0))
    record = StepRecord(
        k=k,
        time=t_next,
        energy=breakdown,
        dissipation_increment=diss,
        cumulative_dissipation=prev_cumulative + var_inc,
        reaction_force=reaction_force(new_state, mesh, params, slip),
        top_displacement=program.top_displacement(t_next),
        max_abs_gamma=float(np.max(np.abs(b))),
        min_det_Fe=_min_det(mesh, a1, a2, b, slip),
        optimizer_iterations=iterations,
    )
    return new_state, record


def _alternating_minimize(fun, grad, x0, dofmap, options):
    """Sweep elastic block (slip fixed) then slip block until joint decrease
    drops below tol_fun."""
    idx_a = np.arange(dofmap.sl_a2.stop)
    idx_b = np.arange(dofmap.sl_b.start, dofmap.sl_b.stop)
    x = x0.copy()
    f = fun(x)
    if not np.isfinite(f):
        raise InvalidStartError(f"objective is {f} at the starting point")
    iterations = 0
    res = None
    for _ in range(_ALTERNATING_MAX_SWEEPS):
        x, res_a = _minimize_subset(fun, grad, x, idx_a, options)
        x, res = _minimize_subset(fun, grad, x, idx_b, options)
        iterations += res_a.iterations + res.iterations
        decrease = f - res.f_min
        f = res.f_min
        if decrease < options.tol_fun:
            break
    final = MinimizeResult(x_min=x, f_min=f, iterations=iterations,
                           converged_by=res.converged_by,
                           gradient_norm=res.gradient_norm)
    return final, iterations


def _min_det(mesh, a1, a2, b, slip):
    bg = mesh.basis_gradients
    tri = mesh.triangles
    g1 = np.einsum("ei,eij->ej", a1[tri], bg)
    g2 = np.einsum("ei,eij->ej", a2[tri], bg)
    # det Fe = det grad_y exactly (det P = 1)
    return float(np.min(g1[:, 0] * g2[:, 1] - g1[:, 1] * g2[:, 0]))


def reaction_force(state: State, mesh: Mesh2D, params: MaterialParams,
                   slip: SlipSystem) -> float:
    """Vertical constraint reaction on the platen, compression positive [N/mm].

    Sum of the stored-energy gradient over the prescribed vertical DOFs of
    the top edge, negated so that pushing the platen down against resistance
    reads positive.
    """
    _, ga2, _ = energy_nodal_gradient(state, mesh, params, slip)
    top = mesh.boundary_tags == TOP
    return -float(ga2[top].sum())


def stability_check(state: State, t: float, mesh: Mesh2D, dofmap: DofMap,
                    params: MaterialParams, slip: SlipSystem,
                    program: LoadProgram, n_competitors: int = 100,
                    prev_state: State | None = None,
                    rng=None) -> float:
    """Worst stability violation max over competitors of
    I(t,q) - I(t,q~) - D_delta(gamma, gamma~)   [N mm].

    Competitors are random smooth admissible bumps of the free blocks plus
    the lifted previous state (when given) and the state itself.  A
    converged step should report at most roughly the optimizer's function
    tolerance; negative means strictly stable against the sample.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    bc = apply_boundary_conditions(state, mesh, program, t)
    breakdown, _, _ = _assemble(mesh, bc.a1, bc.a2, state.b, params, slip)
    f_state = breakdown.total
    x = dofmap.pack(bc.a1, bc.a2, state.b)

    def competitor_value(xc):
        a1, a2, b = dofmap.unpack(xc, bc.a1, bc.a2, state.b)
        bd, diss, _ = _assemble(mesh, a1, a2, b, params, slip, b_prev=state.b)
        return bd.total + diss

    worst = f_state - competitor_value(x)          # the state itself
    if prev_state is not None:
        lifted = lift_state(prev_state, mesh, program, prev_state.time, t)
        xc = dofmap.pack(lifted.a1, lifted.a2, prev_state.b)
        worst = max(worst, f_state - competitor_value(xc))
    for _ in range(n_competitors):
        xc = x + _smooth_bumps(mesh, dofmap, rng)
        worst = max(worst, f_state - competitor_value(xc))
    return float(worst)


def energy_inequality_check(record_k: StepRecord, record_km1: StepRecord | None,
                            lifted_prev_energy: float, params: MaterialParams,
                            domain_area: float, tol: float = 1e-4):
    """Two-sided discrete energy estimate for one accepted step.

    upper: I(t_k, q_k) + D(g_{k-1}, g_k) <= I(t_k, lift(q_{k-1})) +
    sigma*delta*|Omega| + tol.  lower: the dissipation chain is consistent,
    i.e. the increment is at least its smoothing floor and the cumulative
    sum does not decrease.
    """
    floor = params.sigma * params.delta * domain_area
    upper_ok = (record_k.energy.total + record_k.dissipation_increment
                <= lifted_prev_energy + floor + tol)
    lower_ok = record_k.dissipation_increment >= floor - tol
    if record_km1 is not None:
        lower_ok = lower_ok and (record_k.cumulative_dissipation
                                 >= record_km1.cumulative_dissipation - tol)
    return lower_ok, upper_ok


def _startup_gradient_check(mesh, dofmap, params, slip, program, h=1e-6):
    """Verify the analytic gradient against central differences once per run.

    Uses a perturbed admissible state.  The check perturbation defaults to
    1e-6: central differences at the runtime forward-difference step 1e-8
    are dominated by summation roundoff on energies of this magnitude.
    """
    probe = apply_boundary_conditions(initial_state(mesh), mesh, program, 0.0)
    rng = np.random.default_rng(12345)
    fun, grad = _make_objective(mesh, dofmap, params, slip, probe,
                                np.zeros(mesh.n_nodes))
    x = dofmap.pack(probe.a1, probe.a2, probe.b)
    # a visibly strained, slipped probe keeps all gradient blocks well scaled
    x = x + 0.6 * _smooth_bumps(mesh, dofmap, rng) \
        + 0.6 * _smooth_bumps(mesh, dofmap, rng)
    x[dofmap.sl_b] += 0.2
    return gradient_check(fun, grad, x, h)


def run_simulation(config):
    """Run the full load program described by a SimulationConfig.

    Returns (records, states): one StepRecord per step and the state list
    including the initial state.  On an unrecoverable step failure raises
    StepFailureError carrying the partial records and states.
    """
    mesh = build_structured_mesh(config.Lx, config.Ly, config.nx, config.ny)
    dofmap = build_dofmap(mesh)
    params = MaterialParams(
        C=config.C, D=config.D, aniso=config.aniso, beta=config.beta,
        eps_grad=config.eps_grad, sigma=config.sigma, p=config.p, r=config.r,
        grad_exponent=config.grad_exponent, delta=config.delta,
        det_penalty=config.det_penalty, det_floor=config.det_floor)
    params.validate()
    slip = SlipSystem(s=np.array([config.s1, config.s2]),
                      m=np.array([config.m1, config.m2]))
    program = LoadProgram(speed=config.speed, T=config.T, Ly=config.Ly)
    grid = TimeGrid.uniform(config.T, config.K)
    options = MinimizeOptions(
        tol_step=config.tol_step, tol_fun=config.tol_fun,
        max_iters=config.max_iters, fd_perturbation=config.fd_perturbation,
        gradient_mode=config.gradient_mode)
    options.validate()

    if options.gradient_mode == "analytic":
        # the check exercises the same assembly path, so a capped probe mesh
        # keeps the startup cost negligible on production meshes
        probe_mesh = build_structured_mesh(config.Lx, config.Ly,
                                           min(config.nx, 6), min(config.ny, 8))
        err = _startup_gradient_check(probe_mesh, build_dofmap(probe_mesh),
                                      params, slip, program)
        if not err < 1e-3:
            log.warning("analytic gradient check failed (%.3e); "
                        "falling back to finite differences", err)
            options = replace(options, gradient_mode="finite-difference")

    state = initial_state(mesh)
    records: list[StepRecord] = []
    states: list[State] = [state]
    cumulative = 0.0

    for k in range(1, grid.K + 1):
        t_next = float(grid.times[k])
        step_kwargs = dict(mesh=mesh, dofmap=dofmap, params=params, slip=slip,
                           program=program, options=options, mode=config.mode,
                           warm_start_plastic=config.warm_start_plastic,
                           perturb_init=config.perturb_init)
        try:
            state_new, rec = incremental_step(
                state, t_next, perturb_seed=k, prev_cumulative=cumulative,
                k=k, **step_kwargs)
        except StepFailureError as exc:
            # Retry once through the interval midpoint, then give up.
            t_mid = 0.5 * (state.time + t_next)
            log.warning("step %d failed (%s); retrying via t=%g", k, exc, t_mid)
            try:
                state_mid, rec_mid = incremental_step(
                    state, t_mid, perturb_seed=10 * k + 1,
                    prev_cumulative=cumulative, k=k, **step_kwargs)
                state_new, rec = incremental_step(
                    state_mid, t_next, perturb_seed=10 * k + 2,
                    prev_cumulative=rec_mid.cumulative_dissipation, k=k,
                    **step_kwargs)
                rec.dissipation_increment += rec_mid.dissipation_increment
                rec.optimizer_iterations += rec_mid.optimizer_iterations
            except StepFailureError as exc2:
                raise StepFailureError(
                    f"step {k} to t={t_next:g} failed after halving: {exc2}",
                    records=records, states=states) from exc2
        cumulative = rec.cumulative_dissipation
        records.append(rec)
        states.append(state_new)
        state = state_new
        log.info("step %2d  t=%7.3f  E=%12.4f  diss+=%.4e  F=%10.3f  "
                 "max|g|=%.4f  iters=%d", k, t_next, rec.energy.total,
                 rec.dissipation_increment, rec.reaction_force,
                 rec.max_abs_gamma, rec.optimizer_iterations)
    return records, states
