"""Dense oracles for the test suite.

Everything here deliberately re-derives results by brute force: operator
matrices are built column-by-column from unit vectors, inner products by
explicit Python loops, and the coupled one-step systems are assembled as one
dense matrix over every unknown and solved by LU.  The production code never
sees these paths.
"""

import numpy as np

from chns.grid import (
    CellField,
    MacVector,
    advect_scalar,
    advect_velocity,
    chemical_force,
    div_face_to_cell,
    grad_cell_to_face,
    lap_cell,
    lap_velocity,
)
from chns.model import potential_f_prime, sqrt_aux_energy


def cell_count(grid):
    return grid.nx * grid.ny


def face_count(grid):
    return (grid.nx + 1) * grid.ny + grid.nx * (grid.ny + 1)


def pack_face(w):
    return np.concatenate([w.u.ravel(), w.v.ravel()])


def unpack_face(grid, vec):
    nu = (grid.nx + 1) * grid.ny
    u = vec[:nu].reshape(grid.nx + 1, grid.ny)
    v = vec[nu:].reshape(grid.nx, grid.ny + 1)
    return MacVector(grid, u.copy(), v.copy())


def mat_from_cell_op(grid, op):
    """Dense matrix of a CellField -> CellField linear operator."""
    n = cell_count(grid)
    mat = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        mat[:, k] = op(CellField(grid, e.reshape(grid.nx, grid.ny))).data.ravel()
    return mat


def mat_cell_to_face(grid, op):
    n = cell_count(grid)
    mat = np.zeros((face_count(grid), n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        mat[:, k] = pack_face(op(CellField(grid, e.reshape(grid.nx, grid.ny))))
    return mat


def mat_face_to_cell(grid, op):
    m = face_count(grid)
    mat = np.zeros((cell_count(grid), m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        mat[:, k] = op(unpack_face(grid, e)).data.ravel()
    return mat


def mat_face_to_face(grid, op):
    m = face_count(grid)
    mat = np.zeros((m, m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        mat[:, k] = pack_face(op(unpack_face(grid, e)))
    return mat


def dense_neumann_solve(grid, rhs):
    """Zero-mean solution of lap(psi) = rhs via a dense saddle system with a
    Lagrange multiplier for the mean."""
    n = cell_count(grid)
    lap_mat = mat_from_cell_op(grid, lap_cell)
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = lap_mat
    aug[:n, n] = 1.0
    aug[n, :n] = 1.0
    b = np.zeros(n + 1)
    b[:n] = rhs.data.ravel()
    sol = np.linalg.solve(aug, b)
    return CellField(grid, sol[:n].reshape(grid.nx, grid.ny))


# ---------------------------------------------------------------------------
# explicit-loop inner products (independent of the production quadratures)
# ---------------------------------------------------------------------------


def loop_dot_cell(a, b):
    total = 0.0
    for i in range(a.grid.nx):
        for j in range(a.grid.ny):
            total += a.data[i, j] * b.data[i, j]
    return a.grid.hx * a.grid.hy * total


def loop_dot_face(a, b):
    total = 0.0
    for i in range(a.grid.nx + 1):
        for j in range(a.grid.ny):
            total += a.u[i, j] * b.u[i, j]
    for i in range(a.grid.nx):
        for j in range(a.grid.ny + 1):
            total += a.v[i, j] * b.v[i, j]
    return a.grid.hx * a.grid.hy * total


# ---------------------------------------------------------------------------
# monolithic one-step solves
# ---------------------------------------------------------------------------


def _blocks(grid):
    nc, nf = cell_count(grid), face_count(grid)
    lap_c = mat_from_cell_op(grid, lap_cell)
    grad = mat_cell_to_face(grid, grad_cell_to_face)
    div = mat_face_to_cell(grid, div_face_to_cell)
    lap_v = mat_face_to_face(grid, lap_velocity)
    return nc, nf, lap_c, grad, div, lap_v


def _solve_monolithic(grid, mat, rhs, sq, t_new, horizon):
    nc, nf = cell_count(grid), face_count(grid)
    sol = np.linalg.solve(mat, rhs)
    ofs_mu, ofs_ut, ofs_un, ofs_p = nc, 2 * nc, 2 * nc + nf, 2 * nc + 2 * nf
    phi = CellField(grid, sol[:nc].reshape(grid.nx, grid.ny))
    mu = CellField(grid, sol[ofs_mu:ofs_ut].reshape(grid.nx, grid.ny))
    ut = unpack_face(grid, sol[ofs_ut:ofs_un])
    un = unpack_face(grid, sol[ofs_un:ofs_p])
    p = CellField(grid, sol[ofs_p:ofs_p + nc].reshape(grid.nx, grid.ny))
    r = float(sol[-2])
    q = float(sol[-1])
    return {
        "phi": phi, "mu": mu, "u_tilde": ut, "u": un, "p": p, "r": r, "q": q,
        "xi1": r / sq, "xi2": float(np.exp(t_new / horizon)) * q,
    }


def monolithic_first_order(state, params, dt):
    """One backward-Euler step with every unknown (including r, q) assembled
    into a single dense linear system."""
    grid = state.grid
    nc, nf, lap_c, grad, div, lap_v = _blocks(grid)
    n = 3 * nc + 2 * nf + 2
    area = grid.cell_area
    sq = sqrt_aux_energy(state.phi, params)
    ge = params.gamma_eff
    t_new = state.t + dt
    e_pos = np.exp(t_new / params.horizon)

    fp = potential_f_prime(state.phi, params).data.ravel()
    adv = advect_scalar(state.u, state.phi).data.ravel()
    chem = pack_face(chemical_force(state.mu, state.phi))
    conv = pack_face(advect_velocity(state.u))

    ofs_mu, ofs_ut, ofs_un, ofs_p = nc, 2 * nc, 2 * nc + nf, 2 * nc + 2 * nf
    ix_r, ix_q = n - 2, n - 1
    mat = np.zeros((n, n))
    rhs = np.zeros(n)

    # phase update rows
    mat[:nc, :nc] = np.eye(nc) / dt
    mat[:nc, ofs_mu:ofs_ut] = -params.mobility * lap_c
    mat[:nc, ix_r] = adv / sq
    rhs[:nc] = state.phi.data.ravel() / dt

    # chemical-potential definition rows
    rows = slice(ofs_mu, ofs_ut)
    mat[rows, ofs_mu:ofs_ut] = np.eye(nc)
    mat[rows, :nc] = lap_c - ge * np.eye(nc)
    mat[rows, ix_r] = -fp / sq

    # auxiliary r row
    mat[ix_r, ix_r] = 1.0 / dt
    mat[ix_r, :nc] = -(0.5 / sq) * area * fp / dt
    mat[ix_r, ofs_mu:ofs_ut] = -(0.5 / sq) * area * adv
    mat[ix_r, ofs_ut:ofs_un] = (0.5 / sq) * area * chem
    rhs[ix_r] = state.r / dt - (0.5 / sq) * area * float(fp @ state.phi.data.ravel()) / dt

    # momentum rows (boundary faces collapse to ut/dt = 0 automatically)
    rows = slice(ofs_ut, ofs_un)
    mat[rows, ofs_ut:ofs_un] = np.eye(nf) / dt - params.viscosity * lap_v
    mat[rows, ix_q] = e_pos * conv
    mat[rows, ix_r] = -chem / sq
    rhs[ofs_ut:ofs_un] = pack_face(state.u) / dt - grad @ state.p.data.ravel()

    # projection rows
    rows = slice(ofs_un, ofs_p)
    mat[rows, ofs_un:ofs_p] = np.eye(nf)
    mat[rows, ofs_ut:ofs_un] = -np.eye(nf)
    mat[rows, ofs_p:ofs_p + nc] = dt * grad
    rhs[ofs_un:ofs_p] = dt * (grad @ state.p.data.ravel())

    # divergence rows, with one row traded for the zero-mean pressure pin
    rows = slice(ofs_p, ofs_p + nc)
    mat[rows, ofs_un:ofs_p] = div
    mat[ofs_p, :] = 0.0
    mat[ofs_p, ofs_p:ofs_p + nc] = area
    rhs[ofs_p] = 0.0

    # auxiliary q row
    mat[ix_q, ix_q] = 1.0 / dt + 1.0 / params.horizon
    mat[ix_q, ofs_ut:ofs_un] = -e_pos * area * conv
    rhs[ix_q] = state.q / dt

    return _solve_monolithic(grid, mat, rhs, sq, t_new, params.horizon)


def monolithic_second_order(state2, params, dt):
    """One BDF2 / rotational step assembled as a single dense system."""
    grid = state2.grid
    nc, nf, lap_c, grad, div, lap_v = _blocks(grid)
    n = 3 * nc + 2 * nf + 2
    area = grid.cell_area
    ge = params.gamma_eff
    nu = params.viscosity
    t_new = state2.t + dt
    e_pos = np.exp(t_new / params.horizon)
    two_dt = 2.0 * dt

    bar_phi = 2.0 * state2.phi - state2.phi_prev
    bar_mu = 2.0 * state2.mu - state2.mu_prev
    bar_u = 2.0 * state2.u - state2.u_prev
    sq = sqrt_aux_energy(bar_phi, params)

    fp = potential_f_prime(bar_phi, params).data.ravel()
    adv = advect_scalar(bar_u, bar_phi).data.ravel()
    chem = pack_face(chemical_force(bar_mu, bar_phi))
    conv = pack_face(advect_velocity(bar_u))

    phi_hist = (4.0 * state2.phi.data - state2.phi_prev.data).ravel() / two_dt
    u_hist = (4.0 * pack_face(state2.u) - pack_face(state2.u_prev)) / two_dt

    ofs_mu, ofs_ut, ofs_un, ofs_p = nc, 2 * nc, 2 * nc + nf, 2 * nc + 2 * nf
    ix_r, ix_q = n - 2, n - 1
    mat = np.zeros((n, n))
    rhs = np.zeros(n)

    mat[:nc, :nc] = 3.0 / two_dt * np.eye(nc)
    mat[:nc, ofs_mu:ofs_ut] = -params.mobility * lap_c
    mat[:nc, ix_r] = adv / sq
    rhs[:nc] = phi_hist

    rows = slice(ofs_mu, ofs_ut)
    mat[rows, ofs_mu:ofs_ut] = np.eye(nc)
    mat[rows, :nc] = lap_c - ge * np.eye(nc)
    mat[rows, ix_r] = -fp / sq

    mat[ix_r, ix_r] = 3.0 / two_dt
    mat[ix_r, :nc] = -(0.5 / sq) * area * fp * 3.0 / two_dt
    mat[ix_r, ofs_mu:ofs_ut] = -(0.5 / sq) * area * adv
    mat[ix_r, ofs_ut:ofs_un] = (0.5 / sq) * area * chem
    hist = (4.0 * state2.sav.r - state2.sav_prev.r) / two_dt
    hist += (0.5 / sq) * area * float(
        fp @ (-4.0 * state2.phi.data + state2.phi_prev.data).ravel()
    ) / two_dt
    rhs[ix_r] = hist

    rows = slice(ofs_ut, ofs_un)
    mat[rows, ofs_ut:ofs_un] = 3.0 / two_dt * np.eye(nf) - nu * lap_v
    mat[rows, ix_q] = e_pos * conv
    mat[rows, ix_r] = -chem / sq
    rhs[ofs_ut:ofs_un] = u_hist - grad @ state2.p.data.ravel()

    rows = slice(ofs_un, ofs_p)
    mat[rows, ofs_un:ofs_p] = np.eye(nf)
    mat[rows, ofs_ut:ofs_un] = -np.eye(nf) + (two_dt / 3.0) * nu * (grad @ div)
    mat[rows, ofs_p:ofs_p + nc] = (two_dt / 3.0) * grad
    rhs[ofs_un:ofs_p] = (two_dt / 3.0) * (grad @ state2.p.data.ravel())

    rows = slice(ofs_p, ofs_p + nc)
    mat[rows, ofs_un:ofs_p] = div
    mat[ofs_p, :] = 0.0
    mat[ofs_p, ofs_p:ofs_p + nc] = area
    rhs[ofs_p] = 0.0

    mat[ix_q, ix_q] = 3.0 / two_dt + 1.0 / params.horizon
    mat[ix_q, ofs_ut:ofs_un] = -e_pos * area * conv
    rhs[ix_q] = (4.0 * state2.sav.q - state2.sav_prev.q) / two_dt

    return _solve_monolithic(grid, mat, rhs, sq, t_new, params.horizon)
