"""Physical parameters, the stabilized double-well potential, and scheme states.

The free energy used throughout drops an additive constant and reads

    E1(phi) = 1/(4 eps^2) * integral (phi^2 - 1 - beta)^2,
    F'(phi) = 1/eps^2 * phi * (phi^2 - 1 - beta),

with the shifted quadratic part absorbed into the linear coefficient
gamma_eff = gamma + beta/eps^2 of the chemical potential.  beta = 0 recovers
the plain double well.

Two scalar auxiliary variables accompany the fields: r tracks
sqrt(E1(phi) + delta) and q tracks exp(-t/T); both are carried in SavState.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import StateError
from .grid import CellField, GridSpec, MacVector, lap_cell

__all__ = [
    "PhysParams",
    "SavState",
    "SchemeState",
    "SchemeState2",
    "potential_f_prime",
    "energy_e1",
    "chemical_potential",
    "initial_state",
    "state_from_fields",
    "E1_FLOOR",
]

E1_FLOOR = 1e-14  # below this, r/sqrt(E1+delta) is numerically meaningless


@dataclass(frozen=True)
class PhysParams:
    """Model constants; defaults are the reference benchmark values."""

    epsilon: float = 0.3  # interface width
    mobility: float = 1e-3
    viscosity: float = 1e-3
    gamma: float = 1.0  # quadratic stabilization split out of the potential
    beta: float = 5.0  # potential shift
    delta: float = 0.0  # shift under the square root of the auxiliary energy
    horizon: float = 0.1  # relaxation time T of the exponential auxiliary variable

    def __post_init__(self):
        if min(self.epsilon, self.mobility, self.viscosity, self.horizon) <= 0:
            raise ValueError("epsilon, mobility, viscosity and horizon must be positive")
        if min(self.gamma, self.beta, self.delta) < 0:
            raise ValueError("gamma, beta and delta must be nonnegative")

    @property
    def gamma_eff(self) -> float:
        return self.gamma + self.beta / self.epsilon**2


def potential_f_prime(phi: CellField, params: PhysParams) -> CellField:
    """Pointwise F'(phi) = phi (phi^2 - 1 - beta) / eps^2."""
    c = 1.0 + params.beta
    return CellField(phi.grid, phi.data * (phi.data**2 - c) / params.epsilon**2)


def energy_e1(phi: CellField, params: PhysParams) -> float:
    """Midpoint quadrature of (phi^2 - 1 - beta)^2 / (4 eps^2)."""
    c = 1.0 + params.beta
    integrand = (phi.data**2 - c) ** 2 / (4.0 * params.epsilon**2)
    return phi.grid.cell_area * float(np.sum(integrand))


def sqrt_aux_energy(phi: CellField, params: PhysParams) -> float:
    """sqrt(E1(phi) + delta), guarding against the degenerate zero."""
    val = energy_e1(phi, params) + params.delta
    if val <= E1_FLOOR:
        raise StateError(
            f"E1(phi) + delta = {val:.3e} is too small; the auxiliary ratio r/sqrt(E1+delta) "
            "is undefined (choose delta > 0 for states near the potential minimum)"
        )
    return float(np.sqrt(val))


def chemical_potential(phi: CellField, params: PhysParams, sav_ratio: float = 1.0) -> CellField:
    """mu = -lap(phi) + gamma_eff*phi + sav_ratio*F'(phi)."""
    return -1.0 * lap_cell(phi) + params.gamma_eff * phi + sav_ratio * potential_f_prime(phi, params)


@dataclass
class SavState:
    r: float  # tracks sqrt(E1 + delta)
    q: float  # tracks exp(-t/T)


@dataclass
class SchemeState:
    """Full state at one time level."""

    t: float
    phi: CellField
    mu: CellField
    u: MacVector  # projected (divergence-free) velocity
    u_tilde: MacVector  # intermediate velocity of the level's momentum solve
    p: CellField  # zero-mean pressure
    sav: SavState

    @property
    def r(self) -> float:
        return self.sav.r

    @property
    def q(self) -> float:
        return self.sav.q

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid


@dataclass
class SchemeState2(SchemeState):
    """Two-level state for the BDF2 stepper, plus the rotational bookkeeping
    fields g (accumulated nu*div of the intermediate velocities) and H = p + g."""

    phi_prev: CellField = None
    mu_prev: CellField = None
    u_prev: MacVector = None
    sav_prev: SavState = None
    g: CellField = None
    H: CellField = None


def _preset_paper5(grid: GridSpec):
    """Reference benchmark initial data on the unit square: a pair of
    counter-rotating vortices and a single-period cosine phase layout."""
    phi = CellField.from_function(grid, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y))
    vel = MacVector.from_functions(
        grid,
        lambda x, y: np.sin(np.pi * x) ** 2 * np.sin(2.0 * np.pi * y),
        lambda x, y: -np.sin(np.pi * y) ** 2 * np.sin(2.0 * np.pi * x),
    )
    return phi, vel


def state_from_fields(params: PhysParams, phi: CellField, vel: MacVector, p: CellField = None, t: float = 0.0):
    """Assemble a consistent level-0 state from sampled fields.

    The chemical potential is evaluated from phi with the auxiliary ratio at
    its exact initial value r0/sqrt(E1+delta) = 1, which the first step's
    forcing terms require; r0 = sqrt(E1(phi)+delta) and q0 = 1.
    """
    grid = phi.grid
    if p is None:
        p = CellField.zeros(grid)
    mu = chemical_potential(phi, params, sav_ratio=1.0)
    r0 = sqrt_aux_energy(phi, params)
    return SchemeState(t=t, phi=phi, mu=mu, u=vel, u_tilde=vel.copy(), p=p, sav=SavState(r=r0, q=1.0))


def initial_state(grid: GridSpec, params: PhysParams, preset: str = "paper5") -> SchemeState:
    if preset != "paper5":
        raise ValueError(f"unknown preset {preset!r}")
    phi, vel = _preset_paper5(grid)
    return state_from_fields(params, phi, vel)


def clone_state(state: SchemeState) -> SchemeState:
    return replace(
        state,
        phi=state.phi.copy(),
        mu=state.mu.copy(),
        u=state.u.copy(),
        u_tilde=state.u_tilde.copy(),
        p=state.p.copy(),
        sav=SavState(state.sav.r, state.sav.q),
    )
