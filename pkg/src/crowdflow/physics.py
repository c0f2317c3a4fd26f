"""Closure laws and numerical flux kernels for the pedestrian-flow models.

Two models share the same speed-density closure: a first-order scalar model
(density only, directed by the potential field) and a second-order model
carrying density and momentum with an isentropic pressure and a relaxation
source toward the desired velocity.

All kernels are pure functions of their arguments; scalar entry points take
plain floats / length-2 vectors, and the ``*_batch`` variants operate on
aligned numpy arrays (one entry per mesh face or node).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MODEL_KINDS = ("hughes", "second_order")
COST_KINDS = ("simple", "density_driven")
HUGHES_OUTFLOW_MODES = ("capacity", "free")


@dataclass(frozen=True)
class ModelParams:
    """Physical and scheme parameters.

    Units: v_max [m/s], tau [s], rho_max [ped/m^2], p0 [ped^(1-gamma) m^(2+gamma)/s^2],
    gamma and alpha dimensionless, cfl dimensionless in (0, 1].
    """

    v_max: float = 2.0
    tau: float = 0.61
    rho_max: float = 7.0
    p0: float = 0.005
    gamma: float = 2.0
    alpha: float = 7.5
    cfl: float = 0.9
    model_kind: str = "second_order"
    cost_kind: str = "density_driven"
    hughes_outflow: str = "capacity"
    # numerical guards
    rho_eps: float = 1e-8      # vacuum threshold: below it velocity is 0
    eps_grad: float = 1e-12    # gradient norm below which mu = 0
    sigma_min: float = 1e-6    # wave-speed floor in the time-step bound

    def __post_init__(self):
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.rho_max > 0:
            raise ValueError(f"rho_max must be positive, got {self.rho_max}")
        if self.p0 < 0:
            raise ValueError(f"p0 must be nonnegative, got {self.p0}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.cost_kind not in COST_KINDS:
            raise ValueError(f"cost_kind must be one of {COST_KINDS}, got {self.cost_kind!r}")
        if self.hughes_outflow not in HUGHES_OUTFLOW_MODES:
            raise ValueError(
                f"hughes_outflow must be one of {HUGHES_OUTFLOW_MODES}, got {self.hughes_outflow!r}"
            )

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass
class State:
    """Per-node conserved variables.

    rho has shape (N,); mom has shape (N, 2) and is None for the first-order
    model. Momentum is kept exactly zero wherever rho <= rho_eps.
    """

    rho: np.ndarray
    mom: np.ndarray | None = None

    def copy(self) -> "State":
        return State(self.rho.copy(), None if self.mom is None else self.mom.copy())

    def velocity(self, params: ModelParams) -> np.ndarray:
        """Mean velocity mom/rho, zero on vacuum cells. Shape (N, 2)."""
        if self.mom is None:
            raise ValueError("first-order state carries no momentum")
        v = np.zeros_like(self.mom)
        alive = self.rho > params.rho_eps
        v[alive] = self.mom[alive] / self.rho[alive, None]
        return v

    def clip_vacuum(self, params: ModelParams) -> None:
        """Zero the momentum of vacuum cells in place."""
        if self.mom is not None:
            self.mom[self.rho <= params.rho_eps] = 0.0


def speed(rho, params: ModelParams):
    """Speed-density closure V(rho) = v_max exp(-alpha (rho/rho_max)^2) [m/s]."""
    r = np.asarray(rho, dtype=float) / params.rho_max
    return params.v_max * np.exp(-params.alpha * r * r)


def pressure(rho, params: ModelParams):
    """Isentropic pressure P(rho) = p0 rho^gamma."""
    return params.p0 * np.asarray(rho, dtype=float) ** params.gamma


def sound_speed(rho, params: ModelParams):
    """sqrt(P'(rho)) = sqrt(gamma p0 rho^(gamma-1)) [m/s]; zero at vacuum."""
    rho = np.asarray(rho, dtype=float)
    return np.sqrt(params.gamma * params.p0 * rho ** (params.gamma - 1.0))


def flow_derivative(rho, params: ModelParams):
    """d(rho V(rho))/drho = V(rho) (1 - 2 alpha rho^2 / rho_max^2)."""
    rho = np.asarray(rho, dtype=float)
    r2 = (rho / params.rho_max) ** 2
    return speed(rho, params) * (1.0 - 2.0 * params.alpha * r2)


def hughes_wavespeed_bound(params: ModelParams) -> float:
    """Global bound on |d(rho V)/drho|; the maximum is attained at vacuum."""
    return params.v_max


def lf_viscosity(rho_i, rho_j, params: ModelParams):
    """Numerical viscosity for the Lax-Friedrichs flux: max face-local |d(rho V)/drho|."""
    return np.maximum(
        np.abs(flow_derivative(rho_i, params)), np.abs(flow_derivative(rho_j, params))
    )


# ---------------------------------------------------------------------------
# second-order model: HLL flux with Einfeldt-type wave speeds
# ---------------------------------------------------------------------------

def _roe_averages(rho_l, vn_l, rho_r, vn_r, params: ModelParams):
    """Roe-averaged normal velocity and the sound speed at the mean density.

    The averaged sound speed is evaluated at (rho_l + rho_r)/2, which reduces
    to the common value when the states coincide.
    """
    sql = np.sqrt(rho_l)
    sqr = np.sqrt(rho_r)
    denom = sql + sqr
    v_roe = np.where(denom > 0.0, (sql * vn_l + sqr * vn_r) / np.where(denom > 0, denom, 1.0), 0.0)
    s_bar = sound_speed(0.5 * (rho_l + rho_r), params)
    return v_roe, s_bar


def einfeldt_speeds(u_l, u_r, n, params: ModelParams) -> tuple[float, float]:
    """Left/right wave-speed bounds (sigma_L, sigma_R) for one face.

    u_l, u_r are (rho, mom_x, mom_y) triples; n is the unit face normal.
    Both states at vacuum return (0, 0) and the flux short-circuits to zero.
    """
    rho_l, vn_l = _normal_decompose(u_l, n, params)[:2]
    rho_r, vn_r = _normal_decompose(u_r, n, params)[:2]
    if rho_l <= params.rho_eps and rho_r <= params.rho_eps:
        return 0.0, 0.0
    v_roe, s_bar = _roe_averages(rho_l, vn_l, rho_r, vn_r, params)
    s_l = sound_speed(rho_l, params)
    s_r = sound_speed(rho_r, params)
    sig_l = min(vn_l - s_l, v_roe - s_bar)
    sig_r = max(v_roe + s_bar, vn_r + s_r)
    return float(sig_l), float(sig_r)


def _normal_decompose(u, n, params: ModelParams):
    """Split a (rho, mom) state into rho and the normal/tangential velocity."""
    rho = float(u[0])
    if rho > params.rho_eps:
        vx = u[1] / rho
        vy = u[2] / rho
    else:
        vx = vy = 0.0
    vn = vx * n[0] + vy * n[1]
    vt = -vx * n[1] + vy * n[0]
    return rho, vn, vt


def _normal_flux(rho, vn, vt, params: ModelParams):
    """Physical normal flux in the rotated frame: (rho vn, rho vn^2 + P, rho vn vt)."""
    p = pressure(rho, params)
    return np.array([rho * vn, rho * vn * vn + p, rho * vn * vt])


def hll_flux(u_l, u_r, n, params: ModelParams) -> np.ndarray:
    """HLL numerical flux for the second-order model across one face.

    Returns the 3-vector (mass flux, momentum-x flux, momentum-y flux) in the
    fixed frame. Raises on non-finite input.
    """
    u_l = np.asarray(u_l, dtype=float)
    u_r = np.asarray(u_r, dtype=float)
    if not (np.all(np.isfinite(u_l)) and np.all(np.isfinite(u_r))):
        raise FloatingPointError(f"non-finite state in hll_flux: {u_l}, {u_r}")
    rho_l, vn_l, vt_l = _normal_decompose(u_l, n, params)
    rho_r, vn_r, vt_r = _normal_decompose(u_r, n, params)
    if rho_l <= params.rho_eps and rho_r <= params.rho_eps:
        return np.zeros(3)
    sig_l, sig_r = einfeldt_speeds(u_l, u_r, n, params)
    f_l = _normal_flux(rho_l, vn_l, vt_l, params)
    f_r = _normal_flux(rho_r, vn_r, vt_r, params)
    if sig_l >= 0.0:
        f = f_l
    elif sig_r <= 0.0:
        f = f_r
    else:
        q_l = np.array([rho_l, rho_l * vn_l, rho_l * vt_l])
        q_r = np.array([rho_r, rho_r * vn_r, rho_r * vt_r])
        f = (sig_r * f_l - sig_l * f_r + sig_l * sig_r * (q_r - q_l)) / (sig_r - sig_l)
    # rotate momentum components back to the fixed frame
    fx = f[1] * n[0] - f[2] * n[1]
    fy = f[1] * n[1] + f[2] * n[0]
    return np.array([f[0], fx, fy])


def hll_flux_batch(rho_l, mom_l, rho_r, mom_r, nx, ny, params: ModelParams):
    """Vectorized HLL flux over faces.

    All inputs are aligned arrays: rho_* (F,), mom_* (F, 2), nx/ny (F,).
    Returns (F0, F1, F2): mass and fixed-frame momentum flux components.
    """
    eps = params.rho_eps
    alive_l = rho_l > eps
    alive_r = rho_r > eps

    def vel(rho, mom, alive):
        v = np.zeros_like(mom)
        v[alive] = mom[alive] / rho[alive, None]
        return v

    v_l = vel(rho_l, mom_l, alive_l)
    v_r = vel(rho_r, mom_r, alive_r)
    vn_l = v_l[:, 0] * nx + v_l[:, 1] * ny
    vt_l = -v_l[:, 0] * ny + v_l[:, 1] * nx
    vn_r = v_r[:, 0] * nx + v_r[:, 1] * ny
    vt_r = -v_r[:, 0] * ny + v_r[:, 1] * nx

    s_l = sound_speed(rho_l, params)
    s_r = sound_speed(rho_r, params)
    v_roe, s_bar = _roe_averages(rho_l, vn_l, rho_r, vn_r, params)
    sig_l = np.minimum(vn_l - s_l, v_roe - s_bar)
    sig_r = np.maximum(v_roe + s_bar, vn_r + s_r)

    p_l = pressure(rho_l, params)
    p_r = pressure(rho_r, params)
    fl = np.stack([rho_l * vn_l, rho_l * vn_l ** 2 + p_l, rho_l * vn_l * vt_l], axis=1)
    fr = np.stack([rho_r * vn_r, rho_r * vn_r ** 2 + p_r, rho_r * vn_r * vt_r], axis=1)
    ql = np.stack([rho_l, rho_l * vn_l, rho_l * vt_l], axis=1)
    qr = np.stack([rho_r, rho_r * vn_r, rho_r * vt_r], axis=1)

    denom = sig_r - sig_l
    safe = np.where(denom > 0.0, denom, 1.0)
    f_mid = (sig_r[:, None] * fl - sig_l[:, None] * fr
             + (sig_l * sig_r)[:, None] * (qr - ql)) / safe[:, None]
    f = np.where(sig_l[:, None] >= 0.0, fl, np.where(sig_r[:, None] <= 0.0, fr, f_mid))
    f[~(alive_l | alive_r)] = 0.0

    f0 = f[:, 0]
    f1 = f[:, 1] * nx - f[:, 2] * ny
    f2 = f[:, 1] * ny + f[:, 2] * nx
    return f0, f1, f2


# ---------------------------------------------------------------------------
# first-order model: Lax-Friedrichs flux
# ---------------------------------------------------------------------------

def lax_friedrichs_flux(rho_l, rho_r, mu_l, mu_r, n, params: ModelParams) -> float:
    """Mass flux for the first-order model: central flux plus LF viscosity."""
    f_l = rho_l * float(speed(rho_l, params)) * (mu_l[0] * n[0] + mu_l[1] * n[1])
    f_r = rho_r * float(speed(rho_r, params)) * (mu_r[0] * n[0] + mu_r[1] * n[1])
    xi = float(lf_viscosity(rho_l, rho_r, params))
    return 0.5 * (f_l + f_r - xi * (rho_r - rho_l))


def lax_friedrichs_flux_batch(rho_l, rho_r, mu_l, mu_r, nx, ny, params: ModelParams):
    """Vectorized Lax-Friedrichs mass flux over faces."""
    f_l = rho_l * speed(rho_l, params) * (mu_l[:, 0] * nx + mu_l[:, 1] * ny)
    f_r = rho_r * speed(rho_r, params) * (mu_r[:, 0] * nx + mu_r[:, 1] * ny)
    xi = lf_viscosity(rho_l, rho_r, params)
    return 0.5 * (f_l + f_r - xi * (rho_r - rho_l))


# ---------------------------------------------------------------------------
# relaxation source and boundary ghost states
# ---------------------------------------------------------------------------

def relaxation_source(u, mu, params: ModelParams) -> np.ndarray:
    """Source (0, (rho V(rho) mu - rho v)/tau) for one state; zero at vacuum."""
    rho = float(u[0])
    if rho <= params.rho_eps:
        return np.zeros(3)
    v_des = float(speed(rho, params))
    sx = (rho * v_des * mu[0] - u[1]) / params.tau
    sy = (rho * v_des * mu[1] - u[2]) / params.tau
    return np.array([0.0, sx, sy])


def relaxation_source_batch(rho, mom, mu, params: ModelParams):
    """Vectorized relaxation source for the momentum equation. Shape (N, 2)."""
    v_des = speed(rho, params)
    s = (rho[:, None] * v_des[:, None] * mu - mom) / params.tau
    s[rho <= params.rho_eps] = 0.0
    return s


def ghost_state(u_i, n, tag, params: ModelParams) -> np.ndarray:
    """Exterior ghost state for the second-order boundary flux.

    Wall: mirror the normal velocity (rho_g = rho_i); outflow: a prescribed
    draining state rho_g = 0.1 rho_max moving outward at v_max.
    """
    if tag == "wall":
        rho = float(u_i[0])
        if rho > params.rho_eps:
            vx, vy = u_i[1] / rho, u_i[2] / rho
        else:
            vx = vy = 0.0
        vn = vx * n[0] + vy * n[1]
        gx, gy = vx - 2.0 * vn * n[0], vy - 2.0 * vn * n[1]
        return np.array([rho, rho * gx, rho * gy])
    if tag == "outflow":
        rho_g = 0.1 * params.rho_max
        return np.array([rho_g, rho_g * params.v_max * n[0], rho_g * params.v_max * n[1]])
    raise ValueError(f"unknown boundary tag {tag!r}")


def hughes_outflow_flux(rho_i, mu_i, n, params: ModelParams):
    """Prescribed first-order outflow mass flux per unit boundary length.

    The default drains at the congestion capacity rho_max V(rho_max), limited
    by the local upwind flux so a near-vacuum boundary cell cannot go
    negative. The 'free' mode uses the upwind interior flux directly.
    """
    upwind = rho_i * speed(rho_i, params) * np.maximum(mu_i[..., 0] * n[..., 0]
                                                       + mu_i[..., 1] * n[..., 1], 0.0)
    if params.hughes_outflow == "free":
        return upwind
    capacity = params.rho_max * float(speed(params.rho_max, params))
    return np.minimum(capacity, rho_i * speed(rho_i, params))
