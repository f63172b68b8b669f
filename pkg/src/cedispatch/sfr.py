"""Low-order system frequency response (SFR) with a reheat governor.

Per-unit conventions: power on ``b_base``, frequency on ``f0``. Each unit's
``droop_inv`` is 1/R on its own rating, so its system-base contribution is
``droop_inv * p_max / b_base``; inertia is weighted the same way. The reheat
fraction and time constant enter through the droop-weighted sums
``a_fh = sum F_H,g / R_g`` and ``a_tr = sum T_R,g / R_g`` using the same
system-base droop.

For a step loss ``dP`` the frequency deviation obeys

    2H df/dt = -dP - D df + dPm
    dPm = -(1/R) (1 + F_H T_R s) / (1 + T_R s) df

whose peak deviation is ``dP / g`` with ``g`` from :func:`g_eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SystemSpec


class OverdampedError(ValueError):
    """Damping ratio >= 1: the oscillatory nadir formula does not apply."""


@dataclass(frozen=True)
class AlphaVector:
    a_hg: float
    a_rg: float
    a_fh: float
    a_tr: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a_hg, self.a_rg, self.a_fh, self.a_tr])

    @classmethod
    def from_array(cls, a) -> "AlphaVector":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    # recovered aggregate physical parameters
    @property
    def h(self) -> float:
        return self.a_hg

    @property
    def t_r(self) -> float:
        return self.a_tr / self.a_rg

    @property
    def f_h(self) -> float:
        return self.a_fh / self.a_rg


@dataclass(frozen=True)
class SfrDerived:
    omega_n: float
    zeta: float
    omega_r: float
    t_nadir: float
    amplitude_term: float


def generator_images(spec: SystemSpec) -> np.ndarray:
    """Per-generator alpha contribution when fully committed, shape (n_gen, 4)."""
    rows = []
    for g in spec.generators:
        w = g.p_max / spec.b_base
        rows.append([g.inertia_h * w, g.droop_inv * w,
                     g.f_h * g.droop_inv * w, g.t_r * g.droop_inv * w])
    return np.array(rows, dtype=float)


def aggregate(x, spec: SystemSpec) -> AlphaVector:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n_gen,):
        raise ValueError(f"commitment vector must have {spec.n_gen} entries")
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("commitment entries must lie in [0, 1]")
    return AlphaVector.from_array(x @ generator_images(spec))


def derived_params(a: AlphaVector, d: float) -> SfrDerived:
    if a.a_hg <= 0 or a.a_rg <= 0 or a.a_tr <= 0 or a.a_fh < 0:
        raise ValueError(f"alpha outside the admissible region: {a}")
    k = d + a.a_rg
    t_r = a.t_r
    wn = math.sqrt(k / (2.0 * a.a_hg * t_r))
    zeta = (2.0 * a.a_hg + (d + a.a_fh) * t_r) / (2.0 * math.sqrt(2.0 * a.a_hg * t_r * k))
    if zeta >= 1.0:
        raise OverdampedError(f"zeta = {zeta:.4f} >= 1")
    wr = wn * math.sqrt(1.0 - zeta * zeta)
    t_nadir = math.atan2(wr * t_r, zeta * wn * t_r - 1.0) / wr
    amp = math.sqrt(t_r * t_r * wn * wn - 2.0 * zeta * wn * t_r + 1.0)
    return SfrDerived(wn, zeta, wr, t_nadir, amp)


def g_eval(a: AlphaVector, d: float) -> float:
    p = derived_params(a, d)
    return (d + a.a_rg) / (1.0 + p.amplitude_term * math.exp(-p.zeta * p.omega_n * p.t_nadir))


def nadir_pu(a: AlphaVector, d: float, delta_p_pu: float) -> float:
    """Closed-form peak frequency deviation (p.u. of f0) for a step ``delta_p_pu``."""
    return delta_p_pu / g_eval(a, d)


def _inside(a: np.ndarray, floor: np.ndarray | None) -> bool:
    if a[0] <= 0 or a[1] <= 0 or a[3] <= 0 or a[2] < 0:
        return False
    if floor is not None and (a[0] < floor[0] or a[1] < floor[1]):
        return False
    return True


def g_grad(a: AlphaVector, d: float, rel_step: float = 1e-5,
           floor: np.ndarray | None = None) -> np.ndarray:
    """Central-difference gradient of ``g`` in alpha space.

    The step is ``rel_step * max(|a_i|, 1)``; it is halved while a probe
    would leave the admissible region, down to 1e-9.
    """
    base = a.as_array()
    grad = np.zeros(4)
    for i in range(4):
        h = rel_step * max(abs(base[i]), 1.0)
        while True:
            e = np.zeros(4)
            e[i] = h
            if _inside(base + e, floor) and _inside(base - e, floor):
                break
            h *= 0.5
            if h < 1e-9:
                raise ValueError(f"finite-difference step for coordinate {i} below 1e-9")
        gp = g_eval(AlphaVector.from_array(base + e), d)
        gm = g_eval(AlphaVector.from_array(base - e), d)
        grad[i] = (gp - gm) / (2.0 * h)
    return grad


# -- time-domain oracle --------------------------------------------------------

@dataclass
class SfrTrajectory:
    t: np.ndarray
    df: np.ndarray        # frequency deviation, p.u. of f0 (negative for a loss)
    nadir: float          # max |df|
    t_nadir: float

    def to_csv(self, path, f0: float = 1.0, stride: int = 10) -> None:
        data = np.column_stack([self.t[::stride], self.df[::stride] * f0])
        np.savetxt(path, data, delimiter=",", header="t,df", comments="", fmt="%.9g")


def _state_matrix(a: AlphaVector, d: float):
    h, rg, fh, tr = a.a_hg, a.a_rg, a.f_h, a.t_r
    # states: df, w (governor lag); dPm = -rg (fh df + (1 - fh) w)
    A = np.array([[(-d - rg * fh) / (2 * h), -rg * (1 - fh) / (2 * h)],
                  [1.0 / tr, -1.0 / tr]])
    bvec = np.array([-1.0 / (2 * h), 0.0])
    return A, bvec


def sfr_simulate(a: AlphaVector, d: float, delta_p_pu: float,
                 dt: float = 1e-3, horizon: float = 30.0) -> SfrTrajectory:
    """Fixed-step RK4 integration of the two-state SFR model from rest.

    For a linear system with constant input one RK4 step is the affine map
    ``s -> P s + q``; the whole trajectory is evaluated from that map.
    """
    if delta_p_pu < 0:
        raise ValueError("delta_p_pu must be >= 0")
    n = int(round(horizon / dt))
    t = np.arange(n + 1) * dt
    if delta_p_pu == 0:
        return SfrTrajectory(t, np.zeros(n + 1), 0.0, 0.0)
    A, bvec = _state_matrix(a, d)
    hA = dt * A
    I = np.eye(2)
    P = I + hA + hA @ hA / 2 + hA @ hA @ hA / 6 + hA @ hA @ hA @ hA / 24
    q = dt * (I + hA / 2 + hA @ hA / 6 + hA @ hA @ hA / 24) @ (bvec * delta_p_pu)
    s_star = np.linalg.solve(I - P, q)
    lam, V = np.linalg.eig(P)
    c = np.linalg.solve(V, -s_star)
    powers = lam[None, :] ** np.arange(n + 1)[:, None]
    traj = (powers * c[None, :]) @ V.T + s_star[None, :]
    df = traj[:, 0].real
    if not np.all(np.isfinite(df)):
        raise FloatingPointError("non-finite state in SFR integration")
    k = int(np.argmax(np.abs(df)))
    return SfrTrajectory(t, df, float(abs(df[k])), float(t[k]))


def sfr_simulate_stepwise(a: AlphaVector, d: float, delta_p_pu: float,
                          dt: float = 1e-3, horizon: float = 30.0) -> SfrTrajectory:
    """Plain loop RK4, kept as a cross-check of :func:`sfr_simulate`."""
    A, bvec = _state_matrix(a, d)
    u = bvec * delta_p_pu
    n = int(round(horizon / dt))
    s = np.zeros(2)
    out = np.zeros(n + 1)
    for k in range(n):
        k1 = A @ s + u
        k2 = A @ (s + dt / 2 * k1) + u
        k3 = A @ (s + dt / 2 * k2) + u
        k4 = A @ (s + dt * k3) + u
        s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise FloatingPointError("non-finite state in SFR integration")
        out[k + 1] = s[0]
    k = int(np.argmax(np.abs(out)))
    t = np.arange(n + 1) * dt
    return SfrTrajectory(t, out, float(abs(out[k])), float(t[k]))


def max_deviation_hz(spec: SystemSpec, x, disturbance_mw: float) -> float:
    """ODE nadir in Hz for commitment ``x`` and a step of ``disturbance_mw``."""
    if disturbance_mw <= 0:
        return 0.0
    a = aggregate(x, spec)
    traj = sfr_simulate(a, spec.damping_d, disturbance_mw / spec.b_base)
    return traj.nadir * spec.f0
