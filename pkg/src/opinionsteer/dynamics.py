"""Switched opinion dynamics: open loop and under the steering controller.

The state obeys xdot = -L(t) x + u(t).  The steering controller is
u = L(t) x_d - K(t) (x - x_d) with diagonal gains K supported on the root
set, which makes both loops affine with piecewise-constant coefficients.
Integration is classical fixed-step RK4 aligned with switch instants; for an
affine segment xdot = A x + b with constant A, b the RK4 step collapses to
x <- Phi x + psi with

    Phi = I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24
    psi = h (I + hA/2 + (hA)^2/6 + (hA)^3/24) b

which is used verbatim (bitwise identical to the four-stage form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (GraphDomainError, IntegrationDivergedError,
                     RootSetMismatchError, ScenarioError, StructuralCheckError)
from .graphs import (GraphSnapshot, SwitchingSchedule,
                     check_uniform_qs_connectivity, laplacian_at)

_TIME_EPS = 1e-9


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class GainSchedule:
    """Constant per-agent feedback gains with the root-set floor kappa_lower.

    Validity (checked by :meth:`violations`, not at construction, so that the
    certifier can report on deliberately broken inputs):
      P1  constant gains are trivially continuous;
      P2  k_i >= kappa_lower > 0 on the root set, k_j == 0 elsewhere.
    """

    gains: tuple[float, ...]
    kappa_lower: float

    def as_vector(self) -> np.ndarray:
        return np.asarray(self.gains, dtype=float)

    def violations(self, root_set: Sequence[int]) -> list[str]:
        out = []
        if not (self.kappa_lower > 0):
            out.append("kappa_lower must be positive (P2)")
        S = set(root_set)
        for i, k in enumerate(self.gains):
            if i in S:
                if self.kappa_lower > 0 and k < self.kappa_lower:
                    out.append(f"gain k_{i + 1}={k:g} below kappa_lower="
                               f"{self.kappa_lower:g} on the root set (P2)")
            elif k != 0.0:
                out.append(f"gain k_{i + 1}={k:g} must be zero outside the "
                           "root set (P2)")
        return out


@dataclass
class Scenario:
    """Full experiment description."""

    schedule: SwitchingSchedule
    delta: float
    window: float
    x0: tuple[float, ...]
    x_target: tuple[float, ...]
    gains: GainSchedule
    root_set: Optional[tuple[int, ...]]
    horizon: float
    dt: float

    @property
    def n_agents(self) -> int:
        return self.schedule.n_agents

    def validate(self) -> None:
        n = self.n_agents
        if not (self.delta > 0):
            raise ScenarioError("delta", "must be positive")
        if not (self.window > 0):
            raise ScenarioError("window_T", "must be positive")
        if not (self.horizon > 0):
            raise ScenarioError("horizon", "must be positive")
        if not (self.dt > 0):
            raise ScenarioError("dt", "must be positive")
        if self.dt > self.schedule.min_dwell / 2 + 1e-12:
            raise ScenarioError(
                "dt", f"must be at most half the shortest dwell time "
                f"({self.schedule.min_dwell / 2:g})")
        if len(self.x0) != n:
            raise ScenarioError("x0", f"expected {n} entries, got {len(self.x0)}")
        if len(self.x_target) != n:
            raise ScenarioError("x_target",
                                f"expected {n} entries, got {len(self.x_target)}")
        for name, vec in (("x0", self.x0), ("x_target", self.x_target)):
            if not all(math.isfinite(v) for v in vec):
                raise ScenarioError(name, "entries must be finite")
        if len(self.gains.gains) != n:
            raise ScenarioError("gains", f"expected {n} gains")
        if self.root_set is not None:
            if not self.root_set:
                raise ScenarioError("root_set", "must be nonempty when given")
            if any(not (0 <= v < n) for v in self.root_set):
                raise ScenarioError("root_set", f"indices must lie in 1..{n}")


@dataclass
class Trajectory:
    """Dense trajectory on the switch-aligned grid, with monitor series.

    ``h``/``c`` are the max absolute opinions over the receiver and root
    sets; ``h_e``/``c_e`` are the same maxima of the error x - x_d.  ``h`` is
    NaN when the receiver set is empty.  ``seg_ids`` gives the snapshot index
    active at each grid time (right-continuous); ``switch_mask`` flags grid
    points that are switch instants.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    h: np.ndarray
    c: np.ndarray
    h_e: np.ndarray
    c_e: np.ndarray
    seg_ids: np.ndarray
    switch_mask: np.ndarray
    closed_loop: bool
    root_set: tuple[int, ...]
    x_target: np.ndarray
    dt: float
    kappa_lower: float

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def index_at(self, t: float) -> int:
        """Index of the grid sample nearest to t (must be within dt/2)."""
        k = int(np.searchsorted(self.times, t))
        candidates = [i for i in (k - 1, k, k + 1) if 0 <= i < len(self.times)]
        best = min(candidates, key=lambda i: abs(self.times[i] - t))
        if abs(self.times[best] - t) > self.dt / 2 + _TIME_EPS:
            raise GraphDomainError(f"no grid sample within dt/2 of t={t:g}")
        return best


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------

def state_derivative(snapshot: GraphSnapshot, x: np.ndarray,
                     u: np.ndarray) -> np.ndarray:
    """Per-agent summation form of the dynamics.

    xdot_i = sum_j |a_ij| (sgn(a_ij) x_j - x_i) + u_i, which is algebraically
    the same as -L x + u.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (snapshot.n_agents,) or u.shape != (snapshot.n_agents,):
        raise GraphDomainError("state/control dimension mismatch")
    xdot = u.copy()
    for (i, j), w in snapshot.weights.items():
        xdot[i] += abs(w) * (math.copysign(1.0, w) * x[j] - x[i])
    return xdot


def control_input(schedule: SwitchingSchedule, gains: GainSchedule,
                  x: np.ndarray, x_d: np.ndarray, t: float) -> np.ndarray:
    """Steering controller u = L(t) x_d - K (x - x_d)."""
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    n = schedule.n_agents
    if x.shape != (n,) or x_d.shape != (n,):
        raise GraphDomainError("state/target dimension mismatch")
    lap = laplacian_at(schedule, t)
    return lap @ x_d - gains.as_vector() * (x - x_d)


def monitors(x: np.ndarray, x_d: np.ndarray, S: Sequence[int]
             ) -> tuple[float, float, float, float]:
    """(h, c, h_e, c_e): max |.| over receivers / roots of state and error.

    h and h_e are NaN when the receiver set is empty.
    """
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    n = len(x)
    S = sorted(set(S))
    if not S:
        raise GraphDomainError("S must be nonempty")
    R = [i for i in range(n) if i not in set(S)]
    e = x - x_d
    c = float(np.max(np.abs(x[S])))
    c_e = float(np.max(np.abs(e[S])))
    if R:
        h = float(np.max(np.abs(x[R])))
        h_e = float(np.max(np.abs(e[R])))
    else:
        h = h_e = math.nan
    return h, c, h_e, c_e


def abs_dynamics_residual(snapshot: GraphSnapshot, x: np.ndarray
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the absolute-value dynamics identity at u == 0.

    Returns (residual, at_zero) where residual_i is
    sgn(x_i) * xdot_i - sum_j |a_ij| (theta_ij |x_j| - |x_i|) with
    theta_ij = sgn(x_i) sgn(a_ij) sgn(x_j).  The identity is exact wherever
    x_i != 0; rows with x_i == 0 are flagged in ``at_zero`` and should be
    excluded from pass/fail decisions (measure-zero set).
    """
    x = np.asarray(x, dtype=float)
    n = snapshot.n_agents
    if x.shape != (n,):
        raise GraphDomainError("state dimension mismatch")
    xdot = state_derivative(snapshot, x, np.zeros(n))
    sgn = np.sign(x)
    lhs = sgn * xdot
    rhs = np.zeros(n)
    for (i, j), w in snapshot.weights.items():
        theta = sgn[i] * np.sign(w) * sgn[j]
        rhs[i] += abs(w) * (theta * abs(x[j]) - abs(x[i]))
    return lhs - rhs, x == 0.0


# ---------------------------------------------------------------------------
# Root-set resolution
# ---------------------------------------------------------------------------

def resolve_root_set(scenario: Scenario, starts_per_dwell: int = 10
                     ) -> tuple[int, ...]:
    """Detect the fixed root set; cross-check a declared one.

    Raises StructuralCheckError if the schedule is not uniformly rooted with
    one fixed S, and RootSetMismatchError if a declared root set disagrees.
    """
    verdict = check_uniform_qs_connectivity(
        scenario.schedule, scenario.delta, scenario.window,
        starts_per_dwell=starts_per_dwell)
    if not verdict.holds:
        raise StructuralCheckError(
            f"no root set on the window starting at t={verdict.fails_at:g}")
    if not verdict.fixed:
        raise StructuralCheckError("root set is not fixed across windows")
    detected = tuple(sorted(verdict.root_set))
    if scenario.root_set is not None and tuple(sorted(scenario.root_set)) != detected:
        raise RootSetMismatchError(
            f"declared root set {sorted(scenario.root_set)} differs from "
            f"detected {list(detected)}")
    return detected


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _rk4_affine_maps(A: np.ndarray, b: np.ndarray, h: float
                     ) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    eye = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    hA4 = hA3 @ hA
    phi = eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA4 / 24.0
    psi = h * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ b
    return phi, psi


def integrate(scenario: Scenario, closed_loop: bool,
              root_set: Optional[Sequence[int]] = None) -> Trajectory:
    """Integrate open loop (u == 0) or under the steering controller.

    The grid is the union of uniform dt steps and every switch instant;
    steps are shortened to land exactly on switches and never straddle one.
    Passing ``root_set`` skips the connectivity-based detection (callers that
    already ran the structural checks).
    """
    scenario.validate()
    if root_set is not None:
        S = tuple(sorted(root_set))
    else:
        S = resolve_root_set(scenario)
    if closed_loop:
        bad = scenario.gains.violations(S)
        if bad:
            raise ScenarioError("gains", "; ".join(bad))

    sched = scenario.schedule
    n = scenario.n_agents
    xd = np.asarray(scenario.x_target, dtype=float)
    kvec = scenario.gains.as_vector()
    dt = scenario.dt
    t0 = sched.t_start
    t_end = t0 + scenario.horizon

    # Closed loop integrates the error e = x - x_d, whose dynamics
    # edot = -(L + K) e are purely linear: the target is an exact fixed
    # point of the step map, so rounding stays relative to |e| and the
    # error monitors keep decaying instead of stalling at an absolute
    # noise floor near x_d.  Open loop integrates x itself.
    laps = [snap.laplacian() for snap in sched.snapshots]
    if closed_loop:
        mats = [-(lap + np.diag(kvec)) for lap in laps]
        y0 = np.asarray(scenario.x0, dtype=float) - xd
    else:
        mats = [-lap for lap in laps]
        y0 = np.asarray(scenario.x0, dtype=float)
    offs = [np.zeros(n) for _ in laps]

    step_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    times = [t0]
    states = [y0]
    seg_ids = [0]
    switch_mask = [False]

    x = states[0]
    for a, b, idx in sched.segments(t0, t_end):
        # The grid point at time a already exists (t0 or previous segment
        # end); it belongs to this segment under right-continuity.
        seg_ids[-1] = idx
        if len(times) > 1:
            switch_mask[-1] = True

        span = b - a
        n_steps = int(math.floor(span / dt + _TIME_EPS))
        if n_steps == 0 or span - n_steps * dt > _TIME_EPS:
            n_steps += 1
        h_last = span - (n_steps - 1) * dt

        if idx not in step_cache:
            step_cache[idx] = _rk4_affine_maps(mats[idx], offs[idx], dt)
        phi, psi = step_cache[idx]
        if abs(h_last - dt) <= 1e-15:
            phi_last, psi_last = phi, psi
        else:
            phi_last, psi_last = _rk4_affine_maps(mats[idx], offs[idx], h_last)

        # A blow-up overflows before it is detected below; keep that quiet.
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, n_steps + 1):
                if k < n_steps:
                    x = phi @ x + psi
                    t_k = a + k * dt
                else:
                    x = phi_last @ x + psi_last
                    t_k = b
                times.append(t_k)
                states.append(x)
                seg_ids.append(idx)
                switch_mask.append(False)

        if not np.all(np.isfinite(x)):
            finite_upto = len(states) - 1
            while finite_upto > 0 and not np.all(np.isfinite(states[finite_upto])):
                finite_upto -= 1
            t_arr = np.array(times[:finite_upto + 1])
            s_arr = np.vstack(states[:finite_upto + 1])
            if closed_loop:
                s_arr = s_arr + xd[None, :]
            raise IntegrationDivergedError(t_last=float(t_arr[-1]),
                                           times=t_arr, states=s_arr)

    t_arr = np.array(times)
    Y = np.vstack(states)
    seg_arr = np.array(seg_ids, dtype=int)
    sw_arr = np.array(switch_mask, dtype=bool)

    if closed_loop:
        E = Y
        X = Y + xd[None, :]
    else:
        X = Y
        E = X - xd[None, :]

    U = np.zeros_like(X)
    if closed_loop:
        for idx in np.unique(seg_arr):
            rows = seg_arr == idx
            U[rows] = (laps[idx] @ xd)[None, :] - E[rows] * kvec

    S_idx = np.array(S, dtype=int)
    R_idx = np.array([i for i in range(n) if i not in set(S)], dtype=int)
    c = np.max(np.abs(X[:, S_idx]), axis=1)
    c_e = np.max(np.abs(E[:, S_idx]), axis=1)
    if R_idx.size:
        h = np.max(np.abs(X[:, R_idx]), axis=1)
        h_e = np.max(np.abs(E[:, R_idx]), axis=1)
    else:
        h = np.full(len(t_arr), math.nan)
        h_e = np.full(len(t_arr), math.nan)

    return Trajectory(times=t_arr, states=X, controls=U, h=h, c=c,
                      h_e=h_e, c_e=c_e, seg_ids=seg_arr, switch_mask=sw_arr,
                      closed_loop=closed_loop, root_set=S, x_target=xd,
                      dt=dt, kappa_lower=scenario.gains.kappa_lower)
