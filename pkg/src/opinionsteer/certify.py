"""Theoretical constants and numerical certification of the convergence
inequalities on produced trajectories.

Several constants are products of exponentials that underflow double
precision for realistic parameters (xi0 = exp(-(N-1) M0 K0) is already tiny
for desk-scale networks).  Exact logarithms are therefore carried alongside
the rounded floats; strictness assertions and the asymptotic envelope are
evaluated in log space so that underflow never fabricates a zero or a
division by zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import Scenario, Trajectory, integrate, resolve_root_set
from .errors import (CheckUsageError, GraphDomainError, RootSetMismatchError,
                     StructuralCheckError)
from .graphs import (BalanceVerdict, Bipartition, ConnectivityVerdict,
                     check_persistent_balance, check_uniform_qs_connectivity,
                     longest_path_from_roots, union_graph)

DEFAULT_TOL_REL = 1e-6
DEFAULT_TOL_WIN = 1e-6
_TINY = 1e-300

# Additive floor, in units of the state scale, below which exponential error
# envelopes saturate in double precision.  Near the target the computed error
# x - x_d bottoms out around machine epsilon times the state magnitude
# (accumulated over ~1e5 steps), so envelopes like c_e(0) exp(-kappa t) drop
# many orders below anything representable; without the floor such samples
# would count as violations of a bound both of whose sides are numerically
# zero.  The floor only relaxes the direction the analysis proves.
ROUNDOFF_FLOOR_REL = 1e-12


def dini_tolerance(dt: float, M0: float, n_agents: int, state_scale: float
                   ) -> float:
    """Default slack for forward-difference Dini checks.

    Scales with the step and the square of the local Lipschitz bound so that
    discretization error cannot produce false violations.
    """
    return 10.0 * dt * (M0 * n_agents) ** 2 * max(1.0, state_scale)


def roundoff_floor(traj: "Trajectory") -> float:
    """Absolute saturation floor for error-envelope checks on a trajectory."""
    scale = max(float(np.max(np.abs(traj.states[0]))),
                float(np.max(np.abs(traj.x_target))))
    return ROUNDOFF_FLOOR_REL * max(1.0, scale)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

@dataclass
class TheoremConstants:
    """Constants entering the contraction analysis.

    ``chi`` is the per-hop attenuation parameter of the recursion; it has no
    closed-form prescription, defaults to ``zeta`` and is user-overridable.
    ``applicable`` is False when the receiver set is empty (no h monitor, the
    window/contraction analysis degenerates).
    """

    M0: float
    N: int
    N_s: int
    M_s: float
    d0: int
    T: float
    K0: float
    kappa_lower: float
    beta_tilde: float
    applicable: bool = True
    zeta: float = math.nan
    xi0: float = math.nan
    chi: float = math.nan
    alpha1: float = math.nan
    alpha2: float = math.nan
    log_zeta: float = math.nan
    log_xi0: float = math.nan
    log_chi: float = math.nan
    log_alpha2: float = math.nan
    log_one_minus_alpha1: float = math.nan

    def contraction_envelope(self) -> float:
        """(3 - alpha2 - alpha1) / (1 - alpha1), evaluated in log space.

        Returns +inf when 1 - alpha1 underflows; the asymptotic bound is then
        vacuous but never a division by zero.
        """
        if not self.applicable:
            return math.inf
        one_minus_a1 = math.exp(self.log_one_minus_alpha1) \
            if self.log_one_minus_alpha1 > -745 else 0.0
        numer = 2.0 + one_minus_a1 - (self.alpha2 if math.isfinite(self.alpha2) else 0.0)
        log_env = math.log(numer) - self.log_one_minus_alpha1
        if log_env > 709:
            return math.inf
        return math.exp(log_env)


def compute_constants(scenario: Scenario, S: Sequence[int], d0: int,
                      chi: Optional[float] = None) -> TheoremConstants:
    """Evaluate all contraction constants for a root set S and depth d0."""
    M0 = scenario.schedule.max_abs_weight()
    N = scenario.n_agents
    N_s = len(set(S))
    T = scenario.window
    K0 = d0 * T
    kappa = scenario.gains.kappa_lower
    if d0 == 0 and N > N_s:
        raise GraphDomainError(
            "d0 = 0 is inconsistent with a nonempty receiver set")
    beta_tilde = math.exp(-kappa * K0)

    if N == N_s:
        # No receivers: the attenuation chain is not applicable.
        return TheoremConstants(M0=M0, N=N, N_s=N_s, M_s=M0 * N_s, d0=d0, T=T,
                                K0=K0, kappa_lower=kappa,
                                beta_tilde=beta_tilde, applicable=False)

    log_zeta = -M0 * (N - N_s - 1) * T + math.log1p(-math.exp(-scenario.delta * T))
    log_xi0 = -(N - 1) * M0 * K0
    if chi is None:
        log_chi = log_zeta
    else:
        if not (chi > 0):
            raise GraphDomainError("chi must be positive")
        log_chi = math.log(chi)
    log_alpha2 = d0 * log_xi0 + (d0 - 1) * log_chi
    log_1ma1 = log_alpha2 + log_zeta

    def safe_exp(lg):
        return math.exp(lg) if lg > -745 else 0.0

    zeta = safe_exp(log_zeta)
    xi0 = safe_exp(log_xi0)
    alpha2 = safe_exp(log_alpha2)
    alpha1 = 1.0 - safe_exp(log_1ma1)
    return TheoremConstants(M0=M0, N=N, N_s=N_s, M_s=M0 * N_s, d0=d0, T=T,
                            K0=K0, kappa_lower=kappa, beta_tilde=beta_tilde,
                            applicable=True, zeta=zeta, xi0=xi0,
                            chi=safe_exp(log_chi), alpha1=alpha1,
                            alpha2=alpha2, log_zeta=log_zeta, log_xi0=log_xi0,
                            log_chi=log_chi, log_alpha2=log_alpha2,
                            log_one_minus_alpha1=log_1ma1)


# ---------------------------------------------------------------------------
# Inequality reports
# ---------------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    samples_checked: int
    violations: int
    worst_margin: float
    tolerance_used: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _pair_slices(traj: Trajectory, exclude_switch_left: bool):
    """Index pairs (k, k+1) of consecutive grid samples; optionally drop
    pairs whose left endpoint is a switch instant."""
    k = np.arange(len(traj.times) - 1)
    if exclude_switch_left:
        k = k[~traj.switch_mask[:-1]]
    return k


def check_dini_h(traj: Trajectory, constants: TheoremConstants,
                 tol: Optional[float] = None) -> InequalityReport:
    """Forward-difference check of D+ h <= M0 N_s (c - h) on an open-loop run.

    Pairs starting at a switch instant are skipped: the bound holds almost
    everywhere and switches are a measure-zero set.
    """
    if traj.closed_loop:
        raise CheckUsageError("dini_h applies to open-loop trajectories only")
    if np.all(np.isnan(traj.h)):
        return InequalityReport("dini_h", 0, 0, -math.inf,
                                tol if tol is not None else 0.0,
                                details={"note": "receiver set empty"})
    if tol is None:
        scale = float(np.max(np.abs(traj.states[0])))
        tol = dini_tolerance(traj.dt, constants.M0, constants.N, scale)
    k = _pair_slices(traj, exclude_switch_left=True)
    dt_k = traj.times[k + 1] - traj.times[k]
    lhs = (traj.h[k + 1] - traj.h[k]) / dt_k
    rhs = constants.M_s * (traj.c[k] - traj.h[k])
    margin = lhs - rhs
    return InequalityReport("dini_h", int(len(k)), int(np.sum(margin > tol)),
                            float(np.max(margin)), tol)


def check_dini_c(traj: Trajectory, closed_loop: Optional[bool] = None,
                 constants: Optional[TheoremConstants] = None,
                 tol_rel: float = DEFAULT_TOL_REL) -> InequalityReport:
    """Open loop: c non-increasing between samples.  Closed loop: the error
    monitor obeys c_e(t+dt) <= c_e(t) exp(-kappa dt) up to relative slack."""
    if closed_loop is None:
        closed_loop = traj.closed_loop
    k = _pair_slices(traj, exclude_switch_left=False)
    dt_k = traj.times[k + 1] - traj.times[k]
    if closed_loop:
        bound = traj.c_e[k] * np.exp(-traj.kappa_lower * dt_k)
        margin = traj.c_e[k + 1] - bound
        tol_k = tol_rel * bound + roundoff_floor(traj)
        name = "dini_c_e"
    else:
        bound = traj.c[k]
        margin = traj.c[k + 1] - bound
        tol_k = tol_rel * np.abs(bound) + _TINY
        name = "dini_c"
    viol = int(np.sum(margin > tol_k))
    return InequalityReport(name, int(len(k)), viol, float(np.max(margin)),
                            tol_rel)


def check_window_bounds(traj: Trajectory, constants: TheoremConstants,
                        K0: Optional[float] = None,
                        tol_rel: float = DEFAULT_TOL_WIN) -> InequalityReport:
    """Per-window envelope checks over consecutive K0 windows.

    Open loop:  c(t) <= c(sK0)  and  h(t) <= h(sK0) + c(sK0).
    Closed loop: c_e(t) <= exp(-kappa (t - sK0)) c_e(sK0)  and
                 h_e(t) <= h_e(sK0) + c_e(sK0).
    """
    if K0 is None:
        K0 = constants.K0
    t0 = float(traj.times[0])
    horizon = float(traj.times[-1]) - t0
    if horizon < 2 * K0 - 1e-9:
        raise GraphDomainError(
            f"horizon {horizon:g} is shorter than two windows of K0={K0:g}")
    have_h = not np.all(np.isnan(traj.h))
    c = traj.c_e if traj.closed_loop else traj.c
    hmon = traj.h_e if traj.closed_loop else traj.h
    floor = roundoff_floor(traj) if traj.closed_loop else _TINY

    samples = 0
    violations = 0
    worst = -math.inf
    s = 0
    while (s + 1) * K0 <= horizon + 1e-9:
        i0 = traj.index_at(t0 + s * K0)
        i1 = traj.index_at(min(t0 + (s + 1) * K0, float(traj.times[-1])))
        idx = np.arange(i0, i1 + 1)
        c0, h0 = c[i0], (hmon[i0] if have_h else math.nan)
        if traj.closed_loop:
            decay = np.exp(-traj.kappa_lower * (traj.times[idx] - traj.times[i0]))
            c_bound = c0 * decay
        else:
            c_bound = np.full(len(idx), c0)
        m1 = c[idx] - c_bound
        tol1 = tol_rel * np.abs(c_bound) + floor
        samples += len(idx)
        violations += int(np.sum(m1 > tol1))
        worst = max(worst, float(np.max(m1)))
        if have_h:
            h_bound = h0 + c0
            m2 = hmon[idx] - h_bound
            tol2 = tol_rel * abs(h_bound) + floor
            samples += len(idx)
            violations += int(np.sum(m2 > tol2))
            worst = max(worst, float(np.max(m2)))
        s += 1

    name = "window_bounds_error" if traj.closed_loop else "window_bounds"
    return InequalityReport(name, samples, violations, worst, tol_rel,
                            details={"windows": s, "K0": K0})


def check_contraction(traj: Trajectory, constants: TheoremConstants,
                      tol_rel: float = DEFAULT_TOL_REL) -> InequalityReport:
    """Window-sampled contraction of the error monitors on a closed-loop run.

    Verifies, for h_n := h_e(nK0) and c_n := c_e(nK0):
      * h_n <= alpha1 h_{n-1} + (2 - alpha2) c_{n-1}
      * c_n <= beta_tilde^n c_0
      * final h_e below the asymptotic envelope times the last-window c_e.
    Needs at least 3 complete windows.
    """
    if not traj.closed_loop:
        raise CheckUsageError("contraction applies to closed-loop trajectories")
    K0 = constants.K0
    t0 = float(traj.times[0])
    horizon = float(traj.times[-1]) - t0
    n_windows = int(math.floor(horizon / K0 + 1e-9))
    if n_windows < 3:
        raise GraphDomainError(
            f"need at least 3 complete K0 windows, horizon covers {n_windows}")
    have_h = not np.all(np.isnan(traj.h_e))

    idxs = [traj.index_at(t0 + n * K0) for n in range(n_windows + 1)]
    c_n = traj.c_e[idxs]
    h_n = traj.h_e[idxs] if have_h else None

    a1 = constants.alpha1 if math.isfinite(constants.alpha1) else 1.0
    a2 = constants.alpha2 if math.isfinite(constants.alpha2) else 0.0

    floor = roundoff_floor(traj)
    samples = 0
    violations = 0
    worst = -math.inf
    ratios = []
    for n in range(1, n_windows + 1):
        if have_h:
            bound = a1 * h_n[n - 1] + (2.0 - a2) * c_n[n - 1]
            m = h_n[n] - bound
            samples += 1
            violations += int(m > tol_rel * abs(bound) + floor)
            worst = max(worst, float(m))
        geo = constants.beta_tilde ** n * c_n[0]
        m = c_n[n] - geo * (1.0 + n * tol_rel)
        samples += 1
        violations += int(m > floor)
        worst = max(worst, float(m))
        ratios.append(float(c_n[n] / c_n[n - 1]) if c_n[n - 1] > 0 else 0.0)

    env = constants.contraction_envelope()
    final_ok = True
    if have_h:
        final_bound = env * c_n[-1] if math.isfinite(env) else math.inf
        m = float(traj.h_e[-1]) - final_bound
        samples += 1
        if not (math.isinf(final_bound) or m <= tol_rel * abs(final_bound) + floor):
            violations += 1
            final_ok = False
        if math.isfinite(m):
            worst = max(worst, m)

    return InequalityReport(
        "contraction", samples, violations, worst, tol_rel,
        details={"window_ratios": ratios, "beta_tilde": constants.beta_tilde,
                 "envelope": env, "final_envelope_ok": final_ok})


# ---------------------------------------------------------------------------
# Full certification
# ---------------------------------------------------------------------------

@dataclass
class StructuralReport:
    connectivity: ConnectivityVerdict
    root_set: Optional[tuple[int, ...]]
    root_set_mismatch: bool
    balance: Optional[BalanceVerdict]
    gain_violations: list[str]

    @property
    def ok(self) -> bool:
        return (self.connectivity.holds and self.connectivity.fixed
                and not self.root_set_mismatch
                and self.balance is not None and self.balance.balanced
                and not self.gain_violations)


@dataclass
class CertificationReport:
    structural: StructuralReport
    constants: Optional[TheoremConstants]
    inequalities: list[InequalityReport]
    final_error: Optional[float]
    final_error_threshold: float
    convergence_verdict: bool
    open_trajectory: Optional[Trajectory] = None
    closed_trajectory: Optional[Trajectory] = None

    @property
    def inequality_ok(self) -> bool:
        return all(r.ok for r in self.inequalities)


def certify(scenario: Scenario, chi: Optional[float] = None,
            final_error_threshold: float = 1e-2,
            starts_per_dwell: int = 10) -> CertificationReport:
    """Run structural checks, both simulation loops, and every inequality.

    A structural failure yields verdict fail with inequalities skipped, but
    the dynamics are still simulated (when a root set is known) so that the
    trajectories remain available for inspection.
    """
    scenario.validate()
    sched = scenario.schedule

    conn = check_uniform_qs_connectivity(sched, scenario.delta,
                                         scenario.window,
                                         starts_per_dwell=starts_per_dwell)
    mismatch = False
    S: Optional[tuple[int, ...]] = None
    if conn.holds and conn.fixed:
        detected = tuple(sorted(conn.root_set))
        if scenario.root_set is not None and \
                tuple(sorted(scenario.root_set)) != detected:
            mismatch = True
            S = tuple(sorted(scenario.root_set))
        else:
            S = detected
    elif scenario.root_set is not None:
        S = tuple(sorted(scenario.root_set))

    balance = None
    if S is not None:
        balance = check_persistent_balance(sched, scenario.delta, set(S))
    gain_violations = scenario.gains.violations(S) if S is not None else \
        ["root set unknown; gains not checkable"]

    structural = StructuralReport(connectivity=conn, root_set=S,
                                  root_set_mismatch=mismatch,
                                  balance=balance,
                                  gain_violations=gain_violations)

    constants = None
    open_traj = closed_traj = None
    inequalities: list[InequalityReport] = []
    final_error = None

    if S is not None:
        arcs = union_graph(sched, scenario.delta, sched.t_start,
                           sched.t_start + sched.period).arcs
        try:
            d0 = longest_path_from_roots(arcs, set(S),
                                         nodes=set(range(scenario.n_agents)))
            constants = compute_constants(scenario, S, d0, chi=chi)
        except GraphDomainError:
            constants = None

        open_traj = integrate(scenario, closed_loop=False, root_set=S)
        if not gain_violations:
            closed_traj = integrate(scenario, closed_loop=True, root_set=S)
            final_error = float(np.max(np.abs(closed_traj.final_state
                                              - closed_traj.x_target)))

    if structural.ok and constants is not None and closed_traj is not None:
        inequalities.append(check_dini_h(open_traj, constants))
        inequalities.append(check_dini_c(open_traj, constants=constants))
        inequalities.append(check_dini_c(closed_traj, constants=constants))
        inequalities.append(check_window_bounds(open_traj, constants))
        inequalities.append(check_window_bounds(closed_traj, constants))
        inequalities.append(check_contraction(closed_traj, constants))
        if constants.applicable:
            # Sensitivity run at the most conservative chi.
            arcs_constants = compute_constants(scenario, S, constants.d0, chi=1.0)
            rep = check_contraction(closed_traj, arcs_constants)
            rep.name = "contraction_chi1"
            inequalities.append(rep)

    verdict = (structural.ok and bool(inequalities)
               and all(r.ok for r in inequalities)
               and final_error is not None
               and final_error <= final_error_threshold)

    return CertificationReport(structural=structural, constants=constants,
                               inequalities=inequalities,
                               final_error=final_error,
                               final_error_threshold=final_error_threshold,
                               convergence_verdict=verdict,
                               open_trajectory=open_traj,
                               closed_trajectory=closed_traj)
