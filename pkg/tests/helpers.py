"""Brute-force oracles and scenario builders shared by the test modules.

The oracles deliberately use different algorithms than the package:
reachability matrices instead of Tarjan, exhaustive bipartition enumeration
instead of parity union-find, subset dynamic programming instead of DFS for
longest simple paths, and the literal four-stage Runge-Kutta step instead of
the collapsed affine map.
"""

import itertools
import math

import numpy as np

from opinionsteer.dynamics import GainSchedule, Scenario
from opinionsteer.graphs import GraphSnapshot, SwitchingSchedule


# ---------------------------------------------------------------------------
# Graph oracles
# ---------------------------------------------------------------------------

def reach_matrix(n, arcs):
    """Boolean reachability closure via Floyd-Warshall."""
    R = np.eye(n, dtype=bool)
    for (u, v) in arcs:
        R[u, v] = True
    for k in range(n):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    return R


def oracle_sccs(n, arcs):
    """Strongly connected components from mutual reachability."""
    R = reach_matrix(n, arcs)
    mutual = R & R.T
    comps = set()
    for v in range(n):
        comps.add(frozenset(np.flatnonzero(mutual[v]).tolist()))
    return comps


def oracle_root_set(n, arcs):
    """Nodes that reach every node, or None when there are none."""
    R = reach_matrix(n, arcs)
    full = frozenset(np.flatnonzero(R.all(axis=1)).tolist())
    return full if full else None


def oracle_balance(constraints, S):
    """Exhaustive bipartition search.

    ``constraints`` is an iterable of (i, j, w) with i, j in S and w != 0;
    positive w forces i, j on the same side, negative on opposite sides.
    Returns (balanced, n_valid_assignments) where assignments fix the
    smallest node of S on side 0 to kill the global flip symmetry.
    """
    S = sorted(S)
    anchor, rest = S[0], S[1:]
    n_valid = 0
    for bits in itertools.product((0, 1), repeat=len(rest)):
        side = {anchor: 0}
        side.update(zip(rest, bits))
        ok = True
        for (i, j, w) in constraints:
            same = side[i] == side[j]
            if (w > 0) != same:
                ok = False
                break
        if ok:
            n_valid += 1
    return n_valid > 0, n_valid


def oracle_longest_path(arcs, S, nodes):
    """Longest simple path from S via dynamic programming over node subsets."""
    nodes = sorted(nodes)
    pos = {v: k for k, v in enumerate(nodes)}
    adj = {v: [] for v in nodes}
    for (u, v) in arcs:
        adj[u].append(v)
    best = 0
    frontier = {(1 << pos[s], s): 0 for s in S}
    while frontier:
        nxt = {}
        for (mask, v), length in frontier.items():
            for w in adj[v]:
                if mask & (1 << pos[w]):
                    continue
                key = (mask | (1 << pos[w]), w)
                cand = length + 1
                if cand > nxt.get(key, -1):
                    nxt[key] = cand
                best = max(best, cand)
        frontier = nxt
    return best


def random_signed_arcs(rng, n, p=0.3):
    """Random signed weight dict {(i, j): a_ij} with |a_ij| in [0.2, 1]."""
    weights = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                mag = 0.2 + 0.8 * rng.random()
                weights[(i, j)] = mag if rng.random() < 0.5 else -mag
    return weights


# ---------------------------------------------------------------------------
# Reference integrator
# ---------------------------------------------------------------------------

def rk4_reference_step(A, b, x, h):
    """Literal four-stage Runge-Kutta step for xdot = A x + b."""
    k1 = A @ x + b
    k2 = A @ (x + h / 2 * k1) + b
    k3 = A @ (x + h / 2 * k2) + b
    k4 = A @ (x + h * k3) + b
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# Two-agent closed forms
# ---------------------------------------------------------------------------

def two_agent_scenario(w=-3.0, kappa=2.0, x0=(5.0, 4.0), xd=(1.0, -2.0),
                       dt=1e-3, horizon=2.0, dwell=1.0, window=1.0,
                       delta=0.05):
    """Leader-follower pair: a single arc from agent 1 to agent 2."""
    snap = GraphSnapshot(n_agents=2, weights={(1, 0): w})
    sched = SwitchingSchedule(snapshots=[snap], dwell_times=[dwell])
    gains = GainSchedule(gains=(kappa, 0.0), kappa_lower=kappa)
    return Scenario(schedule=sched, delta=delta, window=window,
                    x0=tuple(x0), x_target=tuple(xd), gains=gains,
                    root_set=(0,), horizon=horizon, dt=dt)


def two_agent_closed_form(t, scenario):
    """Exact closed-loop solution of the leader-follower pair."""
    w = scenario.schedule.snapshots[0].weights[(1, 0)]
    kappa = scenario.gains.gains[0]
    aw = abs(w)
    xd = np.asarray(scenario.x_target)
    e0 = np.asarray(scenario.x0) - xd
    t = np.asarray(t, dtype=float)
    e1 = e0[0] * np.exp(-kappa * t)
    if math.isclose(aw, kappa):
        forced = w * e0[0] * t * np.exp(-aw * t)
    else:
        forced = w * e0[0] * (np.exp(-kappa * t) - np.exp(-aw * t)) / (aw - kappa)
    e2 = e0[1] * np.exp(-aw * t) + forced
    return np.stack([e1 + xd[0], e2 + xd[1]], axis=-1)


def two_agent_open_form(t, scenario):
    """Exact open-loop solution of the leader-follower pair."""
    w = scenario.schedule.snapshots[0].weights[(1, 0)]
    aw = abs(w)
    sg = math.copysign(1.0, w)
    x0 = np.asarray(scenario.x0)
    t = np.asarray(t, dtype=float)
    x1 = np.full_like(t, x0[0])
    x2 = sg * x0[0] + (x0[1] - sg * x0[0]) * np.exp(-aw * t)
    return np.stack([x1, x2], axis=-1)


# ---------------------------------------------------------------------------
# Scenario builders
# ---------------------------------------------------------------------------

def build_scenario(weight_dicts, dwells, n, rotating=False, delta=0.05,
                   window=None, x0=None, x_target=None, gains=None,
                   kappa_lower=0.6, root_set=None, horizon=None, dt=1e-3):
    snaps = [GraphSnapshot(n_agents=n, weights=dict(w)) for w in weight_dicts]
    sched = SwitchingSchedule(snapshots=snaps, dwell_times=list(dwells),
                              rotating=rotating)
    if window is None:
        window = sched.pass_duration
    if horizon is None:
        horizon = 3 * window
    if x0 is None:
        x0 = tuple(float(2 + i) for i in range(n))
    if x_target is None:
        x_target = tuple(0.0 for _ in range(n))
    if gains is None:
        S = root_set if root_set is not None else range(n)
        gains = tuple(kappa_lower if i in set(S) else 0.0 for i in range(n))
    return Scenario(schedule=sched, delta=delta, window=window, x0=tuple(x0),
                    x_target=tuple(x_target),
                    gains=GainSchedule(gains=gains, kappa_lower=kappa_lower),
                    root_set=root_set, horizon=horizon, dt=dt)
