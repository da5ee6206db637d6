"""Signed time-varying digraphs and their structural machinery.

Weight convention: ``weights[(i, j)]`` is a_ij, the influence of agent j on
agent i, i.e. the directed arc j -> i.  Positive weights are cooperative,
negative antagonistic.  Arcs handed to the reachability helpers are stored in
information-flow direction as ``(source, target)`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapacityError, GraphDomainError

_TIME_EPS = 1e-9

# Exhaustive longest-simple-path search refuses anything bigger than this.
DEFAULT_PATH_SEARCH_NODE_LIMIT = 20


# ---------------------------------------------------------------------------
# Core data types
# ---------------------------------------------------------------------------

@dataclass
class GraphSnapshot:
    """One signed weighted adjacency configuration.

    Diagonal entries are forbidden (agents do not influence themselves) and
    zero entries are dropped: an absent key means a_ij = 0.
    """

    n_agents: int
    weights: dict[tuple[int, int], float]

    def __post_init__(self):
        if self.n_agents < 2:
            raise GraphDomainError("a snapshot needs at least 2 agents")
        cleaned = {}
        for (i, j), w in self.weights.items():
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise GraphDomainError(f"weight index ({i}, {j}) out of range")
            if i == j and w != 0.0:
                raise GraphDomainError(f"self-influence a[{i}][{i}] must be zero")
            if not math.isfinite(w):
                raise GraphDomainError(f"weight a[{i}][{j}] is not finite")
            if w != 0.0:
                cleaned[(i, j)] = float(w)
        self.weights = cleaned

    def laplacian(self) -> np.ndarray:
        """Signed Laplacian: L_ii = sum_k |a_ik|, L_ij = -a_ij for i != j."""
        n = self.n_agents
        lap = np.zeros((n, n))
        for (i, j), w in self.weights.items():
            lap[i, i] += abs(w)
            lap[i, j] -= w
        return lap

    def max_abs_weight(self) -> float:
        return max((abs(w) for w in self.weights.values()), default=0.0)

    def arcs(self) -> set[tuple[int, int]]:
        """Arcs in flow direction (source, target)."""
        return {(j, i) for (i, j) in self.weights}


@dataclass
class SwitchingSchedule:
    """Piecewise-constant switching between snapshots.

    Plain cyclic repetition plays the snapshots in order forever.  The
    rotating-cyclic pattern advances the starting snapshot by one after each
    full pass, so with m snapshots the schedule has period m * sum(dwells).
    Dwell times travel with their snapshot, not with the slot position.
    """

    snapshots: Sequence[GraphSnapshot]
    dwell_times: Sequence[float]
    rotating: bool = False
    t_start: float = 0.0

    def __post_init__(self):
        if not self.snapshots:
            raise GraphDomainError("schedule needs at least one snapshot")
        if len(self.snapshots) != len(self.dwell_times):
            raise GraphDomainError("one dwell time per snapshot required")
        n = self.snapshots[0].n_agents
        for snap in self.snapshots:
            if snap.n_agents != n:
                raise GraphDomainError("all snapshots must share n_agents")
        for d in self.dwell_times:
            if not (d > 0 and math.isfinite(d)):
                raise GraphDomainError("dwell times must be positive and finite")
        self.snapshots = list(self.snapshots)
        self.dwell_times = [float(d) for d in self.dwell_times]

    @property
    def n_agents(self) -> int:
        return self.snapshots[0].n_agents

    @property
    def pass_duration(self) -> float:
        return sum(self.dwell_times)

    @property
    def period(self) -> float:
        if self.rotating:
            return len(self.snapshots) * self.pass_duration
        return self.pass_duration

    @property
    def min_dwell(self) -> float:
        return min(self.dwell_times)

    def max_abs_weight(self) -> float:
        """M0: finite bound on |a_ij| over all snapshots (Assumption A3
        witness for piecewise-constant schedules)."""
        return max(s.max_abs_weight() for s in self.snapshots)

    def _pass_order(self, pass_index: int) -> list[int]:
        m = len(self.snapshots)
        start = pass_index % m if self.rotating else 0
        return [(start + k) % m for k in range(m)]

    def snapshot_index_at(self, t: float) -> int:
        """Index of the snapshot active at time t (right-continuous)."""
        if t < self.t_start - _TIME_EPS:
            raise GraphDomainError(f"t={t:g} is before schedule start {self.t_start:g}")
        big = self.pass_duration
        rel = max(0.0, t - self.t_start)
        p = int(math.floor(rel / big + _TIME_EPS))
        within = rel - p * big
        if within >= big - _TIME_EPS:
            p += 1
            within = 0.0
        acc = 0.0
        order = self._pass_order(p)
        for idx in order:
            acc += self.dwell_times[idx]
            if within < acc - _TIME_EPS:
                return idx
        return order[-1]

    def segments(self, t1: float, t2: float) -> Iterator[tuple[float, float, int]]:
        """Yield (start, end, snapshot_index) covering [t1, t2) in order."""
        if t2 <= t1:
            raise GraphDomainError(f"empty or reversed interval [{t1:g}, {t2:g})")
        if t1 < self.t_start - _TIME_EPS:
            raise GraphDomainError(f"t={t1:g} is before schedule start {self.t_start:g}")
        big = self.pass_duration
        p = int(math.floor(max(0.0, t1 - self.t_start) / big + _TIME_EPS))
        t_slot = self.t_start + p * big
        while t_slot < t2 - _TIME_EPS:
            for idx in self._pass_order(p):
                a = t_slot
                b = t_slot + self.dwell_times[idx]
                if b > t1 + _TIME_EPS and a < t2 - _TIME_EPS:
                    yield (max(a, t1), min(b, t2), idx)
                t_slot = b
                if t_slot >= t2 - _TIME_EPS:
                    return
            p += 1

    def switch_instants(self, t1: float, t2: float) -> list[float]:
        """Segment boundaries strictly inside (t1, t2)."""
        out = []
        for _, b, _ in self.segments(t1, t2):
            if b < t2 - _TIME_EPS:
                out.append(b)
        return out


@dataclass
class UnionGraph:
    """All arcs whose absolute-weight integral clears the delta threshold on
    an interval, with the signs each arc exhibited there."""

    interval: tuple[float, float]
    arcs: set[tuple[int, int]]                      # (source, target)
    arc_signs: dict[tuple[int, int], frozenset]     # signs among active segments


@dataclass
class Condensation:
    components: list[frozenset]
    dag_edges: set[tuple[int, int]]
    component_of: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Bipartition:
    part1: frozenset
    part2: frozenset


@dataclass
class BalanceVerdict:
    balanced: bool
    bipartition: Optional[Bipartition]
    unique: bool


@dataclass
class ConnectivityVerdict:
    holds: bool
    fails_at: Optional[float]
    fixed: bool
    root_set: Optional[frozenset]
    window_root_sets: list


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def adjacency_at(schedule: SwitchingSchedule, t: float) -> GraphSnapshot:
    """Snapshot active at time t, right-continuous at switch instants."""
    return schedule.snapshots[schedule.snapshot_index_at(t)]


def laplacian_at(schedule: SwitchingSchedule, t: float) -> np.ndarray:
    return adjacency_at(schedule, t).laplacian()


def delta_arc_integral(schedule: SwitchingSchedule, i: int, j: int,
                       t1: float, t2: float) -> float:
    """Integral of |a_ij| over [t1, t2), exact for piecewise-constant weights."""
    total = 0.0
    for a, b, idx in schedule.segments(t1, t2):
        w = schedule.snapshots[idx].weights.get((i, j), 0.0)
        if w != 0.0:
            total += abs(w) * (b - a)
    return total


def union_graph(schedule: SwitchingSchedule, delta: float,
                t1: float, t2: float) -> UnionGraph:
    """Arcs (src, dst) with integral |a| >= delta * (t2 - t1) on [t1, t2)."""
    if delta <= 0:
        raise GraphDomainError("delta must be positive")
    integrals: dict[tuple[int, int], float] = {}
    signs: dict[tuple[int, int], set] = {}
    for a, b, idx in schedule.segments(t1, t2):
        for (i, j), w in schedule.snapshots[idx].weights.items():
            key = (i, j)
            integrals[key] = integrals.get(key, 0.0) + abs(w) * (b - a)
            signs.setdefault(key, set()).add(1 if w > 0 else -1)
    threshold = delta * (t2 - t1)
    arcs = set()
    arc_signs = {}
    for (i, j), val in integrals.items():
        if val >= threshold - 1e-12 * max(1.0, threshold):
            arcs.add((j, i))
            arc_signs[(j, i)] = frozenset(signs[(i, j)])
    return UnionGraph(interval=(t1, t2), arcs=arcs, arc_signs=arc_signs)


def condensation(arcs: set[tuple[int, int]], n: int) -> Condensation:
    """Strongly connected components (iterative Tarjan) and the DAG between
    them for a digraph on nodes 0..n-1 with arcs (source, target)."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for (u, v) in arcs:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphDomainError(f"arc ({u}, {v}) references a node outside [0, {n})")
        adj[u].append(v)

    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components: list[frozenset] = []
    component_of: dict[int, int] = {}
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(adj[v]):
                w = adj[v][pi]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                cid = len(components)
                components.append(frozenset(comp))
                for w in comp:
                    component_of[w] = cid
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])

    dag_edges = {
        (component_of[u], component_of[v])
        for (u, v) in arcs
        if component_of[u] != component_of[v]
    }
    return Condensation(components=components, dag_edges=dag_edges,
                        component_of=component_of)


def root_set(cond: Condensation) -> Optional[frozenset]:
    """Node set of the unique source component, or None.

    A single source component of the condensation DAG necessarily reaches
    every node, so its members are exactly the root nodes.
    """
    n_comp = len(cond.components)
    has_incoming = [False] * n_comp
    for (_, dst) in cond.dag_edges:
        has_incoming[dst] = True
    sources = [c for c in range(n_comp) if not has_incoming[c]]
    if len(sources) != 1:
        return None
    return cond.components[sources[0]]


def check_uniform_qs_connectivity(schedule: SwitchingSchedule, delta: float,
                                  T: float, starts_per_dwell: int = 10
                                  ) -> ConnectivityVerdict:
    """Evaluate rooted union graphs on windows [t, t+T) across one period.

    Window starts are every switch instant plus a uniform grid with
    ``starts_per_dwell`` samples per shortest dwell; the delta-arc integral is
    piecewise-linear in the start, so violations between samples stay small.
    Reports whether every window yields a root set and whether that root set
    is one fixed S throughout.
    """
    if delta <= 0 or T <= 0:
        raise GraphDomainError("delta and T must be positive")
    t0 = schedule.t_start
    period = schedule.period
    n = schedule.n_agents

    starts = {t0}
    starts.update(schedule.switch_instants(t0, t0 + period))
    step = schedule.min_dwell / max(1, starts_per_dwell)
    k = 0
    while k * step < period - _TIME_EPS:
        starts.add(t0 + k * step)
        k += 1

    window_root_sets = []
    common: Optional[frozenset] = None
    fixed = True
    for t in sorted(starts):
        ug = union_graph(schedule, delta, t, t + T)
        rs = root_set(condensation(ug.arcs, n))
        window_root_sets.append((t, rs))
        if rs is None:
            return ConnectivityVerdict(holds=False, fails_at=t, fixed=False,
                                       root_set=None,
                                       window_root_sets=window_root_sets)
        if common is None:
            common = rs
        elif rs != common:
            fixed = False
    return ConnectivityVerdict(holds=True, fails_at=None, fixed=fixed,
                               root_set=common, window_root_sets=window_root_sets)


class _ParityDSU:
    """Disjoint-set union where each node carries a parity bit relative to
    its component root: parity 0 = same side, 1 = opposite side."""

    def __init__(self, nodes):
        self.parent = {v: v for v in nodes}
        self.parity = {v: 0 for v in nodes}
        self.rank = {v: 0 for v in nodes}

    def find(self, v):
        path = []
        while self.parent[v] != v:
            path.append(v)
            v = self.parent[v]
        root = v
        p = 0
        for u in reversed(path):
            p ^= self.parity[u]
            self.parent[u] = root
            self.parity[u] = p
        return root

    def parity_to_root(self, v):
        self.find(v)
        return self.parity[v]

    def union(self, a, b, rel):
        """Impose parity(a) xor parity(b) == rel.  Returns False on conflict."""
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.parity[a], self.parity[b]
        if ra == rb:
            return (pa ^ pb) == rel
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
            pa, pb = pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ rel
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def check_persistent_balance(schedule: SwitchingSchedule, delta: float,
                             S: set[int]) -> BalanceVerdict:
    """Check that one bipartition of S is consistent with every snapshot.

    Every nonzero weight among S-nodes in any snapshot imposes a parity
    constraint: positive -> same part, negative -> opposite parts.  Zero
    segments impose nothing.  A consistent but disconnected constraint graph
    is reported balanced with ``unique=False``.
    """
    if not S:
        raise GraphDomainError("S must be nonempty")
    n = schedule.n_agents
    S = set(S)
    if any(not (0 <= v < n) for v in S):
        raise GraphDomainError("S is not a subset of the node set")

    dsu = _ParityDSU(S)
    constrained_pairs = set()
    for snap in schedule.snapshots:
        for (i, j), w in snap.weights.items():
            if i in S and j in S:
                rel = 0 if w > 0 else 1
                if not dsu.union(i, j, rel):
                    return BalanceVerdict(balanced=False, bipartition=None,
                                          unique=False)
                constrained_pairs.add((min(i, j), max(i, j)))

    roots = {dsu.find(v) for v in S}
    unique = len(roots) <= 1

    # Orient so that part1 contains the smallest node of S.
    anchor = min(S)
    anchor_parity = dsu.parity_to_root(anchor)
    anchor_root = dsu.find(anchor)
    part1, part2 = set(), set()
    for v in S:
        p = dsu.parity_to_root(v)
        if dsu.find(v) == anchor_root:
            side = p ^ anchor_parity
        else:
            side = p  # arbitrary orientation for other components
        (part1 if side == 0 else part2).add(v)
    return BalanceVerdict(balanced=True,
                          bipartition=Bipartition(frozenset(part1), frozenset(part2)),
                          unique=unique)


def longest_path_from_roots(arcs: set[tuple[int, int]], S: set[int],
                            nodes: Optional[set[int]] = None,
                            max_nodes: int = DEFAULT_PATH_SEARCH_NODE_LIMIT) -> int:
    """Longest simple-path length from any node of S, by exhaustive DFS.

    Longest simple path is NP-hard in general, so the search refuses inputs
    above ``max_nodes``.  Every node must be reachable from S.
    """
    if not S:
        raise GraphDomainError("S must be nonempty")
    if nodes is None:
        nodes = set(S)
        for (u, v) in arcs:
            nodes.add(u)
            nodes.add(v)
    else:
        nodes = set(nodes) | set(S)
    if len(nodes) > max_nodes:
        raise CapacityError(
            f"{len(nodes)} nodes exceeds the exhaustive-search limit {max_nodes}")

    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for (u, v) in arcs:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, [])

    reached = set(S)
    frontier = list(S)
    while frontier:
        u = frontier.pop()
        for v in adj.get(u, []):
            if v not in reached:
                reached.add(v)
                frontier.append(v)
    missing = nodes - reached
    if missing:
        raise GraphDomainError(f"nodes {sorted(missing)} unreachable from S")

    best = 0
    def dfs(v, visited, length):
        nonlocal best
        if length > best:
            best = length
        for w in adj.get(v, []):
            if w not in visited:
                visited.add(w)
                dfs(w, visited, length + 1)
                visited.remove(w)

    for s in S:
        dfs(s, {s}, 0)
    return best
