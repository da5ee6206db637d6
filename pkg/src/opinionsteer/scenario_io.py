"""Scenario files, trajectory CSV output, and report documents.

Scenario files are YAML with 1-based agent indices (converted to 0-based
internally).  An edge entry ``{from: j, to: i, weight: w}`` sets a_ij = w,
i.e. the arc carries information from agent ``from`` to agent ``to``.
"""

from __future__ import annotations

import math
from importlib import resources
from typing import Optional

import yaml

from .certify import CertificationReport, TheoremConstants
from .dynamics import GainSchedule, Scenario, Trajectory
from .errors import ScenarioError
from .graphs import GraphSnapshot, SwitchingSchedule

_ROTATIONS = ("cyclic", "rotating-cyclic")


def bundled_scenario_path() -> str:
    """Path of the bundled 8-agent rotating-cyclic fixture."""
    return str(resources.files("opinionsteer").joinpath("data/rotating8.yaml"))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _require(data: dict, key: str, typ, ctx: str):
    if key not in data:
        raise ScenarioError(f"{ctx}{key}", "missing required key")
    val = data[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, typ):
        raise ScenarioError(f"{ctx}{key}", f"expected {typ.__name__}")
    return val


def _positive(val, key):
    if not (isinstance(val, (int, float)) and val > 0 and math.isfinite(val)):
        raise ScenarioError(key, "must be a positive finite number")
    return float(val)


def _real_vector(data: dict, key: str, n: int) -> tuple[float, ...]:
    vec = _require(data, key, list, "")
    if len(vec) != n:
        raise ScenarioError(key, f"expected {n} entries, got {len(vec)}")
    out = []
    for k, v in enumerate(vec):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or \
                not math.isfinite(float(v)):
            raise ScenarioError(f"{key}[{k}]", "entries must be finite numbers")
        out.append(float(v))
    return tuple(out)


def _parse_graph(gdata: dict, n: int, ctx: str) -> tuple[float, GraphSnapshot]:
    dwell = _positive(_require(gdata, "dwell", (int, float), ctx), f"{ctx}dwell")
    edges = _require(gdata, "edges", list, ctx)
    weights: dict[tuple[int, int], float] = {}
    for k, edge in enumerate(edges):
        ectx = f"{ctx}edges[{k}]"
        if not isinstance(edge, dict):
            raise ScenarioError(ectx, "expected a mapping with from/to/weight")
        src = _require(edge, "from", int, ectx + ".")
        dst = _require(edge, "to", int, ectx + ".")
        w = _require(edge, "weight", (int, float), ectx + ".")
        if not (1 <= src <= n and 1 <= dst <= n):
            raise ScenarioError(ectx, f"agent indices must lie in 1..{n}")
        if src == dst:
            raise ScenarioError(ectx, "self-loops are not allowed (A2)")
        if not math.isfinite(float(w)):
            raise ScenarioError(ectx, "weight must be finite")
        key = (dst - 1, src - 1)  # a[to][from]
        if key in weights:
            raise ScenarioError(ectx, f"duplicate edge {src}->{dst}")
        weights[key] = float(w)
    return dwell, GraphSnapshot(n_agents=n, weights=weights)


def _parse_gains(gdata, n: int, root_set: Optional[tuple[int, ...]]
                 ) -> GainSchedule:
    if not isinstance(gdata, dict):
        raise ScenarioError("gains", "expected a mapping")
    kappa = _positive(_require(gdata, "kappa_lower", (int, float), "gains."),
                      "gains.kappa_lower")
    if "per_agent" in gdata:
        vec = gdata["per_agent"]
        if not isinstance(vec, list) or len(vec) != n:
            raise ScenarioError("gains.per_agent", f"expected {n} entries")
        gains = tuple(float(v) for v in vec)
    elif "set" in gdata:
        if gdata["set"] != "S":
            raise ScenarioError("gains.set", 'only the root-set shorthand "S" '
                                "is supported")
        if root_set is None:
            raise ScenarioError("gains.set", "the root-set shorthand needs an "
                                "explicit root_set entry")
        value = float(_require(gdata, "value", (int, float), "gains."))
        gains = tuple(value if i in set(root_set) else 0.0 for i in range(n))
    else:
        raise ScenarioError("gains", "need either per_agent or {set, value}")
    for i, k in enumerate(gains):
        if k < 0 or not math.isfinite(k):
            raise ScenarioError(f"gains[{i + 1}]",
                                "gains must be finite and nonnegative")
    sched = GainSchedule(gains=gains, kappa_lower=kappa)
    if root_set is not None:
        bad = sched.violations(root_set)
        if bad:
            raise ScenarioError("gains", "; ".join(bad))
    return sched


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario document must be a mapping")
    n = _require(data, "agents", int, "")
    if n < 2:
        raise ScenarioError("agents", "need at least 2 agents")
    delta = _positive(_require(data, "delta", (int, float), ""), "delta")
    window = _positive(_require(data, "window_T", (int, float), ""), "window_T")
    horizon = _positive(_require(data, "horizon", (int, float), ""), "horizon")
    dt = _positive(_require(data, "dt", (int, float), ""), "dt")
    x0 = _real_vector(data, "x0", n)
    x_target = _real_vector(data, "x_target", n)

    root_set = None
    if data.get("root_set") is not None:
        rs = data["root_set"]
        if not isinstance(rs, list) or not rs:
            raise ScenarioError("root_set", "expected a nonempty list")
        seen = set()
        for v in rs:
            if not isinstance(v, int) or not (1 <= v <= n):
                raise ScenarioError("root_set", f"indices must lie in 1..{n}")
            if v in seen:
                raise ScenarioError("root_set", f"duplicate index {v}")
            seen.add(v)
        root_set = tuple(sorted(v - 1 for v in rs))

    gains = _parse_gains(_require(data, "gains", dict, ""), n, root_set)

    sdata = _require(data, "schedule", dict, "")
    rotation = _require(sdata, "rotation", str, "schedule.")
    if rotation not in _ROTATIONS:
        raise ScenarioError("schedule.rotation",
                            f"must be one of {list(_ROTATIONS)}")
    graphs = _require(sdata, "graphs", list, "schedule.")
    if not graphs:
        raise ScenarioError("schedule.graphs", "need at least one graph")
    dwells, snaps = [], []
    for k, g in enumerate(graphs):
        dwell, snap = _parse_graph(g, n, f"schedule.graphs[{k}].")
        dwells.append(dwell)
        snaps.append(snap)
    schedule = SwitchingSchedule(snapshots=snaps, dwell_times=dwells,
                                 rotating=(rotation == "rotating-cyclic"),
                                 t_start=0.0)

    scenario = Scenario(schedule=schedule, delta=delta, window=window,
                        x0=x0, x_target=x_target, gains=gains,
                        root_set=root_set, horizon=horizon, dt=dt)
    scenario.validate()
    return scenario


def parse_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ScenarioError(path, "file not found")
    except yaml.YAMLError as exc:
        raise ScenarioError(path, f"malformed YAML: {exc}")
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def scenario_to_dict(scenario: Scenario) -> dict:
    sched = scenario.schedule
    graphs = []
    for snap, dwell in zip(sched.snapshots, sched.dwell_times):
        edges = [
            {"from": j + 1, "to": i + 1, "weight": w}
            for (i, j), w in sorted(snap.weights.items())
        ]
        graphs.append({"dwell": dwell, "edges": edges})
    data = {
        "agents": scenario.n_agents,
        "delta": scenario.delta,
        "window_T": scenario.window,
        "horizon": scenario.horizon,
        "dt": scenario.dt,
        "x0": list(scenario.x0),
        "x_target": list(scenario.x_target),
        "gains": {"kappa_lower": scenario.gains.kappa_lower,
                  "per_agent": list(scenario.gains.gains)},
        "schedule": {"rotation": "rotating-cyclic" if sched.rotating
                     else "cyclic",
                     "graphs": graphs},
    }
    if scenario.root_set is not None:
        data["root_set"] = [v + 1 for v in scenario.root_set]
    return data


def serialize_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# Trajectory CSV
# ---------------------------------------------------------------------------

def csv_header(n_agents: int) -> str:
    cols = ["t"]
    cols += [f"x_{i + 1}" for i in range(n_agents)]
    cols += [f"u_{i + 1}" for i in range(n_agents)]
    cols += ["h", "c", "h_e", "c_e"]
    return ",".join(cols)


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """Column contract: t, x_1..x_N, u_1..u_N, h, c, h_e, c_e with 17
    significant digits."""
    n = traj.states.shape[1]
    with open(path, "w") as fh:
        fh.write(csv_header(n) + "\n")
        for k in range(len(traj.times)):
            row = [traj.times[k], *traj.states[k], *traj.controls[k],
                   traj.h[k], traj.c[k], traj.h_e[k], traj.c_e[k]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Report documents
# ---------------------------------------------------------------------------

def _fmt_nodes(nodes) -> str:
    if nodes is None:
        return "-"
    return "{" + ",".join(str(v + 1) for v in sorted(nodes)) + "}"


def _constants_lines(c: TheoremConstants) -> list[str]:
    lines = [
        f"M0 = {c.M0:.17g}",
        f"N = {c.N}",
        f"N_s = {c.N_s}",
        f"M_s = {c.M_s:.17g}",
        f"d0 = {c.d0}",
        f"T = {c.T:.17g}",
        f"K0 = {c.K0:.17g}",
        f"kappa_lower = {c.kappa_lower:.17g}",
        f"beta_tilde = {c.beta_tilde:.17g}",
        f"applicable = {str(c.applicable).lower()}",
    ]
    if c.applicable:
        lines += [
            f"zeta = {c.zeta:.17g} (log {c.log_zeta:.6g})",
            f"xi0 = {c.xi0:.17g} (log {c.log_xi0:.6g})",
            f"chi = {c.chi:.17g} (log {c.log_chi:.6g})",
            f"alpha1 = {c.alpha1:.17g} (log(1-alpha1) {c.log_one_minus_alpha1:.6g})",
            f"alpha2 = {c.alpha2:.17g} (log {c.log_alpha2:.6g})",
        ]
    return lines


def report_to_text(report: CertificationReport) -> str:
    """Render the certificate as the documented sectioned text format."""
    s = report.structural
    conn = s.connectivity
    lines = ["[structural]"]
    lines.append("connectivity = " + ("holds" if conn.holds
                                      else f"fails-at {conn.fails_at:.17g}"))
    lines.append(f"fixed_root_set = {str(conn.fixed).lower()}")
    lines.append(f"root_set = {_fmt_nodes(s.root_set)}")
    lines.append(f"root_set_mismatch = {str(s.root_set_mismatch).lower()}")
    if s.balance is not None:
        lines.append("balance = " + ("balanced" if s.balance.balanced
                                     else "unbalanced"))
        if s.balance.bipartition is not None:
            lines.append(f"bipartition = {_fmt_nodes(s.balance.bipartition.part1)}"
                         f" | {_fmt_nodes(s.balance.bipartition.part2)}")
            lines.append(f"bipartition_unique = {str(s.balance.unique).lower()}")
    else:
        lines.append("balance = not-evaluated")
    if s.gain_violations:
        for v in s.gain_violations:
            lines.append(f"gain_violation = {v}")
    else:
        lines.append("gains = ok")

    lines.append("")
    lines.append("[constants]")
    if report.constants is not None:
        lines += _constants_lines(report.constants)
    else:
        lines.append("not-computed")

    lines.append("")
    lines.append("[inequalities]")
    if report.inequalities:
        lines.append("name samples violations worst_margin tolerance")
        for r in report.inequalities:
            lines.append(f"{r.name} {r.samples_checked} {r.violations} "
                         f"{r.worst_margin:.17g} {r.tolerance_used:.17g}")
            if "window_ratios" in r.details:
                ratios = " ".join(f"{v:.6g}" for v in r.details["window_ratios"])
                lines.append(f"  {r.name}.window_ratios = {ratios}")
    else:
        lines.append("skipped")

    lines.append("")
    lines.append("[verdict]")
    if report.final_error is not None:
        lines.append(f"final_error = {report.final_error:.17g}")
        lines.append(f"final_error_threshold = {report.final_error_threshold:.17g}")
    lines.append("convergence = " + ("pass" if report.convergence_verdict
                                     else "fail"))
    return "\n".join(lines) + "\n"


def analysis_to_text(conn, balance, d0, constants) -> str:
    """Render the structural analysis document."""
    lines = ["[windows]"]
    distinct: dict = {}
    for t, rs in conn.window_root_sets:
        key = _fmt_nodes(rs) if rs is not None else "none"
        distinct.setdefault(key, []).append(t)
    for key, ts in distinct.items():
        lines.append(f"root_set {key} in {len(ts)} window(s), "
                     f"first start t = {ts[0]:.17g}")
    lines.append("connectivity = " + ("holds" if conn.holds
                                      else f"fails-at {conn.fails_at:.17g}"))
    lines.append(f"fixed_root_set = {str(conn.fixed).lower()}")

    lines.append("")
    lines.append("[balance]")
    if balance is not None:
        lines.append("balance = " + ("balanced" if balance.balanced
                                     else "unbalanced"))
        if balance.bipartition is not None:
            lines.append(f"bipartition = {_fmt_nodes(balance.bipartition.part1)}"
                         f" | {_fmt_nodes(balance.bipartition.part2)}")
            lines.append(f"bipartition_unique = {str(balance.unique).lower()}")
    else:
        lines.append("not-evaluated")

    lines.append("")
    lines.append("[constants]")
    if constants is not None:
        lines += _constants_lines(constants)
    else:
        lines.append(f"d0 = {d0 if d0 is not None else '-'}")
        lines.append("not-computed")
    return "\n".join(lines) + "\n"
