"""Radial power-flow solver for one quasi-static time step.

The solver is the current-summation backward/forward sweep written in its
compact matrix form. For a radial network the two sweeps collapse to one
fixed-point iteration

    I = conj(S / V)          (backward: load currents at present voltages)
    V = V0 - M @ I           (forward: slack voltage minus path voltage drops)

where M[i, j] is the impedance shared by the slack paths of nodes i and j.
Loads are constant power. Voltages are phase quantities per-unit on the
feeder base voltage; currents are per-phase amperes; household power is
divided over the three phases of the balanced equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import acos, tan

import numpy as np

from .feeder import FeederModel

DEFAULT_BASELINE_POWER_FACTOR = 0.95


class PowerFlowError(RuntimeError):
    """Raised for solver failures that the caller cannot interpret as data."""


class VoltageCollapseError(PowerFlowError):
    """Any node magnitude fell below the collapse floor during iteration."""

    def __init__(self, min_voltage_pu: float, iteration: int, step: int | None = None):
        self.min_voltage_pu = min_voltage_pu
        self.iteration = iteration
        self.step = step
        at_step = f" at step {step}" if step is not None else ""
        super().__init__(
            f"voltage collapse{at_step}: |V| reached {min_voltage_pu:.3f} pu "
            f"in iteration {iteration}"
        )


@dataclass(frozen=True)
class PowerFlowOptions:
    """Solver settings; defaults suit LV feeders at 15-minute resolution."""

    tolerance_pu: float = 1e-8
    max_iterations: int = 50
    collapse_floor_pu: float = 0.5


@dataclass
class InjectionSet:
    """Per-household power draw for one step (baseline plus EV charging).

    Active power must be non-negative: the model covers loads only.
    Reactive power defaults to zero.
    """

    households: tuple[str, ...]
    p_kw: np.ndarray
    q_kvar: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.p_kw = np.asarray(self.p_kw, dtype=float)
        if self.q_kvar is None:
            self.q_kvar = np.zeros_like(self.p_kw)
        self.q_kvar = np.asarray(self.q_kvar, dtype=float)
        if self.p_kw.shape != (len(self.households),) or self.q_kvar.shape != (
            len(self.households),
        ):
            raise ValueError("injection arrays must have one entry per household")
        if np.any(self.p_kw < 0):
            raise ValueError("active injections must be >= 0 (loads only)")


def injections_from_loads(
    households: tuple[str, ...],
    baseline_kw: np.ndarray,
    ev_kw: np.ndarray,
    baseline_power_factor: float = DEFAULT_BASELINE_POWER_FACTOR,
) -> InjectionSet:
    """Combine baseline demand (at a fixed lagging power factor) with EV
    charging (unity power factor) into one injection set."""
    baseline_kw = np.asarray(baseline_kw, dtype=float)
    ev_kw = np.asarray(ev_kw, dtype=float)
    q = baseline_kw * tan(acos(baseline_power_factor))
    return InjectionSet(households=households, p_kw=baseline_kw + ev_kw, q_kvar=q)


@dataclass
class PowerFlowSolution:
    """Solved state of the feeder for one step.

    Attributes:
        node_ids: node order for ``voltage_pu`` (same as the feeder).
        voltage_pu: voltage magnitude per node, slack pinned at 1.0.
        branch_current_a: per-phase current magnitude per branch, in the
            feeder's branch order.
        slack_p_kw / slack_q_kvar: three-phase power supplied at the slack.
        converged: False when the sweep hit the iteration cap.
        iterations: sweeps performed.
        residual_pu: last max per-node voltage change between sweeps.
    """

    node_ids: tuple[str, ...]
    voltage_pu: np.ndarray
    branch_current_a: np.ndarray
    slack_p_kw: float
    slack_q_kvar: float
    converged: bool
    iterations: int
    residual_pu: float

    @property
    def slack_kva(self) -> float:
        return float(np.hypot(self.slack_p_kw, self.slack_q_kvar))

    def voltage_of(self, node_id: str) -> float:
        return float(self.voltage_pu[self.node_ids.index(node_id)])


@dataclass
class _CompiledFeeder:
    """Feeder reduced to index arrays and the path-impedance matrix."""

    node_ids: tuple[str, ...]
    order: list[str]                 # non-slack nodes, parents before children
    node_pos: dict[str, int]         # node id -> index into ``order``
    impedance: np.ndarray            # (m, m) complex shared-path matrix, ohm
    path_mask: np.ndarray            # (m, m) bool, path_mask[i, b]: branch b on path of i
    branch_of_child: np.ndarray      # feeder branch order -> child-node index
    house_idx: np.ndarray            # household -> index into ``order``
    voltage_slot: np.ndarray         # ``order`` -> index into feeder.node_ids


@lru_cache(maxsize=32)
def _compile(feeder: FeederModel) -> _CompiledFeeder:
    from .feeder import _tree_index

    parent = _tree_index(feeder)
    slack = feeder.slack_id

    order: list[str] = []
    frontier = [slack]
    children: dict[str, list[str]] = {n.id: [] for n in feeder.nodes}
    for child, (up, _) in parent.items():
        children[up].append(child)
    while frontier:
        current = frontier.pop(0)
        if current != slack:
            order.append(current)
        frontier.extend(sorted(children[current], key=feeder.node_ids.index))
    node_pos = {n: i for i, n in enumerate(order)}

    m = len(order)
    path_mask = np.zeros((m, m), dtype=bool)
    for node in order:
        i = node_pos[node]
        current = node
        while current != slack:
            path_mask[i, node_pos[current]] = True
            current = parent[current][0]

    z = np.array(
        [complex(parent[n][1].r_ohm, parent[n][1].x_ohm) for n in order],
        dtype=complex,
    )
    impedance = (path_mask * z[np.newaxis, :]) @ path_mask.T.astype(float)

    branch_key = {}
    for node in order:
        b = parent[node][1]
        branch_key[(b.from_node, b.to_node, b.r_ohm, b.x_ohm, b.ampacity_a)] = node_pos[node]
    branch_of_child = np.array(
        [
            branch_key[(b.from_node, b.to_node, b.r_ohm, b.x_ohm, b.ampacity_a)]
            for b in feeder.branches
        ],
        dtype=int,
    )

    house_idx = np.array(
        [node_pos[feeder.household_node(h)] for h in feeder.household_ids], dtype=int
    )
    voltage_slot = np.array([feeder.node_ids.index(n) for n in order], dtype=int)
    return _CompiledFeeder(
        node_ids=feeder.node_ids,
        order=order,
        node_pos=node_pos,
        impedance=impedance,
        path_mask=path_mask,
        branch_of_child=branch_of_child,
        house_idx=house_idx,
        voltage_slot=voltage_slot,
    )


def solve(
    feeder: FeederModel,
    injections: InjectionSet,
    options: PowerFlowOptions = PowerFlowOptions(),
    _step: int | None = None,
) -> PowerFlowSolution:
    """Solve one step. Non-convergence is reported in the solution, voltage
    collapse below the floor raises ``VoltageCollapseError``."""
    comp = _compile(feeder)
    if injections.households != feeder.household_ids:
        raise ValueError("injections must cover the feeder households in order")

    v_base = feeder.base_voltage_v
    m = len(comp.order)

    # per-phase complex power per node, VA
    s_node = np.zeros(m, dtype=complex)
    np.add.at(
        s_node,
        comp.house_idx,
        (injections.p_kw + 1j * injections.q_kvar) * (1000.0 / 3.0),
    )

    v0 = complex(v_base, 0.0)
    v = np.full(m, v0, dtype=complex)
    converged = m == 0
    iterations = 0
    residual = 0.0 if m == 0 else np.inf
    i_node = np.zeros(m, dtype=complex)
    max_iter = options.max_iterations if m else 0
    for it in range(1, max_iter + 1):
        i_node = np.conj(s_node / v)
        v_new = v0 - comp.impedance @ i_node
        residual = float(np.max(np.abs(v_new - v))) / v_base
        v = v_new
        iterations = it
        low = float(np.min(np.abs(v))) / v_base
        if low < options.collapse_floor_pu:
            raise VoltageCollapseError(low, it, step=_step)
        if residual <= options.tolerance_pu:
            converged = True
            break

    i_branch = comp.path_mask.T.astype(float) @ i_node
    current_a = np.abs(i_branch)[comp.branch_of_child]

    s_slack_phase = v0 * np.conj(np.sum(i_node))
    slack_p_kw = 3.0 * s_slack_phase.real / 1000.0
    slack_q_kvar = 3.0 * s_slack_phase.imag / 1000.0

    voltage_pu = np.ones(len(comp.node_ids), dtype=float)
    voltage_pu[comp.voltage_slot] = np.abs(v) / v_base
    return PowerFlowSolution(
        node_ids=comp.node_ids,
        voltage_pu=voltage_pu,
        branch_current_a=current_a,
        slack_p_kw=slack_p_kw,
        slack_q_kvar=slack_q_kvar,
        converged=converged,
        iterations=iterations,
        residual_pu=residual,
    )


def solve_horizon(
    feeder: FeederModel,
    injections_per_step: list[InjectionSet],
    options: PowerFlowOptions = PowerFlowOptions(),
) -> list[PowerFlowSolution]:
    """Independent quasi-static solutions, one per step.

    Per-step failures carry the step index.
    """
    solutions = []
    for t, inj in enumerate(injections_per_step):
        solutions.append(solve(feeder, inj, options, _step=t))
    return solutions


def household_voltage_index(feeder: FeederModel) -> np.ndarray:
    """Index of each household's node in ``PowerFlowSolution.voltage_pu``."""
    return np.array(
        [feeder.node_ids.index(feeder.household_node(h)) for h in feeder.household_ids],
        dtype=int,
    )


def solution_table(solution: PowerFlowSolution, feeder: FeederModel) -> str:
    """Tabular dump of one solution for eyeballing during debugging."""
    lines = [
        f"converged={solution.converged} iterations={solution.iterations} "
        f"residual={solution.residual_pu:.3e} pu",
        f"slack: {solution.slack_p_kw:.3f} kW {solution.slack_q_kvar:.3f} kvar "
        f"({solution.slack_kva:.3f} kVA)",
        "node,voltage_pu",
    ]
    for n, node in enumerate(solution.node_ids):
        lines.append(f"{node},{solution.voltage_pu[n]:.6f}")
    lines.append("branch,current_a,ampacity_a")
    for b, branch in enumerate(feeder.branches):
        lines.append(
            f"{branch.from_node}->{branch.to_node},"
            f"{solution.branch_current_a[b]:.2f},{branch.ampacity_a:.0f}"
        )
    return "\n".join(lines) + "\n"
