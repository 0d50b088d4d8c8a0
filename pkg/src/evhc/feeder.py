"""Radial low-voltage feeder data model and file ingestion.

A feeder is a tree of nodes rooted at the slack node (the transformer LV
busbar, held at 1.0 pu). Branches carry cable impedance and ampacity,
households attach to non-slack nodes. The bundled example feeder has 19
nodes, 18 branches, 12 households and a 100 kVA transformer.

Electrical convention: the network is a balanced three-phase LV feeder
modelled as its single-phase equivalent. Node voltages are phase-to-neutral
magnitudes (per-unit on ``base_voltage_v``), branch currents are per-phase
amperes, and a household drawing P kW injects P/3 kW into the equivalent
phase. Transformer loading is reported as total three-phase apparent power.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

BUNDLED_FEEDER = "feeder_19node.yaml"
BUNDLED_PROFILES = "baseline_profiles.csv"


class FeederError(ValueError):
    """Raised on parse failures or feeder invariant violations."""


@dataclass(frozen=True)
class Node:
    """A feeder node; at most one node is the slack (transformer busbar)."""

    id: str
    is_slack: bool = False


@dataclass(frozen=True)
class Branch:
    """A cable segment between two nodes.

    Attributes:
        from_node, to_node: endpoint node ids (orientation as written in the
            source file; the tree orientation is derived from the slack).
        r_ohm, x_ohm: series impedance of the segment, ohms per phase.
        ampacity_a: thermal current rating, amperes per phase.
    """

    from_node: str
    to_node: str
    r_ohm: float
    x_ohm: float
    ampacity_a: float


@dataclass(frozen=True)
class Household:
    """A customer connection point: household id plus attachment node."""

    id: str
    node: str


@dataclass(frozen=True)
class FeederModel:
    """Validated radial feeder. Immutable; safe to share across runs."""

    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    households: tuple[Household, ...]
    transformer_kva: float
    base_voltage_v: float

    @property
    def slack_id(self) -> str:
        return next(n.id for n in self.nodes if n.is_slack)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def household_ids(self) -> tuple[str, ...]:
        return tuple(h.id for h in self.households)

    def household_node(self, household_id: str) -> str:
        for h in self.households:
            if h.id == household_id:
                return h.node
        raise FeederError(f"unknown household id: {household_id}")


@dataclass(frozen=True)
class BaselineLoadProfile:
    """Fixed (non-EV) demand of one household, kW per time step."""

    household: str
    power_kw: tuple[float, ...]


def _validate_topology(nodes: tuple[Node, ...], branches: tuple[Branch, ...]) -> None:
    ids = [n.id for n in nodes]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise FeederError(f"duplicate node ids: {sorted(dup)}")
    slacks = [n.id for n in nodes if n.is_slack]
    if len(slacks) != 1:
        raise FeederError(
            f"feeder must have exactly one slack node, found {len(slacks)}: {slacks}"
        )
    id_set = set(ids)
    for b in branches:
        for end in (b.from_node, b.to_node):
            if end not in id_set:
                raise FeederError(f"branch {b.from_node}-{b.to_node}: unknown node {end}")
        if b.r_ohm < 0 or b.x_ohm < 0:
            raise FeederError(f"branch {b.from_node}-{b.to_node}: negative impedance")
        if b.ampacity_a <= 0:
            raise FeederError(f"branch {b.from_node}-{b.to_node}: ampacity must be > 0")

    # BFS from the slack; an edge (other than the one we arrived through)
    # touching an already-visited node closes a cycle, and nodes never
    # reached are disconnected. Cycles are diagnosed before the branch-count
    # check so the offending branch gets named.
    adjacency: dict[str, list[tuple[str, int]]] = {i: [] for i in ids}
    for bi, b in enumerate(branches):
        adjacency[b.from_node].append((b.to_node, bi))
        adjacency[b.to_node].append((b.from_node, bi))
    entered_via: dict[str, int | None] = {slacks[0]: None}
    frontier = [slacks[0]]
    while frontier:
        current = frontier.pop(0)
        for neighbor, bi in adjacency[current]:
            if bi == entered_via[current]:
                continue
            if neighbor in entered_via:
                b = branches[bi]
                raise FeederError(f"branch {b.from_node}-{b.to_node} closes a cycle")
            entered_via[neighbor] = bi
            frontier.append(neighbor)

    if len(branches) != len(nodes) - 1:
        raise FeederError(
            f"radial feeder needs |branches| = |nodes| - 1, "
            f"got {len(branches)} branches for {len(nodes)} nodes"
        )
    missing = id_set - entered_via.keys()
    if missing:
        raise FeederError(f"nodes not connected to the slack: {sorted(missing)}")


def _validate(model: FeederModel) -> None:
    _validate_topology(model.nodes, model.branches)
    if model.transformer_kva <= 0:
        raise FeederError("transformer rating must be > 0 kVA")
    if model.base_voltage_v <= 0:
        raise FeederError("base voltage must be > 0 V")
    slack = model.slack_id
    node_set = set(model.node_ids)
    hids = [h.id for h in model.households]
    dup = {i for i in hids if hids.count(i) > 1}
    if dup:
        raise FeederError(f"duplicate household ids: {sorted(dup)}")
    for h in model.households:
        if h.node not in node_set:
            raise FeederError(f"household {h.id} attached to unknown node {h.node}")
        if h.node == slack:
            raise FeederError(f"household {h.id} may not attach to the slack node")


def build_feeder(
    nodes: tuple[Node, ...],
    branches: tuple[Branch, ...],
    households: tuple[Household, ...],
    transformer_kva: float,
    base_voltage_v: float,
) -> FeederModel:
    """Assemble and validate a FeederModel from already-built parts."""
    model = FeederModel(
        nodes=tuple(nodes),
        branches=tuple(branches),
        households=tuple(households),
        transformer_kva=float(transformer_kva),
        base_voltage_v=float(base_voltage_v),
    )
    _validate(model)
    return model


def parse_feeder(text: str) -> FeederModel:
    """Parse a feeder document (YAML) and validate all invariants."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FeederError(f"feeder document is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise FeederError("feeder document must be a mapping")
    try:
        nodes = tuple(
            Node(id=str(n["id"]), is_slack=bool(n.get("slack", False)))
            for n in raw["nodes"]
        )
        branches = tuple(
            Branch(
                from_node=str(b["from"]),
                to_node=str(b["to"]),
                r_ohm=float(b["r_ohm"]),
                x_ohm=float(b["x_ohm"]),
                ampacity_a=float(b["ampacity_a"]),
            )
            for b in raw["branches"]
        )
        households = tuple(
            Household(id=str(h["id"]), node=str(h["node"]))
            for h in raw.get("households", [])
        )
        model = FeederModel(
            nodes=nodes,
            branches=branches,
            households=households,
            transformer_kva=float(raw["transformer_kva"]),
            base_voltage_v=float(raw["base_voltage_v"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FeederError):
            raise
        raise FeederError(f"feeder document missing or malformed field: {exc}") from exc
    _validate(model)
    return model


def load_feeder(path: str | Path) -> FeederModel:
    """Load and validate a feeder file. See ``parse_feeder`` for the schema."""
    return parse_feeder(Path(path).read_text(encoding="utf-8"))


def serialize_feeder(model: FeederModel) -> str:
    """Render a FeederModel back to its document form (round-trip safe)."""
    doc = {
        "transformer_kva": float(model.transformer_kva),
        "base_voltage_v": float(model.base_voltage_v),
        "nodes": [
            {"id": n.id, "slack": True} if n.is_slack else {"id": n.id}
            for n in model.nodes
        ],
        "branches": [
            {
                "from": b.from_node,
                "to": b.to_node,
                "r_ohm": float(b.r_ohm),
                "x_ohm": float(b.x_ohm),
                "ampacity_a": float(b.ampacity_a),
            }
            for b in model.branches
        ],
        "households": [{"id": h.id, "node": h.node} for h in model.households],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def save_feeder(model: FeederModel, path: str | Path) -> None:
    Path(path).write_text(serialize_feeder(model), encoding="utf-8")


@lru_cache(maxsize=32)
def _tree_index(feeder: FeederModel) -> dict[str, tuple[str, Branch]]:
    """Map each non-slack node to (parent node id, connecting branch)."""
    adjacency: dict[str, list[tuple[str, Branch]]] = {n.id: [] for n in feeder.nodes}
    for b in feeder.branches:
        adjacency[b.from_node].append((b.to_node, b))
        adjacency[b.to_node].append((b.from_node, b))
    parent: dict[str, tuple[str, Branch]] = {}
    frontier = [feeder.slack_id]
    seen = {feeder.slack_id}
    while frontier:
        current = frontier.pop(0)
        for neighbor, b in adjacency[current]:
            if neighbor not in seen:
                parent[neighbor] = (current, b)
                seen.add(neighbor)
                frontier.append(neighbor)
    return parent


def path_to_slack(feeder: FeederModel, node_id: str) -> tuple[Branch, ...]:
    """Ordered branch path from ``node_id`` up to the slack (empty for slack)."""
    if node_id not in set(feeder.node_ids):
        raise FeederError(f"unknown node id: {node_id}")
    parent = _tree_index(feeder)
    path: list[Branch] = []
    current = node_id
    while current != feeder.slack_id:
        up, branch = parent[current]
        path.append(branch)
        current = up
    return tuple(path)


def path_impedance(feeder: FeederModel, node_id: str) -> complex:
    """Total series impedance (ohm) from the slack down to ``node_id``."""
    return sum(
        (complex(b.r_ohm, b.x_ohm) for b in path_to_slack(feeder, node_id)),
        start=0j,
    )


def load_baseline_profiles(
    path: str | Path, expected_steps: int = 96
) -> tuple[BaselineLoadProfile, ...]:
    """Read household baseline profiles from a CSV table.

    Header row holds household ids, each following row one time step in kW.
    """
    return parse_baseline_profiles(
        Path(path).read_text(encoding="utf-8"), expected_steps
    )


def parse_baseline_profiles(
    text: str, expected_steps: int = 96
) -> tuple[BaselineLoadProfile, ...]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FeederError("baseline profile table is empty")
    header = [c.strip() for c in rows[0]]
    data = rows[1:]
    if len(data) != expected_steps:
        raise FeederError(
            f"baseline profile table has {len(data)} steps, expected {expected_steps}"
        )
    profiles = []
    for col, household in enumerate(header):
        try:
            series = tuple(float(r[col]) for r in data)
        except (IndexError, ValueError) as exc:
            raise FeederError(f"bad value in profile column {household}: {exc}") from exc
        if any(p < 0 for p in series):
            raise FeederError(f"household {household}: baseline power must be >= 0")
        profiles.append(BaselineLoadProfile(household=household, power_kw=series))
    return tuple(profiles)


def serialize_baseline_profiles(profiles: tuple[BaselineLoadProfile, ...]) -> str:
    steps = len(profiles[0].power_kw)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([p.household for p in profiles])
    for t in range(steps):
        writer.writerow([repr(float(p.power_kw[t])) for p in profiles])
    return out.getvalue()


def bundled_feeder() -> FeederModel:
    """The packaged 19-node example feeder."""
    text = resources.files("evhc.data").joinpath(BUNDLED_FEEDER).read_text("utf-8")
    return parse_feeder(text)


def bundled_baseline_profiles(expected_steps: int = 96) -> tuple[BaselineLoadProfile, ...]:
    """The packaged synthetic winter-evening-peak household profiles."""
    text = resources.files("evhc.data").joinpath(BUNDLED_PROFILES).read_text("utf-8")
    return parse_baseline_profiles(text, expected_steps)
