"""Hosting-capacity searches and parameter sweeps.

Passive hosting capacity: raise the per-EV charging power along a candidate
grid until the first network incident; the capacity is the last clean
candidate. Network-aware hosting capacity: same sweep with envelopes
active, where a candidate also fails when the fleet-aggregated QoS drops
below the threshold. When an incident and a QoS breach coincide, the
incident is reported as the limiting factor (grid safety outranks service
quality) and the QoS breach is still visible in the candidate detail.

Every candidate is simulated independently of the others, so the sequential
search returns exactly what an exhaustive per-candidate scan returns.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .doe import DoeParams, network_aware_horizon, passive_horizon
from .ev import (
    DEFAULT_RATED_POWER_KW,
    DEFAULT_SCENARIOS,
    EnergyScenario,
    EvSession,
    baseline_trajectory,
    generate_fleet,
)
from .feeder import BaselineLoadProfile, FeederModel
from .incidents import Incident, IncidentLimits, KIND_DIAGNOSTIC, detect
from .powerflow import PowerFlowOptions, VoltageCollapseError
from .qos import QosReport, build_report
from .trace import TraceSummary, summarize

LIMIT_AGGREGATED_QOS = "aggregated_qos"

SWEEP_POWER = "power"
SWEEP_EV_COUNT = "ev_count"


@dataclass(frozen=True)
class HcSearchConfig:
    """Search settings: candidate grid, QoS threshold, envelope and limits."""

    power_grid_kw: tuple[float, ...] = tuple(float(k) for k in range(1, 21))
    qos_threshold: float = 0.8
    doe: DoeParams = DoeParams()
    scenario: str = "low"
    seed: int = 1
    rated_power_kw: float = DEFAULT_RATED_POWER_KW
    v_lower_pu: float = 0.9
    v_upper_pu: float = 1.1
    sweep_dimension: str = SWEEP_POWER
    count_mode_power_kw: float = 7.4
    pf_options: PowerFlowOptions = PowerFlowOptions()

    def __post_init__(self) -> None:
        if not self.power_grid_kw:
            raise ValueError("power grid must be non-empty")
        if any(b <= a for a, b in zip(self.power_grid_kw, self.power_grid_kw[1:])):
            raise ValueError("power grid must be strictly increasing")
        if not 0.0 < self.qos_threshold <= 1.0:
            raise ValueError("qos_threshold must lie in (0, 1]")
        if self.sweep_dimension not in (SWEEP_POWER, SWEEP_EV_COUNT):
            raise ValueError(f"unknown sweep dimension {self.sweep_dimension}")
        if self.count_mode_power_kw <= 0:
            raise ValueError("count_mode_power_kw must be > 0")


@dataclass
class CandidateResult:
    """Outcome of simulating one candidate (a power level or an EV count)."""

    candidate: float
    incidents: list[Incident]
    qos: QosReport | None
    summary: TraceSummary | None
    qos_breach: bool
    failure: str | None            # None when the candidate passed
    fixed_point_fallback_steps: int = 0
    error: str | None = None


@dataclass
class HcReport:
    """Result of one hosting-capacity search."""

    mode: str                      # "passive" | "network_aware"
    dimension: str                 # "power" (kW per EV) | "ev_count"
    scenario: str
    hc: float | None               # None: even the smallest candidate failed
    limiting_factor: str | None    # None: unconstrained within the grid
    unconstrained: bool
    qos_threshold: float
    candidates: list[CandidateResult] = field(default_factory=list)

    @property
    def qos_at_hc(self) -> float | None:
        for c in self.candidates:
            if c.candidate == self.hc and c.qos is not None:
                return c.qos.aggregated
        return None

    @property
    def min_qos_at_hc(self) -> float | None:
        for c in self.candidates:
            if c.candidate == self.hc and c.qos is not None:
                return c.qos.minimum
        return None


def _limits(feeder: FeederModel, config: HcSearchConfig) -> IncidentLimits:
    return IncidentLimits.from_feeder(feeder, config.v_lower_pu, config.v_upper_pu)


def _baseline_energies(fleet: list[EvSession], hc_power: float) -> np.ndarray:
    return np.array([baseline_trajectory(s, hc_power).delivered_kwh for s in fleet])


def evaluate_passive_candidate(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    hc_power: float,
    config: HcSearchConfig,
) -> CandidateResult:
    """Simulate uncontrolled charging at one candidate power."""
    try:
        _, trace = passive_horizon(feeder, profiles, fleet, hc_power, config.pf_options)
    except VoltageCollapseError as exc:
        return _collapse_result(hc_power, exc)
    incidents = detect(trace, _limits(feeder, config))
    return CandidateResult(
        candidate=hc_power,
        incidents=incidents,
        qos=None,
        summary=summarize(trace, np.array([b.ampacity_a for b in feeder.branches])),
        qos_breach=False,
        failure=incidents[0].kind if incidents else None,
    )


def evaluate_network_aware_candidate(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    hc_power: float,
    config: HcSearchConfig,
) -> CandidateResult:
    """Simulate envelope-controlled charging at one candidate power."""
    try:
        trajectories, trace = network_aware_horizon(
            feeder, profiles, fleet, hc_power, config.doe, config.pf_options
        )
    except VoltageCollapseError as exc:
        return _collapse_result(hc_power, exc)
    incidents = detect(trace, _limits(feeder, config))
    e_baseline = _baseline_energies(fleet, hc_power)
    e_na = np.array([t.delivered_kwh for t in trajectories])
    report = build_report(tuple(s.household for s in fleet), e_baseline, e_na)
    breach = report.aggregated < config.qos_threshold
    if incidents:
        failure = incidents[0].kind
    elif breach:
        failure = LIMIT_AGGREGATED_QOS
    else:
        failure = None
    return CandidateResult(
        candidate=hc_power,
        incidents=incidents,
        qos=report,
        summary=summarize(trace, np.array([b.ampacity_a for b in feeder.branches])),
        qos_breach=breach,
        failure=failure,
        fixed_point_fallback_steps=int(trace.fixed_point_fallback.sum()),
    )


def _collapse_result(candidate: float, exc: VoltageCollapseError) -> CandidateResult:
    incident = Incident(
        KIND_DIAGNOSTIC, exc.step or 0, "power-flow", float(exc.min_voltage_pu)
    )
    return CandidateResult(
        candidate=candidate,
        incidents=[incident],
        qos=None,
        summary=None,
        qos_breach=False,
        failure=KIND_DIAGNOSTIC,
        error=str(exc),
    )


def _count_candidate_fleet(fleet: list[EvSession], count: int) -> list[EvSession]:
    return fleet[:count]


def _search(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    config: HcSearchConfig,
    mode: str,
) -> HcReport:
    if config.sweep_dimension == SWEEP_EV_COUNT:
        candidates = [float(k) for k in range(1, len(fleet) + 1)]
    else:
        candidates = list(config.power_grid_kw)
    results: list[CandidateResult] = []
    hc: float | None = None
    limiting: str | None = None
    for candidate in candidates:
        if config.sweep_dimension == SWEEP_EV_COUNT:
            sub = _count_candidate_fleet(fleet, int(candidate))
            power = config.count_mode_power_kw
        else:
            sub = fleet
            power = candidate
        if mode == "passive":
            result = evaluate_passive_candidate(feeder, profiles, sub, power, config)
        else:
            result = evaluate_network_aware_candidate(feeder, profiles, sub, power, config)
        result.candidate = candidate
        results.append(result)
        if result.failure is not None:
            limiting = result.failure
            break
        hc = candidate
    return HcReport(
        mode=mode,
        dimension=config.sweep_dimension,
        scenario=config.scenario,
        hc=hc,
        limiting_factor=limiting,
        unconstrained=limiting is None,
        qos_threshold=config.qos_threshold,
        candidates=results,
    )


def passive_hc(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    config: HcSearchConfig,
) -> HcReport:
    """Uncontrolled hosting capacity: stop at the first network incident."""
    return _search(feeder, profiles, fleet, config, "passive")


def network_aware_hc(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    config: HcSearchConfig,
) -> HcReport:
    """Envelope-controlled hosting capacity: stop at the first unavoided
    incident or aggregated-QoS breach."""
    return _search(feeder, profiles, fleet, config, "network_aware")


def network_aware_grid(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    fleet: list[EvSession],
    config: HcSearchConfig,
) -> list[CandidateResult]:
    """Evaluate every candidate power regardless of failures (for threshold
    sweeps and locational QoS tables)."""
    return [
        evaluate_network_aware_candidate(feeder, profiles, fleet, p, config)
        for p in config.power_grid_kw
    ]


def reduce_candidates(
    results: list[CandidateResult],
    qos_threshold: float,
    mode: str,
    scenario: str = "",
) -> HcReport:
    """First-failure reduction of a fully evaluated candidate grid.

    Candidate results are threshold-independent, so one grid evaluation can
    be reduced at many thresholds.
    """
    hc: float | None = None
    limiting: str | None = None
    kept: list[CandidateResult] = []
    for r in results:
        breach = r.qos is not None and r.qos.aggregated < qos_threshold
        if r.incidents:
            failure = r.incidents[0].kind
        elif breach:
            failure = LIMIT_AGGREGATED_QOS
        else:
            failure = None
        kept.append(
            CandidateResult(
                candidate=r.candidate,
                incidents=r.incidents,
                qos=r.qos,
                summary=r.summary,
                qos_breach=breach,
                failure=failure,
                fixed_point_fallback_steps=r.fixed_point_fallback_steps,
                error=r.error,
            )
        )
        if failure is not None:
            limiting = failure
            break
        hc = r.candidate
    return HcReport(
        mode=mode,
        dimension=SWEEP_POWER,
        scenario=scenario,
        hc=hc,
        limiting_factor=limiting,
        unconstrained=limiting is None,
        qos_threshold=qos_threshold,
        candidates=kept,
    )


@dataclass
class SweepCell:
    """One (scenario, delta_perm, factor) cell of the sensitivity sweep."""

    scenario: str
    delta_perm: float
    factor: float
    hc: float | None = None
    limiting_factor: str | None = None
    unconstrained: bool = False
    qos_at_hc: float | None = None
    min_qos_at_hc: float | None = None
    error: str | None = None


def _fleet_for_scenario(
    feeder: FeederModel,
    scenario: EnergyScenario,
    config: HcSearchConfig,
) -> list[EvSession]:
    index = list(DEFAULT_SCENARIOS).index(scenario.label) if scenario.label in DEFAULT_SCENARIOS else 0
    return generate_fleet(
        scenario,
        feeder.household_ids,
        seed=[config.seed, index],
        rated_power_kw=config.rated_power_kw,
    )


def _evaluate_cell(args) -> SweepCell:
    feeder, profiles, scenario, delta_perm, factor, config = args
    cell = SweepCell(scenario=scenario.label, delta_perm=delta_perm, factor=factor)
    try:
        doe = replace(config.doe, delta_perm=delta_perm, factor=factor)
        cell_config = replace(config, doe=doe, scenario=scenario.label)
        fleet = _fleet_for_scenario(feeder, scenario, cell_config)
        report = network_aware_hc(feeder, profiles, fleet, cell_config)
        cell.hc = report.hc
        cell.limiting_factor = report.limiting_factor
        cell.unconstrained = report.unconstrained
        cell.qos_at_hc = report.qos_at_hc
        cell.min_qos_at_hc = report.min_qos_at_hc
    except Exception as exc:  # cell failures stay in-cell, the sweep continues
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def sensitivity_sweep(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    scenarios: list[EnergyScenario],
    delta_perm_grid: list[float],
    factor_values: list[float],
    config: HcSearchConfig,
    workers: int = 1,
) -> list[SweepCell]:
    """Network-aware HC over the (delta_perm, factor) grid per scenario."""
    if not delta_perm_grid or not factor_values or not scenarios:
        raise ValueError("sweep grids must be non-empty")
    jobs = [
        (feeder, profiles, scenario, float(d), float(f), config)
        for scenario in scenarios
        for d in delta_perm_grid
        for f in factor_values
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_cell, jobs))
    return [_evaluate_cell(job) for job in jobs]


@dataclass
class ThresholdPoint:
    """Network-aware HC at one aggregated-QoS threshold."""

    scenario: str
    qos_threshold: float
    hc: float | None
    limiting_factor: str | None
    qos_at_hc: float | None
    min_qos_at_hc: float | None


def threshold_sweep(
    feeder: FeederModel,
    profiles: tuple[BaselineLoadProfile, ...],
    scenarios: list[EnergyScenario],
    thresholds: list[float],
    config: HcSearchConfig,
) -> list[ThresholdPoint]:
    """NAHC versus aggregated-QoS threshold; one grid evaluation per
    scenario reused across thresholds."""
    points = []
    for scenario in scenarios:
        cfg = replace(config, scenario=scenario.label)
        fleet = _fleet_for_scenario(feeder, scenario, cfg)
        grid = network_aware_grid(feeder, profiles, fleet, cfg)
        for threshold in thresholds:
            report = reduce_candidates(grid, threshold, "network_aware", scenario.label)
            points.append(
                ThresholdPoint(
                    scenario=scenario.label,
                    qos_threshold=float(threshold),
                    hc=report.hc,
                    limiting_factor=report.limiting_factor,
                    qos_at_hc=report.qos_at_hc,
                    min_qos_at_hc=report.min_qos_at_hc,
                )
            )
    return points


def export_sweep_csv(cells: list[SweepCell]) -> str:
    lines = ["scenario,delta_perm,factor,nahc_kw,limiting_factor,qos_agg,min_qos,error"]
    for c in cells:
        lines.append(
            f"{c.scenario},{c.delta_perm:.10g},{c.factor:.10g},"
            f"{'' if c.hc is None else format(c.hc, '.10g')},"
            f"{'unconstrained' if c.unconstrained else (c.limiting_factor or '')},"
            f"{'' if c.qos_at_hc is None else format(c.qos_at_hc, '.10g')},"
            f"{'' if c.min_qos_at_hc is None else format(c.min_qos_at_hc, '.10g')},"
            f"{c.error or ''}"
        )
    return "\n".join(lines) + "\n"
