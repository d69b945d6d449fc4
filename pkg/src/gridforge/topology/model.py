"""Structural network records produced by topology reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple


class CircuitSpec(NamedTuple):
    """One electrical circuit carried by a line section."""

    voltage_kv: float
    index: int
    is_hvdc: bool = False

    @property
    def key(self):
        suffix = "dc" if self.is_hvdc else "ac"
        return f"{self.voltage_kv:g}kV/{self.index}/{suffix}"


@dataclass
class CircuitRecord:
    key: str
    section_ids: list
    path: list  # ordered (lon, lat) geometry
    endpoints: tuple  # (SnappedPoint, SnappedPoint) or (None, None) for rings
    voltage_kv: float
    is_hvdc: bool
    length_km: float
    is_underground: bool = False
    endpoint_facilities: tuple = (None, None)
    classification: str | None = None
    name: str | None = None
    spur_ends: tuple = (False, False)
    interior_cells: frozenset = frozenset()

    @property
    def is_ring(self):
        return self.endpoints[0] is None


@dataclass
class Bus:
    id: int
    coord: tuple
    base_kv: float
    facility_id: str | None = None
    cluster: str | None = None
    ba_code: str | None = None
    v_min_pu: float = 0.95
    v_max_pu: float = 1.05
    is_slack: bool = False
    p_load_mw: float = 0.0
    q_load_mvar: float = 0.0
    shunt_mvar: float = 0.0


@dataclass
class Branch:
    id: int
    from_bus: int
    to_bus: int
    kind: str  # ac_line | transformer | bridge
    voltage_kv: object  # float for lines, (hv, lv) for transformers
    r_pu: float = 0.0
    x_pu: float = 0.0
    b_pu: float = 0.0
    rate_mva: float = 0.0
    angle_limit_deg: float = 30.0
    length_km: float | None = None
    is_underground: bool = False
    circuit_key: str | None = None

    @property
    def is_transformer(self):
        return self.kind in ("transformer", "bridge")


@dataclass
class DcLink:
    id: int
    from_bus: int
    to_bus: int
    p_max_mw: float
    voltage_kv: float = 0.0
    loss_l0_mw: float = 0.0
    loss_l1: float = 0.0
    q_limits: tuple = (0.0, 0.0)
    circuit_key: str | None = None

    def __post_init__(self):
        if self.p_max_mw <= 0:
            raise ValueError("DC link needs p_max_mw > 0")


@dataclass
class Generator:
    id: int
    bus: int
    p_max_mw: float
    fuel_raw: str | None = None
    name: str | None = None
    coord: tuple | None = None
    source: str = "osm"  # osm | eia
    osm_id: str | None = None
    eia_matched: bool = False
    eia_name: str | None = None
    p_set_mw: float = 0.0
    p_min_mw: float = 0.0
    q_min_mvar: float = 0.0
    q_max_mvar: float = 0.0
    fuel_technical: str | None = None
    fuel_display: str | None = None
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0
    startup: float = 0.0
    heat_rate: float | None = None
    available_mw: float | None = None  # derated capacity for the solved hour
    committed: bool = True


@dataclass
class NetworkModel:
    buses: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    generators: list = field(default_factory=list)
    dclinks: list = field(default_factory=list)
    base_mva: float = 100.0
    multi_state: bool = False
    stats: dict = field(default_factory=dict)

    def bus_index(self):
        return {b.id: b for b in self.buses}

    @property
    def slack_bus(self):
        slack = [b for b in self.buses if b.is_slack]
        return slack[0] if slack else None

    def degree(self):
        deg = {b.id: 0 for b in self.buses}
        for br in self.branches:
            deg[br.from_bus] = deg.get(br.from_bus, 0) + 1
            deg[br.to_bus] = deg.get(br.to_bus, 0) + 1
        return deg
