"""Electrical and economic parameter assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ._data import load_table

S_BASE_MVA = 100.0

DISPLAY_CATEGORIES = (
    "Solar", "Wind", "Hydro", "Geothermal", "Nuclear", "Gas",
    "Coal", "Oil", "Biomass", "Waste", "Battery", "Unknown",
)
RENEWABLE_FUELS = frozenset({"Solar", "Wind", "Hydro", "Geothermal"})
ZERO_MARGINAL_COST = RENEWABLE_FUELS | {"Nuclear"}
INTERMITTENT_FUELS = frozenset({"Solar", "Wind"})
ZERO_MARGINAL_C1_CAP = 15.0

# technical type -> (display category, cost class)
TECHNICAL_TYPES = {
    "nuclear": ("Nuclear", "nuclear"),
    "coal": ("Coal", "coal"),
    "gas": ("Gas", "gas_ccgt"),
    "gas_turbine": ("Gas", "gas_turbine"),
    "gas_steam": ("Gas", "gas_turbine"),
    "oil": ("Oil", "oil"),
    "diesel": ("Oil", "diesel"),
    "biomass": ("Biomass", "biomass"),
    "biogas": ("Biomass", "biomass"),
    "landfill_gas": ("Waste", "waste"),
    "waste": ("Waste", "waste"),
    "geothermal": ("Geothermal", "geothermal"),
    "hydro": ("Hydro", "hydro"),
    "pumped_storage": ("Hydro", "hydro"),
    "solar": ("Solar", "solar"),
    "wind": ("Wind", "wind"),
    "battery": ("Battery", "battery"),
    "unknown": ("Unknown", "unknown"),
}

RAW_FUEL_ALIASES = {
    "nuclear": "nuclear", "uranium": "nuclear", "nuc": "nuclear",
    "coal": "coal", "bit": "coal", "sub": "coal", "lig": "coal", "lignite": "coal",
    "bituminous": "coal", "subbituminous": "coal", "anthracite": "coal",
    "gas": "gas", "natural_gas": "gas", "ng": "gas", "lng": "gas",
    "combined_cycle": "gas", "ccgt": "gas", "gas_cc": "gas", "cc": "gas",
    "gas_turbine": "gas_turbine", "gt": "gas_turbine", "combustion_turbine": "gas_turbine",
    "ct": "gas_turbine", "simple_cycle": "gas_turbine", "peaker": "gas_turbine",
    "gas_steam": "gas_steam", "steam_gas": "gas_steam",
    "oil": "oil", "petroleum": "oil", "fuel_oil": "oil", "rfo": "oil",
    "diesel": "diesel", "dfo": "diesel", "distillate": "diesel",
    "biomass": "biomass", "wood": "biomass", "wds": "biomass", "biofuel": "biomass",
    "biogas": "biogas",
    "landfill_gas": "landfill_gas", "lfg": "landfill_gas",
    "waste": "waste", "msw": "waste", "refuse": "waste",
    "geothermal": "geothermal", "geo": "geothermal",
    "hydro": "hydro", "water": "hydro", "hydroelectric": "hydro", "run_of_the_river": "hydro",
    "pumped_storage": "pumped_storage", "ps": "pumped_storage",
    "solar": "solar", "photovoltaic": "solar", "pv": "solar", "sun": "solar",
    "wind": "wind", "wnd": "wind",
    "battery": "battery", "storage": "battery", "bess": "battery",
}

_SUBSTRING_HINTS = (
    ("nuclear", "nuclear"), ("solar", "solar"), ("wind", "wind"), ("hydro", "hydro"),
    ("coal", "coal"), ("diesel", "diesel"), ("oil", "oil"), ("battery", "battery"),
    ("turbine", "gas_turbine"), ("gas", "gas"), ("bio", "biomass"), ("waste", "waste"),
    ("geotherm", "geothermal"),
)


def normalize_fuel(raw):
    """Map a raw fuel string to (technical type, display category)."""
    key = str(raw or "").split(";")[0].strip().lower().replace("-", "_").replace(" ", "_")
    tech = RAW_FUEL_ALIASES.get(key)
    if tech is None and key:
        tech = next((t for hint, t in _SUBSTRING_HINTS if hint in key), None)
    tech = tech or "unknown"
    return tech, TECHNICAL_TYPES[tech][0]


def cost_class(technical):
    return TECHNICAL_TYPES.get(technical, TECHNICAL_TYPES["unknown"])[1]


# ---------------------------------------------------------------------------
# lines and transformers


def nearest_class(voltage_kv, classes):
    """Closest class by voltage ratio (500 kV -> 525 kV)."""
    return min(classes, key=lambda c: (abs(math.log(voltage_kv / c)), -c))


def _lut_rows(section):
    table = load_table("lines.toml")[section]
    return {float(k): v for k, v in table.items()}


def line_lut_row(voltage_kv, underground=False):
    rows = _lut_rows("cable" if underground else "overhead")
    cls = nearest_class(voltage_kv, rows)
    return cls, rows[cls]


def impedance_base(voltage_kv, s_base=S_BASE_MVA):
    return voltage_kv**2 / s_base


def line_parameters(circuit, lut=None, margin=None, s_base=S_BASE_MVA):
    """Per-unit (r, x, b) and MVA rating of an AC line.

    ``circuit`` needs ``voltage_kv``, ``length_km`` and optionally
    ``is_underground``.  Impedance is per-unitised on the nominal voltage
    (Z_pu = Z_ohm L / (V^2 / S_base)); susceptance is multiplied by the same
    base (B_pu = B_S L V^2 / S_base).  The rating carries the short-term
    thermal margin.
    """
    length = circuit.length_km
    if length is None or length <= 0:
        raise ValueError("line length must be positive")
    underground = bool(getattr(circuit, "is_underground", False))
    if lut is None:
        _, row = line_lut_row(circuit.voltage_kv, underground)
    else:
        rows = lut["cable" if underground else "overhead"]
        row = rows[nearest_class(circuit.voltage_kv, rows)]
    if margin is None:
        margin = load_table("lines.toml")["thermal_margin"]
    zb = impedance_base(circuit.voltage_kv, s_base)
    r = row["r"] * length / zb
    x = row["x"] * length / zb
    b = row["b"] * 1e-6 * length * zb
    return r, x, b, row["mva"] * margin


def ohms_from_pu(z_pu, voltage_kv, s_base=S_BASE_MVA):
    return z_pu * impedance_base(voltage_kv, s_base)


def auto_transformer_factor(hv_kv, lv_kv, table=None):
    """Winding-sharing factor, or None when the unit is not an auto-transformer."""
    table = table or load_table("transformers.toml")
    cfg = table["auto"]
    if hv_kv / lv_kv < cfg["max_ratio"] and lv_kv >= cfg["min_kv"] and hv_kv >= cfg["min_kv"]:
        lo, hi = cfg["clamp"]
        return min(max(1.0 - lv_kv / hv_kv, lo), hi)
    return None


def transformer_lut_row(hv_kv, lv_kv, table=None):
    table = table or load_table("transformers.toml")
    pairs = {}
    for key, row in table["pairs"].items():
        h, l = (float(v) for v in key.split("/"))
        pairs[(h, l)] = row
    best = min(pairs, key=lambda p: (abs(math.log(hv_kv / p[0])) + abs(math.log(lv_kv / p[1])), -p[0], -p[1]))
    return best, pairs[best]


def transformer_parameters(hv_kv, lv_kv, lut=None, margin=None, s_base=S_BASE_MVA):
    """(r, x, rate_mva) of a transformer on the system base."""
    if hv_kv < lv_kv:
        hv_kv, lv_kv = lv_kv, hv_kv
    table = lut or load_table("transformers.toml")
    _, row = transformer_lut_row(hv_kv, lv_kv, table)
    r, x, mva = row["r"], row["x"], row["mva"]
    factor = auto_transformer_factor(hv_kv, lv_kv, table)
    if factor is not None:
        r *= factor
        x *= factor
    if margin is None:
        margin = load_table("lines.toml")["thermal_margin"]
    rebase = s_base / mva
    return r * rebase, x * rebase, mva * margin


# ---------------------------------------------------------------------------
# parallel-circuit scaling


def scaling_factors(voltage_kv, multi_state=False, table=None):
    """(n_t, n_c) for the voltage class nearest ``voltage_kv``."""
    table = table or load_table("factors.toml")
    classes = {float(k): v for k, v in table["classes"].items()}
    row = classes[nearest_class(voltage_kv, classes)]
    n_t, n_c = row["n_t"], row["n_c"]
    if multi_state:
        n_t *= table["multi_state"]["t_mult"]
        n_c *= table["multi_state"]["c_mult"]
    return n_t, n_c


def apply_scaling_factors(branch, factors=None, multi_state=False):
    """Return a copy of ``branch`` scaled for missing parallel circuits.

    Transformers are keyed to their low-voltage side.
    """
    if isinstance(branch.voltage_kv, tuple):
        key_kv = min(branch.voltage_kv)
    else:
        key_kv = branch.voltage_kv
    n_t, n_c = scaling_factors(key_kv, multi_state, factors)
    return replace(
        branch,
        r_pu=branch.r_pu / n_t,
        x_pu=branch.x_pu / n_t,
        b_pu=branch.b_pu * n_t,
        rate_mva=branch.rate_mva * n_t * n_c,
    )


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GenEconomics:
    fuel_technical: str
    fuel_display: str
    cost_class: str
    c2: float
    c1: float
    c0: float
    startup: float
    p_min_frac: float
    power_factor: float
    q_min_frac: float
    heat_rate: float | None = None
    eia_matched: bool = False

    def __post_init__(self):
        if self.c1 < 0:
            raise ValueError("marginal cost must be non-negative")
        if not 0.0 <= self.p_min_frac <= 1.0:
            raise ValueError("p_min_frac outside [0, 1]")
        if not 0.0 < self.power_factor <= 1.0:
            raise ValueError("power factor outside (0, 1]")


def size_adjustment(p_max_mw, table=None):
    """Heat-rate multiplier that penalises small units, clamped."""
    cfg = (table or load_table("generators.toml"))["size_adjustment"]
    lo, hi = cfg["clamp"]
    if p_max_mw <= 0:
        return hi
    return min(max(1.0 + cfg["slope"] * math.log(cfg["pivot_mw"] / p_max_mw), lo), hi)


def heat_rate_marginal_cost(heat_rate, fuel_price, vom, size_factor=1.0):
    """c1 = heat rate x fuel price / 1000 + VOM, heat rate scaled by unit size."""
    return heat_rate * size_factor * fuel_price / 1000.0 + vom


def generator_costs(gen, fixtures=None, table=None):
    """Cost curve and operating fractions for one generator.

    A plant matched to EIA-860 with an EIA-923 heat rate gets a heat-rate
    based marginal cost; everything else falls back to the fuel table.
    """
    table = table or load_table("generators.toml")
    tech, display = normalize_fuel(gen.fuel_raw)
    cls = cost_class(tech)
    row = table["classes"][cls]
    c1 = row["c1"]
    heat_rate = None
    if fixtures is not None and getattr(gen, "eia_matched", False) and "heat_rate" in row:
        for name in (getattr(gen, "eia_name", None), gen.name):
            if name:
                heat_rate = fixtures.heat_rate(name)
                if heat_rate:
                    break
        if heat_rate:
            price = row["fuel_price"]
            if cls in ("gas_ccgt", "gas_turbine"):
                price = fixtures.gas_price_usd_per_mmbtu
            c1 = heat_rate_marginal_cost(heat_rate, price, row["vom"], size_adjustment(gen.p_max_mw, table))
    if display in ZERO_MARGINAL_COST:
        c1 = min(c1, ZERO_MARGINAL_C1_CAP)
    return GenEconomics(
        fuel_technical=tech,
        fuel_display=display,
        cost_class=cls,
        c2=0.0,
        c1=float(c1),
        c0=float(row["c0"]),
        startup=float(row["startup"]),
        p_min_frac=float(row["p_min"]),
        power_factor=float(row["pf"]),
        q_min_frac=float(row["q_min_frac"]),
        heat_rate=heat_rate,
        eia_matched=bool(getattr(gen, "eia_matched", False)),
    )


def generator_limits(econ, p_max_mw):
    """(p_min, q_min, q_max) in MW / MVAr."""
    q_max = p_max_mw * math.tan(math.acos(econ.power_factor))
    return econ.p_min_frac * p_max_mw, -econ.q_min_frac * q_max, q_max


def bus_limits(bus, has_generator):
    return (0.95, 1.10) if has_generator else (0.95, 1.05)


def branch_angle_limit(branch):
    if branch.kind in ("transformer", "bridge"):
        return 60.0
    kv = branch.voltage_kv if not isinstance(branch.voltage_kv, tuple) else max(branch.voltage_kv)
    return 30.0 if kv >= 100.0 else 45.0


def parameterize_network(model, fixtures=None, multi_state=None):
    """Fill every electrical and economic parameter of ``model`` in place."""
    multi_state = model.multi_state if multi_state is None else multi_state
    branches = []
    for br in model.branches:
        if br.kind == "ac_line":
            r, x, b, rate = line_parameters(br)
        else:
            hv, lv = br.voltage_kv
            r, x, rate = transformer_parameters(hv, lv)
            b = 0.0
        br = replace(br, r_pu=r, x_pu=x, b_pu=b, rate_mva=rate)
        br = apply_scaling_factors(br, multi_state=multi_state)
        br.angle_limit_deg = branch_angle_limit(br)
        branches.append(br)
    model.branches = branches
    for g in model.generators:
        apply_generator_economics(g, fixtures)
    gen_buses = {g.bus for g in model.generators}
    for bus in model.buses:
        bus.v_min_pu, bus.v_max_pu = bus_limits(bus, bus.id in gen_buses)
    return model


def apply_generator_economics(gen, fixtures=None):
    econ = generator_costs(gen, fixtures)
    gen.fuel_technical = econ.fuel_technical
    gen.fuel_display = econ.fuel_display
    gen.c2, gen.c1, gen.c0, gen.startup = econ.c2, econ.c1, econ.c0, econ.startup
    gen.heat_rate = econ.heat_rate
    gen.p_min_mw, gen.q_min_mvar, gen.q_max_mvar = generator_limits(econ, gen.p_max_mw)
    return econ
