"""Bus-branch topology reconstruction from parsed features."""

from .buses import build_line_branches, create_buses, infer_transformers, split_voltage_levels
from .circuits import resolve_circuit_counts
from .classify import classify_circuits, classification_counts
from .finalize import ModelError, finalize_network
from .footprints import build_endpoint_index, build_facility_footprints
from .generators import assign_generators
from .hvdc import detect_hvdc_links, promote_converter_lines
from .merge import merge_lines
from .model import Branch, Bus, CircuitRecord, CircuitSpec, DcLink, Generator, NetworkModel
from .voltage import filter_transmission, infer_voltages

__all__ = [
    "Branch",
    "Bus",
    "CircuitRecord",
    "CircuitSpec",
    "DcLink",
    "Generator",
    "ModelError",
    "NetworkModel",
    "assign_generators",
    "build_endpoint_index",
    "build_facility_footprints",
    "build_line_branches",
    "classification_counts",
    "classify_circuits",
    "create_buses",
    "detect_hvdc_links",
    "filter_transmission",
    "finalize_network",
    "infer_transformers",
    "infer_voltages",
    "merge_lines",
    "promote_converter_lines",
    "resolve_circuit_counts",
    "split_voltage_levels",
]
