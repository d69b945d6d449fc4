"""HVDC link detection."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .._data import load_table
from ..geo import haversine_m, unsnap
from .generators import nearest_bus
from .model import DcLink


def dc_pmax_for_voltage(voltage_kv, table=None):
    table = table or load_table("hvdc.toml")
    for threshold, pmax in table["p_max_classes"]:
        if voltage_kv >= threshold:
            return float(pmax)
    return float(table["p_max_classes"][-1][1])


def _near_converter(cell, conv_xy, radius_m):
    if len(conv_xy) == 0:
        return False
    lon, lat = unsnap(cell)
    d = np.atleast_1d(haversine_m(lon, lat, conv_xy[:, 0], conv_xy[:, 1]))
    return bool(d.min() <= radius_m)


def promote_converter_lines(circuits, converter_nodes, radius_m=None):
    """Flag unflagged lines whose two ends both lie near a converter.

    Returns the keys of promoted circuits.
    """
    table = load_table("hvdc.toml")
    radius_m = table["converter_radius_m"] if radius_m is None else radius_m
    conv_xy = np.array([f.centroid for f in converter_nodes]) if converter_nodes else np.zeros((0, 2))
    promoted = []
    for c in circuits:
        if c.is_hvdc or c.is_ring:
            continue
        if all(_near_converter(cell, conv_xy, radius_m) for cell in c.endpoints):
            c.is_hvdc = True
            promoted.append(c.key)
    return promoted


def detect_hvdc_links(circuits, converter_nodes, buses, start_id=1, diagnostics=None):
    """Turn HVDC circuits into DcLinks between the nearest AC buses.

    Runs the converter post-pass first so that it is safe to call on
    circuits that were never promoted.  Returns ``(dclinks, promoted_keys)``.
    """
    diagnostics = Counter() if diagnostics is None else diagnostics
    table = load_table("hvdc.toml")
    promoted = promote_converter_lines(circuits, converter_nodes)
    links = []
    next_id = start_id
    for c in sorted(circuits, key=lambda c: c.key):
        if not c.is_hvdc or c.is_ring:
            continue
        ends = []
        for cell in c.endpoints:
            lon, lat = unsnap(cell)
            bus, _d = nearest_bus(lon, lat, buses, table["terminal_search_m"])
            ends.append(bus)
        if None in ends or ends[0] == ends[1]:
            diagnostics["hvdc_without_terminals"] += 1
            continue
        pmax = dc_pmax_for_voltage(c.voltage_kv, table)
        q = table["q_frac"] * pmax
        links.append(
            DcLink(
                id=next_id,
                from_bus=ends[0],
                to_bus=ends[1],
                p_max_mw=pmax,
                voltage_kv=c.voltage_kv,
                loss_l0_mw=table["loss_l0_mw"],
                loss_l1=table["loss_l1"],
                q_limits=(-q, q),
                circuit_key=c.key,
            )
        )
        next_id += 1
    return links, promoted
