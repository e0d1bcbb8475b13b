"""Scenario descriptions: builtin cases and the config-file schema.

A scenario config is a flat mapping of keys (see ``DEFAULTS``) plus two
list-valued keys, ``obstacles`` and ``ues``. Each list item is either an
explicit object or a random group (an item carrying ``count``) that is
resolved from the scenario seed, so one config plus one seed always yields
the same concrete scenario.
"""

from __future__ import annotations

import copy
import math
from typing import Any, Mapping

from . import rng as rngs
from .channel import LinkBudget, ObstacleBox
from .core import MCS_MAX, MCS_MIN, Position, SubframeConfig, Velocity
from .engine import HarqConfig, Scenario, UeSpec
from .sched import PfConfig, Policy
from .traffic import OnOffConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS: dict[str, Any] = {
    "name": "custom",
    "seed": 0,
    "duration_ms": 1000.0,
    "field_m": 300.0,
    "enb": None,  # None -> field centre
    "bandwidth_hz": 1e9,
    "carrier_hz": 28e9,
    "tx_power_dbm": 30.0,
    "antenna_gain_dbi": 25.0,
    "noise_figure_db": 7.0,
    "nlos_penalty_db": 30.0,
    "shadowing_sigma_db": 4.0,
    "shadowing_corr": 0.9,
    "efficiency_table": None,
    "subframe_us": 100,
    "symbols": 24,
    "control_symbols": 2,
    "scheduler": "spf",
    "t_c": 100.0,
    "alpha": 1.0,
    "beta": 1.0,
    "gamma_mode": "mcs",
    "gamma_fixed": 1.0,
    "r_ref_mbps": None,
    "avg_rate_mbps": 100.0,
    "on_us": 5.0,
    "off_mean_us": 100.0,
    "packet_bytes": 1500,
    "harq_bler": 0.1,
    "harq_max_retx": 3,
    "cqi_delay": 1,
    "t_phy_us": 10,
    "nlos_group": [],
    "obstacles": [],
    "ues": [],
}

BOX_KEYS = {"x", "y", "half_width", "half_height"}
BOX_GROUP_KEYS = {"count", "half_size_m", "region"}
UE_KEYS = {"x", "y", "vx", "vy", "mcs", "avg_rate_mbps"}
UE_GROUP_KEYS = {"count", "region", "speed_mps", "nlos", "avg_rate_mbps"}

CASE1: dict[str, Any] = {
    "name": "case1",
    "avg_rate_mbps": 500.0,
    "obstacles": [
        # scatter-rich quadrant north-east of the eNodeB
        {"count": 20, "half_size_m": [1.0, 3.0], "region": [160.0, 160.0, 215.0, 215.0]},
    ],
    "ues": [
        {"count": 3, "region": [185.0, 185.0, 235.0, 235.0], "speed_mps": 18.0, "nlos": True},
        {"count": 7, "region": [20.0, 20.0, 140.0, 140.0], "speed_mps": 18.0},
    ],
}

CASE2: dict[str, Any] = {
    "name": "case2",
    "avg_rate_mbps": 100.0,
    "obstacles": [{"count": 300, "half_size_m": [0.5, 2.0], "region": None}],
    "ues": [{"count": 10, "region": None, "speed_mps": [0.0, 30.0]}],
}

BUILTINS = {"case1": CASE1, "case2": CASE2}


def _number(cfg: Mapping[str, Any], key: str, *, lo=None, hi=None, lo_open=False,
            hi_open=False, integer=False):
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(key, f"{value} out of range (must be {'>' if lo_open else '>='} {lo})")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(key, f"{value} out of range (must be {'<' if hi_open else '<='} {hi})")
    return int(value) if integer else float(value)


def _pair(value, key: str) -> tuple[float, float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), float(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return float(value[0]), float(value[1])
    raise ConfigError(key, f"expected a number or a [min, max] pair, got {value!r}")


def _region(value, key: str, field_m: tuple[float, float]) -> tuple[float, float, float, float]:
    if value is None:
        return 0.0, 0.0, field_m[0], field_m[1]
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError(key, "region must be [xmin, ymin, xmax, ymax]")
    x0, y0, x1, y1 = (float(v) for v in value)
    if not (0 <= x0 < x1 <= field_m[0] and 0 <= y0 < y1 <= field_m[1]):
        raise ConfigError(key, f"region {list(value)} is empty or leaves the field")
    return x0, y0, x1, y1


def _check_keys(item: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(item) - allowed)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}", "unknown key")


def merge_config(raw: Mapping[str, Any]) -> dict[str, Any]:
    """Defaults <- optional builtin ``base`` <- explicit keys."""
    raw = dict(raw)
    base = raw.pop("base", None)
    merged = copy.deepcopy(DEFAULTS)
    if base is not None:
        if base not in BUILTINS:
            raise ConfigError("base", f"unknown builtin {base!r}")
        merged.update(copy.deepcopy(BUILTINS[base]))
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    merged.update(copy.deepcopy(raw))
    return merged


def _resolve_obstacles(cfg, field_m, seed) -> list[ObstacleBox]:
    items = cfg["obstacles"]
    if not isinstance(items, list):
        raise ConfigError("obstacles", "expected a list")
    boxes: list[ObstacleBox] = []
    gen = rngs.stream(seed, "obstacles")
    for i, item in enumerate(items):
        where = f"obstacles[{i}]"
        if not isinstance(item, Mapping):
            raise ConfigError(where, "expected a mapping")
        if "count" in item:
            _check_keys(item, BOX_GROUP_KEYS, where)
            count = _number(item, "count", lo=0, integer=True)
            hmin, hmax = _pair(item.get("half_size_m", [1.0, 3.0]), f"{where}.half_size_m")
            if not 0 < hmin <= hmax:
                raise ConfigError(f"{where}.half_size_m", "need 0 < min <= max")
            x0, y0, x1, y1 = _region(item.get("region"), f"{where}.region", field_m)
            for _ in range(count):
                hw, hh = gen.uniform(hmin, hmax, size=2)
                hw, hh = min(hw, (x1 - x0) / 2), min(hh, (y1 - y0) / 2)
                cx = gen.uniform(x0 + hw, x1 - hw)
                cy = gen.uniform(y0 + hh, y1 - hh)
                boxes.append(ObstacleBox(Position(float(cx), float(cy)), float(hw), float(hh)))
        else:
            _check_keys(item, BOX_KEYS, where)
            try:
                boxes.append(ObstacleBox(Position(float(item["x"]), float(item["y"])),
                                         float(item["half_width"]), float(item["half_height"])))
            except KeyError as exc:
                raise ConfigError(f"{where}.{exc.args[0]}", "missing required key") from None
            except ValueError as exc:
                raise ConfigError(where, str(exc)) from None
    return boxes


def _inside_any(p, boxes: list[ObstacleBox]) -> bool:
    for b in boxes:
        x0, y0, x1, y1 = b.bounds
        if x0 <= p[0] <= x1 and y0 <= p[1] <= y1:
            return True
    return False


def _resolve_ues(cfg, field_m, seed, boxes, default_rate, traffic_kw):
    items = cfg["ues"]
    if not isinstance(items, list) or not items:
        raise ConfigError("ues", "expected a non-empty list")
    ues: list[UeSpec] = []
    nlos: list[int] = []
    gen = rngs.stream(seed, "ues")
    for i, item in enumerate(items):
        where = f"ues[{i}]"
        if not isinstance(item, Mapping):
            raise ConfigError(where, "expected a mapping")
        traffic = None
        if item.get("avg_rate_mbps") is not None:
            rate = _number(item, "avg_rate_mbps", lo=0, lo_open=True)
            traffic = OnOffConfig(rate * 1e6, **traffic_kw)
        if "count" in item:
            _check_keys(item, UE_GROUP_KEYS, where)
            count = _number(item, "count", lo=1, integer=True)
            x0, y0, x1, y1 = _region(item.get("region"), f"{where}.region", field_m)
            smin, smax = _pair(item.get("speed_mps", 0.0), f"{where}.speed_mps")
            if not 0 <= smin <= smax:
                raise ConfigError(f"{where}.speed_mps", "need 0 <= min <= max")
            for _ in range(count):
                for _attempt in range(1000):
                    p = gen.uniform((x0, y0), (x1, y1))
                    if not _inside_any(p, boxes):
                        break
                speed = gen.uniform(smin, smax) if smax > smin else smin
                heading = gen.uniform(0, 2 * math.pi)
                if item.get("nlos", False):
                    nlos.append(len(ues))
                ues.append(UeSpec(Position(float(p[0]), float(p[1])),
                                  Velocity(float(speed * math.cos(heading)), float(speed * math.sin(heading))),
                                  traffic))
        else:
            _check_keys(item, UE_KEYS, where)
            for key in ("x", "y"):
                if key not in item:
                    raise ConfigError(f"{where}.{key}", "missing required key")
            mcs = item.get("mcs")
            if mcs is not None:
                mcs = _number(item, "mcs", lo=MCS_MIN, hi=MCS_MAX, integer=True)
            ues.append(UeSpec(Position(float(item["x"]), float(item["y"])),
                              Velocity(float(item.get("vx", 0.0)), float(item.get("vy", 0.0))),
                              traffic, mcs))
    return ues, nlos


def scenario_from_config(raw: Mapping[str, Any], seed: int | None = None) -> Scenario:
    """Validate a config mapping and resolve it into a concrete Scenario."""
    cfg = merge_config(raw)
    if seed is not None:
        cfg["seed"] = seed
    seed = _number(cfg, "seed", lo=0, integer=True)

    field_m = _pair(cfg["field_m"], "field_m")
    if min(field_m) <= 0:
        raise ConfigError("field_m", "must be positive")
    if cfg["enb"] is None:
        enb = Position(field_m[0] / 2, field_m[1] / 2)
    else:
        ex, ey = _pair(cfg["enb"], "enb")
        enb = Position(ex, ey)

    subframe_us = _number(cfg, "subframe_us", lo=1, integer=True)
    symbols = _number(cfg, "symbols", lo=1, integer=True)
    control = _number(cfg, "control_symbols", lo=0, hi=symbols - 1, integer=True)
    duration_us = _number(cfg, "duration_ms", lo=0, lo_open=True) * 1000
    if duration_us != int(duration_us) or int(duration_us) % subframe_us:
        raise ConfigError("duration_ms", "must be a whole number of subframes")

    table = cfg["efficiency_table"]
    if table is not None:
        if not isinstance(table, list) or len(table) != MCS_MAX:
            raise ConfigError("efficiency_table", f"expected a list of {MCS_MAX} numbers")
        table = tuple(float(v) for v in table)
    try:
        budget = LinkBudget(
            tx_power_dbm=_number(cfg, "tx_power_dbm"),
            antenna_gain_dbi=_number(cfg, "antenna_gain_dbi"),
            noise_figure_db=_number(cfg, "noise_figure_db", lo=0),
            bandwidth_hz=_number(cfg, "bandwidth_hz", lo=0, lo_open=True),
            carrier_hz=_number(cfg, "carrier_hz", lo=0, lo_open=True),
            nlos_penalty_db=_number(cfg, "nlos_penalty_db", lo=0),
            shadowing_sigma_db=_number(cfg, "shadowing_sigma_db", lo=0),
            shadowing_corr=_number(cfg, "shadowing_corr", lo=0, hi=1, hi_open=True),
            efficiency_table=table,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("efficiency_table", str(exc)) from None

    try:
        policy = Policy(cfg["scheduler"])
    except ValueError:
        raise ConfigError("scheduler", f"unknown scheduler {cfg['scheduler']!r}; "
                                       f"choose from {[p.value for p in Policy]}") from None
    if cfg["gamma_mode"] not in ("mcs", "fixed"):
        raise ConfigError("gamma_mode", "must be 'mcs' or 'fixed'")
    r_ref = None
    if cfg["r_ref_mbps"] is not None:
        r_ref = _number(cfg, "r_ref_mbps", lo=0, lo_open=True) * 1e6
    pf = PfConfig(
        t_c=_number(cfg, "t_c", lo=1),
        alpha=_number(cfg, "alpha", lo=0, lo_open=True),
        beta=_number(cfg, "beta", lo=0, lo_open=True),
        gamma_mode=cfg["gamma_mode"],
        gamma_fixed=_number(cfg, "gamma_fixed", lo=0, lo_open=True),
        r_ref=r_ref,
    )

    traffic_kw = dict(
        on_duration_us=_number(cfg, "on_us", lo=0, lo_open=True),
        off_mean_us=_number(cfg, "off_mean_us", lo=0),
        packet_size_bits=_number(cfg, "packet_bytes", lo=1, integer=True) * 8,
    )
    traffic = OnOffConfig(_number(cfg, "avg_rate_mbps", lo=0, lo_open=True) * 1e6, **traffic_kw)

    boxes = _resolve_obstacles(cfg, field_m, seed)
    ues, nlos = _resolve_ues(cfg, field_m, seed, boxes, traffic, traffic_kw)
    group = cfg["nlos_group"]
    if not isinstance(group, list):
        raise ConfigError("nlos_group", "expected a list of UE indices")
    for k in group:
        if isinstance(k, bool) or not isinstance(k, int) or not 0 <= k < len(ues):
            raise ConfigError("nlos_group", f"unknown UE index {k!r}")
    nlos_group = tuple(sorted(set(nlos) | set(group)))

    try:
        return Scenario(
            field_m=field_m,
            enb=enb,
            ues=tuple(ues),
            obstacles=tuple(boxes),
            traffic=traffic,
            budget=budget,
            subframe=SubframeConfig(subframe_us, symbols, control),
            pf=pf,
            policy=policy,
            duration_us=int(duration_us),
            cqi_delay_subframes=_number(cfg, "cqi_delay", lo=0, integer=True),
            harq=HarqConfig(_number(cfg, "harq_bler", lo=0, hi=1, hi_open=True),
                            _number(cfg, "harq_max_retx", lo=1, integer=True)),
            t_phy_us=_number(cfg, "t_phy_us", lo=0, integer=True),
            seed=seed,
            nlos_group=nlos_group,
            name=str(cfg["name"]),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None


def build_case1(seed: int = 42, **overrides) -> Scenario:
    """10 UEs at 18 m/s, 500 Mbps each; UEs 0-2 roam a box-cluttered quadrant."""
    return scenario_from_config({"base": "case1", **overrides}, seed)


def build_case2(seed: int = 42, **overrides) -> Scenario:
    """10 UEs at random positions and speeds in 300 random boxes, 100 Mbps each."""
    return scenario_from_config({"base": "case2", **overrides}, seed)


def scenario_to_config(sc: Scenario) -> dict[str, Any]:
    """Fully resolved config echo; feeding it back reproduces ``sc``."""
    b, sf, pf, t = sc.budget, sc.subframe, sc.pf, sc.traffic
    ues = []
    for u in sc.ues:
        item = {"x": u.position[0], "y": u.position[1], "vx": u.velocity[0], "vy": u.velocity[1]}
        if u.fixed_mcs is not None:
            item["mcs"] = u.fixed_mcs
        if u.traffic is not None:
            item["avg_rate_mbps"] = u.traffic.avg_rate / 1e6
        ues.append(item)
    return {
        "name": sc.name,
        "seed": sc.seed,
        "duration_ms": sc.duration_us / 1000,
        "field_m": list(sc.field_m),
        "enb": list(sc.enb),
        "bandwidth_hz": b.bandwidth_hz,
        "carrier_hz": b.carrier_hz,
        "tx_power_dbm": b.tx_power_dbm,
        "antenna_gain_dbi": b.antenna_gain_dbi,
        "noise_figure_db": b.noise_figure_db,
        "nlos_penalty_db": b.nlos_penalty_db,
        "shadowing_sigma_db": b.shadowing_sigma_db,
        "shadowing_corr": b.shadowing_corr,
        "efficiency_table": list(b.efficiency_table) if b.efficiency_table else None,
        "subframe_us": sf.duration_us,
        "symbols": sf.symbols_total,
        "control_symbols": sf.control_symbols,
        "scheduler": sc.policy.value,
        "t_c": pf.t_c,
        "alpha": pf.alpha,
        "beta": pf.beta,
        "gamma_mode": pf.gamma_mode,
        "gamma_fixed": pf.gamma_fixed,
        "r_ref_mbps": sc.resolved_pf().r_ref / 1e6,
        "avg_rate_mbps": t.avg_rate / 1e6,
        "on_us": t.on_duration_us,
        "off_mean_us": t.off_mean_us,
        "packet_bytes": t.packet_size_bits // 8,
        "harq_bler": sc.harq.bler,
        "harq_max_retx": sc.harq.max_retx,
        "cqi_delay": sc.cqi_delay_subframes,
        "t_phy_us": sc.t_phy_us,
        "nlos_group": list(sc.nlos_group),
        "obstacles": [{"x": o.center[0], "y": o.center[1], "half_width": o.half_width,
                       "half_height": o.half_height} for o in sc.obstacles],
        "ues": ues,
    }

