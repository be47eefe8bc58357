"""Scenario files: YAML key-value descriptions of a run, strictly validated.

Validation is strict (unknown keys are errors) and exhaustive: every
problem is collected and reported together, not just the first.  The
effective configuration (defaults filled in) round-trips through
`ScenarioConfig.effective_dict`.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ScenarioValidationError

SAMPLE_MODE_MAX_NODES = 16  # sample-level fidelity is for small channel-quality runs

DEFAULTS: dict = {
    "seed": 0,
    "duration_s": 1.0,
    "phy_fidelity": "packet",  # packet | sample
    "area": {"width_m": 1000.0, "height_m": 1000.0, "torus": False},
    "range_r_m": 100.0,
    "nodes": None,  # explicit [{id, mode, x_m, y_m}, ...]
    "node_count": None,  # ... or uniform placement of node_count nodes
    "default_mode": "discovery",
    "mobility": {
        "model": "static",  # static | constant_velocity | random_waypoint
        "epoch_s": 0.5,
        "velocity_mps": [0.0, 0.0],
        "boundary": "wrap",  # wrap | reflect
        "speed_min_mps": 1.0,
        "speed_max_mps": 10.0,
    },
    "channel": {
        "kind": "loopback",  # loopback | awgn | distance_awgn
        "snr_db": 20.0,
        "budget": {
            "tx_gain_db": 10.0,
            "rx_gain_db": 0.0,
            "path_loss_exponent": 2.0,
            "reference_loss_db": 40.0,
            "noise_floor_dbm": -90.0,
        },
    },
    "phy": {"interleave": True, "soft_decisions": True},
    "mac": {"max_msdu_bytes": 6996, "p_desync": 0.0, "p_miss": 0.0},
    "discovery": {
        "beacon_mean_interval_s": 0.1,
        "interval_distribution": "exponential",  # exponential | uniform
        "uniform_low_s": None,
        "uniform_high_s": None,
        "beacon_payload_bytes": 64,
    },
    "traffic": {
        "frame_interval_s": 0.1,
        "generator": {
            "kind": "ring",  # ring | box_room | gaussian_blobs
            "radius_m": 5.0,
            "n_points": 360,
            "width_m": 10.0,
            "depth_m": 10.0,
            "height_m": 3.0,
            "n_blobs": 4,
            "points_per_blob": 128,
            "spread_m": 0.5,
            "extent_m": 20.0,
        },
    },
    "fusion": {
        "enabled": True,
        "sync_window_us": 100_000,
        "voxel_size_m": 0.1,
        "frame_of_reference": "world",  # world | ego
    },
    "storage": {
        "enabled": False,
        "alpha": 0.5,
        "alpha_by_node": {},
        "s_max_bytes": 10_485_760,
        "v_chunk_bytes": 262_144,
        "selection": "random",  # random | prefix
        "eviction": "oldest_first",  # oldest_first | lowest_demand_first
        "epoch_s": 0.5,
        "fetch": {"t_lookup_s": 0.02, "b_net_bps": 18e6, "t_decode_s": 0.005},
    },
    "consensus": {
        "enabled": False,
        "dimension": 2,
        "scheme": "metropolis",  # metropolis | constant
        "epsilon": None,  # required for the constant scheme
        "epoch_s": 0.1,
        "init": "random",  # random | cloud_centroid
        "lossy": False,
    },
    "selftransmit": {"n_packets": 29, "payload_bytes": 6996},
    "flooding": {"enabled": False, "source_id": 0, "link_latency_s": 0.002},
    "audit_epoch_s": 0.5,
    "topology_trace": False,
    "instrumentation": {"constellation": False, "spectrum": False},
}

_MODES = ("tx", "rx", "self_transmit", "discovery")


@dataclass
class ScenarioConfig:
    """Validated scenario; `raw` is the effective (defaults-filled) dict."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __getitem__(self, key: str):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def duration_s(self) -> float:
        return float(self.raw["duration_s"])

    def node_entries(self) -> list[dict]:
        return self.raw["nodes"]

    def effective_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _merge(defaults: dict, user: dict, path: str, errors: list[str]) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            errors.append(f"{where}: unknown key")
            continue
        if isinstance(defaults[key], dict) and key != "alpha_by_node":
            if isinstance(value, dict):
                out[key] = _merge(defaults[key], value, where, errors)
            else:
                errors.append(f"{where}: expected a mapping")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, errors: list[str], message: str) -> None:
    if not cond:
        errors.append(message)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_scenario(user: dict) -> tuple[ScenarioConfig | None, list[str]]:
    """Merge with defaults and check every module precondition.

    Returns (config, []) on success or (None, all errors found).
    """
    errors: list[str] = []
    if not isinstance(user, dict):
        return None, ["scenario must be a mapping"]
    raw = _merge(DEFAULTS, user, "", errors)

    _require(isinstance(raw["seed"], int) and raw["seed"] >= 0, errors, "seed: must be a nonnegative integer")
    _require(_is_num(raw["duration_s"]) and raw["duration_s"] >= 0, errors, "duration_s: must be >= 0")
    _require(raw["phy_fidelity"] in ("packet", "sample"), errors, "phy_fidelity: must be packet or sample")
    area = raw["area"]
    _require(_is_num(area["width_m"]) and area["width_m"] > 0, errors, "area.width_m: must be positive")
    _require(_is_num(area["height_m"]) and area["height_m"] > 0, errors, "area.height_m: must be positive")
    _require(_is_num(raw["range_r_m"]) and raw["range_r_m"] > 0, errors, "range_r_m: must be positive")

    # nodes: explicit list or uniform placement
    nodes = raw["nodes"]
    if nodes is None and raw["node_count"] is None:
        errors.append("nodes: provide an explicit node list or node_count")
    if nodes is not None:
        if not isinstance(nodes, list) or not nodes:
            errors.append("nodes: must be a nonempty list")
        else:
            seen: set[int] = set()
            checked = []
            for k, entry in enumerate(nodes):
                if not isinstance(entry, dict):
                    errors.append(f"nodes[{k}]: must be a mapping")
                    continue
                known = {"id", "mode", "x_m", "y_m", "alpha"}
                for key in entry:
                    if key not in known:
                        errors.append(f"nodes[{k}].{key}: unknown key")
                entry = dict(entry)
                if "id" not in entry or not isinstance(entry["id"], int):
                    errors.append(f"nodes[{k}].id: required integer")
                    continue
                if entry["id"] in seen:
                    errors.append(f"nodes[{k}].id: duplicate node id {entry['id']}")
                seen.add(entry["id"])
                entry.setdefault("mode", raw["default_mode"])
                if entry["mode"] not in _MODES:
                    errors.append(f"nodes[{k}].mode: must be one of {_MODES}")
                for coord, limit in (("x_m", area["width_m"]), ("y_m", area["height_m"])):
                    v = entry.get(coord, 0.0)
                    if not _is_num(v) or not 0 <= v <= limit:
                        errors.append(f"nodes[{k}].{coord}: must lie in [0, {limit}]")
                    entry.setdefault(coord, 0.0)
                checked.append(entry)
            raw["nodes"] = checked
    else:
        _require(
            isinstance(raw["node_count"], int) and raw["node_count"] >= 1,
            errors,
            "node_count: must be a positive integer",
        )
        _require(raw["default_mode"] in _MODES, errors, f"default_mode: must be one of {_MODES}")

    mob = raw["mobility"]
    _require(
        mob["model"] in ("static", "constant_velocity", "random_waypoint"),
        errors,
        "mobility.model: unknown model",
    )
    _require(_is_num(mob["epoch_s"]) and mob["epoch_s"] > 0, errors, "mobility.epoch_s: must be positive")
    _require(mob["boundary"] in ("wrap", "reflect"), errors, "mobility.boundary: wrap or reflect")
    if mob["model"] == "random_waypoint":
        _require(
            _is_num(mob["speed_min_mps"]) and _is_num(mob["speed_max_mps"])
            and 0 < mob["speed_min_mps"] <= mob["speed_max_mps"],
            errors,
            "mobility: need 0 < speed_min_mps <= speed_max_mps",
        )

    ch = raw["channel"]
    _require(ch["kind"] in ("loopback", "awgn", "distance_awgn"), errors, "channel.kind: unknown kind")
    _require(_is_num(ch["snr_db"]), errors, "channel.snr_db: must be a number")
    budget = ch["budget"]
    _require(
        _is_num(budget["path_loss_exponent"]) and budget["path_loss_exponent"] >= 2,
        errors,
        "channel.budget.path_loss_exponent: must be >= 2",
    )

    mac = raw["mac"]
    _require(
        isinstance(mac["max_msdu_bytes"], int) and mac["max_msdu_bytes"] >= 1,
        errors,
        "mac.max_msdu_bytes: must be a positive integer",
    )
    for p in ("p_desync", "p_miss"):
        _require(_is_num(mac[p]) and 0 <= mac[p] <= 1, errors, f"mac.{p}: must lie in [0, 1]")

    disc = raw["discovery"]
    _require(
        _is_num(disc["beacon_mean_interval_s"]) and disc["beacon_mean_interval_s"] > 0,
        errors,
        "discovery.beacon_mean_interval_s: must be positive",
    )
    _require(
        disc["interval_distribution"] in ("exponential", "uniform"),
        errors,
        "discovery.interval_distribution: exponential or uniform",
    )
    _require(
        isinstance(disc["beacon_payload_bytes"], int) and disc["beacon_payload_bytes"] >= 1,
        errors,
        "discovery.beacon_payload_bytes: must be a positive integer",
    )

    traffic = raw["traffic"]
    _require(
        _is_num(traffic["frame_interval_s"]) and traffic["frame_interval_s"] > 0,
        errors,
        "traffic.frame_interval_s: must be positive",
    )
    _require(
        traffic["generator"]["kind"] in ("ring", "box_room", "gaussian_blobs"),
        errors,
        "traffic.generator.kind: unknown generator",
    )

    fusion = raw["fusion"]
    _require(
        isinstance(fusion["sync_window_us"], int) and fusion["sync_window_us"] > 0,
        errors,
        "fusion.sync_window_us: must be a positive integer",
    )
    _require(_is_num(fusion["voxel_size_m"]) and fusion["voxel_size_m"] > 0, errors, "fusion.voxel_size_m: must be positive")
    _require(
        fusion["frame_of_reference"] in ("world", "ego"),
        errors,
        "fusion.frame_of_reference: world or ego",
    )

    stor = raw["storage"]
    alphas = {"storage.alpha": stor["alpha"]}
    if isinstance(stor["alpha_by_node"], dict):
        for nid, a in stor["alpha_by_node"].items():
            alphas[f"storage.alpha_by_node[{nid}]"] = a
    else:
        errors.append("storage.alpha_by_node: must be a mapping of node id to alpha")
    for where, a in alphas.items():
        _require(
            _is_num(a) and 0.0 <= a <= 1.0,
            errors,
            f"{where}: retained fraction {a!r} outside the [0, 1] bound",
        )
    _require(
        isinstance(stor["s_max_bytes"], int) and stor["s_max_bytes"] >= 0,
        errors,
        "storage.s_max_bytes: must be a nonnegative integer",
    )
    _require(
        isinstance(stor["v_chunk_bytes"], int) and stor["v_chunk_bytes"] >= 1,
        errors,
        "storage.v_chunk_bytes: must be a positive integer",
    )
    _require(stor["selection"] in ("random", "prefix"), errors, "storage.selection: random or prefix")
    _require(
        stor["eviction"] in ("oldest_first", "lowest_demand_first"),
        errors,
        "storage.eviction: oldest_first or lowest_demand_first",
    )
    fetch = stor["fetch"]
    _require(_is_num(fetch["b_net_bps"]) and fetch["b_net_bps"] > 0, errors, "storage.fetch.b_net_bps: must be positive")
    for key in ("t_lookup_s", "t_decode_s"):
        _require(_is_num(fetch[key]) and fetch[key] >= 0, errors, f"storage.fetch.{key}: must be >= 0")

    cons = raw["consensus"]
    _require(
        isinstance(cons["dimension"], int) and cons["dimension"] >= 1,
        errors,
        "consensus.dimension: must be a positive integer",
    )
    _require(cons["scheme"] in ("metropolis", "constant"), errors, "consensus.scheme: metropolis or constant")
    if cons["scheme"] == "constant":
        _require(
            _is_num(cons["epsilon"]) and cons["epsilon"] is not None and cons["epsilon"] > 0,
            errors,
            "consensus.epsilon: required positive number for the constant scheme",
        )
    _require(_is_num(cons["epoch_s"]) and cons["epoch_s"] > 0, errors, "consensus.epoch_s: must be positive")
    _require(cons["init"] in ("random", "cloud_centroid"), errors, "consensus.init: random or cloud_centroid")

    selftx = raw["selftransmit"]
    _require(
        isinstance(selftx["n_packets"], int) and selftx["n_packets"] >= 1,
        errors,
        "selftransmit.n_packets: must be a positive integer",
    )
    _require(
        isinstance(selftx["payload_bytes"], int)
        and 1 <= selftx["payload_bytes"] <= mac["max_msdu_bytes"],
        errors,
        "selftransmit.payload_bytes: must lie in [1, mac.max_msdu_bytes]",
    )

    flood = raw["flooding"]
    _require(
        _is_num(flood["link_latency_s"]) and flood["link_latency_s"] > 0,
        errors,
        "flooding.link_latency_s: must be positive",
    )
    _require(_is_num(raw["audit_epoch_s"]) and raw["audit_epoch_s"] > 0, errors, "audit_epoch_s: must be positive")

    # cross-field checks
    n_nodes = len(raw["nodes"]) if raw["nodes"] is not None else (raw["node_count"] or 0)
    if raw["phy_fidelity"] == "sample" and n_nodes > SAMPLE_MODE_MAX_NODES:
        errors.append(
            f"phy_fidelity: sample mode is capped at {SAMPLE_MODE_MAX_NODES} nodes (got {n_nodes})"
        )
    if flood["enabled"] and raw["nodes"] is not None:
        ids = {e["id"] for e in raw["nodes"] if isinstance(e, dict) and "id" in e}
        if ids and flood["source_id"] not in ids:
            errors.append(f"flooding.source_id: node {flood['source_id']} does not exist")
    if cons["enabled"] and n_nodes < 2:
        errors.append("consensus.enabled: needs at least two nodes")

    if errors:
        return None, sorted(errors)
    return ScenarioConfig(raw=raw), []


def scenario_from_dict(user: dict) -> ScenarioConfig:
    cfg, errors = validate_scenario(user)
    if errors:
        raise ScenarioValidationError(errors)
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file; raises with every error found."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        user = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioValidationError([f"not valid YAML: {exc}"]) from exc
    if user is None:
        user = {}
    return scenario_from_dict(user)


def dump_effective(cfg: ScenarioConfig) -> str:
    """Echo the effective configuration as canonical YAML."""
    return yaml.safe_dump(cfg.effective_dict(), sort_keys=True, default_flow_style=False)
