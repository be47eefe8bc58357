"""The simulation: node behaviors bound to the event kernel.

Radio semantics: one transmission at a time per node (FIFO queue), all
current graph neighbors are receivers, receptions overlapping the
receiver's own transmission are rejected (half-duplex), and any two
receptions overlapping in time at a common receiver destroy each other
(unslotted random access).  Self-transmit nodes run an isolated
calibration loop; their frames are not delivered to neighbors.

Packet fidelity models bit errors with the closed-form uncoded 16-QAM
BER at the link SNR (frames survive only when every bit survives);
sample fidelity runs the full baseband chain per frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import channel as chan
from .. import consensus as cons
from .. import mac
from .. import perception as pc
from .. import storage as stor
from ..errors import (
    CrcError,
    DisconnectedGraphError,
    FormatError,
    InvariantViolation,
)
from ..phy.chain import demodulate_payload, modulate_payload
from ..phy.config import PhyConfig
from ..rng import stream
from ..topology import (
    ConnectivityGraph,
    ConstantVelocityMobility,
    Deployment,
    RandomWaypointMobility,
    StaticMobility,
    build_graph,
    laplacian_spectrum,
    mean_degree,
    uniform_deployment,
)
from . import events as ev
from .events import EventKernel
from .metrics import MetricsRecord, run_id_for
from .scenario import ScenarioConfig


@dataclass
class _Reception:
    tx_id: int
    collided: bool = False
    hd_blocked: bool = False


@dataclass
class _Transmission:
    tx_id: int
    source: int
    mpdu: mac.Mpdu
    psdu: np.ndarray
    start_s: float
    end_s: float
    receivers: list[int]


@dataclass
class _Node:
    node_id: int
    mode: mac.NodeMode
    guard: mac.HalfDuplexGuard = field(default_factory=mac.HalfDuplexGuard)
    tx_queue: list[mac.Mpdu] = field(default_factory=list)
    tx_busy: bool = False
    active_rx: dict[int, _Reception] = field(default_factory=dict)
    neighbor_table: dict[int, float] = field(default_factory=dict)
    frag_buffers: dict[tuple[int, int], dict[int, mac.Mpdu]] = field(default_factory=dict)
    latest_frame: pc.PointCloudFrame | None = None
    store: stor.NodeStore | None = None
    current_manifest: stor.ObjectManifest | None = None
    current_chunks: dict[bytes, stor.Chunk] = field(default_factory=dict)
    seq: int = 0
    tick: int = 0


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        raw = cfg.raw
        self.seed = cfg.seed
        self.duration = cfg.duration_s
        self.phy = PhyConfig(interleave=bool(raw["phy"]["interleave"]))
        self.soft = bool(raw["phy"]["soft_decisions"])
        self.fidelity = raw["phy_fidelity"]
        self.kernel = EventKernel()
        self.metrics = MetricsRecord(run_id=run_id_for(cfg.effective_dict()), seed=self.seed)
        self._deployment = self._build_deployment()
        self.graph: ConnectivityGraph = build_graph(self._deployment)
        self.nodes: dict[int, _Node] = {}
        for entry, _pos in zip(self._node_entries, self._deployment.positions):
            node = _Node(node_id=entry["id"], mode=mac.NodeMode(entry["mode"]))
            self.nodes[node.node_id] = node
        self._index_of = {e["id"]: k for k, e in enumerate(self._node_entries)}
        self._mobility = self._build_mobility()
        self._channel_kind = self._build_channel()
        self._mac = raw["mac"]
        self._disc = mac.DiscoveryConfig(
            beacon_mean_interval_s=raw["discovery"]["beacon_mean_interval_s"],
            interval_distribution=raw["discovery"]["interval_distribution"],
            uniform_low_s=raw["discovery"]["uniform_low_s"],
            uniform_high_s=raw["discovery"]["uniform_high_s"],
            beacon_payload_bytes=raw["discovery"]["beacon_payload_bytes"],
        )
        self._fusion = pc.FusionConfig(
            sync_window_us=raw["fusion"]["sync_window_us"],
            voxel_size_m=raw["fusion"]["voxel_size_m"],
            frame_of_reference=raw["fusion"]["frame_of_reference"],
        )
        self._generator = self._build_generator()
        self._tx_id = 0
        self._live_tx: dict[int, _Transmission] = {}
        self._link_rngs: dict[tuple[int, int], np.random.Generator] = {}
        self._selftx_rngs: dict[int, np.random.Generator] = {}
        self._storage_setup()
        self._consensus_states: np.ndarray | None = None
        self._flood_covered: dict[int, float] = {}
        self._tx_samples: list[np.ndarray] = []
        self._tx_samples_len = 0

    # --- construction helpers ---------------------------------------------

    def _build_deployment(self) -> Deployment:
        raw = self.cfg.raw
        area = raw["area"]
        if raw["nodes"] is not None:
            self._node_entries = sorted(raw["nodes"], key=lambda e: e["id"])
            pos = np.array([[e["x_m"], e["y_m"]] for e in self._node_entries], dtype=np.float64)
            if pos.size == 0:
                pos = pos.reshape(0, 2)
            return Deployment(
                pos, area["width_m"], area["height_m"], raw["range_r_m"], torus=area["torus"]
            )
        n = raw["node_count"]
        dep = uniform_deployment(
            n,
            area["width_m"],
            area["height_m"],
            raw["range_r_m"],
            stream(self.seed, "placement"),
            torus=area["torus"],
        )
        self._node_entries = [
            {"id": k, "mode": raw["default_mode"], "x_m": float(p[0]), "y_m": float(p[1])}
            for k, p in enumerate(dep.positions)
        ]
        return dep

    def _build_mobility(self):
        mob = self.cfg.raw["mobility"]
        if mob["model"] == "static":
            return StaticMobility()
        if mob["model"] == "constant_velocity":
            v = np.tile(np.asarray(mob["velocity_mps"], dtype=np.float64), (len(self.nodes), 1))
            return ConstantVelocityMobility(v, boundary=mob["boundary"])
        return RandomWaypointMobility(mob["speed_min_mps"], mob["speed_max_mps"])

    def _build_channel(self) -> chan.ChannelKind:
        ch = self.cfg.raw["channel"]
        if ch["kind"] == "loopback":
            return chan.Loopback()
        if ch["kind"] == "awgn":
            return chan.Awgn(ch["snr_db"])
        b = ch["budget"]
        return chan.DistanceAwgn(
            chan.LinkBudget(
                tx_gain_db=b["tx_gain_db"],
                rx_gain_db=b["rx_gain_db"],
                path_loss_exponent=b["path_loss_exponent"],
                reference_loss_db=b["reference_loss_db"],
                noise_floor_dbm=b["noise_floor_dbm"],
            )
        )

    def _build_generator(self) -> pc.Generator:
        g = self.cfg.raw["traffic"]["generator"]
        if g["kind"] == "ring":
            return pc.RingGenerator(radius_m=g["radius_m"], n_points=g["n_points"])
        if g["kind"] == "box_room":
            return pc.BoxRoomGenerator(
                width_m=g["width_m"], depth_m=g["depth_m"], height_m=g["height_m"],
                n_points=g["n_points"],
            )
        return pc.GaussianBlobsGenerator(
            n_blobs=g["n_blobs"], points_per_blob=g["points_per_blob"],
            spread_m=g["spread_m"], extent_m=g["extent_m"],
        )

    def _storage_setup(self) -> None:
        s = self.cfg.raw["storage"]
        if not s["enabled"]:
            return
        overrides = {int(k): v for k, v in s["alpha_by_node"].items()}
        for node in self.nodes.values():
            node.store = stor.NodeStore(
                node_id=node.node_id,
                alpha=overrides.get(node.node_id, s["alpha"]),
                s_max_bytes=s["s_max_bytes"],
            )
        self._fetch_cost = stor.FetchCostModel(
            t_lookup_s=s["fetch"]["t_lookup_s"],
            b_net_bps=s["fetch"]["b_net_bps"],
            t_decode_s=s["fetch"]["t_decode_s"],
        )

    # --- rng streams --------------------------------------------------------

    def _link_rng(self, src: int, dst: int) -> np.random.Generator:
        key = (src, dst)
        if key not in self._link_rngs:
            self._link_rngs[key] = stream(self.seed, "link", src, dst)
        return self._link_rngs[key]

    def _selftx_rng(self, node_id: int) -> np.random.Generator:
        if node_id not in self._selftx_rngs:
            self._selftx_rngs[node_id] = stream(self.seed, "selftx", node_id)
        return self._selftx_rngs[node_id]

    # --- link model ----------------------------------------------------------

    def _link_kind(self, src: int, dst: int) -> chan.ChannelKind:
        kind = self._channel_kind
        if isinstance(kind, chan.DistanceAwgn):
            i, j = self._index_of[src], self._index_of[dst]
            delta = np.abs(self._deployment.positions[i] - self._deployment.positions[j])
            if self._deployment.torus:
                span = np.array([self._deployment.width_m, self._deployment.height_m])
                delta = np.minimum(delta, span - delta)
            d = max(float(np.hypot(*delta)), 1e-3)
            return chan.DistanceAwgn(replace(kind.budget, distance_m=d))
        return kind

    # --- scheduling ------------------------------------------------------------

    def _schedule_initial(self) -> None:
        raw = self.cfg.raw
        if self.duration <= 0:
            return
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.mode in (mac.NodeMode.TX, mac.NodeMode.RX):
                # random phase offset so periodic broadcasts do not all collide
                phase = float(
                    stream(self.seed, "traffic-phase", node_id).uniform(
                        0.0, raw["traffic"]["frame_interval_s"]
                    )
                )
                if phase <= self.duration:
                    self.kernel.schedule(phase, ev.TRAFFIC_TICK, node=node_id)
            elif node.mode == mac.NodeMode.DISCOVERY:
                first = self._disc.draw_interval(stream(self.seed, "beacon", node_id, "first"))
                if first <= self.duration:
                    self.kernel.schedule(first, ev.BEACON, node=node_id)
            elif node.mode == mac.NodeMode.SELF_TRANSMIT:
                self.kernel.schedule(0.0, ev.SELFTX_STEP, node=node_id, k=0)
        if not isinstance(self._mobility, StaticMobility) or raw["topology_trace"]:
            if raw["topology_trace"]:
                self._trace_topology(0.0)
            t = raw["mobility"]["epoch_s"]
            if t <= self.duration:
                self.kernel.schedule(t, ev.MOBILITY_STEP, )
        if raw["consensus"]["enabled"]:
            self._init_consensus()
            t = raw["consensus"]["epoch_s"]
            if t <= self.duration:
                self.kernel.schedule(t, ev.CONSENSUS_EPOCH)
        if raw["storage"]["enabled"]:
            t = raw["storage"]["epoch_s"]
            if t <= self.duration:
                self.kernel.schedule(t, ev.STORAGE_EPOCH)
        if raw["audit_epoch_s"] <= self.duration:
            self.kernel.schedule(raw["audit_epoch_s"], ev.STORAGE_AUDIT)
        if raw["flooding"]["enabled"]:
            self._start_flood()

    # --- the run ---------------------------------------------------------------

    def run(self) -> MetricsRecord:
        self._schedule_initial()
        while True:
            event = self.kernel.pop()
            if event is None:
                break
            self._dispatch(event)
        self._audit(self.kernel.now)
        self._finalize()
        return self.metrics

    def _dispatch(self, event: ev.Event) -> None:
        handler = {
            ev.TRAFFIC_TICK: self._on_traffic,
            ev.BEACON: self._on_beacon,
            ev.TX_END: self._on_tx_end,
            ev.SELFTX_STEP: self._on_selftx,
            ev.MOBILITY_STEP: self._on_mobility,
            ev.CONSENSUS_EPOCH: self._on_consensus,
            ev.STORAGE_EPOCH: self._on_storage,
            ev.STORAGE_AUDIT: self._on_audit,
            ev.FLOOD_DELIVER: self._on_flood,
            ev.FETCH_DONE: self._on_fetch_done,
        }[event.kind]
        handler(event)

    # --- traffic and beacons ---------------------------------------------------

    def _on_traffic(self, event: ev.Event) -> None:
        t = event.time_s
        node = self.nodes[event.payload["node"]]
        frame = pc.generate_frame(
            node.node_id,
            stamp_us=int(round(t * 1e6)),
            generator=self._generator,
            rng=stream(self.seed, "cloud", node.node_id, node.tick),
            pose=self._pose_of(node.node_id),
        )
        node.tick += 1
        node.latest_frame = frame
        if node.mode == mac.NodeMode.TX:
            payload = pc.serialize_frame(frame)
            msdu = mac.Msdu(node.node_id, node.seq, payload, created_at_s=t)
            node.seq += 1
            for mpdu in mac.frame_msdu(msdu, self._mac["max_msdu_bytes"]):
                self._enqueue_tx(node, mpdu, t)
        t_next = t + self.cfg.raw["traffic"]["frame_interval_s"]
        if t_next <= self.duration:
            self.kernel.schedule(t_next, ev.TRAFFIC_TICK, node=node.node_id)

    def _pose_of(self, node_id: int) -> tuple[float, float, float]:
        p = self._deployment.positions[self._index_of[node_id]]
        return (float(p[0]), float(p[1]), 0.0)

    def _on_beacon(self, event: ev.Event) -> None:
        t = event.time_s
        node = self.nodes[event.payload["node"]]
        msdu = mac.Msdu(
            node.node_id, node.seq, bytes(self._disc.beacon_payload_bytes), created_at_s=t
        )
        node.seq += 1
        mpdu = mac.frame_msdu(
            msdu, self._mac["max_msdu_bytes"], frame_type=mac.FrameType.BEACON
        )[0]
        self._enqueue_tx(node, mpdu, t)
        self.metrics.beacons_sent += 1
        t_next = t + self._disc.draw_interval(stream(self.seed, "beacon", node.node_id, node.seq))
        if t_next <= self.duration:
            self.kernel.schedule(t_next, ev.BEACON, node=node.node_id)

    # --- transmission machinery --------------------------------------------------

    def _enqueue_tx(self, node: _Node, mpdu: mac.Mpdu, t: float) -> None:
        node.tx_queue.append(mpdu)
        if not node.tx_busy:
            self._begin_tx(node, t)

    def _begin_tx(self, node: _Node, t: float) -> None:
        mpdu = node.tx_queue.pop(0)
        psdu = mac.psdu_bits(mpdu)
        air = mac.airtime(psdu.size, self.phy)
        end = t + air
        self._tx_id += 1
        receivers = sorted(
            self.nodes[self._node_entries[j]["id"]].node_id
            for j in self.graph.neighbors(self._index_of[node.node_id])
        )
        tx = _Transmission(self._tx_id, node.node_id, mpdu, psdu, t, end, receivers)
        self._live_tx[tx.tx_id] = tx
        node.tx_busy = True
        node.guard.begin_tx(t, end)
        # a node that starts transmitting loses everything it was receiving
        for rec in node.active_rx.values():
            rec.hd_blocked = True
        for rid in receivers:
            receiver = self.nodes[rid]
            rec = _Reception(tx_id=tx.tx_id)
            if not receiver.guard.accepts_rx(t, end):
                rec.hd_blocked = True
            if receiver.active_rx:
                for other in receiver.active_rx.values():
                    other.collided = True
                rec.collided = True
            receiver.active_rx[tx.tx_id] = rec
        self.metrics.frames_sent += 1
        self.kernel.schedule(end, ev.TX_END, tx_id=tx.tx_id)

    def _on_tx_end(self, event: ev.Event) -> None:
        tx = self._live_tx.pop(event.payload["tx_id"])
        source = self.nodes[tx.source]
        source.tx_busy = False
        source.guard.end_tx()
        for rid in tx.receivers:
            receiver = self.nodes[rid]
            rec = receiver.active_rx.pop(tx.tx_id, None)
            if rec is None:
                continue
            if rec.hd_blocked:
                self.metrics.half_duplex_losses += 1
            elif rec.collided:
                self.metrics.collision_losses += 1
            else:
                self._receive(receiver, tx, event.time_s)
        if source.tx_queue:
            self._begin_tx(source, event.time_s)

    def _receive(self, receiver: _Node, tx: _Transmission, t: float) -> None:
        rng = self._link_rng(tx.source, receiver.node_id)
        if self._mac["p_miss"] > 0 and rng.random() < self._mac["p_miss"]:
            self.metrics.missed_detections += 1
            return
        kind = self._link_kind(tx.source, receiver.node_id)
        desynced = self._mac["p_desync"] > 0 and rng.random() < self._mac["p_desync"]
        if self.fidelity == "packet":
            if isinstance(kind, chan.Loopback):
                n_err = 0
            else:
                ber = chan.analytic_ber_16qam(chan.channel_snr_db(kind))
                n_err = int(rng.binomial(tx.psdu.size, ber)) if ber > 0 else 0
            if n_err > 0 or desynced:
                self.metrics.frames_crc_failed += 1
                return
            mpdu = tx.mpdu
        else:
            frame = modulate_payload(tx.psdu, self.phy)
            self._collect_tx_samples(frame.samples)
            rx_samples = chan.apply_channel(frame.samples, kind, rng)
            noise_var = (
                0.0
                if isinstance(kind, chan.Loopback)
                else chan.awgn_noise_variance(frame.samples, chan.channel_snr_db(kind))
            )
            rx_bits, rx_symbols = demodulate_payload(
                rx_samples, tx.psdu.size, self.phy, noise_var=noise_var, soft=self.soft
            )
            if self.cfg.raw["instrumentation"]["constellation"] and self.metrics.constellation is None:
                self.metrics.constellation = rx_symbols
            if desynced:
                rx_bits = mac._apply_desync(rx_bits, rng)
            try:
                mpdu = mac.mpdu_from_bytes(mac.bits_to_bytes(rx_bits))
            except (CrcError, FormatError):
                self.metrics.frames_crc_failed += 1
                return
        self._deliver(receiver, mpdu, t)

    def _collect_tx_samples(self, samples: np.ndarray) -> None:
        if not self.cfg.raw["instrumentation"]["spectrum"]:
            return
        if self._tx_samples_len < 4096:
            self._tx_samples.append(samples)
            self._tx_samples_len += samples.size

    def _deliver(self, receiver: _Node, mpdu: mac.Mpdu, t: float) -> None:
        if mpdu.frame_type == mac.FrameType.BEACON:
            receiver.neighbor_table[mpdu.source_id] = t
            self.metrics.beacons_received += 1
            self.metrics.discovery_rows.append(
                (t, receiver.node_id, len(receiver.neighbor_table))
            )
            return
        self.metrics.frames_delivered += 1
        key = (mpdu.source_id, mpdu.seq)
        buf = receiver.frag_buffers.setdefault(key, {})
        buf[mpdu.frag_index] = mpdu
        if len(buf) < mpdu.frag_count:
            return
        msdu = mac.deframe_mpdus(list(buf.values()), created_at_s=t)
        del receiver.frag_buffers[key]
        self._consume_payload(receiver, msdu, t)

    def _consume_payload(self, receiver: _Node, msdu: mac.Msdu, t: float) -> None:
        try:
            remote = pc.deserialize_frame(msdu.payload)
        except FormatError:
            return
        if self.cfg.raw["storage"]["enabled"] and receiver.store is not None:
            manifest, chunks = stor.chunk_object(
                msdu.payload, self.cfg.raw["storage"]["v_chunk_bytes"]
            )
            stor.retain_local(
                receiver.store,
                manifest,
                chunks,
                stream(self.seed, "retain", receiver.node_id, msdu.source_id, msdu.seq),
                stored_at=t,
                selection=self.cfg.raw["storage"]["selection"],
                evict_policy=self.cfg.raw["storage"]["eviction"],
            )
        if not self.cfg.raw["fusion"]["enabled"] or receiver.latest_frame is None:
            return
        fused = pc.fuse(receiver.latest_frame, remote, self._fusion)
        if isinstance(fused, pc.FusionRejection):
            self.metrics.fusion_rejections += 1
        else:
            self.metrics.fused_rows.append(
                (t, receiver.node_id, remote.source_id, fused.point_count)
            )

    # --- self transmit -------------------------------------------------------------

    def _on_selftx(self, event: ev.Event) -> None:
        t = event.time_s
        node = self.nodes[event.payload["node"]]
        k = event.payload["k"]
        selftx = self.cfg.raw["selftransmit"]
        result = mac.run_self_transmit(
            n_packets=1,
            phy_cfg=self.phy,
            kind=self._channel_kind,
            rng=self._selftx_rng(node.node_id),
            payload_bytes=selftx["payload_bytes"],
            source_id=node.node_id,
            fidelity=self.fidelity,
            p_desync=self._mac["p_desync"],
            p_miss=self._mac["p_miss"],
            soft=self.soft,
            start_time_s=t,
        )
        self.metrics.dropped_packets += result.dropped_packets
        if result.rx_symbols is not None:
            if self.cfg.raw["instrumentation"]["constellation"] and self.metrics.constellation is None:
                self.metrics.constellation = result.rx_symbols
            if result.tx_samples is not None:
                self._collect_tx_samples(result.tx_samples)
        air = mac.airtime(
            (selftx["payload_bytes"] + mac.MPDU_OVERHEAD_BYTES) * 8, self.phy
        )
        for rec in result.records:
            self.metrics.add_ber(
                node.node_id, replace(rec, packet_index=k)
            )
        if k + 1 < selftx["n_packets"] and t + air <= self.duration:
            self.kernel.schedule(t + air, ev.SELFTX_STEP, node=node.node_id, k=k + 1)

    # --- mobility ---------------------------------------------------------------------

    def _on_mobility(self, event: ev.Event) -> None:
        t = event.time_s
        dt = self.cfg.raw["mobility"]["epoch_s"]
        self._deployment = self._mobility.step(
            self._deployment, dt, stream(self.seed, "mobility", int(round(t * 1e9)))
        )
        self.graph = build_graph(self._deployment)
        if self.cfg.raw["topology_trace"]:
            self._trace_topology(t)
        if t + dt <= self.duration:
            self.kernel.schedule(t + dt, ev.MOBILITY_STEP)

    def _trace_topology(self, t: float) -> None:
        degrees = self.graph.degrees
        for k, entry in enumerate(self._node_entries):
            p = self._deployment.positions[k]
            self.metrics.topology_rows.append(
                (t, entry["id"], float(p[0]), float(p[1]), int(degrees[k]))
            )

    # --- consensus ------------------------------------------------------------------

    def _init_consensus(self) -> None:
        c = self.cfg.raw["consensus"]
        n, d = len(self.nodes), c["dimension"]
        if c["init"] == "random":
            self._consensus_states = stream(self.seed, "consensus").normal(0.0, 5.0, (n, d))
        else:
            states = np.zeros((n, d))
            for k, entry in enumerate(self._node_entries):
                frame = pc.generate_frame(
                    entry["id"], 0, self._generator, stream(self.seed, "cloud", entry["id"], "init")
                )
                centroid = frame.points.mean(axis=0)
                states[k, : min(d, 3)] = centroid[: min(d, 3)]
            self._consensus_states = states

    def _consensus_scheme(self) -> cons.WeightScheme:
        c = self.cfg.raw["consensus"]
        if c["scheme"] == "constant":
            return cons.ConstantWeights(c["epsilon"])
        return cons.MetropolisWeights()

    def _on_consensus(self, event: ev.Event) -> None:
        t = event.time_s
        c = self.cfg.raw["consensus"]
        states = self._consensus_states
        received = None
        if c["lossy"] and not isinstance(self._channel_kind, chan.Loopback):
            n = len(self._node_entries)
            received = np.zeros((n, n), dtype=bool)
            state_bits = (mac.MPDU_OVERHEAD_BYTES + 8 * c["dimension"]) * 8
            for i, ei in enumerate(self._node_entries):
                for j, ej in enumerate(self._node_entries):
                    if i == j or not self.graph.adjacency[i, j]:
                        continue
                    kind = self._link_kind(ej["id"], ei["id"])
                    per = chan.packet_error_prob(
                        chan.analytic_ber_16qam(chan.channel_snr_db(kind)), state_bits
                    )
                    received[i, j] = self._link_rng(ej["id"], ei["id"]).random() >= per
        new_states = cons.consensus_step(states, self.graph, self._consensus_scheme(), received)
        self._consensus_states = new_states
        lambda2 = (
            laplacian_spectrum(self.graph).lambda2 if self.graph.n >= 2 else 0.0
        )
        center = new_states.mean(axis=0)
        for k, entry in enumerate(self._node_entries):
            self.metrics.consensus_rows.append(
                (t, entry["id"], float(np.linalg.norm(new_states[k] - center)), lambda2)
            )
        t_next = t + c["epoch_s"]
        if t_next <= self.duration:
            self.kernel.schedule(t_next, ev.CONSENSUS_EPOCH)

    # --- storage ----------------------------------------------------------------------

    def _on_storage(self, event: ev.Event) -> None:
        t = event.time_s
        s = self.cfg.raw["storage"]
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.store is None or node.latest_frame is None:
                continue
            payload = pc.serialize_frame(node.latest_frame)
            manifest, chunks = stor.chunk_object(payload, s["v_chunk_bytes"])
            node.current_manifest = manifest
            node.current_chunks = {c.cid: c for c in chunks}
            stor.retain_local(
                node.store,
                manifest,
                chunks,
                stream(self.seed, "retain", node_id, "own", node.tick),
                stored_at=t,
                selection=s["selection"],
                evict_policy=s["eviction"],
            )
            # peers in range cache their own fraction of the announced object
            for j in self.graph.neighbors(self._index_of[node_id]):
                peer = self.nodes[self._node_entries[j]["id"]]
                if peer.store is None:
                    continue
                stor.retain_local(
                    peer.store,
                    manifest,
                    chunks,
                    stream(self.seed, "retain", peer.node_id, node_id, node.tick),
                    stored_at=t,
                    selection=s["selection"],
                    evict_policy=s["eviction"],
                )
        # fetch chunks of the own object that are not held locally
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.store is None or node.current_manifest is None:
                continue
            view = [
                (self.nodes[self._node_entries[j]["id"]].store, self._fetch_cost)
                for j in self.graph.neighbors(self._index_of[node_id])
                if self.nodes[self._node_entries[j]["id"]].store is not None
            ]
            for cid in node.current_manifest.chunk_cids:
                if node.store.has(cid):
                    continue
                try:
                    providers = stor.lookup_providers(cid, view)
                except stor.ChunkNotFoundError:
                    continue
                provider, cost = providers[0]
                result = stor.fetch_chunk(cid, provider, cost)
                done = t + result.latency_s
                if done <= self.duration:
                    self.kernel.schedule(
                        done,
                        ev.FETCH_DONE,
                        node=node_id,
                        cid=cid,
                        t_lookup=result.t_lookup_s,
                        t_transfer=result.t_transfer_s,
                        t_decode=result.t_decode_s,
                        latency=result.latency_s,
                    )
        t_next = t + s["epoch_s"]
        if t_next <= self.duration:
            self.kernel.schedule(t_next, ev.STORAGE_EPOCH)

    def _on_fetch_done(self, event: ev.Event) -> None:
        p = event.payload
        node = self.nodes[p["node"]]
        self.metrics.fetch_rows.append(
            (event.time_s, p["node"], p["t_lookup"], p["t_transfer"], p["t_decode"], p["latency"])
        )
        if node.store is not None and node.current_manifest is not None:
            chunk = node.current_chunks.get(p["cid"])
            if chunk is not None:
                node.store.put(chunk, node.current_manifest.root_cid, stored_at=event.time_s)

    # --- audits -----------------------------------------------------------------------

    def _on_audit(self, event: ev.Event) -> None:
        self._audit(event.time_s)
        t_next = event.time_s + self.cfg.raw["audit_epoch_s"]
        if t_next <= self.duration:
            self.kernel.schedule(t_next, ev.STORAGE_AUDIT)

    def _audit(self, t: float) -> None:
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            # half-duplex: any reception overlapping this node's own live
            # transmission must have been rejected
            if node.tx_busy:
                for rec in node.active_rx.values():
                    if not rec.hd_blocked:
                        raise InvariantViolation(
                            f"node {node_id} holds an accepted reception during its own TX"
                        )
            if node.store is None:
                continue
            store = node.store
            held = store.held_bytes
            if held > store.s_max_bytes:
                raise InvariantViolation(
                    f"node {node_id} store {held} bytes exceeds capacity {store.s_max_bytes}"
                )
            if node.current_manifest is not None:
                peers = {
                    self.nodes[self._node_entries[j]["id"]].node_id: self.nodes[
                        self._node_entries[j]["id"]
                    ].store
                    for j in self.graph.neighbors(self._index_of[node_id])
                    if self.nodes[self._node_entries[j]["id"]].store is not None
                }
                stor.update_cache_counts(store, node.current_manifest, peers)
            s_eff = stor.effective_storage(store, self.cfg.raw["storage"]["v_chunk_bytes"])
            recount = sum(len(d) for d in store._held.values()) + self.cfg.raw["storage"][
                "v_chunk_bytes"
            ] * sum(store.cache_counts.values())
            if s_eff != recount:
                raise InvariantViolation(
                    f"node {node_id} effective storage {s_eff} != recount {recount}"
                )
            self.metrics.store_audits.append(
                {
                    "t": t,
                    "node": node_id,
                    "s_bytes": held,
                    "s_max": store.s_max_bytes,
                    "s_eff": s_eff,
                    "chunks_held": store.chunk_count,
                    "c_ij_total": sum(store.cache_counts.values()),
                }
            )

    # --- flooding -------------------------------------------------------------------------

    def _start_flood(self) -> None:
        flood = self.cfg.raw["flooding"]
        spectrum = laplacian_spectrum(self.graph) if self.graph.n >= 2 else None
        if spectrum is not None and not spectrum.is_connected:
            raise DisconnectedGraphError("flooding workload requires a connected topology")
        source = flood["source_id"]
        self._flood_covered = {source: 0.0}
        tau = flood["link_latency_s"]
        for j in self.graph.neighbors(self._index_of[source]):
            self.kernel.schedule(
                tau, ev.FLOOD_DELIVER, node=self._node_entries[j]["id"]
            )

    def _on_flood(self, event: ev.Event) -> None:
        node_id = event.payload["node"]
        if node_id in self._flood_covered:
            return
        self._flood_covered[node_id] = event.time_s
        tau = self.cfg.raw["flooding"]["link_latency_s"]
        for j in self.graph.neighbors(self._index_of[node_id]):
            nid = self._node_entries[j]["id"]
            if nid not in self._flood_covered:
                self.kernel.schedule(event.time_s + tau, ev.FLOOD_DELIVER, node=nid)

    def _finalize(self) -> None:
        if self.cfg.raw["flooding"]["enabled"]:
            n = len(self.nodes)
            kbar = mean_degree(self.graph)
            tau = self.cfg.raw["flooding"]["link_latency_s"]
            covered = len(self._flood_covered)
            self.metrics.tprop = {
                "measured_s": max(self._flood_covered.values()) if covered == n else None,
                "model_s": (n / kbar) * tau if kbar > 0 else None,
                "covered": covered,
                "nodes": n,
                "per_node_s": {str(k): v for k, v in sorted(self._flood_covered.items())},
            }
        if self._tx_samples:
            self.metrics.spectrum_samples = np.concatenate(self._tx_samples)


def run_scenario(cfg: ScenarioConfig, outdir=None) -> MetricsRecord:
    """Build, run, and (optionally) emit artifacts for a scenario."""
    sim = Simulation(cfg)
    metrics = sim.run()
    if outdir is not None:
        metrics.emit(outdir, cfg.effective_dict())
    return metrics


@dataclass(frozen=True)
class TpropResult:
    measured_s: float | None
    model_s: float | None
    per_node_s: dict[int, float]


def measure_t_prop(cfg: ScenarioConfig) -> TpropResult:
    """Flooding coverage delay, measured, with the degree-model prediction.

    The model value N/mean_degree * link_latency is reported alongside the
    measurement, not enforced against it.
    """
    if not cfg.raw["flooding"]["enabled"]:
        raise InvariantViolation("scenario must enable the flooding workload")
    sim = Simulation(cfg)
    metrics = sim.run()
    tp = metrics.tprop or {}
    return TpropResult(
        measured_s=tp.get("measured_s"),
        model_s=tp.get("model_s"),
        per_node_s={int(k): v for k, v in tp.get("per_node_s", {}).items()},
    )
