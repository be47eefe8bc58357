"""Run metrics: append-only accumulators and their atomic artifact writers."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..io_utils import write_csv, write_json, write_jsonl
from ..phy.chain import BerRecord


@dataclass
class MetricsRecord:
    run_id: str = ""
    seed: int = 0
    ber_records: dict[int, list[BerRecord]] = field(default_factory=dict)
    dropped_packets: int = 0
    frames_sent: int = 0
    frames_delivered: int = 0
    frames_crc_failed: int = 0
    collision_losses: int = 0
    half_duplex_losses: int = 0
    missed_detections: int = 0
    beacons_sent: int = 0
    beacons_received: int = 0
    discovery_rows: list[tuple] = field(default_factory=list)  # t, node, table_size
    fused_rows: list[tuple] = field(default_factory=list)  # t, node, remote, points
    fusion_rejections: int = 0
    consensus_rows: list[tuple] = field(default_factory=list)  # t, node, disagreement, lambda2
    topology_rows: list[tuple] = field(default_factory=list)  # t, node, x, y, degree
    store_audits: list[dict] = field(default_factory=list)
    fetch_rows: list[tuple] = field(default_factory=list)  # t, node, lookup, transfer, decode, total
    tprop: dict | None = None
    constellation: np.ndarray | None = None
    spectrum_samples: np.ndarray | None = None

    def add_ber(self, node_id: int, record: BerRecord) -> None:
        self.ber_records.setdefault(node_id, []).append(record)

    def all_ber_records(self) -> list[BerRecord]:
        out: list[BerRecord] = []
        for node_id in sorted(self.ber_records):
            out.extend(self.ber_records[node_id])
        return out

    def summary(self) -> dict:
        records = self.all_ber_records()
        bers = [r.ber for r in records]
        summary = {
            "run_id": self.run_id,
            "seed": self.seed,
            "mean_ber": float(np.mean(bers)) if bers else 0.0,
            "ber_std": float(np.std(bers)) if bers else 0.0,
            "mean_bits": float(np.mean([r.bits_compared for r in records])) if records else 0.0,
            "packets": len(records),
            "total_bits": int(sum(r.bits_compared for r in records)),
            "dropped_packets": self.dropped_packets,
            "frames_sent": self.frames_sent,
            "frames_delivered": self.frames_delivered,
            "frames_crc_failed": self.frames_crc_failed,
            "collision_losses": self.collision_losses,
            "half_duplex_losses": self.half_duplex_losses,
            "missed_detections": self.missed_detections,
            "beacons_sent": self.beacons_sent,
            "beacons_received": self.beacons_received,
            "fused_clouds": len(self.fused_rows),
            "fusion_rejections": self.fusion_rejections,
            "fetches": len(self.fetch_rows),
            "mean_fetch_latency_s": (
                float(np.mean([row[5] for row in self.fetch_rows])) if self.fetch_rows else 0.0
            ),
        }
        if self.tprop is not None:
            summary["tprop"] = self.tprop
        return summary

    def emit(self, outdir: str | Path, effective_config: dict | None = None) -> None:
        """Write every artifact atomically; identical runs emit identical bytes."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "summary.json", self.summary())
        if effective_config is not None:
            write_json(out / "effective_config.json", effective_config)
        for node_id in sorted(self.ber_records):
            write_csv(
                out / f"ber_node{node_id}.csv",
                ("packet_index", "timestamp_s", "bits", "errors", "ber"),
                (
                    (r.packet_index, r.timestamp_s, r.bits_compared, r.bit_errors, r.ber)
                    for r in self.ber_records[node_id]
                ),
            )
        write_csv(
            out / "discovery_table.csv",
            ("t_s", "node_id", "table_size"),
            self.discovery_rows,
        )
        write_csv(
            out / "fused.csv",
            ("t_s", "node_id", "remote_source", "point_count"),
            self.fused_rows,
        )
        write_csv(
            out / "consensus_trace.csv",
            ("t", "node_id", "disagreement_norm", "lambda2"),
            self.consensus_rows,
        )
        if self.topology_rows:
            write_csv(
                out / "topology_trace.csv",
                ("t_s", "node_id", "x_m", "y_m", "degree"),
                self.topology_rows,
            )
        write_jsonl(out / "store_audit.jsonl", self.store_audits)
        write_csv(
            out / "fetch_log.csv",
            ("t_s", "node_id", "t_lookup_s", "t_transfer_s", "t_decode_s", "latency_s"),
            self.fetch_rows,
        )
        if self.tprop is not None:
            write_json(out / "tprop.json", self.tprop)
        if self.constellation is not None and self.constellation.size:
            from ..phy.instrumentation import export_constellation

            export_constellation(self.constellation, out / "constellation.csv")
        if self.spectrum_samples is not None and self.spectrum_samples.size >= 1024:
            from ..phy.config import PhyConfig
            from ..phy.instrumentation import export_spectrum

            export_spectrum(self.spectrum_samples, PhyConfig(), out / "spectrum.csv")


def run_id_for(effective_config: dict) -> str:
    """Deterministic run identifier: hash of the canonical effective config."""
    canon = json.dumps(effective_config, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()[:12]
