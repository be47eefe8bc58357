"""Content-addressed chunk stores with capacity- and cache-aware accounting.

Objects split into fixed-size chunks addressed by their SHA-256 digest; a
flat one-level manifest commits to the ordered child digests.  Each node
retains a fraction alpha of an object's chunks subject to its hard byte
capacity (capacity binds before alpha, never silently exceeded), while
chunks cached at reachable peers extend the node's effective storage by
chunk_size * sum of per-peer cached counts.  Remote fetch latency
decomposes exactly into lookup + transfer + decode.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChunkNotFoundError,
    IntegrityError,
    InvalidInputError,
    StorageFullError,
)

DEFAULT_CHUNK_BYTES = 262_144  # 256 KiB


def cid_of(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class Chunk:
    cid: bytes
    data: bytes
    index: int


@dataclass(frozen=True)
class ObjectManifest:
    root_cid: bytes
    chunk_cids: tuple[bytes, ...]
    total_bytes: int
    chunk_size: int

    @property
    def chunk_count(self) -> int:
        return len(self.chunk_cids)


def chunk_object(data: bytes, chunk_size: int = DEFAULT_CHUNK_BYTES) -> tuple[ObjectManifest, list[Chunk]]:
    """Fixed-size split (last chunk short); manifest root commits to child CIDs."""
    if not data:
        raise InvalidInputError("cannot chunk an empty object")
    if chunk_size < 1:
        raise InvalidInputError("chunk_size must be >= 1")
    chunks = [
        Chunk(cid=cid_of(piece), data=piece, index=i)
        for i, piece in enumerate(
            data[off : off + chunk_size] for off in range(0, len(data), chunk_size)
        )
    ]
    root = cid_of(b"".join(c.cid for c in chunks))
    manifest = ObjectManifest(
        root_cid=root,
        chunk_cids=tuple(c.cid for c in chunks),
        total_bytes=len(data),
        chunk_size=chunk_size,
    )
    return manifest, chunks


def reassemble(manifest: ObjectManifest, chunks: dict[bytes, bytes]) -> bytes:
    """Rebuild the object from a cid -> bytes mapping, verifying every digest."""
    parts = []
    for cid in manifest.chunk_cids:
        if cid not in chunks:
            raise ChunkNotFoundError(f"missing chunk {cid.hex()[:12]}")
        data = chunks[cid]
        if cid_of(data) != cid:
            raise IntegrityError(f"chunk {cid.hex()[:12]} bytes do not match its CID")
        parts.append(data)
    data = b"".join(parts)
    if len(data) != manifest.total_bytes:
        raise IntegrityError("reassembled size differs from the manifest")
    return data


@dataclass
class _ChunkMeta:
    object_root: bytes
    index: int
    stored_at: float
    stored_seq: int
    demand: int = 0


@dataclass
class NodeStore:
    """Per-node chunk store: local fraction alpha, capacity, peer-cache counts."""

    node_id: int
    alpha: float
    s_max_bytes: int
    persistent: bool = False  # backbone peers never evict
    cache_counts: dict[int, int] = field(default_factory=dict)
    _held: dict[bytes, bytes] = field(default_factory=dict)
    _meta: dict[bytes, _ChunkMeta] = field(default_factory=dict)
    _seq: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1]")
        if self.s_max_bytes < 0:
            raise InvalidInputError("capacity must be nonnegative")

    @property
    def held_bytes(self) -> int:
        return sum(len(d) for d in self._held.values())

    @property
    def held_cids(self) -> set[bytes]:
        return set(self._held)

    @property
    def chunk_count(self) -> int:
        return len(self._held)

    def has(self, cid: bytes) -> bool:
        return cid in self._held

    def get(self, cid: bytes) -> bytes:
        if cid not in self._held:
            raise ChunkNotFoundError(f"store {self.node_id} lacks {cid.hex()[:12]}")
        self._meta[cid].demand += 1
        return self._held[cid]

    def put(self, chunk: Chunk, object_root: bytes, stored_at: float = 0.0) -> bool:
        """Store a chunk if capacity allows; returns False when refused."""
        if chunk.cid in self._held:
            return True
        if self.held_bytes + len(chunk.data) > self.s_max_bytes:
            return False
        self._held[chunk.cid] = chunk.data
        self._meta[chunk.cid] = _ChunkMeta(
            object_root=object_root,
            index=chunk.index,
            stored_at=stored_at,
            stored_seq=self._seq,
        )
        self._seq += 1
        return True

    def drop(self, cid: bytes) -> None:
        self._held.pop(cid, None)
        self._meta.pop(cid, None)

    def objects_held(self) -> set[bytes]:
        return {m.object_root for m in self._meta.values()}


def retain_local(
    store: NodeStore,
    manifest: ObjectManifest,
    chunks: list[Chunk],
    rng: np.random.Generator,
    stored_at: float = 0.0,
    selection: str = "random",
    evict_policy: str | None = None,
) -> list[bytes]:
    """Keep round(alpha * M) chunks of the object, capacity binding first.

    Selection is seeded random sampling by default ("prefix" keeps the first
    chunks instead).  When a chunk would overflow the capacity, the eviction
    policy (if given) frees older objects; otherwise the chunk is refused.
    Returns the CIDs actually stored.
    """
    if selection not in ("random", "prefix"):
        raise InvalidInputError(f"unknown selection {selection!r}")
    m = manifest.chunk_count
    k = int(store.alpha * m + 0.5)  # round half up
    if selection == "prefix":
        picked = list(range(k))
    else:
        picked = sorted(rng.choice(m, size=k, replace=False).tolist()) if k else []
    kept: list[bytes] = []
    for idx in picked:
        chunk = chunks[idx]
        if not store.put(chunk, manifest.root_cid, stored_at):
            if evict_policy is not None:
                try:
                    evict(
                        store,
                        policy=evict_policy,
                        target_bytes=store.s_max_bytes - len(chunk.data),
                        protect_roots=frozenset({manifest.root_cid}),
                    )
                except StorageFullError:
                    continue
                if not store.put(chunk, manifest.root_cid, stored_at):
                    continue
            else:
                continue
        kept.append(chunk.cid)
    return kept


def effective_storage(store: NodeStore, chunk_size: int) -> int:
    """Local bytes plus chunk_size * total chunks cached at reachable peers."""
    return store.held_bytes + chunk_size * sum(store.cache_counts.values())


def update_cache_counts(
    store: NodeStore, manifest: ObjectManifest, peers: dict[int, NodeStore]
) -> None:
    """Recount how many chunks of the current object each reachable peer holds."""
    wanted = set(manifest.chunk_cids)
    store.cache_counts = {
        peer_id: sum(1 for cid in wanted if peer.has(cid))
        for peer_id, peer in sorted(peers.items())
        if peer_id != store.node_id
    }


@dataclass(frozen=True)
class FetchCostModel:
    t_lookup_s: float = 0.0
    b_net_bps: float = 18e6  # defaults to the radio's data rate
    t_decode_s: float = 0.0

    def __post_init__(self) -> None:
        if self.b_net_bps <= 0:
            raise InvalidInputError("network throughput must be positive")
        if self.t_lookup_s < 0 or self.t_decode_s < 0:
            raise InvalidInputError("latency components must be nonnegative")


def fetch_latency(n_bytes: int, cost: FetchCostModel) -> float:
    """lookup + transfer + decode; the transfer term is bits / throughput."""
    return cost.t_lookup_s + (n_bytes * 8) / cost.b_net_bps + cost.t_decode_s


def lookup_providers(
    cid: bytes, network_view: list[tuple[NodeStore, FetchCostModel]]
) -> list[tuple[NodeStore, FetchCostModel]]:
    """Reachable stores holding cid, by ascending modeled latency (ties by node id)."""
    holders = [
        (peer, cost)
        for peer, cost in network_view
        if peer.has(cid)
    ]
    if not holders:
        raise ChunkNotFoundError(f"no provider for {cid.hex()[:12]}")
    return sorted(
        holders, key=lambda pc: (fetch_latency(len(pc[0]._held[cid]), pc[1]), pc[0].node_id)
    )


@dataclass(frozen=True)
class FetchResult:
    data: bytes
    latency_s: float
    t_lookup_s: float
    t_transfer_s: float
    t_decode_s: float


def fetch_chunk(cid: bytes, provider: NodeStore, cost: FetchCostModel) -> FetchResult:
    """Fetch and integrity-check one chunk; latency decomposes exactly."""
    data = provider.get(cid)
    if cid_of(data) != cid:
        raise IntegrityError(
            f"provider {provider.node_id} returned bytes not hashing to {cid.hex()[:12]}"
        )
    transfer = (len(data) * 8) / cost.b_net_bps
    return FetchResult(
        data=data,
        latency_s=cost.t_lookup_s + transfer + cost.t_decode_s,
        t_lookup_s=cost.t_lookup_s,
        t_transfer_s=transfer,
        t_decode_s=cost.t_decode_s,
    )


def evict(
    store: NodeStore,
    policy: str = "oldest_first",
    target_bytes: int | None = None,
    protect_roots: frozenset[bytes] = frozenset(),
) -> list[bytes]:
    """Remove chunks until occupancy <= target (default: the capacity).

    Chunks of protected objects (e.g. the object currently being assembled)
    are never evicted; persistent stores refuse eviction outright.
    """
    if policy not in ("oldest_first", "lowest_demand_first"):
        raise InvalidInputError(f"unknown eviction policy {policy!r}")
    target = store.s_max_bytes if target_bytes is None else target_bytes
    if target < 0:
        target = 0
    evicted: list[bytes] = []
    while store.held_bytes > target:
        candidates = [
            (meta, cid)
            for cid, meta in store._meta.items()
            if meta.object_root not in protect_roots
        ]
        if store.persistent or not candidates:
            raise StorageFullError(
                f"store {store.node_id} over target with nothing evictable"
            )
        if policy == "oldest_first":
            key = lambda mc: (mc[0].stored_at, mc[0].stored_seq)
        else:
            key = lambda mc: (mc[0].demand, mc[0].stored_at, mc[0].stored_seq)
        _, victim = min(candidates, key=key)
        store.drop(victim)
        evicted.append(victim)
    return evicted
