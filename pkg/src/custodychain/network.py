"""In-process simulated permissioned network.

One CA-certified ordering node batches valid proposals FIFO into signed
blocks; peers fully validate every block before appending. Transport is a
seeded discrete-event loop (uniform latency, probabilistic drops, partition
groups), so every run is reproducible from its seed. Faults are injected
through one API and always logged; equivocation by the orderer is detected
(conflicting orderer-signed blocks at one height raise an alert and the
first valid block is kept), not tolerated.

Nodes communicate only via Message values; within a node the commit path is
serialized by the event loop itself.
"""

from __future__ import annotations

import enum
import heapq
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import chaincode, encoding
from .config import ChainConfig
from .errors import BlockRejected, ChainError, RejectReason, SpecError
from .identity import CAContext, Participant, Role, SigningKey, verify as cert_verify
from .ledger import Block, Chain, MemoryBlockStore, build_block
from .node import build_genesis_transaction
from .records import EVIDENCE_KINDS, Transaction, TxKind

DEFAULT_BASE_TIME = 1_750_000_000


class MessageKind(enum.Enum):
    PROPOSAL = "PROPOSAL"
    BLOCK_ANNOUNCE = "BLOCK_ANNOUNCE"
    BLOCK_REQUEST = "BLOCK_REQUEST"
    BLOCK_RESPONSE = "BLOCK_RESPONSE"


class FaultKind(enum.Enum):
    DROP = "DROP"
    DELAY = "DELAY"
    PARTITION = "PARTITION"
    TAMPER_BLOCK = "TAMPER_BLOCK"
    EQUIVOCATE = "EQUIVOCATE"


@dataclass
class NodeConfig:
    node_id: str
    is_orderer: bool = False
    latency_ms: tuple[int, int] = (5, 50)
    drop_rate: float = 0.0
    partition_group: int = 0
    attested: bool = True

    def __post_init__(self) -> None:
        lo, hi = self.latency_ms
        if lo > hi:
            raise SpecError(f"latency bounds inverted for {self.node_id}: {self.latency_ms}")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise SpecError(f"drop_rate out of [0,1] for {self.node_id}: {self.drop_rate}")


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    payload: bytes
    sender: bytes
    signature: bytes

    def signing_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_str(self.kind.value),
            encoding.pack_bytes(self.payload),
            encoding.pack_bytes(self.sender),
        )


def sign_message(kind: MessageKind, payload: bytes, participant: Participant, key: SigningKey) -> Message:
    unsigned = Message(kind=kind, payload=payload, sender=participant.address, signature=b"")
    return Message(kind=kind, payload=payload, sender=participant.address, signature=key.sign(unsigned.signing_bytes()))


class SimNode:
    """Peer (or lightweight client) attached to the simulated network."""

    def __init__(
        self,
        config: NodeConfig,
        participant: Participant,
        key: SigningKey,
        hash_name: str = "sha256",
        with_chain: bool = True,
    ) -> None:
        self.config = config
        self.participant = participant
        self.key = key
        self.hash_name = hash_name
        self.chain: Chain | None = Chain(MemoryBlockStore(), hash_name) if with_chain else None
        self.net: "SimNetwork | None" = None
        self.alerts: list[dict] = []
        self.quarantined: list[bytes] = []
        self._buffer: dict[int, bytes] = {}

    @property
    def node_id(self) -> str:
        return self.config.node_id

    def alert(self, kind: str, **details) -> None:
        self.alerts.append({"kind": kind, "at_ms": self.net.now_ms if self.net else 0, **details})

    # -- message plumbing ----------------------------------------------------

    def send(self, dst_id: str, kind: MessageKind, payload: bytes) -> None:
        self.net.send(self.node_id, dst_id, sign_message(kind, payload, self.participant, self.key))

    def _sender_valid(self, msg: Message) -> bool:
        if self.chain is None or not self.chain.height:
            return True  # no roster yet; ingress checks happen at the orderer
        state = self.chain.state
        sender = state.participants.get(msg.sender)
        if sender is None:
            return False
        at = self.net.wall_time() if self.net else None
        return cert_verify(sender.cert, msg.signing_bytes(), msg.signature, state.ca_root_public_key, at_time=at)

    def receive(self, src_id: str, msg: Message) -> None:
        if not self._sender_valid(msg):
            self.alert("BAD_MESSAGE_SIGNATURE", sender=msg.sender.hex(), src=src_id)
            return
        if msg.kind is MessageKind.BLOCK_ANNOUNCE:
            self._on_block(src_id, msg.payload)
        elif msg.kind is MessageKind.BLOCK_REQUEST:
            self._on_block_request(src_id, msg.payload)
        elif msg.kind is MessageKind.BLOCK_RESPONSE:
            r = encoding.Reader(msg.payload)
            for raw in r.list():
                self._on_block(src_id, raw)
        elif msg.kind is MessageKind.PROPOSAL:
            self._on_proposal(src_id, msg)

    def _on_proposal(self, src_id: str, msg: Message) -> None:
        pass  # only the orderer consumes proposals

    # -- block handling --------------------------------------------------------

    def _orderer_signed(self, block: Block) -> bool:
        state = self.chain.state
        orderer = state.participants.get(state.orderer)
        if orderer is None or block.proposer != state.orderer:
            return False
        return cert_verify(
            orderer.cert,
            block.header_bytes(),
            block.proposer_signature,
            state.ca_root_public_key,
            at_time=block.timestamp,
        )

    def _on_block(self, src_id: str, raw: bytes) -> None:
        if self.chain is None:
            return
        try:
            block = Block.from_bytes(raw)
        except Exception:
            self.alert("UNPARSEABLE_BLOCK", src=src_id)
            return
        h = block.height
        if h < self.chain.height:
            stored = self.chain.store.get(h)
            if stored != raw and self._orderer_signed(block):
                self.alert("EQUIVOCATION", height=h, src=src_id)
            return
        if h > self.chain.height:
            self._buffer[h] = raw
            self.send(src_id, MessageKind.BLOCK_REQUEST, encoding.pack_u64(self.chain.height))
            return
        self._try_append(src_id, raw, block)
        self._drain_buffer(src_id)

    def _try_append(self, src_id: str, raw: bytes, block: Block) -> None:
        try:
            self.chain.append_block(block)
        except BlockRejected as exc:
            if exc.reason == RejectReason.LINKAGE and self._orderer_signed(block):
                # Valid orderer signature on a block that does not extend our
                # chain: the orderer produced conflicting history.
                self.alert("EQUIVOCATION", height=block.height, src=src_id)
            else:
                self.quarantined.append(raw)
                self.alert("BLOCK_REJECTED", height=block.height, reason=exc.reason, src=src_id)

    def _drain_buffer(self, src_id: str) -> None:
        while self.chain.height in self._buffer:
            raw = self._buffer.pop(self.chain.height)
            try:
                block = Block.from_bytes(raw)
            except Exception:
                self.alert("UNPARSEABLE_BLOCK", src=src_id)
                return
            before = self.chain.height
            self._try_append(src_id, raw, block)
            if self.chain.height == before:
                return

    def _on_block_request(self, src_id: str, payload: bytes) -> None:
        if self.chain is None:
            return
        from_height = encoding.Reader(payload).u64()
        raws = [self.chain.store.get(h) for h in range(from_height, self.chain.height)]
        if raws:
            self.send(src_id, MessageKind.BLOCK_RESPONSE, encoding.pack_list(raws))

    def sync(self) -> None:
        """Pull missing blocks from the orderer (subject to channel faults)."""
        if self.chain is None or self.net is None:
            return
        self.send(self.net.orderer_id, MessageKind.BLOCK_REQUEST, encoding.pack_u64(self.chain.height))

    def height(self) -> int:
        return self.chain.height if self.chain else 0

    def chain_bytes(self) -> bytes:
        return b"".join(self.chain.store.iter_raw()) if self.chain else b""


class OrdererNode(SimNode):
    """Single ordering service: FIFO batching of validated proposals."""

    def __init__(self, *args, batch_window_ms: int = 200, max_batch: int = 10, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.batch_window_ms = batch_window_ms
        self.max_batch = max_batch
        self.pending: list[Transaction] = []
        self.seen: set[bytes] = set()
        self.rejections: list[tuple[bytes, str]] = []
        self.refused_unattested: list[bytes] = []
        self.blocks_produced: list[Block] = []
        self._timer_armed = False
        self._equivocate_next = False

    def run_ordering(self, batch_window_ms: int, max_batch: int) -> list[Block]:
        """Configure batching; returns the live list blocks get appended to."""
        self.batch_window_ms = batch_window_ms
        self.max_batch = max_batch
        return self.blocks_produced

    def _on_proposal(self, src_id: str, msg: Message) -> None:
        try:
            tx = Transaction.from_bytes(msg.payload)
        except Exception:
            self.alert("UNPARSEABLE_PROPOSAL", src=src_id)
            return
        src = self.net.nodes.get(src_id)
        if tx.kind in EVIDENCE_KINDS and src is not None and not src.config.attested:
            # Objective: evidence flows only over channels with an attested
            # endpoint; refuse evidence traffic from un-attested channels.
            self.refused_unattested.append(tx.tx_id(self.hash_name))
            self.alert("UNATTESTED_EVIDENCE_CHANNEL", src=src_id)
            return
        tx_id = tx.tx_id(self.hash_name)
        if tx_id in self.seen:
            return  # idempotent absorption of duplicates
        self.seen.add(tx_id)
        self.pending.append(tx)
        if len(self.pending) >= self.max_batch:
            self._do_batch()
        elif not self._timer_armed:
            self._timer_armed = True
            self.net.schedule(self.batch_window_ms, self._on_timer)

    def _on_timer(self) -> None:
        self._timer_armed = False
        if self.pending:
            self._do_batch()

    def _do_batch(self) -> None:
        batch, self.pending = self.pending[: self.max_batch], self.pending[self.max_batch :]
        valid: list[Transaction] = []
        trial = self.chain.state
        for tx in batch:
            try:
                submitter = trial.participants.get(tx.submitter)
                if submitter is None or not cert_verify(
                    submitter.cert,
                    tx.signing_bytes(),
                    tx.submitter_signature,
                    trial.ca_root_public_key,
                    at_time=self.net.wall_time(),
                ):
                    raise ChainError("submitter signature invalid")
                trial = chaincode.apply_tx(trial, tx, self.net.wall_time())
                valid.append(tx)
            except ChainError as exc:
                self.rejections.append((tx.tx_id(self.hash_name), getattr(exc, "code", "ERROR")))
        if valid:
            block = build_block(
                self.chain.height,
                self.chain.tip_hash,
                self.net.wall_time(),
                valid,
                self.participant,
                self.key,
                self.hash_name,
            )
            self.chain.append_block(block)
            self.blocks_produced.append(block)
            self._announce(block)
        if self.pending and not self._timer_armed:
            self._timer_armed = True
            self.net.schedule(self.batch_window_ms, self._on_timer)

    def _announce(self, block: Block) -> None:
        raw = block.to_bytes()
        peers = [n for n in self.net.nodes.values() if n is not self and n.chain is not None]
        if self._equivocate_next:
            self._equivocate_next = False
            from dataclasses import replace as dc_replace

            alt = Block(
                height=block.height,
                prev_hash=block.prev_hash,
                timestamp=block.timestamp + 1,
                tx_list=block.tx_list,
                tx_merkle_root=block.tx_merkle_root,
                proposer=block.proposer,
                proposer_signature=b"",
            )
            alt = dc_replace(alt, proposer_signature=self.key.sign(alt.header_bytes()))
            alt_raw = alt.to_bytes()
            self.net.log_fault(FaultKind.EQUIVOCATE, height=block.height)
            for i, peer in enumerate(peers):
                payload = raw if i % 2 == 0 else alt_raw
                self.send(peer.node_id, MessageKind.BLOCK_ANNOUNCE, payload)
            return
        for peer in peers:
            self.send(peer.node_id, MessageKind.BLOCK_ANNOUNCE, raw)


class SimNetwork:
    """Seeded discrete-event transport plus the fault-injection API."""

    def __init__(self, seed: int, base_time: int = DEFAULT_BASE_TIME) -> None:
        self.rng = random.Random(seed)
        self.seed = seed
        self.base_time = base_time
        self.now_ms = 0
        self.nodes: dict[str, SimNode] = {}
        self.orderer_id: str | None = None
        self.fault_log: list[dict] = []
        self.dropped: list[dict] = []
        self._queue: list = []
        self._seq = 0
        self._directed_drop: dict[tuple[str, str], float] = {}

    def wall_time(self) -> int:
        return self.base_time + self.now_ms // 1000

    def register(self, node: SimNode) -> SimNode:
        if node.node_id in self.nodes:
            raise SpecError(f"duplicate node_id {node.node_id}")
        node.net = self
        self.nodes[node.node_id] = node
        if node.config.is_orderer:
            if self.orderer_id is not None:
                raise SpecError("a scenario has exactly one ordering node")
            self.orderer_id = node.node_id
        return node

    @property
    def orderer(self) -> OrdererNode:
        return self.nodes[self.orderer_id]

    def schedule(self, delay_ms: int, fn) -> None:
        heapq.heappush(self._queue, (self.now_ms + delay_ms, self._seq, fn))
        self._seq += 1

    def send(self, src_id: str, dst_id: str, msg: Message) -> None:
        src = self.nodes[src_id]
        dst = self.nodes[dst_id]
        if src.config.partition_group != dst.config.partition_group:
            self.dropped.append({"why": "partition", "src": src_id, "dst": dst_id, "at_ms": self.now_ms})
            return
        rate = max(dst.config.drop_rate, self._directed_drop.get((src_id, dst_id), 0.0))
        if rate > 0 and self.rng.random() < rate:
            self.dropped.append({"why": "drop", "src": src_id, "dst": dst_id, "at_ms": self.now_ms})
            return
        lo, hi = dst.config.latency_ms
        delay = self.rng.randint(lo, hi) if hi > lo else lo
        self.schedule(delay, lambda: dst.receive(src_id, msg))

    def submit_proposal(self, client_id: str, tx: Transaction) -> bytes:
        """Send a signed proposal toward the orderer; returns the tx id (ack)."""
        client = self.nodes.get(client_id)
        if client is None:
            raise SpecError(f"unknown client {client_id}")
        if self.orderer_id is None:
            raise SpecError("no ordering node registered")
        client.send(self.orderer_id, MessageKind.PROPOSAL, tx.to_bytes())
        return tx.tx_id(client.hash_name)

    # -- event loop -------------------------------------------------------------

    def run_until_idle(self, limit_ms: int = 60_000_000) -> None:
        while self._queue:
            at_ms, _, fn = heapq.heappop(self._queue)
            if at_ms > limit_ms:
                self.now_ms = limit_ms
                return
            self.now_ms = max(self.now_ms, at_ms)
            fn()

    def run_for(self, ms: int) -> None:
        horizon = self.now_ms + ms
        while self._queue and self._queue[0][0] <= horizon:
            at_ms, _, fn = heapq.heappop(self._queue)
            self.now_ms = max(self.now_ms, at_ms)
            fn()
        self.now_ms = horizon

    def settle(self, rounds: int = 50) -> None:
        """Drain traffic, then have every peer pull from the orderer until all
        heights match (retries ride out residual drop faults)."""
        self.run_until_idle()
        for _ in range(rounds):
            target = self.orderer.height()
            behind = [
                n
                for n in self.nodes.values()
                if n.chain is not None and not n.config.is_orderer and n.height() < target
            ]
            if not behind:
                return
            for node in behind:
                node.sync()
            self.run_until_idle()

    # -- faults -------------------------------------------------------------------

    def log_fault(self, kind: FaultKind, **details) -> None:
        self.fault_log.append({"fault": kind.value, "at_ms": self.now_ms, **details})

    def inject_fault(self, kind: FaultKind, **params) -> None:
        if kind is FaultKind.DROP:
            rate = float(params["rate"])
            toward = params.get("toward")
            src = params.get("src")
            if toward is not None and src is not None:
                self._directed_drop[(src, toward)] = rate
            elif toward is not None:
                self.nodes[toward].config.drop_rate = rate
            else:
                for node in self.nodes.values():
                    node.config.drop_rate = rate
        elif kind is FaultKind.DELAY:
            node = self.nodes[params["node_id"]]
            node.config.latency_ms = tuple(params["latency_ms"])
        elif kind is FaultKind.PARTITION:
            for node_id, group in params["groups"].items():
                self.nodes[node_id].config.partition_group = int(group)
        elif kind is FaultKind.TAMPER_BLOCK:
            node = self.nodes[params["node_id"]]
            node.chain.store.tamper(params["height"], params.get("byte_index", 7), params.get("bit", 0))
        elif kind is FaultKind.EQUIVOCATE:
            self.orderer._equivocate_next = True
        else:
            raise SpecError(f"unknown fault {kind}")
        self.log_fault(kind, **{k: str(v) for k, v in params.items()})

    def heal_partition(self) -> None:
        self.inject_fault(FaultKind.PARTITION, groups={node_id: 0 for node_id in self.nodes})

    # -- properties over the whole network ----------------------------------------

    def honest_chains_identical(self) -> bool:
        chains = {
            n.chain_bytes() for n in self.nodes.values() if n.chain is not None
        }
        return len(chains) == 1


def build_network(
    ca: CAContext,
    node_configs: list[NodeConfig],
    clients: dict[str, Role],
    seed: int,
    chain_config: ChainConfig | None = None,
    base_time: int = DEFAULT_BASE_TIME,
    batch_window_ms: int = 200,
    max_batch: int = 10,
    genesis_time: int | None = None,
) -> tuple[SimNetwork, dict[str, tuple[Participant, SigningKey]]]:
    """Enroll one identity per node and client, anchor them in a genesis block
    and install it on every peer."""
    cfg = chain_config or ChainConfig()
    net = SimNetwork(seed=seed, base_time=base_time)
    identities: dict[str, tuple[Participant, SigningKey]] = {}

    orderer_cfgs = [c for c in node_configs if c.is_orderer]
    if len(orderer_cfgs) != 1:
        raise SpecError("exactly one node must be the orderer")

    nodes: list[SimNode] = []
    for nc in node_configs:
        participant, key = ca.enroll(Role.ISP)
        identities[nc.node_id] = (participant, key)
        if nc.is_orderer:
            node = OrdererNode(nc, participant, key, cfg.hash_name, batch_window_ms=batch_window_ms, max_batch=max_batch)
        else:
            node = SimNode(nc, participant, key, cfg.hash_name)
        nodes.append(net.register(node))
    for name, role in clients.items():
        participant, key = ca.enroll(role)
        identities[name] = (participant, key)
        net.register(SimNode(NodeConfig(node_id=name), participant, key, cfg.hash_name, with_chain=False))

    orderer_identity = identities[orderer_cfgs[0].node_id][0]
    genesis_tx = build_genesis_transaction(ca, [p.cert for p, _ in identities.values()], orderer_identity.address, cfg)
    genesis = build_block(
        0,
        b"\x00" * 32,
        genesis_time if genesis_time is not None else base_time,
        [genesis_tx],
        orderer_identity,
        identities[orderer_cfgs[0].node_id][1],
        cfg.hash_name,
    )
    for node in nodes:
        node.chain.append_block(genesis)
    return net, identities


# ---------------------------------------------------------------------------
# Scenario files: nodes, faults and a scripted timeline, all under one seed.
# ---------------------------------------------------------------------------


def load_network_scenario(source: Path | str | dict) -> dict:
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read network scenario: {exc}") from exc
    else:
        data = source
    if "seed" not in data:
        raise SpecError("network scenario must carry a deterministic seed")
    if not data.get("nodes"):
        raise SpecError("network scenario needs at least one node")
    return data


def run_network_scenario(source: Path | str | dict, seed: int | None = None) -> dict:
    """Drive a scripted multi-node run and return a deterministic summary."""
    import hashlib

    from .identity import ca_init

    data = load_network_scenario(source)
    eff_seed = int(data["seed"]) if seed is None else seed
    base_time = int(data.get("base_time", DEFAULT_BASE_TIME))

    configs = []
    for entry in data["nodes"]:
        configs.append(
            NodeConfig(
                node_id=entry["node_id"],
                is_orderer=bool(entry.get("is_orderer", False)),
                latency_ms=tuple(entry.get("latency_ms", (5, 50))),
                drop_rate=float(entry.get("drop_rate", 0.0)),
                partition_group=int(entry.get("partition_group", 0)),
                attested=bool(entry.get("attested", True)),
            )
        )
    clients = {name: Role(role) for name, role in data.get("clients", {"client0": "ISP"}).items()}
    ca = ca_init(seed=f"net:{eff_seed}", clock=lambda: 0, cert_lifetime=1 << 33)
    net, identities = build_network(
        ca,
        configs,
        clients,
        seed=eff_seed,
        base_time=base_time,
        batch_window_ms=int(data.get("batch_window_ms", 200)),
        max_batch=int(data.get("max_batch", 10)),
    )

    counter = 0

    def do_create(client: str, count: int) -> None:
        nonlocal counter
        participant, key = identities[client]
        for _ in range(count):
            eid = hashlib.sha256(f"net-ev:{eff_seed}:{counter}".encode()).digest()
            counter += 1
            tx = chaincode.create_evidence(
                net.orderer.chain.state, participant, key, eid, f"incident {counter}", net.wall_time(), "camera"
            )
            net.submit_proposal(client, tx)

    timeline = sorted(data.get("timeline", []), key=lambda e: int(e.get("at_ms", 0)))
    for entry in timeline:
        at_ms = int(entry.get("at_ms", 0))
        if at_ms > net.now_ms:
            net.run_for(at_ms - net.now_ms)
        action = entry.get("action")
        if action == "create":
            do_create(entry["client"], int(entry.get("count", 1)))
        elif action == "fault":
            kind = FaultKind(entry["fault"])
            params = {k: v for k, v in entry.items() if k not in ("at_ms", "action", "fault")}
            if kind is FaultKind.DROP:
                params["rate"] = float(params.get("rate", 0.0))
            net.inject_fault(kind, **params)
        elif action == "heal":
            net.heal_partition()
        elif action == "sync":
            targets = [entry["node"]] if "node" in entry else [
                n.node_id for n in net.nodes.values() if n.chain is not None
            ]
            for node_id in targets:
                net.nodes[node_id].sync()
        else:
            raise SpecError(f"unknown timeline action {action!r}")
    net.settle()

    peers = {n.node_id: n for n in net.nodes.values() if n.chain is not None}
    return {
        "kind": "network",
        "seed": eff_seed,
        "final_heights": {node_id: n.height() for node_id, n in sorted(peers.items())},
        "chains_identical": net.honest_chains_identical(),
        "tip_hash": net.orderer.chain.tip_hash.hex(),
        "committed_txs": sum(len(b.tx_list) for b in net.orderer.blocks_produced),
        "orderer_rejections": len(net.orderer.rejections),
        "refused_unattested": len(net.orderer.refused_unattested),
        "alerts": {node_id: len(n.alerts) for node_id, n in sorted(peers.items())},
        "faults_injected": len(net.fault_log),
        "messages_dropped": len(net.dropped),
    }
