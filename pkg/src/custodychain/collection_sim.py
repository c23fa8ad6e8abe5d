"""Synthetic smart-home evidence source.

Simulates a botnet over a roster of IoT devices: the initial compromise
lands on the designated patient zero (only if that device is itself
exploitable), bots replicate over telnet/FTP/SSH default credentials or
firmware holes, rally to a command-and-control host on ports 80/443 using a
seeded pseudorandom domain generator, and then run MiTM / DDoS / spam
attacks on order. A rule-based detector (gateway role) turns traffic bursts
into incidents; devices flagged with an on-device agent report their own
compromise locally and contribute a device-image stub payload instead of
flow records.

Everything is driven by one seed: the event stream, payload bytes and
incident order are reproducible run to run.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import encoding
from .errors import SpecError

SERVICES = ("TELNET", "FTP", "SSH")
SERVICE_PORTS = {"TELNET": 23, "FTP": 21, "SSH": 22}

CC_PORTS = (80, 443)
GATEWAY = "gateway"
DDOS_VICTIM = "victim.wan.example"
BENIGN_HOSTS = ("news.example", "weather.example", "cdn.example")


class AttackKind(enum.Enum):
    MITM = "MITM"
    DDOS = "DDOS"
    SPAM = "SPAM"
    PROPAGATION = "PROPAGATION"
    RALLYING = "RALLYING"


ORDERED_ATTACKS = (AttackKind.MITM, AttackKind.DDOS, AttackKind.SPAM)


@dataclass
class SimDevice:
    device_id: str
    device_type: str
    open_services: frozenset[str] = frozenset()
    default_credentials: bool = False
    vulnerable_firmware: bool = False
    infected: bool = False
    sda: bool = False

    @property
    def exploitable(self) -> bool:
        reachable_creds = self.default_credentials and bool(self.open_services & set(SERVICES))
        return reachable_creds or self.vulnerable_firmware


@dataclass(frozen=True)
class FlowRecord:
    """One synthetic flow observation: (src, dst, port, proto, bytes, t)."""

    src: str
    dst: str
    port: int
    proto: str
    size: int
    t: int

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_str(self.src),
            encoding.pack_str(self.dst),
            encoding.pack_u64(self.port),
            encoding.pack_str(self.proto),
            encoding.pack_u64(self.size),
            encoding.pack_u64(self.t),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "FlowRecord":
        r = encoding.Reader(data)
        rec = cls(src=r.str(), dst=r.str(), port=r.u64(), proto=r.str(), size=r.u64(), t=r.u64())
        r.expect_end()
        return rec


def serialize_flows(records: list[FlowRecord]) -> bytes:
    """Evidence payload format: length-prefixed flow records."""
    return b"".join(encoding.pack_bytes(r.to_bytes()) for r in records)


def parse_flows(payload: bytes) -> list[FlowRecord]:
    r = encoding.Reader(payload)
    out = []
    while not r.exhausted:
        out.append(FlowRecord.from_bytes(r.bytes()))
    return out


@dataclass(frozen=True)
class IncidentDescriptor:
    attack_kind: AttackKind
    source_device: str
    target: str
    tm: int
    summary: str

    def to_json_dict(self) -> dict:
        return {
            "attack_kind": self.attack_kind.value,
            "source_device": self.source_device,
            "target": self.target,
            "tm": self.tm,
            "summary": self.summary,
        }


@dataclass(frozen=True)
class Thresholds:
    ddos_syn_per_sec: int = 50
    spam_per_min: int = 30
    beacon_min_count: int = 3
    cred_burst: int = 5


@dataclass(frozen=True)
class Timing:
    scan_interval_s: int = 30
    beacon_interval_s: int = 60
    attack_interval_s: int = 120
    browse_interval_s: int = 37


@dataclass
class ScenarioSpec:
    seed: int
    devices: list[SimDevice]
    patient_zero: str
    start_time: int = 1_750_000_000
    duration_s: int = 600
    topology: dict[str, list[str]] | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    timing: Timing = field(default_factory=Timing)
    attacks: tuple[AttackKind, ...] = ORDERED_ATTACKS

    def validate(self) -> None:
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise SpecError("duplicate device_id in roster")
        if self.patient_zero not in ids:
            raise SpecError(f"patient_zero {self.patient_zero!r} is not in the roster")
        if self.duration_s <= 0:
            raise SpecError("duration_s must be positive")
        if self.topology:
            for a, nbrs in self.topology.items():
                if a not in ids:
                    raise SpecError(f"topology names unknown device {a!r}")
                for b in nbrs:
                    if b not in ids:
                        raise SpecError(f"topology names unknown device {b!r}")

    def neighbors(self, device_id: str) -> list[str]:
        if self.topology is None:
            return [d.device_id for d in self.devices if d.device_id != device_id]
        return list(self.topology.get(device_id, []))


def _parse_device(entry: dict) -> SimDevice:
    services = frozenset(entry.get("open_services", []))
    unknown = services - set(SERVICES)
    if unknown:
        raise SpecError(f"unknown services {sorted(unknown)} for {entry.get('device_id')}")
    return SimDevice(
        device_id=entry["device_id"],
        device_type=entry.get("device_type", "generic"),
        open_services=services,
        default_credentials=bool(entry.get("default_credentials", False)),
        vulnerable_firmware=bool(entry.get("vulnerable_firmware", False)),
        sda=bool(entry.get("sda", False)),
    )


def load_scenario_spec(source: Path | str | dict) -> ScenarioSpec:
    """Parse a scenario file (or pre-parsed dict); the seed field is mandatory."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read scenario spec: {exc}") from exc
    else:
        data = source
    try:
        if "seed" not in data:
            raise SpecError("scenario spec must carry a deterministic seed")
        attacks = tuple(AttackKind(a) for a in data.get("attacks", [k.value for k in ORDERED_ATTACKS]))
        spec = ScenarioSpec(
            seed=int(data["seed"]),
            devices=[_parse_device(d) for d in data["devices"]],
            patient_zero=data["patient_zero"],
            start_time=int(data.get("start_time", 1_750_000_000)),
            duration_s=int(data.get("duration_s", 600)),
            topology=data.get("topology"),
            thresholds=Thresholds(**data.get("thresholds", {})),
            timing=Timing(**data.get("timing", {})),
            attacks=attacks,
        )
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed scenario spec: {exc}") from exc
    spec.validate()
    return spec


def dga_domain(seed: int, device_id: str, index: int) -> str:
    """Seeded pseudorandom domain shared by bot and bot-master."""
    tag = hashlib.sha256(f"{seed}:{device_id}:{index}".encode()).hexdigest()[:16]
    return f"{tag}.cc.example"


def _looks_generated(host: str) -> bool:
    head = host.split(".", 1)[0]
    return len(head) >= 12 and all(c in "0123456789abcdef" for c in head)


class Detector:
    """Stateful rule matcher playing the gateway's detection role.

    Rules: credential-stuffing bursts, C&C beacon cadence to generated
    domains on 80/443, SYN-rate and mail-rate volumetric thresholds, and ARP
    spoofing. Baseline traffic matches nothing.
    """

    def __init__(self, thresholds: Thresholds | None = None) -> None:
        self.thresholds = thresholds or Thresholds()
        self._syn: dict[tuple[str, str, int], int] = {}
        self._mail: dict[tuple[str, int], int] = {}
        self._cred: dict[tuple[str, str], int] = {}
        self._beacons: dict[str, int] = {}
        self._fired: set = set()

    def _once(self, key) -> bool:
        if key in self._fired:
            return False
        self._fired.add(key)
        return True

    def observe(self, rec: FlowRecord) -> IncidentDescriptor | None:
        th = self.thresholds
        if rec.proto == "TCP-SYN":
            key = (rec.src, rec.dst, rec.t)
            self._syn[key] = self._syn.get(key, 0) + 1
            if self._syn[key] >= th.ddos_syn_per_sec and self._once(("ddos",) + key):
                return IncidentDescriptor(
                    AttackKind.DDOS, rec.src, rec.dst, rec.t,
                    f"SYN flood: {self._syn[key]}+ SYN/s from {rec.src} to {rec.dst}",
                )
        elif rec.proto == "SMTP":
            key = (rec.src, rec.t // 60)
            self._mail[key] = self._mail.get(key, 0) + 1
            if self._mail[key] >= th.spam_per_min and self._once(("spam",) + key):
                return IncidentDescriptor(
                    AttackKind.SPAM, rec.src, rec.dst, rec.t,
                    f"spam burst: {self._mail[key]}+ messages/min from {rec.src}",
                )
        elif rec.proto in SERVICES:
            key = (rec.src, rec.dst)
            self._cred[key] = self._cred.get(key, 0) + 1
            if self._cred[key] >= th.cred_burst and self._once(("cred",) + key):
                return IncidentDescriptor(
                    AttackKind.PROPAGATION, rec.src, rec.dst, rec.t,
                    f"credential stuffing over {rec.proto.lower()} from {rec.src} to {rec.dst}",
                )
        elif rec.proto in ("HTTP", "HTTPS") and rec.port in CC_PORTS and _looks_generated(rec.dst):
            self._beacons[rec.src] = self._beacons.get(rec.src, 0) + 1
            if self._beacons[rec.src] >= th.beacon_min_count and self._once(("rally", rec.src)):
                return IncidentDescriptor(
                    AttackKind.RALLYING, rec.src, rec.dst, rec.t,
                    f"periodic C&C polling from {rec.src} to generated domains",
                )
        elif rec.proto == "ARP-SPOOF":
            if self._once(("mitm", rec.src, rec.t)):
                return IncidentDescriptor(
                    AttackKind.MITM, rec.src, rec.dst, rec.t,
                    f"{rec.src} impersonates {rec.dst} on the local segment",
                )
        return None


def detect(traffic, thresholds: Thresholds | None = None) -> IncidentDescriptor | None:
    """One-shot detection over a single flow record or an iterable of them."""
    detector = Detector(thresholds)
    records = [traffic] if isinstance(traffic, FlowRecord) else list(traffic)
    for rec in records:
        incident = detector.observe(rec)
        if incident is not None:
            return incident
    return None


def device_image_stub(device: SimDevice, t: int) -> bytes:
    """Stand-in for a full device image acquired by the on-device agent."""
    return encoding.pack_fields(
        encoding.pack_str("DEVICE-IMAGE-STUB"),
        encoding.pack_str(device.device_id),
        encoding.pack_str(device.device_type),
        encoding.pack_u64(t),
        encoding.pack_str("firmware-modified"),
    )


def _phase(device_id: str) -> int:
    return int.from_bytes(hashlib.sha256(device_id.encode()).digest()[:4], "big")


class _Bot:
    def __init__(self, device: SimDevice) -> None:
        self.device = device
        self.beacons_sent = 0
        self.beacon_history: list[FlowRecord] = []
        self.scan_pointer = 0

    @property
    def rallied(self) -> bool:
        return self.beacons_sent > 0


def run_scenario(spec: ScenarioSpec, seed: int | None = None) -> list[tuple[IncidentDescriptor, bytes]]:
    """Deterministic event stream; returns (incident, evidence payload) pairs
    in chronological order."""
    spec.validate()
    effective_seed = spec.seed if seed is None else seed
    rng = random.Random(effective_seed)
    detector = Detector(spec.thresholds)
    devices = {d.device_id: replace(d, infected=False) for d in spec.devices}
    order = sorted(devices)
    bots: dict[str, _Bot] = {}
    incidents: list[tuple[IncidentDescriptor, bytes]] = []
    timing = spec.timing

    def feed(burst: list[FlowRecord], payload: bytes | None = None):
        for rec in burst:
            incident = detector.observe(rec)
            if incident is not None:
                incidents.append((incident, payload if payload is not None else serialize_flows(burst)))

    def infect(device_id: str) -> None:
        devices[device_id].infected = True
        bots[device_id] = _Bot(devices[device_id])

    patient_zero = devices[spec.patient_zero]
    if patient_zero.exploitable:
        # The initial compromise arrives from the WAN; it succeeds only when
        # the designated device is exploitable, and emits no incident itself.
        infect(spec.patient_zero)

    base = spec.start_time
    for t_rel in range(spec.duration_s):
        t = base + t_rel
        for device_id in order:
            dev = devices[device_id]
            if not dev.infected:
                if t_rel % timing.browse_interval_s == _phase(device_id) % timing.browse_interval_s:
                    host = BENIGN_HOSTS[_phase(device_id) % len(BENIGN_HOSTS)]
                    feed([FlowRecord(device_id, host, 443, "HTTPS", 900, t)])
                continue

            bot = bots[device_id]
            phase = _phase(device_id)

            # Propagation: scan for an exploitable, not-yet-infected neighbor.
            if t_rel % timing.scan_interval_s == phase % timing.scan_interval_s:
                target_id = next(
                    (
                        n
                        for n in spec.neighbors(device_id)
                        if devices[n].exploitable and not devices[n].infected
                    ),
                    None,
                )
                if target_id is not None:
                    target = devices[target_id]
                    service = next(iter(sorted(target.open_services)), None)
                    proto = service if (target.default_credentials and service) else "TELNET"
                    port = SERVICE_PORTS.get(proto, 23)
                    burst = [
                        FlowRecord(device_id, target_id, port, proto, 120, t)
                        for _ in range(spec.thresholds.cred_burst)
                    ]
                    infect(target_id)
                    if target.sda:
                        # The on-device agent detects the local compromise and
                        # ships a device-image stub; one incident per infection.
                        incidents.append(
                            (
                                IncidentDescriptor(
                                    AttackKind.PROPAGATION,
                                    device_id,
                                    target_id,
                                    t,
                                    f"on-device agent: firmware modified on {target_id}",
                                ),
                                device_image_stub(target, t),
                            )
                        )
                    else:
                        feed(burst)

            # Rallying: poll the C&C on 80/443 at generated domains.
            if t_rel % timing.beacon_interval_s == phase % timing.beacon_interval_s:
                domain = dga_domain(effective_seed, device_id, bot.beacons_sent)
                port = CC_PORTS[bot.beacons_sent % len(CC_PORTS)]
                beacon = FlowRecord(device_id, domain, port, "HTTPS" if port == 443 else "HTTP", 300, t)
                bot.beacons_sent += 1
                bot.beacon_history.append(beacon)
                feed([beacon], payload=serialize_flows(bot.beacon_history))

            # Interaction: pull an attack order once rallied.
            if (
                bot.beacons_sent >= spec.thresholds.beacon_min_count
                and spec.attacks
                and t_rel % timing.attack_interval_s == phase % timing.attack_interval_s
            ):
                kind = rng.choice(list(spec.attacks))
                if kind is AttackKind.DDOS:
                    burst = [
                        FlowRecord(device_id, DDOS_VICTIM, 80, "TCP-SYN", 40, t)
                        for _ in range(spec.thresholds.ddos_syn_per_sec * 2)
                    ]
                elif kind is AttackKind.SPAM:
                    burst = [
                        FlowRecord(device_id, f"mx{i % 3}.mail.example", 25, "SMTP", 2_000, t)
                        for i in range(spec.thresholds.spam_per_min + 5)
                    ]
                else:
                    burst = [FlowRecord(device_id, GATEWAY, 0, "ARP-SPOOF", 60, t)]
                feed(burst)

    return incidents
