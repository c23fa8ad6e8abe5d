"""Operator command line.

Every command maps onto one module operation and exits 0 on success or 1
with a machine-readable JSON error on stderr. Query commands accept
`--output text|structured`; structured output uses the same schema as the
HTTP API, so scripts can consume either.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import chaincode
from .config import digest
from .errors import ChainError
from .identity import Role
from .node import CONFIG_NAME, LocalNode

CONFIG_ENV = "CUSTODYCHAIN_CONFIG"


def _emit(args, text: str, obj: dict) -> None:
    if getattr(args, "output", "text") == "structured":
        print(json.dumps(obj, indent=2))
    else:
        print(text)


def _node(args) -> LocalNode:
    return LocalNode(Path(args.dir))


def _ready_node(args) -> LocalNode:
    """Node with genesis in place (created from the enrolled roster on first use)."""
    node = _node(args)
    node.ensure_genesis()
    return node


def _identity(node: LocalNode, name: str):
    return node.identity(name)


def _hex32(value: str, what: str) -> bytes:
    raw = bytes.fromhex(value)
    if len(raw) != 32:
        raise ChainError(f"{what} must be 32 bytes of hex")
    return raw


def _file_digest(node: LocalNode, path: str) -> bytes:
    return digest(node.hash_name, Path(path).read_bytes())


# -- commands -----------------------------------------------------------------


def cmd_ca_init(args) -> int:
    node = _node(args)
    lifetime = args.lifetime_days * 24 * 3600 if args.lifetime_days else None
    ca = node.init_ca(seed=args.seed, text=args.text, cert_lifetime=lifetime)
    node.save_config()  # leave an editable node_config.json beside the CA
    _emit(
        args,
        f"CA initialized; root public key {ca.root_public_key.hex()}",
        {"root_public_key": ca.root_public_key.hex(), "dir": str(node.ca_dir)},
    )
    return 0


def cmd_enroll(args) -> int:
    node = _node(args)
    ident = node.enroll(Role(args.role), args.name, text=args.text)
    _emit(
        args,
        f"enrolled {args.name} as {args.role}; address {ident.participant.address.hex()}",
        {
            "name": args.name,
            "role": args.role,
            "address": ident.participant.address.hex(),
            "cert": str(node.identities_dir / f"{args.name}.cert"),
            "key": str(node.identities_dir / f"{args.name}.key"),
        },
    )
    return 0


def cmd_evidence_create(args) -> int:
    node = _ready_node(args)
    ident = _identity(node, getattr(args, "as"))
    store = node.store_for(ident.participant.address)
    incident = {"summary": args.dsc, "device_type": args.type}
    event = store.import_file(ident.participant, ident.key, Path(args.payload), incident=incident, timestamp=args.tm)
    tx = store.tx_gen(event, ident.participant, ident.key, meta=incident, device_type=args.type)
    tx_id, height = node.submit(tx)
    _emit(
        args,
        f"evidence {event.id.hex()} created on chain (tx {tx_id.hex()} at height {height})",
        {"id": event.id.hex(), "tx_id": tx_id.hex(), "height": height},
    )
    return 0


def cmd_evidence_get(args) -> int:
    node = _ready_node(args)
    ident = _identity(node, getattr(args, "as"))
    id = _hex32(args.id, "evidence id")
    handle = chaincode.get_evidence(node.state, ident.participant, id)
    access_tx = chaincode.build_access(node.state, ident.participant, ident.key, id, at_time=node.clock())
    node.submit(access_tx)  # the read lands in the audit trail
    evidence = node.store_for(handle.record.creator).fetch(id)
    written = None
    if args.out:
        Path(args.out).write_bytes(evidence.payload)
        written = str(args.out)
    doc = handle.to_json_dict()
    doc["payload_bytes"] = len(evidence.payload)
    doc["payload_written_to"] = written
    _emit(
        args,
        f"evidence {args.id}: {len(evidence.payload)} bytes, owner {handle.record.own.hex()}"
        + (f", payload written to {written}" if written else ""),
        doc,
    )
    return 0


def cmd_evidence_transfer(args) -> int:
    node = _ready_node(args)
    ident = _identity(node, getattr(args, "as"))
    id = _hex32(args.id, "evidence id")
    new_owner = node.resolve_address(args.to)
    tx = chaincode.transfer_ownership(node.state, ident.participant, ident.key, id, new_owner, dsc_amendment=args.dsc or "")
    tx_id, height = node.submit(tx)
    _emit(
        args,
        f"ownership of {args.id} transferred to {new_owner.hex()} (tx {tx_id.hex()} at height {height})",
        {"id": args.id, "new_owner": new_owner.hex(), "tx_id": tx_id.hex(), "height": height},
    )
    return 0


def cmd_evidence_erase(args) -> int:
    node = _ready_node(args)
    ident = _identity(node, getattr(args, "as"))
    id = _hex32(args.id, "evidence id")
    tx = chaincode.erase_evidence(node.state, ident.participant, ident.key, id)
    tx_id, height = node.submit(tx)
    _emit(
        args,
        f"evidence {args.id} erased (tx {tx_id.hex()} at height {height}); metadata retained",
        {"id": args.id, "tx_id": tx_id.hex(), "height": height, "erased": True},
    )
    return 0


def cmd_device_register(args) -> int:
    node = _ready_node(args)
    ident = _identity(node, getattr(args, "as"))
    if not (args.firmware_file or args.firmware_hash) or not (args.config_file or args.config_hash):
        raise ChainError("provide --firmware-file/--firmware-hash and --config-file/--config-hash")
    firmware = _file_digest(node, args.firmware_file) if args.firmware_file else _hex32(args.firmware_hash, "firmware hash")
    config_h = _file_digest(node, args.config_file) if args.config_file else _hex32(args.config_hash, "config hash")
    tx = chaincode.register_device_state(node.state, ident.participant, ident.key, args.device_id, firmware, config_h)
    tx_id, height = node.submit(tx)
    _emit(
        args,
        f"device {args.device_id} state registered (tx {tx_id.hex()} at height {height})",
        {
            "device_id": args.device_id,
            "firmware_hash": firmware.hex(),
            "config_hash": config_h.hex(),
            "tx_id": tx_id.hex(),
            "height": height,
        },
    )
    return 0


def cmd_device_verify(args) -> int:
    node = _ready_node(args)
    firmware = _hex32(args.firmware_hash, "firmware hash")
    config_h = _hex32(args.config_hash, "config hash")
    result = chaincode.verify_device_state(node.state, args.device_id, firmware, config_h)
    if getattr(args, "as", None):
        ident = _identity(node, getattr(args, "as"))
        tx = chaincode.build_device_verify(node.state, ident.participant, ident.key, args.device_id, firmware, config_h)
        node.submit(tx)
    _emit(
        args,
        f"device {args.device_id}: {result.value}",
        {"device_id": args.device_id, "result": result.value},
    )
    return 0


def cmd_chain_verify(args) -> int:
    # Verify straight off the record file so a corrupt store is reported
    # rather than refusing to load.
    from .ledger import FileBlockStore, verify_store
    from .node import DEFAULT_CONFIG

    base = Path(args.dir)
    cfg_path = base / CONFIG_NAME
    hash_name = DEFAULT_CONFIG["hash_name"]
    if cfg_path.exists():
        hash_name = json.loads(cfg_path.read_text()).get("hash_name", hash_name)
    report = verify_store(FileBlockStore(base / "chain"), hash_name)
    if args.output == "structured":
        print(json.dumps(report.to_json_dict(), indent=2))
    elif report.valid:
        print(f"chain valid: {report.height} blocks")
    else:
        print(f"chain INVALID at height {report.first_invalid_height}")
        for check in report.blocks:
            if not check.valid:
                for reason in check.reasons:
                    print(f"  height {check.height}: {reason}")
    return 0 if report.valid else 1


def cmd_trail_show(args) -> int:
    node = _ready_node(args)
    id = _hex32(args.id, "evidence id")
    trail = node.trail(id)
    erased = node.state.is_erased(id)
    lines = [f"custody trail for {args.id} ({'erased' if erased else 'active'}):"]
    for seg in trail:
        end = seg.end if seg.end is not None else "OPEN"
        lines.append(f"  {seg.owner.hex()}  {seg.start} -> {end}")
    _emit(
        args,
        "\n".join(lines),
        {"id": args.id, "erased": erased, "trail": [c.to_json_dict() for c in trail]},
    )
    return 0


def cmd_scenario_run(args) -> int:
    spec_path = Path(args.spec)
    try:
        head = json.loads(spec_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ChainError(f"cannot read scenario spec: {exc}") from exc
    kind = head.get("kind", "smarthome")
    if kind == "network":
        from .network import run_network_scenario

        summary = run_network_scenario(head, seed=args.seed)
    else:
        from .pipeline import run_smarthome

        if not args.dir:
            raise ChainError("smart-home scenarios need --dir for the node directory")
        summary = run_smarthome(head, Path(args.dir), seed=args.seed)
    # The summary is the deterministic report in either output mode.
    print(json.dumps(summary, indent=2))
    return 0


def _load_server_node(args) -> tuple[LocalNode, str, int]:
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if not config_path:
        raise ChainError(f"--config (or ${CONFIG_ENV}) is required")
    config_path = Path(config_path)
    if config_path.is_dir():
        config_path = config_path / CONFIG_NAME
    if not config_path.exists():
        raise ChainError(f"config file {config_path} not found")
    node = LocalNode(config_path.parent)
    return node, node.config.get("host", "127.0.0.1"), int(node.config.get("port", 8808))


def cmd_node_start(args) -> int:
    node, host, port = _load_server_node(args)
    node.ensure_genesis()
    return _serve(node, host, port, args)


def cmd_explorer_serve(args) -> int:
    node, host, port = _load_server_node(args)
    if node.chain.height == 0:
        raise ChainError("chain is empty; start the node once (node start) before serving the explorer")
    return _serve(node, host, port, args)


def _serve(node: LocalNode, host: str, port: int, args) -> int:
    import uvicorn

    from .explorer_api import create_app

    app = create_app(node)
    print(f"serving {node.base_dir} on http://{host}:{port} (height {node.chain.height})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=["text", "structured"], default="text")

    parser = argparse.ArgumentParser(prog="custodychain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ca = sub.add_parser("ca", help="certificate authority").add_subparsers(dest="sub", required=True)
    p = ca.add_parser("init", parents=[common], help="create the root CA for a node directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--seed", default=None, help="deterministic seed (tests/sims only)")
    p.add_argument("--lifetime-days", type=int, default=None)
    p.add_argument("--text", action="store_true", help="write base64 text instead of binary")
    p.set_defaults(func=cmd_ca_init)

    p = sub.add_parser("enroll", parents=[common], help="enroll a participant")
    p.add_argument("--dir", required=True)
    p.add_argument("--role", required=True, choices=[r.value for r in Role])
    p.add_argument("--name", required=True)
    p.add_argument("--text", action="store_true")
    p.set_defaults(func=cmd_enroll)

    ev = sub.add_parser("evidence", help="evidence lifecycle").add_subparsers(dest="sub", required=True)
    p = ev.add_parser("create", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--as", required=True, help="acting identity (must be an ISP)")
    p.add_argument("--payload", required=True, help="raw or pcap file ingested as opaque bytes")
    p.add_argument("--dsc", default="")
    p.add_argument("--type", default="", help="attacked device type tag")
    p.add_argument("--tm", type=int, default=None, help="incident time (UTC seconds)")
    p.set_defaults(func=cmd_evidence_create)

    p = ev.add_parser("get", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--as", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--out", default=None, help="write the payload to this file")
    p.set_defaults(func=cmd_evidence_get)

    p = ev.add_parser("transfer", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--as", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--to", required=True, help="enrolled name or hex address")
    p.add_argument("--dsc", default="", help="optional description amendment (appended)")
    p.set_defaults(func=cmd_evidence_transfer)

    p = ev.add_parser("erase", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--as", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_evidence_erase)

    dev = sub.add_parser("device", help="device state registry").add_subparsers(dest="sub", required=True)
    p = dev.add_parser("register", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--as", required=True)
    p.add_argument("--device-id", required=True)
    p.add_argument("--firmware-file", default=None)
    p.add_argument("--firmware-hash", default=None)
    p.add_argument("--config-file", default=None)
    p.add_argument("--config-hash", default=None)
    p.set_defaults(func=cmd_device_register)

    p = dev.add_parser("verify", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--device-id", required=True)
    p.add_argument("--firmware-hash", required=True)
    p.add_argument("--config-hash", required=True)
    p.add_argument("--as", default=None, help="also record the verification on chain as this identity")
    p.set_defaults(func=cmd_device_verify)

    chain = sub.add_parser("chain", help="ledger audit").add_subparsers(dest="sub", required=True)
    p = chain.add_parser("verify", parents=[common])
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_chain_verify)

    trail = sub.add_parser("trail", help="chain of custody").add_subparsers(dest="sub", required=True)
    p = trail.add_parser("show", parents=[common])
    p.add_argument("--dir", required=True)
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_trail_show)

    scen = sub.add_parser("scenario", help="simulations").add_subparsers(dest="sub", required=True)
    p = scen.add_parser("run", parents=[common])
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--dir", default=None, help="node directory (smart-home scenarios)")
    p.set_defaults(func=cmd_scenario_run)

    nd = sub.add_parser("node", help="node lifecycle").add_subparsers(dest="sub", required=True)
    p = nd.add_parser("start", parents=[common])
    p.add_argument("--config", default=None, help=f"node config file (or ${CONFIG_ENV})")
    p.set_defaults(func=cmd_node_start)

    ex = sub.add_parser("explorer", help="HTTP explorer").add_subparsers(dest="sub", required=True)
    p = ex.add_parser("serve", parents=[common])
    p.add_argument("--config", default=None, help=f"node config file (or ${CONFIG_ENV})")
    p.set_defaults(func=cmd_explorer_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChainError as exc:
        print(json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(json.dumps({"code": "NOT_FOUND", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
