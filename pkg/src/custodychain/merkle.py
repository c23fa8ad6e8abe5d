"""Merkle tree over transaction ids with duplicate-last-leaf padding.

Inclusion proofs are lists of (sibling digest, sibling-is-left) pairs from
leaf to root.
"""

from __future__ import annotations

from .config import ZERO_DIGEST, digest


def _pair(hash_name: str, left: bytes, right: bytes) -> bytes:
    return digest(hash_name, left + right)


def merkle_root(leaves: list[bytes], hash_name: str = "sha256") -> bytes:
    if not leaves:
        return ZERO_DIGEST
    layer = list(leaves)
    while len(layer) > 1:
        if len(layer) % 2 == 1:
            layer.append(layer[-1])
        layer = [_pair(hash_name, layer[i], layer[i + 1]) for i in range(0, len(layer), 2)]
    return layer[0]


def merkle_proof(leaves: list[bytes], index: int, hash_name: str = "sha256") -> list[tuple[bytes, bool]]:
    """Inclusion proof for leaves[index]; each step is (sibling, sibling_is_left)."""
    if not 0 <= index < len(leaves):
        raise IndexError("leaf index out of range")
    proof: list[tuple[bytes, bool]] = []
    layer = list(leaves)
    pos = index
    while len(layer) > 1:
        if len(layer) % 2 == 1:
            layer.append(layer[-1])
        sibling = pos ^ 1
        proof.append((layer[sibling], sibling < pos))
        layer = [_pair(hash_name, layer[i], layer[i + 1]) for i in range(0, len(layer), 2)]
        pos //= 2
    return proof


def verify_proof(
    leaf: bytes,
    proof: list[tuple[bytes, bool]],
    root: bytes,
    hash_name: str = "sha256",
) -> bool:
    node = leaf
    for sibling, sibling_is_left in proof:
        node = _pair(hash_name, sibling, node) if sibling_is_left else _pair(hash_name, node, sibling)
    return node == root
