"""Permissioned ledger for IoT forensic-evidence metadata and chain of custody."""

__version__ = "0.1.0"
