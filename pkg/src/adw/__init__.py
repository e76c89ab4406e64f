"""Agribusiness digital wallet: a desk-scale farm digitization platform.

A permissioned ledger with workflow smart-contract semantics, a farm event
pipeline, geo-analytics over tractor traces and a benchmark harness, glued
together by an HTTP gateway and the ``adw`` CLI.
"""

__version__ = "0.1.0"
