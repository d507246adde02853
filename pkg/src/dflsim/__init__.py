"""Deterministic desk-scale simulator for model poisoning attacks in
decentralized federated learning (DFL).

Clients train small dense classifiers, exchange parameter vectors over a
static overlay graph, and aggregate with pluggable robust rules while a
colluding subset injects poisoned updates.
"""

__version__ = "0.1.0"
