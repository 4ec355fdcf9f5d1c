"""Disjoint crossings of an annulus and the dual circuit that certifies them.

Draws one critical configuration on Ann(4, 8), counts edge-disjoint open
crossings by max-flow, recovers a closed dual circuit with the same number of
open edges on it, and then flips a single edge to show N moving by at most one.

    python demos/crossings_and_circuits.py [seed]
"""

import sys

from ipsplice.crossings import (
    circuit_through_edge,
    count_disjoint_crossings,
    min_defect_circuit,
)
from ipsplice.lattice import AnnulusSpec
from ipsplice.weights import sample_box, threshold_config

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
ann = AnnulusSpec(4, 8)
config = threshold_config(sample_box(ann.outer, seed), 0.5)

flow = count_disjoint_crossings(config, ann)
print(f"N = {flow.value} edge-disjoint open crossings of Ann(4, 8)")
for k, path in enumerate(flow.paths):
    print(f"  crossing {k}: {len(path) - 1} edges, {tuple(path[0])} -> {tuple(path[-1])}")
print(f"min cut: {len(flow.min_cut)} edges, {int(config.status(flow.min_cut).sum())} of them open")

circ = min_defect_circuit(config, ann)
print(f"dual circuit: {len(circ.crossed)} steps, {circ.defect_count} defects, simple={circ.simple}")

# every edge whose flip changes N sits on a circuit with at most N defects
for e in ann.edges():
    e = tuple(int(v) for v in e)
    flipped = config.with_status(e, not config.is_open(e))
    m = count_disjoint_crossings(flipped, ann, witness=False).value
    if m != flow.value:
        through = circuit_through_edge(config, ann, e, flow.value)
        print(f"flip {e}: N {flow.value} -> {m}; circuit through it with "
              f"{through.defect_count} defects (budget {flow.value})")
        break
