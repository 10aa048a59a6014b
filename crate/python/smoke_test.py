#!/usr/bin/env python3
"""Smoke test for the netos_py extension module.

Build the extension first, then run this script:

    cargo build -p netos-py --release
    python3 python/smoke_test.py

The script locates the compiled cdylib under target/, exposes it as an
importable module, and drives the main types and operations end to end.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = []
    for profile in ("release", "debug"):
        lib = REPO_ROOT / "target" / profile / "libnetos_py.so"
        if lib.exists():
            candidates.append(lib)
    if not candidates:
        sys.exit(
            "libnetos_py.so not found; run `cargo build -p netos-py --release` first"
        )
    lib = max(candidates, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="netos-py-"))
    shutil.copy2(lib, stage / "netos_py.so")
    sys.path.insert(0, str(stage))
    import netos_py

    return netos_py


def main():
    netos = load_module()
    print(f"loaded netos_py {netos.__version__}")

    # Trace generation, round trip, dependency analysis.
    trace = netos.Trace.generate("diamond", 4, seed=1)
    assert len(trace) == 4
    reparsed = netos.Trace.parse(trace.to_text())
    assert reparsed.to_text() == trace.to_text()
    dep = trace.dep_graph()
    assert dep.node_count == 4
    assert dep.edges() == [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]
    assert dep.total_weight == 4

    # Overlapping partitioning beats the exhaustive disjoint optimum.
    partition, quality = netos.greedy_partition(dep, 4, seed=0, overlap=True, restarts=8)
    assert quality["t_scaled"] == 4, quality
    assert partition.overlap_node_count >= 1
    _, disjoint = netos.brute_force_partition(dep, 4)
    assert disjoint["t_scaled"] == 8
    assert quality["t_scaled"] < disjoint["t_scaled"]

    # Quality re-evaluation through the partition object agrees.
    again = partition.quality(dep, 4)
    assert again["t_scaled"] == quality["t_scaled"]

    # Full pipeline to a JSON report.
    report = json.loads(
        netos.run_pipeline(gen="random-dag:40:9", cores=4, overlap=True, mesh="2x2", seed=17)
    )
    assert report["record_count"] == 40
    assert report["quality"]["n"] == 4
    assert len(report["mapping"]) == report["process_graph"]["processes"]

    # Microbenchmark: the affinity-aware policy never loses to random on
    # average over a few seeds.
    netos_total = random_total = 0
    for seed in range(10):
        netos_total += netos.run_microbenchmark(2, 64, 4, 4, policy="netos", seed=seed)[
            "makespan"
        ]
        random_total += netos.run_microbenchmark(2, 64, 4, 4, policy="random", seed=seed)[
            "makespan"
        ]
    assert netos_total <= random_total, (netos_total, random_total)

    # Sweep CSV has the pinned header and one row per combination.
    csv = netos.sweep_csv([1, 2], [1, 64], [4, 16], ["netos", "roundrobin"], seed=3)
    lines = csv.strip().splitlines()
    assert lines[0] == "policy,cores_x,cores_y,pairs,msg_kib,seed,makespan,msg_cycles,block_cycles"
    assert len(lines) == 1 + 2 * 2 * 2 * 2

    # Mapping and simulation through the one-call wrapper.
    chain = netos.Trace.generate("mapreduce", 9, seed=3)
    result = netos.partition_map_simulate(chain, 4, 2, 2, seed=0, overlap=True)
    sim = result["simulation"]
    assert sim["makespan"] >= max(sim["per_core_busy"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
