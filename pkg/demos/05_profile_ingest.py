"""
From float measurements to clustered temperature curves
=======================================================

Raw rows (platform, time, position, pressure, value) are grouped into
profiling cycles.  Cycles with too few points are dropped, the rest are
interpolated with natural cubic splines onto a 2 dbar grid, and only
curves covering the whole 20-300 dbar window are kept.
"""

from pathlib import Path

import numpy as np

from bfms import BandwidthSchedule, RunConfig, assign_clusters, run_full
from bfms.ingest import group_cycles, read_measurements, run_pipeline, IngestSummary

fixture = Path(__file__).resolve().parents[1] / "tests" / "data" / "pipeline_fixture.csv"
summary = IngestSummary()
rows = read_measurements(fixture, summary)
for c in group_cycles(rows):
    print(f"{c.cycle_id}: {len(c)} points, {c.pressure[0]:.0f}-{c.pressure[-1]:.0f} dbar")

curves, provenance, summary = run_pipeline(rows, summary=summary)
print({k: v for k, v in summary.to_dict().items() if k != "malformed_examples"})
print("kept:", [p["cycle_id"] for p in provenance])

# two nearly identical profiles fall into one cluster at a generous range
trace = run_full(curves, RunConfig(BandwidthSchedule.constant(2.0, 10.0), 1e-8, 200))
print("clusters:", assign_clusters(trace.final, 1e-7).labels.tolist(),
      "temperature at 100 dbar:", np.round(curves.values[:, 40], 3).tolist())
