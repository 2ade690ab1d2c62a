"""
Short scenario runs, ledgers and CDFs
=====================================

Runs the three scenarios for a shortened horizon with all four schemes and
prints the headline numbers.  The full 500-slot runs are the same call
without ``slots``; see the README for the command line equivalent.
"""
import json
import tempfile
from pathlib import Path

from greenslice.runner import export_cdf, load_config, metrics_rows, run

configs = Path(__file__).resolve().parent.parent / "configs"
out = Path(tempfile.mkdtemp())

for name in ("default", "high-demand", "urgent-flow"):
    cfg = load_config(configs / f"{name}.yaml").with_overrides(slots=130, output_dir=str(out / name))
    res = run(cfg)
    cpu = {s: round(v["cpu_avg"]["mean"], 1) for s, v in res.summary["schemes"].items()}
    print(f"{name}: mean CPU {cpu}")
    print("  headline", json.dumps(res.summary["headline"], sort_keys=True))
    print("  audited solutions", res.audited, "violations", len(res.violations))

# the CDF of per-slot latency for flexalgo in the last run
cdf = export_cdf(metrics_rows(res.records), "latency_ms", "flexalgo")
print("latency CDF steps:", [(round(v, 1), round(p, 3)) for v, p in cdf[:: max(1, len(cdf) // 6)]])
print("files:", sorted(p.name for p in (out / "urgent-flow").iterdir()))
