"""Metrics report container and CSV emission."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import UnknownSeries

SERIES_COLUMNS = {
    "reputation_series": ["interaction", "identity", "score"],
    "gas": ["n_calls", "l1_total", "l2_commit", "l2_verify", "l2_execute", "l2_total"],
    "latencies": ["tx_id", "function_class", "submitted_at", "finalized_at", "latency"],
    "batches": ["batch_index", "n_txs", "commit_gas", "verify_gas", "execute_gas", "total_gas"],
    "blocks": ["height", "timestamp", "tx_count", "gas_total"],
    "throughput": ["block_time", "send_rate", "throughput", "mean_latency", "included", "backlog"],
    "time_overhead": ["function_class", "n_calls", "simulated_seconds", "published_wallclock_seconds"],
}


@dataclass
class MetricsReport:
    name: str
    throughput: float = 0.0
    latencies: list[dict] = field(default_factory=list)
    gas: dict = field(default_factory=dict)
    reputation_series: list[dict] = field(default_factory=list)
    series: dict[str, list[dict]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def table(self, which: str) -> list[dict]:
        if which == "reputation_series" and self.reputation_series:
            return self.reputation_series
        if which == "latencies" and self.latencies:
            return self.latencies
        if which in self.series:
            return self.series[which]
        raise UnknownSeries(which)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> MetricsReport:
        return cls(**json.loads(text))


def plot_data(report: MetricsReport, which: str, out: str | Path | None = None) -> str:
    """Render one series as CSV with a header row; optionally write it to ``out``."""
    if which not in SERIES_COLUMNS:
        raise UnknownSeries(which)
    rows = report.table(which)
    columns = SERIES_COLUMNS[which]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row[c] for c in columns])
    text = buf.getvalue()
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    return text


def write_report(report: MetricsReport, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(report.to_json())
    for which in SERIES_COLUMNS:
        try:
            plot_data(report, which, out / f"{which}.csv")
        except UnknownSeries:
            continue
    return path
