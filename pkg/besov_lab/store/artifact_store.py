"""
File-based storage for experiment artifacts.

Every command writes into one output directory:
  - report.json / points.csv: RateReport of approx-rate and est-rate runs
  - compare.json / compare.csv: ComparisonTable of compare runs
  - network.json / certificate.json: net-synth results
  - rates.json: the `rates` calculator output
  - coeffs.txt / data.csv: optional besov-coeffs v1 and dataset dumps
  - run-info.json: wall time, timestamps and the worker count

Everything except run-info.json is deterministic: floats are written with
the shortest round-trip decimal and JSON keys are sorted, so a rerun with the
same config and seed reproduces the files byte for byte.

Default location: ./runs/<command>-<config hash prefix> (relative to the
working directory), overridden by --out.
"""
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from ..estimators.base import RegressionDataset
from ..models.report import ComparisonTable, RateReport, canonical_json
from ..models.sparse_coeffs import SparseCoeffs
from ..relu.network import ReluNetwork

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
POINTS_FILE = "points.csv"
COMPARE_FILE = "compare.json"
COMPARE_CSV_FILE = "compare.csv"
NETWORK_FILE = "network.json"
CERTIFICATE_FILE = "certificate.json"
RATES_FILE = "rates.json"
RUN_INFO_FILE = "run-info.json"

DEFAULT_RUNS_DIR = "runs"


def _cell(value: Any) -> str:
    """One CSV cell: empty for None, repr for floats."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def default_out_dir(command: str, config_hash: str) -> Path:
    return Path(DEFAULT_RUNS_DIR) / f"{command}-{config_hash[:12]}"


class ArtifactStore:
    """
    Writes and reads the artifacts of one run directory.

    The directory is created on first use. Existing files are overwritten.
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, canonical_json(payload))

    def read_json(self, name: str) -> Any:
        return json.loads(self.path(name).read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # Rate reports
    # ------------------------------------------------------------------

    def write_report(self, report: RateReport) -> Path:
        """report.json plus the points.csv mirror (N, error, stderr, kept, residual)."""
        rows = [(pt.N, pt.error, pt.stderr, pt.kept, pt.residual) for pt in report.points]
        self.write_text(POINTS_FILE, _csv(["N", "error", "stderr", "kept", "residual"], rows))
        return self.write_text(REPORT_FILE, report.to_json())

    def load_report(self) -> RateReport:
        return RateReport.model_validate_json(self.path(REPORT_FILE).read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # Comparison tables
    # ------------------------------------------------------------------

    def write_comparison(self, table: ComparisonTable) -> Path:
        """compare.json plus compare.csv with <label>_mean and <label>_stderr columns per estimator."""
        header = ["n"]
        for label in table.estimators:
            header.extend([f"{label}_mean", f"{label}_stderr"])
        rows = []
        for row in table.rows:
            cells: List[Any] = [row.n]
            for label in table.estimators:
                cells.extend([row.mean[label], row.stderr[label]])
            rows.append(cells)
        self.write_text(COMPARE_CSV_FILE, _csv(header, rows))
        return self.write_text(COMPARE_FILE, table.to_json())

    def load_comparison(self) -> ComparisonTable:
        return ComparisonTable.model_validate_json(self.path(COMPARE_FILE).read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # Networks, coefficients, datasets
    # ------------------------------------------------------------------

    def write_network(self, network: ReluNetwork) -> Path:
        return self.write_text(NETWORK_FILE, network.to_json())

    def load_network(self) -> ReluNetwork:
        return ReluNetwork.from_json(self.path(NETWORK_FILE).read_text(encoding="utf-8"))

    def write_certificate(self, payload: Dict[str, Any]) -> Path:
        return self.write_json(CERTIFICATE_FILE, payload)

    def write_rates(self, payload: Dict[str, Any]) -> Path:
        return self.write_json(RATES_FILE, payload)

    def write_coeffs(self, coeffs: SparseCoeffs, name: str = "coeffs.txt") -> Path:
        return self.write_text(name, coeffs.dumps())

    def write_dataset(self, data: RegressionDataset, name: str = "data.csv") -> Path:
        path = data.to_csv(self.path(name))
        self.written.append(path)
        return path

    # ------------------------------------------------------------------
    # Sidecar
    # ------------------------------------------------------------------

    def write_run_info(
        self,
        command: str,
        config_hash: str,
        started: datetime,
        wall_time: float,
        jobs: int,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """run-info.json: the only artifact allowed to differ between reruns."""
        payload: Dict[str, Any] = {
            "command": command,
            "config_hash": config_hash,
            "started": started.astimezone(timezone.utc).isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "wall_time_seconds": wall_time,
            "jobs": jobs,
            "artifacts": sorted(p.name for p in self.written),
        }
        if extra:
            payload.update(extra)
        return self.write_json(RUN_INFO_FILE, payload)
