"""
Compiler module: renders reports as Markdown for the console.

The compiler turns the deterministic report models into short Markdown
documents printed after each command:

1. Rate reports (approx-rate, est-rate): a summary list with the fitted and
   theoretical exponents, then a points table (budget, error, stderr, kept)
2. Comparison tables (compare): per-n mean risk ± stderr for each estimator,
   with the best estimator of each row in bold
3. Rate calculators (rates) and net-synth summaries: key/value tables

Nothing here is written to the artifact files; report bytes never depend on
formatting.
"""
from typing import Any, Dict, List, Optional, Sequence

from ..models.report import STATUS_FITTED, ComparisonTable, RateReport


def _num(value: Optional[float], digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}g}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


class ReportCompiler:
    """Formats report models as Markdown."""

    def compile_rate_report(self, report: RateReport) -> str:
        lines: List[str] = [f"## {report.experiment}", "", f"- **Claim**: {report.claim}"]
        lines.append(f"- **Theory exponent**: {_num(report.exponent_theory)}")
        if report.status == STATUS_FITTED:
            lines.append(f"- **Fitted exponent**: {_num(report.exponent_fit)}")
            lines.append(f"- **Relative deviation**: {report.relative_deviation:.1%}")
            lines.append(f"- **Residual SSE**: {_num(report.residual_sse)}")
        else:
            lines.append(f"- **Status**: {report.status} ({report.reason})")
        for key in sorted(report.sidebar):
            lines.append(f"- **{key}**: {_num(report.sidebar[key])}")
        lines.append(f"- **Seed**: {report.seed}")
        if report.config_hash:
            lines.append(f"- **Config**: `{report.config_hash[:12]}`")
        lines.append("")

        rows = [[str(pt.N), _num(pt.error), _num(pt.stderr), "-" if pt.kept is None else str(pt.kept)]
                for pt in report.points]
        lines.extend(_table(["N", "error", "stderr", "kept"], rows))

        if report.notes:
            lines.append("")
            lines.append("**Notes**:")
            lines.extend(f"- {note}" for note in report.notes)
        return "\n".join(lines)

    def compile_comparison(self, table: ComparisonTable) -> str:
        lines: List[str] = [f"## {table.experiment}", "", f"- **Claim**: {table.claim}"]
        lines.append(f"- **Seeds**: {len(table.seeds)}")
        for key in sorted(table.sidebar):
            lines.append(f"- **{key}**: {_num(table.sidebar[key])}")
        lines.append("")

        rows = []
        for row in table.rows:
            best = min(table.estimators, key=lambda label: row.mean[label])
            cells = [str(row.n)]
            for label in table.estimators:
                cell = f"{_num(row.mean[label])} ± {_num(row.stderr[label], 2)}"
                cells.append(f"**{cell}**" if label == best else cell)
            rows.append(cells)
        lines.extend(_table(["n"] + list(table.estimators), rows))

        if len(table.estimators) == 2 and table.rows:
            first, second = table.estimators
            lines.append("")
            wins = [f"n={row.n}: {table.seed_wins(first, second, row.n)}/{len(table.seeds)}" for row in table.rows]
            lines.append(f"**Seeds where {first} beats {second}**: " + ", ".join(wins))
        if table.notes:
            lines.append("")
            lines.extend(f"- {note}" for note in table.notes)
        return "\n".join(lines)

    def compile_key_values(self, title: str, values: Dict[str, Any]) -> str:
        """Two-column table of scalar results (rates, net-synth summaries)."""
        lines: List[str] = [f"## {title}", ""]
        rows = []
        for key in sorted(values):
            value = values[key]
            rows.append([key, _num(value, 6) if isinstance(value, float) else str(value)])
        lines.extend(_table(["quantity", "value"], rows))
        return "\n".join(lines)
