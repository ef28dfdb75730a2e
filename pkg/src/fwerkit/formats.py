"""
File formats: p-value and data-matrix CSVs, JSON plan files, result tables.

CSV files are comma-delimited with a mandatory header row and ``.`` as the
decimal separator. Rendering is deterministic; numbers are printed to a
fixed number of decimals (3 by default).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import AdjustedEntry, AdjustmentResult, PValueTable
from .errors import InputError, PlanValidationError
from .hierarchy import (
    FallbackPlan,
    FallbackStep,
    FallbackTrace,
    FallbackTraceStep,
    Family,
    FamilyOutcome,
    GatePlan,
    GateTrace,
    SequenceDecision,
    validate_plan,
)
from .resample import DataMatrix, WYEntry, WYResult

__all__ = [
    "PValueCSV",
    "parse_pvalue_csv",
    "parse_datamatrix_csv",
    "parse_plan",
    "plan_to_json",
    "render_result",
    "parse_result_csv",
]

CSV_WEIGHT_TOLERANCE = 1e-6

Result = Union[AdjustmentResult, FallbackTrace, GateTrace, WYResult, list]


class CsvFormatError(InputError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class PValueCSV:
    """A parsed p-value file: the table plus any optional plan hints."""

    table: PValueTable
    family: dict = field(default_factory=dict)
    weight: dict = field(default_factory=dict)
    order: dict = field(default_factory=dict)

    def fallback_plan(self, alpha: float) -> FallbackPlan:
        """Plan from the ``weight`` (and ``order``) columns."""
        if len(self.weight) != len(self.table):
            raise InputError("every row needs a weight to build a fallback plan")
        ids = list(self.table.ids)
        if self.order:
            ids.sort(key=lambda hid: self.order[hid])
        return FallbackPlan(tuple(FallbackStep(hid, self.weight[hid]) for hid in ids), alpha)


def _reader(text: str):
    rows = list(csv.reader(io.StringIO(text.lstrip("﻿"))))
    # keep physical line numbers, skip blank lines
    numbered = [(i + 1, row) for i, row in enumerate(rows) if any(cell.strip() for cell in row)]
    if not numbered:
        raise CsvFormatError("empty file: a header row is required")
    header_line, header = numbered[0]
    header = [h.strip() for h in header]
    return header, numbered[1:]


def _real(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(f"cannot parse {text!r} as a number", line, column) from None
    if math.isnan(value):
        raise CsvFormatError("NaN is not allowed", line, column)
    return value


def parse_pvalue_csv(text: str) -> PValueCSV:
    """Parse ``hypothesis_id,p_value[,family,weight,order]`` rows.

    Unknown extra columns are ignored. Rows stay in file order.
    """
    header, rows = _reader(text)
    for required in ("hypothesis_id", "p_value"):
        if required not in header:
            raise CsvFormatError(f"missing required column {required!r}", 1)
    col = {name: i for i, name in enumerate(header)}
    entries, seen = [], {}
    family, weight, order = {}, {}, {}
    for line, row in rows:
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        hid = row[col["hypothesis_id"]].strip()
        if not hid:
            raise CsvFormatError("empty hypothesis_id", line, "hypothesis_id")
        if hid in seen:
            raise CsvFormatError(f"duplicate hypothesis_id {hid!r} (first on line {seen[hid]})", line, "hypothesis_id")
        seen[hid] = line
        p = _real(row[col["p_value"]].strip(), line, "p_value")
        if not (0.0 <= p <= 1.0):
            raise CsvFormatError(f"p_value {p!r} outside [0, 1]", line, "p_value")
        entries.append((hid, p))
        if "family" in col and row[col["family"]].strip():
            family[hid] = row[col["family"]].strip()
        if "weight" in col and row[col["weight"]].strip():
            w = _real(row[col["weight"]].strip(), line, "weight")
            if w < 0:
                raise CsvFormatError("weight must be >= 0", line, "weight")
            weight[hid] = w
        if "order" in col and row[col["order"]].strip():
            order[hid] = _real(row[col["order"]].strip(), line, "order")
    if order:
        if len(order) != len(entries):
            raise CsvFormatError("order given for some rows but not all", None, "order")
        if len(set(order.values())) != len(order):
            raise CsvFormatError("order values must be distinct", None, "order")
    if weight and len(weight) == len(entries):
        total = math.fsum(weight.values())
        if abs(total - 1.0) > CSV_WEIGHT_TOLERANCE:
            raise CsvFormatError(f"weights sum to {total:.6g}, expected 1", None, "weight")
    return PValueCSV(PValueTable(tuple(entries)), family, weight, order)


def parse_datamatrix_csv(text: str) -> DataMatrix:
    """Parse ``unit_id,group,<outcome>...``; an empty cell is a missing value."""
    header, rows = _reader(text)
    for required in ("unit_id", "group"):
        if required not in header:
            raise CsvFormatError(f"missing required column {required!r}", 1)
    names = [h for h in header if h not in ("unit_id", "group")]
    if not names:
        raise CsvFormatError("no outcome columns", 1)
    if len(set(names)) != len(names):
        raise CsvFormatError("duplicate outcome column names", 1)
    col = {name: i for i, name in enumerate(header)}
    units, groups, values = [], [], []
    for line, row in rows:
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        units.append(row[col["unit_id"]].strip())
        g = row[col["group"]].strip()
        if g not in ("0", "1"):
            raise CsvFormatError(f"group must be 0 or 1, got {g!r}", line, "group")
        groups.append(g == "1")
        cells = []
        for name in names:
            cell = row[col[name]].strip()
            cells.append(np.nan if cell == "" else _real(cell, line, name))
        values.append(cells)
    if len(set(units)) != len(units):
        raise CsvFormatError("duplicate unit_id values", None, "unit_id")
    return DataMatrix(np.array(groups), np.array(values, dtype=float).reshape(len(units), len(names)), tuple(names), tuple(units))


# -- plans --------------------------------------------------------------------


def parse_plan(text: str) -> Union[FallbackPlan, GatePlan]:
    """Parse a JSON plan file.

    Fallback: ``{"alpha": .., "steps": [{"id": .., "weight": ..}, ..]}``.
    Gatekeeping: ``{"alpha": .., "mode": .., "intra_method": ..,
    "families": [{"id": .., "members": [..]}, ..]}``. An optional ``"type"``
    key (``"fallback"`` / ``"gatekeeping"``) disambiguates.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanValidationError([f"not valid JSON (line {exc.lineno}): {exc.msg}"]) from None
    if not isinstance(doc, dict):
        raise PlanValidationError(["plan must be a JSON object"])

    kind = doc.get("type")
    if kind is None:
        kind = "fallback" if "steps" in doc else "gatekeeping" if "families" in doc else None
    problems = []
    alpha = doc.get("alpha")
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
        problems.append("'alpha' must be a number")
        alpha = float("nan")

    if kind == "fallback":
        steps = doc.get("steps")
        if not isinstance(steps, list):
            raise PlanValidationError(problems + ["'steps' must be a list"])
        parsed = []
        for i, step in enumerate(steps):
            if not isinstance(step, dict) or not isinstance(step.get("id"), str) or not step.get("id"):
                problems.append(f"step {i + 1}: needs a non-empty string 'id'")
                continue
            w = step.get("weight")
            if not isinstance(w, (int, float)) or isinstance(w, bool):
                problems.append(f"step {i + 1}: 'weight' must be a number")
                continue
            parsed.append(FallbackStep(step["id"], float(w)))
        plan = FallbackPlan(tuple(parsed), alpha)
    elif kind in ("gatekeeping", "gate"):
        families = doc.get("families")
        if not isinstance(families, list):
            raise PlanValidationError(problems + ["'families' must be a list"])
        parsed = []
        for i, fam in enumerate(families):
            if not isinstance(fam, dict) or not isinstance(fam.get("id"), str) or not fam.get("id"):
                problems.append(f"family {i + 1}: needs a non-empty string 'id'")
                continue
            members = fam.get("members")
            if not isinstance(members, list) or not all(isinstance(x, str) and x for x in members):
                problems.append(f"family {fam['id']!r}: 'members' must be a list of ids")
                continue
            parsed.append(Family(fam["id"], tuple(members)))
        mode = doc.get("mode", "serial")
        method = doc.get("intra_method", "holm")
        if not isinstance(mode, str):
            problems.append("'mode' must be a string")
            mode = "?"
        if not isinstance(method, str):
            problems.append("'intra_method' must be a string")
            method = "?"
        plan = GatePlan(tuple(parsed), mode, method, alpha)
    else:
        raise PlanValidationError(["cannot tell plan type: expected 'steps' (fallback) or 'families' (gatekeeping)"])

    alpha_ok = not math.isnan(alpha)
    problems.extend(v for v in validate_plan(plan) if alpha_ok or not v.startswith("alpha"))
    if problems:
        raise PlanValidationError(problems)
    return plan


def plan_to_json(plan: Union[FallbackPlan, GatePlan]) -> str:
    if isinstance(plan, FallbackPlan):
        doc = {"type": "fallback", "alpha": plan.alpha,
               "steps": [{"id": s.hypothesis_id, "weight": s.weight} for s in plan.steps]}
    else:
        doc = {"type": "gatekeeping", "alpha": plan.alpha, "mode": plan.mode, "intra_method": plan.intra_method,
               "families": [{"id": f.family_id, "members": list(f.members)} for f in plan.families]}
    return json.dumps(doc, indent=2) + "\n"


# -- rendering ----------------------------------------------------------------


def _fmt(x: Optional[float], decimals: int) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    text = f"{x:.{decimals}f}"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def _flag(b: bool) -> str:
    return "true" if b else "false"


def _rows(result: Result, decimals: int) -> tuple[list[str], list[list[str]], list[str], list[list[str]]]:
    """(csv header, csv rows, pretty header, pretty rows)."""
    f = lambda x: _fmt(x, decimals)  # noqa: E731
    if isinstance(result, AdjustmentResult):
        header = ["hypothesis_id", "p_raw", "p_adjusted", "rank", "rejected", "method", "alpha"]
        rows = [[e.hypothesis_id, f(e.p_raw), f(e.p_adjusted), str(e.rank), _flag(e.rejected),
                 result.method, f(result.alpha)] for e in result.entries]
        pretty_header = ["Hypothesis", "p (raw)", f"p ({result.method})", "rank", "sig"]
        pretty = [[r[0], r[1], r[2], r[3], "*" if r[4] == "true" else ""] for r in rows]
        return header, rows, pretty_header, pretty
    if isinstance(result, FallbackTrace):
        header = ["hypothesis_id", "p_raw", "weight", "initial_alpha", "effective_alpha", "decision", "alpha"]
        rows = [[s.hypothesis_id, f(s.p_raw), f(s.weight), f(s.initial_alpha), f(s.effective_alpha),
                 "Reject" if s.rejected else "No Reject", f(result.plan.alpha)] for s in result.steps]
        pretty_header = ["(1) Dependent Variable", "(2) Unadjusted p-value", "(3) Weights",
                         "(4) Initial alpha", "(4) alpha propagation", "(5) H0", "sig"]
        pretty = [r[:6] + ["*" if r[5] == "Reject" else ""] for r in rows]
        return header, rows, pretty_header, pretty
    if isinstance(result, GateTrace):
        header = ["family_id", "hypothesis_id", "gate_opened", "gate_reason", "p_raw", "p_adjusted",
                  "status", "mode", "intra_method", "alpha"]
        rows, pretty = [], []
        for fam in result.families:
            for hid in fam.members:
                if fam.result is not None:
                    e = next(x for x in fam.result.entries if x.hypothesis_id == hid)
                    status = "rejected" if e.rejected else "retained"
                    rows.append([fam.family_id, hid, _flag(fam.gate_opened), fam.gate_reason,
                                 f(e.p_raw), f(e.p_adjusted)])
                else:
                    status = "untested"
                    rows.append([fam.family_id, hid, _flag(fam.gate_opened), fam.gate_reason, "", ""])
                rows[-1] += [status, result.plan.mode, result.plan.intra_method, f(result.plan.alpha)]
                pretty.append([fam.family_id, hid, rows[-1][4], rows[-1][5], status,
                               "*" if status == "rejected" else ""])
            pretty.append(["", f"(gate after {fam.family_id}: {'open' if _next_open(result, fam) else 'closed'})",
                           "", "", "", ""])
        if pretty:
            pretty.pop()
        pretty_header = ["Family", "Hypothesis", "p (raw)", f"p ({result.plan.intra_method})", "status", "sig"]
        return header, rows, pretty_header, pretty
    if isinstance(result, WYResult):
        header = ["outcome", "raw_p", "adjusted_p", "error", "B_used", "scheme", "seed"]
        rows = [[e.outcome, f(e.raw_p), f(e.adjusted_p), e.error or "", str(result.B_used), result.scheme,
                 str(result.seed)] for e in result.entries]
        pretty_header = ["Outcome", "p (raw)", "p (Westfall-Young)", "note"]
        pretty = [r[:4] for r in rows]
        return header, rows, pretty_header, pretty
    if isinstance(result, list) and all(isinstance(d, SequenceDecision) for d in result):
        header = ["hypothesis_id", "p_raw", "tested", "rejected"]
        rows = [[d.hypothesis_id, f(d.p_raw), _flag(d.tested), _flag(d.rejected)] for d in result]
        pretty_header = ["Hypothesis", "p (raw)", "decision", "sig"]
        pretty = [[r[0], r[1], ("Reject" if d.rejected else "No Reject") if d.tested else "untested",
                   "*" if d.rejected else ""] for r, d in zip(rows, result)]
        return header, rows, pretty_header, pretty
    raise TypeError(f"cannot render {type(result).__name__}")


def _next_open(trace: GateTrace, fam: FamilyOutcome) -> bool:
    idx = trace.families.index(fam)
    return idx + 1 < len(trace.families) and trace.families[idx + 1].gate_opened


def _pretty(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    numeric = [all(_looks_numeric(r[i]) for r in rows if r[i]) and any(r[i] for r in rows) for i in range(len(header))]

    def line(cells):
        out = [c.rjust(w) if num else c.ljust(w) for c, w, num in zip(cells, widths, numeric)]
        return "  ".join(out).rstrip()

    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def render_result(result: Result, format: str = "csv", decimals: int = 3) -> str:
    """Render any result object as CSV or as an aligned text table.

    The pretty format marks rejected hypotheses with ``*`` in a ``sig``
    column.
    """
    header, rows, pretty_header, pretty_rows = _rows(result, decimals)
    if format == "pretty":
        return _pretty(pretty_header, pretty_rows)
    if format != "csv":
        raise InputError(f"unknown output format {format!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _num(cell: str) -> Optional[float]:
    return None if cell == "" else float(cell)


def parse_result_csv(text: str) -> Result:
    """Inverse of ``render_result(..., "csv")`` at the printed precision."""
    header, numbered = _reader(text)
    rows = [dict(zip(header, row)) for _, row in numbered]
    if header[:2] == ["hypothesis_id", "p_raw"] and "p_adjusted" in header:
        entries = tuple(AdjustedEntry(r["hypothesis_id"], float(r["p_raw"]), float(r["p_adjusted"]),
                                      r["rejected"] == "true", int(r["rank"])) for r in rows)
        method = rows[0]["method"] if rows else ""
        alpha = float(rows[0]["alpha"]) if rows else 0.0
        return AdjustmentResult(entries, method, alpha)
    if "effective_alpha" in header:
        steps = tuple(FallbackTraceStep(r["hypothesis_id"], float(r["p_raw"]), float(r["weight"]),
                                        float(r["initial_alpha"]), float(r["effective_alpha"]),
                                        r["decision"] == "Reject") for r in rows)
        alpha = float(rows[0]["alpha"]) if rows else 1.0
        plan = FallbackPlan(tuple(FallbackStep(s.hypothesis_id, s.weight) for s in steps), alpha)
        return FallbackTrace(steps, plan)
    if header[:2] == ["family_id", "hypothesis_id"]:
        return _parse_gate_rows(rows)
    if header[:1] == ["outcome"]:
        entries = tuple(WYEntry(r["outcome"], _num(r["raw_p"]), _num(r["adjusted_p"]), r["error"] or None)
                        for r in rows)
        if rows:
            return WYResult(entries, int(rows[0]["B_used"]), rows[0]["scheme"], int(rows[0]["seed"]))
        return WYResult(entries, 0, "", 0)
    if header == ["hypothesis_id", "p_raw", "tested", "rejected"]:
        return [SequenceDecision(r["hypothesis_id"], float(r["p_raw"]), r["tested"] == "true",
                                 r["rejected"] == "true") for r in rows]
    raise InputError("unrecognised result CSV header")


def _parse_gate_rows(rows: list[dict]) -> GateTrace:
    order: list[str] = []
    grouped: dict[str, list[dict]] = {}
    for r in rows:
        if r["family_id"] not in grouped:
            order.append(r["family_id"])
            grouped[r["family_id"]] = []
        grouped[r["family_id"]].append(r)
    mode = rows[0]["mode"] if rows else "serial"
    method = rows[0]["intra_method"] if rows else "holm"
    alpha = float(rows[0]["alpha"]) if rows else 0.05
    families, outcomes, rejected = [], [], set()
    for fid in order:
        members = tuple(r["hypothesis_id"] for r in grouped[fid])
        families.append(Family(fid, members))
        first = grouped[fid][0]
        if first["status"] == "untested":
            result = None
        else:
            ranked = sorted(grouped[fid], key=lambda r: float(r["p_raw"]))
            ranks = {r["hypothesis_id"]: i + 1 for i, r in enumerate(ranked)}
            result = AdjustmentResult(
                tuple(AdjustedEntry(r["hypothesis_id"], float(r["p_raw"]), float(r["p_adjusted"]),
                                    r["status"] == "rejected", ranks[r["hypothesis_id"]]) for r in grouped[fid]),
                method, alpha)
            rejected.update(result.rejected_ids)
        outcomes.append(FamilyOutcome(fid, members, first["gate_opened"] == "true", first["gate_reason"], result))
    plan = GatePlan(tuple(families), mode, method, alpha)
    return GateTrace(tuple(outcomes), plan, frozenset(rejected))
