"""Check results and the versioned JSON report."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

REPORT_SCHEMA = "drham-report/1"

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"
ERROR = "error"


def exact_scope() -> str:
    return "exact"


def eps_scope(k: int | None) -> str:
    return "exact" if k is None else f"eps-order {k}"


@dataclass
class CheckResult:
    name: str
    scope: str
    verdict: str
    witness: str = ""
    note: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, SKIPPED)

    def to_json(self, timings: bool = False) -> dict:
        out = {"check": self.name, "scope": self.scope, "verdict": self.verdict}
        if self.witness:
            out["witness"] = self.witness
        if self.note:
            out["note"] = self.note
        if timings:
            out["seconds"] = round(self.seconds, 3)
        return out


def check(name: str, scope: str, ok: bool, witness: str = "", note: str = "") -> CheckResult:
    return CheckResult(name, scope, PASS if ok else FAIL, "" if ok else (witness or "identity does not hold"), note)


@dataclass
class Report:
    command: str
    config: dict
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def has_error(self) -> bool:
        return any(r.verdict == ERROR for r in self.results)

    def to_json(self, timings: bool = False) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "config": self.config,
            "verdict": PASS if self.ok else FAIL,
            "checks": [r.to_json(timings) for r in self.results],
        }

    def dumps(self, timings: bool = False) -> str:
        return json.dumps(self.to_json(timings), indent=2, sort_keys=True) + "\n"

    def text(self, timings: bool = False) -> str:
        lines = []
        width = max((len(r.name) for r in self.results), default=0)
        for r in self.results:
            line = f"{r.verdict.upper():7} {r.name:<{width}}  [{r.scope}]"
            if timings:
                line += f"  {r.seconds:.2f}s"
            if r.note:
                line += f"  ({r.note})"
            lines.append(line)
            if r.witness:
                lines.append(f"        witness: {truncate(r.witness)}")
        lines.append(f"{'PASS' if self.ok else 'FAIL'}: {sum(r.ok for r in self.results)}/{len(self.results)} checks")
        return "\n".join(lines) + "\n"


def truncate(s: str, limit: int = 400) -> str:
    return s if len(s) <= limit else s[:limit] + " ..."


def write_report(path, report: Report, timings: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(report.dumps(timings))
