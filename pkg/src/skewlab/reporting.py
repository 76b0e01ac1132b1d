"""Pass/fail condition reports produced by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Condition:
    """One measured inequality: `measured` compared against `threshold`.

    `gating=False` marks informational entries that are printed but do not
    affect the report's overall verdict.
    """

    name: str
    passed: bool
    measured: float
    threshold: float
    note: str = ""
    gating: bool = True

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tag = "" if self.gating else " [info]"
        extra = f"  ({self.note})" if self.note else ""
        return (
            f"{verdict}{tag} {self.name}: measured={self.measured:.6g} "
            f"threshold={self.threshold:.6g}{extra}"
        )


@dataclass
class Report:
    """A named collection of conditions plus free-form extra values."""

    title: str
    conditions: list[Condition] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def add(self, name, passed, measured, threshold, note="", gating=True):
        self.conditions.append(
            Condition(name, bool(passed), float(measured), float(threshold), note, gating)
        )

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions if c.gating)

    @property
    def failing(self) -> list[Condition]:
        return [c for c in self.conditions if c.gating and not c.passed]

    def as_text(self) -> str:
        lines = [self.title]
        lines += ["  " + c.line() for c in self.conditions]
        for key, value in self.extras.items():
            lines.append(f"  {key} = {value}")
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)
