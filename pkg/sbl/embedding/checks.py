"""
Stage checks of the embedding pipeline.

Every assertion of a stage is recorded as a ``Check``. A failing check raises only when it
is guaranteed, i.e. when it is a structural invariant or when the premise it depends on
holds for the instance at hand. Otherwise the failure is logged as a warning and kept in
the stage report.
"""

from dataclasses import dataclass, field

from sbl.utils import LemmaViolation, logger

__all__ = ["Check", "StageLog"]


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    bound: object = None
    guaranteed: bool = True
    detail: str = ""


@dataclass
class StageLog:
    """
    The checks and measured quantities of one pipeline stage.
    """

    stage: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def record(
        self,
        name,
        passed,
        value=None,
        bound=None,
        guaranteed=True,
        detail="",
        error=LemmaViolation,
    ):
        check = Check(
            name=name,
            passed=bool(passed),
            value=value,
            bound=bound,
            guaranteed=guaranteed,
            detail=detail,
        )
        self.checks.append(check)
        if not check.passed:
            message = f"{self.stage}: {name} failed (value={value}, bound={bound}) {detail}"
            if guaranteed:
                raise error(message.strip())
            logger.warning(message.strip())
        return check

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def warnings(self):
        return [check for check in self.checks if not check.passed]
