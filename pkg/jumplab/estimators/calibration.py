"""
Interval coverage over independent repetitions of a known-truth estimate.
"""

import logging
from dataclasses import dataclass

from jumplab.errors import InputError

logger = logging.getLogger(__name__)


@dataclass
class CoverageResult:
    truth: float
    covered: int
    repetitions: int
    confidence: float

    @property
    def rate(self):
        return self.covered / self.repetitions

    def as_row(self):
        return {'truth': self.truth, 'covered': self.covered, 'repetitions': self.repetitions,
                'rate': self.rate, 'confidence': self.confidence}


def interval_coverage(run, truth, repetitions, plan):
    """run(plan) -> Estimate, repeated on plan.shifted(1), plan.shifted(2), ..."""
    if repetitions <= 0:
        raise InputError("repetitions must be positive")
    covered = 0
    for i in range(repetitions):
        est = run(plan.shifted(i + 1))
        covered += est.low <= truth <= est.high
    result = CoverageResult(float(truth), int(covered), repetitions, plan.confidence)
    logger.info("coverage %d / %d at confidence %.3f", covered, repetitions, plan.confidence)
    return result
