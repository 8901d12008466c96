# src/errors.py
from __future__ import annotations

from typing import Sequence, Tuple


# ----------------------------
# Exit codes
# ----------------------------

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_GATE_VIOLATION = 3
EXIT_NUMERICAL_ERROR = 4


# ----------------------------
# Error taxonomy
# ----------------------------

class HarnessError(Exception):
    code: str = "harness_error"
    exit_code: int = EXIT_INPUT_ERROR


class InsufficientDataError(HarnessError):
    code = "insufficient_data"


class DataValidationError(HarnessError):
    code = "data_validation"


class ParseError(HarnessError):
    code = "parse_error"

    def __init__(self, message: str, *, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class StructuralError(HarnessError):
    code = "structural_error"


class EmptyExtractionError(HarnessError):
    code = "empty_extraction"


class EmptyResultError(HarnessError):
    code = "empty_result"


class ConfigurationError(HarnessError):
    code = "configuration_error"


class DomainError(HarnessError):
    # raised by the special functions; inputs are validated before they get there
    code = "domain_error"
    exit_code = EXIT_NUMERICAL_ERROR


class NumericalConvergenceError(HarnessError):
    code = "numerical_convergence"
    exit_code = EXIT_NUMERICAL_ERROR

    def __init__(self, *, a: float, b: float, x: float, iterations: int):
        super().__init__(
            f"incomplete beta did not converge after {iterations} iterations (a={a!r}, b={b!r}, x={x!r})"
        )
        self.a = a
        self.b = b
        self.x = x


class DegenerateVarianceError(HarnessError):
    code = "degenerate_variance"


class FeasibilityError(HarnessError):
    code = "feasibility_error"


class PlanningError(HarnessError):
    code = "planning_error"

    def __init__(self, message: str, rejected: Sequence[Tuple[str, str]] = ()):
        detail = "; ".join(f"{combo}: {why}" for combo, why in rejected)
        super().__init__(f"{message} [{detail}]" if detail else message)
        self.rejected = tuple(rejected)


class TemplateError(HarnessError):
    code = "template_error"


class AlignmentError(HarnessError):
    code = "alignment_error"


class SettingLookupError(HarnessError):
    code = "setting_lookup"


class ResultsIndexError(HarnessError):
    code = "results_index_unwritable"
