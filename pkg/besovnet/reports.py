"""
Besovnet reports

Pydantic schemas for compile records, rate sweeps and gadget sweeps.
"""

from typing import Optional, Union

from pydantic import BaseModel, ConfigDict

ConfigValue = Union[str, int, float, bool, None]


class ApproximationRecord(BaseModel):
    """One compiled N-term network and its measured error."""
    model_config = ConfigDict(extra='forbid')

    N: int
    weights: int
    depth: int
    epsilon: float
    error_p: Optional[float] = None
    r_class: int = 1
    coefficient_sum: float = 0.0
    budget_bound: float = 0.0
    budget_error: Optional[float] = None
    budget_ok: Optional[bool] = None
    coefficient_bound: Optional[float] = None
    coefficient_bound_ok: Optional[bool] = None

    def csv_row(self) -> dict:
        return self.model_dump()


class RateFit(BaseModel):
    slope: float
    stderr: float
    intercept: float
    r_squared: float
    dropped: int = 0
    # error ≈ C·W^{-α/d}(1 + log W)^{α/d}: the C of every fitted point
    log_corrected_constants: list[float] = []
    log_corrected_ratio: Optional[float] = None


class RateReport(BaseModel):
    """Sweep over N sorted by N, with the log-log fit of error against weights."""
    rows: list[ApproximationRecord]
    fitted_slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    fit: Optional[RateFit] = None
    config: dict[str, ConfigValue] = {}


class GadgetRecord(BaseModel):
    kind: str
    epsilon: float
    parameter: float
    weights: int
    depth: int
    error: float
    # multd-repu: relative error within the conditioning bound at every sample
    bound_ok: Optional[bool] = None


class GadgetReport(BaseModel):
    """Weights against accuracy for one multiplication gadget."""
    kind: str
    rows: list[GadgetRecord]
    # weights ≈ a + b·log(1/ε)
    log_slope: Optional[float] = None
    r_squared: Optional[float] = None
    config: dict[str, ConfigValue] = {}


def report_schema() -> dict:
    """JSON schema of RateReport, published with `rates --schema`."""
    return RateReport.model_json_schema()
