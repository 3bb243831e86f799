"""Least-squares estimation of the height-padding constant.

The padding model says a pedestrian's full-body pixel height exceeds the
skeleton-box height by ``alpha / z``. Given manually measured full-body
heights for a handful of pedestrians, ``alpha`` is the zero-intercept
least-squares fit of the height gap ``d = h_true - h_s`` against the
inverse distance ``u = 1 / z``:

    alpha = sum(d_i * u_i) / sum(u_i ** 2)

No intercept term is fitted: the model itself has none, and adding one
would contradict the formula the synthesis pipeline then applies.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence, TextIO, Union

from .errors import EmptySampleSet, InvalidSample, ParseError

log = logging.getLogger(__name__)

SAMPLE_CSV_HEADER = ("h_s_px", "z_m", "h_true_px")


@dataclass(frozen=True)
class CalibrationSample:
    """One manually measured pedestrian: skeleton-box height, distance, true height."""

    h_s_px: float
    z_m: float
    h_true_px: float


@dataclass(frozen=True)
class CalibrationResult:
    """Fitted padding constant with residual diagnostics.

    ``rmse_px`` and ``max_abs_residual_px`` measure predicted vs measured
    full-body heights under the fitted constant.
    """

    alpha: float
    n_samples: int
    rmse_px: float
    max_abs_residual_px: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "n_samples": self.n_samples,
                "rmse_px": self.rmse_px,
                "max_abs_residual_px": self.max_abs_residual_px,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CalibrationResult":
        try:
            doc = json.loads(text)
            return cls(
                alpha=float(doc["alpha"]),
                n_samples=int(doc["n_samples"]),
                rmse_px=float(doc["rmse_px"]),
                max_abs_residual_px=float(doc["max_abs_residual_px"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"not a calibration result document: {exc}") from exc


def _check_sample(sample: CalibrationSample, location: str) -> None:
    for name, value in (
        ("h_s_px", sample.h_s_px),
        ("z_m", sample.z_m),
        ("h_true_px", sample.h_true_px),
    ):
        if not (math.isfinite(value) and value > 0):
            raise InvalidSample(f"{name} must be finite and positive, got {value!r}", location=location)


def fit_alpha(samples: Sequence[CalibrationSample]) -> CalibrationResult:
    """Fit the padding constant from measured samples.

    Samples with a measured height below the skeleton height contribute a
    negative gap; they are kept (dropping them would bias the fit upward)
    and logged as a warning since they usually indicate measurement noise.

    Raises:
        EmptySampleSet: no samples were supplied.
        InvalidSample: a sample has a non-positive height or distance.
    """
    if not samples:
        raise EmptySampleSet("cannot fit alpha from zero samples")
    negative_rows = 0
    for i, sample in enumerate(samples):
        _check_sample(sample, location=f"row {i}")
        if sample.h_true_px < sample.h_s_px:
            negative_rows += 1
    if negative_rows:
        log.warning(
            "%d of %d calibration samples have measured height below the "
            "skeleton height; keeping them",
            negative_rows,
            len(samples),
        )

    # Zero-intercept least squares of gap vs 1/z; dividing by z before
    # squaring keeps the one-sample case exact (z*z is exact for integral z).
    num = math.fsum((s.h_true_px - s.h_s_px) / s.z_m for s in samples)
    den = math.fsum(1.0 / (s.z_m * s.z_m) for s in samples)
    alpha = num / den

    residuals = [(s.h_s_px + alpha / s.z_m) - s.h_true_px for s in samples]
    rmse = math.sqrt(math.fsum(r * r for r in residuals) / len(residuals))
    max_abs = max(abs(r) for r in residuals)
    return CalibrationResult(
        alpha=alpha,
        n_samples=len(samples),
        rmse_px=rmse,
        max_abs_residual_px=max_abs,
    )


def load_calibration_samples(source: Union[str, TextIO]) -> list[CalibrationSample]:
    """Read samples from CSV with header ``h_s_px,z_m,h_true_px``.

    Line numbers in errors are 1-based and count the header line.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty calibration file, expected header h_s_px,z_m,h_true_px")
    if tuple(field.strip() for field in header) != SAMPLE_CSV_HEADER:
        raise ParseError(
            f"bad header {','.join(header)!r}, expected h_s_px,z_m,h_true_px",
            location="line 1",
        )

    samples: list[CalibrationSample] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", location=f"line {line_no}")
        try:
            values = [float(field) for field in row]
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", location=f"line {line_no}") from exc
        sample = CalibrationSample(h_s_px=values[0], z_m=values[1], h_true_px=values[2])
        _check_sample(sample, location=f"line {line_no}")
        samples.append(sample)
    return samples
