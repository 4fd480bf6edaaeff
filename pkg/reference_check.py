"""
Reference Value Check

Compares corpus-level feature values against published reference values
measured on a 40-hour LibriSpeech subset at 16 kHz. A column passes when
its corpus mean (median for the outlier-prone rows) lies within one
reference SD (MAD) of the reference value.

Implementations of the same feature disagree across toolkits, so a miss
is not necessarily a bug: known definition differences are attached to
the reported issue.
"""

import logging
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pipeline import FeatureMatrix

logger = logging.getLogger(__name__)

MIN_CORPUS_ROWS = 100


class ReferenceValue(BaseModel):
    """One reference row: expected centre and spread of a per-file feature column."""
    model_config = ConfigDict(frozen=True)

    column: str = Field(..., description="Feature matrix column")
    center: float = Field(..., description="Reference mean (median when robust)")
    spread: float = Field(..., gt=0, description="Reference SD (MAD when robust)")
    robust: bool = Field(False, description="Compare medians instead of means")
    known_cause: Optional[str] = Field(None, description="Documented definition difference")


def _ref(column: str, center: float, spread: float, robust: bool = False,
         known_cause: Optional[str] = None) -> ReferenceValue:
    return ReferenceValue(column=column, center=center, spread=spread,
                          robust=robust, known_cause=known_cause)


_KURTOSIS_CAUSE = (
    "excess kurtosis of the magnitude-weighted spectrum; the reference value is "
    "near-constant at -2.99, which no standard moment convention reproduces"
)
_SKEWNESS_CAUSE = (
    "dimensionless skewness of speech spectra is of order 1; the reference "
    "magnitude (1e-3) implies a different normalization"
)
_INTENSITY_CAUSE = "intensity is defined here as frame power (mean square), not a dB level"
_LOG_ENERGY_CAUSE = "log energy is the natural log of the whole-signal mean square"
_ROBUST_CAUSE = "outlier-prone feature; reference is median +/- MAD"

LIBRISPEECH_REFERENCE: List[ReferenceValue] = [
    # Spectral descriptors (time series, mean over time)
    _ref("spectral_slope.mean", -1.10e-3, 0.412e-3),
    _ref("spectral_flux.mean", 15.2e-3, 5.64e-3),
    _ref("spectral_entropy.mean", 4.46, 0.352),
    _ref("spectral_centroid.mean", 1.70e3, 0.401e3),
    _ref("spectral_spread.mean", 1.50e3, 0.178e3),
    _ref("spectral_skewness.mean", 1.74e-3, 0.621e-3, known_cause=_SKEWNESS_CAUSE),
    _ref("spectral_kurtosis.mean", -2.99, 0.00443, known_cause=_KURTOSIS_CAUSE),
    _ref("spectral_flatness.mean", 1.86e-3, 15.4e-3),
    _ref("spectral_rolloff.mean", 3.13e3, 0.677e3),

    # Classical speech features
    _ref("f0_statistics.mean", 149.0, 35.6),
    _ref("f0_statistics.sd", 26.5, 10.7),
    _ref("intensity.mean", 4.16e-3, 5.63e-3, known_cause=_INTENSITY_CAUSE),
    _ref("intensity_sd", 6.33e-3, 5.61e-3, known_cause=_INTENSITY_CAUSE),
    _ref("rms.mean", 0.0444, 0.0201),
    _ref("log_energy", -25.0, 3.22, known_cause=_LOG_ENERGY_CAUSE),
    _ref("sliding_log_energy.mean", -34.7, 4.81),
    _ref("zero_crossings.rate", 0.0528, 0.0183),
    _ref("sliding_zcr.mean", 0.0527, 0.0182),
    _ref("zero_crossings.count", 2.92e4, 1.34e4),
    _ref("loudness.integrated", -24.5, 2.89),
    _ref("loudness.variation", 5.80, 2.72),
    _ref("crest_factor.mean", 4.35, 1.15, robust=True, known_cause=_ROBUST_CAUSE),

    # Clinical features
    _ref("ppe", 3.96, 3.37, robust=True, known_cause=_ROBUST_CAUSE),
    _ref("jitters.local", 0.0128, 0.00374),
    _ref("jitters.local_absolute", 9.31e-5, 2.97e-5),
    _ref("jitters.rap", 3.14e-3, 0.928e-3),
    _ref("jitters.ppq5", 5.53e-3, 1.62e-3),
    _ref("jitters.ddp", 9.43e-3, 2.78e-3),
    _ref("shimmers.local", 0.0966, 0.0231),
    _ref("shimmers.local_db", 0.737, 0.113),
    _ref("shimmers.apq3", 0.0363, 0.00906),
    _ref("shimmers.apq5", 0.0615, 0.0161),
    _ref("shimmers.apq11", 0.135, 0.0497),
    _ref("dfa", 0.940, 0.152),
    _ref("formants.f1", 1.16e3, 0.455e3),
    _ref("formants.f2", 1.93e3, 0.468e3),
    _ref("formants.f3", 2.73e3, 0.452e3),
    _ref("formants.f4", 3.52e3, 0.453e3),
    _ref("amplitude_entropy", 8.28e3, 6.93e3),
    _ref("hnr", 9.11, 2.29),
]


class ColumnCheck(BaseModel):
    column: str
    observed: Optional[float] = Field(None, description="Corpus mean or median; None if no present cell")
    center: float
    spread: float
    rows: int = Field(..., description="Rows with a present value")
    within: bool


class ReferenceVerification(BaseModel):
    """Result of a corpus-level reference check."""

    passed: bool
    checked: List[ColumnCheck] = Field(default_factory=list)
    issues: List[str] = Field(default_factory=list)
    suggestions: List[str] = Field(default_factory=list)
    analysis: str = ""


class ReferenceVerifier:
    """
    Checks a feature matrix against a reference table.

    Only columns present in the matrix are checked, so any configuration
    can be verified; a matrix sharing no column with the table fails.
    """

    def __init__(self, reference: Optional[List[ReferenceValue]] = None):
        self.reference = list(reference) if reference is not None else list(LIBRISPEECH_REFERENCE)
        self._by_column: Dict[str, ReferenceValue] = {r.column: r for r in self.reference}

    def check_column(self, values: np.ndarray, ref: ReferenceValue) -> ColumnCheck:
        present = values[np.isfinite(values)]
        if present.size == 0:
            return ColumnCheck(column=ref.column, observed=None, center=ref.center,
                               spread=ref.spread, rows=0, within=False)

        observed = float(np.median(present) if ref.robust else np.mean(present))
        return ColumnCheck(
            column=ref.column,
            observed=observed,
            center=ref.center,
            spread=ref.spread,
            rows=int(present.size),
            within=abs(observed - ref.center) <= ref.spread,
        )

    def verify_matrix(self, matrix: FeatureMatrix) -> ReferenceVerification:
        """
        Verify every reference column the matrix carries.

        Args:
            matrix: Feature matrix from a corpus run (not imputed)

        Returns:
            ReferenceVerification; passed only if every checked column is within one spread
        """
        checked: List[ColumnCheck] = []
        issues: List[str] = []
        suggestions: List[str] = []

        for column in matrix.column_names:
            ref = self._by_column.get(column)
            if ref is None:
                continue
            check = self.check_column(matrix.column(column), ref)
            checked.append(check)
            if check.within:
                continue

            if check.observed is None:
                issues.append(f"{column}: no present values")
            else:
                issues.append(
                    f"{column}: {check.observed:.4g} outside {ref.center:.4g} +/- {ref.spread:.4g}"
                )
            if ref.known_cause:
                suggestions.append(f"{column}: {ref.known_cause}")

        if not checked:
            issues.append("No column of the matrix has a reference value")
            suggestions.append("Extract with the default configuration or list reference components")

        rows = matrix.shape[0]
        if rows < MIN_CORPUS_ROWS:
            suggestions.append(f"Only {rows} rows; reference comparisons need at least {MIN_CORPUS_ROWS} files")

        logger.info(f"Reference check: {len(checked)} columns, {len(issues)} issues")
        return ReferenceVerification(
            passed=not issues,
            checked=checked,
            issues=issues,
            suggestions=suggestions,
            analysis=self._build_analysis(checked),
        )

    def _build_analysis(self, checked: List[ColumnCheck]) -> str:
        lines = [
            "| Column | Observed | Reference | Rows | OK |",
            "|---|---|---|---|---|",
        ]
        for check in checked:
            observed = "-" if check.observed is None else f"{check.observed:.4g}"
            mark = "yes" if check.within else "no"
            lines.append(
                f"| {check.column} | {observed} | {check.center:.4g} +/- {check.spread:.4g} "
                f"| {check.rows} | {mark} |"
            )
        return "\n".join(lines)

    def format_verification_report(
        self,
        verification: ReferenceVerification,
        include_analysis: bool = True
    ) -> str:
        """Format verification result as markdown report"""
        lines = []

        if verification.passed:
            lines.append("### Reference Check Passed")
        else:
            lines.append("### Reference Check Issues Detected")

        within = sum(1 for c in verification.checked if c.within)
        lines.append(f"**Within reference:** {within}/{len(verification.checked)}")
        lines.append("")

        if verification.issues:
            lines.append("**Issues Found:**")
            for issue in verification.issues:
                lines.append(f"  - {issue}")
            lines.append("")

        if verification.suggestions:
            lines.append("**Notes:**")
            for suggestion in verification.suggestions:
                lines.append(f"  - {suggestion}")
            lines.append("")

        if include_analysis and verification.checked:
            lines.append("**Detailed Analysis:**")
            lines.append(verification.analysis)

        return "\n".join(lines)


# Singleton instance
_verifier: Optional[ReferenceVerifier] = None


def get_reference_verifier() -> ReferenceVerifier:
    """Get the global ReferenceVerifier instance"""
    global _verifier
    if _verifier is None:
        _verifier = ReferenceVerifier()
    return _verifier
