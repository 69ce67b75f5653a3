"""
Per-band cross-entropy comparison of two models scored on the same split
"""
import numpy as np

from data.frequency import FrequencyBands
from errors import ConfigurationError, DataError
from models.reports import BandReport, BandRow, PerTokenLoss


def _check_aligned(baseline: PerTokenLoss, ours: PerTokenLoss):
    if len(baseline) != len(ours):
        raise DataError(
            f"per-token losses are not aligned: {len(baseline)} baseline vs {len(ours)} comparison records"
        )
    if not np.array_equal(baseline.target_ids, ours.target_ids):
        first = int(np.flatnonzero(baseline.target_ids != ours.target_ids)[0])
        raise DataError(f"per-token losses disagree on the target id at record {first}")
    if not np.array_equal(baseline.positions, ours.positions):
        raise DataError("per-token losses were scored at different positions")


def _band_mean(nll: np.ndarray, ids: np.ndarray, weighting: str) -> float:
    if weighting == "token":
        return float(nll.mean())
    types, inverse = np.unique(ids, return_inverse=True)
    per_type = np.bincount(inverse, weights=nll) / np.bincount(inverse)
    return float(per_type.mean())


def band_compare(baseline: PerTokenLoss, ours: PerTokenLoss, bands: FrequencyBands,
                 weighting: str = "token") -> BandReport:
    """
    Mean CE per band of the target's training count, and
    100 * (baseline - ours) / baseline. Positive means `ours` is better.
    Targets that never occurred in training belong to no band.
    """
    if weighting not in ("token", "type"):
        raise ConfigurationError(f"weighting must be 'token' or 'type', got '{weighting}'")
    _check_aligned(baseline, ours)
    ids = baseline.target_ids
    if len(ids) and ids.max() >= len(bands.assignment):
        raise DataError(f"target id {int(ids.max())} is outside the banded vocabulary")
    band_of_target = bands.assignment[ids]

    rows = []
    for index, ((lower, upper), label) in enumerate(zip(bands.intervals, bands.labels)):
        mask = band_of_target == index
        tokens = int(mask.sum())
        if tokens == 0:
            rows.append(BandRow(label, lower, upper, 0, 0, None, None, None))
            continue
        in_band = ids[mask]
        base_ce = _band_mean(baseline.nll[mask], in_band, weighting)
        our_ce = _band_mean(ours.nll[mask], in_band, weighting)
        if base_ce == our_ce:
            relative = 0.0
        elif base_ce == 0.0:
            relative = None
        else:
            relative = 100.0 * (base_ce - our_ce) / base_ce
        rows.append(BandRow(label, lower, upper, len(np.unique(in_band)), tokens,
                            base_ce, our_ce, relative))
    return BandReport(rows, weighting)
