"""Claim labels and filing dates."""

from __future__ import annotations

import csv
import datetime as dt
import enum
from typing import Mapping

import numpy as np

from fraudnet.errors import DataError, UnknownClaimId


class ClaimLabel(enum.IntEnum):
    UNKNOWN = 0
    NON_FRAUD = 1
    FRAUD = 2

    @classmethod
    def parse(cls, value) -> "ClaimLabel":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower().replace("_", "-")
        if v in ("fraud", "yes"):
            return cls.FRAUD
        if v in ("non-fraud", "nonfraud", "no"):
            return cls.NON_FRAUD
        if v in ("unknown", ""):
            return cls.UNKNOWN
        raise DataError(f"invalid claim label {value!r}")

    @property
    def csv_value(self) -> str:
        return {ClaimLabel.FRAUD: "yes", ClaimLabel.NON_FRAUD: "no"}.get(self, "unknown")


def label_array(g, labels: Mapping[str, ClaimLabel]) -> np.ndarray:
    """Per-claim label codes aligned with ``g``'s claim indices.

    Claims absent from ``labels`` are UNKNOWN.  A label for a claim that is not
    in the graph raises :class:`UnknownClaimId`.
    """
    out = np.zeros(g.n_claims, dtype=np.int8)
    for claim_id, label in labels.items():
        if not g.has_claim(claim_id):
            raise UnknownClaimId(f"label for unknown claim {claim_id!r}")
        out[g.claim_index(claim_id)] = int(ClaimLabel.parse(label))
    return out


def read_labels_csv(path) -> tuple[dict[str, ClaimLabel], dict[str, dt.date]]:
    """Read ``claim_id,filing_date,fraud``; returns (labels, filing dates)."""
    labels: dict[str, ClaimLabel] = {}
    dates: dict[str, dt.date] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"claim_id", "filing_date", "fraud"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            cid = row["claim_id"]
            if cid in labels:
                raise DataError(f"{path}: duplicate claim {cid!r}")
            labels[cid] = ClaimLabel.parse(row["fraud"])
            try:
                dates[cid] = dt.date.fromisoformat(row["filing_date"])
            except ValueError:
                raise DataError(f"{path}: bad filing_date {row['filing_date']!r} for {cid!r}") from None
    return labels, dates


def write_labels_csv(path, labels: Mapping[str, ClaimLabel], dates: Mapping[str, dt.date]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["claim_id", "filing_date", "fraud"])
        for cid, label in labels.items():
            out.writerow([cid, dates[cid].isoformat(), ClaimLabel.parse(label).csv_value])
