"""Per-UE SINR/rate reports with term decomposition and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MisuseError

__all__ = ["SinrReport", "rate_from_sinr", "reports_to_csv", "reports_to_json", "SCHEMES"]

SCHEMES = {"MRT": "DL", "MRC": "UL", "SMMSE": "UL", "RZF": "DL"}
PROVENANCE = ("deteq", "closedform", "montecarlo", "limit")

CSV_COLUMNS = ["cell", "ue", "scheme", "direction", "provenance", "sinr_db", "rate",
               "signal", "noise", "noncoh", "coh", "stderr"]


def rate_from_sinr(sinr):
    """Spectral efficiency ``log2(1 + sinr)`` in bit/s/Hz."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise MisuseError("SINR must be nonnegative")
    out = np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def _nan_like(a):
    return np.full(np.shape(a), np.nan)


@dataclass(frozen=True)
class SinrReport:
    """SINR of every UE for one scheme.

    Arrays are (L, K).  For analytic provenances ``sinr`` equals
    ``signal / (noise + noncoh + coh)``; Monte-Carlo reports may leave the
    terms as NaN and carry a standard error of the rate instead.
    """

    scheme: str
    provenance: str
    sinr: np.ndarray
    signal: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    noncoh: Optional[np.ndarray] = None
    coh: Optional[np.ndarray] = None
    rate: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise MisuseError(f"unknown scheme {self.scheme!r}")
        if self.provenance not in PROVENANCE:
            raise MisuseError(f"unknown provenance {self.provenance!r}")
        sinr = np.asarray(self.sinr, dtype=float)
        object.__setattr__(self, "sinr", sinr)
        for name in ("signal", "noise", "noncoh", "coh", "stderr"):
            v = getattr(self, name)
            object.__setattr__(self, name, _nan_like(sinr) if v is None
                               else np.broadcast_to(np.asarray(v, dtype=float), sinr.shape).copy())
        if self.rate is None:
            object.__setattr__(self, "rate", rate_from_sinr(np.maximum(sinr, 0.0)))

    @classmethod
    def from_terms(cls, scheme, provenance, signal, noise, noncoh, coh, **kw):
        signal, noise, noncoh, coh = (np.asarray(x, dtype=float) for x in (signal, noise, noncoh, coh))
        sinr = signal / (noise + noncoh + coh)
        return cls(scheme=scheme, provenance=provenance, sinr=sinr, signal=signal,
                   noise=noise, noncoh=noncoh, coh=coh, **kw)

    @property
    def direction(self) -> str:
        return SCHEMES[self.scheme]

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rate))

    @property
    def sinr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.sinr)

    def rows(self):
        L, K = self.sinr.shape
        sdb = self.sinr_db
        for j in range(L):
            for k in range(K):
                yield {
                    "cell": j, "ue": k, "scheme": self.scheme, "direction": self.direction,
                    "provenance": self.provenance, "sinr_db": float(sdb[j, k]),
                    "rate": float(self.rate[j, k]), "signal": float(self.signal[j, k]),
                    "noise": float(self.noise[j, k]), "noncoh": float(self.noncoh[j, k]),
                    "coh": float(self.coh[j, k]), "stderr": float(self.stderr[j, k]),
                }

    def to_csv(self, path=None) -> str:
        return reports_to_csv([self], path)

    def to_json(self, path=None) -> str:
        return reports_to_json([self], path)


def reports_to_csv(reports, path=None, extra: Optional[dict] = None) -> str:
    """Write reports as one CSV table; ``extra`` adds constant leading columns."""
    extra = extra or {}
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(extra) + CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        for row in rep.rows():
            w.writerow({**extra, **{k: _fmt(v) for k, v in row.items()}})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def reports_to_json(reports, path=None) -> str:
    data = [{"scheme": r.scheme, "direction": r.direction, "provenance": r.provenance,
             "meta": r.meta, "ues": list(r.rows())} for r in reports]
    text = json.dumps(data, indent=1, allow_nan=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
