"""Dataset containers for repeated binary ratings of individual calls.

A call is one rated item (e.g. a support-call transcript). Each call carries
the number of rating rounds, the count of positive ratings, optional
covariates, a treatment flag, and an optional per-call difficulty score
(already averaged over rounds).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field


class DatasetError(ValueError):
    """Raised when records violate dataset invariants."""


@dataclass(frozen=True)
class CallRecord:
    """Aggregated ratings for one call.

    ``rounds`` optionally keeps the ordered per-round 0/1 ratings; it is
    required for prefix truncation and long-format export but not for model
    fitting, which only consumes ``k_positive`` and ``n_ratings``.
    """

    call_id: str
    n_ratings: int
    k_positive: int
    covariates: tuple[float, ...] = ()
    treatment: int = 0
    difficulty: float | None = None
    rounds: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_ratings < 1:
            raise DatasetError(f"call {self.call_id!r}: n_ratings must be >= 1")
        if not 0 <= self.k_positive <= self.n_ratings:
            raise DatasetError(
                f"call {self.call_id!r}: k_positive={self.k_positive} outside "
                f"[0, {self.n_ratings}]"
            )
        if self.treatment not in (0, 1):
            raise DatasetError(f"call {self.call_id!r}: treatment must be 0 or 1")
        if self.rounds is not None:
            if len(self.rounds) != self.n_ratings:
                raise DatasetError(
                    f"call {self.call_id!r}: {len(self.rounds)} rounds but "
                    f"n_ratings={self.n_ratings}"
                )
            if any(r not in (0, 1) for r in self.rounds):
                raise DatasetError(f"call {self.call_id!r}: ratings must be 0 or 1")
            if sum(self.rounds) != self.k_positive:
                raise DatasetError(
                    f"call {self.call_id!r}: rounds sum to {sum(self.rounds)}, "
                    f"not k_positive={self.k_positive}"
                )


@dataclass(frozen=True)
class RatingDataset:
    """Ordered collection of :class:`CallRecord` with shared covariate names."""

    records: tuple[CallRecord, ...]
    covariate_names: tuple[str, ...] = ()
    has_difficulty: bool = False

    def __post_init__(self) -> None:
        if not self.records:
            raise DatasetError("dataset is empty")
        ids = [r.call_id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"duplicate call ids: {dupes[:5]}")
        p = len(self.covariate_names)
        for r in self.records:
            if len(r.covariates) != p:
                raise DatasetError(
                    f"call {r.call_id!r}: {len(r.covariates)} covariates, expected {p}"
                )
            if self.has_difficulty and r.difficulty is None:
                raise DatasetError(f"call {r.call_id!r}: difficulty missing")
            if not self.has_difficulty and r.difficulty is not None:
                raise DatasetError(
                    f"call {r.call_id!r}: difficulty present but dataset has none"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    @property
    def has_rounds(self) -> bool:
        return all(r.rounds is not None for r in self.records)

    def digest(self) -> str:
        """Stable content hash of the dataset (order-sensitive)."""
        h = hashlib.sha256()
        h.update(",".join(self.covariate_names).encode())
        h.update(b"|%d" % int(self.has_difficulty))
        for r in self.records:
            cov = ",".join(repr(c) for c in r.covariates)
            diff = "" if r.difficulty is None else repr(r.difficulty)
            rounds = "" if r.rounds is None else "".join(str(x) for x in r.rounds)
            h.update(
                f"{r.call_id};{r.n_ratings};{r.k_positive};{cov};"
                f"{r.treatment};{diff};{rounds}\n".encode()
            )
        return h.hexdigest()


def truncate_ratings(dataset: RatingDataset, n_keep: int) -> RatingDataset:
    """Keep only the first ``n_keep`` rating rounds of every call.

    Requires per-round ratings on every record; ``k_positive`` is recomputed
    from the retained prefix.
    """
    if n_keep < 1:
        raise ValueError("n_keep must be >= 1")
    if not dataset.has_rounds:
        raise ValueError("per-round ratings not available; cannot truncate")
    min_rounds = min(r.n_ratings for r in dataset.records)
    if n_keep > min_rounds:
        raise ValueError(
            f"n_keep={n_keep} exceeds available rounds (min {min_rounds})"
        )
    records = []
    for r in dataset.records:
        kept = r.rounds[:n_keep]
        records.append(
            CallRecord(
                call_id=r.call_id,
                n_ratings=n_keep,
                k_positive=sum(kept),
                covariates=r.covariates,
                treatment=r.treatment,
                difficulty=r.difficulty,
                rounds=kept,
            )
        )
    return RatingDataset(
        records=tuple(records),
        covariate_names=dataset.covariate_names,
        has_difficulty=dataset.has_difficulty,
    )
