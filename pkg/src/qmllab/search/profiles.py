"""Named evaluation budgets for search runs."""

from __future__ import annotations

from dataclasses import dataclass

from ..data import Dataset, DatasetSplit
from ..errors import ConfigurationError
from ..training import TrainConfig


@dataclass(frozen=True)
class BudgetProfile:
    """Training budget per candidate, plus optional caps on split sizes."""

    train_config: TrainConfig
    max_train: int | None = None
    max_test: int | None = None

    def apply(self, split: DatasetSplit) -> DatasetSplit:
        def cap(ds: Dataset, n):
            return ds if n is None or len(ds) <= n else ds.subset(range(n))

        return DatasetSplit(
            cap(split.train, self.max_train),
            cap(split.test, self.max_test),
            split.seed,
            split.ratio,
            split.train_indices[: self.max_train],
            split.test_indices[: self.max_test],
        )


PROFILES = {
    "default": BudgetProfile(TrainConfig()),
    # desk-check budget: one epoch on a fixed prefix of each part of the split
    "ci": BudgetProfile(TrainConfig(epochs=1), max_train=320, max_test=160),
}


def get_profile(name: str) -> BudgetProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigurationError(f"unknown budget profile {name!r}; choose from {sorted(PROFILES)}") from None
