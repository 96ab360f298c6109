"""Tabular outputs: experiment results, bootstrap replicates, probability tables."""

import json
from pathlib import Path
from typing import Sequence, Union

import pandas as pd

from ..causal.models import AteEstimate
from ..trees.inference import DistributionTable

PathLike = Union[str, Path]


def write_results(records: pd.DataFrame, path: PathLike) -> None:
    """Long-format experiment records; floats at full precision so reruns compare byte-for-byte."""
    records.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def write_replicates(values: Sequence[float], path: PathLike) -> None:
    pd.DataFrame({"ate": list(values)}).to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def write_distribution(table: DistributionTable, path: PathLike) -> None:
    table.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def write_estimate(estimate: AteEstimate, path: PathLike, include_replicates: bool = False) -> None:
    with open(path, "w") as f:
        json.dump(estimate.report(include_replicates=include_replicates), f, indent=2)
        f.write("\n")
