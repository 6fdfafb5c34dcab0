import logging
import math
import re
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DEFAULT_BUCKETS = 50
TRACE_SUFFIX = ".trace.csv"
_TRACE_NAME = re.compile(r"^(?P<instance>.+?)__(?P<policy>.+)__seed(?P<seed>-?\d+)\.trace\.csv$")


class AggregationError(ValueError):
    """Raised when runs cannot be combined (no runs, or inconsistent lengths)."""
    pass


def default_bucket(horizon: int, buckets: int = DEFAULT_BUCKETS) -> int:
    """Bucket width giving `buckets` columns over the horizon."""
    return max(1, math.ceil(horizon / max(1, buckets)))


def encode_super_arm(super_arm: Sequence[int]) -> str:
    return "-".join(str(i) for i in super_arm)


def decode_super_arm(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in str(text).split("-") if part != "")


def exploration_heatmap(runs: Sequence[Sequence[Tuple[int, ...]]], num_arms: int, bucket: int) -> np.ndarray:
    """
    Pull counts per base arm and time bucket, summed over runs.

    Row i, column b counts how often arm i was played in rounds
    b*bucket + 1 .. (b+1)*bucket.
    """
    if not runs:
        raise AggregationError("No runs to build a heatmap from.")
    if bucket < 1:
        raise AggregationError(f"Bucket width must be positive, got {bucket}")
    horizon = max(len(actions) for actions in runs)
    counts = np.zeros((num_arms, math.ceil(horizon / bucket)), dtype=int)
    for actions in runs:
        for step, super_arm in enumerate(actions):
            for arm in super_arm:
                if arm >= num_arms:
                    raise AggregationError(f"Arm {arm} is outside the {num_arms} arms of the heatmap.")
                counts[arm, step // bucket] += 1
    return counts


def heatmap_frame(counts: np.ndarray, bucket: int) -> pd.DataFrame:
    columns = {f"t{b * bucket + 1}": counts[:, b] for b in range(counts.shape[1])}
    return pd.DataFrame({"arm": np.arange(counts.shape[0]), **columns})


def save_heatmap(counts: np.ndarray, bucket: int, path: Union[str, Path]) -> None:
    heatmap_frame(counts, bucket).to_csv(path, index=False)
    logger.info(f"Wrote heatmap {counts.shape[0]}x{counts.shape[1]} to {path}")


def final_bucket_share(counts: np.ndarray, arms: Sequence[int]) -> float:
    """Fraction of the pulls in the last bucket that went to `arms`."""
    last = counts[:, -1]
    total = last.sum()
    if total == 0:
        return 0.0
    return float(last[list(arms)].sum() / total)


def load_trace_actions(trace_dir: Union[str, Path]) -> Dict[str, List[List[Tuple[int, ...]]]]:
    """Actions of every trace file in a directory, grouped by policy label and ordered by seed."""
    grouped: Dict[str, List[Tuple[int, List[Tuple[int, ...]]]]] = defaultdict(list)
    for path in sorted(Path(trace_dir).glob(f"*{TRACE_SUFFIX}")):
        match = _TRACE_NAME.match(path.name)
        if match is None:
            logger.warning(f"Skipping trace file with an unexpected name: {path.name}")
            continue
        frame = pd.read_csv(path, dtype={"super_arm": str})
        actions = [decode_super_arm(s) for s in frame["super_arm"]]
        grouped[match.group("policy")].append((int(match.group("seed")), actions))

    if not grouped:
        raise AggregationError(f"No trace files found in {trace_dir}")
    return {policy: [actions for _, actions in sorted(runs)] for policy, runs in grouped.items()}


def build_heatmaps(
    trace_dir: Union[str, Path],
    buckets: int = DEFAULT_BUCKETS,
    num_arms: Optional[int] = None,
    out_dir: Optional[Union[str, Path]] = None,
) -> Dict[str, Path]:
    """Write one heatmap CSV per policy found in trace_dir; returns policy -> file."""
    runs_by_policy = load_trace_actions(trace_dir)
    out = Path(out_dir or trace_dir)
    out.mkdir(parents=True, exist_ok=True)

    written = {}
    for policy, runs in sorted(runs_by_policy.items()):
        arms = num_arms or 1 + max(max((max(s) for s in actions if s), default=0) for actions in runs)
        horizon = max(len(actions) for actions in runs)
        bucket = default_bucket(horizon, buckets)
        path = out / f"{policy}__heatmap.csv"
        save_heatmap(exploration_heatmap(runs, arms, bucket), bucket, path)
        written[policy] = path
    return written
