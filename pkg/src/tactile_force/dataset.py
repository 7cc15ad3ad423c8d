"""Sample records, trial-level dataset splits, and file formats.

Samples are stored as JSON-lines, one record per line; a split manifest maps
each of train/val/test to a list of whole trial ids. Splitting never divides
a trial across splits, and only in-contact samples with nonzero force are
retained ("force samples").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataIntegrityError, SchemaError
from .net.training import ArraySamples
from .sensor import ElectrodeLayout
from .voxel import GridSpec, encode

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SampleRecord:
    """One force sample: tared electrode values plus contact and ground truth.

    s_c / s_n are the sensor-frame contact point and outward normal, f_3d the
    sensor-frame ground-truth force, r_wb the rotation taking sensor-frame
    vectors to the world frame. motion optionally carries the planar source
    state the sample was derived from.
    """

    trial_id: str
    source_tag: str
    e: np.ndarray
    s_c: np.ndarray
    s_n: np.ndarray
    f_3d: np.ndarray
    r_wb: np.ndarray
    in_contact: bool = True
    motion: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float))
        object.__setattr__(self, "s_c", np.asarray(self.s_c, dtype=float))
        object.__setattr__(self, "s_n", np.asarray(self.s_n, dtype=float))
        object.__setattr__(self, "f_3d", np.asarray(self.f_3d, dtype=float))
        object.__setattr__(self, "r_wb", np.asarray(self.r_wb, dtype=float))

    def to_dict(self) -> dict:
        d = {
            "trial_id": self.trial_id,
            "source_tag": self.source_tag,
            "e": self.e.tolist(),
            "s_c": self.s_c.tolist(),
            "s_n": self.s_n.tolist(),
            "f_3d": self.f_3d.tolist(),
            "R_wb": self.r_wb.ravel().tolist(),
            "in_contact": self.in_contact,
        }
        if self.motion is not None:
            d["motion"] = self.motion
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        try:
            return cls(
                trial_id=str(d["trial_id"]),
                source_tag=str(d["source_tag"]),
                e=np.array(d["e"], dtype=float),
                s_c=np.array(d["s_c"], dtype=float),
                s_n=np.array(d["s_n"], dtype=float),
                f_3d=np.array(d["f_3d"], dtype=float),
                r_wb=np.array(d["R_wb"], dtype=float).reshape(3, 3),
                in_contact=bool(d.get("in_contact", True)),
                motion=d.get("motion"),
            )
        except KeyError as exc:
            raise SchemaError(f"sample record missing field {exc.args[0]!r}") from exc


def write_samples_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_samples_jsonl(path) -> list[SampleRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(SampleRecord.from_dict(json.loads(line)))
    return records


@dataclass
class DatasetSplits:
    train: list[SampleRecord]
    val: list[SampleRecord]
    test: list[SampleRecord]
    trial_assignment: dict[str, list[str]] = field(default_factory=dict)
    n_filtered_out: int = 0

    def split(self, name: str) -> list[SampleRecord]:
        return getattr(self, name)


def make_dataset(
    records: list[SampleRecord],
    train_frac: float = 0.8,
    val_frac: float = 0.1,
    seed: int = 0,
) -> DatasetSplits:
    """Filter to force samples and split whole trials into train/val/test.

    The split is stratified by source: each source's trials are shuffled and
    apportioned independently, so every split contains every source (needed
    for per-source training runs). Validation and test each receive at least
    one trial per source; the remainder after the requested fractions goes
    to test. Deterministic for a fixed seed.
    """
    force_samples = [
        r for r in records if r.in_contact and float(np.linalg.norm(r.f_3d)) > 0.0
    ]
    n_filtered = len(records) - len(force_samples)
    trial_source: dict[str, str] = {}
    for r in force_samples:
        previous = trial_source.setdefault(r.trial_id, r.source_tag)
        if previous != r.source_tag:
            raise DataIntegrityError(
                f"trial {r.trial_id!r} mixes sources {previous} and {r.source_tag}"
            )
    by_source: dict[str, list[str]] = {}
    for tid in sorted(trial_source):
        by_source.setdefault(trial_source[tid], []).append(tid)

    rng = np.random.default_rng(seed)
    assignment = {name: [] for name in SPLIT_NAMES}
    for source in sorted(by_source):
        ids = by_source[source]
        n = len(ids)
        if n < 3:
            raise DataIntegrityError(
                f"source {source!r} has {n} trials; need at least 3 to populate every split"
            )
        order = [ids[i] for i in rng.permutation(n)]
        n_val = max(1, int(n * val_frac))
        n_test = max(1, n - int(n * train_frac) - n_val)
        n_train = n - n_val - n_test
        if n_train < 1:
            raise DataIntegrityError(
                f"source {source!r}: {n} trials cannot populate train/val/test"
            )
        assignment["train"].extend(order[:n_train])
        assignment["val"].extend(order[n_train : n_train + n_val])
        assignment["test"].extend(order[n_train + n_val :])
    assignment = {name: sorted(ids) for name, ids in assignment.items()}
    by_split = {name: set(ids) for name, ids in assignment.items()}
    return DatasetSplits(
        train=[r for r in force_samples if r.trial_id in by_split["train"]],
        val=[r for r in force_samples if r.trial_id in by_split["val"]],
        test=[r for r in force_samples if r.trial_id in by_split["test"]],
        trial_assignment=assignment,
        n_filtered_out=n_filtered,
    )


def write_manifest(splits: DatasetSplits, samples_file: str, path, seed: int) -> None:
    manifest = {
        "samples_file": samples_file,
        "seed": seed,
        "splits": splits.trial_assignment,
        "counts": {name: len(splits.split(name)) for name in SPLIT_NAMES},
        "n_filtered_out": splits.n_filtered_out,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_manifest_splits(manifest_path) -> tuple[dict[str, list[SampleRecord]], dict]:
    """Load the samples file referenced by a manifest and group by split.

    Raises DataIntegrityError if a trial id appears in more than one split.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    try:
        split_ids = {name: list(manifest["splits"][name]) for name in SPLIT_NAMES}
        samples_file = manifest["samples_file"]
    except KeyError as exc:
        raise SchemaError(f"manifest missing field {exc.args[0]!r}") from exc
    seen: dict[str, str] = {}
    for name, ids in split_ids.items():
        for tid in ids:
            if tid in seen:
                raise DataIntegrityError(
                    f"trial {tid!r} assigned to both {seen[tid]} and {name}"
                )
            seen[tid] = name
    records = read_samples_jsonl(manifest_path.parent / samples_file)
    splits = {name: [] for name in SPLIT_NAMES}
    for r in records:
        name = seen.get(r.trial_id)
        if name is not None:
            splits[name].append(r)
    return splits, manifest


def filter_by_sources(records: list[SampleRecord], sources: set[str]) -> list[SampleRecord]:
    return [r for r in records if r.source_tag in sources]


def featurize_voxel(
    records: list[SampleRecord], layout: ElectrodeLayout, spec: GridSpec
) -> ArraySamples:
    """Encode records into voxel-grid model inputs plus loss context arrays."""
    inputs = np.stack([encode(r.e, r.s_c, layout, spec) for r in records])
    return _with_context(records, inputs)


def featurize_flat(records: list[SampleRecord]) -> ArraySamples:
    """Concatenate (e, s_c) into flat 22-dim model inputs."""
    inputs = np.stack([np.concatenate([r.e, r.s_c]) for r in records])
    return _with_context(records, inputs)


def _with_context(records: list[SampleRecord], inputs: np.ndarray) -> ArraySamples:
    return ArraySamples(
        inputs=inputs,
        f_3d=np.stack([r.f_3d for r in records]),
        s_n=np.stack([r.s_n for r in records]),
        r_wb=np.stack([r.r_wb for r in records]),
        source_tags=np.array([r.source_tag for r in records]),
    )
