"""Seeded, reproducible datasets with per-size 5:1 splits and size mixtures."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .tasks import (LIFE_P_ALIVE, TASKS, TRANSPOSE_ENTRY_RANGE, LUPair,
                    life_step, lu_generate, transpose)

SPLITS = ("train", "test")

# default size ranges; generate_instance accepts anything above MIN_SIZE
SIZE_RANGES = {"transpose": (12, 20), "life": (4, 8), "lu": (3, 6)}
MIN_SIZE = {"transpose": 1, "life": 1, "lu": 2}

MAX_RESAMPLE_ATTEMPTS = 1000


class UnsupportedTaskError(ValueError):
    pass


@dataclass
class TaskInstance:
    id: str
    task: str
    size: int
    input: np.ndarray
    target: np.ndarray | LUPair
    seed: int
    split: str = "test"

    def __eq__(self, other):
        if not isinstance(other, TaskInstance):
            return NotImplemented
        if (self.id, self.task, self.size, self.seed, self.split) != (
                other.id, other.task, other.size, other.seed, other.split):
            return False
        if not np.array_equal(self.input, other.input):
            return False
        if isinstance(self.target, LUPair):
            return self.target == other.target
        return isinstance(other.target, np.ndarray) and np.array_equal(self.target, other.target)

    def to_json(self) -> dict:
        if isinstance(self.target, LUPair):
            target = {"l": self.target.l.tolist(), "u": self.target.u.tolist()}
        else:
            target = self.target.tolist()
        return {"id": self.id, "task": self.task, "size": self.size, "seed": self.seed,
                "split": self.split, "input": self.input.tolist(), "target": target}

    @classmethod
    def from_json(cls, d: Mapping) -> "TaskInstance":
        t = d["target"]
        if isinstance(t, Mapping):
            target = LUPair(np.array(t["l"], dtype=np.int64), np.array(t["u"], dtype=np.int64))
        else:
            target = np.array(t, dtype=np.int64)
        return cls(id=d["id"], task=d["task"], size=int(d["size"]),
                   input=np.array(d["input"], dtype=np.int64), target=target,
                   seed=int(d["seed"]), split=d["split"])


@dataclass
class DatasetSpec:
    """What to generate.

    ``sizes`` maps dimension to instance count (train + test). With
    ``mix_ratio`` the total over all sizes is redistributed by weight and the
    sizes are interleaved into one mixed dataset.
    """

    task: str
    sizes: Mapping[int, int]
    mix_ratio: Sequence[float] | None = None
    split_ratio: tuple[int, int] = (5, 1)
    master_seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise UnsupportedTaskError(self.task)
        self.sizes = {int(k): int(v) for k, v in dict(self.sizes).items()}
        if not self.sizes:
            raise ValueError("at least one size is required")
        if any(c <= 0 for c in self.sizes.values()):
            raise ValueError("instance counts must be positive")
        self.split_ratio = tuple(self.split_ratio)
        if len(self.split_ratio) != 2 or min(self.split_ratio) <= 0:
            raise ValueError(f"invalid split ratio {self.split_ratio!r}")
        if self.mix_ratio is not None and len(self.mix_ratio) > 0:
            if len(self.mix_ratio) != len(self.sizes):
                raise ValueError("mix_ratio needs one weight per size")
            if min(self.mix_ratio) <= 0:
                raise ValueError("mix weights must be positive")
        else:
            self.mix_ratio = None

    @property
    def mixed(self) -> bool:
        return self.mix_ratio is not None

    def to_json(self) -> dict:
        return {"task": self.task, "sizes": {str(k): v for k, v in self.sizes.items()},
                "mix_ratio": None if self.mix_ratio is None else list(self.mix_ratio),
                "split_ratio": list(self.split_ratio), "master_seed": self.master_seed}


@dataclass
class Dataset:
    spec: DatasetSpec | None
    instances: list[TaskInstance] = field(default_factory=list)

    def __iter__(self) -> Iterator[TaskInstance]:
        return iter(self.instances)

    def __len__(self):
        return len(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    def split(self, name: str) -> list[TaskInstance]:
        return [x for x in self.instances if x.split == name]

    @property
    def train(self):
        return self.split("train")

    @property
    def test(self):
        return self.split("test")


def derive_seed(master_seed: int, task: str, size: int, split: str, index: int,
                attempt: int = 0) -> int:
    """64-bit per-instance seed; distinct splits get disjoint streams."""
    key = f"{master_seed}:{task}:{size}:{split}:{index}"
    if attempt:
        key += f":retry{attempt}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def instance_id(task: str, size: int, seed: int, index: int) -> str:
    return f"{task}-{size}-{index:06d}-{seed:016x}"


def generate_instance(task: str, size: int, seed: int, index: int = 0,
                      split: str = "test") -> TaskInstance:
    if task not in TASKS:
        raise UnsupportedTaskError(f"unsupported task {task!r}; expected one of {TASKS}")
    if size < MIN_SIZE[task]:
        raise ValueError(f"{task} needs size >= {MIN_SIZE[task]}, got {size}")
    rng = np.random.default_rng(seed)
    if task == "transpose":
        lo, hi = TRANSPOSE_ENTRY_RANGE
        x = rng.integers(lo, hi, size=(size, size), endpoint=True).astype(np.int64)
        target = transpose(x)
    elif task == "life":
        x = (rng.random((size, size)) < LIFE_P_ALIVE).astype(np.int64)
        target = life_step(x)
    else:
        x, target = lu_generate(size, rng)
    return TaskInstance(id=instance_id(task, size, seed, index), task=task, size=size,
                        input=x, target=target, seed=seed, split=split)


def split_counts(total: int, ratio: tuple[int, int] = (5, 1)) -> tuple[int, int]:
    """(train, test) with the test side rounded down."""
    n_test = total * ratio[1] // (ratio[0] + ratio[1])
    return total - n_test, n_test


def _allocate(total: int, weights: Sequence[float]) -> list[int]:
    # largest remainder; ties go to the earlier size
    w = np.asarray(weights, dtype=np.float64)
    exact = total * w / w.sum()
    base = np.floor(exact).astype(int)
    rest = total - int(base.sum())
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base.tolist()


def _interleave(groups: list[list[TaskInstance]]) -> list[TaskInstance]:
    # the j-th of n items of a group sits at (j + 0.5) / n
    keyed = [((j + 0.5) / len(g), gi, x) for gi, g in enumerate(groups) for j, x in enumerate(g)]
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [x for _, _, x in keyed]


def _input_key(x: TaskInstance) -> bytes:
    return x.input.tobytes()


def build_dataset(spec: DatasetSpec) -> Dataset:
    sizes = list(spec.sizes)
    if spec.mixed:
        counts = _allocate(sum(spec.sizes.values()), spec.mix_ratio)
        if min(counts) == 0:
            raise ValueError("mixture leaves a size with zero instances")
    else:
        counts = [spec.sizes[s] for s in sizes]

    per_split: dict[str, list[list[TaskInstance]]] = {"train": [], "test": []}
    for size, total in zip(sizes, counts):
        n_train, n_test = split_counts(total, spec.split_ratio)
        train = [generate_instance(spec.task, size,
                                   derive_seed(spec.master_seed, spec.task, size, "train", i),
                                   i, "train")
                 for i in range(n_train)]
        seen = {_input_key(x) for x in train} if spec.task == "life" else set()
        test = []
        for i in range(n_test):
            for attempt in range(MAX_RESAMPLE_ATTEMPTS):
                seed = derive_seed(spec.master_seed, spec.task, size, "test", i, attempt)
                inst = generate_instance(spec.task, size, seed, i, "test")
                if _input_key(inst) not in seen:
                    break
            else:
                raise ValueError(f"cannot draw a held-out {spec.task} input at size {size}")
            test.append(inst)
        per_split["train"].append(train)
        per_split["test"].append(test)

    instances: list[TaskInstance] = []
    for name in SPLITS:
        groups = per_split[name]
        instances += _interleave(groups) if spec.mixed else [x for g in groups for x in g]
    return Dataset(spec, instances)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def export_dataset(ds: Dataset, path: str | Path) -> dict:
    """Write ``ds`` as JSON lines plus a ``<name>.manifest.json`` next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = "".join(_dumps(x.to_json()) + "\n" for x in ds).encode()
    path.write_bytes(payload)

    counts: dict[str, dict[str, int]] = {name: {} for name in SPLITS}
    for x in ds:
        counts[x.split][str(x.size)] = counts[x.split].get(str(x.size), 0) + 1
    manifest = {
        "file": path.name,
        "spec": ds.spec.to_json() if ds.spec is not None else None,
        "master_seed": ds.spec.master_seed if ds.spec is not None else None,
        "total": len(ds),
        "counts": {name: sum(c.values()) for name, c in counts.items()},
        "counts_by_size": counts,
        "seeds": [x.seed for x in ds],
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    instances = [TaskInstance.from_json(json.loads(line))
                 for line in path.read_text().splitlines() if line.strip()]
    spec = None
    mp = manifest_path(path)
    if mp.exists():
        s = json.loads(mp.read_text()).get("spec")
        if s:
            spec = DatasetSpec(task=s["task"], sizes={int(k): v for k, v in s["sizes"].items()},
                               mix_ratio=s["mix_ratio"], split_ratio=tuple(s["split_ratio"]),
                               master_seed=s["master_seed"])
    return Dataset(spec, instances)
