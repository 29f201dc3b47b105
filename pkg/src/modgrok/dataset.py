"""Modular-addition dataset: enumeration, stratified split, label corruption."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

# Fixed stream tags so that split, corruption and init seeds never collide.
SPLIT_STREAM = 0
CORRUPT_STREAM = 1
INIT_STREAM = 2


def derive_rng(master_seed, stream):
    """Independent generator for one named stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(stream)]))


class Triple(NamedTuple):
    a: int
    b: int
    label: int
    corrupted: bool = False


@dataclass(frozen=True)
class SplitDataset:
    train: list
    val: list
    p: int
    alpha: float = 0.0
    seed: int | None = None
    train_frac: float = field(default=0.3)

    def arrays(self, subset="train"):
        """Return ``(X, y)`` with ``X`` an ``(n, 2)`` int array of (a, b) pairs."""
        if subset not in ("train", "val"):
            raise ValueError(f"unknown subset {subset!r}")
        rows = self.train if subset == "train" else self.val
        X = np.array([(t.a, t.b) for t in rows], dtype=np.int64).reshape(-1, 2)
        y = np.array([t.label for t in rows], dtype=np.int64)
        return X, y

    @property
    def n_corrupted(self):
        return sum(t.corrupted for t in self.train)


def generate_triples(p):
    """All ``p**2`` clean triples ``(a, b, (a + b) mod p)`` in row-major order."""
    p = int(p)
    if p < 2:
        raise ValueError(f"modulus must be >= 2, got {p}")
    return [Triple(a, b, (a + b) % p, False) for a in range(p) for b in range(p)]


def stratified_split(triples, train_frac=0.3, seed=0):
    """Split the complete triple set with an equal train count per true label.

    Each residue class contributes ``floor(train_frac * p)`` training pairs,
    chosen uniformly without replacement within the class.
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must lie in (0, 1), got {train_frac}")
    n = len(triples)
    p = int(round(np.sqrt(n)))
    if p * p != n or p < 2:
        raise ValueError("triples must be the complete p**2 set")
    if any(t.corrupted for t in triples):
        raise ValueError("cannot split corrupted triples")
    per_class = int(np.floor(train_frac * p))
    if per_class <= 0 or per_class >= p:
        raise ValueError(
            f"train_frac={train_frac} gives {per_class} train pairs per class; "
            f"need 1..{p - 1}"
        )

    by_class = [[] for _ in range(p)]
    for idx, t in enumerate(triples):
        by_class[(t.a + t.b) % p].append(idx)

    rng = derive_rng(seed, SPLIT_STREAM)
    is_train = np.zeros(n, dtype=bool)
    for members in by_class:
        if len(members) != p:
            raise ValueError("triples must be the complete p**2 set")
        chosen = rng.choice(len(members), size=per_class, replace=False)
        is_train[np.asarray(members)[chosen]] = True

    train = [triples[i] for i in range(n) if is_train[i]]
    val = [triples[i] for i in range(n) if not is_train[i]]
    return SplitDataset(train=train, val=val, p=p, alpha=0.0, seed=seed, train_frac=train_frac)


def corrupt_labels(split, alpha, seed=0):
    """Replace ``round(alpha * |train|)`` train labels by uniform wrong classes."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if split.n_corrupted:
        raise ValueError("split already carries corrupted labels")
    n_train = len(split.train)
    n_bad = int(round(alpha * n_train))
    if n_bad == 0:
        return replace(split, alpha=float(alpha))

    p = split.p
    rng = derive_rng(seed, CORRUPT_STREAM)
    picked = rng.choice(n_train, size=n_bad, replace=False)
    # offset in 1..p-1 is uniform over the p-1 wrong classes
    offsets = rng.integers(1, p, size=n_bad)
    train = list(split.train)
    for idx, off in zip(picked, offsets):
        t = train[idx]
        train[idx] = Triple(t.a, t.b, int((t.label + off) % p), True)
    return replace(split, train=train, alpha=float(alpha))


def make_dataset(p=97, train_frac=0.3, alpha=0.0, seed=0):
    """Split and corrupt with both streams derived from one master seed."""
    split = stratified_split(generate_triples(p), train_frac=train_frac, seed=seed)
    return corrupt_labels(split, alpha, seed=seed)


def export_split_csv(split, path):
    """Audit dump with columns ``a, b, label, corrupted, subset``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "label", "corrupted", "subset"])
        for subset, rows in (("train", split.train), ("val", split.val)):
            for t in rows:
                writer.writerow([t.a, t.b, t.label, int(t.corrupted), subset])
