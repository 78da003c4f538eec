"""Dataset readers for IDX (MNIST, Fashion-MNIST) and CIFAR-10 binary files."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATA_ENV = "DEEPMPC_DATA"
IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
CIFAR_RECORD = 3073


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """Images scaled to [0, 1] in (N, C, H, W) layout with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int = 10

    def __len__(self) -> int:
        return len(self.labels)

    def onehot(self, idx=None) -> np.ndarray:
        lab = self.labels if idx is None else self.labels[idx]
        out = np.zeros((len(lab), self.n_classes))
        out[np.arange(len(lab)), lab] = 1.0
        return out

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n], self.n_classes)


def data_dir(override: str | os.PathLike | None = None) -> Path:
    if override:
        return Path(override)
    return Path(os.environ.get(DATA_ENV, Path.home() / "data" / "mnist"))


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise DatasetError(f"dataset file not found: {path}") from None


def read_idx_images(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 16:
        raise DatasetError(f"{path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise DatasetError(f"{path}: bad magic {magic}, expected {IMAGE_MAGIC}")
    need = 16 + n * rows * cols
    if len(raw) < need:
        raise DatasetError(f"{path}: truncated, {len(raw)} of {need} bytes")
    return np.frombuffer(raw, np.uint8, n * rows * cols, 16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read(path)
    if len(raw) < 8:
        raise DatasetError(f"{path}: truncated header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise DatasetError(f"{path}: bad magic {magic}, expected {LABEL_MAGIC}")
    if len(raw) < 8 + n:
        raise DatasetError(f"{path}: truncated, {len(raw)} of {8 + n} bytes")
    return np.frombuffer(raw, np.uint8, n, 8).astype(np.int64)


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label pair; pixel bytes are divided by 255."""
    imgs = read_idx_images(images_path)
    labs = read_idx_labels(labels_path)
    if len(imgs) != len(labs):
        raise DatasetError(f"{len(imgs)} images but {len(labs)} labels")
    return Dataset((imgs / 255.0)[:, None, :, :], labs)


def load_mnist(root=None) -> tuple[Dataset, Dataset]:
    """Training and test sets of MNIST or Fashion-MNIST (same file names)."""
    d = data_dir(root)
    train = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return train, test


def read_cifar_batch(path) -> Dataset:
    raw = _read(path)
    if len(raw) % CIFAR_RECORD:
        raise DatasetError(f"{path}: size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(raw, np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise DatasetError(f"{path}: label out of range")
    images = rec[:, 1:].reshape(-1, 3, 32, 32) / 255.0
    return Dataset(images, labels)


def load_cifar10(root=None) -> tuple[Dataset, Dataset]:
    d = data_dir(root)
    parts = [read_cifar_batch(d / f"data_batch_{i}.bin") for i in range(1, 6)]
    train = Dataset(np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts]))
    return train, read_cifar_batch(d / "test_batch.bin")


def load_dataset(name: str, root=None) -> tuple[Dataset, Dataset]:
    if name in ("mnist", "fashion"):
        return load_mnist(root)
    if name == "cifar10":
        return load_cifar10(root)
    raise DatasetError(f"unknown dataset {name!r}")
