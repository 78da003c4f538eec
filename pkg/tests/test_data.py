import struct

import numpy as np
import pytest

from deepmpc import FixedConfig, encode
from deepmpc.data import DatasetError, load_dataset, load_idx, read_cifar_batch, read_idx_images, read_idx_labels

from conftest import MNIST_DIR, needs_mnist


def write_idx(tmp_path, n=3, rows=2, cols=2, magic=2051, lab_magic=2049, n_labels=None, cut=0):
    img = tmp_path / "img"
    lab = tmp_path / "lab"
    pixels = bytes(range(n * rows * cols))
    img.write_bytes((struct.pack(">IIII", magic, n, rows, cols) + pixels)[: len(pixels) + 16 - cut])
    n_labels = n if n_labels is None else n_labels
    lab.write_bytes(struct.pack(">II", lab_magic, n_labels) + bytes(i % 10 for i in range(n_labels)))
    return img, lab


def test_idx_round_trip(tmp_path):
    ds = load_idx(*write_idx(tmp_path))
    assert ds.images.shape == (3, 1, 2, 2)
    assert ds.images[0, 0, 0, 1] == pytest.approx(1 / 255)
    assert ds.labels.tolist() == [0, 1, 2]
    assert ds.onehot([2]).tolist() == [[0, 0, 1] + [0] * 7]


def test_bad_magic(tmp_path):
    img, lab = write_idx(tmp_path, magic=2049)
    with pytest.raises(DatasetError, match="magic"):
        read_idx_images(img)
    img, lab = write_idx(tmp_path, lab_magic=2051)
    with pytest.raises(DatasetError, match="magic"):
        read_idx_labels(lab)


def test_truncated(tmp_path):
    img, _ = write_idx(tmp_path, cut=1)
    with pytest.raises(DatasetError, match="truncated"):
        read_idx_images(img)
    short = tmp_path / "short"
    short.write_bytes(b"\x00\x00")
    with pytest.raises(DatasetError):
        read_idx_labels(short)


def test_count_mismatch(tmp_path):
    with pytest.raises(DatasetError):
        load_idx(*write_idx(tmp_path, n_labels=2))


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_dataset("mnist", tmp_path)
    with pytest.raises(DatasetError):
        load_dataset("svhn", tmp_path)


def test_full_white_pixel_encodes_to_one():
    assert int(encode(255 / 255.0, FixedConfig())) == 65536


def test_cifar_records(tmp_path):
    rec = bytes([7]) + bytes(3072)
    p = tmp_path / "b.bin"
    p.write_bytes(rec * 2)
    ds = read_cifar_batch(p)
    assert ds.images.shape == (2, 3, 32, 32) and ds.labels.tolist() == [7, 7]
    p.write_bytes(rec[:-1])
    with pytest.raises(DatasetError):
        read_cifar_batch(p)


@needs_mnist
def test_mnist_sizes():
    train, test = load_dataset("mnist", MNIST_DIR)
    assert len(train) == 60_000 and len(test) == 10_000
    assert train.images.shape[1:] == (1, 28, 28)
    assert 0.0 <= train.images.min() and train.images.max() == 1.0
