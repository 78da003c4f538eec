"""
Training a small network without revealing the data
===================================================

Network A (two hidden layers of 128) on part of MNIST, first in the
emulator and then as three parties on loopback.  With nearest rounding
and the same cleartext initial weights, both produce the same numbers;
with probabilistic rounding they agree in distribution.

Set DEEPMPC_DATA to the directory holding the four MNIST IDX files.
"""
from deepmpc.train import TrainConfig, run_train

base = dict(model="A", epochs=2, train_limit=2048, test_limit=1000, rounding="nearest", init="clear", seed=3)

clear = run_train(TrainConfig(mode="emulate", **base))
for r in clear.rows:
    print(f"emulator  epoch {r['epoch']}: loss {r['loss']:.4f}, test error {r['test_error']:.4f}")

secure = run_train(TrainConfig(mode="3pc", loopback=True, **base))
for r in secure.rows:
    print(f"3 parties epoch {r['epoch']}: loss {r['loss']:.4f}, test error {r['test_error']:.4f}, "
          f"{r['comm_bits'] / 8e6:.0f} MB in {r['rounds']} rounds")

print("identical:", [r["loss"] for r in clear.rows] == [r["loss"] for r in secure.rows])
