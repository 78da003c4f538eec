"""
Non-linear functions on shared fixed-point numbers
==================================================

Exponentials, logarithms, division and the inverse square root are built
from multiplications, truncations and comparisons.  The emulator runs the
same quantized algorithms in the clear, which makes it cheap to look at
their accuracy.
"""
import numpy as np

from deepmpc import secmath as sm
from deepmpc.backend import EmulatorBackend
from deepmpc.quantring import FixedConfig

be = EmulatorBackend(FixedConfig(), "nearest")
x = np.array([-4.0, -1.0, 0.0, 1.0, 2.5])

# e^x by way of 2^(x log2 e)
print("exp(x)  ", be.reveal(sm.exp_e(be, be.input_fixed(0, x))))
print("float   ", np.exp(x))

# 1/sqrt(v): a quadratic fit after scaling v into a fixed interval
v = np.array([0.25, 1.0, 2.0, 4.0, 100.0])
print("isqrt(v)", be.reveal(sm.invert_sqrt(be, be.input_fixed(0, v))))
print("float   ", 1 / np.sqrt(v))

# a / b with Goldschmidt iterations
a, b = np.array([1.0, 7.0, -3.0]), np.array([3.0, 0.125, 40.0])
print("a / b   ", be.reveal(sm.div(be, be.input_fixed(0, a), be.input_fixed(0, b))))
print("float   ", a / b)

print("log2(v) ", be.reveal(sm.log2(be, be.input_fixed(0, v))))
print("float   ", np.log2(v))

# relative error of 2^x grows as the output approaches one representation step
grid = np.linspace(-13, 4, 18) + 0.37
rel = np.abs(be.reveal(sm.exp2(be, be.input_fixed(0, grid))) / np.exp2(grid) - 1)
for g, r in zip(grid, rel):
    print(f"2^{g:+5.1f}  relative error {r:.1e}")
