"""Regenerate the toy network weights (deterministic)."""

from pathlib import Path

import numpy as np

from lipgram import lipk

HERE = Path(__file__).parent


def main():
    rng = np.random.default_rng(10)
    lipk.write(HERE / "conv1.lipk", rng.standard_normal((2, 2, 3, 3)) / 3)
    lipk.write(HERE / "res_conv.lipk", rng.standard_normal((2, 2, 3, 3)) / 10)


if __name__ == "__main__":
    main()
