"""
Small dense-matrix helpers shared by the numeric modules.

All matrices use the basis order (d_x, d_y, d_p, d_q).
"""

import numpy as np

IDENTITY4 = np.eye(4)

OMEGA = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ]
)

# Omega^-1 = -Omega
OMEGA_INV = -OMEGA


def max_norm(matrix: np.ndarray) -> float:
    """Largest absolute entry; 0.0 for an empty array."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))
