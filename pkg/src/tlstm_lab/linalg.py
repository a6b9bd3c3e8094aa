"""Dense float64 vector/matrix helpers with strict shape checking.

Everything in this package works on plain numpy arrays: a Vector is a 1-D
float64 array, a Matrix is 2-D.  Dimensions are tiny (a few hundred at most),
so the helpers favour explicit checks and clear error messages over
performance tricks.
"""

import numpy as np

__all__ = ["as_vector", "as_matrix", "matvec", "sigmoid", "tanh_vec"]


def as_vector(x, name="vector"):
    """Coerce to a 1-D float64 array, raising on anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_matrix(x, name="matrix"):
    """Coerce to a 2-D float64 array, raising on anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def matvec(w, x):
    """Exact dense matrix-vector product with no implicit broadcasting.

    Raises ValueError naming both shapes when the column count of ``w``
    does not equal the length of ``x``.
    """
    w = as_matrix(w, "matvec matrix")
    x = as_vector(x, "matvec vector")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"matvec shape mismatch: matrix {w.shape} cannot multiply vector {x.shape}"
        )
    return w @ x


def sigmoid(x):
    """Elementwise logistic function, overflow-safe for any float64 input.

    Computed via exp(-|x|) so the exponential argument is never positive;
    extreme negative inputs saturate cleanly to 0.0 instead of overflowing.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def tanh_vec(x):
    """Elementwise tanh (numpy's is already saturation-safe)."""
    return np.tanh(np.asarray(x, dtype=np.float64))
