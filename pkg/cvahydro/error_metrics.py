import numpy as np


def relative_error(value, ref, floor=0.0):
    """Relative error |value - ref| / max(|ref|, floor).

    The floor keeps the error finite when a reference vanishes, e.g. a zero wave speed compared against a
    fraction of the largest speed of the same state.

    Args:
        value (float or numpy.ndarray): Measured value(s).
        ref (float or numpy.ndarray): Reference value(s).
        floor (float): Lower bound of the normalization.

    Returns:
        float or numpy.ndarray: Relative error, a float for scalar inputs.
    """
    value, ref = np.asarray(value, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    scale = np.maximum(np.abs(ref), floor)
    if np.any(scale == 0):
        raise ValueError('Relative error undefined for a zero reference without a floor.')
    err = np.abs(value - ref) / scale

    return float(err) if err.ndim == 0 else err


def block_average(arr, factor):
    """Average consecutive blocks of ``factor`` cells along the last axis.

    Used to coarsen a fine-grid reference onto a coarser uniform grid.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[-1] % factor != 0:
        raise ValueError('Grid size {} is not divisible by {}.'.format(arr.shape[-1], factor))

    return arr.reshape(arr.shape[:-1] + (arr.shape[-1] // factor, factor)).mean(axis=-1)


def observed_order(err_coarse, err_fine, refinement=2.0):
    """Convergence order log(err_coarse / err_fine) / log(refinement)."""
    return float(np.log(err_coarse / err_fine) / np.log(refinement))


def max_adjacent_jump_ratio(values):
    """Largest |adjacent difference| divided by the median |adjacent difference|."""
    jumps = np.abs(np.diff(np.asarray(values, dtype=np.float64)))
    if jumps.size == 0:
        return 0.0
    median = np.median(jumps)

    return float(np.max(jumps) / median) if median > 0 else (0.0 if np.max(jumps) == 0 else np.inf)
