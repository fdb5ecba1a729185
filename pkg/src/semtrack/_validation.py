"""Parameter checks shared by the estimators and the CLI."""
import math
import numbers


def check_similarity(value, name, bounded=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if bounded and not -1.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [-1,1]")
    return float(value)


def check_iou_threshold(value, name="IoU threshold"):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not 0.0 < value <= 1.0:
        raise ValueError(f"{name} must be in (0,1], got {value!r}")
    return float(value)


def check_int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_gate(value):
    """Spatial gate IoU in [0,1], or None for disabled."""
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not 0.0 <= value <= 1.0:
        raise ValueError(f"spatial gate IoU must be in [0,1] or disabled, got {value!r}")
    return float(value)
