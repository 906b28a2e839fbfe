"""Small fitting helpers shared by the acceptance checks and the CLI."""
import numpy as np


def fit_exponential_rate(t, y, floor=0.0):
    """Rate r of y - floor ~ A exp(-r t) by least squares on the logarithm."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(y, dtype=float) - floor
    keep = d > 0
    if keep.sum() < 2:
        raise ValueError("need at least two points above the floor")
    slope, _ = np.polyfit(t[keep], np.log(d[keep]), 1)
    return -slope


def envelope_peaks(t, y):
    """Times and values of the local maxima of |y|."""
    a = np.abs(np.asarray(y, dtype=float))
    i = np.flatnonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:])) + 1
    return np.asarray(t)[i], a[i]


def fit_envelope_rate(t, y, t_min=None, t_max=None):
    """Decay rate of the envelope of an oscillating signal (fit through its peaks)."""
    tp, ap = envelope_peaks(t, y)
    keep = np.ones_like(tp, dtype=bool)
    if t_min is not None:
        keep &= tp >= t_min
    if t_max is not None:
        keep &= tp <= t_max
    return fit_exponential_rate(tp[keep], ap[keep])
