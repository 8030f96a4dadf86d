"""Shared test helpers: epsilon selection with a boundary guard."""

import numpy as np

SHELL_GUARD = 1e-9  # no tested pair may sit within this relative band of epsilon


def sorted_pair_distances(dataset):
    """All n^2 ordered-pair distances, ascending, by the reference sum order."""
    x = np.asarray(dataset.logical)
    n = len(x)
    sq = np.zeros((n, n))
    for dim in range(x.shape[1]):
        diff = x[:, dim, None] - x[None, :, dim]
        sq += diff * diff
    return np.sqrt(np.sort(sq.reshape(-1)))


def pick_epsilon(dist_sorted, n, target_selectivity):
    """Bisect epsilon against the oracle distances to hit a target selectivity.

    The pair count at epsilon is the number of sorted distances <= epsilon,
    so bisection drives it to n * (target + 1); the returned epsilon is then
    snapped to the midpoint of the bracketing distance gap, which keeps every
    pair beyond the SHELL_GUARD band around the shell.
    """
    total = len(dist_sorted)
    target = int(min(max(n * (target_selectivity + 1), n + 1), total - 1))
    lo, hi = 0.0, float(dist_sorted[-1])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.searchsorted(dist_sorted, mid, side="right") < target:
            lo = mid
        else:
            hi = mid
    k = int(np.searchsorted(dist_sorted, hi, side="right"))
    k = min(max(k, n + 1), total - 1)
    while k < total - 1 and dist_sorted[k] - dist_sorted[k - 1] <= 4 * SHELL_GUARD * dist_sorted[k]:
        k += 1  # widen past ties and too-narrow gaps
    epsilon = 0.5 * (dist_sorted[k - 1] + dist_sorted[k])
    gap = min(epsilon - dist_sorted[k - 1], dist_sorted[k] - epsilon)
    assert gap > SHELL_GUARD * epsilon, "could not honor the boundary guard"
    return float(epsilon)
