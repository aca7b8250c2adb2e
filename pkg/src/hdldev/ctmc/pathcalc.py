"""Time integrals of state functionals along a recorded trajectory.

Between events the state is frozen, so an integral of F(X(s), s) splits into
one integral per inter-event interval. When the tilt does not depend on time
each piece is F(X_i) * length exactly; otherwise four Gauss-Legendre nodes
are used per interval.
"""
import numpy as np

from ..errors import IncompletePath

GL_X = np.array([-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526])
GL_W = np.array([0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538])


def intervals(result, t=None):
    """States and interval endpoints of a recorded trajectory up to time t.

    Returns ``(states, starts, ends)`` where ``states[i]`` holds on
    ``[starts[i], ends[i])``.
    """
    if result.events is None:
        raise IncompletePath("trajectory has no event log")
    t = result.t_final if t is None else t
    if result.t_end < t:
        raise IncompletePath(f"trajectory ends at {result.t_end:g} < {t:g}")
    states = result.states()
    times = result.events.times
    m = int(np.searchsorted(times, t, side="right"))
    starts = np.concatenate([[0.0], times[:m]])
    ends = np.concatenate([times[:m], [t]])
    return states[: m + 1], starts, ends


def integrate(fn, states, starts, ends, time_dependent: bool):
    """Per-interval integrals of ``fn(states, s)``; s broadcasts over intervals.

    Returns an array with the same shape as ``fn``'s output.
    """
    length = ends - starts
    if not time_dependent:
        val = fn(states, starts)
        return val * length.reshape((-1,) + (1,) * (val.ndim - 1))
    mid = 0.5 * (starts + ends)
    acc = None
    for x, w in zip(GL_X, GL_W):
        val = fn(states, mid + 0.5 * length * x)
        acc = w * val if acc is None else acc + w * val
    return acc * (0.5 * length).reshape((-1,) + (1,) * (acc.ndim - 1))
