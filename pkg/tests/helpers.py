import numpy as np

from conbandit.env import ProblemInstance


def constant_instance(T, loss, cons):
    """Every round has the same means; ``cons`` is (m, K)."""
    loss = np.asarray(loss, dtype=float)
    cons = np.atleast_2d(np.asarray(cons, dtype=float))
    m, K = cons.shape
    return ProblemInstance(T, K, m, np.tile(loss, (T, 1)), np.broadcast_to(cons[:, None, :], (m, T, K)).copy())
