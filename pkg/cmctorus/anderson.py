import logging

import numpy as np
import scipy as sp
import scipy.linalg

from cmctorus.exceptions import DomainError

MAX_DEPTH = 3
RESET_GROWTH = 10.0
RANK_COND = 1e-10


class AndersonAcceleration:
    """
    Type-II Anderson mixing for a fixed-point map g.

    At iteration k with g_k = g(x_k) and f_k = g_k - x_k, the next iterate is
    g_k - G_k gamma_k where gamma_k solves min |F_k gamma - f_k| over the stored
    differences of f (columns of F_k) and g (columns of G_k).

    The history is dropped and the plain map value returned when |f_k| grows
    by more than RESET_GROWTH over the previous step, or when F_k loses rank.
    """

    def __init__(self, dimension, depth):
        if not (0 <= depth <= MAX_DEPTH):
            raise DomainError(f"Anderson depth {depth} outside 0..{MAX_DEPTH}")
        self.dimension = dimension
        self.depth = depth
        self.restarts = 0
        self.reset()

    def reset(self):
        self.F_k = np.zeros((self.dimension, max(self.depth, 1)))  # changes in residuals
        self.G_k = np.zeros((self.dimension, max(self.depth, 1)))  # changes in map values
        self.fkm1 = None
        self.gkm1 = None
        self.stored = 0

    def _restart(self, reason, iteration):
        logging.debug(f"Anderson history dropped at iteration {iteration}: {reason}")
        self.restarts += 1
        self.stored = 0

    def apply(self, gk, fk, iteration):
        if iteration == 0:
            self.reset()
            self.restarts = 0

        if self.fkm1 is not None:
            if np.linalg.norm(fk) > RESET_GROWTH * np.linalg.norm(self.fkm1):
                self._restart("residual grew", iteration)
            else:
                col = self.stored % self.depth
                self.F_k[:, col] = fk - self.fkm1
                self.G_k[:, col] = gk - self.gkm1
                self.stored += 1

        xkp1 = gk
        mk = min(self.depth, self.stored)
        if mk > 0:
            gamma_k, _, rank, _ = sp.linalg.lstsq(self.F_k[:, 0:mk], fk, cond=RANK_COND)
            if rank < mk:
                self._restart(f"difference matrix has rank {rank} < {mk}", iteration)
            else:
                xkp1 = gk - self.G_k[:, 0:mk] @ gamma_k

        self.fkm1 = fk.copy()
        self.gkm1 = gk.copy()
        return xkp1
