"""Personalized PageRank scores used to rank demonstration candidates."""

import numpy as np
import scipy.sparse as sp

from src.constants import PPR_DENSE_MAX_NODES
from src.entity.config_entity import PPRConfig
from src.entity.graph import MultimodalGraph
from src.exception import ConvergenceError, DanglingNodeError, InvariantViolationError, NumericError
from src.logger import log


def transition_operator(g: MultimodalGraph, normalization: str = "rw") -> sp.csr_matrix:
    """
    The matrix applied to the iterate each step. ``rw``: transpose of the row-stochastic random-walk matrix
    D^-1 A. ``sym``: D^-1/2 A D^-1/2. Rows and columns of isolated nodes are zero.
    """
    adj = g.adjacency_matrix()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    safe = np.where(deg > 0, deg, 1.0)
    if normalization == "rw":
        return (sp.diags(1.0 / safe) @ adj).T.tocsr()
    if normalization == "sym":
        inv_sqrt = sp.diags(np.where(deg > 0, 1.0 / np.sqrt(safe), 0.0))
        return (inv_sqrt @ adj @ inv_sqrt).tocsr()
    raise InvariantViolationError(f"unknown normalization {normalization!r}")


def _indicator(n: int, anchor: int) -> np.ndarray:
    e = np.zeros(n)
    e[anchor] = 1.0
    return e


def _check_anchor(g: MultimodalGraph, anchor: int) -> int:
    if not 0 <= int(anchor) < g.num_nodes:
        raise DanglingNodeError(f"anchor {anchor} outside [0, {g.num_nodes})")
    return int(anchor)


def ppr_scores(g: MultimodalGraph, anchor: int, cfg: PPRConfig = PPRConfig()) -> np.ndarray:
    """
    Power iteration of pi <- alpha * e_anchor + (1 - alpha) * (M pi + dangling mass * e_anchor), starting from
    e_anchor, until the L1 change drops below ``cfg.tol``. Dangling (isolated) nodes send their mass back to
    the anchor. The result is nonnegative and sums to 1.

    :raises ConvergenceError: after ``cfg.max_iter`` iterations, carrying the last L1 change.
    """
    anchor = _check_anchor(g, anchor)
    op = transition_operator(g, cfg.normalization)
    dangling = np.diff(g.offsets) == 0
    e = _indicator(g.num_nodes, anchor)
    pi = e.copy()
    residual = np.inf
    for iteration in range(1, cfg.max_iter + 1):
        nxt = cfg.alpha * e + (1.0 - cfg.alpha) * (op @ pi + pi[dangling].sum() * e)
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < cfg.tol:
            log.debug(f"PPR anchor={anchor} converged after {iteration} iterations (residual {residual:.3e})")
            break
    else:
        raise ConvergenceError(f"PPR for anchor {anchor} did not converge in {cfg.max_iter} iterations "
                               f"(residual {residual:.3e})", residual=residual)
    if cfg.normalization == "sym":
        pi = pi / pi.sum()
    return pi


def ppr_oracle_dense(g: MultimodalGraph, anchor: int, alpha: float, normalization: str = "rw") -> np.ndarray:
    """Direct solve of (I - (1 - alpha) (M + e_anchor d^T)) pi = alpha e_anchor, d the dangling indicator."""
    anchor = _check_anchor(g, anchor)
    n = g.num_nodes
    if n > PPR_DENSE_MAX_NODES:
        raise InvariantViolationError(f"dense PPR oracle is limited to {PPR_DENSE_MAX_NODES} nodes, got {n}")
    if not 0.0 < alpha <= 1.0:
        raise InvariantViolationError(f"alpha must be in (0, 1], got {alpha}")
    e = _indicator(n, anchor)
    m = transition_operator(g, normalization).toarray()
    m += np.outer(e, (np.diff(g.offsets) == 0).astype(np.float64))
    try:
        pi = np.linalg.solve(np.eye(n) - (1.0 - alpha) * m, alpha * e)
    except np.linalg.LinAlgError as err:
        raise NumericError(f"PPR system is singular for alpha={alpha}") from err
    if normalization == "sym":
        pi = pi / pi.sum()
    return pi
