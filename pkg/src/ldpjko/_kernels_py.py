"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.special import logsumexp


def lse_rows(logk, pot, out=None):
    """Row-wise ``log(sum_j exp(logk[i, j] + pot[j]))``.

    Rows whose entries are all ``-inf`` give ``-inf``.
    """
    logk = np.asarray(logk, dtype=np.float64)
    pot = np.asarray(pot, dtype=np.float64)
    if pot.shape[0] != logk.shape[1]:
        raise ValueError("pot length does not match kernel columns")
    with np.errstate(divide="ignore", invalid="ignore"):
        res = logsumexp(logk + pot[None, :], axis=1)
    res = np.where(np.isnan(res), -np.inf, res)
    if out is None:
        return res
    if out.shape[0] != logk.shape[0]:
        raise ValueError("out length does not match kernel rows")
    out[:] = res
    return out
