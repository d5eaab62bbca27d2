import numpy as np
import torch


def cg(A, B, M, X0=None, tol=1e-10, maxiter=None, atol=0.):
    """Batched preconditioned conjugate gradient.

    A and M are (sparse) torch matrices, B holds one right-hand side per
    column. Returns X and an info dict with the final residual norm.
    """
    n = B.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    X = X0 if X0 is not None else torch.zeros_like(B)

    norm_B = torch.norm(B)
    residual = lambda X: B - torch.sparse.mm(A, X)
    done = lambda R: torch.norm(R) <= max(tol * norm_B.item(), atol)

    k = 0
    X_k = X
    R_k = residual(X_k)
    optimal = True
    P_k = Z_prev = R_prev = None
    while not done(R_k):
        if k == maxiter:
            optimal = False
            break
        k = k + 1
        Z_k = torch.sparse.mm(M, R_k)
        if P_k is None:
            P_k = Z_k
        else:
            beta = (R_k * Z_k).sum(dim=0) / (R_prev * Z_prev).sum(dim=0)
            P_k = Z_k + beta * P_k
        AP = torch.sparse.mm(A, P_k)
        curvature = (P_k * AP).sum(dim=0)
        if (curvature <= 0).any():
            # search direction left the range of A
            optimal = False
            break
        alpha = (R_k * Z_k).sum(dim=0) / curvature
        R_prev, Z_prev = R_k, Z_k
        X_k = X_k + alpha * P_k
        R_k = R_k - alpha * AP
    return X_k, {
        "optimal": optimal,
        "|R|": torch.norm(residual(X_k)).item(),
        "niter": k,
    }


def sparse_numpy_to_torch(A):
    A = A.tocoo()
    indices = np.vstack((A.row, A.col))
    i = torch.as_tensor(indices, dtype=torch.long)
    v = torch.as_tensor(A.data, dtype=torch.float64)
    return torch.sparse_coo_tensor(i, v, A.shape, dtype=torch.float64).coalesce()
