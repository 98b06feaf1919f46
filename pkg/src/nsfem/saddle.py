"""Saddle-point solves and the discrete inf-sup constant.

Systems have the augmented form

    [ A   -B^T  0 ] [u]   [f]
    [ B    0    C ] [p] = [g]
    [ 0   C^T   0 ] [y]   [0]

with A the velocity block on free DOFs, B the divergence constraint and C
the pressure constraint columns (zero mean, plus one point value per
singular boundary corner).  The multiplier y vanishes for consistent data.
The primary backend is a sparse direct factorization; a residual-minimizing
Krylov backend with a block-diagonal preconditioner sits behind the same
interface.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (assemble_divergence, assemble_mass, assemble_stiffness,
                       restrict_matrix, scatter_free)
from .errors import ConvergenceFailureError, SingularSystemError


@dataclass
class SolveReport:
    residual: float
    pressure_mean: float
    backend: str
    iterations: int = 0
    residual_history: list = field(default_factory=list)


@dataclass
class SaddleSystem:
    """Algebraic saddle problem on free velocity DOFs."""

    A: sp.spmatrix
    B: sp.spmatrix
    f: np.ndarray
    g: np.ndarray = None
    constraints: np.ndarray = None      # (nQ, ncon); zero-mean column first
    backend: str = "direct"
    rtol: float = 1e-10
    maxiter: int = 2000
    pressure_mass_diag: np.ndarray = None

    def __post_init__(self):
        n = self.A.shape[0]
        nq = self.B.shape[0] if self.B is not None else 0
        if self.g is None:
            self.g = np.zeros(nq)
        if self.B is not None and self.B.shape[1] != n:
            raise ValueError("B and A dimensions are inconsistent")
        if nq and self.constraints is None:
            raise SingularSystemError(
                "pressure participates but no mean constraint was supplied; "
                "the pressure block has a nullspace")


def _augmented(system):
    A, B, C = system.A, system.B, system.constraints
    if B is None:
        return sp.csc_matrix(A)
    Cs = sp.csr_matrix(C)
    blocks = [[A, -B.T, None],
              [B, None, Cs],
              [None, Cs.T, None]]
    return sp.bmat(blocks, format="csc")


def _rhs(system):
    ncon = system.constraints.shape[1] if system.constraints is not None else 0
    return np.concatenate([system.f, system.g, np.zeros(ncon)])


def solve(system):
    """Solve the saddle system; returns (u_free, p, SolveReport).

    Raises :class:`SingularSystemError` on factorization breakdown or a
    hopeless residual, :class:`ConvergenceFailureError` if the iterative
    backend stalls.
    """
    K = _augmented(system)
    rhs = _rhs(system)
    scale = np.linalg.norm(rhs)
    if system.backend == "direct":
        try:
            lu = spla.splu(K)
            sol = lu.solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}")
        iters = 0
        history = []
    elif system.backend == "iterative":
        sol, history = _krylov(system, K, rhs)
        iters = len(history)
    else:
        raise ValueError(f"unknown backend {system.backend!r}")
    res = np.linalg.norm(K @ sol - rhs) / (scale if scale > 0 else 1.0)
    if not np.isfinite(res) or res > 1e-6:
        raise SingularSystemError(
            f"system is numerically singular (relative residual {res:.3e})")
    n = system.A.shape[0]
    nq = system.B.shape[0] if system.B is not None else 0
    u = sol[:n]
    p = sol[n:n + nq]
    mean = float(system.constraints[:, 0] @ p) if nq else 0.0
    return u, p, SolveReport(residual=float(res), pressure_mean=mean,
                             backend=system.backend, iterations=iters,
                             residual_history=history)


def _krylov(system, K, rhs):
    """GMRES on the augmented system with a block-diagonal preconditioner.

    The velocity block is applied through its own sparse factorization and
    the (diagonal) pressure mass through its inverse, so iteration counts
    are governed by the inf-sup-conditioned Schur complement.
    """
    n = system.A.shape[0]
    nq = system.B.shape[0]
    ncon = system.constraints.shape[1]
    try:
        luA = spla.splu(sp.csc_matrix(system.A))
    except RuntimeError as exc:
        raise SingularSystemError(f"velocity block factorization failed: {exc}")
    if system.pressure_mass_diag is not None:
        mass_diag = system.pressure_mass_diag
    else:
        mass_diag = np.asarray(abs(system.B) @ np.ones(n))
        mass_diag[mass_diag == 0] = 1.0

    def apply(x):
        out = np.empty_like(x)
        out[:n] = luA.solve(x[:n])
        out[n:n + nq] = x[n:n + nq] / mass_diag
        out[n + nq:] = x[n + nq:]
        return out

    M = spla.LinearOperator(K.shape, matvec=apply)
    history = []

    def cb(res):
        history.append(float(res))

    sol, info = spla.gmres(K, rhs, rtol=system.rtol, atol=0.0, M=M,
                           maxiter=system.maxiter, restart=200,
                           callback=cb, callback_type="pr_norm")
    if info != 0:
        raise ConvergenceFailureError(
            f"GMRES did not converge within {system.maxiter} iterations",
            residuals=history)
    return sol, history


def make_system(V, Q, A_full, f_full, backend="direct", rtol=1e-10, B=None):
    """Restrict full-DOF operators to free DOFs and bundle a SaddleSystem."""
    free = V.free_dofs
    A = restrict_matrix(A_full, free, free)
    if B is None:
        B = assemble_divergence(V, Q)
    Bf = B[:, free].tocsr()
    pm = np.repeat(2.0 * Q.mesh.areas, Q.block_size)
    return SaddleSystem(A=A, B=Bf, f=f_full[free],
                        constraints=Q.constraints, backend=backend, rtol=rtol,
                        pressure_mass_diag=pm)


def solve_fields(V, Q, system):
    """Solve and wrap the result into FE functions."""
    from .space import FEFunction
    u_free, p, report = solve(system)
    u = FEFunction(V, scatter_free(V, u_free))
    ph = FEFunction(Q, p)
    return u, ph, report


class FactorizedSaddle:
    """Reusable factorization of one augmented matrix (direct backend).

    Used where many right-hand sides hit the same operator (projections of
    random fields, repeated applications of the discrete Stokes operator).
    """

    def __init__(self, system):
        self.system = system
        self.K = _augmented(system)
        try:
            self.lu = spla.splu(self.K)
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}")
        self.n = system.A.shape[0]
        self.nq = system.B.shape[0] if system.B is not None else 0
        self.ncon = (system.constraints.shape[1]
                     if system.constraints is not None else 0)

    def solve(self, f, g=None):
        rhs = np.concatenate([
            f, np.zeros(self.nq) if g is None else g, np.zeros(self.ncon)])
        sol = self.lu.solve(rhs)
        res = np.linalg.norm(self.K @ sol - rhs)
        nrm = np.linalg.norm(rhs)
        if not np.isfinite(res) or res > 1e-6 * max(nrm, 1.0):
            raise SingularSystemError(
                f"system is numerically singular (residual {res:.3e})")
        return sol[:self.n], sol[self.n:self.n + self.nq]


def infsup_constant(V, Q, dense_limit=3000, return_spectrum=False, seed=0):
    """Discrete inf-sup constant of the pair.

    beta_h = sqrt(lambda_min) of the pressure Schur eigenproblem
    B K^{-1} B^T q = lambda M_Q q restricted to the constrained pressure
    subspace (zero mean and, on meshes with singular corners, zero corner
    values).  Dense solve below ``dense_limit`` free velocity DOFs, LOBPCG
    with constraint deflation above.
    """
    K_full = assemble_stiffness(V)
    B_full = assemble_divergence(V, Q)
    free = V.free_dofs
    K = restrict_matrix(K_full, free, free)
    B = B_full[:, free].tocsr()
    MQ = _pressure_mass(Q)
    C = Q.constraints
    if V.num_free_dofs <= dense_limit:
        Kd = K.toarray()
        Bd = B.toarray()
        X = np.linalg.solve(Kd, Bd.T)
        S = Bd @ X
        lam_full = _gen_eigvals(S, MQ.toarray())
        Z = _nullspace_basis(C)
        lam = _gen_eigvals(Z.T @ S @ Z, Z.T @ MQ.toarray() @ Z)
        beta = float(np.sqrt(max(lam[0], 0.0)))
        if return_spectrum:
            return beta, lam_full
        return beta
    luK = spla.splu(sp.csc_matrix(K))

    def schur(x):
        x = np.asarray(x)
        if x.ndim == 1:
            return B @ luK.solve(B.T @ x)
        return np.column_stack([B @ luK.solve(B.T @ col) for col in x.T])

    S_op = spla.LinearOperator((Q.num_dofs, Q.num_dofs), matvec=schur,
                               matmat=schur)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((Q.num_dofs, 4))
    Minv = sp.diags(1.0 / MQ.diagonal())
    # deflate the M-orthogonal complement of the constrained subspace
    Y = Minv @ C
    vals, _ = spla.lobpcg(S_op, X, B=MQ, Y=Y, M=Minv, largest=False,
                          tol=1e-8, maxiter=400)
    beta = float(np.sqrt(max(vals.min(), 0.0)))
    if return_spectrum:
        return beta, np.sort(vals)
    return beta


def _pressure_mass(Q):
    # orthonormal reference basis: per-cell mass = |det J| * identity
    detJ = np.repeat(2.0 * Q.mesh.areas, Q.block_size)
    return sp.diags(detJ).tocsr()


def _gen_eigvals(S, M):
    from scipy.linalg import eigh
    return np.sort(eigh(S, M, eigvals_only=True))


def _nullspace_basis(C):
    from scipy.linalg import null_space
    return null_space(C.T)


def stokes_system(V, Q, f_full, mu=1.0, backend="direct", rtol=1e-10):
    """Steady Stokes system mu*K u - B^T p = f, B u = 0."""
    K = assemble_stiffness(V)
    return make_system(V, Q, mu * K, f_full, backend=backend, rtol=rtol)


def mass_system(V, Q, f_full, backend="direct", rtol=1e-10):
    """Mass saddle system M u - B^T p = f, B u = 0 (the L2 projection)."""
    M = assemble_mass(V)
    return make_system(V, Q, M, f_full, backend=backend, rtol=rtol)
