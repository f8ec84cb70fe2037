"""Coordinate-chart Riemannian machinery.

Everything lives in a single global chart on an open subset of R^n. A metric is
a smooth map q -> symmetric positive-definite matrix; scalar fields carry their
gradient and coordinate Hessian. Closed-form partial derivatives may be supplied
by the caller; otherwise 4th-order central differences are used.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DependentControlFields, NotPositiveDefinite

SYMMETRY_TOL = 1e-12


def _fd_step(q, h_rel=1e-5):
    return h_rel * max(1.0, float(np.max(np.abs(q))))


def central_diff4(fun: Callable[[np.ndarray], np.ndarray], q: np.ndarray, k: int, h: float):
    """4th-order central difference of `fun` along coordinate k."""
    e = np.zeros_like(q, dtype=float)
    e[k] = 1.0
    return (-fun(q + 2*h*e) + 8.0*fun(q + h*e) - 8.0*fun(q - h*e) + fun(q - 2*h*e)) / (12.0*h)


@dataclass(frozen=True)
class MetricField:
    """A Riemannian metric in one chart.

    Parameters
    ----------
    dim : int
        Chart dimension.
    eval : callable
        q -> (dim, dim) symmetric positive-definite array.
    partials : callable, optional
        q -> (dim, dim, dim) array with partials[k] = dG/dq^k. When omitted, a
        4th-order central-difference scheme with step 1e-5*max(1, |q|) is used.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step_rel: float = 1e-5

    def __call__(self, q):
        return self.eval(np.asarray(q, dtype=float))

    def partials_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.partials is not None:
            return np.asarray(self.partials(q), dtype=float)
        h = _fd_step(q, self.fd_step_rel)
        return np.stack([central_diff4(self.eval, q, k, h) for k in range(self.dim)])

    def check_symmetric(self, q) -> None:
        G = self(q)
        scale = max(1.0, float(np.max(np.abs(G))))
        if np.max(np.abs(G - G.T)) > SYMMETRY_TOL * scale:
            raise NotPositiveDefinite(q, "metric matrix is not symmetric")


@dataclass(frozen=True)
class ScalarField:
    """A smooth scalar q -> R with gradient and coordinate Hessian.

    Finite differences (4th order for the gradient, differences of the gradient
    for the Hessian) fill in whatever closed forms are not supplied.
    """

    eval: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step_rel: float = 1e-5

    def __call__(self, q):
        return float(self.eval(np.asarray(q, dtype=float)))

    def gradient_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(q), dtype=float)
        h = _fd_step(q, self.fd_step_rel)
        g = np.array([central_diff4(lambda p: np.array(self.eval(p)), q, k, h) for k in range(q.size)])
        return g.reshape(q.size)

    def hessian_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(q), dtype=float)
        h = _fd_step(q, max(self.fd_step_rel, 1e-5))
        H = np.stack([central_diff4(self.gradient_at, q, k, h) for k in range(q.size)])
        return 0.5 * (H + H.T)

    @staticmethod
    def constant(c: float) -> "ScalarField":
        return ScalarField(
            eval=lambda q: c,
            gradient=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
            hessian=lambda q: np.zeros((np.asarray(q).size, np.asarray(q).size)),
        )


@dataclass(frozen=True)
class VectorFieldSet:
    """m control vector fields, evaluated as rows of an (m, dim) array."""

    count: int
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    rank_tol: float = 1e-9

    def __call__(self, q) -> np.ndarray:
        Y = np.asarray(self.eval(np.asarray(q, dtype=float)), dtype=float).reshape(self.count, self.dim)
        return Y

    def check_rank(self, q) -> float:
        """Smallest singular value of the field matrix; raises on rank loss."""
        Y = self(q)
        smin = float(np.linalg.svd(Y, compute_uv=False)[-1])
        if smin <= self.rank_tol:
            raise DependentControlFields(q, f"smallest singular value {smin:.3e}")
        return smin


def metric_inverse(g: MetricField, q) -> np.ndarray:
    """Inverse metric via Cholesky; raises NotPositiveDefinite on failure."""
    G = g(q)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(np.asarray(q, dtype=float), str(exc)) from exc
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def christoffel(g: MetricField, q) -> np.ndarray:
    """Levi-Civita Christoffel symbols Gamma[k, i, j] (symmetric in i, j)."""
    Ginv = metric_inverse(g, q)
    P = g.partials_at(q)  # P[k, i, j] = d g_ij / dq^k
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij), bracket indexed [i, j, l]
    bracket = P + P.transpose(1, 0, 2) - P.transpose(1, 2, 0)
    gamma = 0.5 * np.einsum('kl,ijl->kij', Ginv, bracket)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_contraction(g: MetricField, q, qdot) -> np.ndarray:
    """Gamma^k_ij qdot^i qdot^j without forming the full symbol array."""
    qdot = np.asarray(qdot, dtype=float)
    Ginv = metric_inverse(g, q)
    P = g.partials_at(q)
    a = np.einsum('i,ijl,j->l', qdot, P, qdot)     # d_i g_jl qd^i qd^j
    b = np.einsum('lij,i,j->l', P, qdot, qdot)     # d_l g_ij qd^i qd^j
    return Ginv @ (a - 0.5 * b)


def grad_metric(g: MetricField, s: ScalarField, q) -> np.ndarray:
    """Metric gradient: components f^i = g^{ik} df_k."""
    return metric_inverse(g, q) @ s.gradient_at(q)


def covariant_hessian(g: MetricField, s: ScalarField, q) -> np.ndarray:
    """Covariant Hessian f_jk = d^2 f/dq^j dq^k - Gamma^i_jk df_i."""
    H = s.hessian_at(q)
    gamma = christoffel(g, q)
    corr = np.einsum('i,ijk->jk', s.gradient_at(q), gamma)
    M = H - corr
    return 0.5 * (M + M.T)


def flat(g: MetricField, q, v) -> np.ndarray:
    """Lower an index: vector -> covector."""
    return g(q) @ np.asarray(v, dtype=float)


def sharp(g: MetricField, q, mu) -> np.ndarray:
    """Raise an index: covector -> vector."""
    return metric_inverse(g, q) @ np.asarray(mu, dtype=float)


def euclidean_metric(dim: int) -> MetricField:
    """The flat metric on R^dim."""
    eye = np.eye(dim)
    zeros = np.zeros((dim, dim, dim))
    return MetricField(dim=dim, eval=lambda q: eye, partials=lambda q: zeros)


def conformal_metric(dim: int, factor: Callable[[np.ndarray], float],
                     factor_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> MetricField:
    """Metric m(q) * I with optional closed-form gradient of m."""
    eye = np.eye(dim)

    def ev(q):
        return float(factor(q)) * eye

    partials = None
    if factor_grad is not None:
        def partials(q):
            dm = np.asarray(factor_grad(q), dtype=float)
            return dm[:, None, None] * eye[None, :, :]

    return MetricField(dim=dim, eval=ev, partials=partials)
