"""Local stability certification.

Equilibria come from a damped Newton iteration on the closed-loop vector
field; Jacobians from Richardson-extrapolated central differences with the
mechanical [0 I] block structure enforced; characteristic coefficients from
Faddeev-LeVerrier; verdicts from a Routh table on the factor left after
deflating structural zero roots, cross-checked against the eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import closed_loop_rhs
from .errors import NoConvergence

CLASS_CENTER = "CenterCandidate"
CLASS_STABLE = "AsymptoticallyStable"
CLASS_UNSTABLE = "Unstable"
CLASS_DEGENERATE = "Degenerate"


@dataclass
class StabilityReport:
    equilibrium: np.ndarray
    jacobian: np.ndarray
    char_coeffs: np.ndarray            # leading coefficient first, monic
    deflated_coeffs: np.ndarray
    structural_zeros: int
    eigenvalues: np.ndarray
    classification: str
    routh_first_column: Optional[np.ndarray]
    routh_stable: Optional[bool]
    routh_sign_changes: Optional[int]
    roots_vs_eigs_error: float = field(default=np.nan)

    def summary_lines(self):
        lines = [
            f"classification={self.classification}",
            "eigenvalues=" + ", ".join(f"{ev.real:+.9g}{ev.imag:+.9g}j" for ev in self.eigenvalues),
            "char_coeffs=" + ", ".join(f"{c:.9g}" for c in self.char_coeffs),
            f"structural_zeros={self.structural_zeros}",
            f"routh_stable={self.routh_stable}",
        ]
        return lines


def find_equilibrium(system, feedback, guess, tol: float = 1e-10,
                     max_iter: int = 80) -> np.ndarray:
    """Damped Newton on the closed-loop first-order field from `guess`."""
    rhs = closed_loop_rhs(system, feedback)
    x = np.asarray(guess, dtype=float).copy()

    def F(z):
        return rhs(0.0, z)

    fx = F(x)
    for _ in range(max_iter):
        nrm = float(np.max(np.abs(fx)))
        if nrm < tol:
            return x
        J = _fd_jacobian(F, x, 1e-7)
        # Levenberg-Marquardt step: equilibria may form a continuum (cyclic
        # coordinates), where raw Newton amplifies weakly-determined directions
        # and wanders far along the equilibrium set; the damping scales with
        # the residual, so the quadratic tail is untouched
        sigma_max = np.linalg.norm(J, 2)
        lam2 = max(nrm, 1e-30) * (1e-2 * sigma_max) ** 2
        step = np.linalg.solve(J.T @ J + lam2 * np.eye(x.size), -J.T @ fx)
        lam = 1.0
        for _ in range(40):
            x_new = x + lam * step
            try:
                f_new = F(x_new)
            except Exception:
                lam *= 0.5
                continue
            if np.max(np.abs(f_new)) < nrm or lam < 1e-8:
                x, fx = x_new, f_new
                break
            lam *= 0.5
        else:
            break
    if float(np.max(np.abs(fx))) < tol:
        return x
    raise NoConvergence(f"Newton stalled at |rhs|={np.max(np.abs(fx)):.3e} from guess {guess}")


def _fd_jacobian(F, x, h_abs):
    n = x.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h_abs * max(1.0, abs(x[j]))
        J[:, j] = (np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2 * e[j])
    return J


def linearize(system, feedback, x_e, h_rel: float = 1e-6,
              residual_tol: float = 1e-8) -> np.ndarray:
    """Closed-loop Jacobian at an equilibrium, top blocks [0 I] enforced.

    Central differences at steps h and h/2 with one Richardson extrapolation.
    """
    rhs = closed_loop_rhs(system, feedback)
    x_e = np.asarray(x_e, dtype=float)
    resid = float(np.max(np.abs(rhs(0.0, x_e))))
    if resid > residual_tol:
        raise NoConvergence(f"not an equilibrium: |rhs|={resid:.3e} > {residual_tol:.1e}")
    n2 = x_e.size
    n = n2 // 2

    def accel(z):
        return rhs(0.0, z)[n:]

    def D(h_scale):
        J = np.zeros((n, n2))
        for j in range(n2):
            e = np.zeros(n2)
            e[j] = h_rel * h_scale * max(1.0, abs(x_e[j]))
            J[:, j] = (accel(x_e + e) - accel(x_e - e)) / (2 * e[j])
        return J

    J1 = D(1.0)
    J2 = D(0.5)
    bottom = (4.0 * J2 - J1) / 3.0
    A = np.zeros((n2, n2))
    A[:n, n:] = np.eye(n)
    A[n:, :] = bottom
    return A


def characteristic_faddeev(A: np.ndarray) -> np.ndarray:
    """Monic characteristic coefficients [1, c1, ..., cn] via Faddeev-LeVerrier."""
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def deflate_structural_zeros(coeffs: np.ndarray, tol_rel: float = 1e-9):
    """Strip trailing ~zero coefficients (roots at the origin)."""
    scale = float(np.max(np.abs(coeffs)))
    c = coeffs.copy()
    zeros = 0
    while c.size > 1 and abs(c[-1]) <= tol_rel * scale:
        c = c[:-1]
        zeros += 1
    return c, zeros


def routh_table(coeffs: np.ndarray, eps: float = 1e-12):
    """First column of the Routh array for a monic polynomial.

    Returns (first_column, sign_changes, marginal). `marginal` flags zero
    first-column entries (imaginary-axis roots); the sign-change count then
    has no strict meaning and the verdict should defer to the eigenvalues.
    """
    c = np.asarray(coeffs, dtype=float)
    n = c.size - 1
    if n < 1:
        return np.array([c[0]]), 0, False
    rows = [c[0::2].astype(float), c[1::2].astype(float)]
    width = rows[0].size
    rows[1] = np.pad(rows[1], (0, width - rows[1].size))
    marginal = False
    scale = float(np.max(np.abs(c)))
    for _ in range(n - 1):
        r0, r1 = rows[-2], rows[-1]
        pivot = r1[0]
        if abs(pivot) <= eps * scale:
            if np.max(np.abs(r1)) <= eps * scale:
                marginal = True
                break
            pivot = eps * scale  # epsilon substitution
            marginal = True
        new = np.zeros(width)
        for j in range(width - 1):
            new[j] = (pivot * r0[j + 1] - r0[0] * r1[j + 1]) / pivot
        rows.append(new)
    first = np.array([r[0] for r in rows])
    signs = np.sign(first[np.abs(first) > eps * scale])
    changes = int(np.sum(signs[:-1] != signs[1:])) if signs.size > 1 else 0
    return first, changes, marginal


def classify(eigenvalues: np.ndarray, margin: float = 1e-9) -> str:
    re = eigenvalues.real
    im = eigenvalues.imag
    if np.any(re > margin):
        return CLASS_UNSTABLE
    if np.all(re < -margin):
        return CLASS_STABLE
    on_axis = np.abs(re) <= margin
    if np.any(on_axis & (np.abs(im) > margin)):
        return CLASS_CENTER
    return CLASS_DEGENERATE


def characteristic_and_routh(A: np.ndarray, x_e: Optional[np.ndarray] = None,
                             margin: float = 1e-9) -> StabilityReport:
    """Full stability report for a (closed-loop) Jacobian."""
    A = np.asarray(A, dtype=float)
    coeffs = characteristic_faddeev(A)
    deflated, zeros = deflate_structural_zeros(coeffs)
    eigs = np.linalg.eigvals(A)
    order = np.lexsort((eigs.imag, eigs.real))
    eigs = eigs[order]
    roots = np.roots(coeffs) if coeffs.size > 1 else np.array([])
    roots = roots[np.lexsort((roots.imag, roots.real))]
    err = float(np.max(np.abs(roots - eigs))) if roots.size == eigs.size else np.nan

    if deflated.size > 1:
        first, changes, marginal = routh_table(deflated)
        routh_stable = None if marginal else bool(np.all(first > 0) if deflated[0] > 0
                                                  else np.all(first < 0))
    else:
        first, changes, marginal = None, None, False
        routh_stable = None

    return StabilityReport(
        equilibrium=x_e if x_e is not None else np.zeros(A.shape[0]),
        jacobian=A,
        char_coeffs=coeffs,
        deflated_coeffs=deflated,
        structural_zeros=zeros,
        eigenvalues=eigs,
        classification=classify(eigs, margin),
        routh_first_column=first,
        routh_stable=routh_stable,
        routh_sign_changes=changes,
        roots_vs_eigs_error=err,
    )
