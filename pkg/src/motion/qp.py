"""Dense primal active-set solver for strictly convex quadratic programs.

Solves ``min 1/2 x'Hx + c'x  s.t.  A x <= b,  E x = e`` starting from a
feasible point. Equalities stay in the working set; inequalities enter
when they block a step and leave when their multiplier turns negative.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..models.domain import QPInfeasible
from ..utils.logger import logger


@dataclass
class QPSolution:
    """Optimal point with multipliers for inequalities and equalities"""
    x: np.ndarray
    inequality_multipliers: np.ndarray
    equality_multipliers: np.ndarray
    active: List[int] = field(default_factory=list)
    iterations: int = 0

    def kkt_residuals(
        self,
        H: np.ndarray,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        E: Optional[np.ndarray] = None,
        e: Optional[np.ndarray] = None
    ) -> Dict[str, float]:
        """Stationarity, primal feasibility, complementarity and dual feasibility residuals"""
        grad = H @ self.x + c
        if len(b):
            grad = grad + A.T @ self.inequality_multipliers
        primal = float(np.max(A @ self.x - b, initial=0.0)) if len(b) else 0.0
        if E is not None and len(e):
            grad = grad + E.T @ self.equality_multipliers
            primal = max(primal, float(np.max(np.abs(E @ self.x - e))))
        slack = (A @ self.x - b) if len(b) else np.zeros(0)
        return {
            "stationarity": float(np.max(np.abs(grad), initial=0.0)),
            "primal": primal,
            "complementarity": float(np.max(np.abs(self.inequality_multipliers * slack), initial=0.0)),
            "dual": float(max(0.0, -np.min(self.inequality_multipliers, initial=0.0))),
        }


class ActiveSetQP:
    """Primal active-set method for strictly convex QPs"""

    def __init__(self, max_iterations: int = 500, tolerance: float = 1e-12):
        self.max_iterations = max_iterations
        self.tolerance = tolerance

    def solve(
        self,
        H: np.ndarray,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        x0: np.ndarray,
        E: Optional[np.ndarray] = None,
        e: Optional[np.ndarray] = None
    ) -> QPSolution:
        """Solve the QP from a feasible starting point.

        Args:
            H: Symmetric positive definite Hessian (n x n)
            c: Linear term (n)
            A: Inequality matrix (m x n)
            b: Inequality bounds (m)
            x0: Feasible starting point
            E: Optional equality matrix (p x n), assumed full row rank
            e: Optional equality right-hand side (p)

        Returns:
            QPSolution at the optimum
        """
        n = len(c)
        A = np.asarray(A, dtype=float).reshape(-1, n)
        b = np.asarray(b, dtype=float).reshape(-1)
        E = np.zeros((0, n)) if E is None else np.asarray(E, dtype=float).reshape(-1, n)
        e = np.zeros(0) if e is None else np.asarray(e, dtype=float).reshape(-1)
        x = np.array(x0, dtype=float)
        p_eq = len(e)
        tol = self.tolerance

        working: List[int] = []
        for iteration in range(1, self.max_iterations + 1):
            g = H @ x + c
            constraints = np.vstack([E, A[working]]) if working else E
            k = len(constraints)
            if k:
                kkt = np.zeros((n + k, n + k))
                kkt[:n, :n] = H
                kkt[:n, n:] = constraints.T
                kkt[n:, :n] = constraints
                rhs = np.concatenate([-g, np.zeros(k)])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
                step = sol[:n]
                lam = sol[n:]
            else:
                step = np.linalg.solve(H, -g)
                lam = np.zeros(0)

            if np.max(np.abs(step), initial=0.0) <= tol * max(1.0, np.max(np.abs(x), initial=0.0)):
                lam_ineq = lam[p_eq:]
                if not working or np.min(lam_ineq) >= -1e-12:
                    multipliers = np.zeros(len(b))
                    multipliers[working] = np.maximum(lam_ineq, 0.0)
                    return QPSolution(x, multipliers, lam[:p_eq], list(working), iteration)
                working.pop(int(np.argmin(lam_ineq)))
                continue

            alpha = 1.0
            blocking = None
            if len(b):
                Ap = A @ step
                candidates = np.where(Ap > 1e-14)[0]
                if len(candidates):
                    in_working = set(working)
                    candidates = np.array([i for i in candidates if i not in in_working], dtype=int)
                if len(candidates):
                    ratios = np.maximum(b[candidates] - A[candidates] @ x, 0.0) / Ap[candidates]
                    j = int(np.argmin(ratios))
                    if ratios[j] < alpha:
                        alpha = float(ratios[j])
                        blocking = int(candidates[j])
            x = x + alpha * step
            if blocking is not None:
                working.append(blocking)

        logger.warning(f"Active-set QP hit the iteration cap ({self.max_iterations})")
        multipliers = np.zeros(len(b))
        return QPSolution(x, multipliers, np.zeros(p_eq), list(working), self.max_iterations)

    def solve_from_infeasible(
        self,
        H: np.ndarray,
        c: np.ndarray,
        A: np.ndarray,
        b: np.ndarray,
        E: Optional[np.ndarray] = None,
        e: Optional[np.ndarray] = None,
        penalty: float = 1e8,
        feasibility_tolerance: float = 1e-6
    ) -> QPSolution:
        """Phase one by elastic slacks, then the regular solve.

        Raises:
            QPInfeasible: when the constraints cannot be met within tolerance
        """
        n = len(c)
        A = np.asarray(A, dtype=float).reshape(-1, n)
        m = len(b)
        E = np.zeros((0, n)) if E is None else np.asarray(E, dtype=float).reshape(-1, n)
        e = np.zeros(0) if e is None else np.asarray(e, dtype=float).reshape(-1)
        p = len(e)
        # variables: x, t (one per inequality), u (one per equality)
        H1 = np.zeros((n + m + p, n + m + p))
        H1[:n, :n] = H
        H1[n:, n:] = np.eye(m + p) * penalty
        c1 = np.concatenate([c, np.zeros(m + p)])
        A1 = np.hstack([A, -np.eye(m), np.zeros((m, p))])
        E1 = np.hstack([E, np.zeros((p, m)), -np.eye(p)])
        x_start = np.zeros(n)
        t_start = np.maximum(A @ x_start - b, 0.0)
        u_start = E @ x_start - e
        elastic = self.solve(H1, c1, A1, b, np.concatenate([x_start, t_start, u_start]), E1, e)
        x = elastic.x[:n]
        violation = max(
            float(np.max(A @ x - b, initial=0.0)),
            float(np.max(np.abs(E @ x - e), initial=0.0)),
        )
        if violation > feasibility_tolerance:
            raise QPInfeasible(f"Hard constraints violated by {violation:.3g} at best")
        return self.solve(H, c, A, np.maximum(b, A @ x), x, E, E @ x)
