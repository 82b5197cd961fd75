"""Independent reference implementations used only by the tests.

None of these share code paths with the package: the least-squares oracle
forms the normal equations and eliminates with exact fractions, the
dominance oracle is the quadratic definition.
"""
from fractions import Fraction


def normal_equations_solve(X, y):
    """Least squares through X^T X c = X^T y with exact rational elimination."""
    rows = [[Fraction(float(v)) for v in row] for row in X]
    rhs = [Fraction(float(v)) for v in y]
    k = len(rows[0])
    A = [[sum(r[a] * r[b] for r in rows) for b in range(k)] for a in range(k)]
    b = [sum(r[a] * t for r, t in zip(rows, rhs)) for a in range(k)]
    for col in range(k):
        piv = next(r for r in range(col, k) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(k):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * p for x, p in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return [float(b[i] / A[i][i]) for i in range(k)]


def dominates(a, b):
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def brute_force_front(points):
    return sorted(
        i for i, p in enumerate(points)
        if not any(dominates(q, p) for j, q in enumerate(points) if j != i)
    )


def linear_fixed_point(q_setpoint, coeffs, q0, dT):
    """Exact solution of q = q_sp - sum(A q0 dT + B q dT)/1000 (linear in q)."""
    fixed = sum(a * q0 * t for (a, _), t in zip(coeffs, dT))
    slope = sum(b * t for (_, b), t in zip(coeffs, dT))
    return (q_setpoint - fixed / 1000.0) / (1.0 + slope / 1000.0)
