"""Exact Gauss-Jordan elimination over the rationals (tiny systems only)."""
from __future__ import annotations

from fractions import Fraction

from .errors import VerificationError


def solve(A, B):
    """Solve ``A X = B`` exactly; ``B`` is a matrix (list of rows)."""
    n = len(A)
    M = [[Fraction(x) for x in A[i]] + [Fraction(x) for x in B[i]] for i in range(n)]
    width = len(M[0])
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise VerificationError("singular matrix in exact solve")
        M[col], M[pivot] = M[pivot], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [x - factor * y for x, y in zip(M[r], M[col])]
    return [row[n:width] for row in M]


def det(A) -> Fraction:
    n = len(A)
    M = [[Fraction(x) for x in row] for row in A]
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            M[col], M[pivot] = M[pivot], M[col]
            result = -result
        result *= M[col][col]
        for r in range(col + 1, n):
            factor = M[r][col] / M[col][col]
            if factor:
                M[r] = [x - factor * y for x, y in zip(M[r], M[col])]
    return result


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]
