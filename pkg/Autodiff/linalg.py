from __future__ import annotations

from logging import WARNING

import numpy as np
from scipy.linalg import solve_triangular as _scipy_solve_triangular

from Common import DimensionError, NumericalError, log

from .tape import OpKind
from .tensor import Function, Tensor

__all__ = ("JITTER_LADDER", "cholesky", "solve_triangular")

JITTER_LADDER: tuple[float, ...] = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

_reported_jitters: set[float] = set()


def _solve_batched(lower: np.ndarray, rhs: np.ndarray, /, *, transpose: bool) -> np.ndarray:
    batch = np.broadcast_shapes(lower.shape[:-2], rhs.shape[:-2])
    lower = np.broadcast_to(lower, batch + lower.shape[-2:]).reshape(-1, *lower.shape[-2:])
    flat_rhs = np.broadcast_to(rhs, batch + rhs.shape[-2:]).reshape(-1, *rhs.shape[-2:])

    out = np.empty(flat_rhs.shape)
    for i in range(out.shape[0]):
        out[i] = _scipy_solve_triangular(
            lower[i], flat_rhs[i], lower=True, trans=1 if transpose else 0, check_finite=False
        )

    return out.reshape(batch + rhs.shape[-2:])


def _phi(matrix: np.ndarray, /) -> np.ndarray:
    # Lower triangle with the diagonal halved, mirrored into a symmetric matrix
    lower = np.tril(matrix)
    return 0.5 * (lower + np.swapaxes(np.tril(matrix, -1), -1, -2))


class Cholesky(Function):
    kind = OpKind.Cholesky

    def forward(self, a):
        if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
            raise DimensionError(self.kind, a.shape)

        eye = np.eye(a.shape[-1])
        self.jitter = 0.0

        try:
            self.factor = np.linalg.cholesky(a)
            return self.factor
        except np.linalg.LinAlgError:
            pass

        for jitter in JITTER_LADDER:
            try:
                self.factor = np.linalg.cholesky(a + jitter * eye)
            except np.linalg.LinAlgError:
                continue

            self.jitter = jitter
            if jitter not in _reported_jitters:
                _reported_jitters.add(jitter)
                log(f"Cholesky needed jitter {jitter:.0e} on the diagonal.", WARNING)
            return self.factor

        raise NumericalError("Cholesky factorisation failed", jitters=JITTER_LADDER)

    def backward(self, grad, /):
        factor = self.factor
        middle = _phi(np.matmul(np.swapaxes(factor, -1, -2), np.tril(grad)))

        # L⁻ᵀ · Φ · L⁻¹
        left = _solve_batched(factor, middle, transpose=True)
        out = _solve_batched(factor, np.swapaxes(left, -1, -2), transpose=True)
        out = np.swapaxes(out, -1, -2)
        return (0.5 * (out + np.swapaxes(out, -1, -2)),)


class SolveTriangular(Function):
    kind = OpKind.SolveTriangular

    def forward(self, lower, rhs, *, transpose: bool):
        if lower.ndim < 2 or rhs.ndim < 2 or lower.shape[-1] != lower.shape[-2]:
            raise DimensionError(self.kind, lower.shape, rhs.shape)
        if lower.shape[-1] != rhs.shape[-2]:
            raise DimensionError(self.kind, lower.shape, rhs.shape)

        self.lower, self.transpose = lower, transpose
        try:
            self.solution = _solve_batched(lower, rhs, transpose=transpose)
        except ValueError as error:
            raise DimensionError(self.kind, lower.shape, rhs.shape) from error

        self.rhs_shape = rhs.shape
        return self.solution

    def backward(self, grad, /):
        grad_rhs = _solve_batched(self.lower, grad, transpose=not self.transpose)

        solution_t = np.swapaxes(self.solution, -1, -2)
        if self.transpose:
            grad_lower = -np.matmul(self.solution, np.swapaxes(grad_rhs, -1, -2))
        else:
            grad_lower = -np.matmul(grad_rhs, solution_t)

        return (
            self.unbroadcast(np.tril(grad_lower), self.lower.shape),
            self.unbroadcast(grad_rhs, self.rhs_shape),
        )


def cholesky(a: Tensor, /) -> Tensor:
    """Lower Cholesky factor of a (batch of) symmetric positive definite matrices.

    On failure the factorisation is retried with jitter from `JITTER_LADDER` added to
    the diagonal; if every rung fails a `NumericalError` lists the ladder.
    """
    return Cholesky.apply(a)


def solve_triangular(lower: Tensor, rhs: Tensor, /, *, transpose: bool = False) -> Tensor:
    """Solves L·X = B (or Lᵀ·X = B with `transpose`) for lower-triangular L."""
    return SolveTriangular.apply(lower, rhs, transpose=transpose)
