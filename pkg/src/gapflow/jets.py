"""Second-order forward-mode jets over batches of points.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar field at
``N`` points at once: ``value`` has shape ``(N,)``, ``grad`` ``(N, d)`` and
``hess`` ``(N, d, d)``.  Every arithmetic rule builds the Hessian from terms
that are individually symmetric, so ``hess`` stays symmetric to the last bit.
A jet whose ``hess`` is ``None`` is first order; mixing orders yields first order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

Scalar = Union[float, int, np.ndarray]


def _outer_sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``a b^T + b a^T`` batched over the leading axis."""
    ab = a[:, :, None] * b[:, None, :]
    return ab + np.swapaxes(ab, 1, 2)


@dataclass(frozen=True)
class Jet2:
    value: np.ndarray
    grad: np.ndarray
    hess: Optional[np.ndarray]

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @property
    def size(self) -> int:
        return self.value.shape[0]

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, c: Scalar, n: int, d: int, order: int = 2) -> "Jet2":
        value = np.broadcast_to(np.asarray(c, dtype=float), (n,)).copy()
        return cls(value, np.zeros((n, d)), np.zeros((n, d, d)) if order == 2 else None)

    @classmethod
    def variable(cls, points: np.ndarray, i: int, order: int = 2) -> "Jet2":
        """Jet of the coordinate function ``x_i`` at ``points`` (shape (N, d))."""
        n, d = points.shape
        grad = np.zeros((n, d))
        grad[:, i] = 1.0
        return cls(points[:, i].astype(float), grad, np.zeros((n, d, d)) if order == 2 else None)

    # arithmetic -----------------------------------------------------------

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __add__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        hess = None if self.hess is None or other.hess is None else self.hess + other.hess
        return Jet2(self.value + other.value, self.grad + other.grad, hess)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            return Jet2(self.value - other, self.grad, self.hess)
        hess = None if self.hess is None or other.hess is None else self.hess - other.hess
        return Jet2(self.value - other.value, self.grad - other.grad, hess)

    def __rsub__(self, other) -> "Jet2":
        return (-self) + other

    def __mul__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            hess = None if self.hess is None else self.hess * c[..., None, None]
            return Jet2(self.value * c, self.grad * c[..., None], hess)
        a, b = self, other
        value = a.value * b.value
        grad = a.grad * b.value[:, None] + b.grad * a.value[:, None]
        if a.hess is None or b.hess is None:
            return Jet2(value, grad, None)
        hess = (
            a.hess * b.value[:, None, None]
            + b.hess * a.value[:, None, None]
            + _outer_sym(a.grad, b.grad)
        )
        return Jet2(value, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        if np.any(self.value == 0):
            raise ZeroDivisionError("jet division by a zero value")
        inv = 1.0 / self.value
        inv2 = inv * inv
        grad = -self.grad * inv2[:, None]
        if self.hess is None:
            return Jet2(inv, grad, None)
        gg = self.grad[:, :, None] * self.grad[:, None, :]
        hess = 2.0 * gg * (inv2 * inv)[:, None, None] - self.hess * inv2[:, None, None]
        return Jet2(inv, grad, hess)

    def __truediv__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0):
                raise ZeroDivisionError("jet division by zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet2":
        return self.reciprocal() * other

    def __pow__(self, n: int) -> "Jet2":
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jets support integer powers only")
        n = int(n)
        if n < 0:
            return (self ** (-n)).reciprocal()
        if n == 0:
            return Jet2.constant(1.0, self.size, self.dim, self.order)
        if n == 1:
            return self
        v = self.value
        d1 = n * v ** (n - 1)
        if self.hess is None:
            return Jet2(v**n, self.grad * d1[:, None], None)
        d2 = n * (n - 1) * v ** (n - 2)
        gg = self.grad[:, :, None] * self.grad[:, None, :]
        return Jet2(
            v**n,
            self.grad * d1[:, None],
            self.hess * d1[:, None, None] + gg * d2[:, None, None],
        )

    # slicing --------------------------------------------------------------

    def partial(self, i: int) -> np.ndarray:
        return self.grad[:, i]


def jet_arith(a: Jet2, b, op: str) -> Jet2:
    """Apply ``op`` in {add, sub, mul, div, pow} to two jets (``pow`` takes an int)."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return a**b
    raise ValueError(f"unknown jet operation {op!r}")


@dataclass(frozen=True)
class VecJet2:
    comps: tuple

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(self.comps))

    @classmethod
    def from_list(cls, comps: Sequence[Jet2]) -> "VecJet2":
        return cls(tuple(comps))

    @property
    def dim(self) -> int:
        return len(self.comps)

    @property
    def values(self) -> np.ndarray:
        """Velocity values, shape (N, d)."""
        return np.stack([c.value for c in self.comps], axis=-1)

    @property
    def jacobian(self) -> np.ndarray:
        """``J[n, i, j] = d v_i / d x_j``, shape (N, d, d)."""
        return np.stack([c.grad for c in self.comps], axis=1)

    @property
    def hessians(self) -> np.ndarray:
        """``H[n, i, j, k] = d^2 v_i / d x_j d x_k``, shape (N, d, d, d)."""
        return np.stack([c.hess for c in self.comps], axis=1)

    def __add__(self, other: "VecJet2") -> "VecJet2":
        return VecJet2(tuple(a + b for a, b in zip(self.comps, other.comps)))

    def scale(self, c: float) -> "VecJet2":
        return VecJet2(tuple(a * c for a in self.comps))

    def reflect(self, perm: Sequence[int]) -> "VecJet2":
        """Pull back by a coordinate permutation ``P``: returns ``P v(P x)`` data.

        The receiver must already be evaluated at the permuted points; this
        permutes components and derivative indices.
        """
        p = list(perm)
        comps = []
        for i in range(self.dim):
            c = self.comps[p[i]]
            hess = None if c.hess is None else c.hess[:, p][:, :, p]
            comps.append(Jet2(c.value, c.grad[:, p], hess))
        return VecJet2(tuple(comps))


def strain(v: VecJet2) -> np.ndarray:
    """Symmetric gradient ``(grad v + grad v^T) / 2``, shape (N, d, d)."""
    j = v.jacobian
    return 0.5 * (j + np.swapaxes(j, 1, 2))


def divergence(v: VecJet2) -> np.ndarray:
    return sum(c.grad[:, i] for i, c in enumerate(v.comps))


def laplacian(v: VecJet2) -> np.ndarray:
    """Componentwise Laplacian, shape (N, d)."""
    return np.stack([np.trace(c.hess, axis1=1, axis2=2) for c in v.comps], axis=-1)
