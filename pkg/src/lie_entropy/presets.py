"""Named linear systems with closed-form f0, b(u), f0^k, f0^-1 and analytic differentials."""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import ValidationError
from .groups import AffPlusGroup, EuclideanGroup, HeisenbergGroup, TorusGroup, wrap_unit
from .system import ControlRange, LinearSystem

logger = logging.getLogger(__name__)

CAT_MATRIX = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_INVERSE = np.array([[1.0, -1.0], [-1.0, 2.0]])


def euclidean_system(
    A,
    B,
    control_lower=-1.0,
    control_upper=1.0,
    delta: float = 0.25,
    name: str = "euclidean",
) -> LinearSystem:
    """x_{k+1} = A x_k + B u_k on R^d."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim < 2:
        B = B.reshape(A.shape[0], -1)
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise ValidationError(f"Incompatible shapes A {A.shape}, B {B.shape}")
    if abs(np.linalg.det(A)) <= 1e-12:
        raise ValidationError("A must be invertible for f0 to be an automorphism")
    A_inv = np.linalg.inv(A)
    control = ControlRange(np.broadcast_to(control_lower, B.shape[1]), np.broadcast_to(control_upper, B.shape[1]), delta)

    def f0(x: np.ndarray) -> np.ndarray:
        return x @ A.T

    def b(u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) @ B.T

    def power(x: np.ndarray, k: int) -> np.ndarray:
        return x @ np.linalg.matrix_power(A, k).T

    return LinearSystem(
        name=name,
        group=EuclideanGroup(A.shape[0]),
        f0=f0,
        b=b,
        control=control,
        f0_inverse=lambda x: x @ A_inv.T,
        f0_power_closed=power,
        differential=A.copy(),
        description="Linear system x' = A x + B u on Euclidean space",
        formulas={
            "f(x, u)": "A x + B u",
            "phi(k, x, u)": "A^k x + sum_j A^(k-1-j) B u_j",
            "A": str(A.tolist()),
            "B": str(B.tolist()),
        },
    )


def euclid_ab(control_lower=-1.0, control_upper=1.0, delta: float = 2.0 / 15.0) -> LinearSystem:
    """Scalar benchmark x' = 2x + u."""
    system = euclidean_system([[2.0]], [[1.0]], control_lower, control_upper, delta, name="euclid_ab")
    system.description = "Scalar Euclidean system x' = 2x + u, one unstable eigenvalue 2"
    return system


def aff_example(control_lower=-1.0, control_upper=1.0, delta: float = 0.25) -> LinearSystem:
    """f((x, y), u) = (x e^u, y e^(2+u) + u) on the connected affine group."""
    e2 = np.exp(2.0)

    def f0(g: np.ndarray) -> np.ndarray:
        return np.stack([g[..., 0], g[..., 1] * e2], axis=-1)

    def b(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)[..., 0]
        return np.stack([np.exp(u), u], axis=-1)

    def power(g: np.ndarray, k: int) -> np.ndarray:
        return np.stack([g[..., 0], g[..., 1] * np.exp(2.0 * k)], axis=-1)

    def inverse(g: np.ndarray) -> np.ndarray:
        return np.stack([g[..., 0], g[..., 1] / e2], axis=-1)

    return LinearSystem(
        name="aff_example",
        group=AffPlusGroup(),
        f0=f0,
        b=b,
        control=ControlRange(control_lower, control_upper, delta),
        f0_inverse=inverse,
        f0_power_closed=power,
        differential=np.diag([1.0, e2]),
        description="Affine group system with f0(x, y) = (x, y e^2)",
        formulas={
            "f((x, y), u)": "(x e^u, y e^(2+u) + u)",
            "f0^k(x, y)": "(x, y e^(2k))",
            "b(u)": "(e^u, u)",
            "(df0)_e": "diag(1, e^2)",
        },
    )


def heisenberg_example(control_lower=-0.5, control_upper=0.5, delta: float = 0.5) -> LinearSystem:
    """Heisenberg system with f0(x) = (x1 + x2 + x2^2/2, x2, x2 + x3)."""

    def f0(g: np.ndarray) -> np.ndarray:
        x1, x2, x3 = g[..., 0], g[..., 1], g[..., 2]
        return np.stack([x1 + x2 + 0.5 * x2 * x2, x2, x2 + x3], axis=-1)

    def b(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)[..., 0]
        return np.stack([-u / 2.0 - u * u / 3.0, u, -u / 2.0], axis=-1)

    def power(g: np.ndarray, k: int) -> np.ndarray:
        x1, x2, x3 = g[..., 0], g[..., 1], g[..., 2]
        return np.stack([x1 + k * x2 + 0.5 * k * x2 * x2, x2, k * x2 + x3], axis=-1)

    def inverse(g: np.ndarray) -> np.ndarray:
        # the closed form of f0^k is valid for every integer k
        return power(g, -1)

    return LinearSystem(
        name="heisenberg_example",
        group=HeisenbergGroup(),
        f0=f0,
        b=b,
        control=ControlRange(control_lower, control_upper, delta),
        f0_inverse=inverse,
        f0_power_closed=power,
        differential=np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 1.0]]),
        description="Heisenberg group system whose differential has the single eigenvalue 1",
        formulas={
            "f0(x)": "(x1 + x2 + x2^2/2, x2, x2 + x3)",
            "f_u(x)": "(x1 + x2 + x2^2/2 + u x2 + u x3 - u/2 - u^2/3, x2 + u, x2 + x3 - u/2)",
            "f0^k(x)": "(x1 + k x2 + (k/2) x2^2, x2, k x2 + x3)",
            "(df0)_e": "[[1, 1, 0], [0, 1, 0], [0, 1, 1]]",
        },
    )


def torus_cat(control_lower=0.0, control_upper=0.0, delta: float = 1.0) -> LinearSystem:
    """Uncontrolled cat map x -> [[2, 1], [1, 1]] x mod 1."""

    def f0(g: np.ndarray) -> np.ndarray:
        return wrap_unit(g @ CAT_MATRIX.T)

    def b(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.zeros(u.shape[:-1] + (2,))

    def power(g: np.ndarray, k: int) -> np.ndarray:
        # reduce after each step so entries never leave [0, 1)
        out = np.array(g, dtype=float)
        for _ in range(k):
            out = f0(out)
        return out

    return LinearSystem(
        name="torus_cat",
        group=TorusGroup(),
        f0=f0,
        b=b,
        control=ControlRange(control_lower, control_upper, delta),
        f0_inverse=lambda g: wrap_unit(g @ CAT_INVERSE.T),
        f0_power_closed=power,
        differential=CAT_MATRIX.copy(),
        description="Hyperbolic toral automorphism, automorphism only (U = {0})",
        formulas={
            "f0(x)": "[[2, 1], [1, 1]] x mod Z^2",
            "eigenvalues": "(3 +- sqrt(5)) / 2",
            "(df0)_e": "[[2, 1], [1, 1]]",
        },
    )


_PRESETS: Dict[str, Callable[..., LinearSystem]] = {
    "euclid_ab": euclid_ab,
    "aff_example": aff_example,
    "heisenberg_example": heisenberg_example,
    "torus_cat": torus_cat,
}


def list_presets() -> List[str]:
    """Names of the built-in systems."""
    return sorted(_PRESETS)


def get_preset(name: str, control_lower=None, control_upper=None, delta: Optional[float] = None) -> LinearSystem:
    """Build a preset system, optionally overriding its control box and step."""
    if name not in _PRESETS:
        raise ValidationError(f"Unknown preset: {name}. Available presets: {', '.join(list_presets())}")
    kwargs = {}
    if control_lower is not None:
        kwargs["control_lower"] = control_lower
    if control_upper is not None:
        kwargs["control_upper"] = control_upper
    if delta is not None:
        kwargs["delta"] = delta
    system = _PRESETS[name](**kwargs)
    logger.debug(f"Built preset {name} on {system.group.name} with {system.control.size} letters")
    return system
