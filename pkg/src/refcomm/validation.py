"""Input-validation helpers and a minimal estimator-parameter mixin.

The helpers normalize array inputs to float32 (the package-wide working
precision) while leaving float64 untouched, so gradient checks can run the
same code paths in double precision.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import NotFittedError, ShapeError


def as_float_array(x, name: str = "array") -> np.ndarray:
    """C-contiguous float array; float64 is preserved, everything else -> float32."""
    arr = np.asarray(x)
    if arr.dtype != np.float64:
        arr = arr.astype(np.float32, copy=False)
    return np.ascontiguousarray(arr)


def check_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr


def check_vector(x, name: str = "vector") -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {arr.shape}")
    return arr


def check_same_length(u: np.ndarray, v: np.ndarray, what: str = "vectors"):
    if u.shape != v.shape:
        raise ShapeError(f"{what} must have equal shapes, got {u.shape} vs {v.shape}")


def check_fitted(estimator, attribute: str):
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


class ParamsMixin:
    """get_params/set_params over __init__ keywords, sklearn-style.

    Lets trainers and probes participate in generic parameter sweeps without
    pulling in scikit-learn as a dependency.
    """

    @classmethod
    def _param_names(cls):
        # walk the MRO so subclasses forwarding **kwargs inherit parent params
        names = []
        for klass in cls.__mro__:
            if "__init__" not in vars(klass):
                continue
            sig = inspect.signature(klass.__init__)
            has_kwargs = False
            for p in sig.parameters.values():
                if p.kind is p.VAR_KEYWORD:
                    has_kwargs = True
                elif p.name != "self" and p.kind is not p.VAR_POSITIONAL:
                    if p.name not in names:
                        names.append(p.name)
            if not has_kwargs:
                break
        return names

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, key, value)
        return self
