import functools
from typing import Optional

import numpy as np

from bearing_pga.core.exceptions import NonFiniteError, ShapeMismatchError


def validate_array(ndim: Optional[int] = None, min_ndim: Optional[int] = None, method: bool = False):
    """
    Decorator que valida se o primeiro argumento da função (ou o primeiro após
    `self`, quando `method=True`) é um `numpy.ndarray` com a dimensionalidade
    pedida.
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            position = 1 if method else 0
            array = args[position]
            if not isinstance(array, np.ndarray):
                raise TypeError(f"{func.__name__}: a entrada deve ser um numpy.ndarray, recebido {type(array).__name__}.")
            if ndim is not None and array.ndim != ndim:
                raise ShapeMismatchError(f"{func.__name__}: esperado ndim={ndim}, recebido shape {array.shape}.")
            if min_ndim is not None and array.ndim < min_ndim:
                raise ShapeMismatchError(f"{func.__name__}: esperado ndim>={min_ndim}, recebido shape {array.shape}.")
            return func(*args, **kwargs)
        return wrapper
    return decorator


def ensure_finite(func):
    """Decorator que rejeita resultados com NaN/inf (arrays ou tuplas de arrays)."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        result = func(*args, **kwargs)
        outputs = result if isinstance(result, tuple) else (result,)
        for item in outputs:
            if isinstance(item, np.ndarray) and item.dtype.kind == 'f' and not np.all(np.isfinite(item)):
                raise NonFiniteError(f"{func.__name__}: valor não finito no resultado.")
        return result
    return wrapper
