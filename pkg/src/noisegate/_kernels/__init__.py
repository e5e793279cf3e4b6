"""Hot kernels with a compiled core and a pure fallback.

The Cython extension is optional; when it is missing (no compiler at install
time) the numpy/Python implementations are used with identical results.
"""

try:
    from noisegate._kernels._speedups import levenshtein, sliding_median

    BACKEND = "compiled"
except ImportError:  # extension not built
    from noisegate._kernels.pure import levenshtein, sliding_median

    BACKEND = "pure"

__all__ = ["BACKEND", "levenshtein", "sliding_median"]
