"""Column selection by nuclear maximization for SPSD kernels, CUR and inverse Laplacians."""

__version__ = "0.1.0"

from .select import SelectionResult, diagonal_max, diagonal_sample, nuclear_max, select, uniform_sample
from .sketch import nuclear_max_matrix_free
from .laplacian import (RescaledLaplacian, laplacian_select, make_laplacian, nuclear_max_laplacian_exact,
                        nuclear_max_laplacian_matrix_free)
from .cur import cur_decompose
from .sympoly import dpp_expectation, elem_sym

__all__ = [
    "SelectionResult", "select", "nuclear_max", "diagonal_max", "diagonal_sample", "uniform_sample",
    "nuclear_max_matrix_free", "RescaledLaplacian", "make_laplacian", "laplacian_select",
    "nuclear_max_laplacian_exact", "nuclear_max_laplacian_matrix_free", "cur_decompose",
    "dpp_expectation", "elem_sym",
]
