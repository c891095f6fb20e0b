#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PyBLGCN Exceptions
"""

###############################################################################


class BLGCNError(Exception):
    """Base class of all errors raised by PyBLGCN"""


class ConfigError(BLGCNError, ValueError):
    """Invalid or unknown configuration"""


class ContractError(BLGCNError, ValueError):
    """A documented precondition was violated"""


class DimensionError(BLGCNError, ValueError):
    """Operand shapes are incompatible"""


class NumericalError(BLGCNError, ArithmeticError):
    """Non-finite values or a diverging optimisation"""


class DataFormatError(BLGCNError, ValueError):
    """Malformed input file

    Parameters
    ----------
    message : str
        Description of the problem
    path : str or Path, optional
        File in which the problem was found
    offset : int, optional
        Byte offset (binary files) or line number (text files)
    """
    def __init__(self, message: str, path=None, offset: int = None):
        self.path = path
        self.offset = offset
        details = []
        if path is not None:
            details.append(f"file '{path}'")
        if offset is not None:
            details.append(f"offset {offset}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)

###############################################################################
