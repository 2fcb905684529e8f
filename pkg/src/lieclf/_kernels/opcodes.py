"""Opcode and status numbering shared by both kernel backends.

The Cython source repeats these values in a ``cdef enum``; the parity tests
check that the two agree.
"""
CONST = 0
VAR = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
POW = 6
NEG = 7
SIN = 8
COS = 9
EXP = 10
SQRT = 11
ABS = 12
MIN = 13
MAX = 14
SIGN = 15
SELECT = 16

OK = 0
ERR_KINK = 1
ERR_NONFINITE = 2
ERR_EMPTY = 3
