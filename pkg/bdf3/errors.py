"""Exception hierarchy for the BDF3 toolkit.

Every error raised on purpose by the library derives from ``Bdf3Error``.
Each class carries the process exit status the CLI returns for it, so
``main`` can hand them back as-is.

Bdf3Error     (2)  – generic usage problem.
MeshError     (2)  – invalid mesh parameters or step index.
KernelError   (2)  – invalid coefficient arguments, root not bracketed.
GridError     (2)  – Fourier grid size or field shape is not usable.
EigenError    (1)  – Jacobi sweeps did not converge.
SolverError   (1)  – the per-mode implicit solve is not well posed.
CheckFailure  (1)  – an acceptance check (``--check``) was violated.
"""

# ── exit codes ───────────────────────────────────────────────────────────────

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


# ── base ─────────────────────────────────────────────────────────────────────


class Bdf3Error(Exception):
    """Base class; ``exit_code`` is what the CLI exits with."""

    exit_code: int = EXIT_USAGE

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


# ── input validation ─────────────────────────────────────────────────────────


class MeshError(Bdf3Error, ValueError):
    """Mesh parameters are out of range or a step index is undefined."""


class KernelError(Bdf3Error, ValueError):
    """Coefficient-level arguments are invalid or a root is not bracketed."""


class GridError(Bdf3Error, ValueError):
    """The Fourier grid is not a power of two >= 8, or a field has the wrong shape."""


# ── numerical failures ───────────────────────────────────────────────────────


class EigenError(Bdf3Error, ArithmeticError):
    """The Jacobi eigen-solver ran out of sweeps."""

    exit_code = EXIT_CHECK_FAILED


class SolverError(Bdf3Error, ArithmeticError):
    """A time step cannot be solved (nonpositive multiplier)."""

    exit_code = EXIT_CHECK_FAILED


class CheckFailure(Bdf3Error):
    """An acceptance check requested with ``--check`` failed."""

    exit_code = EXIT_CHECK_FAILED
