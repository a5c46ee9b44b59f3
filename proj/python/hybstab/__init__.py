"""Python bindings for the hybrid stabilization toolkit."""

try:
    from ._hybstab import (
        derived_constants,
        golden_certificate,
        k1_window,
        phi_g,
        simulate,
        verify_golden,
    )
except ImportError:  # in-tree build: extension on sys.path, not in the package
    from _hybstab import (
        derived_constants,
        golden_certificate,
        k1_window,
        phi_g,
        simulate,
        verify_golden,
    )

__all__ = [
    "derived_constants",
    "golden_certificate",
    "k1_window",
    "phi_g",
    "simulate",
    "verify_golden",
]
