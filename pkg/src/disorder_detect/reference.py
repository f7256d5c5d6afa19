"""Small fixed models used by the test-suite, the acceptance run and the CLI demos."""

from .model import DisorderModel, make_model

# two-state example whose windows are easy to check by hand
EXAMPLE_P0 = [[0.9, 0.1], [0.2, 0.8]]
EXAMPLE_P1 = [[0.5, 0.5], [0.5, 0.5]]

REF2_P0 = [[0.9, 0.1], [0.2, 0.8]]
REF2_P1 = [[0.2, 0.8], [0.1, 0.9]]

REF3_P0 = [[0.7, 0.2, 0.1], [0.3, 0.5, 0.2], [0.2, 0.3, 0.5]]
REF3_P1 = [[0.2, 0.3, 0.5], [0.1, 0.3, 0.6], [0.1, 0.2, 0.7]]

# pre-change chain cannot leave state 0; any exit proves the change
SPARSE_P0 = [[1.0, 0.0, 0.0], [0.3, 0.7, 0.0], [0.2, 0.3, 0.5]]
SPARSE_P1 = [[0.4, 0.4, 0.2], [0.1, 0.5, 0.4], [0.0, 0.2, 0.8]]


def example_model(pi=0.0, p=0.5, d1=1, d2=1) -> DisorderModel:
    return make_model(pi, p, EXAMPLE_P0, EXAMPLE_P1, d1, d2)


def reference_2state(pi=0.0, p=0.5, d1=1, d2=1) -> DisorderModel:
    """Informative two-state reference (default: pi=0, p=0.5, d1=d2=1)."""
    return make_model(pi, p, REF2_P0, REF2_P1, d1, d2)


def reference_3state(pi=0.2, p=0.9, d1=1, d2=2) -> DisorderModel:
    """Three-state reference with an atom at zero and an asymmetric window."""
    return make_model(pi, p, REF3_P0, REF3_P1, d1, d2)


def sparse_model(pi=0.1, p=0.6, d1=1, d2=1) -> DisorderModel:
    return make_model(pi, p, SPARSE_P0, SPARSE_P1, d1, d2)


def no_information_model(pi=0.0, p=0.5, d1=1, d2=1, n_states=2) -> DisorderModel:
    """Identical pre- and post-change kernels."""
    if n_states == 2:
        P = [[0.7, 0.3], [0.4, 0.6]]
    else:
        P = [[0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.3, 0.3, 0.4]]
    return make_model(pi, p, P, P, d1, d2)


def reference_models() -> dict[str, DisorderModel]:
    return {"ref2": reference_2state(), "ref3": reference_3state()}
