import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_map(chi: np.ndarray, gens) -> np.ndarray:
    """E_jk = coord_j(sum_lm chi_lm L_l L_k L_m), built term by term."""
    L = gens.generators
    N = gens.dim
    E = np.zeros((N, N), dtype=complex)
    for k in range(N):
        out = np.zeros_like(L[0])
        for l in range(N):
            for m in range(N):
                out = out + chi[l, m] * L[l] @ L[k] @ L[m]
        E[:, k] = gens.coordinates(out)
    return E


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
