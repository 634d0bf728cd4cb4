"""Shared fixtures and dense reference operators built from explicit index loops."""

import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def voxels(shape):
    return list(itertools.product(*(range(n) for n in shape)))


def flat_index(shape, i, j, k):
    n1, n2, n3 = shape
    return (i % n1) * n2 * n3 + (j % n2) * n3 + (k % n3)


def unit(c):
    e = [0, 0, 0]
    e[c] = 1
    return e


def dense_grad(shape):
    """(3N, N) matrix of forward differences, component-planar rows."""
    n = int(np.prod(shape))
    G = np.zeros((3 * n, n))
    for c in range(3):
        for i, j, k in voxels(shape):
            row = c * n + flat_index(shape, i, j, k)
            di, dj, dk = unit(c)
            G[row, flat_index(shape, i + di, j + dj, k + dk)] += 1.0
            G[row, flat_index(shape, i, j, k)] -= 1.0
    return G


def dense_div(shape):
    """(N, 3N) matrix of backward differences."""
    n = int(np.prod(shape))
    D = np.zeros((n, 3 * n))
    for c in range(3):
        for i, j, k in voxels(shape):
            row = flat_index(shape, i, j, k)
            di, dj, dk = unit(c)
            D[row, c * n + flat_index(shape, i, j, k)] += 1.0
            D[row, c * n + flat_index(shape, i - di, j - dj, k - dk)] -= 1.0
    return D


def dense_shift_back(shape):
    n = int(np.prod(shape))
    S = np.zeros((3 * n, 3 * n))
    for c in range(3):
        for i, j, k in voxels(shape):
            di, dj, dk = unit(c)
            S[c * n + flat_index(shape, i, j, k), c * n + flat_index(shape, i - di, j - dj, k - dk)] = 1.0
    return S


def dense_A(shape):
    """(6N, 3N) matrix of the embedding v -> [v; S v] / sqrt(2)."""
    n = int(np.prod(shape))
    return np.vstack([np.eye(3 * n), dense_shift_back(shape)]) / np.sqrt(2.0)


def dense_gamma(shape):
    """Gamma = G (D G)^+ D with an explicitly pseudo-inverted Laplacian."""
    G = dense_grad(shape)
    D = dense_div(shape)
    return G @ np.linalg.pinv(D @ G) @ D


# acceptance report: one line per criterion, repeated in the terminal summary

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``criterion(number, title, ok, detail)`` records and prints a pass/fail line."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda item: item[0]):
            terminalreporter.write_line(line)
