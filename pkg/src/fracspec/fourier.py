"""Fourier analysis and synthesis on the shifted nodes.

Coefficients are stored in natural mode order, index ``k + N`` for
``k = -N..N-1``, under the synthesis convention

    u(s) = sum_k c(k) exp(iks).

The half-node offset of the grid shows up as the per-mode phase
``exp(-ik pi / (2N))`` applied after an ordinary unshifted FFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

__all__ = [
    "MACHINE_EPS",
    "FourierField",
    "forward_transform",
    "inverse_transform",
    "evaluate_at",
    "clean_spectrum",
    "diff_couplings",
    "apply_diff",
    "diff_matrix",
]

MACHINE_EPS = 2.2204e-16


@dataclass(frozen=True)
class FourierField:
    """``2N`` Fourier coefficients on the shifted grid.

    For real fields the coefficients are Hermitian, ``c(-k) = conj(c(k))``,
    ``c(0)`` is real and the unpaired Nyquist mode ``c(-N)`` is zero.
    """

    coeffs: np.ndarray
    N: int
    is_real: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.N,):
            raise ValueError(f"expected {2 * self.N} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N)

    def mode(self, k: int) -> complex:
        return self.coeffs[k + self.N]

    def __add__(self, other):
        return FourierField(self.coeffs + other.coeffs, self.N, self.is_real and other.is_real)

    def __sub__(self, other):
        return FourierField(self.coeffs - other.coeffs, self.N, self.is_real and other.is_real)

    def __mul__(self, scalar):
        real = self.is_real and np.isrealobj(scalar)
        return FourierField(self.coeffs * scalar, self.N, real)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, N: int) -> "FourierField":
        return cls(np.zeros(2 * N, dtype=complex), N, True)

    @classmethod
    def from_modes(cls, modes: dict, N: int, is_real: bool | None = None) -> "FourierField":
        """Build a field from a ``{k: c(k)}`` mapping."""
        c = np.zeros(2 * N, dtype=complex)
        for k, value in modes.items():
            if not -N <= k < N:
                raise ValueError(f"mode {k} outside [-{N}, {N - 1}]")
            c[k + N] = value
        if is_real is None:
            is_real = _is_hermitian(c, N)
        return cls(c, N, is_real)


def _is_hermitian(c: np.ndarray, N: int) -> bool:
    pos = c[N + 1 :]
    neg = c[1:N][::-1]
    return bool(c[0] == 0 and c[N].imag == 0 and np.array_equal(pos, np.conj(neg)))


def _phase(N: int) -> np.ndarray:
    k = np.arange(-N, N)
    return np.exp(-1j * k * np.pi / (2 * N))


def forward_transform(samples, N: int | None = None, clean: bool = True,
                      clean_factor: float = MACHINE_EPS, relative: bool = True) -> FourierField:
    """Coefficients of the ``2N`` nodal values ``samples``.

    Real samples give a real field: only the non-negative modes are
    computed and the negative ones are filled in by conjugation, so the
    Hermitian symmetry holds exactly.
    """
    u = np.asarray(samples)
    if u.ndim != 1 or u.size % 2:
        raise ValueError(f"expected an even-length 1-D sample vector, got shape {u.shape}")
    if N is None:
        N = u.size // 2
    elif u.size != 2 * N:
        raise ValueError(f"expected {2 * N} samples, got {u.size}")
    phase = _phase(N)
    if np.isrealobj(u):
        half = np.fft.rfft(u.astype(float))[:N] / (2 * N) * phase[N:]
        half[0] = half[0].real
        c = np.empty(2 * N, dtype=complex)
        c[N:] = half
        c[1:N] = np.conj(half[1:][::-1])
        c[0] = 0.0
        field = FourierField(c, N, True)
    else:
        c = np.fft.fftshift(np.fft.fft(u)) / (2 * N) * phase
        field = FourierField(c, N, False)
    if clean:
        field = clean_spectrum(field, clean_factor, relative)
    return field


def inverse_transform(field: FourierField) -> np.ndarray:
    """Nodal values at ``s_j``, ``j = 0..2N-1``; real for real fields."""
    N = field.N
    shifted = field.coeffs * np.conj(_phase(N))
    if field.is_real:
        half = np.zeros(N + 1, dtype=complex)
        half[:N] = shifted[N:]
        return np.fft.irfft(half, n=2 * N) * (2 * N)
    return np.fft.ifft(np.fft.ifftshift(shifted)) * (2 * N)


def evaluate_at(field: FourierField, s) -> np.ndarray | complex:
    """Evaluate the series at arbitrary ``s`` by direct summation."""
    s_arr = np.asarray(s, dtype=float)
    values = np.exp(1j * np.multiply.outer(s_arr, field.modes)) @ field.coeffs
    if s_arr.ndim == 0:
        return complex(values)
    return values


def clean_spectrum(field: FourierField, factor: float = MACHINE_EPS,
                   relative: bool = True) -> FourierField:
    """Zero the modes whose modulus is below the cleaning threshold.

    With ``relative=True`` the threshold is ``factor * max|c|``; otherwise it
    is ``factor`` itself.
    """
    mags = np.abs(field.coeffs)
    threshold = factor * mags.max() if relative else factor
    small = mags < threshold
    if not small.any():
        return field
    c = field.coeffs.copy()
    c[small] = 0.0
    return FourierField(c, field.N, field.is_real)


def diff_couplings(order: int, k: np.ndarray, L: float) -> dict[int, np.ndarray]:
    """Weights carrying mode ``k`` of ``u`` to mode ``k + offset`` of ``d^n v / dx^n``."""
    k = np.asarray(k, dtype=float)
    if order == 1:
        return {
            2: 1j * k / (4 * L),
            0: -1j * k / (2 * L),
            -2: 1j * k / (4 * L),
        }
    if order == 2:
        L2 = L * L
        return {
            4: -(k**2 + 2 * k) / (16 * L2) + 0j,
            2: (k**2 + k) / (4 * L2) + 0j,
            0: -3 * k**2 / (8 * L2) + 0j,
            -2: (k**2 - k) / (4 * L2) + 0j,
            -4: -(k**2 - 2 * k) / (16 * L2) + 0j,
        }
    if order == 3:
        L3 = L**3
        k2, k3 = k**2, k**3
        return {
            6: -1j * (k3 + 6 * k2 + 8 * k) / (64 * L3),
            4: 1j * (3 * k3 + 12 * k2 + 12 * k) / (32 * L3),
            2: -1j * (15 * k3 + 30 * k2 + 24 * k) / (64 * L3),
            0: 1j * (5 * k3 + 4 * k) / (16 * L3),
            -2: -1j * (15 * k3 - 30 * k2 + 24 * k) / (64 * L3),
            -4: 1j * (3 * k3 - 12 * k2 + 12 * k) / (32 * L3),
            -6: -1j * (k3 - 6 * k2 + 8 * k) / (64 * L3),
        }
    raise ValueError(f"differentiation order must be 1, 2 or 3, got {order!r}")


def apply_diff(field: FourierField, order: int, L: float) -> FourierField:
    """Coefficients of the ``order``-th x-derivative, O(N).

    Couplings landing outside ``[-N, N-1]`` are dropped.  For real fields the
    unpaired ``-N`` output mode is dropped as well.
    """
    N = field.N
    c = field.coeffs
    out = np.zeros(2 * N, dtype=complex)
    for offset, weight in diff_couplings(order, field.modes, L).items():
        term = weight * c
        if offset > 0:
            out[offset:] += term[:-offset]
        elif offset < 0:
            out[:offset] += term[-offset:]
        else:
            out += term
    if field.is_real:
        out[0] = 0.0
    return FourierField(out, N, field.is_real)


def diff_matrix(order: int, N: int, L: float, drop_nyquist: bool = True) -> sparse.csr_matrix:
    """Sparse matrix of ``apply_diff`` acting on natural-order coefficients."""
    k = np.arange(-N, N)
    rows, cols, vals = [], [], []
    for offset, weight in diff_couplings(order, k, L).items():
        src = np.arange(2 * N)
        dst = src + offset
        keep = (dst >= 0) & (dst < 2 * N)
        rows.append(dst[keep])
        cols.append(src[keep])
        vals.append(weight[keep])
    D = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * N, 2 * N),
    ).tocsr()
    if drop_nyquist:
        D = D.tolil()
        D[0, :] = 0
        D = D.tocsr()
        D.eliminate_zeros()
    return D
