"""Splitting the interval at an interior point x0: half-interval m-functions,
the 2x2 matrix M(z) built from them and its normalised density R(lambda)."""

import math
from dataclasses import dataclass

import numpy as np

from . import ivp
from .boundary import Separated
from .green import SINGULAR_REL
from .errors import (AtEigenvalue, DenominatorVanishes, PreconditionError,
                     TraceImaginaryTooSmall)

MULT_TWO_THRESHOLD = 0.05


def _check(problem, x0):
    if not problem.regular:
        raise PreconditionError("the M-matrix is implemented for regular problems only")
    if not problem.a < x0 < problem.b:
        raise PreconditionError(f"x0 = {x0} must lie inside ({problem.a}, {problem.b})")


def _pair_at(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]], dtype=complex)


def _bc(state_u, state_u1, angle):
    return state_u * math.cos(angle) - state_u1 * math.sin(angle)


def half_ms(problem, x0, phi_alpha, bc, zs):
    """(m_plus, m_minus) arrays for many z.

    theta, phi are normalised at x0 with angle ``phi_alpha``; psi_+ = theta +
    m_+ phi obeys the condition of ``bc`` at b and psi_- = theta - m_- phi the
    one at a.
    """
    _check(problem, x0)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    n = len(zs)
    Y0 = np.tile(_pair_at(phi_alpha), n)
    zz = np.repeat(zs, 2)
    Yb = ivp.propagate(problem, zz, Y0, x0, problem.b)
    Ya = ivp.propagate(problem, zz, Y0, x0, problem.a)
    bth = _bc(Yb[0, 0::2], Yb[1, 0::2], bc.phi_b)
    bph = _bc(Yb[0, 1::2], Yb[1, 1::2], bc.phi_b)
    ath = _bc(Ya[0, 0::2], Ya[1, 0::2], bc.phi_a)
    aph = _bc(Ya[0, 1::2], Ya[1, 1::2], bc.phi_a)
    scale_b = np.maximum(np.abs(Yb[:, 1::2]).max(axis=0), 1e-300)
    scale_a = np.maximum(np.abs(Ya[:, 1::2]).max(axis=0), 1e-300)
    if np.any(np.abs(bph) <= SINGULAR_REL * scale_b) or np.any(np.abs(aph) <= SINGULAR_REL * scale_a):
        raise AtEigenvalue("z is an eigenvalue of a half-interval operator")
    return -bth / bph, ath / aph


def half_m(problem, x0, phi_alpha, side, outer_angle, z):
    """m_+ (side '+', condition angle at b) or m_- (side '-', angle at a)."""
    if side not in ("+", "-"):
        raise PreconditionError("side must be '+' or '-'")
    bc = Separated(outer_angle, outer_angle)
    mp, mm = half_ms(problem, x0, phi_alpha, bc, [z])
    return complex(mp[0] if side == "+" else mm[0])


def assemble(mp, mm):
    """M from m_+ and m_- (arrays broadcast); shape (..., 2, 2)."""
    mp, mm = np.broadcast_arrays(np.asarray(mp, dtype=complex), np.asarray(mm, dtype=complex))
    s = mp + mm
    if np.any(np.abs(s) <= SINGULAR_REL * np.maximum(np.abs(mp) + np.abs(mm), 1e-300)):
        raise DenominatorVanishes("m_+ + m_- vanishes: z is (close to) an eigenvalue")
    off = 0.5 * (mm - mp) / s
    M = np.empty(mp.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = -1.0 / s
    M[..., 0, 1] = off
    M[..., 1, 0] = off
    M[..., 1, 1] = mm * mp / s
    return M


@dataclass
class MMatrix:
    z: complex
    x0: float
    phi_alpha: float
    M: np.ndarray
    m_plus: complex
    m_minus: complex

    def det(self):
        return complex(np.linalg.det(self.M))

    def trace_formula(self):
        """(m_- m_+ - 1) / (m_+ + m_-), equal to tr M."""
        return (self.m_minus * self.m_plus - 1) / (self.m_plus + self.m_minus)

    def imaginary_part(self):
        """(M - M*) / (2i Im z) (psd for Im z > 0)."""
        return (self.M - self.M.conj().T) / (2j * self.z.imag)


def m_matrix(problem, x0, phi_alpha, bc, z):
    mp, mm = half_ms(problem, x0, phi_alpha, bc, [z])
    M = assemble(mp[0], mm[0])
    return MMatrix(complex(z), float(x0), float(phi_alpha), M, complex(mp[0]), complex(mm[0]))


def m_matrices(problem, x0, phi_alpha, bc, zs):
    """M(z) for many z: array (n, 2, 2)."""
    mp, mm = half_ms(problem, x0, phi_alpha, bc, zs)
    return assemble(mp, mm)


@dataclass
class DensityMatrix:
    lam: float
    eps: float
    R: np.ndarray
    detR: float

    @property
    def classification(self):
        return "two" if self.detR > MULT_TWO_THRESHOLD else "one"


def density_matrix(problem, x0, phi_alpha, bc, lam, eps):
    """R(lambda) = Im M(lambda + i eps) / Im tr M(lambda + i eps)."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    M = m_matrices(problem, x0, phi_alpha, bc, [complex(lam, eps)])[0]
    Im = M.imag
    tr = Im[0, 0] + Im[1, 1]
    # off the spectrum Im M ~ eps M'(lambda) and R is a meaningless ratio
    if not tr > math.sqrt(eps) * (1.0 + np.abs(M.real).max()):
        raise TraceImaginaryTooSmall(f"Im tr M = {tr:.3e} at lambda = {lam}: no spectrum nearby")
    R = Im / tr
    return DensityMatrix(float(lam), float(eps), R, float(np.linalg.det(R)))


def classify_multiplicity(problem, x0, phi_alpha, bc, lam, eps=1e-4):
    """'two' only if det R exceeds the threshold at eps and at eps / 10."""
    d1 = density_matrix(problem, x0, phi_alpha, bc, lam, eps)
    d2 = density_matrix(problem, x0, phi_alpha, bc, lam, eps / 10)
    two = d1.detR > MULT_TWO_THRESHOLD and d2.detR > MULT_TWO_THRESHOLD
    return ("two" if two else "one"), (d1, d2)
