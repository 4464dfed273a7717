"""Exception and warning types shared across the package."""


class BNFError(Exception):
    """Base class for all package errors."""


class RationalDirection(BNFError):
    """A winding matrix maps a nonzero integer frequency to (numerically) zero."""

    def __init__(self, xi, norm):
        self.xi = tuple(int(v) for v in xi)
        self.norm = float(norm)
        super().__init__(f"|F xi| = {self.norm:.3e} for xi = {self.xi}")


class ResonantFiber(BNFError):
    """A fiber k sits on (or too close to) a diffraction hyperplane."""

    def __init__(self, xi, sigma, k=None):
        self.xi = tuple(int(v) for v in xi)
        self.sigma = float(sigma)
        self.k = None if k is None else tuple(float(v) for v in k)
        super().__init__(f"resonant fiber k = {self.k}: sigma_k{self.xi} = {self.sigma:.3e}")


class MagnitudeOverflow(BNFError):
    """Corrector coefficients exceeded the representable magnitude bound."""


class CombinatorialLimit(BNFError):
    """A tree enumeration was requested beyond its size guard."""


class MissingJet(BNFError):
    """A spectral mode carrying amplitude has no jet in the table."""


class GridTooSmall(BNFError):
    """A wave packet does not fit inside the simulation box or its k-grid."""


class GridMismatch(BNFError):
    """Two grid states live on different grids."""


class Contaminated(BNFError):
    """A moment was requested on a state flagged for boundary contamination."""


class ScenarioError(BNFError):
    """Invalid scenario configuration."""


class BoundaryContamination(UserWarning):
    """Mass reached the outer shell of the periodic box."""


class NumericalGuard(BNFError):
    """A numerical self-check (identity residual, realness, drift) failed."""
