"""ptwell - spectra of PT-symmetric square wells with imaginary point interactions."""

__version__ = "0.1.0"
