"""Spectral Floquet-Bloch tools for Helmholtz scattering in a periodic strip."""
