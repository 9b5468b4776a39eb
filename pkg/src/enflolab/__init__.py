"""Finite-scale laboratory for the Cantorized-Enflo construction."""
