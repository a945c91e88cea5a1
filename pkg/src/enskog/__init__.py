"""Numerical toolkit for global mild solutions of the Enskog equation with external forces."""
