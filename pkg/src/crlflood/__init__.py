"""Precode-and-Hash content distribution: simulator and fluid-limit analysis."""
