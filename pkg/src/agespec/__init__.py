"""Spectra of age-structured population models with nonlocal diffusion."""
