"""Robust skew-normal inference: MDPDE estimation, Wald-type tests, CLI and REST backend."""
