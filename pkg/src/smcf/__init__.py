"""Pseudo-spectral laboratory for skew mean curvature flow."""
