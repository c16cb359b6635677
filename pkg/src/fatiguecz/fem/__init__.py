"""Finite-element core: meshes, elements, assembly, Newton solver."""
