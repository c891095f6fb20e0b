"""Unit test package for pyblgcn."""
